"""Preferences, technology, factor prices, budgets, transfers and Euler residuals.

All functions accept scalars or numpy arrays and broadcast. The strict
versions raise on out-of-domain inputs; the ``*_ext`` variants used inside
the solvers extend marginal utilities linearly past the domain edges so
Newton iterates that stray into infeasible territory still see finite
residuals pointing back toward feasibility.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .params import ModelParams

# Below this consumption level marginal utility is extended linearly.
C_FLOOR = 1e-6
# Labour is extended linearly within this distance of 0 and of l_tilde.
N_EDGE = 1e-6


@dataclass(frozen=True)
class Prices:
    w: float
    r: float

    def __post_init__(self):
        if not np.all(np.asarray(self.w) > 0):
            raise ValueError(f"wage must be positive, got {self.w}")
        if not np.all(np.asarray(self.r) > -1):
            raise ValueError(f"interest rate must exceed -1, got {self.r}")


@dataclass(frozen=True)
class FiscalSlice:
    tau_l: float
    tau_k: float
    tau_c: float
    transfer_by_age: np.ndarray = field(default=None)

    def __post_init__(self):
        for name in ("tau_l", "tau_k", "tau_c"):
            v = getattr(self, name)
            if not 0 <= v < 1:
                raise ValueError(f"{name}={v} outside [0, 1)")
        if self.transfer_by_age is not None and np.any(np.asarray(self.transfer_by_age) < 0):
            raise ValueError("transfers must be non-negative")


@dataclass(frozen=True)
class AggregateState:
    K: float
    L: float
    Y: float
    C: float
    I: float
    T_rev: float


def _positive(name, x):
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise ValueError(f"{name} must be positive")
    return x


# --- technology ---------------------------------------------------------------

def output(K, L, params: ModelParams):
    K, L = _positive("K", K), _positive("L", L)
    return params.A * K ** params.alpha * L ** (1 - params.alpha)


def wage(K, L, params: ModelParams):
    K, L = _positive("K", K), _positive("L", L)
    return (1 - params.alpha) * params.A * (K / L) ** params.alpha


def marginal_product_capital(K, L, params: ModelParams):
    K, L = _positive("K", K), _positive("L", L)
    return params.alpha * params.A * (L / K) ** (1 - params.alpha)


def interest(K, L, params: ModelParams, tau_c=0.0):
    """Household-facing return on capital, net of depreciation and the profit tax."""
    return (1 - np.asarray(tau_c)) * (marginal_product_capital(K, L, params) - params.delta)


def accounting_profit(K, L, params: ModelParams):
    """Profit-tax base ``Y - wL - delta K``; equals ``(MPK - delta) K`` under marginal-product wages."""
    return output(K, L, params) - wage(K, L, params) * np.asarray(L) - params.delta * np.asarray(K)


# --- preferences --------------------------------------------------------------

def mu_consumption(c, sigma):
    c = np.asarray(c, dtype=float)
    if np.any(~(c > 0)):
        raise ValueError("consumption must be positive")
    return c ** (-sigma)


def mu_consumption_ext(c, sigma):
    """Marginal utility and its derivative, linear below ``C_FLOOR``."""
    c = np.asarray(c, dtype=float)
    low = c < C_FLOOR
    cc = np.where(low, C_FLOOR, c)
    mu = cc ** (-sigma)
    dmu = -sigma * cc ** (-sigma - 1)
    mu = np.where(low, mu + dmu * (c - C_FLOOR), mu)
    return mu, dmu


def _ellip_core(x, nu):
    """Elliptical marginal-disutility shape f(x) and f'(x) for x in (0, 1)."""
    xn = x ** nu
    f = x ** (nu - 1) * (1 - xn) ** ((1 - nu) / nu)
    df = (nu - 1) * x ** (nu - 2) * (1 - xn) ** ((1 - 2 * nu) / nu)
    return f, df


def mdu_labor_elliptical(n, chi, params: ModelParams):
    """Marginal disutility of labour; diverges as ``n -> l_tilde``."""
    n = np.asarray(n, dtype=float)
    if np.any(n < 0):
        raise ValueError("labour must be non-negative")
    if np.any(n >= params.l_tilde):
        raise ValueError("labour must be below the time endowment (marginal disutility diverges)")
    x = n / params.l_tilde
    nu = params.ellip_nu
    return np.asarray(chi) * (params.ellip_b / params.l_tilde) * x ** (nu - 1) * (1 - x ** nu) ** ((1 - nu) / nu)


def mdu_labor_ext(n, chi, params: ModelParams):
    """Marginal disutility and its derivative in ``n``, linear within ``N_EDGE`` of 0 and ``l_tilde``."""
    n = np.asarray(n, dtype=float)
    lt = params.l_tilde
    lo, hi = N_EDGE * lt, (1 - N_EDGE) * lt
    nc = np.clip(n, lo, hi)
    f, df = _ellip_core(nc / lt, params.ellip_nu)
    scale = np.asarray(chi) * params.ellip_b / lt
    m = scale * f
    dm = scale * df / lt
    m = np.where((n < lo) | (n > hi), m + dm * (n - nc), m)
    return m, dm


def mdu_labor_cfe(n, theta):
    n = np.asarray(n, dtype=float)
    if np.any(n < 0):
        raise ValueError("labour must be non-negative")
    return n ** (1.0 / theta)


def period_utility(c, n, chi, params: ModelParams):
    """CRRA consumption utility plus elliptical leisure utility.

    For ``c <= C_FLOOR`` the consumption term continues as the second-order
    Taylor expansion at ``C_FLOOR``: finite, strongly negative, and
    increasing in ``c``. Labour outside ``[0, l_tilde)`` raises.
    """
    c = np.asarray(c, dtype=float)
    n = np.asarray(n, dtype=float)
    if np.any(n < 0) or np.any(n >= params.l_tilde):
        raise ValueError("labour must lie in [0, l_tilde)")
    s = params.sigma
    cc = np.maximum(c, C_FLOOR)
    uc = cc ** (1 - s) / (1 - s)
    d = c - C_FLOOR
    ext = C_FLOOR ** (1 - s) / (1 - s) + C_FLOOR ** (-s) * d - 0.5 * s * C_FLOOR ** (-s - 1) * d ** 2
    uc = np.where(c < C_FLOOR, ext, uc)
    x = n / params.l_tilde
    nu = params.ellip_nu
    un = np.asarray(chi) * params.ellip_b * (1 - x ** nu) ** (1 / nu)
    return uc + un


def consumption_from_budget(n, b_now, b_next, prices: Prices, tau_l, tau_k, X):
    """Consumption implied by the period budget; negative values are returned, not rejected."""
    return ((1 - tau_l) * prices.w * np.asarray(n) + (1 + prices.r * (1 - tau_k)) * np.asarray(b_now)
            + X - np.asarray(b_next))


def balanced_transfer(labor_income, capital_income, profit, rates, S, R):
    """Per-retiree transfer that spends all pension tax revenue.

    ``labor_income`` is the sum of ``w n``, ``capital_income`` the sum of
    ``r b`` and ``profit`` the accounting profit ``Y - wL - delta K``;
    ``rates`` is ``(tau_l, tau_k, tau_c)``.
    """
    if S <= R:
        raise ValueError("need S > R for a non-empty retired population")
    tau_l, tau_k, tau_c = rates
    revenue = tau_l * labor_income + tau_k * capital_income + tau_c * profit
    return revenue / (S - R)


def transfer_by_age(X, S, R):
    v = np.zeros(S)
    v[R:] = X
    return v


def euler_labor_residual(c, n, prices: Prices, tau_l, chi, params: ModelParams):
    return prices.w * (1 - tau_l) * mu_consumption(c, params.sigma) - mdu_labor_elliptical(n, chi, params)


def euler_savings_residual(c_now, c_next, r_next, tau_k_next, params: ModelParams):
    return (mu_consumption(c_now, params.sigma)
            - params.beta * (1 + r_next * (1 - tau_k_next)) * mu_consumption(c_next, params.sigma))
