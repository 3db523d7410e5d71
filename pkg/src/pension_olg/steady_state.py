"""Stationary equilibria under the PAYG regime and under settled reform regimes."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import economics as econ
from .errors import ConvergenceError, ScenarioInfeasible
from .household import LifetimeEnvironment, plan_from_unknowns, residual_stack, solve_lifetime
from .numerics import RootOptions, solve_root
from .params import REFORM_INSTRUMENTS, ModelParams, ScenarioSpec

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FiscalRule:
    """How pensions are paid and financed in a stationary regime.

    ``baseline_paygo``: fixed tax rates, all revenue paid out equally to the
    ``S - R`` retirees. Reform instruments: every retiree receives ``payout``
    and the instrument's rate adjusts to finance it; other rates are zero.
    """

    instrument: str
    payout: float = 0.0
    tau_l: float = 0.0
    tau_k: float = 0.0
    tau_c: float = 0.0

    @classmethod
    def paygo(cls, params: ModelParams) -> "FiscalRule":
        return cls("baseline_paygo", 0.0, params.tau_l0, params.tau_k0, params.tau_c0)

    @classmethod
    def funded(cls, instrument: str, payout: float) -> "FiscalRule":
        if instrument not in REFORM_INSTRUMENTS:
            raise ValueError(f"not a reform instrument: {instrument!r}")
        return cls(instrument, float(payout))


@dataclass
class FiscalState:
    w: float
    r: float
    tau_l: float
    tau_k: float
    tau_c: float
    transfer: float
    revenue: float


def endogenous_rate_for_payout(instrument: str, payout_per_retiree: float, K: float, L: float,
                               params: ModelParams, n_recipients: Optional[float] = None) -> float:
    """Tax rate on ``instrument`` that exactly finances ``n_recipients * payout``.

    ``n_recipients`` defaults to the ``S - R`` retired cohorts. For the
    profit tax the base ``Y - wL - delta K`` does not depend on the rate
    because wages equal the marginal product whatever the rate, so the
    rate is the ratio of requirement to base.
    """
    if n_recipients is None:
        n_recipients = params.n_retired
    need = n_recipients * payout_per_retiree
    if need == 0:
        return 0.0
    if instrument == "labor_tax":
        base = econ.wage(K, L, params) * L
    elif instrument == "capital_income_tax":
        base = econ.interest(K, L, params, 0.0) * K
    elif instrument == "profit_tax":
        base = econ.accounting_profit(K, L, params)
    else:
        raise ValueError(f"{instrument!r} has no endogenous rate")
    base = float(base)
    if base <= 0:
        raise ScenarioInfeasible(f"{instrument} base is non-positive ({base:.4g})")
    rate = need / base
    if rate >= 1:
        raise ScenarioInfeasible(f"{instrument} rate {rate:.4f} >= 1: payout unaffordable")
    return float(rate)


def fiscal_state(rule: FiscalRule, K: float, L: float, params: ModelParams,
                 n_recipients: Optional[float] = None) -> FiscalState:
    w = float(econ.wage(K, L, params))
    profit = float(econ.accounting_profit(K, L, params))
    if rule.instrument == "baseline_paygo":
        tl, tk, tc = rule.tau_l, rule.tau_k, rule.tau_c
        r = float(econ.interest(K, L, params, tc))
        X = econ.balanced_transfer(w * L, r * K, profit, (tl, tk, tc), params.S, params.R)
        revenue = X * params.n_retired
        return FiscalState(w, r, tl, tk, tc, X, revenue)
    rate = endogenous_rate_for_payout(rule.instrument, rule.payout, K, L, params, n_recipients)
    tl = rate if rule.instrument == "labor_tax" else 0.0
    tk = rate if rule.instrument == "capital_income_tax" else 0.0
    tc = rate if rule.instrument == "profit_tax" else 0.0
    r = float(econ.interest(K, L, params, tc))
    revenue = tl * w * L + tk * r * K + tc * profit
    return FiscalState(w, r, tl, tk, tc, rule.payout, revenue)


@dataclass
class SteadyState:
    label: str
    rule: FiscalRule
    w: float
    r: float
    c: np.ndarray
    n: np.ndarray
    b: np.ndarray              # savings held entering each age; b[0] = 0
    K: float
    L: float
    Y: float
    C: float
    I: float
    tau_l: float
    tau_k: float
    tau_c: float
    transfer: float
    revenue: float
    R: int = 0
    iterations: int = 0
    trajectory: list = field(default_factory=list)
    max_euler_residual: float = float("nan")

    @property
    def transfer_by_age(self) -> np.ndarray:
        return econ.transfer_by_age(self.transfer, self.c.size, self.R)

    @property
    def b_next(self) -> np.ndarray:
        return np.r_[self.b[1:], 0.0]

    def average_earnings(self) -> float:
        """Average gross labour earnings per person, ``w * L / S``."""
        return self.w * self.L / self.n.size

    def summary(self) -> dict:
        return {"label": self.label, "instrument": self.rule.instrument, "w": self.w, "r": self.r,
                "K": self.K, "L": self.L, "Y": self.Y, "C": self.C, "I": self.I,
                "tau_l": self.tau_l, "tau_k": self.tau_k, "tau_c": self.tau_c,
                "transfer": self.transfer, "revenue": self.revenue,
                "outer_iterations": self.iterations, "max_euler_residual": self.max_euler_residual}


def initial_aggregate_guess(params: ModelParams, r_guess: float = 0.1):
    L0 = 0.5 * params.S * params.l_tilde
    k_per_l = (params.alpha * params.A / (r_guess + params.delta)) ** (1 / (1 - params.alpha))
    return k_per_l * L0, L0


def _environment(fs: FiscalState, params: ModelParams) -> LifetimeEnvironment:
    X = econ.transfer_by_age(fs.transfer, params.S, params.R)
    return LifetimeEnvironment.constant(fs.w, fs.r, fs.tau_l, fs.tau_k, X, params)


def _solve_newborn(rule, K, L, params, opts, x0):
    env = _environment(fiscal_state(rule, K, L, params), params)
    try:
        return solve_lifetime(env, params, opts, x0=x0)
    except ConvergenceError:
        if x0 is None:
            raise
        return solve_lifetime(env, params, opts)


def _joint_residual(x, rule, params):
    S = params.S
    K = float(np.sum(x[S:]))
    L = float(np.sum(x[:S]))
    if not (K > 0 and L > 0):
        return np.full(x.size, np.nan)
    try:
        fs = fiscal_state(rule, K, L, params)
    except ScenarioInfeasible:
        return np.full(x.size, np.nan)
    return residual_stack(x, _environment(fs, params), params)


def solve_steady_state(params: ModelParams, rule: FiscalRule, label: str = "",
                       K0: Optional[float] = None, L0: Optional[float] = None,
                       damping: float = 0.3, tol: float = 1e-8, max_iterations: int = 2000,
                       polish: bool = True) -> SteadyState:
    """Stationary equilibrium for ``rule``.

    Outer damped fixed point on ``(K, L)``: prices and the fiscal quantity are
    recomputed from the current aggregates, the newborn's lifetime problem is
    solved at those constant prices, and the implied aggregates are mixed
    into the guess. The damping starts at ``damping`` and is halved whenever
    the relative change grows, since savings respond so strongly to the
    interest rate that the undamped map has a slope well below -1; it
    recovers geometrically while the change keeps shrinking. After the
    relative change drops below ``tol`` the joint system (household
    conditions with prices written as functions of the household's own
    savings and labour) is polished with Newton steps so the reported state
    clears markets to rounding error.
    """
    if K0 is None or L0 is None:
        gK, gL = initial_aggregate_guess(params)
        K0 = gK if K0 is None else K0
        L0 = gL if L0 is None else L0
    K, L = float(K0), float(L0)
    x = None
    trajectory = []
    hh_opts = RootOptions(tol_residual=1e-11, max_iterations=200)
    xi = damping
    last_change = np.inf
    prev = None
    it = 0
    while True:
        it += 1
        if it > max_iterations:
            raise ConvergenceError("steady-state outer loop did not converge",
                                   best_residual=min(t[2] for t in trajectory) if trajectory else np.inf,
                                   iterations=max_iterations, history=trajectory)
        try:
            plan = _solve_newborn(rule, K, L, params, hh_opts, x)
        except (ConvergenceError, ScenarioInfeasible, ValueError):
            if prev is None:
                raise
            # the trial aggregates were too far out; retreat along the last step
            K0_, L0_, dK, dL = prev
            xi *= 0.5
            prev = (K0_, L0_, 0.5 * dK, 0.5 * dL)
            K, L = K0_ + 0.5 * dK, L0_ + 0.5 * dL
            continue
        x = plan.unknowns
        K_imp, L_imp = float(plan.savings.sum()), float(plan.labor.sum())
        change = max(abs(K_imp - K) / K, abs(L_imp - L) / L)
        trajectory.append((K, L, change))
        if change <= tol:
            break
        if change > last_change:
            xi = max(0.5 * xi, 1e-3)
        else:
            xi = min(1.2 * xi, damping)
        last_change = change
        dK, dL = xi * (K_imp - K), xi * (L_imp - L)
        # far from equilibrium the implied aggregates can be orders of
        # magnitude off; never move more than halfway to zero or to double
        shrink = max(1.0, -2 * dK / K, -2 * dL / L, dK / K, dL / L)
        dK, dL = dK / shrink, dL / shrink
        prev = (K, L, dK, dL)
        K, L = K + dK, L + dL

    if polish:
        x = solve_root(lambda v: _joint_residual(v, rule, params), x,
                       RootOptions(tol_residual=1e-12, max_iterations=50))
    return _finalize(x, rule, params, label, it, trajectory)


def _finalize(x, rule, params, label, iterations, trajectory) -> SteadyState:
    S = params.S
    n = x[:S].copy()
    K, L = float(np.sum(x[S:])), float(np.sum(n))
    fs = fiscal_state(rule, K, L, params)
    env = _environment(fs, params)
    plan = plan_from_unknowns(x, env, params)
    Y = float(econ.output(K, L, params))
    resid = residual_stack(x, env, params)
    return SteadyState(label=label or rule.instrument, rule=rule, w=fs.w, r=fs.r, c=plan.consumption,
                       n=n, b=plan.savings, K=K, L=L, Y=Y, C=float(plan.consumption.sum()),
                       I=params.delta * K, tau_l=fs.tau_l, tau_k=fs.tau_k, tau_c=fs.tau_c,
                       transfer=fs.transfer, revenue=fs.revenue, R=params.R, iterations=iterations,
                       trajectory=trajectory, max_euler_residual=float(np.max(np.abs(resid))))


def settled_rule(spec: ScenarioSpec, baseline: SteadyState, params: ModelParams) -> FiscalRule:
    """Long-run fiscal regime of a scenario once every window retiree has died."""
    if not spec.is_reform:
        return FiscalRule.paygo(params)
    payout = spec.payout_low_ratio * baseline.average_earnings()
    if spec.post_window_pillar != "subsistence_for_all":
        payout = 0.0
    return FiscalRule.funded(spec.instrument, payout)


def steady_state_residuals(ss: SteadyState, params: ModelParams) -> dict:
    """Clearing and optimality residuals of a solved steady state."""
    fs = fiscal_state(ss.rule, ss.K, ss.L, params)
    x = np.r_[ss.n, ss.b[1:]]
    euler = residual_stack(x, _environment(fs, params), params)
    return {
        "euler": float(np.max(np.abs(euler))),
        "capital_market": abs(ss.K - float(np.sum(ss.b[1:]))),
        "labor_market": abs(ss.L - float(np.sum(ss.n))),
        "goods_market": abs(ss.Y - ss.C - params.delta * ss.K),
        "budget": abs(ss.revenue - params.n_retired * ss.transfer),
        "wage": abs(ss.w - float(econ.wage(ss.K, ss.L, params))),
    }
