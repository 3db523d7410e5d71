"""Life-cycle problem of one cohort: labour and savings first-order conditions.

Unknowns are the labour choices ``n_0..n_{p-1}`` and the savings choices
``b_1..b_{p-1}`` carried into the next period (terminal savings are zero).
Consumption follows from the period budget. The residual stack lists all
intratemporal (labour) residuals by age, then all intertemporal (savings)
residuals by age.

Two solvers share the same equations:

* :func:`solve_lifetime` - dense damped Newton via :func:`numerics.solve_root`
  on one cohort, the reference path;
* :func:`solve_cohort_batch` - many cohorts at once, Newton steps from a
  block-tridiagonal elimination (2x2 blocks per age), used by the steady-state
  polish and the transition loop.

With ``params.clamp_savings`` the savings condition becomes the
Fischer-Burmeister complementarity ``b + E - sqrt(b^2 + E^2) = 0`` between
next-period savings ``b >= 0`` and the Euler residual ``E >= 0``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .economics import mdu_labor_ext, mu_consumption_ext
from .errors import ConvergenceError, NonFiniteError, ScenarioInfeasible
from .numerics import MAX_HALVINGS, RootOptions, forward_difference_jacobian, solve_root
from .params import ModelParams

FB_SMOOTH = 1e-24


@dataclass(frozen=True)
class LifetimeEnvironment:
    """Prices and fiscal terms faced over the remaining ``p`` periods of life.

    ``r`` is the return net of depreciation and profit tax but before the
    personal capital-income tax ``tau_k``. ``first_age`` is the 1-based age
    in the first listed period; it defaults to ``S - p + 1``.
    """

    w: np.ndarray
    r: np.ndarray
    tau_l: np.ndarray
    tau_k: np.ndarray
    transfer: np.ndarray
    initial_savings: float = 0.0
    first_age: Optional[int] = None

    def __post_init__(self):
        arrs = {k: np.atleast_1d(np.asarray(getattr(self, k), dtype=float))
                for k in ("w", "r", "tau_l", "tau_k", "transfer")}
        p = arrs["w"].size
        for k, v in arrs.items():
            if v.size == 1 and p > 1:
                v = np.full(p, v[0])
            if v.size != p:
                raise ValueError(f"{k} has length {v.size}, expected {p}")
            object.__setattr__(self, k, v)
        if not np.isfinite(self.initial_savings):
            raise ValueError("initial_savings must be finite")

    @property
    def p(self) -> int:
        return self.w.size

    def start_age(self, params: ModelParams) -> int:
        return self.first_age if self.first_age is not None else params.S - self.p + 1

    @classmethod
    def constant(cls, w, r, tau_l, tau_k, transfer_by_age, params: ModelParams, initial_savings=0.0):
        """Full-lifetime environment at constant prices (steady-state household)."""
        S = params.S
        return cls(np.full(S, w), np.full(S, r), np.full(S, tau_l), np.full(S, tau_k),
                   np.asarray(transfer_by_age, dtype=float), initial_savings, 1)


@dataclass
class HouseholdPlan:
    consumption: np.ndarray
    labor: np.ndarray
    savings_next: np.ndarray
    initial_savings: float = 0.0

    @property
    def savings(self) -> np.ndarray:
        """Savings held entering each period (``initial_savings`` first)."""
        return np.r_[self.initial_savings, self.savings_next[:-1]]

    @property
    def unknowns(self) -> np.ndarray:
        return np.r_[self.labor, self.savings_next[:-1]]


# --- dense single-cohort path -------------------------------------------------

def _chi_slice(env, params):
    a0 = env.start_age(params) - 1
    return params.chi[a0:a0 + env.p]


def _pieces(x, env, params):
    p = env.p
    n = x[:p]
    bn = np.r_[x[p:], 0.0]
    bcur = np.r_[env.initial_savings, bn[:-1]]
    a = (1 - env.tau_l) * env.w
    R = 1 + env.r * (1 - env.tau_k)
    c = a * n + R * bcur + env.transfer - bn
    mu, dmu = mu_consumption_ext(c, params.sigma)
    chi = _chi_slice(env, params)
    m, dm = mdu_labor_ext(n, chi, params)
    return n, bn, bcur, a, R, c, mu, dmu, chi, m, dm


def consumption_path(x, env: LifetimeEnvironment, params: ModelParams):
    return _pieces(np.asarray(x, dtype=float), env, params)[5]


def residual_stack(x, env: LifetimeEnvironment, params: ModelParams) -> np.ndarray:
    """Labour residuals (p of them) followed by savings residuals (p - 1)."""
    x = np.asarray(x, dtype=float)
    n, bn, bcur, a, R, c, mu, dmu, chi, m, dm = _pieces(x, env, params)
    lab = a * mu - m
    sav = mu[:-1] - params.beta * R[1:] * mu[1:]
    if params.clamp_savings:
        b = bn[:-1]
        sav = b + sav - np.sqrt(b * b + sav * sav + FB_SMOOTH)
    return np.r_[lab, sav]


def residual_jacobian(x, env: LifetimeEnvironment, params: ModelParams) -> np.ndarray:
    """Analytic Jacobian of :func:`residual_stack`."""
    x = np.asarray(x, dtype=float)
    p = env.p
    n, bn, bcur, a, R, c, mu, dmu, chi, m, dm = _pieces(x, env, params)
    J = np.zeros((2 * p - 1, 2 * p - 1))
    j = np.arange(p)
    J[j, j] = a * a * dmu - dm
    jb = j[:-1]                       # ages with a savings unknown b_{j+1}
    J[jb, p + jb] = -a[jb] * dmu[jb]
    jp = j[1:]                        # ages whose entering savings is unknown
    J[jp, p + jp - 1] = a[jp] * dmu[jp] * R[jp]
    if p > 1:
        g = params.beta * R[1:]
        rows = p + jb
        E = np.zeros((p - 1, 2 * p - 1))
        k = np.arange(p - 1)
        E[k, jb] = dmu[:-1] * a[:-1]
        E[k, p + jb] = -dmu[:-1] - g * dmu[1:] * R[1:]
        E[k[1:], p + jb[1:] - 1] = dmu[1:-1] * R[1:-1]
        E[k, jb + 1] = -g * dmu[1:] * a[1:]
        E[k[:-1], p + jb[:-1] + 1] = g[:-1] * dmu[1:-1]
        if params.clamp_savings:
            b = bn[:-1]
            s = mu[:-1] - g * mu[1:]
            rho = np.sqrt(b * b + s * s + FB_SMOOTH)
            E *= (1 - s / rho)[:, None]
            E[k, p + jb] += 1 - b / rho
        J[rows] = E
    return J


def default_initial_guess(env: LifetimeEnvironment, params: ModelParams) -> np.ndarray:
    """Labour at ``0.4 l_tilde``; savings a tent peaking at retirement, one period's earnings high."""
    p = env.p
    n = np.full(p, 0.4 * params.l_tilde)
    if p == 1:
        return n
    s0 = env.start_age(params)
    ages_next = np.arange(s0 + 1, s0 + p)           # ages at which the savings are held
    peak = params.R + 1
    tent = np.clip(1 - np.abs(ages_next - peak) / peak, 0.0, None)
    earnings = float(np.mean((1 - env.tau_l) * env.w)) * 0.4 * params.l_tilde
    remaining = (s0 + p - ages_next) / p
    b = earnings * tent + env.initial_savings * remaining
    return np.r_[n, b]


def plan_from_unknowns(x, env: LifetimeEnvironment, params: ModelParams) -> HouseholdPlan:
    p = env.p
    x = np.asarray(x, dtype=float)
    c = consumption_path(x, env, params)
    return HouseholdPlan(consumption=c, labor=x[:p].copy(), savings_next=np.r_[x[p:], 0.0],
                         initial_savings=float(env.initial_savings))


def solve_lifetime(env: LifetimeEnvironment, params: ModelParams, opts: Optional[RootOptions] = None,
                   x0=None, jacobian: str = "analytic") -> HouseholdPlan:
    """Solve the cohort's first-order conditions.

    ``jacobian="analytic"`` uses :func:`residual_jacobian`;
    ``"forward_difference"`` defers to the root finder's differencing.
    """
    if np.any(env.w <= 0):
        raise ValueError("wages must be strictly positive")
    opts = opts or RootOptions(tol_residual=1e-10, max_iterations=200)
    if x0 is None:
        x0 = default_initial_guess(env, params)
    F = lambda x: residual_stack(x, env, params)
    jac = (lambda x: residual_jacobian(x, env, params)) if jacobian == "analytic" else None
    try:
        x = solve_root(F, x0, opts, jacobian=jac)
    except ConvergenceError as exc:
        raise ConvergenceError("household problem did not converge", exc.best_residual, exc.iterations) from exc
    plan = plan_from_unknowns(x, env, params)
    if np.any(plan.consumption <= 0):
        raise ScenarioInfeasible("no plan with positive consumption satisfies the first-order conditions")
    return plan


# --- batched block-tridiagonal path ------------------------------------------

@dataclass
class CohortBatch:
    """``M`` cohorts laid out on a common ``S``-age grid.

    Ages ``j < frozen[m]`` lie before the cohort enters the problem; their
    unknowns are pinned (labour 0, savings 0, except the last frozen savings
    which holds the entering wealth ``b_init``). Arrays of shape ``(M, S)``
    give the after-tax wage ``a = (1 - tau_l) w``, the gross return
    ``R = 1 + r (1 - tau_k)`` and the transfer at each age.
    """

    a: np.ndarray
    R: np.ndarray
    X: np.ndarray
    frozen: np.ndarray
    b_init: np.ndarray

    @property
    def M(self):
        return self.a.shape[0]

    @classmethod
    def from_environments(cls, envs, params: ModelParams) -> "CohortBatch":
        S, M = params.S, len(envs)
        a = np.ones((M, S))
        R = np.ones((M, S))
        X = np.zeros((M, S))
        frozen = np.zeros(M, dtype=int)
        b_init = np.zeros(M)
        for i, env in enumerate(envs):
            f = env.start_age(params) - 1
            if f + env.p != S:
                raise ValueError("batched environments must run to the end of life")
            a[i, f:] = (1 - env.tau_l) * env.w
            R[i, f:] = 1 + env.r * (1 - env.tau_k)
            X[i, f:] = env.transfer
            frozen[i] = f
            b_init[i] = env.initial_savings
        return cls(a, R, X, frozen, b_init)


def _batch_eval(n, bn, batch: CohortBatch, params: ModelParams, want_jac: bool):
    M, S = n.shape
    beta = params.beta
    active = np.arange(S)[None, :] >= batch.frozen[:, None]
    bcur = np.empty_like(bn)
    bcur[:, 1:] = bn[:, :-1]
    bcur[:, 0] = np.where(batch.frozen == 0, batch.b_init, 0.0)
    a, R = batch.a, batch.R
    c = a * n + R * bcur + batch.X - bn
    mu, dmu = mu_consumption_ext(c, params.sigma)
    m, dm = mdu_labor_ext(n, params.chi[None, :], params)
    F1 = a * mu - m
    F2 = np.empty_like(F1)
    g = beta * R[:, 1:]
    E = mu[:, :-1] - g * mu[:, 1:]
    if params.clamp_savings:
        b = bn[:, :-1]
        rho = np.sqrt(b * b + E * E + FB_SMOOTH)
        F2[:, :-1] = b + E - rho
    else:
        F2[:, :-1] = E
    F2[:, -1] = bn[:, -1]
    # pinned ages before entry
    target = np.zeros_like(bn)
    rows = np.flatnonzero(batch.frozen > 0)
    target[rows, batch.frozen[rows] - 1] = batch.b_init[rows]
    F1 = np.where(active, F1, n)
    F2 = np.where(active, F2, bn - target)
    if not want_jac:
        return F1, F2, c
    D = np.zeros((M, S, 2, 2))
    Lo = np.zeros((M, S, 2, 2))
    Up = np.zeros((M, S, 2, 2))
    D[:, :, 0, 0] = a * a * dmu - dm
    D[:, :, 0, 1] = -a * dmu
    Lo[:, 1:, 0, 1] = a[:, 1:] * dmu[:, 1:] * R[:, 1:]
    e10 = dmu[:, :-1] * a[:, :-1]
    e11 = -dmu[:, :-1] - g * dmu[:, 1:] * R[:, 1:]
    l11 = np.zeros_like(e10)
    l11[:, 1:] = dmu[:, 1:-1] * R[:, 1:-1]
    u10 = -g * dmu[:, 1:] * a[:, 1:]
    u11 = g * dmu[:, 1:]
    if params.clamp_savings:
        wE = 1 - E / rho
        e10, e11, l11, u10, u11 = (wE * v for v in (e10, e11, l11, u10, u11))
        e11 = e11 + (1 - bn[:, :-1] / rho)
    D[:, :-1, 1, 0] = e10
    D[:, :-1, 1, 1] = e11
    Lo[:, :-1, 1, 1] = l11
    Up[:, :-1, 1, 0] = u10
    Up[:, :-1, 1, 1] = u11
    D[:, -1, 1, 1] = 1.0
    inactive = ~active
    D[inactive] = np.eye(2)
    Lo[inactive] = 0.0
    Up[inactive] = 0.0
    return F1, F2, c, D, Lo, Up


def _inv2(Mx):
    det = Mx[..., 0, 0] * Mx[..., 1, 1] - Mx[..., 0, 1] * Mx[..., 1, 0]
    inv = np.empty_like(Mx)
    inv[..., 0, 0] = Mx[..., 1, 1]
    inv[..., 1, 1] = Mx[..., 0, 0]
    inv[..., 0, 1] = -Mx[..., 0, 1]
    inv[..., 1, 0] = -Mx[..., 1, 0]
    return inv / det[..., None, None]


def block_tridiag_solve(D, Lo, Up, rhs):
    """Solve block-tridiagonal systems with 2x2 blocks, batched over the leading axis.

    ``D``, ``Lo``, ``Up`` have shape ``(M, S, 2, 2)``; ``rhs`` has shape
    ``(M, S, 2)``. Row ``j`` reads ``Lo_j x_{j-1} + D_j x_j + Up_j x_{j+1}``.
    """
    M, S = rhs.shape[:2]
    Cp = np.empty_like(Up)
    dp = np.empty_like(rhs)
    for j in range(S):
        if j == 0:
            Mj, rj = D[:, 0], rhs[:, 0]
        else:
            Mj = D[:, j] - np.einsum("mik,mkl->mil", Lo[:, j], Cp[:, j - 1])
            rj = rhs[:, j] - np.einsum("mik,mk->mi", Lo[:, j], dp[:, j - 1])
        inv = _inv2(Mj)
        Cp[:, j] = np.einsum("mik,mkl->mil", inv, Up[:, j])
        dp[:, j] = np.einsum("mik,mk->mi", inv, rj)
    x = np.empty_like(rhs)
    x[:, -1] = dp[:, -1]
    for j in range(S - 2, -1, -1):
        x[:, j] = dp[:, j] - np.einsum("mik,mk->mi", Cp[:, j], x[:, j + 1])
    return x


@dataclass
class BatchSolution:
    labor: np.ndarray          # (M, S)
    savings_next: np.ndarray   # (M, S), last column zero
    consumption: np.ndarray    # (M, S)
    max_residual: np.ndarray   # (M,)
    iterations: int


def batch_residual_norm(n, bn, batch, params):
    F1, F2, _ = _batch_eval(n, bn, batch, params, want_jac=False)
    return np.maximum(np.max(np.abs(F1), axis=1), np.max(np.abs(F2), axis=1))


def solve_cohort_batch(batch: CohortBatch, params: ModelParams, n0, bn0, tol: float = 1e-10,
                       max_iterations: int = 100) -> BatchSolution:
    """Newton iteration on all cohorts at once with per-cohort step halving."""
    n = np.array(n0, dtype=float, copy=True)
    bn = np.array(bn0, dtype=float, copy=True)
    # enforce the pinned coordinates exactly
    S = params.S
    active = np.arange(S)[None, :] >= batch.frozen[:, None]
    n = np.where(active, n, 0.0)
    bn = np.where(active, bn, 0.0)
    rows = np.flatnonzero(batch.frozen > 0)
    bn[rows, batch.frozen[rows] - 1] = batch.b_init[rows]
    bn[:, -1] = 0.0

    for it in range(max_iterations + 1):
        F1, F2, c, D, Lo, Up = _batch_eval(n, bn, batch, params, want_jac=True)
        res = np.maximum(np.max(np.abs(F1), axis=1), np.max(np.abs(F2), axis=1))
        if not np.all(np.isfinite(res)):
            bad = int(np.flatnonzero(~np.isfinite(res))[0])
            raise NonFiniteError("non-finite household residual", coordinate=bad)
        todo = res > tol
        if not todo.any():
            return BatchSolution(n, bn, c, res, it)
        if it == max_iterations:
            break
        idx = np.flatnonzero(todo)
        rhs = -np.stack([F1[idx], F2[idx]], axis=-1)
        step = block_tridiag_solve(D[idx], Lo[idx], Up[idx], rhs)
        dn, dbn = step[..., 0], step[..., 1]
        sub = _subset(batch, idx)
        norm0 = np.sqrt(np.sum(F1[idx] ** 2, axis=1) + np.sum(F2[idx] ** 2, axis=1))
        lam = np.ones(idx.size)
        pending = np.ones(idx.size, dtype=bool)
        n_new, bn_new = n[idx].copy(), bn[idx].copy()
        for _ in range(MAX_HALVINGS + 1):
            pi = np.flatnonzero(pending)
            tn = n[idx][pi] + lam[pi, None] * dn[pi]
            tb = bn[idx][pi] + lam[pi, None] * dbn[pi]
            G1, G2, _ = _batch_eval(tn, tb, _subset(sub, pi), params, want_jac=False)
            nrm = np.sqrt(np.sum(G1 ** 2, axis=1) + np.sum(G2 ** 2, axis=1))
            ok = np.isfinite(nrm) & (nrm < norm0[pi])
            n_new[pi] = tn
            bn_new[pi] = tb
            pending[pi[ok]] = False
            if not pending.any():
                break
            lam[pi[~ok]] *= 0.5
        n[idx] = n_new
        bn[idx] = bn_new
    worst = float(np.max(res))
    raise ConvergenceError("batched household solve did not converge", worst, max_iterations)


def _subset(batch: CohortBatch, idx) -> CohortBatch:
    return CohortBatch(batch.a[idx], batch.R[idx], batch.X[idx], batch.frozen[idx], batch.b_init[idx])
