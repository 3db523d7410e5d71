"""Perfect-foresight transition paths by time-path iteration.

Periods are numbered ``t = 1, ..., T``; period 1 is the first period after
the economy leaves the initial steady state, and the reform is unexpected
before it. Cohorts are indexed by the period in which they enter age 1:
the ``S - 1`` cohorts alive at ``t = 1`` entered at ``2 - S, ..., 0`` and
hold the initial steady state's savings, followed by one newborn cohort per
period ``1..T``. Prices after ``T`` are those of the final steady state.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import economics as econ
from .errors import ConvergenceError, ScenarioInfeasible
from .household import CohortBatch, batch_residual_norm, solve_cohort_batch
from .params import ModelParams, ScenarioSpec, phase_of_period
from .steady_state import SteadyState

log = logging.getLogger(__name__)

# model age s corresponds to real age s + AGE_OFFSET
AGE_OFFSET = 19
WORKER_BAND = (35, 45)
RETIREE_BAND = (62, 72)


@dataclass(frozen=True)
class TPIOptions:
    tol: float = 1e-6
    damping: float = 0.3
    max_iterations: int = 500
    household_tol: float = 1e-11
    adaptive: bool = True

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass
class AggregatePath:
    """Per-period aggregates over ``t = 1..T``.

    ``tax_rate`` is the scenario's endogenous rate (the fixed PAYG labour
    rate in the baseline). ``payout`` is what an eligible retiree receives
    and ``n_eligible`` how many retired cohorts receive it.
    """

    scenario: str
    t: np.ndarray
    K: np.ndarray
    L: np.ndarray
    Y: np.ndarray
    C: np.ndarray
    I: np.ndarray
    w: np.ndarray
    r: np.ndarray
    tau_l: np.ndarray
    tau_k: np.ndarray
    tau_c: np.ndarray
    tax_rate: np.ndarray
    payout: np.ndarray
    n_eligible: np.ndarray
    revenue: np.ndarray
    phase: list

    @property
    def T(self) -> int:
        return self.t.size

    @property
    def tax_to_gdp(self) -> np.ndarray:
        return self.revenue / self.Y

    @property
    def goods_residual(self) -> np.ndarray:
        return self.Y - self.C - self.I

    def as_columns(self) -> dict:
        return {"K": self.K, "L": self.L, "Y": self.Y, "C": self.C, "I": self.I, "w": self.w,
                "r": self.r, "tau_l": self.tau_l, "tau_k": self.tau_k, "tau_c": self.tau_c,
                "tax_rate": self.tax_rate, "payout": self.payout, "revenue": self.revenue,
                "tax_to_gdp": self.tax_to_gdp}


@dataclass
class CohortPanel:
    """Lifetime plans on the common age grid; row ``m`` entered age 1 in ``birth[m]``.

    For cohorts alive at ``t = 1`` the ages before the transition hold the
    initial steady state's choices.
    """

    birth: np.ndarray
    consumption: np.ndarray
    labor: np.ndarray
    savings_next: np.ndarray
    max_residual: np.ndarray


@dataclass
class TransitionResult:
    path: AggregatePath
    cohorts: CohortPanel
    initial: SteadyState
    final: SteadyState
    spec: ScenarioSpec
    params: ModelParams
    iterations: int
    path_change: float
    max_euler_residual: float
    history: list = field(default_factory=list)


# --- scenario mechanics --------------------------------------------------------

def payout_base(baseline_ss: SteadyState) -> float:
    return baseline_ss.average_earnings()


def pension_payout_at(t: int, spec: ScenarioSpec, baseline_ss: SteadyState, params: ModelParams) -> float:
    """Per-retiree payout owed by the first pillar in period ``t``.

    In the baseline (and before a delayed reform) this is the balanced PAYG
    transfer of ``baseline_ss``. After the window the low payout goes to the
    eligible retirees only; see :func:`retiree_eligible`.
    """
    if t < 1:
        raise ValueError("periods start at 1")
    if not spec.is_reform or t < spec.reform_period:
        return baseline_ss.transfer
    base = payout_base(baseline_ss)
    if t < spec.window_end:
        return spec.payout_high_ratio * base
    if spec.post_window_pillar == "none":
        return 0.0
    return spec.payout_low_ratio * base


def retiree_eligible(t: int, age: int, spec: ScenarioSpec, params: ModelParams) -> bool:
    """Whether a retiree of model ``age`` receives the payout in period ``t``."""
    if age <= params.R:
        return False
    if not spec.is_reform or t < spec.window_end:
        return True
    if spec.post_window_pillar == "subsistence_for_grandfathered":
        retired_in = t - age + params.R + 1
        return retired_in <= spec.window_end - 1
    return spec.post_window_pillar == "subsistence_for_all"


def transfer_schedule(n_periods: int, spec: ScenarioSpec, baseline_ss: SteadyState,
                      params: ModelParams) -> np.ndarray:
    """Transfer to each age in periods ``1..n_periods`` for reform periods, shape ``(n_periods, S)``.

    Rows for PAYG periods are filled later from the balanced-budget rule.
    """
    S = params.S
    X = np.zeros((n_periods, S))
    for i in range(n_periods):
        t = i + 1
        P = pension_payout_at(t, spec, baseline_ss, params)
        for s in range(params.R + 1, S + 1):
            if retiree_eligible(t, s, spec, params):
                X[i, s - 1] = P
    return X


def _is_paygo_period(t, spec: ScenarioSpec):
    return (not spec.is_reform) or t < spec.reform_period


def _fiscal_paths(K, L, spec, params, X_reform, tax_rates0):
    """Prices, rates and age transfers implied by guessed aggregate paths.

    The endogenous rate finances the period's payouts exactly, so the
    budget balances by construction for any guess.
    """
    n = K.size
    t = np.arange(1, n + 1)
    w = econ.wage(K, L, params)
    mpk = econ.marginal_product_capital(K, L, params)
    net = mpk - params.delta
    profit = net * K
    tl, tk, tc = (np.full(n, v, dtype=float) for v in tax_rates0)
    X = X_reform.copy()
    paygo = np.array([_is_paygo_period(tt, spec) for tt in t])
    reform = ~paygo
    need = X_reform.sum(axis=1)
    tl[reform] = tk[reform] = tc[reform] = 0.0
    if reform.any():
        if spec.instrument == "labor_tax":
            base = w * L
        else:
            base = profit.copy()
        base = base[reform]
        if np.any(base <= 0):
            raise ScenarioInfeasible(f"{spec.instrument} base is non-positive along the path")
        rate = need[reform] / base
        if np.any(rate >= 1):
            bad = int(t[reform][np.argmax(rate)])
            raise ScenarioInfeasible(f"{spec.instrument} rate {rate.max():.4f} >= 1 in period {bad}")
        target = {"labor_tax": tl, "capital_income_tax": tk, "profit_tax": tc}[spec.instrument]
        target[reform] = rate
    r = (1 - tc) * net
    revenue = tl * w * L + tk * r * K + tc * profit
    if paygo.any():
        Xp = revenue[paygo] / params.n_retired
        X[paygo] = 0.0
        X[np.ix_(paygo, np.arange(params.R, params.S))] = Xp[:, None]
    return w, r, tl, tk, tc, X, revenue


# --- cohort layout -------------------------------------------------------------

def _layout(T, params):
    S = params.S
    birth = np.arange(2 - S, T + 1)
    period = birth[:, None] + np.arange(S)[None, :]   # calendar period at each age
    return birth, period


def _cohort_batch(birth, period, w, r, tl, tk, X, initial: SteadyState, params) -> CohortBatch:
    S = params.S
    idx = np.clip(period, 1, None) - 1
    a = (1 - tl[idx]) * w[idx]
    R = 1 + r[idx] * (1 - tk[idx])
    Xm = X[idx, np.arange(S)[None, :]]
    frozen = np.clip(1 - birth, 0, None)
    b_init = np.where(frozen > 0, initial.b[np.clip(frozen, 0, S - 1)], 0.0)
    return CohortBatch(a, R, Xm, frozen.astype(int), b_init)


def _aggregate(values, period, n_periods, shift=0):
    """Sum ``values`` over cohorts by calendar period (``period + shift``) for periods ``1..n_periods``."""
    p = period + shift
    ok = (p >= 1) & (p <= n_periods)
    out = np.zeros(n_periods)
    np.add.at(out, p[ok] - 1, values[ok])
    return out


def _initial_guess_plans(birth, period, initial: SteadyState, final: SteadyState, T):
    """Warm start: each age follows the steady state closer to the period it is lived in."""
    S = period.shape[1]
    wgt = np.clip((period - 1) / max(T - 1, 1), 0.0, 1.0)
    n = (1 - wgt) * initial.n[None, :] + wgt * final.n[None, :]
    bn = (1 - wgt) * initial.b_next[None, :] + wgt * final.b_next[None, :]
    bn[:, -1] = 0.0
    return n, bn


def linear_guess(initial: SteadyState, final: SteadyState, T: int):
    """Straight-line K and L paths from the initial to the final steady state over ``1..T``."""
    s = np.linspace(0.0, 1.0, T)
    return initial.K + s * (final.K - initial.K), initial.L + s * (final.L - initial.L)


# --- solver --------------------------------------------------------------------

def solve_transition(initial_ss: SteadyState, final_ss: SteadyState, spec: ScenarioSpec,
                     params: ModelParams, opts: TPIOptions | None = None,
                     K_guess=None, L_guess=None) -> TransitionResult:
    """Time-path iteration on the ``K`` and ``L`` paths.

    Each pass computes prices and the endogenous tax path from the guess,
    solves every cohort's remaining-lifetime problem at those prices,
    aggregates savings into implied capital ``K_{t+1}`` and labour ``L_t``
    and mixes them into the guess. ``K_1`` is the initial steady state's
    capital. With ``opts.adaptive`` the mixing weight is halved whenever the
    path change grows and recovers toward ``opts.damping`` while it shrinks.

    The reported aggregates are the converged guess together with the plans
    solved at its prices.
    """
    opts = opts or TPIOptions()
    spec.validate_against(params)
    S, T = params.S, spec.horizon_T
    n_per = T + S - 1
    birth, period = _layout(T, params)

    K = np.full(n_per, final_ss.K)
    L = np.full(n_per, final_ss.L)
    if K_guess is None or L_guess is None:
        K_guess, L_guess = linear_guess(initial_ss, final_ss, T)
    K[:T], L[:T] = np.asarray(K_guess, dtype=float)[:T], np.asarray(L_guess, dtype=float)[:T]
    K[0] = initial_ss.K

    X_reform = transfer_schedule(n_per, spec, initial_ss, params)
    rates0 = (params.tau_l0, params.tau_k0, params.tau_c0)
    n_plan, bn_plan = _initial_guess_plans(birth, period, initial_ss, final_ss, T)

    xi = opts.damping
    last_change = np.inf
    history = []
    prev = None
    it = 0
    while True:
        try:
            w, r, tl, tk, tc, X, revenue = _fiscal_paths(K, L, spec, params, X_reform, rates0)
            batch = _cohort_batch(birth, period, w, r, tl, tk, X, initial_ss, params)
            sol = solve_cohort_batch(batch, params, n_plan, bn_plan, tol=opts.household_tol)
        except (ConvergenceError, ScenarioInfeasible, ValueError, FloatingPointError):
            if prev is None or not opts.adaptive:
                raise
            # overshoot: go back along the last step
            K0, L0, dK, dL = prev
            xi *= 0.5
            prev = (K0, L0, 0.5 * dK, 0.5 * dL)
            K[:T], L[:T] = K0 + 0.5 * dK, L0 + 0.5 * dL
            continue
        n_plan, bn_plan = sol.labor, sol.savings_next
        K_imp = K.copy()
        K_imp[1:T] = _aggregate(bn_plan, period, T, shift=1)[1:T]
        L_imp = _aggregate(n_plan, period, T)
        change = max(np.max(np.abs(K_imp[:T] - K[:T]) / K[:T]),
                     np.max(np.abs(L_imp - L[:T]) / L[:T]))
        history.append(float(change))
        log.debug("TPI %d: change %.3e damping %.3g", it, change, xi)
        if change <= opts.tol:
            break
        it += 1
        if it > opts.max_iterations:
            raise ConvergenceError("time-path iteration did not converge", best_residual=min(history),
                                   iterations=opts.max_iterations, history=history)
        if opts.adaptive:
            xi = max(0.5 * xi, 1e-3) if change > last_change else min(1.2 * xi, opts.damping)
        last_change = change
        dK = xi * (K_imp[:T] - K[:T])
        dL = xi * (L_imp - L[:T])
        shrink = max(1.0, np.max(-2 * dK / K[:T]), np.max(-2 * dL / L[:T]))
        dK, dL = dK / shrink, dL / shrink
        prev = (K[:T].copy(), L[:T].copy(), dK, dL)
        K[:T] += dK
        L[:T] += dL

    return _assemble(K, L, w, r, tl, tk, tc, X, revenue, sol, birth, period, batch,
                     initial_ss, final_ss, spec, params, it, change, history)


def _assemble(K, L, w, r, tl, tk, tc, X, revenue, sol, birth, period, batch, initial, final,
              spec, params, iterations, change, history) -> TransitionResult:
    S, T = params.S, spec.horizon_T
    t = np.arange(1, T + 1)
    c = sol.consumption.copy()
    n = sol.labor.copy()
    bn = sol.savings_next.copy()
    # fill the ages lived before period 1 with the initial steady state
    pre = period < 1
    c[pre] = np.broadcast_to(initial.c, c.shape)[pre]
    n[pre] = np.broadcast_to(initial.n, n.shape)[pre]
    bn[pre] = np.broadcast_to(initial.b_next, bn.shape)[pre]
    C = _aggregate(c, period, T)
    Y = econ.output(K[:T], L[:T], params)
    # K_{T+1} is what the cohorts alive in period T actually carry forward
    K_next = np.r_[K[1:T], _aggregate(bn, period, T + 1, shift=1)[T]]
    I = K_next - (1 - params.delta) * K[:T]
    if spec.is_reform:
        tax_rate = {"labor_tax": tl, "capital_income_tax": tk, "profit_tax": tc}[spec.instrument][:T]
    else:
        tax_rate = tl[:T]
    payout = np.array([pension_payout_at(int(tt), spec, initial, params) for tt in t])
    paygo = np.array([_is_paygo_period(int(tt), spec) for tt in t])
    payout = np.where(paygo, X[:T, -1], payout)
    n_elig = np.count_nonzero(X[:T] > 0, axis=1)
    phase = [("pre_reform" if tt < spec.reform_period or not spec.is_reform
              else phase_of_period(int(tt), spec, params)) for tt in t]
    path = AggregatePath(scenario=spec.instrument, t=t, K=K[:T].copy(), L=L[:T].copy(), Y=Y, C=C,
                         I=I, w=w[:T].copy(), r=r[:T].copy(), tau_l=tl[:T].copy(),
                         tau_k=tk[:T].copy(), tau_c=tc[:T].copy(), tax_rate=tax_rate.copy(),
                         payout=payout, n_eligible=n_elig, revenue=revenue[:T].copy(), phase=phase)
    resid = batch_residual_norm(sol.labor, sol.savings_next, batch, params)
    panel = CohortPanel(birth=birth, consumption=c, labor=n, savings_next=bn, max_residual=resid)
    return TransitionResult(path=path, cohorts=panel, initial=initial, final=final, spec=spec,
                            params=params, iterations=iterations, path_change=float(change),
                            max_euler_residual=float(np.max(resid)), history=history)


# --- diagnostics ---------------------------------------------------------------

def endpoint_gap(result: TransitionResult) -> dict:
    """Relative distance of the last period's aggregates from the final steady state."""
    p, f = result.path, result.final
    return {name: abs(getattr(p, name)[-1] / getattr(f, name) - 1)
            for name in ("K", "L", "Y", "C", "w")} | {"r": abs(p.r[-1] - f.r)}


def budget_residual(result: TransitionResult, params: ModelParams) -> np.ndarray:
    """Revenue minus payouts owed, per period."""
    p = result.path
    return p.revenue - p.n_eligible * p.payout


def age_band(real_lo: int, real_hi: int, params: ModelParams) -> np.ndarray:
    """Zero-based age indices covering real ages ``real_lo..real_hi``."""
    lo = max(real_lo - AGE_OFFSET, 1)
    hi = min(real_hi - AGE_OFFSET, params.S)
    return np.arange(lo - 1, hi)


@dataclass
class ConsumptionPanels:
    """Welfare summaries relative to the baseline steady state.

    ``lifetime_dev`` is indexed by model age at the reform period (1..S);
    band series are per period ``1..T``.
    """

    age_at_reform: np.ndarray
    lifetime: np.ndarray
    lifetime_dev: np.ndarray
    t: np.ndarray
    worker_band: np.ndarray
    retiree_band: np.ndarray
    worker_band_dev: np.ndarray
    retiree_band_dev: np.ndarray


def cohort_consumption_panels(result: TransitionResult,
                              baseline_ss: SteadyState | None = None) -> ConsumptionPanels:
    """Lifetime consumption of cohorts alive at the reform and age-band averages over time.

    Lifetime totals are simple (undiscounted) sums over the whole life,
    including ages lived before the reform, in percent of the same sum in
    the baseline steady state.
    """
    base = baseline_ss if baseline_ss is not None else result.initial
    S = base.c.size
    T = result.path.T
    cp = result.cohorts
    t0 = result.spec.reform_period if result.spec.is_reform else 1
    ages = np.arange(1, S + 1)
    rows = [int(np.flatnonzero(cp.birth == t0 - a + 1)[0]) for a in ages]
    life = cp.consumption[rows].sum(axis=1)
    life_dev = 100 * (life / base.c.sum() - 1)

    params = result.params
    period = cp.birth[:, None] + np.arange(S)[None, :]
    bands = []
    for lo, hi in (WORKER_BAND, RETIREE_BAND):
        idx = age_band(lo, hi, params)
        if idx.size == 0:                 # band lies outside a short lifespan
            bands.append((np.full(T, np.nan), np.full(T, np.nan)))
            continue
        mask = np.zeros(S, dtype=bool)
        mask[idx] = True
        vals = np.where(mask[None, :], cp.consumption, 0.0)
        tot = _aggregate(vals, period, T)
        avg = tot / idx.size
        bands.append((avg, 100 * (avg / base.c[idx].mean() - 1)))
    return ConsumptionPanels(age_at_reform=ages, lifetime=life, lifetime_dev=life_dev, t=result.path.t.copy(),
                             worker_band=bands[0][0], retiree_band=bands[1][0],
                             worker_band_dev=bands[0][1], retiree_band_dev=bands[1][1])
