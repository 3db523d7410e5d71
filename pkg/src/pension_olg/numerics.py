"""Dense root finding, bounded minimisation and finite-difference kernels."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import optimize

from .errors import ConvergenceError, NonFiniteError

log = logging.getLogger(__name__)

FD_STEP = float(np.finfo(float).eps ** (1.0 / 3.0))
MAX_HALVINGS = 30


@dataclass(frozen=True)
class RootOptions:
    tol_residual: float = 1e-9
    max_iterations: int = 100
    damping_init: float = 1.0
    jacobian_mode: str = "forward_difference"
    fd_step: float = FD_STEP

    def __post_init__(self):
        if not self.tol_residual > 0:
            raise ValueError("tol_residual must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not 0 < self.damping_init <= 1:
            raise ValueError("damping_init must lie in (0, 1]")
        if self.jacobian_mode not in ("forward_difference", "secant_update"):
            raise ValueError(f"unknown jacobian_mode {self.jacobian_mode!r}")


@dataclass(frozen=True)
class MinimizeOptions:
    bounds: Sequence[tuple[float, float]]
    tol_gradient: float = 1e-8
    max_iterations: int = 1000

    def __post_init__(self):
        for i, (lo, hi) in enumerate(self.bounds):
            if lo > hi:
                raise ValueError(f"bound {i}: lower {lo} exceeds upper {hi}")


@dataclass
class MinimizeResult:
    x: np.ndarray
    fun: float
    projected_gradient_norm: float
    iterations: int
    converged: bool


def _check_finite(f, what):
    bad = np.flatnonzero(~np.isfinite(f))
    if bad.size:
        raise NonFiniteError(f"non-finite {what}", coordinate=int(bad[0]))


def forward_difference_jacobian(F, x, f0=None, step=FD_STEP):
    x = np.asarray(x, dtype=float)
    if f0 is None:
        f0 = np.asarray(F(x), dtype=float)
    J = np.empty((f0.size, x.size))
    for i in range(x.size):
        h = step * max(abs(x[i]), 1.0)
        xp = x.copy()
        xp[i] += h
        J[:, i] = (np.asarray(F(xp), dtype=float) - f0) / h
    return J


def finite_diff_gradient(f: Callable, x, step: float = FD_STEP, bounds=None) -> np.ndarray:
    """Central-difference gradient with relative step ``max(|x_i|, 1) * step``.

    With ``bounds``, a stencil that would leave the box is shifted inward so
    the objective is only evaluated at feasible points.
    """
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        h = step * max(abs(x[i]), 1.0)
        lo_pt, hi_pt = x[i] - h, x[i] + h
        if bounds is not None:
            lo, hi = bounds[i]
            if hi_pt > hi:
                hi_pt, lo_pt = hi, hi - 2 * h
            elif lo_pt < lo:
                lo_pt, hi_pt = lo, lo + 2 * h
        xp, xm = x.copy(), x.copy()
        xp[i], xm[i] = hi_pt, lo_pt
        fp, fm = f(xp), f(xm)
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NonFiniteError("non-finite objective in gradient stencil", coordinate=i)
        g[i] = (fp - fm) / (hi_pt - lo_pt)
    return g


def solve_root(F: Callable, x0, opts: Optional[RootOptions] = None,
               jacobian: Optional[Callable] = None) -> np.ndarray:
    """Damped Newton iteration for ``F(x) = 0``.

    The Jacobian comes from ``jacobian(x)`` when supplied, otherwise from
    forward differences, or from Broyden rank-one updates when
    ``opts.jacobian_mode == "secant_update"`` (refreshed by differencing
    whenever a line search fails). Each step is halved, at most 30 times,
    while the residual 2-norm fails to decrease. Success means the max-norm
    of the residual at the returned point is ``<= opts.tol_residual``.
    """
    opts = opts or RootOptions()
    x = np.array(x0, dtype=float, copy=True)
    f = np.asarray(F(x), dtype=float)
    _check_finite(f, "residual at initial point")
    norm = float(np.linalg.norm(f))
    best = float(np.max(np.abs(f))) if f.size else 0.0
    J = None
    secant = opts.jacobian_mode == "secant_update" and jacobian is None

    for it in range(opts.max_iterations + 1):
        res = float(np.max(np.abs(f))) if f.size else 0.0
        best = min(best, res)
        if res <= opts.tol_residual:
            return x
        if it == opts.max_iterations:
            break
        if J is None or not secant:
            J = jacobian(x) if jacobian is not None else forward_difference_jacobian(F, x, f, opts.fd_step)
        try:
            dx = np.linalg.solve(J, -f)
        except np.linalg.LinAlgError:
            dx = np.linalg.lstsq(J, -f, rcond=None)[0]
        lam = opts.damping_init
        accepted = False
        for _ in range(MAX_HALVINGS + 1):
            x_new = x + lam * dx
            f_new = np.asarray(F(x_new), dtype=float)
            if np.all(np.isfinite(f_new)):
                norm_new = float(np.linalg.norm(f_new))
                if norm_new < norm:
                    accepted = True
                    break
            lam *= 0.5
        if not accepted:
            if secant:
                # stale secant model: rebuild by differencing before giving up on this point
                J = forward_difference_jacobian(F, x, f, opts.fd_step)
                continue
            if not np.all(np.isfinite(f_new)):
                _check_finite(f_new, "residual after step")
            # no descent along the Newton direction; take the shortest step and carry on
        if secant:
            df = f_new - f
            s = x_new - x
            ss = float(s @ s)
            if ss > 0:
                J = J + np.outer(df - J @ s, s) / ss
        x, f, norm = x_new, f_new, float(np.linalg.norm(f_new))
    raise ConvergenceError("solve_root hit max_iterations", best_residual=best, iterations=opts.max_iterations)


def minimize_bounded(f: Callable, x0, opts: MinimizeOptions) -> MinimizeResult:
    """Bounded quasi-Newton (L-BFGS-B) with central-difference gradients."""
    x0 = np.asarray(x0, dtype=float)
    bounds = [tuple(map(float, b)) for b in opts.bounds]
    if len(bounds) != x0.size:
        raise ValueError("one bound pair per coordinate is required")
    for i, (lo, hi) in enumerate(bounds):
        if not lo <= x0[i] <= hi:
            raise ValueError(f"x0[{i}]={x0[i]} outside bounds [{lo}, {hi}]")
    f0 = f(x0)
    if not np.isfinite(f0):
        raise NonFiniteError("non-finite objective at x0")

    def grad(x):
        return finite_diff_gradient(f, x, bounds=bounds)

    res = optimize.minimize(f, x0, jac=grad, method="L-BFGS-B", bounds=bounds,
                            options={"maxiter": opts.max_iterations, "gtol": opts.tol_gradient,
                                     "ftol": 1e-15, "maxls": 50})
    x = np.clip(res.x, [b[0] for b in bounds], [b[1] for b in bounds])
    pg = projected_gradient(grad(x), x, bounds)
    pg_norm = float(np.max(np.abs(pg)))
    converged = pg_norm <= opts.tol_gradient
    if not converged:
        log.warning("minimize_bounded: projected gradient %.3e above tolerance after %d iterations",
                    pg_norm, res.nit)
    return MinimizeResult(x=x, fun=float(f(x)), projected_gradient_norm=pg_norm,
                          iterations=int(res.nit), converged=converged)


def projected_gradient(g, x, bounds):
    pg = np.array(g, dtype=float)
    for i, (lo, hi) in enumerate(bounds):
        if x[i] <= lo and pg[i] > 0:
            pg[i] = 0.0
        elif x[i] >= hi and pg[i] < 0:
            pg[i] = 0.0
    return pg
