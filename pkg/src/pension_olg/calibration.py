"""Estimation of technology parameters and of the elliptical leisure-utility fit.

Technology: with Cobb-Douglas output, log-differencing removes ``A`` and
gives ``dln(Y/L) = alpha * dln(K/L)``, estimated by least squares without a
constant. ``A`` is then the mean implied TFP level. Inputs are assumed to be
difference-stationary; no unit-root testing is done here.

Leisure: ``(b, nu)`` are chosen so the elliptical marginal disutility
tracks the constant-Frisch one ``n**(1/theta)`` on a grid of labour supplies.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .numerics import MinimizeOptions, minimize_bounded

DATA_FILE = "russia_1999_2021.csv"
DEFAULT_GRID = (0.05, 0.95, 1000)
ELLIPSE_BOUNDS = ((1e-4, 10.0), (1.0 + 1e-6, 10.0))


class SeriesError(ValueError):
    pass


@dataclass(frozen=True)
class CalibrationSeries:
    year: np.ndarray
    Y: np.ndarray
    K: np.ndarray
    L: np.ndarray

    def __post_init__(self):
        arrs = [np.asarray(getattr(self, k), dtype=float) for k in ("Y", "K", "L")]
        year = np.asarray(self.year, dtype=int)
        if not all(a.shape == year.shape for a in arrs) or year.ndim != 1:
            raise SeriesError("year, Y, K and L must be 1-d and of equal length")
        if year.size < 1:
            raise SeriesError("empty series")
        if np.any(np.diff(year) <= 0):
            raise SeriesError("years must be strictly increasing")
        for name, a in zip(("Y", "K", "L"), arrs):
            if not np.all(np.isfinite(a) & (a > 0)):
                i = int(np.flatnonzero(~(np.isfinite(a) & (a > 0)))[0])
                raise SeriesError(f"{name} must be positive (year {year[i]})")
        object.__setattr__(self, "year", year)
        for name, a in zip(("Y", "K", "L"), arrs):
            object.__setattr__(self, name, a)

    def __len__(self):
        return self.year.size


def parse_series(text: str, source: str = "<string>") -> CalibrationSeries:
    """Parse ``year,Y,K,L`` CSV text; ``#`` lines are comments. Rows are sorted by year."""
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    reader = csv.reader(io.StringIO("\n".join(lines)))
    header = [h.strip() for h in next(reader, [])]
    if header != ["year", "Y", "K", "L"]:
        raise SeriesError(f"{source}: header must be year,Y,K,L (got {','.join(header)})")
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if len(row) != 4:
            raise SeriesError(f"{source}: data row {lineno} has {len(row)} fields, expected 4")
        try:
            year = int(row[0])
            vals = [float(v) for v in row[1:]]
        except ValueError as exc:
            raise SeriesError(f"{source}: data row {lineno} is not numeric: {row}") from exc
        for name, v in zip(("Y", "K", "L"), vals):
            if not (np.isfinite(v) and v > 0):
                raise SeriesError(f"{source}: data row {lineno} (year {year}) has non-positive {name}={v}")
        rows.append((year, *vals))
    if not rows:
        raise SeriesError(f"{source}: no data rows")
    rows.sort(key=lambda r: r[0])
    years = [r[0] for r in rows]
    dup = {y for y in years if years.count(y) > 1}
    if dup:
        raise SeriesError(f"{source}: duplicate years {sorted(dup)}")
    arr = np.array(rows, dtype=float)
    return CalibrationSeries(arr[:, 0].astype(int), arr[:, 1], arr[:, 2], arr[:, 3])


def ingest_series(path) -> CalibrationSeries:
    path = Path(path)
    return parse_series(path.read_text(encoding="utf-8"), source=str(path))


def bundled_series() -> CalibrationSeries:
    """The shipped 1999-2021 series (see the comment lines in the file for its provenance)."""
    text = resources.files("pension_olg.data").joinpath(DATA_FILE).read_text(encoding="utf-8")
    return parse_series(text, source=DATA_FILE)


# --- technology ---------------------------------------------------------------

def _growth_pairs(series: CalibrationSeries):
    lY, lK, lL = np.log(series.Y), np.log(series.K), np.log(series.L)
    x = np.diff(lK) - np.diff(lL)
    y = np.diff(lY) - np.diff(lL)
    return x, y


def estimate_alpha(series: CalibrationSeries) -> float:
    """No-intercept OLS slope of per-worker output growth on per-worker capital growth."""
    if len(series) < 2:
        raise SeriesError("need at least two observations to difference")
    x, y = _growth_pairs(series)
    sxx = float(x @ x)
    # relative guard so rounding noise on identical growth rates counts as zero
    if sxx <= 1e-24 * max(1.0, float(np.sum(np.diff(np.log(series.K)) ** 2))):
        raise SeriesError("regressor has zero variance: K and L grow at identical rates")
    return float(x @ y) / sxx


def alpha_with_intercept(series: CalibrationSeries) -> tuple[float, float]:
    """Diagnostic ``(intercept, slope)`` regression; not used for the estimate."""
    x, y = _growth_pairs(series)
    X = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    return float(coef[0]), float(coef[1])


def estimate_A(series: CalibrationSeries, alpha: float) -> float:
    """Mean over periods of ``exp(ln Y - alpha ln K - (1 - alpha) ln L)``."""
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    tfp = np.exp(np.log(series.Y) - alpha * np.log(series.K) - (1 - alpha) * np.log(series.L))
    return float(np.mean(tfp))


def fitted_output(series: CalibrationSeries, alpha: float, A: float) -> np.ndarray:
    return A * series.K ** alpha * series.L ** (1 - alpha)


def implied_interest(series: CalibrationSeries, alpha: float, A: float, delta: float = 0.05) -> np.ndarray:
    """Net marginal product of capital per year, using the estimation capital series as ``K``."""
    return alpha * A * (series.L / series.K) ** (1 - alpha) - delta


@dataclass(frozen=True)
class TechnologyEstimate:
    alpha: float
    A: float
    intercept_diag: float
    alpha_with_intercept: float
    n_obs: int


def calibrate_technology(series: CalibrationSeries) -> TechnologyEstimate:
    a = estimate_alpha(series)
    c, a2 = alpha_with_intercept(series)
    return TechnologyEstimate(alpha=a, A=estimate_A(series, a), intercept_diag=c,
                              alpha_with_intercept=a2, n_obs=len(series))


# --- elliptical leisure utility -------------------------------------------------

@dataclass(frozen=True)
class EllipseFit:
    b: float
    nu: float
    objective: float
    grid: np.ndarray
    converged: bool
    underdetermined: bool = False


def ellipse_mu(n, b, nu, l_tilde=1.0):
    x = np.asarray(n, dtype=float) / l_tilde
    return (b / l_tilde) * x ** (nu - 1) * (1 - x ** nu) ** ((1 - nu) / nu)


def ellipse_objective(b, nu, theta, grid, l_tilde=1.0) -> float:
    """Sum of squared gaps between elliptical and constant-Frisch marginal disutility."""
    gap = np.asarray(grid) ** (1.0 / theta) - ellipse_mu(grid, b, nu, l_tilde)
    return float(gap @ gap)


def default_grid(l_tilde: float = 1.0) -> np.ndarray:
    lo, hi, m = DEFAULT_GRID
    return np.linspace(lo, hi, m) * l_tilde


def fit_ellipse(theta: float, l_tilde: float = 1.0, n_grid=None, bounds=ELLIPSE_BOUNDS,
                x0=(0.5, 2.0)) -> EllipseFit:
    """Least-squares fit of ``(b, nu)`` on ``n_grid`` (default: 1000 points on [0.05, 0.95]).

    A grid of fewer than two distinct points cannot pin down two parameters;
    the fit is still returned but flagged ``underdetermined``.
    """
    if not theta > 0:
        raise ValueError("theta must be positive")
    grid = default_grid(l_tilde) if n_grid is None else np.atleast_1d(np.asarray(n_grid, dtype=float))
    if grid.size == 0:
        raise ValueError("empty grid")
    if np.any((grid <= 0) | (grid >= l_tilde)):
        raise ValueError("grid points must lie strictly inside (0, l_tilde)")

    def f(v):
        return ellipse_objective(v[0], v[1], theta, grid, l_tilde)

    res = minimize_bounded(f, np.asarray(x0, dtype=float),
                           MinimizeOptions(bounds=bounds, tol_gradient=1e-8, max_iterations=2000))
    under = np.unique(grid).size < 2
    return EllipseFit(b=float(res.x[0]), nu=float(res.x[1]), objective=res.fun, grid=grid,
                      converged=res.converged, underdetermined=bool(under))


def ellipse_sup_gap(b, nu, theta, lo=0.05, hi=0.95, l_tilde=1.0, m=2001) -> float:
    n = np.linspace(lo, hi, m) * l_tilde
    return float(np.max(np.abs(ellipse_mu(n, b, nu, l_tilde) - n ** (1.0 / theta))))
