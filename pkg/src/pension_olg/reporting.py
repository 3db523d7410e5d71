"""CSV exports, percent-deviation series, SVG charts and the run manifest.

Charts are drawn from the CSV files already written to the output
directory, never from in-memory results, so every plotted number can be
found in a CSV.
"""
from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .params import period_to_year
from .steady_state import SteadyState
from .transition import AGE_OFFSET, TransitionResult, cohort_consumption_panels

# periods shown in charts (the 2024-2124 span)
DISPLAY_PERIODS = 100
PATH_VARIABLES = ("K", "L", "Y", "C", "I", "w", "r", "tau_l", "tau_k", "tau_c", "tax_rate",
                  "payout", "revenue", "tax_to_gdp")
AGG_HEADER = ["scenario", "period", "year", "variable", "value", "pct_dev_from_baseline",
              "pct_dev_from_first_period"]
COHORT_HEADER = ["scenario", "panel", "key", "year", "value", "pct_dev_from_baseline"]
SS_HEADER = ["label", "age", "real_age", "consumption", "labor", "savings", "savings_next", "transfer"]


def fmt_number(v) -> str:
    v = float(v)
    if not np.isfinite(v):
        return ""
    if v == 0:
        return "0"
    return f"{v:.12g}"


def _columns(path):
    if hasattr(path, "as_columns"):
        return path.as_columns()
    return {k: np.asarray(v, dtype=float) for k, v in path.items()}


def deviation_series(path_reform, path_baseline, variables=None) -> dict:
    """``100 * (reform / baseline - 1)`` per period for each variable.

    Accepts :class:`AggregatePath` objects or mappings of name to array.
    Raises if the lengths differ or a baseline value is zero.
    """
    a, b = _columns(path_reform), _columns(path_baseline)
    names = variables or [k for k in a if k in b]
    out = {}
    for k in names:
        x, y = np.asarray(a[k], dtype=float), np.asarray(b[k], dtype=float)
        if x.shape != y.shape:
            raise ValueError(f"{k}: reform and baseline paths differ in length ({x.size} vs {y.size})")
        if np.any(y == 0):
            bad = int(np.flatnonzero(y == 0)[0]) + 1
            raise ValueError(f"{k}: baseline value is zero in period {bad}")
        out[k] = 100.0 * (x / y - 1.0)
    return out


def _safe_dev(x, base):
    x = np.asarray(x, dtype=float)
    base = np.broadcast_to(np.asarray(base, dtype=float), x.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(base != 0, 100.0 * (x / base - 1.0), np.nan)


# --- CSV writers --------------------------------------------------------------

def write_csv(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        wr.writerows(rows)
    return path


def write_aggregates(result: TransitionResult, baseline: TransitionResult, out_dir) -> Path:
    """Long-format per-period aggregates with both normalisations."""
    p, q = result.path, baseline.path
    if p.T != q.T:
        raise ValueError("reform and baseline horizons differ")
    cols, bcols = p.as_columns(), q.as_columns()
    years = period_to_year(p.t)
    rows = []
    for name in PATH_VARIABLES:
        v = cols[name]
        d_base = _safe_dev(v, bcols[name])
        d_first = _safe_dev(v, v[0])
        for i in range(p.T):
            rows.append([p.scenario, int(p.t[i]), int(years[i]), name, fmt_number(v[i]), fmt_number(d_base[i]),
                         fmt_number(d_first[i])])
    for i in range(p.T):
        rows.append([p.scenario, int(p.t[i]), int(years[i]), "phase", p.phase[i], "", ""])
    return write_csv(Path(out_dir) / f"aggregates_{p.scenario}.csv", AGG_HEADER, rows)


def write_cohorts(result: TransitionResult, baseline_ss: SteadyState, out_dir) -> Path:
    """Lifetime consumption by age at the reform and age-band averages per period."""
    pan = cohort_consumption_panels(result, baseline_ss)
    name = result.path.scenario
    t0 = result.spec.reform_period if result.spec.is_reform else 1
    year0 = int(period_to_year(t0))
    rows = []
    for a, v, d in zip(pan.age_at_reform, pan.lifetime, pan.lifetime_dev):
        rows.append([name, "lifetime_consumption", int(a + AGE_OFFSET), year0, fmt_number(v), fmt_number(d)])
    years = period_to_year(pan.t)
    for panel, vals, devs in (("consumption_age_35_45", pan.worker_band, pan.worker_band_dev),
                              ("consumption_age_62_72", pan.retiree_band, pan.retiree_band_dev)):
        for t, y, v, d in zip(pan.t, years, vals, devs):
            rows.append([name, panel, int(t), int(y), fmt_number(v), fmt_number(d)])
    return write_csv(Path(out_dir) / f"cohorts_{name}.csv", COHORT_HEADER, rows)


def write_steady_state(ss: SteadyState, out_dir) -> list[Path]:
    """Age profile CSV plus a ``key = value`` summary of aggregates."""
    out_dir = Path(out_dir)
    X = ss.transfer_by_age
    rows = [[ss.label, s + 1, s + 1 + AGE_OFFSET, fmt_number(ss.c[s]), fmt_number(ss.n[s]), fmt_number(ss.b[s]),
             fmt_number(ss.b_next[s]), fmt_number(X[s])] for s in range(ss.c.size)]
    p1 = write_csv(out_dir / f"steady_state_{ss.label}.csv", SS_HEADER, rows)
    p2 = out_dir / f"steady_state_{ss.label}_summary.txt"
    lines = [f"{k} = {v if isinstance(v, str) else fmt_number(v)}" for k, v in ss.summary().items()]
    p2.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return [p1, p2]


def read_long_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _series(rows, variable, column="pct_dev_from_baseline", key="variable", index="period"):
    sel = [r for r in rows if r[key] == variable]
    x = np.array([float(r[index]) for r in sel])
    y = np.array([float(r[column]) if r[column] != "" else np.nan for r in sel])
    yr = np.array([float(r["year"]) for r in sel])
    return x, yr, y


# --- charts -------------------------------------------------------------------

CHARTS = ("fig_age_labor.svg", "fig_output.svg", "fig_capital_labor.svg", "fig_wage_consumption.svg",
          "fig_lifetime_consumption.svg", "fig_age_band_consumption.svg", "fig_tax_to_gdp.svg")


def _plt():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    plt.rcParams["svg.hashsalt"] = "pension-olg"
    plt.rcParams["svg.fonttype"] = "path"
    return plt


def _save(fig, path, timestamp):
    meta = {} if timestamp else {"Date": None}
    fig.savefig(path, format="svg", metadata=meta)
    return path


def emit_charts(out_dir, timestamp: bool = True) -> list[Path]:
    """Draw every chart from the CSVs in ``out_dir``; returns the SVG paths."""
    plt = _plt()
    out_dir = Path(out_dir)
    agg = {p.stem[len("aggregates_"):]: read_long_csv(p) for p in sorted(out_dir.glob("aggregates_*.csv"))}
    coh = {p.stem[len("cohorts_"):]: read_long_csv(p) for p in sorted(out_dir.glob("cohorts_*.csv"))}
    ss = {p.stem[len("steady_state_"):]: read_long_csv(p) for p in sorted(out_dir.glob("steady_state_*.csv"))}
    written = []

    fig, ax = plt.subplots(figsize=(7, 4))
    for label, rows in ss.items():
        ax.plot([int(r["real_age"]) for r in rows], [float(r["labor"]) for r in rows], label=label)
    ax.set_xlabel("age")
    ax.set_ylabel("labour supply")
    ax.set_title("Labour supply by age, steady states")
    ax.legend(fontsize=8)
    written.append(_save(fig, out_dir / CHARTS[0], timestamp))
    plt.close(fig)

    def dev_chart(fname, panels, title):
        fig, axes = plt.subplots(1, len(panels), figsize=(6 * len(panels), 4), squeeze=False)
        for ax, (var, ylabel, column) in zip(axes[0], panels):
            for scen, rows in agg.items():
                x, yr, y = _series(rows, var, column)
                keep = x <= DISPLAY_PERIODS
                ax.plot(yr[keep], y[keep], label=scen)
            ax.axhline(0.0, color="0.6", lw=0.8)
            ax.set_xlabel("year")
            ax.set_ylabel(ylabel)
            ax.legend(fontsize=8)
        fig.suptitle(title)
        written.append(_save(fig, out_dir / fname, timestamp))
        plt.close(fig)

    dev_chart(CHARTS[1], [("Y", "% of baseline", "pct_dev_from_baseline"),
                          ("Y", "% of first period", "pct_dev_from_first_period")], "Output")
    dev_chart(CHARTS[2], [("K", "capital, % of baseline", "pct_dev_from_baseline"),
                          ("L", "labour, % of baseline", "pct_dev_from_baseline")], "Capital and labour")
    dev_chart(CHARTS[3], [("w", "wage, % of baseline", "pct_dev_from_baseline"),
                          ("C", "consumption, % of baseline", "pct_dev_from_baseline")],
              "Wages and aggregate consumption")

    fig, ax = plt.subplots(figsize=(7, 4))
    for scen, rows in coh.items():
        x, _, y = _series(rows, "lifetime_consumption", key="panel", index="key")
        ax.plot(x, y, label=scen)
    ax.axhline(0.0, color="0.6", lw=0.8)
    ax.set_xlabel("age at reform")
    ax.set_ylabel("% of baseline")
    ax.set_title("Lifetime consumption")
    ax.legend(fontsize=8)
    written.append(_save(fig, out_dir / CHARTS[4], timestamp))
    plt.close(fig)

    fig, axes = plt.subplots(1, 2, figsize=(12, 4))
    for ax, panel, title in zip(axes, ("consumption_age_35_45", "consumption_age_62_72"),
                                ("ages 35-45", "ages 62-72")):
        for scen, rows in coh.items():
            x, yr, y = _series(rows, panel, key="panel", index="key")
            keep = x <= DISPLAY_PERIODS
            ax.plot(yr[keep], y[keep], label=scen)
        ax.axhline(0.0, color="0.6", lw=0.8)
        ax.set_xlabel("year")
        ax.set_ylabel("% of baseline")
        ax.set_title(title)
        ax.legend(fontsize=8)
    fig.suptitle("Consumption of age groups")
    written.append(_save(fig, out_dir / CHARTS[5], timestamp))
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(7, 4))
    for scen, rows in agg.items():
        x, yr, y = _series(rows, "tax_to_gdp", "value")
        keep = x <= DISPLAY_PERIODS
        ax.plot(yr[keep], 100 * y[keep], label=scen)
    ax.set_xlabel("year")
    ax.set_ylabel("% of output")
    ax.set_title("Pension tax revenue relative to output")
    ax.legend(fontsize=8)
    written.append(_save(fig, out_dir / CHARTS[6], timestamp))
    plt.close(fig)
    return written


# --- manifest -----------------------------------------------------------------

def sha256_of(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    command: str
    config_path: str
    scenarios: list
    out_dir: str
    version: str
    timings: dict = field(default_factory=dict)
    convergence: dict = field(default_factory=dict)
    files: list = field(default_factory=list)

    def render(self, include_timings: bool = True) -> str:
        lines = [f"command = {self.command}", f"config = {self.config_path}",
                 f"scenarios = {','.join(self.scenarios)}", f"out_dir = {self.out_dir}",
                 f"version = {self.version}"]
        if include_timings:
            lines += [f"time.{k} = {v:.3f}s" for k, v in self.timings.items()]
        lines += [f"convergence.{k} = {v}" for k, v in self.convergence.items()]
        lines.append("")
        lines.append("[files]")
        base = Path(self.out_dir)
        for p in sorted(set(map(Path, self.files))):
            lines.append(f"{sha256_of(p)}  {p.relative_to(base) if p.is_relative_to(base) else p}")
        return "\n".join(lines) + "\n"

    def write(self, include_timings: bool = True) -> Path:
        path = Path(self.out_dir) / "manifest.txt"
        path.write_text(self.render(include_timings), encoding="utf-8")
        return path

