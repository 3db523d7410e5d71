"""Solve the baseline and every reform, then print phase averages of key deviations.

    python scripts/run_scenarios.py [--tol 1e-8] [--pillar subsistence_for_all]
"""
import argparse
import time

import numpy as np

from pension_olg import (ModelParams, ScenarioSpec, FiscalRule, TPIOptions, cohort_consumption_panels,
                         settled_rule, solve_steady_state, solve_transition)
from pension_olg.params import PILLARS, REFORM_INSTRUMENTS


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--tol", type=float, default=1e-8)
    ap.add_argument("--pillar", default="subsistence_for_all", choices=PILLARS)
    args = ap.parse_args()

    params = ModelParams()
    base = solve_steady_state(params, FiscalRule.paygo(params), "baseline")
    opts = TPIOptions(tol=args.tol)
    base_path = solve_transition(base, base, ScenarioSpec(), params, opts).path
    print(f"baseline  K={base.K:.3f} L={base.L:.3f} Y={base.Y:.3f} r={base.r:.4f} pension={base.transfer:.4f}")

    phases = {"window (1-30)": slice(0, 30), "mixed (31-41)": slice(30, 41), "t=100": slice(99, 100)}
    print(f"{'scenario':<20}{'phase':<16}{'K%':>8}{'L%':>8}{'Y%':>8}{'C%':>8}{'62-72 c%':>10}{'tax/Y%':>8}")
    for inst in REFORM_INSTRUMENTS:
        spec = ScenarioSpec(instrument=inst, post_window_pillar=args.pillar)
        t = time.perf_counter()
        final = solve_steady_state(params, settled_rule(spec, base, params), K0=base.K, L0=base.L)
        res = solve_transition(base, final, spec, params, opts)
        pan = cohort_consumption_panels(res, base)
        p = res.path
        for label, sl in phases.items():
            dev = [np.mean(100 * (getattr(p, v)[sl] / getattr(base_path, v)[sl] - 1)) for v in "KLYC"]
            print(f"{inst:<20}{label:<16}" + "".join(f"{d:8.2f}" for d in dev)
                  + f"{np.mean(pan.retiree_band_dev[sl]):10.2f}{100 * np.mean(p.tax_to_gdp[sl]):8.2f}")
        print(f"{'':<20}{res.iterations} iterations, {time.perf_counter() - t:.1f}s")


if __name__ == "__main__":
    main()
