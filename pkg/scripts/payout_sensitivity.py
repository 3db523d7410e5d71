"""Settled-regime effects of the post-window payout level.

The payout is a ratio to baseline average earnings; the baseline PAYG
pension sits at ``0.22 * 53 / 11`` of that base. This sweep shows how the
long-run output and retiree consumption responses scale with the ratio.

    python scripts/payout_sensitivity.py
"""
import numpy as np

from pension_olg import FiscalRule, ModelParams, solve_steady_state
from pension_olg.params import REFORM_INSTRUMENTS
from pension_olg.transition import RETIREE_BAND, age_band, payout_base


def main():
    params = ModelParams()
    base = solve_steady_state(params, FiscalRule.paygo(params), "baseline")
    unit = payout_base(base)
    band = age_band(*RETIREE_BAND, params)
    print(f"baseline pension = {base.transfer / unit:.3f} x average earnings")
    print(f"{'instrument':<20}{'ratio':>7}{'rate':>8}{'Y%':>8}{'C%':>8}{'62-72 c%':>10}")
    for inst in REFORM_INSTRUMENTS:
        K0, L0 = base.K, base.L
        for ratio in np.arange(0.0, 1.01, 0.1):
            ss = solve_steady_state(params, FiscalRule.funded(inst, ratio * unit), K0=K0, L0=L0)
            K0, L0 = ss.K, ss.L
            rate = max(ss.tau_l, ss.tau_k, ss.tau_c)
            rb = 100 * (ss.c[band].mean() / base.c[band].mean() - 1)
            print(f"{inst:<20}{ratio:7.2f}{rate:8.4f}{100 * (ss.Y / base.Y - 1):8.2f}"
                  f"{100 * (ss.C / base.C - 1):8.2f}{rb:10.2f}")


if __name__ == "__main__":
    main()
