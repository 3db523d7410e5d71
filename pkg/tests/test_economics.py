import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pension_olg import economics as econ
from pension_olg.numerics import finite_diff_gradient
from pension_olg.params import ModelParams

P = ModelParams()
pos = st.floats(1e-2, 1e4)


def test_output_examples():
    assert econ.output(1.0, 1.0, P) == pytest.approx(1.889, rel=1e-15)
    assert econ.output(4.0, 1.0, ModelParams(A=1.0, alpha=0.5)) == pytest.approx(2.0)
    assert econ.output(10.0, 20.0, P) == pytest.approx(1.889 * 10 ** 0.3573 * 20 ** 0.6427, rel=1e-14)
    with pytest.raises(ValueError):
        econ.output(0.0, 1.0, P)


def test_wage_examples():
    assert econ.wage(3.0, 3.0, ModelParams(A=1.0, alpha=0.5)) == pytest.approx(0.5)
    assert econ.wage(1.0, 1.0, P) == pytest.approx(0.6427 * 1.889, rel=1e-14)
    assert econ.wage(2.0, 1.0, P) > econ.wage(1.0, 1.0, P)
    with pytest.raises(ValueError):
        econ.wage(1.0, -1.0, P)


def test_interest_examples():
    p = ModelParams(A=1.0, alpha=0.5, delta=0.0)
    assert econ.interest(1.0, 1.0, p) == pytest.approx(0.5)
    assert econ.interest(1.0, 1.0, P) == pytest.approx(0.3573 * 1.889 - 0.05, rel=1e-14)
    assert econ.interest(7.0, 2.0, P, tau_c=1.0) == 0.0


@settings(max_examples=100)
@given(K=pos, L=pos, lam=st.floats(1e-3, 1e3))
def test_factor_prices_homogeneous(K, L, lam):
    assert econ.wage(lam * K, lam * L, P) == pytest.approx(econ.wage(K, L, P), rel=1e-12)
    assert econ.interest(lam * K, lam * L, P) == pytest.approx(econ.interest(K, L, P), rel=1e-12, abs=1e-12)


@settings(max_examples=100)
@given(K=pos, L=pos)
def test_factor_payments_exhaust_output(K, L):
    w, r = econ.wage(K, L, P), econ.interest(K, L, P)
    assert w * L + (r + P.delta) * K == pytest.approx(econ.output(K, L, P), rel=1e-12)
    assert econ.accounting_profit(K, L, P) == pytest.approx(r * K, rel=1e-9, abs=1e-9)


@settings(max_examples=100)
@given(K=st.floats(0.1, 1e3), L=st.floats(0.1, 1e3))
def test_cross_partial_positive(K, L):
    h = 1e-6 * K
    fd = (econ.wage(K + h, L, P) - econ.wage(K - h, L, P)) / (2 * h)
    exact = P.alpha * (1 - P.alpha) * P.A * K ** (P.alpha - 1) * L ** (-P.alpha)
    assert fd > 0
    assert fd == pytest.approx(exact, rel=1e-6)


def test_mu_consumption():
    assert econ.mu_consumption(1.0, 1.97) == 1.0
    assert econ.mu_consumption(2.0, 1.97) == pytest.approx(2 ** -1.97)
    assert econ.mu_consumption(2.0, 1.97) < econ.mu_consumption(1.0, 1.97)
    with pytest.raises(ValueError):
        econ.mu_consumption(0.0, 1.97)


def test_mdu_elliptical_edges():
    assert econ.mdu_labor_elliptical(0.0, 1.0, P) == 0.0
    vals = econ.mdu_labor_elliptical(np.array([0.9, 0.99, 0.9999, 1 - 1e-9]), 1.0, P)
    assert np.all(np.diff(vals) > 0) and vals[-1] > 1e3
    with pytest.raises(ValueError):
        econ.mdu_labor_elliptical(1.0, 1.0, P)
    with pytest.raises(ValueError):
        econ.mdu_labor_elliptical(-0.1, 1.0, P)


def test_mdu_cfe():
    assert econ.mdu_labor_cfe(0.0, 0.565) == 0.0
    assert econ.mdu_labor_cfe(1.0, 0.3) == 1.0
    assert econ.mdu_labor_cfe(0.5, 0.565) == pytest.approx(0.5 ** (1 / 0.565))
    with pytest.raises(ValueError):
        econ.mdu_labor_cfe(-1.0, 0.565)


def test_ext_variants_agree_inside_domain():
    n = np.linspace(0.01, 0.99, 50)
    m, dm = econ.mdu_labor_ext(n, 1.0, P)
    assert np.allclose(m, econ.mdu_labor_elliptical(n, 1.0, P), rtol=1e-14)
    c = np.linspace(0.01, 5, 50)
    mu, dmu = econ.mu_consumption_ext(c, P.sigma)
    assert np.allclose(mu, c ** -P.sigma, rtol=1e-14)
    assert np.allclose(dmu, -P.sigma * c ** (-P.sigma - 1), rtol=1e-14)


def test_ext_variants_continue_linearly_outside():
    mu, dmu = econ.mu_consumption_ext(np.array([-1.0, 0.0]), P.sigma)
    assert np.all(np.isfinite(mu)) and mu[0] > mu[1] > 0
    m, _ = econ.mdu_labor_ext(np.array([1.0, 1.2]), 1.0, P)
    assert np.all(np.isfinite(m)) and m[1] > m[0]
    m, _ = econ.mdu_labor_ext(np.array([-0.5]), 1.0, P)
    assert np.isfinite(m[0])


def test_period_utility_zero_labour():
    c = 1.7
    u = econ.period_utility(c, 0.0, 1.0, P)
    assert u == pytest.approx(c ** (1 - P.sigma) / (1 - P.sigma) + P.ellip_b)


def test_period_utility_penalty_for_infeasible_consumption():
    cs = np.array([-1.0, -0.1, 0.0, econ.C_FLOOR / 2])
    u = econ.period_utility(cs, 0.3, 1.0, P)
    assert np.all(np.isfinite(u))
    assert np.all(np.diff(u) > 0)             # slopes toward feasibility
    assert u[0] < econ.period_utility(econ.C_FLOOR, 0.3, 1.0, P) - 1e5
    with pytest.raises(ValueError):
        econ.period_utility(1.0, 1.0, 1.0, P)


def test_period_utility_gradients_match_marginal_utilities(rng):
    worst = 0.0
    for _ in range(100):
        c, n = rng.uniform(0.1, 5.0), rng.uniform(0.05, 0.95)
        chi = rng.uniform(0.5, 2.0)
        g = finite_diff_gradient(lambda v: float(econ.period_utility(v[0], v[1], chi, P)), np.array([c, n]))
        exact = np.array([econ.mu_consumption(c, P.sigma), -econ.mdu_labor_elliptical(n, chi, P)])
        worst = max(worst, float(np.max(np.abs(g / exact - 1))))
    assert worst <= 1e-6


def test_budget_examples():
    pr = econ.Prices(1.0, 0.05)
    assert econ.consumption_from_budget(0.0, 0.0, 0.0, pr, 0.22, 0.0, 0.0) == 0.0
    assert econ.consumption_from_budget(0.5, 0.0, 0.0, pr, 0.22, 0.0, 0.0) == pytest.approx(0.39)
    assert econ.consumption_from_budget(0.0, 0.0, 1.0, pr, 0.0, 0.0, 0.0) == -1.0


def test_prices_and_fiscal_slice_validate():
    with pytest.raises(ValueError):
        econ.Prices(0.0, 0.1)
    with pytest.raises(ValueError):
        econ.Prices(1.0, -1.0)
    with pytest.raises(ValueError):
        econ.FiscalSlice(1.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        econ.FiscalSlice(0.1, 0.0, 0.0, np.array([-1.0]))


def test_balanced_transfer():
    assert econ.balanced_transfer(10.0, 0.0, 0.0, (0.22, 0.0, 0.0), 53, 42) == pytest.approx(0.2)
    assert econ.balanced_transfer(10.0, 3.0, 2.0, (0.0, 0.0, 0.0), 53, 42) == 0.0
    with pytest.raises(ValueError):
        econ.balanced_transfer(10.0, 0.0, 0.0, (0.22, 0, 0), 5, 5)
    v = econ.transfer_by_age(0.7, 53, 42)
    assert np.all(v[:42] == 0) and np.all(v[42:] == 0.7)


def test_euler_residual_examples():
    pr = econ.Prices(1.3, 0.1)
    r1 = econ.euler_labor_residual(1.0, 0.4, pr, 0.22, 1.0, P)
    r2 = econ.euler_labor_residual(1.5, 0.4, pr, 0.22, 1.0, P)
    assert r2 < r1
    grid = np.linspace(0.01, 0.99, 99)
    res = econ.euler_labor_residual(1.0, grid, pr, 0.22, 1.0, P)
    assert res[0] > 0 > res[-1] and np.all(np.diff(res) < 0)
    r = 1 / P.beta - 1
    assert econ.euler_savings_residual(1.2, 1.2, r, 0.0, P) == pytest.approx(0.0, abs=1e-15)
    # a return above the smoothing rate makes flat consumption too low tomorrow
    assert econ.euler_savings_residual(1.2, 1.2, r + 0.05, 0.0, P) < 0


def test_euler_sign_matches_two_period_brute_force():
    """With a high return, a two-period saver's optimum has rising consumption."""
    beta, sigma = P.beta, P.sigma
    r = 1 / beta - 1 + 0.05
    y = 1.0
    b = np.linspace(1e-6, 0.99, 200001)
    u = (y - b) ** (1 - sigma) / (1 - sigma) + beta * ((1 + r) * b) ** (1 - sigma) / (1 - sigma)
    bs = b[np.argmax(u)]
    assert (1 + r) * bs > y - bs
