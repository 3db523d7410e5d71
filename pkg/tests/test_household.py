import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import grid_search_lifetime

from pension_olg import economics as econ
from pension_olg.household import (CohortBatch, LifetimeEnvironment,
                                   plan_from_unknowns, residual_jacobian, residual_stack,
                                   solve_cohort_batch, solve_lifetime)
from pension_olg.numerics import RootOptions, forward_difference_jacobian
from pension_olg.params import ModelParams

P2 = ModelParams(S=2, R=1)
P3 = ModelParams(S=3, R=2)


def _oracle_inputs(env, params):
    a = (1 - env.tau_l) * env.w
    R = 1 + env.r * (1 - env.tau_k)
    chi = params.chi[env.start_age(params) - 1:][:env.p]
    return a, R, env.transfer, env.initial_savings, chi


def test_two_period_matches_grid_search():
    env = LifetimeEnvironment([1.2, 1.2], [0.0, 0.08], 0.2, 0.0, [0.0, 0.1], 0.0, 1)
    plan = solve_lifetime(env, P2)
    a, R, X, b1, chi = _oracle_inputs(env, P2)
    n, bn = grid_search_lifetime(a, R, X, b1, P2, chi=chi)
    assert np.max(np.abs(plan.labor - n)) <= 1e-4
    assert np.max(np.abs(plan.savings_next - bn)) <= 1e-4


def test_three_period_matches_grid_search():
    env = LifetimeEnvironment([1.0, 1.1, 1.1], [0.12, 0.1, 0.09], [0.22, 0.22, 0.0], 0.1,
                              [0.0, 0.0, 0.3], 0.0, 1)
    plan = solve_lifetime(env, P3)
    a, R, X, b1, chi = _oracle_inputs(env, P3)
    n, bn = grid_search_lifetime(a, R, X, b1, P3, chi=chi, scale=0.5, tol=1e-7)
    assert np.max(np.abs(plan.labor - n)) <= 1e-4
    assert np.max(np.abs(plan.savings_next - bn)) <= 1e-4


def test_partial_life_with_wealth_matches_grid_search():
    env = LifetimeEnvironment([1.1, 1.0], [0.1, 0.1], 0.22, 0.0, [0.0, 0.25], 0.15, 2)
    plan = solve_lifetime(env, P3)
    a, R, X, b1, chi = _oracle_inputs(env, P3)
    n, bn = grid_search_lifetime(a, R, X, b1, P3, chi=chi)
    assert np.max(np.abs(plan.labor - n)) <= 1e-4
    assert np.max(np.abs(plan.savings_next - bn)) <= 1e-4


def test_single_period_cohort():
    env = LifetimeEnvironment([1.3], [0.05], 0.22, 0.0, [0.4], 0.2, 53)
    plan = solve_lifetime(env, ModelParams())
    assert plan.savings_next[-1] == 0.0
    assert abs(residual_stack(plan.unknowns, env, ModelParams())[0]) <= 1e-10
    a = 0.78 * 1.3
    assert plan.consumption[0] == pytest.approx(a * plan.labor[0] + 1.05 * 0.2 + 0.4, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), p=st.integers(1, 12), clamp=st.booleans())
def test_analytic_jacobian_matches_differences(seed, p, clamp):
    rng = np.random.default_rng(seed)
    params = ModelParams(clamp_savings=clamp)
    env = LifetimeEnvironment(rng.uniform(0.5, 3, p), rng.uniform(0.0, 0.2, p), rng.uniform(0, 0.4, p),
                              rng.uniform(0, 0.3, p), rng.uniform(0, 0.5, p), rng.uniform(0, 2))
    # a point where every period's consumption is positive
    x = np.r_[rng.uniform(0.2, 0.8, p), rng.uniform(0.0, 0.05, p - 1)]
    J = residual_jacobian(x, env, params)
    F = lambda v: residual_stack(v, env, params)
    h = 1e-6
    Jfd = np.column_stack([(F(x + h * e) - F(x - h * e)) / (2 * h) for e in np.eye(x.size)])
    scale = np.maximum(np.abs(J), 1.0)
    assert np.max(np.abs(J - Jfd) / scale) <= 1e-5


def test_forward_difference_path_agrees(params, baseline):
    env = LifetimeEnvironment.constant(baseline.w, baseline.r, baseline.tau_l, baseline.tau_k,
                                       baseline.transfer_by_age, params)
    a = solve_lifetime(env, params)
    b = solve_lifetime(env, params, RootOptions(tol_residual=1e-10, max_iterations=200),
                       jacobian="forward_difference")
    assert np.max(np.abs(a.labor - b.labor)) <= 1e-8
    assert np.max(np.abs(a.savings_next - b.savings_next)) <= 1e-8
    J = forward_difference_jacobian(lambda v: residual_stack(v, env, params), a.unknowns)
    assert np.max(np.abs(J - residual_jacobian(a.unknowns, env, params))) <= 1e-4 * np.max(np.abs(J))


def test_steady_state_household_shape(params, baseline):
    env = LifetimeEnvironment.constant(baseline.w, baseline.r, baseline.tau_l, baseline.tau_k,
                                       baseline.transfer_by_age, params)
    plan = solve_lifetime(env, params)
    assert np.max(np.abs(residual_stack(plan.unknowns, env, params))) <= 1e-10
    assert np.all((plan.labor > 0) & (plan.labor < params.l_tilde))
    assert np.all(plan.consumption > 0)
    # retirees keep working a little: the elliptical disutility has zero slope at zero hours
    assert np.all(plan.labor[params.R:] > 0)
    # hump-shaped wealth: accumulated while young, run down at the end of life
    k = int(np.argmax(plan.savings))
    assert 0 < k < params.R
    assert np.all(np.diff(plan.savings[:k + 1]) > 0)
    assert np.all(np.diff(plan.savings[-6:]) < 0)
    assert plan.savings_next[-1] == 0.0


def test_perfect_smoothing_when_return_offsets_discounting():
    params = ModelParams()
    r = 1 / params.beta - 1
    S = params.S
    env = LifetimeEnvironment.constant(1.0, r, 0.0, 0.0, np.zeros(S), params)
    plan = solve_lifetime(env, params)
    assert np.ptp(plan.consumption) <= 1e-8 * plan.consumption.mean()


def test_age_consistency_of_remaining_plan(params, baseline):
    """Re-solving from any age with the wealth held then reproduces the tail."""
    env = LifetimeEnvironment.constant(baseline.w, baseline.r, baseline.tau_l, baseline.tau_k,
                                       baseline.transfer_by_age, params)
    full = solve_lifetime(env, params)
    for j in (1, 20, 45, 52):
        tail = LifetimeEnvironment(env.w[j:], env.r[j:], env.tau_l[j:], env.tau_k[j:], env.transfer[j:],
                                   float(full.savings[j]), j + 1)
        part = solve_lifetime(tail, params)
        assert np.max(np.abs(part.labor - full.labor[j:])) <= 1e-8
        assert np.max(np.abs(part.consumption - full.consumption[j:])) <= 1e-8


def test_batch_matches_dense(params, baseline, rng):
    S = params.S
    envs = []
    for first in (1, 10, 30, 53):
        p = S - first + 1
        w = baseline.w * rng.uniform(0.95, 1.05, p)
        r = baseline.r * rng.uniform(0.9, 1.1, p)
        wealth = 0.0 if first == 1 else float(baseline.b[first - 1])
        envs.append(LifetimeEnvironment(w, r, baseline.tau_l, 0.0, baseline.transfer_by_age[first - 1:],
                                        wealth, first))
    batch = CohortBatch.from_environments(envs, params)
    sol = solve_cohort_batch(batch, params, np.tile(baseline.n, (4, 1)), np.tile(baseline.b_next, (4, 1)),
                             tol=1e-12)
    assert np.all(sol.max_residual <= 1e-12)
    for i, env in enumerate(envs):
        dense = solve_lifetime(env, params)
        f = env.start_age(params) - 1
        assert np.max(np.abs(sol.labor[i, f:] - dense.labor)) <= 1e-9
        assert np.max(np.abs(sol.consumption[i, f:] - dense.consumption)) <= 1e-9
        if f:
            assert sol.savings_next[i, f - 1] == env.initial_savings


def test_clamp_enforces_non_negative_savings():
    """A large late transfer makes unconstrained young savers borrow."""
    base = ModelParams(S=6, R=3)
    env = LifetimeEnvironment.constant(1.0, 0.02, 0.22, 0.0, [0, 0, 0, 2.0, 2.0, 2.0], base)
    free = solve_lifetime(env, base)
    assert free.savings_next.min() < 0
    clamped_params = ModelParams(S=6, R=3, clamp_savings=True)
    clamped = solve_lifetime(env, clamped_params)
    assert clamped.savings_next.min() >= -1e-10
    # wherever savings are strictly positive the ordinary Euler equation holds
    mu = econ.mu_consumption(clamped.consumption, base.sigma)
    euler = mu[:-1] - base.beta * 1.02 * mu[1:]
    pos = clamped.savings_next[:-1] > 1e-8
    assert np.all(np.abs(euler[pos]) <= 1e-8)
    assert np.all(euler[~pos] >= -1e-8)


def test_plan_accounting(params, baseline):
    env = LifetimeEnvironment.constant(baseline.w, baseline.r, baseline.tau_l, baseline.tau_k,
                                       baseline.transfer_by_age, params)
    plan = plan_from_unknowns(np.r_[baseline.n, baseline.b[1:]], env, params)
    R = 1 + baseline.r * (1 - baseline.tau_k)
    lhs = plan.consumption + plan.savings_next
    rhs = (1 - baseline.tau_l) * baseline.w * plan.labor + R * plan.savings + env.transfer
    assert np.allclose(lhs, rhs, rtol=0, atol=1e-12)


def test_rejects_bad_environment():
    with pytest.raises(ValueError):
        LifetimeEnvironment([1.0, 1.0], [0.1, 0.1, 0.1], 0.0, 0.0, [0, 0])
    with pytest.raises(ValueError):
        solve_lifetime(LifetimeEnvironment([0.0, 1.0], 0.1, 0.0, 0.0, [0, 0], 0.0, 1), P2)
