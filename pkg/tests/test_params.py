import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pension_olg.errors import ConfigError
from pension_olg.params import (ModelParams, ScenarioSpec, default_config_text, dump_config, load_config,
                                parse_config, period_to_year, phase_of_period, serialize_config)


def test_table_defaults():
    p = ModelParams()
    assert (p.beta, p.sigma, p.ellip_b, p.ellip_nu, p.theta, p.l_tilde) == (0.905, 1.97, 0.431, 1.765, 0.565, 1.0)
    assert (p.S, p.R, p.A, p.alpha, p.delta) == (53, 42, 1.889, 0.3573, 0.05)
    assert (p.tau_l0, p.tau_k0, p.tau_c0) == (0.22, 0.0, 0.0)
    assert p.chi_n == (1.0,) * 53
    assert p.n_retired == 11


def test_empty_config_gives_defaults(tmp_path):
    f = tmp_path / "run.ini"
    f.write_text("")
    p, s = load_config(f)
    assert p == ModelParams()
    assert s == ScenarioSpec()


def test_alpha_out_of_range_names_field():
    with pytest.raises(ConfigError) as ei:
        parse_config("[params]\nalpha = 1.2\n")
    assert ei.value.field == "alpha"
    assert ei.value.value == 1.2


def test_partial_override():
    p, _ = parse_config("[params]\nsigma = 2.0\n")
    assert p == ModelParams(sigma=2.0)


@pytest.mark.parametrize("text,field", [
    ("[params]\nbeta = 1.0\n", "beta"),
    ("[params]\nR = 53\n", "R"),
    ("[params]\nellip_nu = 1.0\n", "ellip_nu"),
    ("[params]\ntau_l0 = 1.0\n", "tau_l0"),
    ("[params]\nsigma = 1.0\n", "sigma"),
    ("[params]\nchi_n = 1, 2\n", "chi_n"),
    ("[params]\ndelta = -0.1\n", "delta"),
    ("[scenario]\ninstrument = debt\n", "instrument"),
    ("[scenario]\npayout_low_ratio = 0.3\n", "payout_high_ratio"),
    ("[scenario]\nhorizon_T = 100\n", "horizon_T"),
    ("[scenario]\nwindow_length = 0\n", "window_length"),
    ("[params]\nbogus = 1\n", "bogus"),
    ("[extra]\na = 1\n", "extra"),
    ("[params]\nS = many\n", "S"),
])
def test_invalid_inputs_are_named(text, field):
    with pytest.raises(ConfigError) as ei:
        parse_config(text)
    assert ei.value.field == field


def test_chi_profile_accepted():
    vals = ", ".join(str(1 + 0.01 * i) for i in range(53))
    p, _ = parse_config(f"[params]\nchi_n = {vals}\n")
    assert p.chi_n[0] == 1.0 and p.chi_n[-1] == pytest.approx(1.52)


def test_default_text_round_trips():
    p, s = parse_config(default_config_text())
    assert (p, s) == (ModelParams(), ScenarioSpec())


@settings(max_examples=60, deadline=None)
@given(beta=st.floats(0.5, 0.99), sigma=st.floats(1.1, 5.0), alpha=st.floats(0.05, 0.95),
       S=st.integers(3, 60), data=st.data(),
       inst=st.sampled_from(["baseline_paygo", "labor_tax", "profit_tax", "capital_income_tax"]),
       pillar=st.sampled_from(["subsistence_for_all", "subsistence_for_grandfathered", "none"]),
       lo=st.floats(0.0, 0.5), extra=st.floats(0.0, 0.5))
def test_round_trip_exact(tmp_path_factory, beta, sigma, alpha, S, data, inst, pillar, lo, extra):
    R = data.draw(st.integers(1, S - 1))
    chi = data.draw(st.one_of(st.just(1.0), st.lists(st.floats(0.1, 3.0), min_size=S, max_size=S)))
    p = ModelParams(beta=beta, sigma=sigma, alpha=alpha, S=S, R=R, chi_n=chi)
    window = data.draw(st.integers(1, 40))
    s = ScenarioSpec(instrument=inst, window_length=window, payout_low_ratio=lo,
                     payout_high_ratio=lo + extra, post_window_pillar=pillar, horizon_T=window + 2 * S)
    f = tmp_path_factory.mktemp("cfg") / "c.ini"
    dump_config(f, p, s)
    assert load_config(f) == (p, s)
    assert serialize_config(*load_config(f)) == serialize_config(p, s)


def test_phases_match_breakpoints():
    p, s = ModelParams(), ScenarioSpec()
    assert phase_of_period(1, s, p) == "window"
    assert phase_of_period(30, s, p) == "window"
    assert phase_of_period(31, s, p) == "mixed"
    assert phase_of_period(41, s, p) == "mixed"
    assert phase_of_period(42, s, p) == "settled"
    labels = [phase_of_period(t, s, p) for t in range(1, 101)]
    assert labels.count("window") == 30 and labels.count("mixed") == 11
    # calendar labels of the breakpoints
    assert period_to_year(1) == 2024 and period_to_year(31) == 2054 and period_to_year(42) == 2065


def test_phase_before_reform_raises():
    with pytest.raises(ValueError):
        phase_of_period(1, ScenarioSpec(reform_period=3), ModelParams())


@given(t=st.integers(1, 400), w=st.integers(1, 60))
def test_phases_partition(t, w):
    p, s = ModelParams(), ScenarioSpec(window_length=w)
    lab = phase_of_period(t, s, p)
    expect = "window" if t <= w else "mixed" if t <= w + 11 else "settled"
    assert lab == expect


def test_params_hashable_and_immutable():
    p = ModelParams()
    assert hash(p) == hash(ModelParams())
    with pytest.raises(Exception):
        p.beta = 0.9
