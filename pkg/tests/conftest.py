import time

import numpy as np
import pytest

from pension_olg.params import REFORM_INSTRUMENTS, ModelParams, ScenarioSpec
from pension_olg.steady_state import FiscalRule, settled_rule, solve_steady_state
from pension_olg.transition import TPIOptions, solve_transition

# Tight enough that the emergent goods-market identity holds to 1e-6 in levels.
ACCEPT_TPI = TPIOptions(tol=1e-10)

# wall-clock seconds of the session-scoped solves, read by the acceptance suite
TIMINGS = {}
# one verdict line per acceptance criterion, printed after the run
VERDICTS = {}


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for key in sorted(VERDICTS):
            terminalreporter.write_line(VERDICTS[key])


@pytest.fixture(scope="session")
def params():
    return ModelParams()


@pytest.fixture(scope="session")
def baseline(params):
    return solve_steady_state(params, FiscalRule.paygo(params), "baseline")


@pytest.fixture(scope="session")
def settled(params, baseline):
    out = {}
    for inst in REFORM_INSTRUMENTS:
        spec = ScenarioSpec(instrument=inst)
        out[inst] = solve_steady_state(params, settled_rule(spec, baseline, params), f"settled_{inst}",
                                       K0=baseline.K, L0=baseline.L)
    return out


@pytest.fixture(scope="session")
def baseline_path(params, baseline):
    return solve_transition(baseline, baseline, ScenarioSpec(), params, ACCEPT_TPI)


@pytest.fixture(scope="session")
def transitions(params, baseline, settled):
    out = {}
    for inst in REFORM_INSTRUMENTS:
        t = time.perf_counter()
        out[inst] = solve_transition(baseline, settled[inst], ScenarioSpec(instrument=inst), params, ACCEPT_TPI)
        TIMINGS[f"transition_{inst}"] = time.perf_counter() - t
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20240101)
