"""Overlapping-generations model of a pay-as-you-go to funded pension transition."""
from .errors import ConfigError, ConvergenceError, NonFiniteError, ScenarioInfeasible
from .params import ModelParams, ScenarioSpec, load_config, parse_config
from .steady_state import FiscalRule, SteadyState, settled_rule, solve_steady_state
from .transition import TPIOptions, TransitionResult, cohort_consumption_panels, solve_transition

__version__ = "0.1.0"
