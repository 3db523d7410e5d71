"""Exception types shared by the solver modules."""


class ConfigError(ValueError):
    """A configuration value failed validation or could not be parsed."""

    def __init__(self, field, value, reason):
        self.field = field
        self.value = value
        super().__init__(f"{field}={value!r}: {reason}")


class ConvergenceError(RuntimeError):
    """An iterative solver stopped without meeting its tolerance."""

    def __init__(self, message, best_residual=float("nan"), iterations=0, history=None):
        self.best_residual = best_residual
        self.iterations = iterations
        self.history = list(history) if history is not None else []
        super().__init__(f"{message} (best residual {best_residual:.3e} after {iterations} iterations)")


class NonFiniteError(FloatingPointError):
    """A residual or objective evaluation produced NaN or inf."""

    def __init__(self, message, coordinate=None):
        self.coordinate = coordinate
        if coordinate is not None:
            message = f"{message} at coordinate {coordinate}"
        super().__init__(message)


class ScenarioInfeasible(RuntimeError):
    """A pension payout cannot be financed by the chosen instrument (rate >= 1 or empty base)."""
