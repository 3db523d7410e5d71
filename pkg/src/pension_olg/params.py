"""Structural parameters, reform scenarios and the run-configuration file.

Configuration files are INI-style plain text read with :mod:`configparser`.
Two sections are recognised; every key is optional and falls back to the
calibrated default::

    [params]
    beta = 0.905
    sigma = 1.97
    chi_n = 1.0            # one value (flat profile) or S comma-separated values
    ellip_b = 0.431
    ellip_nu = 1.765
    theta = 0.565
    l_tilde = 1.0
    S = 53
    R = 42
    A = 1.889
    alpha = 0.3573
    delta = 0.05
    tau_l0 = 0.22
    tau_k0 = 0.0
    tau_c0 = 0.0
    clamp_savings = false

    [scenario]
    instrument = labor_tax
    reform_period = 1
    window_length = 30
    payout_high_ratio = 0.26
    payout_low_ratio = 0.18
    post_window_pillar = subsistence_for_all
    horizon_T = 300

Unknown sections or keys are rejected so that typos do not silently fall back
to defaults.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError

INSTRUMENTS = ("baseline_paygo", "labor_tax", "profit_tax", "capital_income_tax")
REFORM_INSTRUMENTS = INSTRUMENTS[1:]
PILLARS = ("subsistence_for_all", "subsistence_for_grandfathered", "none")

# Calendar label of model period 1.
REFORM_YEAR = 2024


@dataclass(frozen=True)
class ModelParams:
    """Preferences, technology, demographics and initial tax rates.

    ``R`` is the last working age: ages ``s > R`` are retired and receive the
    pension transfer. ``chi_n`` is stored as a tuple so instances stay
    hashable; use :attr:`chi` for the array view.
    """

    beta: float = 0.905
    sigma: float = 1.97
    chi_n: tuple = None
    ellip_b: float = 0.431
    ellip_nu: float = 1.765
    theta: float = 0.565
    l_tilde: float = 1.0
    S: int = 53
    R: int = 42
    A: float = 1.889
    alpha: float = 0.3573
    delta: float = 0.05
    tau_l0: float = 0.22
    tau_k0: float = 0.0
    tau_c0: float = 0.0
    clamp_savings: bool = False

    def __post_init__(self):
        chi = self.chi_n
        if chi is None:
            chi = (1.0,) * int(self.S)
        elif np.isscalar(chi):
            chi = (float(chi),) * int(self.S)
        else:
            chi = tuple(float(v) for v in chi)
        object.__setattr__(self, "chi_n", chi)
        object.__setattr__(self, "S", int(self.S))
        object.__setattr__(self, "R", int(self.R))
        _validate_params(self)

    @property
    def chi(self) -> np.ndarray:
        return np.asarray(self.chi_n, dtype=float)

    @property
    def n_retired(self) -> int:
        return self.S - self.R

    def with_updates(self, **changes) -> "ModelParams":
        if "S" in changes and "chi_n" not in changes and len(set(self.chi_n)) == 1:
            changes["chi_n"] = self.chi_n[0]
        return replace(self, **changes)


def _check(cond, name, value, reason):
    if not cond:
        raise ConfigError(name, value, reason)


def _validate_params(p: ModelParams):
    for f in fields(p):
        v = getattr(p, f.name)
        if isinstance(v, float) and not math.isfinite(v):
            raise ConfigError(f.name, v, "must be finite")
    _check(0 < p.beta < 1, "beta", p.beta, "must lie in (0, 1)")
    _check(p.sigma > 0, "sigma", p.sigma, "must be positive")
    _check(p.sigma != 1, "sigma", p.sigma, "log utility (sigma = 1) is not supported")
    _check(p.theta > 0, "theta", p.theta, "must be positive")
    _check(p.l_tilde > 0, "l_tilde", p.l_tilde, "must be positive")
    _check(0 < p.alpha < 1, "alpha", p.alpha, "must lie in (0, 1)")
    _check(p.A > 0, "A", p.A, "must be positive")
    _check(0 <= p.delta <= 1, "delta", p.delta, "must lie in [0, 1]")
    _check(p.ellip_nu > 1, "ellip_nu", p.ellip_nu, "must exceed 1")
    _check(p.ellip_b > 0, "ellip_b", p.ellip_b, "must be positive")
    _check(p.S >= 2, "S", p.S, "must be at least 2")
    _check(1 <= p.R < p.S, "R", p.R, f"must satisfy 1 <= R < S={p.S}")
    _check(len(p.chi_n) == p.S, "chi_n", p.chi_n, f"needs exactly S={p.S} entries")
    _check(all(c > 0 and math.isfinite(c) for c in p.chi_n), "chi_n", p.chi_n, "entries must be positive")
    for name in ("tau_l0", "tau_k0", "tau_c0"):
        v = getattr(p, name)
        _check(0 <= v < 1, name, v, "must lie in [0, 1)")


@dataclass(frozen=True)
class ScenarioSpec:
    """A pension regime: financing instrument, payout schedule, timing and horizon.

    Payout ratios are fractions of average gross labour earnings in the
    baseline steady state (wage times mean labour supply across all ages).
    The defaults are the 2024 minimum wage (19 242 RUB) and the 2024
    pensioner subsistence minimum (13 290 RUB) over the 2023 Rosstat average
    monthly wage (about 74 000 RUB).
    """

    instrument: str = "baseline_paygo"
    reform_period: int = 1
    window_length: int = 30
    payout_high_ratio: float = 0.26
    payout_low_ratio: float = 0.18
    post_window_pillar: str = "subsistence_for_all"
    horizon_T: int = 300

    def __post_init__(self):
        for name in ("reform_period", "window_length", "horizon_T"):
            object.__setattr__(self, name, int(getattr(self, name)))
        _check(self.instrument in INSTRUMENTS, "instrument", self.instrument, f"must be one of {INSTRUMENTS}")
        _check(self.post_window_pillar in PILLARS, "post_window_pillar", self.post_window_pillar,
               f"must be one of {PILLARS}")
        _check(self.reform_period >= 1, "reform_period", self.reform_period, "must be >= 1")
        _check(self.window_length >= 1, "window_length", self.window_length, "must be >= 1")
        _check(math.isfinite(self.payout_low_ratio) and self.payout_low_ratio >= 0,
               "payout_low_ratio", self.payout_low_ratio, "must be >= 0")
        _check(math.isfinite(self.payout_high_ratio) and self.payout_high_ratio >= self.payout_low_ratio,
               "payout_high_ratio", self.payout_high_ratio, "must be >= payout_low_ratio")

    @property
    def is_reform(self) -> bool:
        return self.instrument != "baseline_paygo"

    @property
    def window_end(self) -> int:
        """First period after the high-payout window."""
        return self.reform_period + self.window_length

    def validate_against(self, params: ModelParams) -> "ScenarioSpec":
        min_T = self.window_length + 2 * params.S
        _check(self.horizon_T >= min_T, "horizon_T", self.horizon_T,
               f"must be >= window_length + 2*S = {min_T}")
        return self


def phase_of_period(t: int, spec: ScenarioSpec, params: ModelParams) -> str:
    """Label period ``t`` as ``window``, ``mixed`` or ``settled``.

    ``mixed`` covers the S - R periods after the window during which
    retirees who retired inside the window are still alive.
    """
    if t < spec.reform_period:
        raise ValueError(f"period {t} precedes the reform period {spec.reform_period}")
    if t < spec.window_end:
        return "window"
    if t < spec.window_end + params.n_retired:
        return "mixed"
    return "settled"


def period_to_year(t):
    return REFORM_YEAR - 1 + np.asarray(t)


# --- configuration file -----------------------------------------------------

_BOOL_TRUE = {"1", "true", "yes", "on"}
_BOOL_FALSE = {"0", "false", "no", "off"}


def _coerce(cls, name, raw):
    ftype = {f.name: f.type for f in fields(cls)}[name]
    try:
        if name == "chi_n":
            vals = [float(v) for v in raw.replace(",", " ").split()]
            return vals[0] if len(vals) == 1 else tuple(vals)
        if ftype == "bool":
            low = raw.strip().lower()
            if low in _BOOL_TRUE:
                return True
            if low in _BOOL_FALSE:
                return False
            raise ValueError(raw)
        if ftype == "int":
            return int(raw)
        if ftype == "float":
            return float(raw)
        return raw.strip()
    except ValueError as exc:
        raise ConfigError(name, raw, f"cannot parse as {ftype}") from exc


_SECTIONS = {"params": ModelParams, "scenario": ScenarioSpec}


def parse_config(text: str) -> tuple[ModelParams, ScenarioSpec]:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("<file>", None, f"parse failure: {exc}") from exc
    kwargs = {"params": {}, "scenario": {}}
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(section, None, f"unknown section (expected {sorted(_SECTIONS)})")
        cls = _SECTIONS[section]
        known = {f.name for f in fields(cls)}
        for key, raw in parser.items(section):
            if key not in known:
                raise ConfigError(key, raw, f"unknown key in [{section}]")
            kwargs[section][key] = _coerce(cls, key, raw)
    params = ModelParams(**kwargs["params"])
    spec = ScenarioSpec(**kwargs["scenario"])
    spec.validate_against(params)
    return params, spec


def load_config(path) -> tuple[ModelParams, ScenarioSpec]:
    """Read a configuration file; absent keys take their calibrated defaults."""
    text = Path(path).read_text(encoding="utf-8")
    return parse_config(text)


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        if len(set(v)) == 1:
            return repr(v[0])
        return ", ".join(repr(x) for x in v)
    return str(v)


def serialize_config(params: ModelParams, spec: ScenarioSpec) -> str:
    lines = ["[params]"]
    lines += [f"{f.name} = {_fmt(getattr(params, f.name))}" for f in fields(ModelParams)]
    lines += ["", "[scenario]"]
    lines += [f"{f.name} = {_fmt(getattr(spec, f.name))}" for f in fields(ScenarioSpec)]
    return "\n".join(lines) + "\n"


def dump_config(path, params: ModelParams, spec: ScenarioSpec) -> None:
    Path(path).write_text(serialize_config(params, spec), encoding="utf-8")


def default_config_text() -> str:
    return serialize_config(ModelParams(), ScenarioSpec())
