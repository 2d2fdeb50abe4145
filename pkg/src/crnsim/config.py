"""
Scenario configuration: defaults, named presets and a flat ``key = value`` loader.

Config files hold one ``key = value`` pair per line; ``#`` starts a comment.
Matrices are given row-major as whitespace- or comma-separated numbers and
the activity schedule as ``start-end:case`` items, e.g.::

    count_pu = 4
    count_su = 10
    seed = 7
    q = 1 0 0 0.01
    schedule = 0-125:2, 125-200:1, 200-500:2

When ``schedule`` is omitted the reference five-window schedule is
stretched to cover ``[0, horizon * sample_time]``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields

import numpy as np

from .channel import ChannelParams
from .controller import Targets
from .estimator import TimeBasis, check_weights
from .network import PAPER_SCHEDULE, ActivitySchedule, Case

CONTROLLERS = ("fhaodpa", "baseline", "oracle")
UPDATE_MODES = ("round-robin", "synchronous")


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending key when known."""

    def __init__(self, message: str, field: str = None, line: int = None):
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)
        self.field = field
        self.line = line


@dataclass
class ScenarioConfig:
    count_pu: int = 8
    count_su: int = 20
    area_km: float = 9.0
    link_distance: float = 0.5
    horizon: int = 2000
    sample_time: float = 1.0
    schedule: ActivitySchedule = None
    # channel
    path_loss_exponent: float = 4.0
    reference_gain: float = 1.0
    shadowing_std_db: float = 4.0
    rayleigh_scale: float = 1.0 / np.sqrt(2.0)
    correlation: float = 0.99
    # targets
    gamma_su_high: float = 0.1
    gamma_pu: float = 0.1995
    gamma_su_low: float = 0.01
    # estimator / controller
    alpha_w: float = 1e-4
    basis_length: int = 3
    basis_kind: str = "terminal-step"
    window: int = 0                  # 0 picks max(24, 6L + 6)
    ridge: float = 1e-8
    q: tuple = (1.0, 0.0, 0.0, 0.01)
    s: float = 1.0
    p_n: tuple = (1.0, 0.0, 0.0, 1.0)
    exploration: float = 0.05
    # powers and radio
    p_max: float = 2.0
    p_init_min: float = 0.01
    p_init_max: float = 0.1
    noise_floor: float = 1.0
    bandwidth_hz: float = 100e3
    min_distance: float = 0.01
    feasibility_margin: float = 0.5   # 0 disables placement admission
    # run
    update_mode: str = "round-robin"
    controller: str = "fhaodpa"
    deny_su_when_pu_active: bool = False
    seed: int = 0

    def __post_init__(self):
        self.validate()

    # derived views

    @property
    def channel_params(self) -> ChannelParams:
        return ChannelParams(self.path_loss_exponent, self.reference_gain,
                             self.shadowing_std_db, self.rayleigh_scale, self.correlation)

    @property
    def targets(self) -> Targets:
        return Targets(self.gamma_su_high, self.gamma_pu, self.gamma_su_low)

    @property
    def basis(self) -> TimeBasis:
        return TimeBasis(self.basis_length, self.basis_kind)

    @property
    def Q(self) -> np.ndarray:
        return np.array(self.q, dtype=float).reshape(2, 2)

    @property
    def P_N(self) -> np.ndarray:
        return np.array(self.p_n, dtype=float).reshape(2, 2)

    @property
    def duration(self) -> float:
        return self.horizon * self.sample_time

    def activity(self) -> ActivitySchedule:
        if self.schedule is not None:
            return self.schedule
        if self.duration == 0:
            # an empty run has no steps to schedule; keep the unscaled shape
            return PAPER_SCHEDULE
        return PAPER_SCHEDULE.scaled(self.duration / PAPER_SCHEDULE.end)

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def validate(self):
        def need(ok, name, what):
            if not ok:
                raise ConfigError(f"{name} {what}", field=name)

        need(self.count_pu >= 0, "count_pu", "must be >= 0")
        need(self.count_su >= 0, "count_su", "must be >= 0")
        need(self.area_km > 0, "area_km", "must be > 0")
        need(self.link_distance > 0, "link_distance", "must be > 0")
        need(self.horizon >= 0, "horizon", "must be >= 0")
        need(self.sample_time > 0, "sample_time", "must be > 0")
        need(self.path_loss_exponent > 0, "path_loss_exponent", "must be > 0")
        need(self.reference_gain > 0, "reference_gain", "must be > 0")
        need(self.shadowing_std_db >= 0, "shadowing_std_db", "must be >= 0")
        need(self.rayleigh_scale > 0, "rayleigh_scale", "must be > 0")
        need(0 <= self.correlation <= 1, "correlation", "must lie in [0, 1]")
        for name in ("gamma_su_high", "gamma_pu", "gamma_su_low"):
            need(getattr(self, name) > 0, name, "must be > 0")
        need(0 <= self.alpha_w < 1, "alpha_w", "must lie in [0, 1)")
        try:
            TimeBasis(self.basis_length, self.basis_kind)
        except ValueError as exc:
            raise ConfigError(f"basis: {exc}", field="basis_kind") from None
        need(self.window == 0 or self.window >= 1, "window", "must be >= 1 (or 0 for auto)")
        need(self.ridge >= 0, "ridge", "must be >= 0")
        need(len(self.q) == 4, "q", "needs 4 entries")
        need(len(self.p_n) == 4, "p_n", "needs 4 entries")
        try:
            check_weights(self.Q, self.s)
        except ValueError as exc:
            raise ConfigError(str(exc), field="q" if "Q" in str(exc) else "s") from None
        pn = self.P_N
        need(np.allclose(pn, pn.T) and np.linalg.eigvalsh(pn).min() >= 0, "p_n",
             "must be symmetric positive semidefinite")
        need(self.exploration >= 0, "exploration", "must be >= 0")
        need(self.p_max > 0, "p_max", "must be > 0")
        need(0 <= self.p_init_min <= self.p_init_max <= self.p_max, "p_init_min",
             "must satisfy 0 <= p_init_min <= p_init_max <= p_max")
        need(self.noise_floor > 0, "noise_floor", "must be > 0")
        need(self.bandwidth_hz > 0, "bandwidth_hz", "must be > 0")
        need(self.min_distance > 0, "min_distance", "must be > 0")
        need(0 <= self.feasibility_margin <= 1, "feasibility_margin", "must lie in [0, 1]")
        need(self.update_mode in UPDATE_MODES, "update_mode", f"must be one of {UPDATE_MODES}")
        need(self.controller in CONTROLLERS, "controller", f"must be one of {CONTROLLERS}")
        need(self.seed >= 0, "seed", "must be >= 0")
        if self.schedule is not None and self.horizon > 0:
            need(self.schedule.end >= self.duration, "schedule",
                 f"must cover [0, {self.duration}]")


PRESETS = {
    # reference experiment: 8 PUs and 20 SUs in 9 km x 9 km, 2000 s at 1 s steps
    "paper-fig4": dict(count_pu=8, count_su=20, area_km=9.0, horizon=2000, sample_time=1.0),
    # desk-scale version with the same schedule shape
    "paper-fig4-small": dict(count_pu=4, count_su=10, area_km=9.0, horizon=500, sample_time=1.0),
    # five SUs on a frozen channel, PUs silent throughout; used for cost comparisons
    "static-5": dict(count_pu=0, count_su=5, area_km=4.0, link_distance=1.0, horizon=300,
                     correlation=1.0, update_mode="synchronous",
                     schedule=ActivitySchedule(((0, 300, Case.CASE1),))),
}


def preset(name: str, **overrides) -> ScenarioConfig:
    try:
        base = PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}",
                          field="preset") from None
    return ScenarioConfig(**{**base, **overrides})


# parsing

def _parse_bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_floats(text: str) -> tuple:
    return tuple(float(t) for t in text.replace(",", " ").split())


def parse_schedule(text: str) -> ActivitySchedule:
    """``"0-500:2, 500-800:1"`` -> schedule."""
    items = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        span, _, case = part.partition(":")
        start, _, end = span.partition("-")
        items.append((float(start), float(end), Case(int(case))))
    return ActivitySchedule(tuple(items))


def _converter(f: dataclasses.Field):
    if f.name == "schedule":
        return parse_schedule
    if f.name in ("q", "p_n"):
        return _parse_floats
    kind = type(f.default)
    if kind is bool:
        return _parse_bool
    if kind is int:
        return int
    if kind is float:
        return float
    return str


_FIELDS = {f.name: f for f in fields(ScenarioConfig)}


def parse_config(text: str, source: str = "<string>", default_preset: str = None) -> ScenarioConfig:
    """Parse flat ``key = value`` text.

    A ``preset`` key, or else ``default_preset``, picks the starting defaults.
    """
    values, lines = {}, {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"{source}: expected 'key = value', got {raw.strip()!r}", line=lineno)
        if key != "preset" and key not in _FIELDS:
            raise ConfigError(f"{source}: unknown key {key!r}", field=key, line=lineno)
        if key in values:
            raise ConfigError(f"{source}: duplicate key {key!r}", field=key, line=lineno)
        if key != "preset":
            try:
                value = _converter(_FIELDS[key])(value)
            except ValueError as exc:
                raise ConfigError(f"{source}: bad value for {key!r}: {exc}",
                                  field=key, line=lineno) from None
        values[key] = value
        lines[key] = lineno

    name = values.pop("preset", default_preset)
    try:
        if name is not None:
            return preset(name, **values)
        return ScenarioConfig(**values)
    except ConfigError as exc:
        if exc.field in lines and exc.line is None:
            raise ConfigError(f"{source}: {exc}", field=exc.field, line=lines[exc.field]) from None
        raise


def load_config(path, default_preset: str = None) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_config(text, source=str(path), default_preset=default_preset)
