"""Scenario and sweep configuration: a YAML key/value tree with validation.

Every field has a default, so an empty file is the standard 50-node
scenario.  Validation errors carry the dotted path of the offending key
(``radio.range``, ``traffic.members_per_group`` ...).
"""

from __future__ import annotations

import copy
from dataclasses import MISSING, asdict, dataclass, field, fields, is_dataclass
from pathlib import Path

import yaml

from .mobility import Area, InvalidParams, ManhattanParams, RpgmParams, RwpParams
from .protocols.core import UnknownProtocol, register_protocol
from .radio import InvalidRadioParams, RadioParams

MODELS = ("rwp", "rpgm", "manhattan", "static")
SWEEP_MODELS = ("rwp", "rpgm", "manhattan")
SWEEP_PROTOCOLS = ("maodv", "odmrp", "admr")
DEFAULT_SPEEDS = (1.0, 5.0, 10.0, 15.0, 20.0)


class ValidationError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.message = message


@dataclass
class AreaConfig:
    width: float = 1000.0
    height: float = 700.0


@dataclass
class RadioConfig:
    range: float = 150.0
    hop_delay_base: float = 0.002
    hop_delay_jitter: float = 0.001
    loss_prob: float = 0.0


@dataclass
class MobilityConfig:
    model: str = "rwp"
    max_speed: float = 10.0
    min_speed: float = 1.0
    pause: float = 2.0
    # rpgm
    group_count: int = 5
    max_deviation: float = 100.0
    member_speed_ratio: float = 0.5
    # manhattan
    h_streets: int = 5
    v_streets: int = 5
    turn_probs: list = field(default_factory=lambda: [0.25, 0.25, 0.5])


@dataclass
class TrafficConfig:
    groups: int = 10
    members_per_group: int = 10
    sources_per_group: int = 1
    sources_are_members: bool = True
    interval: float = 0.25
    packet_size: int = 512
    start_window: list = field(default_factory=lambda: [5.0, 15.0])
    stop_margin: float = 10.0
    join_window: list = field(default_factory=lambda: [0.0, 5.0])
    align_with_rpgm: bool = True


@dataclass
class Scenario:
    name: str = "standard"
    nodes: int = 50
    duration: float = 200.0
    seed: int = 1
    protocol: str = "odmrp"
    protocol_config: dict = field(default_factory=dict)
    area: AreaConfig = field(default_factory=AreaConfig)
    radio: RadioConfig = field(default_factory=RadioConfig)
    mobility: MobilityConfig = field(default_factory=MobilityConfig)
    traffic: TrafficConfig = field(default_factory=TrafficConfig)
    warmup: float = 10.0
    link_sample_dt: float = 0.1

    @property
    def scenario_id(self) -> str:
        return f"{self.protocol}-{self.mobility.model}-v{self.mobility.max_speed:g}-s{self.seed}"

    def replace(self, **changes) -> "Scenario":
        """Copy with dotted-key overrides, e.g. ``replace(**{"mobility.max_speed": 5})``."""
        out = copy.deepcopy(self)
        for key, value in changes.items():
            target = out
            *parents, leaf = key.split(".")
            for p in parents:
                target = getattr(target, p)
            setattr(target, leaf, value)
        return out

    # derived parameter objects

    def area_obj(self) -> Area:
        return Area(self.area.width, self.area.height)

    def radio_params(self) -> RadioParams:
        return RadioParams(**asdict(self.radio))

    def rwp_params(self) -> RwpParams:
        m = self.mobility
        return RwpParams(min(m.min_speed, m.max_speed), m.max_speed, m.pause)

    def rpgm_params(self) -> RpgmParams:
        m = self.mobility
        return RpgmParams(m.group_count, self.nodes // max(m.group_count, 1), m.max_deviation,
                          min(m.min_speed, m.max_speed), m.max_speed, m.pause, m.member_speed_ratio)

    def manhattan_params(self) -> ManhattanParams:
        m = self.mobility
        return ManhattanParams(m.h_streets, m.v_streets, min(m.min_speed, m.max_speed), m.max_speed,
                               tuple(float(p) for p in m.turn_probs))

    def validate(self, traffic: bool = True) -> "Scenario":
        """Raise ValidationError on the first bad field; ``traffic=False`` skips the traffic block."""
        _check(self.nodes > 1, "nodes", "must be at least 2")
        _check(self.duration > 0, "duration", "must be > 0")
        _check(self.warmup >= 0, "warmup", "must be >= 0")
        _check(self.link_sample_dt > 0, "link_sample_dt", "must be > 0")
        try:
            register_protocol(self.protocol)
        except UnknownProtocol as exc:
            raise ValidationError("protocol", str(exc.args[0])) from None
        _check(self.area.width > 0, "area.width", "must be > 0")
        _check(self.area.height > 0, "area.height", "must be > 0")
        r = self.radio
        _check(r.range > 0, "radio.range", "must be > 0")
        _check(r.hop_delay_base >= 0, "radio.hop_delay_base", "must be >= 0")
        _check(r.hop_delay_jitter >= 0, "radio.hop_delay_jitter", "must be >= 0")
        _check(0.0 <= r.loss_prob <= 1.0, "radio.loss_prob", "must lie in [0, 1]")
        try:
            self.radio_params().validate()
        except InvalidRadioParams as exc:
            raise ValidationError("radio", str(exc)) from None

        m = self.mobility
        _check(m.model in MODELS, "mobility.model", f"must be one of {', '.join(MODELS)}")
        if m.model != "static":
            _check(m.max_speed > 0, "mobility.max_speed", "must be > 0 (use model: static for v=0)")
            _check(m.min_speed > 0, "mobility.min_speed", "must be > 0")
        _check(m.pause >= 0, "mobility.pause", "must be >= 0")
        try:
            if m.model == "rwp":
                self.rwp_params().validate()
            elif m.model == "rpgm":
                _check(m.group_count > 0 and self.nodes % m.group_count == 0, "mobility.group_count",
                       f"must divide the node count {self.nodes}")
                self.rpgm_params().validate(self.nodes)
            elif m.model == "manhattan":
                self.manhattan_params().validate()
        except InvalidParams as exc:
            raise ValidationError("mobility", str(exc)) from None

        if not traffic:
            return self
        t = self.traffic
        _check(t.groups > 0, "traffic.groups", "must be > 0")
        _check(0 < t.members_per_group <= self.nodes, "traffic.members_per_group",
               f"must lie in [1, {self.nodes}]")
        if t.align_with_rpgm and m.model == "rpgm":
            _check(t.members_per_group <= self.nodes // m.group_count, "traffic.members_per_group",
                   "exceeds the RPGM group size while align_with_rpgm is set")
        _check(t.sources_per_group > 0, "traffic.sources_per_group", "must be > 0")
        if t.sources_are_members:
            _check(t.sources_per_group <= t.members_per_group, "traffic.sources_per_group",
                   "exceeds members_per_group")
        _check(t.interval > 0, "traffic.interval", "must be > 0")
        _check(t.packet_size > 0, "traffic.packet_size", "must be > 0")
        _check(len(t.start_window) == 2 and 0 <= t.start_window[0] <= t.start_window[1],
               "traffic.start_window", "must be [lo, hi] with 0 <= lo <= hi")
        _check(0 <= t.stop_margin, "traffic.stop_margin", "must be >= 0")
        _check(t.start_window[1] < self.duration - t.stop_margin, "traffic.start_window",
               "flows must start before duration - stop_margin")
        _check(len(t.join_window) == 2 and 0 <= t.join_window[0] <= t.join_window[1] <= self.duration,
               "traffic.join_window", "must be [lo, hi] inside the run")
        return self


@dataclass
class SweepSpec:
    speeds: list = field(default_factory=lambda: list(DEFAULT_SPEEDS))
    seeds: list = field(default_factory=lambda: [1, 2, 3, 4, 5])
    protocols: list = field(default_factory=lambda: list(SWEEP_PROTOCOLS))
    models: list = field(default_factory=lambda: list(SWEEP_MODELS))
    workers: int = 0

    def validate(self) -> "SweepSpec":
        for name in ("speeds", "seeds", "protocols", "models"):
            _check(len(getattr(self, name)) > 0, f"sweep.{name}", "must not be empty")
        for i, v in enumerate(self.speeds):
            _check(float(v) > 0, f"sweep.speeds[{i}]", "must be > 0")
        for i, m in enumerate(self.models):
            _check(m in SWEEP_MODELS, f"sweep.models[{i}]", f"must be one of {', '.join(SWEEP_MODELS)}")
        for i, p in enumerate(self.protocols):
            try:
                register_protocol(p)
            except UnknownProtocol as exc:
                raise ValidationError(f"sweep.protocols[{i}]", str(exc.args[0])) from None
        _check(self.workers >= 0, "sweep.workers", "must be >= 0")
        return self

    def cells(self, base: Scenario) -> list[Scenario]:
        """The cartesian grid, in canonical (protocol, model, speed, seed) order."""
        out = []
        for p in self.protocols:
            for m in self.models:
                for v in self.speeds:
                    for s in self.seeds:
                        out.append(base.replace(protocol=p, seed=int(s), **{"mobility.model": m,
                                                                            "mobility.max_speed": float(v)}))
        return out


def _check(ok: bool, path: str, message: str):
    if not ok:
        raise ValidationError(path, message)


def _build(cls, data, path: str):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ValidationError(path or "<root>", f"expected a mapping, got {type(data).__name__}")
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, value in data.items():
        where = f"{path}.{key}" if path else str(key)
        f = known.get(key)
        if f is None:
            raise ValidationError(where, "unknown key")
        default = f.default_factory() if f.default_factory is not MISSING else f.default
        if is_dataclass(default):
            kwargs[key] = _build(type(default), value, where)
        else:
            kwargs[key] = _coerce(default, value, where)
    return cls(**kwargs)


def _coerce(default, value, path):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ValidationError(path, f"expected true/false, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ValidationError(path, f"expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValidationError(path, f"expected a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ValidationError(path, f"expected a string, got {value!r}")
        return value
    if isinstance(default, list):
        if not isinstance(value, list):
            raise ValidationError(path, f"expected a list, got {value!r}")
        return list(value)
    if isinstance(default, dict):
        if not isinstance(value, dict):
            raise ValidationError(path, f"expected a mapping, got {value!r}")
        return dict(value)
    return value


def scenario_from_dict(data: dict | None) -> Scenario:
    data = dict(data or {})
    data.pop("sweep", None)
    return _build(Scenario, data, "").validate()


def sweep_from_dict(data: dict | None) -> SweepSpec:
    data = (data or {}).get("sweep")
    return _build(SweepSpec, data, "sweep").validate()


def load_config(path: str | Path) -> tuple[Scenario, SweepSpec]:
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ValidationError("<file>", f"not valid YAML: {exc}") from None
    if data is not None and not isinstance(data, dict):
        raise ValidationError("<root>", "top level must be a mapping")
    return scenario_from_dict(data), sweep_from_dict(data)


def scenario_to_dict(scenario: Scenario, sweep: SweepSpec | None = None) -> dict:
    out = asdict(scenario)
    if sweep is not None:
        out["sweep"] = asdict(sweep)
    return out


def dump_config(scenario: Scenario, sweep: SweepSpec | None = None) -> str:
    return yaml.safe_dump(scenario_to_dict(scenario, sweep), sort_keys=False)
