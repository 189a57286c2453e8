"""Scenario configuration: dataclasses, YAML loading/writing and validation.

Scenario files are YAML mappings. Every key is optional except ``duration``;
anything omitted takes the default shown below. When ``windows`` is absent,
IAE windows are derived from the first fault and the reference step after it.
``schema_version`` must be 1 when present.

    schema_version: 1
    duration: 500.0              # s
    plant_dt: 0.01               # s, RK4 step
    control_period: 0.1          # s, zero-order-hold sample time
    plant: {tank_area: [...], orifice_area: [...], valve_split_1: 0.7, ...}
    operating_point:
      source: table2             # table2 | computed_equilibrium | explicit
      levels: [12.4, 12.7, 1.8, 1.4]
      voltages: [3.0, 3.0]
    initial_state:
      source: computed_equilibrium   # computed_equilibrium | operating_point | explicit
      levels: null
    reference:                   # offsets added to the initial measured outputs, V
      - {time: 100.0, offset: [0.5, 0.5]}
    faults:
      - {time: 200.0, effectiveness: [0.4, 0.4]}
    fdi: {detection_delay: 1.0}
    controller:
      mode: reconfigurable       # fixed | reconfigurable
      poles: [-0.252, -0.184, -0.017, -0.057, -0.073]
      completion_pole: -0.1
      policy: min_cond           # min_cond | cyclic
      freeze_integrator_on_saturation: false
    windows:
      - {label: transient, start: 200.0, end: 350.0, output: 1}

Complex poles are written as strings, e.g. ``"-0.1+0.05j"``.
"""
from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import yaml

from .exceptions import (
    FourTankError,
    InvalidInputError,
    ScenarioNotFoundError,
    ScenarioParseError,
    ScenarioValidationError,
)
from .faults import FaultEvent, FdiConfig, check_schedule
from .plant import NOMINAL_OPERATING_POINT, PlantParams
from .synthesis import DEFAULT_COMPLETION_POLE, DEFAULT_POLICY, DESIGN_POLES, POLICIES, PoleSet

SCHEMA_VERSION = 1
MODES = ("fixed", "reconfigurable")
OP_SOURCES = ("table2", "computed_equilibrium", "explicit")
INIT_SOURCES = ("computed_equilibrium", "operating_point", "explicit")


@dataclass(frozen=True)
class ReferenceStep:
    time: float
    offset: tuple


@dataclass(frozen=True)
class IaeWindow:
    label: str
    start: float
    end: float
    output: int

    def __post_init__(self):
        if not self.start < self.end:
            raise InvalidInputError(f"IaeWindow {self.label!r}: start must be before end")
        if self.output not in (1, 2):
            raise InvalidInputError(f"IaeWindow {self.label!r}: output must be 1 or 2")


@dataclass(frozen=True)
class ControllerConfig:
    mode: str = "reconfigurable"
    poles: tuple = DESIGN_POLES
    completion_pole: complex = DEFAULT_COMPLETION_POLE
    policy: str = DEFAULT_POLICY
    freeze_integrator_on_saturation: bool = False

    def pole_set(self, size=6):
        return PoleSet.completed(self.poles, self.completion_pole, size)


@dataclass(frozen=True)
class ScenarioConfig:
    duration: float
    plant_dt: float = 0.01
    control_period: float = 0.1
    plant: PlantParams = field(default_factory=PlantParams)
    op_source: str = "table2"
    op_levels: tuple = NOMINAL_OPERATING_POINT.levels0
    op_voltages: tuple = NOMINAL_OPERATING_POINT.voltages0
    init_source: str = "computed_equilibrium"
    init_levels: tuple | None = None
    reference: tuple = ()
    faults: tuple = ()
    fdi: FdiConfig = field(default_factory=FdiConfig)
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    windows: tuple = ()

    @property
    def n_samples(self):
        return int(round(self.duration / self.control_period)) + 1

    @property
    def substeps(self):
        return int(round(self.control_period / self.plant_dt))

    def with_mode(self, mode):
        return replace(self, controller=replace(self.controller, mode=mode))

    def to_dict(self):
        return scenario_to_dict(self)

    def digest(self, length=10):
        """Short content hash of the effective configuration, ignoring the controller mode."""
        data = self.to_dict()
        del data["controller"]["mode"]
        blob = json.dumps(data, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:length]


def _pole_out(p):
    p = complex(p)
    return p.real if p.imag == 0 else str(p).strip("()")


def scenario_to_dict(cfg):
    ctl = cfg.controller
    return {
        "schema_version": SCHEMA_VERSION,
        "duration": cfg.duration,
        "plant_dt": cfg.plant_dt,
        "control_period": cfg.control_period,
        "plant": {
            k: list(v) if isinstance(v, tuple) else v for k, v in asdict(cfg.plant).items()
        },
        "operating_point": {
            "source": cfg.op_source,
            "levels": list(cfg.op_levels),
            "voltages": list(cfg.op_voltages),
        },
        "initial_state": {
            "source": cfg.init_source,
            "levels": None if cfg.init_levels is None else list(cfg.init_levels),
        },
        "reference": [{"time": s.time, "offset": list(s.offset)} for s in cfg.reference],
        "faults": [{"time": e.time, "effectiveness": list(e.effectiveness)} for e in cfg.faults],
        "fdi": {"detection_delay": cfg.fdi.detection_delay},
        "controller": {
            "mode": ctl.mode,
            "poles": [_pole_out(p) for p in ctl.poles],
            "completion_pole": _pole_out(ctl.completion_pole),
            "policy": ctl.policy,
            "freeze_integrator_on_saturation": ctl.freeze_integrator_on_saturation,
        },
        "windows": [
            {"label": w.label, "start": w.start, "end": w.end, "output": w.output} for w in cfg.windows
        ],
    }


def default_windows(duration, reference, faults):
    """Event-aligned IAE windows: [first fault, next reference step) and [that step, end]."""
    if not faults:
        return ()
    t_fault = faults[0].time
    later = [s.time for s in reference if s.time > t_fault]
    t_step = later[0] if later else duration
    windows = [IaeWindow("fault_transient", t_fault, t_step, i) for i in (1, 2)]
    if t_step < duration:
        windows += [IaeWindow("reference_step", t_step, duration, i) for i in (1, 2)]
    return tuple(windows)


# ---------------------------------------------------------------- parsing


def _section(raw, key, expected=dict):
    value = raw.get(key)
    if value is None:
        return expected()
    if not isinstance(value, expected):
        raise ScenarioValidationError(key, f"expected a {expected.__name__}, got {type(value).__name__}")
    return value


def _number(value, name):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioValidationError(name, f"expected a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ScenarioValidationError(name, f"must be finite, got {value}")
    return value


def _vector(value, size, name):
    if not isinstance(value, (list, tuple)) or len(value) != size:
        raise ScenarioValidationError(name, f"expected a list of {size} numbers, got {value!r}")
    return tuple(_number(v, f"{name}[{i}]") for i, v in enumerate(value))


def _pole(value, name):
    try:
        if isinstance(value, str):
            return complex(value.replace(" ", ""))
        if isinstance(value, bool):
            raise TypeError
        return complex(value)
    except (TypeError, ValueError):
        raise ScenarioValidationError(name, f"not a pole value: {value!r}") from None


def _check_keys(section, allowed, name):
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise ScenarioValidationError(name, f"unknown keys {unknown}")


def scenario_from_dict(raw):
    if not isinstance(raw, dict):
        raise ScenarioValidationError("<root>", "scenario must be a mapping")
    _check_keys(
        raw,
        {"schema_version", "duration", "plant_dt", "control_period", "plant", "operating_point",
         "initial_state", "reference", "faults", "fdi", "controller", "windows"},
        "<root>",
    )
    version = raw.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ScenarioValidationError("schema_version", f"unsupported version {version!r}")
    if "duration" not in raw:
        raise ScenarioValidationError("duration", "required field is missing")
    duration = _number(raw["duration"], "duration")
    plant_dt = _number(raw.get("plant_dt", 0.01), "plant_dt")
    period = _number(raw.get("control_period", 0.1), "control_period")
    if duration <= 0:
        raise ScenarioValidationError("duration", "must be > 0")
    if plant_dt <= 0:
        raise ScenarioValidationError("plant_dt", "must be > 0")
    if plant_dt > period:
        raise ScenarioValidationError("plant_dt", "must not exceed control_period")
    ratio = period / plant_dt
    if abs(ratio - round(ratio)) * plant_dt > 1e-12:
        raise ScenarioValidationError("control_period", "must be an integer multiple of plant_dt")
    n = duration / period
    if abs(n - round(n)) > 1e-9:
        raise ScenarioValidationError("duration", "must be an integer multiple of control_period")

    plant_raw = _section(raw, "plant")
    defaults = PlantParams()
    _check_keys(plant_raw, {f.name for f in fields(PlantParams)}, "plant")
    plant_kwargs = {}
    for f in fields(PlantParams):
        if f.name not in plant_raw:
            continue
        default = getattr(defaults, f.name)
        name = f"plant.{f.name}"
        if isinstance(default, tuple):
            plant_kwargs[f.name] = _vector(plant_raw[f.name], len(default), name)
        else:
            plant_kwargs[f.name] = _number(plant_raw[f.name], name)
    try:
        plant = PlantParams(**plant_kwargs)
    except FourTankError as exc:
        raise ScenarioValidationError("plant", str(exc)) from None

    op_raw = _section(raw, "operating_point")
    _check_keys(op_raw, {"source", "levels", "voltages"}, "operating_point")
    op_source = op_raw.get("source", "table2")
    if op_source not in OP_SOURCES:
        raise ScenarioValidationError("operating_point.source", f"must be one of {OP_SOURCES}")
    op_levels = _vector(op_raw.get("levels", NOMINAL_OPERATING_POINT.levels0), 4, "operating_point.levels")
    op_voltages = _vector(
        op_raw.get("voltages", NOMINAL_OPERATING_POINT.voltages0), 2, "operating_point.voltages"
    )
    if op_source != "computed_equilibrium" and min(op_levels) <= 0:
        raise ScenarioValidationError("operating_point.levels", "levels must be strictly positive")

    init_raw = _section(raw, "initial_state")
    _check_keys(init_raw, {"source", "levels"}, "initial_state")
    init_source = init_raw.get("source", "computed_equilibrium")
    if init_source not in INIT_SOURCES:
        raise ScenarioValidationError("initial_state.source", f"must be one of {INIT_SOURCES}")
    init_levels = init_raw.get("levels")
    if init_levels is not None:
        init_levels = _vector(init_levels, 4, "initial_state.levels")
        if not all(0 <= h <= plant.tank_height for h in init_levels):
            raise ScenarioValidationError("initial_state.levels", "levels must lie within the tanks")
    elif init_source == "explicit":
        raise ScenarioValidationError("initial_state.levels", "required when source is explicit")

    reference = []
    for i, item in enumerate(_section(raw, "reference", list)):
        name = f"reference[{i}]"
        if not isinstance(item, dict) or set(item) != {"time", "offset"}:
            raise ScenarioValidationError(name, "expected {time, offset}")
        reference.append(ReferenceStep(_number(item["time"], f"{name}.time"),
                                       _vector(item["offset"], 2, f"{name}.offset")))
    times = [s.time for s in reference]
    if any(b <= a for a, b in zip(times, times[1:])) or any(t < 0 for t in times):
        raise ScenarioValidationError("reference", "step times must be non-negative and strictly increasing")

    faults = []
    for i, item in enumerate(_section(raw, "faults", list)):
        name = f"faults[{i}]"
        if not isinstance(item, dict) or set(item) != {"time", "effectiveness"}:
            raise ScenarioValidationError(name, "expected {time, effectiveness}")
        try:
            faults.append(FaultEvent(_number(item["time"], f"{name}.time"),
                                     _vector(item["effectiveness"], 2, f"{name}.effectiveness")))
        except InvalidInputError as exc:
            raise ScenarioValidationError(name, str(exc)) from None
    try:
        faults = check_schedule(faults)
    except InvalidInputError as exc:
        raise ScenarioValidationError("faults", str(exc)) from None

    fdi_raw = _section(raw, "fdi")
    _check_keys(fdi_raw, {"detection_delay"}, "fdi")
    delay = _number(fdi_raw.get("detection_delay", 1.0), "fdi.detection_delay")
    if delay < 0:
        raise ScenarioValidationError("fdi.detection_delay", "must be >= 0")

    ctl_raw = _section(raw, "controller")
    _check_keys(
        ctl_raw, {"mode", "poles", "completion_pole", "policy", "freeze_integrator_on_saturation"},
        "controller",
    )
    mode = ctl_raw.get("mode", "reconfigurable")
    if mode not in MODES:
        raise ScenarioValidationError("controller.mode", f"must be one of {MODES}")
    policy = ctl_raw.get("policy", DEFAULT_POLICY)
    if policy not in POLICIES:
        raise ScenarioValidationError("controller.policy", f"must be one of {POLICIES}")
    poles_raw = ctl_raw.get("poles", list(DESIGN_POLES))
    if not isinstance(poles_raw, list) or not poles_raw:
        raise ScenarioValidationError("PoleSet", "controller.poles must be a non-empty list")
    poles = tuple(_pole(p, f"controller.poles[{i}]") for i, p in enumerate(poles_raw))
    completion = _pole(ctl_raw.get("completion_pole", DEFAULT_COMPLETION_POLE), "controller.completion_pole")
    freeze = ctl_raw.get("freeze_integrator_on_saturation", False)
    if not isinstance(freeze, bool):
        raise ScenarioValidationError("controller.freeze_integrator_on_saturation", "expected true/false")
    controller = ControllerConfig(mode, poles, completion, policy, freeze)
    try:
        controller.pole_set()
    except InvalidInputError as exc:
        raise ScenarioValidationError("PoleSet", str(exc)) from None
    if len(poles) > 6:
        raise ScenarioValidationError("PoleSet", f"{len(poles)} poles for a 6-state design")

    windows = []
    for i, item in enumerate(_section(raw, "windows", list)):
        name = f"windows[{i}]"
        if not isinstance(item, dict) or set(item) != {"label", "start", "end", "output"}:
            raise ScenarioValidationError(name, "expected {label, start, end, output}")
        try:
            w = IaeWindow(str(item["label"]), _number(item["start"], f"{name}.start"),
                          _number(item["end"], f"{name}.end"), item["output"])
        except InvalidInputError as exc:
            raise ScenarioValidationError(name, str(exc)) from None
        if w.start < 0 or w.end > duration:
            raise ScenarioValidationError(name, "window must lie within the scenario duration")
        windows.append(w)
    if "windows" not in raw:
        windows = default_windows(duration, reference, faults)

    return ScenarioConfig(
        duration=duration,
        plant_dt=plant_dt,
        control_period=period,
        plant=plant,
        op_source=op_source,
        op_levels=op_levels,
        op_voltages=op_voltages,
        init_source=init_source,
        init_levels=init_levels,
        reference=tuple(reference),
        faults=faults,
        fdi=FdiConfig(delay),
        controller=controller,
        windows=tuple(windows),
    )


def apply_overrides(raw, overrides):
    """Apply ``dotted.key=value`` strings to a raw scenario mapping.

    Values are parsed as YAML scalars/flow collections. Keys must already
    exist in the (defaulted) schema.
    """
    raw = copy.deepcopy(raw)
    reference = scenario_to_dict(scenario_from_dict({**raw, "duration": raw.get("duration", 1.0)}))
    for item in overrides:
        if "=" not in item:
            raise ScenarioValidationError(item, "override must look like key=value")
        key, text = item.split("=", 1)
        parts = key.strip().split(".")
        known = reference
        for part in parts:
            if not isinstance(known, dict) or part not in known:
                raise ScenarioValidationError(key, "no such scenario field")
            known = known[part]
        try:
            value = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ScenarioParseError(f"override {key}: {exc}") from None
        target = raw
        for part in parts[:-1]:
            target = target.setdefault(part, {})
        target[parts[-1]] = value
    return raw


def read_scenario_dict(path):
    path = Path(path)
    if not path.is_file():
        raise ScenarioNotFoundError(f"scenario file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ScenarioParseError(f"{path}: {exc}") from None
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ScenarioParseError(f"{path}: top level must be a mapping")
    return raw


def load_scenario(path, overrides=()):
    raw = read_scenario_dict(path)
    if overrides:
        raw = apply_overrides(raw, overrides)
    return scenario_from_dict(raw)


def dump_scenario(cfg):
    return yaml.safe_dump(scenario_to_dict(cfg), sort_keys=False, default_flow_style=None)


def write_scenario(cfg, path):
    Path(path).write_text(dump_scenario(cfg))


def paper_scenario_path():
    return Path(__file__).parent / "data" / "paper_scenario.yaml"
