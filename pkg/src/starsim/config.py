"""Experiment configuration files.

Configs are JSON objects. Physical quantities carry their unit in the key
(``_m``, ``_hz``, ``_dbm``, ``_w``, ``_db``, ``_linear``, ``_rad``); where
two units are accepted exactly one may be given. Unknown keys are errors.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, List, Optional, Tuple

from .channel import Side
from .core import OperatingProtocol, PhaseShiftModel, ProtocolKind, SurfaceConfig
from .errors import ParseError, ValidationError
from .optim import Objective, PenaltyConfig
from .scenarios import NetworkScenario, SolverKind, SweepAxis, UserSpec, dbm_to_w
from .channel import wavelength

__all__ = ["ExperimentConfig", "UserConfig", "SweepConfig", "parse_config", "loads_config",
           "dumps_config", "default_config", "SWEEP_AXES"]

# sweep axis key -> (internal axis, converter from file units)
SWEEP_AXES = {
    "elements": (SweepAxis.ELEMENTS, float),
    "budget_dbm": (SweepAxis.BUDGET, dbm_to_w),
    "budget_w": (SweepAxis.BUDGET, float),
    "distance_m": (SweepAxis.DISTANCE, float),
    "rician_k_linear": (SweepAxis.RICIAN_K, float),
    "rician_k_db": (SweepAxis.RICIAN_K, lambda v: 10.0 ** (v / 10.0)),
}


@dataclass(frozen=True)
class UserConfig:
    position_m: Tuple[float, float, float]
    side: str
    sinr_target_db: Optional[float] = None
    weight: float = 1.0


@dataclass(frozen=True)
class SweepConfig:
    axis: str
    values: Tuple[float, ...]
    seed_policy: str = "offset"


@dataclass(frozen=True)
class PenaltyOverrides:
    rho0: float = PenaltyConfig.rho0
    growth: float = PenaltyConfig.growth
    violation_tol_rad: float = PenaltyConfig.violation_tol
    max_outer: int = PenaltyConfig.max_outer
    inner_tol: float = PenaltyConfig.inner_tol
    max_inner: int = PenaltyConfig.max_inner


def _default_users():
    r = 30.0 / math.sqrt(2.0)
    return (UserConfig((r, r, 0.0), "transmission", 10.0),
            UserConfig((-r, r, 0.0), "reflection", 10.0))


@dataclass(frozen=True)
class ExperimentConfig:
    """A validated experiment; see :func:`default_config` for the defaults."""

    elements: int = 16
    columns: int = 4
    element_spacing_m: Optional[float] = None
    carrier_frequency_hz: float = 3.5e9
    bs_position_m: Tuple[float, float, float] = (-10.0, 0.0, 0.0)
    bs_antennas: int = 4
    users: Tuple[UserConfig, ...] = field(default_factory=_default_users)
    noise_power_dbm: Optional[float] = -80.0
    noise_power_w: Optional[float] = None
    power_budget_dbm: Optional[float] = 30.0
    power_budget_w: Optional[float] = None
    rician_k_linear: Optional[float] = 3.0
    rician_k_db: Optional[float] = None
    pathloss_exponent_bs: float = 2.0
    pathloss_exponent_user: float = 2.0
    reference_gain_db: float = -30.0
    direct_link: bool = False
    near_field: bool = False
    trials: int = 20
    seed: int = 0
    solver: str = "penalty"
    objective: str = "sum_se"
    model: str = "coupled"
    protocol: str = "energy_splitting"
    penalty: PenaltyOverrides = field(default_factory=PenaltyOverrides)
    sweep: Optional[SweepConfig] = None
    out_dir: str = "results"

    # -- derived quantities -------------------------------------------------
    @property
    def noise_power(self) -> float:
        return self.noise_power_w if self.noise_power_w is not None else dbm_to_w(self.noise_power_dbm)

    @property
    def power_budget(self) -> float:
        return self.power_budget_w if self.power_budget_w is not None else dbm_to_w(self.power_budget_dbm)

    @property
    def rician_k(self) -> float:
        if self.rician_k_db is not None:
            return 10.0 ** (self.rician_k_db / 10.0)
        return self.rician_k_linear

    def penalty_config(self) -> PenaltyConfig:
        p = self.penalty
        return PenaltyConfig(p.rho0, p.growth, p.violation_tol_rad, p.max_outer,
                             p.inner_tol, p.max_inner)

    def scenario(self) -> NetworkScenario:
        lam = wavelength(self.carrier_frequency_hz)
        spacing = self.element_spacing_m if self.element_spacing_m is not None else lam / 2
        surface = SurfaceConfig.planar(self.elements, self.columns, spacing,
                                       model=PhaseShiftModel(self.model),
                                       protocol=OperatingProtocol(ProtocolKind(self.protocol)))
        users = tuple(
            UserSpec(u.position_m, Side(u.side),
                     None if u.sinr_target_db is None else 10.0 ** (u.sinr_target_db / 10.0),
                     u.weight)
            for u in self.users)
        return NetworkScenario(
            surface=surface, bs_position=self.bs_position_m, n_bs_antennas=self.bs_antennas,
            users=users, noise_power=self.noise_power, power_budget=self.power_budget,
            trials=self.trials, seed=self.seed, carrier_frequency=self.carrier_frequency_hz,
            rician_k=self.rician_k, pathloss_exponent_bs=self.pathloss_exponent_bs,
            pathloss_exponent_user=self.pathloss_exponent_user,
            reference_gain=10.0 ** (self.reference_gain_db / 10.0),
            direct_link=self.direct_link, near_field=self.near_field)

    def sweep_values(self) -> Tuple[SweepAxis, List[float]]:
        if self.sweep is None:
            raise ValidationError("sweep", "config has no sweep section")
        axis, conv = SWEEP_AXES[self.sweep.axis]
        return axis, [conv(v) for v in self.sweep.values]


def default_config() -> ExperimentConfig:
    return ExperimentConfig()


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_PAIRS = (("noise_power_dbm", "noise_power_w", "noise_power"),
          ("power_budget_dbm", "power_budget_w", "power_budget"),
          ("rician_k_linear", "rician_k_db", "rician_k"))

_ENUMS = {
    "solver": [k.value for k in SolverKind],
    "objective": [k.value for k in Objective],
    "model": [k.value for k in PhaseShiftModel],
    "protocol": [k.value for k in ProtocolKind],
}


def _number(name, v, integer=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ValidationError(name, f"expected a number, got {v!r}")
    if not math.isfinite(v):
        raise ValidationError(name, f"must be finite, got {v!r}")
    if integer:
        if int(v) != v:
            raise ValidationError(name, f"expected an integer, got {v!r}")
        return int(v)
    return float(v)


def _vector(name, v):
    if not isinstance(v, list) or len(v) != 3:
        raise ValidationError(name, f"expected [x, y, z] in metres, got {v!r}")
    return tuple(_number(name, x) for x in v)


def _check_keys(section: str, obj: Dict[str, Any], allowed):
    if not isinstance(obj, dict):
        raise ValidationError(section or "config", f"expected an object, got {type(obj).__name__}")
    for key in obj:
        if key not in allowed:
            where = f"{section}.{key}" if section else key
            raise ParseError(f"unknown key {where!r}", field=where)


def _user(i, obj) -> UserConfig:
    name = f"users[{i}]"
    _check_keys(name, obj, {f.name for f in fields(UserConfig)})
    for req in ("position_m", "side"):
        if req not in obj:
            raise ValidationError(f"{name}.{req}", "required")
    side = obj["side"]
    if side not in ("transmission", "reflection"):
        raise ValidationError(f"{name}.side", f"must be 'transmission' or 'reflection', got {side!r}")
    target = obj.get("sinr_target_db")
    weight = _number(f"{name}.weight", obj.get("weight", 1.0))
    if weight <= 0:
        raise ValidationError(f"{name}.weight", "must be positive")
    return UserConfig(_vector(f"{name}.position_m", obj["position_m"]), side,
                      None if target is None else _number(f"{name}.sinr_target_db", target),
                      weight)


def _penalty(obj) -> PenaltyOverrides:
    _check_keys("penalty", obj, {f.name for f in fields(PenaltyOverrides)})
    out = {}
    for f in fields(PenaltyOverrides):
        if f.name in obj:
            out[f.name] = _number(f"penalty.{f.name}", obj[f.name],
                                  integer=f.name in ("max_outer", "max_inner"))
    p = PenaltyOverrides(**out)
    if p.rho0 <= 0:
        raise ValidationError("penalty.rho0", "must be positive")
    if p.growth <= 1:
        raise ValidationError("penalty.growth", "must exceed 1")
    if p.violation_tol_rad <= 0 or p.inner_tol <= 0:
        raise ValidationError("penalty", "tolerances must be positive")
    if p.max_outer < 1 or p.max_inner < 1:
        raise ValidationError("penalty", "iteration limits must be positive")
    return p


def _sweep(obj) -> SweepConfig:
    _check_keys("sweep", obj, {"axis", "values", "seed_policy"})
    axis = obj.get("axis")
    if axis not in SWEEP_AXES:
        raise ValidationError("sweep.axis", f"must be one of {sorted(SWEEP_AXES)}, got {axis!r}")
    values = obj.get("values")
    if not isinstance(values, list) or not values:
        raise ValidationError("sweep.values", "must be a non-empty list")
    vals = tuple(_number("sweep.values", v) for v in values)
    diffs = [b - a for a, b in zip(vals, vals[1:])]
    if diffs and not (all(d > 0 for d in diffs) or all(d < 0 for d in diffs)):
        raise ValidationError("sweep.values", "must be strictly monotone")
    policy = obj.get("seed_policy", "offset")
    if policy not in ("offset", "common"):
        raise ValidationError("sweep.seed_policy", f"must be 'offset' or 'common', got {policy!r}")
    return SweepConfig(axis, vals, policy)


def _from_dict(raw: Dict[str, Any]) -> ExperimentConfig:
    top = {f.name for f in fields(ExperimentConfig)}
    _check_keys("", raw, top)
    kw: Dict[str, Any] = {}
    for a, b, name in _PAIRS:
        if a in raw and b in raw:
            raise ValidationError(name, f"give exactly one of {a!r} and {b!r}")
        if a in raw or b in raw:
            kw[a] = None
            kw[b] = None
    for key, value in raw.items():
        if key == "users":
            if not isinstance(value, list) or not value:
                raise ValidationError("users", "must be a non-empty list")
            kw[key] = tuple(_user(i, u) for i, u in enumerate(value))
        elif key == "penalty":
            kw[key] = _penalty(value)
        elif key == "sweep":
            kw[key] = None if value is None else _sweep(value)
        elif key in ("bs_position_m",):
            kw[key] = _vector(key, value)
        elif key in _ENUMS:
            if value not in _ENUMS[key]:
                raise ValidationError(key, f"must be one of {_ENUMS[key]}, got {value!r}")
            kw[key] = value
        elif key in ("direct_link", "near_field"):
            if not isinstance(value, bool):
                raise ValidationError(key, f"expected true or false, got {value!r}")
            kw[key] = value
        elif key == "out_dir":
            if not isinstance(value, str) or not value:
                raise ValidationError(key, "must be a non-empty path")
            kw[key] = value
        elif key == "element_spacing_m" and value is None:
            kw[key] = None
        else:
            kw[key] = _number(key, value, integer=key in ("elements", "columns", "bs_antennas",
                                                           "trials", "seed"))
    cfg = ExperimentConfig(**kw)
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig):
    if cfg.noise_power_w is not None and not cfg.noise_power_w > 0:
        raise ValidationError("noise_power", f"must be positive, got {cfg.noise_power_w} W")
    if cfg.power_budget_w is not None and cfg.power_budget_w < 0:
        raise ValidationError("power_budget", f"must be nonnegative, got {cfg.power_budget_w} W")
    if cfg.rician_k_linear is not None and cfg.rician_k_linear < 0:
        raise ValidationError("rician_k", "must be nonnegative")
    for name in ("elements", "columns", "bs_antennas", "trials"):
        if getattr(cfg, name) < 1:
            raise ValidationError(name, "must be at least 1")
    if cfg.seed < 0:
        raise ValidationError("seed", "must be nonnegative")
    if cfg.carrier_frequency_hz <= 0:
        raise ValidationError("carrier_frequency_hz", "must be positive")
    if cfg.element_spacing_m is not None and cfg.element_spacing_m <= 0:
        raise ValidationError("element_spacing_m", "must be positive")
    if cfg.objective == "transmit_power" and any(u.sinr_target_db is None for u in cfg.users):
        raise ValidationError("users", "transmit_power needs sinr_target_db for every user")
    if cfg.solver == "element_wise" and cfg.objective != "transmit_power":
        raise ValidationError("solver", "element_wise only supports the transmit_power objective")
    try:
        cfg.scenario()
    except ValueError as exc:
        raise ValidationError("scenario", str(exc)) from exc


def loads_config(text: str) -> ExperimentConfig:
    """Parse a JSON config string."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno) from exc
    return _from_dict(raw)


def parse_config(path) -> ExperimentConfig:
    """Read and validate a config file; missing keys take their defaults.

    Raises
    ------
    ParseError
        Malformed JSON (with line number) or an unknown key (with field).
    ValidationError
        A value violates an invariant; the message names the field.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from exc
    return loads_config(text)


def to_dict(cfg: ExperimentConfig) -> Dict[str, Any]:
    """Canonical JSON-ready form; unset alternative-unit keys are omitted."""
    out = asdict(cfg)
    for a, b, _ in _PAIRS:
        for key in (a, b):
            if out[key] is None:
                del out[key]
    out["bs_position_m"] = list(out["bs_position_m"])
    out["users"] = [
        {k: (list(v) if k == "position_m" else v) for k, v in u.items()} for u in out["users"]]
    if out["sweep"] is not None:
        out["sweep"]["values"] = list(out["sweep"]["values"])
    return out


def dumps_config(cfg: ExperimentConfig) -> str:
    return json.dumps(to_dict(cfg), indent=2) + "\n"
