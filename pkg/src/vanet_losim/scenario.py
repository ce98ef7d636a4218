"""Scenario configuration, validation and initial vehicle placement.

Config files are flat JSON objects, one key per parameter. All lengths are
meters, speeds m/s and times seconds. Lane 1 is the outer (fast) lane and
lane 2 the inner (slow) lane.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable

import numpy as np


class ConfigError(ValueError):
    """Malformed or invalid scenario/model configuration."""


@dataclass(frozen=True)
class RoadConfig:
    ring_length: float = 14400.0
    lane_width: float = 3.5
    lane_count: int = 2

    @property
    def lane_center_offsets(self) -> tuple[float, float]:
        # lateral y of the lane center lines, lane 1 then lane 2
        return (0.5 * self.lane_width, -0.5 * self.lane_width)


@dataclass(frozen=True)
class LaneParams:
    v_avg: float
    v_max: float
    tau: float
    lam: float
    d_p: float
    d_f: float
    initial_count: int
    # driver sensitivity of the continuous model; unused by the discrete update
    alpha: float | None = None


@dataclass(frozen=True)
class VehicleDims:
    length: float = 4.8
    width: float = 1.8
    antenna_dx: float = 0.0
    antenna_dy: float = 0.0


@dataclass(frozen=True)
class ScenarioConfig:
    road: RoadConfig
    lanes: tuple[LaneParams, LaneParams]
    dims: VehicleDims = field(default_factory=VehicleDims)
    beta1: float = 0.7
    beta2: float = 0.3
    r_c: float = 500.0
    sim_steps: int = 10800
    warmup_steps: int = 3600
    rng_seed: int = 0
    init_jitter: float = 10.0
    velocity_term_mode: str = "as_printed"
    safety_gap: float | None = None
    lane_changes: bool = True
    collision_guard: bool = True
    lane_change_cooldown: float = 10.0
    tx_id: int = 20
    intensity_tx: str = "all"
    profile_bin_width: float = 25.0
    tracked_ids: tuple[int, ...] = (60, 120, 180)
    write_trace: bool = True

    @property
    def tau(self) -> float:
        return self.lanes[0].tau

    @property
    def n_vehicles(self) -> int:
        return sum(lp.initial_count for lp in self.lanes)

    def to_flat(self) -> dict[str, Any]:
        """Inverse of :func:`config_from_mapping`."""
        flat: dict[str, Any] = {
            "ring_length": self.road.ring_length,
            "lane_width": self.road.lane_width,
        }
        for i, lp in enumerate(self.lanes, start=1):
            flat[f"n_{i}"] = lp.initial_count
            flat[f"v_avg_{i}"] = lp.v_avg
            flat[f"v_max_{i}"] = lp.v_max
            flat[f"tau_{i}"] = lp.tau
            flat[f"lambda_{i}"] = lp.lam
            flat[f"d_p_{i}"] = lp.d_p
            flat[f"d_f_{i}"] = lp.d_f
            flat[f"alpha_{i}"] = lp.alpha
        flat.update(
            vehicle_length=self.dims.length,
            vehicle_width=self.dims.width,
            antenna_dx=self.dims.antenna_dx,
            antenna_dy=self.dims.antenna_dy,
        )
        for key in _SCALAR_KEYS:
            value = getattr(self, key)
            flat[key] = list(value) if isinstance(value, tuple) else value
        return flat

    def digest(self) -> str:
        blob = json.dumps(self.to_flat(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def with_overrides(self, **kwargs: Any) -> "ScenarioConfig":
        flat = self.to_flat()
        for key, value in kwargs.items():
            if key not in flat:
                raise ConfigError(f"unknown config key: {key!r}")
            flat[key] = value
        return config_from_mapping(flat)


_SCALAR_KEYS = (
    "beta1",
    "beta2",
    "r_c",
    "sim_steps",
    "warmup_steps",
    "rng_seed",
    "init_jitter",
    "velocity_term_mode",
    "safety_gap",
    "lane_changes",
    "collision_guard",
    "lane_change_cooldown",
    "tx_id",
    "intensity_tx",
    "profile_bin_width",
    "tracked_ids",
    "write_trace",
)

# Values reproducing the two-lane highway setup; gap-filled where the
# source leaves a parameter open (vehicle dims, headway weights, lane width).
DEFAULTS: dict[str, Any] = {
    "ring_length": 14400.0,
    "lane_width": 3.5,
    "n_1": 160,
    "n_2": 200,
    "v_avg_1": 27.7,
    "v_avg_2": 19.44,
    "v_max_1": 30.5,
    "v_max_2": 22.2,
    "tau_1": 0.5,
    "tau_2": 0.5,
    "lambda_1": 0.3,
    "lambda_2": 0.2,
    "d_p_1": 40.5,
    "d_p_2": 36.0,
    "d_f_1": 40.5,
    "d_f_2": 36.0,
    "alpha_1": None,
    "alpha_2": None,
    "vehicle_length": 4.8,
    "vehicle_width": 1.8,
    "antenna_dx": 0.0,
    "antenna_dy": 0.0,
    "beta1": 0.7,
    "beta2": 0.3,
    "r_c": 500.0,
    "sim_steps": 10800,
    "warmup_steps": 3600,
    "rng_seed": 0,
    "init_jitter": 10.0,
    "velocity_term_mode": "as_printed",
    "safety_gap": None,
    "lane_changes": True,
    "collision_guard": True,
    "lane_change_cooldown": 10.0,
    "tx_id": 20,
    "intensity_tx": "all",
    "profile_bin_width": 25.0,
    "tracked_ids": [60, 120, 180],
    "write_trace": True,
}

VELOCITY_TERM_MODES = ("as_printed", "dimensionless_lambda")
INTENSITY_TX_MODES = ("all", "designated")


def _num(raw: dict[str, Any], key: str, kind=float):
    value = raw[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key}: expected a number, got {value!r}")
    if kind is int:
        if float(value) != int(value):
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
        return int(value)
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(f"{key}: must be finite")
    return value


def _bool(raw: dict[str, Any], key: str) -> bool:
    value = raw[key]
    if not isinstance(value, bool):
        raise ConfigError(f"{key}: expected true/false, got {value!r}")
    return value


def config_from_mapping(mapping: dict[str, Any]) -> ScenarioConfig:
    """Build a validated config from flat keys; missing keys take defaults."""
    unknown = sorted(set(mapping) - set(DEFAULTS))
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    raw = {**DEFAULTS, **mapping}

    lanes = []
    for i in (1, 2):
        alpha = raw[f"alpha_{i}"]
        lanes.append(
            LaneParams(
                v_avg=_num(raw, f"v_avg_{i}"),
                v_max=_num(raw, f"v_max_{i}"),
                tau=_num(raw, f"tau_{i}"),
                lam=_num(raw, f"lambda_{i}"),
                d_p=_num(raw, f"d_p_{i}"),
                d_f=_num(raw, f"d_f_{i}"),
                initial_count=_num(raw, f"n_{i}", int),
                alpha=None if alpha is None else _num(raw, f"alpha_{i}"),
            )
        )

    safety_gap = raw["safety_gap"]
    tracked = raw["tracked_ids"]
    if not isinstance(tracked, (list, tuple)) or not all(
        isinstance(t, int) and not isinstance(t, bool) for t in tracked
    ):
        raise ConfigError("tracked_ids: expected a list of vehicle ids")

    cfg = ScenarioConfig(
        road=RoadConfig(
            ring_length=_num(raw, "ring_length"), lane_width=_num(raw, "lane_width")
        ),
        lanes=(lanes[0], lanes[1]),
        dims=VehicleDims(
            length=_num(raw, "vehicle_length"),
            width=_num(raw, "vehicle_width"),
            antenna_dx=_num(raw, "antenna_dx"),
            antenna_dy=_num(raw, "antenna_dy"),
        ),
        beta1=_num(raw, "beta1"),
        beta2=_num(raw, "beta2"),
        r_c=_num(raw, "r_c"),
        sim_steps=_num(raw, "sim_steps", int),
        warmup_steps=_num(raw, "warmup_steps", int),
        rng_seed=_num(raw, "rng_seed", int),
        init_jitter=_num(raw, "init_jitter"),
        velocity_term_mode=str(raw["velocity_term_mode"]),
        safety_gap=None if safety_gap is None else _num(raw, "safety_gap"),
        lane_changes=_bool(raw, "lane_changes"),
        collision_guard=_bool(raw, "collision_guard"),
        lane_change_cooldown=_num(raw, "lane_change_cooldown"),
        tx_id=_num(raw, "tx_id", int),
        intensity_tx=str(raw["intensity_tx"]),
        profile_bin_width=_num(raw, "profile_bin_width"),
        tracked_ids=tuple(tracked),
        write_trace=_bool(raw, "write_trace"),
    )
    validate(cfg)
    return cfg


def validate(cfg: ScenarioConfig) -> None:
    """Raise ConfigError naming the first violated invariant."""
    road, dims = cfg.road, cfg.dims
    if road.ring_length <= 0:
        raise ConfigError("ring_length must be > 0")
    if road.lane_count != 2:
        raise ConfigError("lane_count must be 2")
    if dims.length <= 0 or dims.width <= 0:
        raise ConfigError("vehicle_length and vehicle_width must be > 0")
    if road.lane_width <= dims.width:
        raise ConfigError("lane_width must exceed vehicle_width")
    if abs(dims.antenna_dx) > dims.length / 2 or abs(dims.antenna_dy) > dims.width / 2:
        raise ConfigError("antenna offset must lie on the vehicle footprint")

    for i, lp in enumerate(cfg.lanes, start=1):
        if not 0 < lp.lam < 1:
            raise ConfigError(f"lambda_{i} must lie in (0, 1)")
        if lp.tau <= 0:
            raise ConfigError(f"tau_{i} must be > 0")
        if lp.d_p <= 0 or lp.d_f <= 0:
            raise ConfigError(f"d_p_{i} and d_f_{i} must be > 0")
        if not lp.v_max >= lp.v_avg > 0:
            raise ConfigError(f"need v_max_{i} >= v_avg_{i} > 0")
        if lp.initial_count < 0:
            raise ConfigError(f"n_{i} must be >= 0")
    outer, inner = cfg.lanes
    if not outer.lam > inner.lam:
        raise ConfigError("lambda_1 (outer lane) must exceed lambda_2 (inner lane)")
    if outer.tau != inner.tau:
        raise ConfigError("tau_1 and tau_2 must be equal (shared time step)")

    if not cfg.beta1 > cfg.beta2 > 0:
        raise ConfigError("headway weights must satisfy beta1 > beta2 > 0")
    if abs(cfg.beta1 + cfg.beta2 - 1.0) > 1e-12:
        raise ConfigError("headway weights must satisfy beta1 + beta2 == 1")
    if cfg.r_c <= 0:
        raise ConfigError("r_c must be > 0")
    if 2 * cfg.r_c >= road.ring_length:
        raise ConfigError("r_c must be below half the ring length")
    if cfg.sim_steps <= 0 or cfg.warmup_steps < 0:
        raise ConfigError("sim_steps must be > 0 and warmup_steps >= 0")
    if not cfg.warmup_steps < cfg.sim_steps:
        raise ConfigError("warmup_steps must be < sim_steps")
    if cfg.init_jitter < 0:
        raise ConfigError("init_jitter must be >= 0")
    if cfg.velocity_term_mode not in VELOCITY_TERM_MODES:
        raise ConfigError(f"velocity_term_mode must be one of {VELOCITY_TERM_MODES}")
    if cfg.safety_gap is not None and cfg.safety_gap <= 0:
        raise ConfigError("safety_gap must be > 0 seconds when set")
    if cfg.lane_change_cooldown < 0:
        raise ConfigError("lane_change_cooldown must be >= 0")
    if cfg.intensity_tx not in INTENSITY_TX_MODES:
        raise ConfigError(f"intensity_tx must be one of {INTENSITY_TX_MODES}")
    if cfg.profile_bin_width <= 0:
        raise ConfigError("profile_bin_width must be > 0")
    n = cfg.n_vehicles
    if not 1 <= cfg.tx_id <= max(n, 1):
        raise ConfigError(f"tx_id must be a vehicle id in 1..{n}")


def parse_override(item: str) -> tuple[str, Any]:
    """``key=value`` with the value read as JSON, falling back to a string."""
    key, sep, text = item.partition("=")
    key = key.strip()
    if not sep or not key:
        raise ConfigError(f"override must look like key=value: {item!r}")
    try:
        value = json.loads(text)
    except json.JSONDecodeError:
        value = text
    return key, value


def load_config(
    path: str | Path | None = None, overrides: Iterable[str] = ()
) -> ScenarioConfig:
    """Read a flat JSON config file, apply ``key=value`` overrides, validate."""
    mapping: dict[str, Any] = {}
    if path is not None:
        try:
            mapping = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: malformed config ({exc})") from exc
        if not isinstance(mapping, dict):
            raise ConfigError(f"{path}: top level must be a key/value object")
    for item in overrides:
        key, value = parse_override(item)
        mapping[key] = value
    return config_from_mapping(mapping)


@dataclass
class SimulationState:
    """Two time levels of every vehicle on the ring.

    ``x_prev`` holds positions at t, ``x_curr`` at t + tau. Vehicle ids are
    1-based; array index ``i`` holds vehicle ``i + 1``.
    """

    lane: np.ndarray
    x_prev: np.ndarray
    x_curr: np.ndarray
    last_change: np.ndarray
    step: int = 0

    @property
    def n(self) -> int:
        return len(self.lane)

    @property
    def ids(self) -> np.ndarray:
        return np.arange(1, self.n + 1)

    def copy(self) -> "SimulationState":
        return replace(
            self,
            lane=self.lane.copy(),
            x_prev=self.x_prev.copy(),
            x_curr=self.x_curr.copy(),
            last_change=self.last_change.copy(),
        )


def flow_rates(cfg: ScenarioConfig) -> dict[str, float]:
    """Initial flow per lane (veh/h) next to the nominal capacity targets."""
    out = {}
    for i, lp in enumerate(cfg.lanes, start=1):
        out[f"lane{i}_initial_flow_veh_per_h"] = (
            3600.0 * lp.initial_count * lp.v_avg / cfg.road.ring_length
        )
    out["lane1_nominal_flow_veh_per_h"] = 1300.0
    out["lane2_nominal_flow_veh_per_h"] = 1600.0
    return out


def init_scenario(cfg: ScenarioConfig) -> SimulationState:
    """Uniform spacing per lane, every vehicle at its lane's average speed.

    A seeded uniform jitter of at most ``init_jitter`` meters is added to the
    initial positions; with zero jitter the uniform layout is an exact fixed
    point and the traffic never develops.
    """
    L = cfg.road.ring_length
    rng = np.random.default_rng(cfg.rng_seed)
    lanes, xs, vs = [], [], []
    for lane_no, lp in enumerate(cfg.lanes, start=1):
        n = lp.initial_count
        if n == 0:
            continue
        if n * cfg.dims.length >= L:
            raise ConfigError(f"ring too crowded: {n} vehicles in lane {lane_no}")
        spacing = L / n
        if 2 * cfg.init_jitter >= spacing - cfg.dims.length:
            raise ConfigError(f"init_jitter too large for lane {lane_no} spacing")
        lanes.append(np.full(n, lane_no, dtype=np.int8))
        xs.append(np.arange(n) * spacing)
        vs.append(np.full(n, lp.v_avg))
    lane = np.concatenate(lanes)
    x0 = np.concatenate(xs)
    v0 = np.concatenate(vs)
    if cfg.init_jitter > 0:
        x0 = x0 + rng.uniform(-cfg.init_jitter, cfg.init_jitter, size=len(x0))
    x_prev = np.mod(x0, L)
    x_curr = np.mod(x0 + cfg.tau * v0, L)
    return SimulationState(
        lane=lane,
        x_prev=x_prev,
        x_curr=x_curr,
        last_change=np.full(len(lane), -np.inf),
        step=0,
    )
