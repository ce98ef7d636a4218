"""Log-distance path loss with Gaussian large-scale fading and the resulting
packet reception probability (PRP) at a carrier-sense threshold.

Received power at distance ``d`` is Gaussian with mean
``mu(d) = pw_tx - PL(d)`` and standard deviation ``sigma``, so

    P{Pw_RX(d) > alpha} = Q((alpha - mu) / sigma) = 1 - Q((mu - alpha) / sigma).

The joint LOS/OLOS PRP mixes the two state-specific probabilities with the
simulated LOS/OLOS probabilities at that distance.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable

import numpy as np
from scipy.special import erfc

from .scenario import ConfigError
from .statistics import DistanceProfile


@dataclass(frozen=True)
class PathLossModel:
    """Single- or dual-slope log-distance model; ``db=None`` means single slope."""

    name: str
    pl0: float  # dB at d0
    n1: float
    n2: float | None = None
    d0: float = 10.0
    db: float | None = None
    sigma: float = 0.0  # dB

    def __post_init__(self):
        if not self.d0 > 0:
            raise ConfigError(f"{self.name}: d0 must be > 0")
        if self.db is not None:
            if not self.db > self.d0:
                raise ConfigError(f"{self.name}: db must exceed d0")
            if self.n2 is None:
                raise ConfigError(f"{self.name}: dual-slope model needs n2")
        if not self.sigma >= 0:
            raise ConfigError(f"{self.name}: sigma must be >= 0")
        for key in ("pl0", "n1", "sigma"):
            if not math.isfinite(getattr(self, key)):
                raise ConfigError(f"{self.name}: {key} must be finite")


@dataclass(frozen=True)
class LinkBudget:
    pw_tx: float = 20.0  # dBm
    csth: float = -91.0  # dBm, carrier-sense threshold alpha


@dataclass(frozen=True)
class JointModel:
    """LOS/OLOS mixture weighted by the simulated distance profile."""

    name: str
    los: str
    olos: str


def path_loss_mean(d, m: PathLossModel):
    """Mean path loss in dB; the fading term is carried by ``m.sigma``."""
    d = np.asarray(d, dtype=float)
    if np.any(d < m.d0):
        raise ValueError(f"{m.name}: distance below reference d0={m.d0} m")
    near = m.pl0 + 10.0 * m.n1 * np.log10(d / m.d0)
    if m.db is None:
        return near
    far = (
        m.pl0
        + 10.0 * m.n1 * math.log10(m.db / m.d0)
        + 10.0 * m.n2 * np.log10(d / m.db)
    )
    return np.where(d <= m.db, near, far)


def rx_power_mean(d, m: PathLossModel, budget: LinkBudget = LinkBudget()):
    return budget.pw_tx - path_loss_mean(d, m)


def q_function(x):
    """Gaussian tail probability Q(x) = P{Z > x}."""
    return 0.5 * erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))


def prob_rx_above(d, m: PathLossModel, budget: LinkBudget = LinkBudget()):
    """P{Pw_RX(d) > alpha}; with sigma == 0 this is the step 1{mu(d) > alpha}."""
    mu = rx_power_mean(d, m, budget)
    if m.sigma == 0:
        return np.where(mu > budget.csth, 1.0, 0.0)
    return q_function((budget.csth - mu) / m.sigma)


def joint_prp(
    d,
    los_model: PathLossModel,
    olos_model: PathLossModel,
    profile: DistanceProfile,
    budget: LinkBudget = LinkBudget(),
):
    """Pr_LOS(d) P_LOS{Pw > alpha} + Pr_OLOS(d) P_OLOS{Pw > alpha}.

    Raises KeyError when the profile has no samples in the bin covering d.
    """
    pr_los, pr_olos = profile.lookup(d)
    return pr_los * prob_rx_above(d, los_model, budget) + pr_olos * prob_rx_above(
        d, olos_model, budget
    )


def sample_rx_power(d, m: PathLossModel, budget: LinkBudget, rng: np.random.Generator):
    """Received power with i.i.d. zero-mean Gaussian fading per sample, dBm."""
    mu = rx_power_mean(d, m, budget)
    return mu + m.sigma * rng.standard_normal(np.shape(mu))


def monte_carlo_prp(d, m: PathLossModel, budget: LinkBudget, n: int, seed: int = 0):
    """Fraction of ``n`` fading draws per distance above the threshold."""
    rng = np.random.default_rng(seed)
    d = np.atleast_1d(np.asarray(d, dtype=float))
    draws = sample_rx_power(np.broadcast_to(d, (n, d.size)), m, budget, rng)
    return (draws > budget.csth).mean(axis=0)


@dataclass
class CurveTable:
    """Mean received power and PRP per model over a distance grid."""

    d: np.ndarray
    names: list[str]
    mean_rx_dbm: dict[str, np.ndarray]  # NaN for mixture entries
    prp: dict[str, np.ndarray]

    def rows(self):
        for name in self.names:
            for k, d in enumerate(self.d):
                yield float(d), name, float(self.mean_rx_dbm[name][k]), float(self.prp[name][k])


def curve_sweep(
    models: Iterable[PathLossModel],
    profile: DistanceProfile | None,
    budget: LinkBudget,
    d_grid,
    joints: Iterable[JointModel] = (),
) -> CurveTable:
    """Received power and PRP for every model, plus each LOS/OLOS mixture."""
    d = np.asarray(d_grid, dtype=float)
    by_name = {m.name: m for m in models}
    names, mean, prp = [], {}, {}
    for name, m in by_name.items():
        names.append(name)
        mean[name] = np.asarray(rx_power_mean(d, m, budget), dtype=float)
        prp[name] = np.asarray(prob_rx_above(d, m, budget), dtype=float)
    for j in joints:
        if profile is None:
            raise ValueError(f"{j.name}: a distance profile is needed for the mixture")
        missing = {j.los, j.olos} - by_name.keys()
        if missing:
            raise ConfigError(f"{j.name}: unknown component model(s) {sorted(missing)}")
        names.append(j.name)
        mean[j.name] = np.full(d.shape, np.nan)
        prp[j.name] = np.asarray(
            joint_prp(d, by_name[j.los], by_name[j.olos], profile, budget), dtype=float
        )
    return CurveTable(d, names, mean, prp)


def max_spread(table: CurveTable, d_max: float, names=None) -> float:
    """Largest pairwise PRP difference between models over d <= d_max."""
    sel = table.d <= d_max
    names = table.names if names is None else names
    stack = np.vstack([table.prp[n][sel] for n in names])
    return float((stack.max(axis=0) - stack.min(axis=0)).max())


_MODEL_KEYS = {"name", "pl0", "n1", "n2", "d0", "db", "sigma", "source"}


@dataclass(frozen=True)
class ChannelConfig:
    budget: LinkBudget
    models: tuple[PathLossModel, ...]
    joints: tuple[JointModel, ...] = ()
    d_min: float = 10.0
    d_max: float = 500.0
    d_step: float = 1.0
    spread_d_max: float = 100.0
    spread_threshold: float | None = None

    def grid(self) -> np.ndarray:
        n = int(round((self.d_max - self.d_min) / self.d_step))
        return self.d_min + self.d_step * np.arange(n + 1)


def _model_from_mapping(block: dict[str, Any]) -> PathLossModel:
    if not isinstance(block, dict):
        raise ConfigError("each model block must be an object")
    if "name" not in block:
        raise ConfigError("model block without the mandatory 'name' key")
    unknown = set(block) - _MODEL_KEYS
    if unknown:
        raise ConfigError(f"{block['name']}: unknown model key(s) {sorted(unknown)}")
    for key in ("pl0", "n1", "sigma"):
        if block.get(key) is None:
            raise ConfigError(f"{block['name']}: {key!r} missing or left as a placeholder")
    if block.get("db") is not None and block.get("n2") is None:
        raise ConfigError(f"{block['name']}: 'n2' missing or left as a placeholder")
    for key in ("pl0", "n1", "n2", "d0", "db", "sigma"):
        v = block.get(key)
        if v is not None and (isinstance(v, bool) or not isinstance(v, (int, float))):
            raise ConfigError(f"{block['name']}: {key} must be a number, got {v!r}")
    kw = {k: block[k] for k in _MODEL_KEYS - {"source"} if k in block}
    return PathLossModel(**kw)


def channel_config_from_mapping(raw: dict[str, Any]) -> ChannelConfig:
    known = {
        "pw_tx", "csth", "models", "joint", "d_min", "d_max", "d_step",
        "spread_d_max", "spread_threshold", "comment",
    }
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown channel config key(s): {sorted(unknown)}")
    models = tuple(_model_from_mapping(b) for b in raw.get("models", []))
    names = [m.name for m in models]
    if len(set(names)) != len(names):
        raise ConfigError("model names must be unique")
    joints = []
    for b in raw.get("joint", []):
        try:
            joints.append(JointModel(str(b["name"]), str(b["los"]), str(b["olos"])))
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"joint block needs name, los and olos: {b!r}") from exc
        missing = {joints[-1].los, joints[-1].olos} - set(names)
        if missing:
            raise ConfigError(f"{joints[-1].name}: unknown component model(s) {sorted(missing)}")
    cfg = ChannelConfig(
        budget=LinkBudget(float(raw.get("pw_tx", 20.0)), float(raw.get("csth", -91.0))),
        models=models,
        joints=tuple(joints),
        d_min=float(raw.get("d_min", 10.0)),
        d_max=float(raw.get("d_max", 500.0)),
        d_step=float(raw.get("d_step", 1.0)),
        spread_d_max=float(raw.get("spread_d_max", 100.0)),
        spread_threshold=raw.get("spread_threshold"),
    )
    if not (cfg.d_step > 0 and cfg.d_min < cfg.d_max):
        raise ConfigError("distance grid needs d_step > 0 and d_min < d_max")
    for m in models:
        if cfg.d_min < m.d0:
            raise ConfigError(f"{m.name}: grid starts below d0={m.d0} m")
    return cfg


def load_channel_config(path) -> ChannelConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return channel_config_from_mapping(raw)
