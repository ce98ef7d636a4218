"""Warm-up plus measured-phase driver for one scenario run."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .geometry import LinkState, classify_tick
from .mobility import LaneChangeEvent, apply_lane_changes, displacement, headways, step_positions
from .scenario import ScenarioConfig, SimulationState, init_scenario
from .statistics import DistanceHistogram, StateTracker

log = logging.getLogger(__name__)


@dataclass
class SimulationResult:
    cfg: ScenarioConfig
    tracker: StateTracker
    histogram: DistanceHistogram
    sample_ticks: np.ndarray  # simulation second of each sample
    tx_counts: np.ndarray  # (samples, 3): in range, LOS, OLOS seen by tx_id
    headways: np.ndarray  # (samples, n) same-lane headways, m
    tracked_lanes: np.ndarray  # (samples, len(tracked_ids)) lane of each tracked vehicle
    lane_changes: list[LaneChangeEvent] = field(default_factory=list)
    guard_activations: int = 0
    final_state: SimulationState | None = None

    @property
    def steps_per_second(self) -> int:
        return steps_per_second(self.cfg)


def steps_per_second(cfg: ScenarioConfig) -> int:
    k = 1.0 / cfg.tau
    if abs(k - round(k)) > 1e-9:
        raise ValueError("tau must divide one second")
    return int(round(k))


def advance(state: SimulationState, cfg: ScenarioConfig, events: list, count_guard=None):
    """One tau-step: positions, then lane changes."""
    state, diag = step_positions(state, cfg, return_diagnostics=True)
    if count_guard is not None:
        count_guard.append(int(diag.guarded.sum()))
    state, ev = apply_lane_changes(state, cfg)
    events.extend(ev)
    return state


def simulate(cfg: ScenarioConfig, recorder=None) -> SimulationResult:
    """Run ``sim_steps`` seconds, sampling every second after warm-up.

    ``recorder``, when given, receives ``sample(tick, state, speed, headway,
    tx_codes)`` once per measured second and ``lane_changes(events)`` after
    every measured tau-step that produced events.
    """
    k = steps_per_second(cfg)
    L = cfg.road.ring_length
    state = init_scenario(cfg)
    n = state.n
    events: list[LaneChangeEvent] = []
    guard: list[int] = []

    for _ in range(cfg.warmup_steps * k):
        state = advance(state, cfg, events, guard)
    log.info("warm-up done: %d lane changes", len(events))

    designated = cfg.tx_id - 1
    if cfg.intensity_tx == "all":
        tx = np.arange(n)
    else:
        tx = np.array([designated])
    row = int(np.flatnonzero(tx == designated)[0])
    keep = tx == designated
    tracker = StateTracker(tx, n, keep_intervals=keep)
    hist = DistanceHistogram(cfg.r_c, cfg.profile_bin_width)

    n_samples = cfg.sim_steps - cfg.warmup_steps
    ticks = np.arange(cfg.warmup_steps, cfg.sim_steps)
    counts = np.zeros((n_samples, 3), dtype=np.int64)
    hw_log = np.zeros((n_samples, n))
    tracked = np.array([i - 1 for i in cfg.tracked_ids if 1 <= i <= n], dtype=int)
    lane_log = np.zeros((n_samples, len(tracked)), dtype=np.int8)
    measured: list[LaneChangeEvent] = []

    for j, tick in enumerate(ticks):
        links = classify_tick(state, cfg, tx)
        hist.add(links.distance, links.code)
        mine = links.row == row
        tx_codes = np.full(n, LinkState.OOR, dtype=np.int8)
        tx_codes[links.rx[mine]] = links.code[mine]
        n_los = int((tx_codes == LinkState.LOS).sum())
        n_olos = int((tx_codes == LinkState.OLOS).sum())
        counts[j] = (n_los + n_olos, n_los, n_olos)
        hw = headways(state, cfg)
        hw_log[j] = hw
        lane_log[j] = state.lane[tracked]
        if recorder is not None:
            speed = displacement(state, L) / cfg.tau
            recorder.sample(int(tick), state, speed, hw, tx_codes)

        x_before = state.x_curr
        for _ in range(k):
            fresh: list[LaneChangeEvent] = []
            state = advance(state, cfg, fresh, guard)
            if fresh:
                measured.extend(fresh)
                if recorder is not None:
                    recorder.lane_changes(fresh)
        moved = np.mod(state.x_curr - x_before, L)
        tracker.update_pairs(links.row, links.rx, links.code, moved)

    return SimulationResult(
        cfg=cfg,
        tracker=tracker,
        histogram=hist,
        sample_ticks=ticks,
        tx_counts=counts,
        headways=hw_log,
        tracked_lanes=lane_log,
        lane_changes=measured,
        guard_activations=int(sum(guard)),
        final_state=state,
    )
