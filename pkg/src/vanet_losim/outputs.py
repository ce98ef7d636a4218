"""CSV and manifest writers for a run directory.

Every table has a header row; column names carry SI units. Floats are
written with a fixed format so identical runs give identical bytes.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .geometry import LinkState
from .mobility import LaneChangeEvent
from .scenario import SimulationState
from .statistics import transition_intensities

FLOAT = "%.10g"
STATE_NAMES = np.array([s.name for s in LinkState])

TRACE = "trace.csv"
LINK_STATES = "link_states.csv"
LANE_CHANGES = "lane_changes.csv"
HEADWAYS = "headway_samples.csv"
INTENSITIES = "intensities.csv"
INTERVALS = "intervals.csv"
PROFILE = "distance_profile.csv"
STATE_COUNTS = "state_counts.csv"
CHANNEL = "channel_curves.csv"
MANIFEST = "manifest.json"


def fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return FLOAT % float(v)


def write_table(path: Path, header: list[str], rows) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_table(path: Path) -> tuple[list[str], list[list[str]]]:
    """Header and raw string rows of a CSV written by this module."""
    if not Path(path).exists():
        raise FileNotFoundError(f"missing input file: {path}")
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        return header, list(r)


def read_columns(path: Path) -> dict[str, np.ndarray]:
    """Columns of a CSV as arrays; numeric where every entry parses."""
    header, rows = read_table(path)
    cols = {}
    for j, name in enumerate(header):
        raw = [row[j] for row in rows]
        try:
            cols[name] = np.array([float(v) for v in raw])
        except ValueError:
            cols[name] = np.array(raw, dtype=object)
    return cols


class RunRecorder:
    """Streams the per-tick trace, link log and lane changes to disk."""

    def __init__(self, out_dir: Path, tx_id: int, write_trace: bool = True):
        self.out = Path(out_dir)
        self.tx_id = tx_id
        self._trace = open(self.out / TRACE, "w") if write_trace else None
        if self._trace:
            self._trace.write("tick_s,vehicle_id,lane,x_m,speed_mps,headway_m\n")
        self._links = open(self.out / LINK_STATES, "w")
        self._links.write("tick_s,tx_id,rx_id,state\n")
        self._lc = open(self.out / LANE_CHANGES, "w")
        self._lc.write("step,time_s,vehicle_id,from_lane,to_lane,x_m\n")
        self._tau = None

    def set_tau(self, tau: float):
        self._tau = tau

    def sample(self, tick: int, state: SimulationState, speed, headway, tx_codes):
        n = state.n
        ids = np.arange(1, n + 1)
        if self._trace:
            block = np.column_stack(
                [np.full(n, tick), ids, state.lane, state.x_curr, speed, headway]
            )
            np.savetxt(self._trace, block, fmt=["%d", "%d", "%d", FLOAT, FLOAT, FLOAT], delimiter=",")
        keep = ids != self.tx_id
        lines = [
            f"{tick},{self.tx_id},{r},{s}"
            for r, s in zip(ids[keep], STATE_NAMES[tx_codes[keep]])
        ]
        self._links.write("\n".join(lines) + "\n")

    def lane_changes(self, events: list[LaneChangeEvent]):
        for e in events:
            t = e.step * self._tau if self._tau else float("nan")
            self._lc.write(
                f"{e.step},{fmt(t)},{e.vehicle_id},{e.from_lane},{e.to_lane},{fmt(e.x)}\n"
            )

    def close(self):
        for fh in (self._trace, self._links, self._lc):
            if fh is not None:
                fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_statistics(out: Path, result) -> list[Path]:
    """Headway samples, intensities, intervals, profile and state counts."""
    out = Path(out)
    cfg = result.cfg
    written = []

    tracked = [i for i in cfg.tracked_ids if 1 <= i <= result.headways.shape[1]]
    lanes = result.tracked_lanes
    rows = (
        (int(t), vid, int(lanes[j, k]), result.headways[j, vid - 1])
        for j, t in enumerate(result.sample_ticks)
        for k, vid in enumerate(tracked)
    )
    written.append(write_table(out / HEADWAYS, ["tick_s", "vehicle_id", "lane", "headway_m"], rows))

    it = transition_intensities(result.tracker)
    rows = [
        (int(v), int(a), int(b), dl, do, dt, P, p)
        for v, a, b, dl, do, dt, P, p in zip(
            it.vehicle_id, it.n_los_olos, it.n_olos_los, it.d_los, it.d_olos,
            it.d_total, it.P, it.p,
        )
    ]
    rows.append(("mean", "", "", "", "", "", it.mean_P, it.mean_p))
    header = [
        "vehicle_id", "n_los_olos", "n_olos_los", "d_los_m", "d_olos_m",
        "d_total_m", "P_per_m", "p_per_m",
    ]
    written.append(write_table(out / INTENSITIES, header, rows))

    state, row, rx, length = result.tracker.intervals(include_open=True)
    # open intervals come last
    n_closed = len(result.tracker.intervals(include_open=False)[0])
    open_mask = np.arange(len(state)) >= n_closed
    tx_ids = result.tracker.tx[row] + 1
    rows = (
        (STATE_NAMES[s], int(t), int(r) + 1, float(d), int(o))
        for s, t, r, d, o in zip(state, tx_ids, rx, length, open_mask)
    )
    written.append(
        write_table(out / INTERVALS, ["state", "tx_id", "rx_id", "length_m", "open"], rows)
    )

    prof = result.histogram.profile()
    rows = zip(
        prof.edges[:-1], prof.edges[1:], prof.centers, prof.n_los, prof.n_olos,
        prof.pr_los, prof.pr_olos,
    )
    header = ["bin_lo_m", "bin_hi_m", "bin_center_m", "n_los", "n_olos", "pr_los", "pr_olos"]
    written.append(write_table(out / PROFILE, header, rows))

    c = result.tx_counts
    rows = ((int(t), a, b, d) for t, (a, b, d) in zip(result.sample_ticks, c))
    written.append(
        write_table(out / STATE_COUNTS, ["tick_s", "n_in_range", "n_los", "n_olos"], rows)
    )
    return written


def write_channel(out: Path, table) -> Path:
    return write_table(
        Path(out) / CHANNEL, ["d_m", "model_name", "mean_rx_dbm", "prp"], table.rows()
    )


def file_inventory(out: Path, names) -> list[dict]:
    inv = []
    for name in names:
        p = Path(out) / name
        data = p.read_bytes()
        inv.append({"file": name, "bytes": len(data), "sha256": hashlib.sha256(data).hexdigest()})
    return inv


def write_manifest(out: Path, manifest: dict) -> Path:
    path = Path(out) / MANIFEST
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, allow_nan=True) + "\n")
    return path


def headline_metrics(result) -> dict:
    it = transition_intensities(result.tracker)
    c = result.tx_counts
    return {
        "mu_P_per_m": it.mean_P,
        "mu_p_per_m": it.mean_p,
        "mean_in_range": float(c[:, 0].mean()) if len(c) else float("nan"),
        "mean_los": float(c[:, 1].mean()) if len(c) else float("nan"),
        "mean_olos": float(c[:, 2].mean()) if len(c) else float("nan"),
        "lane_changes": len(result.lane_changes),
        "guard_activations": result.guard_activations,
    }

