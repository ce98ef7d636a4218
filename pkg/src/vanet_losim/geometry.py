"""LOS / OLOS / out-of-range classification of vehicle pairs.

Vehicles are axis-aligned rectangles on straight lane center lines. Geometry
is evaluated in a local frame unrolled around the transmitter: longitudinal
coordinates are ring offsets wrapped into [-L/2, L/2), which is a single
contiguous chart because the communication radius is far below L/2.

Two classifiers are provided. :func:`classify_pairwise` tests the antenna to
antenna segment of every in-range pair against every other footprint and is
the reference semantics. :func:`classify_tick` builds the shadow that each
relevant obstacle casts on the other lane's antenna line and is what the
simulation runs; the two must agree exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .mobility import find_neighbors
from .scenario import ScenarioConfig, SimulationState


class LinkState(IntEnum):
    LOS = 0
    OLOS = 1
    OOR = 2


@dataclass(frozen=True)
class Footprint:
    center: tuple[float, float]
    half_length: float
    half_width: float

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        cx, cy = self.center
        return (
            cx - self.half_length,
            cy - self.half_width,
            cx + self.half_length,
            cy + self.half_width,
        )

    @property
    def corners(self) -> list[tuple[float, float]]:
        x0, y0, x1, y1 = self.bounds
        return [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]


def in_range(tx_pos, rx_pos, r_c: float) -> bool:
    """Closed disk: a separation of exactly ``r_c`` is in range."""
    return bool(np.hypot(rx_pos[0] - tx_pos[0], rx_pos[1] - tx_pos[1]) <= r_c)


def segments_hit_boxes(px, py, qx, qy, x0, y0, x1, y1):
    """Vectorized closed segment/box intersection (Liang-Barsky clipping).

    All arguments broadcast. Touching an edge or corner counts as a hit.
    """
    dx = np.asarray(qx - px, dtype=float)
    dy = np.asarray(qy - py, dtype=float)
    t_lo = np.zeros(np.broadcast(dx, x0).shape)
    t_hi = np.ones_like(t_lo)
    hit = np.ones(t_lo.shape, dtype=bool)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for p, q in (
            (-dx, px - x0),
            (dx, x1 - px),
            (-dy, py - y0),
            (dy, y1 - py),
        ):
            p = np.broadcast_to(p, t_lo.shape)
            q = np.broadcast_to(q, t_lo.shape)
            parallel = p == 0
            hit &= ~(parallel & (q < 0))
            r = q / p
            enter = ~parallel & (p < 0)
            leave = ~parallel & (p > 0)
            t_lo = np.where(enter, np.maximum(t_lo, r), t_lo)
            t_hi = np.where(leave, np.minimum(t_hi, r), t_hi)
    return hit & (t_lo <= t_hi)


def segment_blocked(tx_antenna, rx_antenna, obstacle: Footprint) -> bool:
    x0, y0, x1, y1 = obstacle.bounds
    return bool(
        segments_hit_boxes(
            tx_antenna[0], tx_antenna[1], rx_antenna[0], rx_antenna[1], x0, y0, x1, y1
        )
    )


def lane_y(cfg: ScenarioConfig, lane: np.ndarray) -> np.ndarray:
    y1, y2 = cfg.road.lane_center_offsets
    return np.where(lane == 1, y1, y2)


def wrap_offset(d, ring_length: float):
    """Ring offset wrapped into [-L/2, L/2)."""
    return np.mod(d + 0.5 * ring_length, ring_length) - 0.5 * ring_length


def local_frame(state: SimulationState, cfg: ScenarioConfig, tx: int):
    """Vehicle centers (x, y) relative to the transmitter's center."""
    x = wrap_offset(state.x_curr - state.x_curr[tx], cfg.road.ring_length)
    return x, lane_y(cfg, state.lane)


def footprints(state: SimulationState, cfg: ScenarioConfig, tx: int) -> list[Footprint]:
    x, y = local_frame(state, cfg, tx)
    hl, hw = 0.5 * cfg.dims.length, 0.5 * cfg.dims.width
    return [Footprint((float(a), float(b)), hl, hw) for a, b in zip(x, y)]


def classify_pairwise(state: SimulationState, cfg: ScenarioConfig, tx_id: int) -> dict:
    """Reference classifier: segment test of every in-range pair."""
    tx = tx_id - 1
    x, y = local_frame(state, cfg, tx)
    dims = cfg.dims
    hl, hw = 0.5 * dims.length, 0.5 * dims.width
    ax, ay = x + dims.antenna_dx, y + dims.antenna_dy
    out = {}
    for rx in range(state.n):
        if rx == tx:
            continue
        if not in_range((ax[tx], ay[tx]), (ax[rx], ay[rx]), cfg.r_c):
            out[rx + 1] = LinkState.OOR
            continue
        others = np.ones(state.n, dtype=bool)
        others[[tx, rx]] = False
        hit = segments_hit_boxes(
            ax[tx], ay[tx], ax[rx], ay[rx],
            x[others] - hl, y[others] - hw, x[others] + hl, y[others] + hw,
        )
        out[rx + 1] = LinkState.OLOS if hit.any() else LinkState.LOS
    return out


def shadow_on_line(x0, y0, x1, y1, h):
    """Interval [lo, hi] of the line y = h hidden from the origin by a box.

    A point (x, h) is hidden iff the segment from the origin to it meets the
    box [x0, x1] x [y0, y1]. Empty shadows come back with lo > hi. ``h`` must
    be non-zero; the origin must lie outside the box.
    """
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        a, b = y0 / h, y1 / h
        s_lo = np.maximum(np.minimum(a, b), 0.0)
        s_hi = np.minimum(np.maximum(a, b), 1.0)
        empty = s_lo > s_hi
        lo = np.minimum(_ratio(x0, s_lo), _ratio(x0, s_hi))
        hi = np.maximum(_ratio(x1, s_lo), _ratio(x1, s_hi))
    lo = np.where(empty, np.inf, lo)
    hi = np.where(empty, -np.inf, hi)
    return lo, hi


def _ratio(num, s):
    # num / s with the s -> 0+ limit taken as a signed infinity
    return np.where(s > 0, num / np.where(s > 0, s, 1.0), np.copysign(np.inf, num))


@dataclass
class TickLinks:
    """Link classification of one tick for a set of transmitters.

    Only in-range pairs are listed; every other (tx, rx) pair is OOR.
    """

    tx: np.ndarray  # transmitter indices, shape (m,)
    n: int
    row: np.ndarray  # index into ``tx`` of each in-range pair
    rx: np.ndarray  # receiver index of each in-range pair
    code: np.ndarray  # LOS or OLOS per pair
    distance: np.ndarray  # antenna separation per pair, m

    def dense(self) -> np.ndarray:
        """(m, n) LinkState codes; the transmitter itself is OOR."""
        out = np.full((len(self.tx), self.n), LinkState.OOR, dtype=np.int8)
        out[self.row, self.rx] = self.code
        return out

    @property
    def state(self) -> np.ndarray:
        return self.dense()


def in_range_pairs(x, ay, tx, r_c: float, ring_length: float):
    """All (row, rx, rel, dy, dist) with 0 < dist <= r_c, via a sorted window."""
    L = ring_length
    n = len(x)
    order = np.argsort(x, kind="stable")
    xs = x[order]
    ext = np.concatenate([xs - L, xs, xs + L])
    idx = np.concatenate([order, order, order])
    # antenna lanes differ by at most a few metres, so |rel| <= r_c is necessary
    lo = np.searchsorted(ext, x[tx] - r_c, side="left")
    hi = np.searchsorted(ext, x[tx] + r_c, side="right")
    hi = np.minimum(hi, lo + n)
    counts = hi - lo
    row = np.repeat(np.arange(len(tx)), counts)
    start = np.repeat(lo - np.cumsum(counts) + counts, counts)
    pos = np.arange(counts.sum()) + start
    rx = idx[pos]
    t = tx[row]
    rel = wrap_offset(x[rx] - x[t], L)
    dy = ay[rx] - ay[t]
    dist = np.hypot(rel, dy)
    keep = (rx != t) & (dist <= r_c)
    return row[keep], rx[keep], rel[keep], dy[keep], dist[keep]


def classify_tick(
    state: SimulationState, cfg: ScenarioConfig, tx: np.ndarray | None = None
) -> TickLinks:
    """Shadow-interval classifier for all pairs (tx, rx) of one tick.

    Same-lane receivers are LOS only if they are the transmitter's direct
    front or back neighbor. For an other-lane receiver the only footprints
    that can hide it are the transmitter's two lane neighbors (any vehicle
    beyond them lies inside their shadow) and the receiver's two lane
    neighbors (the one on the transmitter side shades every vehicle further
    back). Each casts a shadow interval on the receiver lane's antenna line.
    """
    L = cfg.road.ring_length
    n = state.n
    if tx is None:
        tx = np.arange(n)
    tx = np.asarray(tx, dtype=int)
    dims = cfg.dims
    hl, hw = 0.5 * dims.length, 0.5 * dims.width
    x = state.x_curr
    lane = state.lane
    y = lane_y(cfg, lane)
    ay = y + dims.antenna_dy

    nb = find_neighbors(x, lane, L)
    follower = np.arange(n)
    follower[nb.leader] = np.arange(n)

    row, rx, rel, dy, dist = in_range_pairs(x, ay, tx, cfg.r_c, L)
    t = tx[row]
    code = np.empty(len(rx), dtype=np.int8)

    same = lane[rx] == lane[t]
    # a ring neighbor reached the long way round is not adjacent in the frame
    ahead = rel >= 0
    adjacent = ((rx == nb.leader[t]) & ahead) | ((rx == follower[t]) & ~ahead)
    code[same] = np.where(adjacent[same], LinkState.LOS, LinkState.OLOS)

    cross = ~same
    t, ri = t[cross], rx[cross]
    xr, h = rel[cross], dy[cross]
    y_t = ay[t]
    blocked = np.zeros(len(ri), dtype=bool)

    # transmitter-lane neighbors, offsets measured along the ring
    front = nb.leader[t]
    back = follower[t]
    gap_front = np.mod(x[front] - x[t], L)
    gap_back = np.mod(x[t] - x[back], L)
    cands = [
        (front, gap_front, (front != t) & (gap_front < 0.5 * L)),
        (back, -gap_back, (back != t) & (gap_back <= 0.5 * L)),
    ]
    # receiver-lane neighbors, placed relative to the receiver
    r_lead = nb.leader[ri]
    r_foll = follower[ri]
    cands += [
        (r_lead, xr + np.mod(x[r_lead] - x[ri], L), r_lead != ri),
        (r_foll, xr - np.mod(x[ri] - x[r_foll], L), r_foll != ri),
    ]
    for k, cx, valid in cands:
        cy = y[k] - y_t
        lo, hi = shadow_on_line(
            cx - hl - dims.antenna_dx, cy - hw, cx + hl - dims.antenna_dx, cy + hw, h
        )
        blocked |= valid & (lo <= xr) & (xr <= hi)
    code[cross] = np.where(blocked, LinkState.OLOS, LinkState.LOS)
    return TickLinks(tx, n, row, rx, code, dist)


def classify_all(state: SimulationState, cfg: ScenarioConfig, tx_id: int) -> dict:
    """Map every other vehicle id to its LinkState as seen from ``tx_id``."""
    links = classify_tick(state, cfg, np.array([tx_id - 1]))
    return {
        i + 1: LinkState(int(c))
        for i, c in enumerate(links.state[0])
        if i != tx_id - 1
    }
