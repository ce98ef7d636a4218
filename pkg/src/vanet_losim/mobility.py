"""Discrete two-lane optimal-velocity car-following with lane changes.

Every vehicle advances by

    x(t+2tau) = x(t+tau) + tau * V(x~(t)) + c * (x(t+tau) - x(t))

where ``V`` is the headway-driven optimal velocity, ``x~`` the weighted
headway over the same-lane and other-lane predecessors at the older time
level, and ``c`` equals ``lambda * tau`` (``as_printed``) or ``lambda``
(``dimensionless_lambda``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scenario import LaneParams, ScenarioConfig, SimulationState


class CollisionError(RuntimeError):
    """Raised when a same-lane headway drops below the vehicle length."""

    def __init__(self, step: int, pairs: list[tuple[int, int, float]]):
        self.step = step
        self.pairs = pairs
        shown = ", ".join(f"{f}->{l} ({g:.2f} m)" for f, l, g in pairs[:5])
        super().__init__(f"collision at tau-step {step}: follower->leader {shown}")


@dataclass(frozen=True)
class NeighborView:
    dx: float
    dx_p: float
    dx_f: float
    dv: float


@dataclass(frozen=True)
class LaneChangeEvent:
    step: int
    vehicle_id: int
    from_lane: int
    to_lane: int
    x: float


@dataclass
class Neighbors:
    """Neighbor indices and gaps for every vehicle (center-to-center, m)."""

    leader: np.ndarray
    dx: np.ndarray
    other_leader: np.ndarray
    dx_p: np.ndarray
    other_follower: np.ndarray
    dx_f: np.ndarray


def optimal_velocity(x_tilde, d_p, v_max):
    return 0.5 * v_max * (np.tanh(x_tilde - d_p) + np.tanh(d_p))


def weighted_headway(dx, dx_p, beta1, beta2):
    return beta1 * dx + beta2 * dx_p


def find_neighbors(x: np.ndarray, lane: np.ndarray, ring_length: float) -> Neighbors:
    """Same-lane leader and other-lane leader/follower of every vehicle.

    A vehicle with no other vehicle in its lane is its own leader at gap
    ``ring_length``; an empty other lane gives index -1 and gaps of
    ``ring_length``. An other-lane vehicle at exactly the same position
    counts as the preceding one.
    """
    L = ring_length
    n = len(x)
    leader = np.arange(n)
    dx = np.full(n, L)
    other_leader = np.full(n, -1)
    other_follower = np.full(n, -1)
    dx_p = np.full(n, L)
    dx_f = np.full(n, L)

    members = {}
    for l in (1, 2):
        idx = np.flatnonzero(lane == l)
        members[l] = idx[np.argsort(x[idx], kind="stable")]

    for l, o in ((1, 2), (2, 1)):
        own = members[l]
        if len(own) == 0:
            continue
        if len(own) > 1:
            nxt = np.roll(own, -1)
            leader[own] = nxt
            dx[own] = np.mod(x[nxt] - x[own], L)
        other = members[o]
        if len(other) == 0:
            continue
        xs = x[other]
        j = np.searchsorted(xs, x[own], side="left")
        lead = other[j % len(other)]
        foll = other[(j - 1) % len(other)]
        other_leader[own] = lead
        other_follower[own] = foll
        dx_p[own] = np.mod(x[lead] - x[own], L)
        dx_f[own] = np.mod(x[own] - x[foll], L)
        # lone other-lane vehicle alongside: both gaps are zero, not L
    return Neighbors(leader, dx, other_leader, dx_p, other_follower, dx_f)


def displacement(state: SimulationState, ring_length: float) -> np.ndarray:
    """Per-step displacement x(t+tau) - x(t), unwrapped across the ring seam."""
    return np.mod(state.x_curr - state.x_prev, ring_length)


def _lane_array(cfg: ScenarioConfig, lane: np.ndarray, attr: str) -> np.ndarray:
    a, b = (getattr(lp, attr) for lp in cfg.lanes)
    return np.where(lane == 1, a, b)


def velocity_coefficient(cfg: ScenarioConfig, lane: np.ndarray) -> np.ndarray:
    lam = _lane_array(cfg, lane, "lam")
    if cfg.velocity_term_mode == "as_printed":
        return lam * cfg.tau
    return lam


def safety_distances(cfg: ScenarioConfig, lane: np.ndarray, speed: np.ndarray):
    """(d_p, d_f) per vehicle, fixed per lane or ``safety_gap * speed``."""
    if cfg.safety_gap is not None:
        d = cfg.safety_gap * speed
        return d, d
    return _lane_array(cfg, lane, "d_p"), _lane_array(cfg, lane, "d_f")


@dataclass
class StepDiagnostics:
    """Quantities from one position update, kept for invariant checks."""

    headway_before: np.ndarray  # same-lane gap at t + tau
    headway_after: np.ndarray  # same-lane gap at t + 2 tau, same leader
    v_opt: np.ndarray
    disp_old: np.ndarray
    disp_new: np.ndarray
    leader: np.ndarray
    coefficient: np.ndarray
    guarded: np.ndarray  # displacement capped by the collision guard


def step_positions(
    state: SimulationState, cfg: ScenarioConfig, return_diagnostics: bool = False
):
    """Advance every vehicle by one tau-step.

    Neighbor identities come from the current ordering; their gaps are taken
    at the older time level t, as the update is driven by delayed headways.
    """
    L = cfg.road.ring_length
    tau = cfg.tau
    nb = find_neighbors(state.x_curr, state.lane, L)
    s = displacement(state, L)

    # gaps at time t with the current neighbor identities
    dx_t = nb.dx - s[nb.leader] + s
    has_other = nb.other_leader >= 0
    dxp_t = np.where(has_other, nb.dx_p - s[nb.other_leader] + s, L)

    d_p, _ = safety_distances(cfg, state.lane, s / tau)
    v_max = _lane_array(cfg, state.lane, "v_max")
    x_tilde = weighted_headway(dx_t, dxp_t, cfg.beta1, cfg.beta2)
    v_opt = optimal_velocity(x_tilde, d_p, v_max)
    coef = velocity_coefficient(cfg, state.lane)
    s_new = tau * v_opt + coef * s
    solo = nb.leader == np.arange(state.n)
    guarded = np.zeros(state.n, dtype=bool)
    if cfg.collision_guard:
        s_new, guarded = _cap_at_contact(s_new, nb.dx, nb.leader, solo, cfg.dims.length)

    new = state.copy()
    new.x_prev = state.x_curr.copy()
    new.x_curr = np.mod(state.x_curr + s_new, L)
    new.step = state.step + 1

    gap_after = np.where(solo, L, nb.dx + s_new[nb.leader] - s_new)
    bad = np.flatnonzero(gap_after < cfg.dims.length - 1e-9)
    if len(bad):
        pairs = [(int(i) + 1, int(nb.leader[i]) + 1, float(gap_after[i])) for i in bad]
        raise CollisionError(new.step, pairs)
    if return_diagnostics:
        diag = StepDiagnostics(nb.dx, gap_after, v_opt, s, s_new, nb.leader, coef, guarded)
        return new, diag
    return new


def _cap_at_contact(s_new, gap, leader, solo, length):
    """Cap displacements so no follower closes below ``length`` of its leader.

    Capping a leader can tighten its follower's cap, so iterate to the
    fixed point; displacements only decrease, so this terminates.
    """
    s_new = s_new.copy()
    guarded = np.zeros(len(s_new), dtype=bool)
    for _ in range(len(s_new) + 1):
        cap = np.where(solo, np.inf, gap + s_new[leader] - length)
        over = s_new > cap
        if not over.any():
            break
        s_new[over] = cap[over]
        guarded |= over
    return s_new, guarded


def compute_neighbor_view(
    state: SimulationState, cfg: ScenarioConfig, vehicle_id: int
) -> NeighborView:
    L = cfg.road.ring_length
    i = vehicle_id - 1
    nb = find_neighbors(state.x_curr, state.lane, L)
    s = displacement(state, L)
    dv = (s[nb.leader[i]] - s[i]) / cfg.tau
    return NeighborView(float(nb.dx[i]), float(nb.dx_p[i]), float(nb.dx_f[i]), float(dv))


def lane_change_eligible(
    view: NeighborView, subject: LaneParams, target: LaneParams
) -> bool:
    return _eligible(view.dx, view.dx_p, view.dx_f, subject.d_p, target.d_f)


def _eligible(dx, dx_p, dx_f, d_p, d_f):
    return (dx < 2 * d_p) & (dx_p > dx) & (dx_f > d_f)


def _eligibility(state: SimulationState, cfg: ScenarioConfig, time_s: float):
    L = cfg.road.ring_length
    nb = find_neighbors(state.x_curr, state.lane, L)
    speed = displacement(state, L) / cfg.tau
    if cfg.safety_gap is not None:
        d_p = d_f = cfg.safety_gap * speed
    else:
        target = 3 - state.lane
        d_p = _lane_array(cfg, state.lane, "d_p")
        d_f = _lane_array(cfg, target, "d_f")
    ok = _eligible(nb.dx, nb.dx_p, nb.dx_f, d_p, d_f)
    # target-lane collision margin
    ok &= (nb.dx_p >= cfg.dims.length) & (nb.dx_f >= cfg.dims.length)
    ok &= time_s - state.last_change >= cfg.lane_change_cooldown
    return ok


def _eligible_one(state: SimulationState, cfg: ScenarioConfig, i: int, time_s: float) -> bool:
    """Eligibility of vehicle ``i`` alone, same rule as :func:`_eligibility`."""
    if time_s - state.last_change[i] < cfg.lane_change_cooldown:
        return False
    L = cfg.road.ring_length
    x, lane = state.x_curr, state.lane
    ahead = np.mod(x - x[i], L)
    own = lane == lane[i]
    own[i] = False
    other = ~own
    other[i] = False
    dx = ahead[own].min() if own.any() else L
    if other.any():
        dx_p = ahead[other].min()
        behind = np.mod(x[i] - x[other], L)
        behind = behind[behind > 0]
        dx_f = behind.min() if behind.size else L
    else:
        dx_p = dx_f = L
    if cfg.safety_gap is not None:
        d_p = d_f = cfg.safety_gap * np.mod(x[i] - state.x_prev[i], L) / cfg.tau
    else:
        d_p = cfg.lanes[lane[i] - 1].d_p
        d_f = cfg.lanes[2 - lane[i]].d_f
    length = cfg.dims.length
    return bool(_eligible(dx, dx_p, dx_f, d_p, d_f) and dx_p >= length and dx_f >= length)


def apply_lane_changes(state: SimulationState, cfg: ScenarioConfig):
    """Move every eligible vehicle to the other lane, keeping its position.

    Claimants are processed in ascending position; each re-checks its
    eligibility against the lanes as already updated in this batch, so two
    claimants of the same gap cannot both get in.
    """
    if not cfg.lane_changes:
        return state, []
    time_s = state.step * cfg.tau
    claim = np.flatnonzero(_eligibility(state, cfg, time_s))
    if len(claim) == 0:
        return state, []
    new = state.copy()
    events = []
    for k, i in enumerate(claim[np.argsort(new.x_curr[claim], kind="stable")]):
        # the first claimant sees an unchanged road
        if k > 0 and not _eligible_one(new, cfg, int(i), time_s):
            continue
        src = int(new.lane[i])
        new.lane[i] = 3 - src
        new.last_change[i] = time_s
        events.append(LaneChangeEvent(new.step, int(i) + 1, src, 3 - src, float(new.x_curr[i])))
    return new, events


def headways(state: SimulationState, cfg: ScenarioConfig) -> np.ndarray:
    return find_neighbors(state.x_curr, state.lane, cfg.road.ring_length).dx
