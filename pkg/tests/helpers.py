"""Shared invariant checks and reference implementations for the tests."""

import math

import numpy as np

from vanet_losim.mobility import apply_lane_changes, find_neighbors, step_positions


def cyclic_order(state, lane):
    idx = np.flatnonzero(state.lane == lane)
    return idx[np.argsort(state.x_curr[idx], kind="stable")]


def same_cycle(a, b):
    if len(a) != len(b):
        return False
    if len(a) == 0:
        return True
    k = np.flatnonzero(b == a[0])
    return len(k) == 1 and np.array_equal(np.roll(b, -k[0]), a)


def check_step_invariants(state, cfg, lane_changes=True):
    """Advance one tau-step and assert every mobility invariant on it."""
    L = cfg.road.ring_length
    n0 = state.n
    orders = {l: cyclic_order(state, l) for l in (1, 2)}
    new, diag = step_positions(state, cfg, return_diagnostics=True)
    problems = []

    # no same-lane overtaking across a position update
    for l in (1, 2):
        if not same_cycle(orders[l], cyclic_order(new, l)):
            problems.append(f"overtaking in lane {l}")

    # headway recurrence against the position difference
    s_old = diag.disp_old
    lead = diag.leader
    solo = lead == np.arange(n0)
    dx_t = diag.headway_before - (s_old[lead] - s_old)
    eq3 = (
        diag.headway_before
        + cfg.tau * (diag.v_opt[lead] - diag.v_opt)
        + diag.coefficient * (diag.headway_before - dx_t)
    )
    from_pos = np.mod(new.x_curr[lead] - new.x_curr, L)
    ok = ~solo & ~diag.guarded & ~diag.guarded[lead]
    err = np.abs(eq3 - from_pos)[ok]
    if err.size and err.max() > 1e-9:
        problems.append(f"headway recurrence off by {err.max():.3e} m")

    # implied speed bounds
    v_max = np.where(new.lane == 1, cfg.lanes[0].v_max, cfg.lanes[1].v_max)
    speed = np.mod(new.x_curr - new.x_prev, L) / cfg.tau
    if np.any(speed < 0) or np.any(speed > 1.2 * v_max + 1e-9):
        problems.append("speed outside [0, 1.2 v_max]")

    if lane_changes:
        new, _ = apply_lane_changes(new, cfg)

    # conservation and ring closure
    if new.n != n0:
        problems.append("vehicle count changed")
    nb = find_neighbors(new.x_curr, new.lane, L)
    for l in (1, 2):
        m = new.lane == l
        if m.sum() > 1 and abs(nb.dx[m].sum() - L) > 1e-6:
            problems.append(f"ring closure lane {l}: {nb.dx[m].sum() - L:.3e}")
    if np.any((new.x_curr < 0) | (new.x_curr >= L)):
        problems.append("position not wrapped")
    return new, problems


def reference_step(x_prev, x_curr, lane, cfg):
    """Plain-loop evaluation of the two-lane car-following update."""
    L = cfg.road.ring_length
    tau = cfg.tau
    n = len(x_curr)
    out = []
    for i in range(n):
        lp = cfg.lanes[lane[i] - 1]
        same = [j for j in range(n) if j != i and lane[j] == lane[i]]
        other = [j for j in range(n) if lane[j] != lane[i]]
        s_i = (x_curr[i] - x_prev[i]) % L
        if same:
            j = min(same, key=lambda j: (x_curr[j] - x_curr[i]) % L)
            dx = (x_curr[j] - x_curr[i]) % L - ((x_curr[j] - x_prev[j]) % L - s_i)
        else:
            dx = L
        if other:
            k = min(other, key=lambda j: (x_curr[j] - x_curr[i]) % L)
            dxp = (x_curr[k] - x_curr[i]) % L - ((x_curr[k] - x_prev[k]) % L - s_i)
        else:
            dxp = L
        xt = cfg.beta1 * dx + cfg.beta2 * dxp
        v = 0.5 * lp.v_max * (math.tanh(xt - lp.d_p) + math.tanh(lp.d_p))
        c = lp.lam * tau if cfg.velocity_term_mode == "as_printed" else lp.lam
        out.append((x_curr[i] + tau * v + c * s_i) % L)
    return np.array(out)
