import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vanet_losim.statistics import (
    LOS,
    OLOS,
    OOR,
    DistanceHistogram,
    DistanceProfile,
    StateTracker,
    distance_profile,
    empirical_cdf,
    state_counts,
    transition_intensities,
)


def run_sequence(seq, moved=1.0, keep=True):
    """Track one link (tx row 0 -> rx 1) through a state sequence."""
    tr = StateTracker(np.array([0]), 2, keep_intervals=keep)
    moves = np.broadcast_to(moved, (len(seq),))
    for s, m in zip(seq, moves):
        tr.update(np.array([[OOR, s]]), np.array([m, m]))
    return tr


def test_open_interval_accumulates():
    tr = run_sequence([LOS] * 10, moved=27.7)
    state, row, rx, length = tr.intervals()
    assert list(state) == [LOS]
    assert length[0] == pytest.approx(277.0)
    assert tr.d_los[0, 1] == pytest.approx(277.0)


def test_switch_sequence_counts():
    tr = run_sequence([LOS, OLOS, LOS])
    assert tr.n_los_olos[0, 1] == 1 and tr.n_olos_los[0, 1] == 1
    state, *_ = tr.intervals()
    assert list(state) == [LOS, OLOS, LOS]


def test_out_of_range_gap_counts_no_transition():
    tr = run_sequence([LOS, OOR, LOS])
    assert tr.n_los_olos[0, 1] == 0 and tr.n_olos_los[0, 1] == 0
    state, *_ = tr.intervals()
    assert list(state) == [LOS, LOS]
    assert tr.d_los[0, 1] == 2.0


def test_intensity_arithmetic():
    tr = StateTracker(np.array([0]), 2)
    tr.n_los_olos[0, 1] = 2
    tr.d_los[0, 1] = 1000.0
    tr.d_olos[0, 1] = 500.0
    it = transition_intensities(tr)
    assert it.P[1] == pytest.approx(0.002)
    assert it.p[1] == 0.0


def test_zero_transitions_positive_distance():
    it = transition_intensities(run_sequence([LOS] * 5))
    assert it.P[1] == 0.0
    assert np.isnan(it.p[1])


def test_absent_intensity_excluded_from_mean():
    tr = StateTracker(np.array([0]), 3)
    tr.update(np.array([[OOR, LOS, LOS]]), np.ones(3))
    tr.update(np.array([[OOR, OLOS, LOS]]), np.ones(3))
    tr.update(np.array([[OOR, OLOS, LOS]]), np.ones(3))
    it = transition_intensities(tr)
    assert np.isnan(it.p[2])
    assert it.mean_p == pytest.approx(it.p[1])
    assert it.mean_P == pytest.approx(np.nanmean(it.P))


def test_d_total_excludes_transmitter():
    tr = run_sequence([LOS, OOR], moved=3.0)
    assert tr.d_total()[0, 0] == 0.0
    assert tr.d_total()[0, 1] == 6.0


state_seq = st.lists(st.sampled_from([LOS, OLOS, OOR]), min_size=1, max_size=60)


@settings(max_examples=200)
@given(seq=state_seq, moves=st.lists(st.integers(0, 50), min_size=60, max_size=60))
def test_interval_sums_equal_totals_exactly(seq, moves):
    tr = run_sequence(seq, moved=np.array(moves[: len(seq)], dtype=float))
    state, row, rx, length = tr.intervals()
    assert length[state == LOS].sum() == tr.d_los[0, 1]
    assert length[state == OLOS].sum() == tr.d_olos[0, 1]
    assert tr.d_los[0, 1] + tr.d_olos[0, 1] <= tr.d_total()[0, 1]


@settings(max_examples=200)
@given(seq=state_seq, moves=st.lists(st.floats(0, 40), min_size=60, max_size=60))
def test_interval_sums_float_moves(seq, moves):
    tr = run_sequence(seq, moved=np.array(moves[: len(seq)]))
    state, row, rx, length = tr.intervals()
    assert length[state == LOS].sum() == pytest.approx(tr.d_los[0, 1], rel=1e-12, abs=1e-9)
    assert length[state == OLOS].sum() == pytest.approx(tr.d_olos[0, 1], rel=1e-12, abs=1e-9)


@settings(max_examples=200)
@given(seq=state_seq)
def test_transition_parity_per_in_range_episode(seq):
    # an OOR gap restarts the count, so parity holds within each episode
    episodes, cur = [], []
    for s in seq + [OOR]:
        if s == OOR:
            if cur:
                episodes.append(cur)
            cur = []
        else:
            cur.append(s)
    total_lo = total_ol = 0
    for ep in episodes:
        tr = run_sequence(ep)
        lo, ol = int(tr.n_los_olos[0, 1]), int(tr.n_olos_los[0, 1])
        assert abs(lo - ol) <= 1
        # transitions alternate, so the first state decides which may lead
        if ep[0] == LOS:
            assert lo - ol in (0, 1)
        else:
            assert ol - lo in (0, 1)
        total_lo += lo
        total_ol += ol
    tr = run_sequence(seq)
    assert tr.n_los_olos[0, 1] == total_lo and tr.n_olos_los[0, 1] == total_ol


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_sparse_and_dense_updates_agree(seed):
    rng = np.random.default_rng(seed)
    m, n = 3, 8
    tx = np.array([0, 3, 5])
    a = StateTracker(tx, n)
    b = StateTracker(tx, n)
    for _ in range(30):
        s = rng.choice([LOS, OLOS, OOR], size=(m, n)).astype(np.int8)
        s[np.arange(m), tx] = OOR
        moved = rng.uniform(0, 20, n)
        a.update(s, moved)
        ti, ri = np.nonzero(s != OOR)
        b.update_pairs(ti, ri, s[ti, ri], moved)
    for key in ("prev", "run", "n_los_olos", "n_olos_los", "d_los", "d_olos"):
        assert np.array_equal(getattr(a, key), getattr(b, key)), key
    for x, y in zip(a.intervals(), b.intervals()):
        assert np.array_equal(np.sort(x), np.sort(y))


def test_profile_ratio_and_absent_bin():
    d = np.concatenate([np.full(80, 30.0), np.full(20, 40.0)])
    s = np.concatenate([np.full(80, LOS), np.full(20, OLOS)])
    prof = distance_profile(d, s, r_c=100.0, bin_width=25.0)
    assert prof.pr_los[1] == pytest.approx(0.8)
    assert prof.pr_los[1] + prof.pr_olos[1] == pytest.approx(1.0)
    assert np.isnan(prof.pr_los[0])
    with pytest.raises(KeyError):
        prof.lookup(10.0)
    assert prof.lookup(50.0) == (pytest.approx(0.8), pytest.approx(0.2))


def test_profile_bins_are_left_open():
    prof = distance_profile([25.0, 25.0001], [LOS, OLOS], r_c=50.0)
    assert prof.n_los.tolist() == [1, 0] and prof.n_olos.tolist() == [0, 1]
    assert prof.edges[0] == 0.0 and prof.edges[-1] == 50.0
    assert np.allclose(prof.centers, [12.5, 37.5])


def test_profile_rows_sum_to_one(rng):
    d = rng.uniform(0.1, 500, 2000)
    s = rng.choice([LOS, OLOS], 2000)
    h = DistanceHistogram(500.0).add(d[:1000], s[:1000]).add(d[1000:], s[1000:])
    prof = h.profile()
    ok = prof.n_samples > 0
    assert np.allclose(prof.pr_los[ok] + prof.pr_olos[ok], 1.0)
    assert len(prof.n_los) == 20


def test_empty_link_log_errors():
    with pytest.raises(ValueError):
        distance_profile([], [])


def test_ecdf_examples():
    F = empirical_cdf([1, 2, 3])
    assert F(2) == pytest.approx(2 / 3)
    assert F(-np.inf) == 0.0 and F(np.inf) == 1.0
    G = empirical_cdf([5.0] * 4)
    assert G(4.999) == 0.0 and G(5.0) == 1.0
    x, p = G.steps()
    assert x.tolist() == [5.0] and p.tolist() == [1.0]
    with pytest.raises(ValueError):
        empirical_cdf([])


@settings(max_examples=100)
@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=50), st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=10))
def test_ecdf_monotone(samples, queries):
    F = empirical_cdf(samples)
    q = np.sort(queries)
    v = F(q)
    assert np.all(np.diff(v) >= 0) and np.all((v >= 0) & (v <= 1))


def test_state_counts():
    s = np.array([[LOS, OLOS, OOR], [OOR, OOR, OOR]])
    c = state_counts(s)
    assert c["n_los"].tolist() == [1, 0]
    assert c["n_olos"].tolist() == [1, 0]
    assert c["n_in_range"].tolist() == [2, 0]


def test_profile_dataclass_bin_width():
    p = DistanceProfile(np.array([0.0, 10.0, 20.0]), np.array([1, 0]), np.array([0, 0]))
    assert p.bin_width == 10.0
    assert p.bin_index(10.0) == 0 and p.bin_index(10.5) == 1
