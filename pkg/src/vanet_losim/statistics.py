"""Link-state bookkeeping: LOS/OLOS intervals, transition intensities,
empirical CDFs and LOS probability versus distance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import LinkState

LOS, OLOS, OOR = int(LinkState.LOS), int(LinkState.OLOS), int(LinkState.OOR)


class EmpiricalCdf:
    """Right-continuous empirical CDF of a finite sample."""

    def __init__(self, samples):
        values = np.sort(np.asarray(samples, dtype=float).ravel())
        if values.size == 0:
            raise ValueError("empirical CDF of an empty sample")
        self.values = values

    def __len__(self):
        return self.values.size

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.searchsorted(self.values, x, side="right") / self.values.size

    def steps(self):
        """Distinct sample values and the CDF just after each."""
        uniq, counts = np.unique(self.values, return_counts=True)
        return uniq, np.cumsum(counts) / self.values.size

    def quantile(self, q):
        return np.quantile(self.values, q)


def empirical_cdf(samples) -> EmpiricalCdf:
    return EmpiricalCdf(samples)


class StateTracker:
    """Per-link run-length accounting of LOS/OLOS episodes.

    Links are (transmitter row, receiver column) pairs of an ``(m, n)`` state
    matrix. Distance a receiver moves during a tick accrues to the state the
    link held at the start of that tick. Entering OOR closes any open
    interval without counting a LOS<->OLOS transition.
    """

    def __init__(self, tx: np.ndarray, n: int, keep_intervals=True):
        self.tx = np.asarray(tx, dtype=int)
        m = len(self.tx)
        self.n = n
        self.prev = np.full((m, n), OOR, dtype=np.int8)
        self.run = np.zeros((m, n))
        self.n_los_olos = np.zeros((m, n), dtype=np.int64)
        self.n_olos_los = np.zeros((m, n), dtype=np.int64)
        self.d_los = np.zeros((m, n))
        self.d_olos = np.zeros((m, n))
        self.d_vehicle = np.zeros(n)
        self.ticks = 0
        if isinstance(keep_intervals, bool):
            keep_intervals = np.full(m, keep_intervals)
        self._keep = np.asarray(keep_intervals, dtype=bool)[:, None]
        self._closed: list[tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]] = []
        self._active = np.zeros(0, dtype=np.int64)  # flat indices not OOR

    def update(self, states: np.ndarray, moved: np.ndarray) -> "StateTracker":
        """Advance one tick from a dense ``(m, n)`` state matrix."""
        s = np.asarray(states, dtype=np.int8)
        ti, ri = np.nonzero(s != OOR)
        return self.update_pairs(ti, ri, s[ti, ri], moved)

    def update_pairs(self, row, rx, code, moved) -> "StateTracker":
        """Advance one tick given only the in-range (row, rx, code) triples."""
        n = self.n
        moved = np.broadcast_to(np.asarray(moved, dtype=float), (n,))
        cur = np.asarray(row, dtype=np.int64) * n + np.asarray(rx, dtype=np.int64)
        # only links in range now or at the previous tick can change
        touched = np.union1d(cur, self._active)
        new = np.full(touched.size, OOR, dtype=np.int8)
        new[np.searchsorted(touched, cur)] = code

        prev, run = self.prev.ravel(), self.run.ravel()
        p = prev[touched]
        m = moved[touched % n]
        closing = (p != OOR) & (new != p)
        rec = closing & self._keep.ravel()[touched // n]
        if rec.any():
            k = touched[rec]
            self._closed.append((p[rec].copy(), k // n, k % n, run[k].copy()))

        switched = closing & (new != OOR)
        np.add.at(self.n_los_olos.ravel(), touched[switched & (p == LOS)], 1)
        np.add.at(self.n_olos_los.ravel(), touched[switched & (p == OLOS)], 1)

        inside = new != OOR
        r = run[touched]
        run[touched] = np.where(inside & (new == p), r + m, np.where(inside, m, 0.0))
        d_los, d_olos = self.d_los.ravel(), self.d_olos.ravel()
        d_los[touched] += np.where(new == LOS, m, 0.0)
        d_olos[touched] += np.where(new == OLOS, m, 0.0)
        prev[touched] = new
        self._active = np.sort(cur)
        self.d_vehicle += moved
        self.ticks += 1
        return self

    def intervals(self, include_open: bool = True):
        """All recorded intervals as arrays (state, tx_row, rx, length_m).

        Intervals still open at the end are included unless
        ``include_open`` is false, so per-link sums match the state totals.
        """
        parts = list(self._closed)
        if include_open:
            open_ = (self.prev != OOR) & self._keep
            ti, ri = np.nonzero(open_)
            parts.append((self.prev[ti, ri], ti, ri, self.run[ti, ri]))
        if not parts:
            e = np.zeros(0)
            return e.astype(np.int8), e.astype(int), e.astype(int), e
        return tuple(np.concatenate(col) for col in zip(*parts))

    def d_total(self) -> np.ndarray:
        """Distance each link's receiver travelled over all updates, (m, n)."""
        total = np.broadcast_to(self.d_vehicle, self.prev.shape).copy()
        total[np.arange(len(self.tx)), self.tx] = 0.0
        return total


@dataclass
class IntensityTable:
    vehicle_id: np.ndarray
    n_los_olos: np.ndarray
    n_olos_los: np.ndarray
    d_los: np.ndarray
    d_olos: np.ndarray
    d_total: np.ndarray
    P: np.ndarray  # 1/m, NaN where the vehicle never was LOS
    p: np.ndarray  # 1/m, NaN where the vehicle never was OLOS

    @property
    def mean_P(self) -> float:
        return float(np.nanmean(self.P)) if np.isfinite(self.P).any() else float("nan")

    @property
    def mean_p(self) -> float:
        return float(np.nanmean(self.p)) if np.isfinite(self.p).any() else float("nan")


def transition_intensities(tracker: StateTracker) -> IntensityTable:
    """Per-vehicle P = N(LOS->OLOS)/D(LOS) and p = N(OLOS->LOS)/D(OLOS).

    Counts and distances of a receiver are summed over all tracked
    transmitters before the ratio is taken.
    """
    n_lo = tracker.n_los_olos.sum(axis=0)
    n_ol = tracker.n_olos_los.sum(axis=0)
    d_los = tracker.d_los.sum(axis=0)
    d_olos = tracker.d_olos.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        P = np.where(d_los > 0, n_lo / d_los, np.nan)
        p = np.where(d_olos > 0, n_ol / d_olos, np.nan)
    return IntensityTable(
        vehicle_id=np.arange(1, tracker.n + 1),
        n_los_olos=n_lo,
        n_olos_los=n_ol,
        d_los=d_los,
        d_olos=d_olos,
        d_total=tracker.d_total().sum(axis=0),
        P=P,
        p=p,
    )


@dataclass
class DistanceProfile:
    """LOS/OLOS probability per distance bin (k*w, (k+1)*w], in-range only."""

    edges: np.ndarray
    n_los: np.ndarray
    n_olos: np.ndarray

    @property
    def bin_width(self) -> float:
        return float(self.edges[1] - self.edges[0])

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def n_samples(self) -> np.ndarray:
        return self.n_los + self.n_olos

    @property
    def pr_los(self) -> np.ndarray:
        n = self.n_samples
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(n > 0, self.n_los / n, np.nan)

    @property
    def pr_olos(self) -> np.ndarray:
        n = self.n_samples
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(n > 0, self.n_olos / n, np.nan)

    def bin_index(self, d):
        k = np.ceil(np.asarray(d, dtype=float) / self.bin_width).astype(int) - 1
        return np.clip(k, 0, None)

    def lookup(self, d):
        """(Pr_LOS, Pr_OLOS) at distance(s) d; KeyError for uncovered bins."""
        k = self.bin_index(d)
        if np.any(k >= len(self.n_los)) or np.any(self.n_samples[k] == 0):
            raise KeyError(f"no LOS/OLOS samples in the bin covering d={d}")
        return self.pr_los[k], self.pr_olos[k]


class DistanceHistogram:
    """Streaming LOS/OLOS counts per distance bin."""

    def __init__(self, r_c: float, bin_width: float = 25.0):
        nbins = int(np.ceil(r_c / bin_width - 1e-9))
        self.edges = np.arange(nbins + 1) * bin_width
        self.n_los = np.zeros(nbins, dtype=np.int64)
        self.n_olos = np.zeros(nbins, dtype=np.int64)
        self.bin_width = bin_width

    def add(self, distances, states):
        d = np.asarray(distances, dtype=float).ravel()
        s = np.asarray(states).ravel()
        nb = len(self.n_los)
        k = np.clip(np.ceil(d / self.bin_width).astype(int) - 1, 0, None)
        for code, counts in ((LOS, self.n_los), (OLOS, self.n_olos)):
            sel = (s == code) & (k < nb)
            counts += np.bincount(k[sel], minlength=nb)
        return self

    def profile(self) -> DistanceProfile:
        return DistanceProfile(self.edges.copy(), self.n_los.copy(), self.n_olos.copy())


def distance_profile(distances, states, r_c: float = 500.0, bin_width: float = 25.0):
    """LOS probability per distance bin from (distance, state) pair samples."""
    d = np.asarray(distances, dtype=float).ravel()
    if d.size == 0:
        raise ValueError("empty link log")
    return DistanceHistogram(r_c, bin_width).add(d, states).profile()


def state_counts(states) -> dict[str, np.ndarray]:
    """Per-tick LOS, OLOS and in-range counts from a (ticks, n) state array."""
    s = np.atleast_2d(np.asarray(states))
    n_los = (s == LOS).sum(axis=1)
    n_olos = (s == OLOS).sum(axis=1)
    return {"n_los": n_los, "n_olos": n_olos, "n_in_range": n_los + n_olos}
