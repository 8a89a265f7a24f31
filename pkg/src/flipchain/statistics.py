"""Degree statistics, curve fits and run observers."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .triangulation import Triangulation


class FitError(ValueError):
    pass


# ----------------------------------------------------------------------
# histograms


@dataclass
class DegreeHistogram:
    """Node counts per degree, summed over ``samples`` snapshots.

    ``counts[d]`` is the total over snapshots; :attr:`mean` gives the
    time-averaged number of nodes of degree ``d``.
    """

    counts: np.ndarray
    n: int
    samples: int = 1

    @property
    def mean(self) -> np.ndarray:
        return self.counts / self.samples

    def as_dict(self) -> dict:
        return {int(d): int(c) for d, c in enumerate(self.counts) if c}

    @property
    def max_degree(self) -> int:
        nz = np.nonzero(self.counts)[0]
        return int(nz[-1]) if len(nz) else 0

    def merge(self, other: "DegreeHistogram") -> "DegreeHistogram":
        if other.n != self.n:
            raise ValueError("cannot merge histograms with different n")
        size = max(len(self.counts), len(other.counts))
        counts = np.zeros(size, dtype=np.int64)
        counts[:len(self.counts)] += self.counts
        counts[:len(other.counts)] += other.counts
        return DegreeHistogram(counts, self.n, self.samples + other.samples)


def degree_histogram(T: Triangulation) -> DegreeHistogram:
    return DegreeHistogram(np.bincount(T.size[1:]).astype(np.int64), T.n)


@dataclass
class CumulativeDistribution:
    """``values[k]`` is the (mean) number of nodes of degree >= ``degrees[k]``."""

    degrees: np.ndarray
    values: np.ndarray

    def at(self, i) -> float:
        k = int(i) - int(self.degrees[0])
        if k < 0:
            return float(self.values[0])
        if k >= len(self.values):
            return 0.0
        return float(self.values[k])


def cumulative(h: DegreeHistogram) -> CumulativeDistribution:
    mean = h.mean
    top = max(h.max_degree, 3)
    tail = np.cumsum(mean[::-1])[::-1]
    degrees = np.arange(3, top + 1)
    if len(tail) <= top:
        tail = np.concatenate([tail, np.zeros(top + 1 - len(tail))])
    return CumulativeDistribution(degrees, tail[3:top + 1])


def log_binned(h: DegreeHistogram, base: float = 2.0):
    """Mean node density per unit degree in geometric bins ``[b^k, b^(k+1))``."""
    mean = h.mean
    edges = [3]
    while edges[-1] <= h.max_degree:
        edges.append(max(edges[-1] + 1, int(math.ceil(edges[-1] * base))))
    centers, density = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        centers.append(math.sqrt(lo * (hi - 1)) if hi - 1 > lo else float(lo))
        density.append(float(mean[lo:hi].sum()) / (hi - lo))
    return np.array(edges), np.array(centers), np.array(density)


# ----------------------------------------------------------------------
# fits


@dataclass(frozen=True)
class FitResult:
    model: str
    slope: float
    intercept: float
    residual: float
    d_lo: int
    d_hi: int
    points: int


def default_window(n: int) -> tuple[int, int]:
    """``[6, floor((50 n)^(1/4))]``: skips the degree-3 deficit and the lacunary tail."""
    return 6, int(math.floor((50 * n) ** 0.25))


def _fit(c: CumulativeDistribution, window, model):
    lo, hi = int(window[0]), int(window[1])
    if hi < lo:
        raise FitError(f"empty window [{lo}, {hi}]")
    mask = (c.degrees >= lo) & (c.degrees <= hi) & (c.values > 0)
    x = c.degrees[mask].astype(float)
    y = np.log(c.values[mask])
    if len(x) < 3:
        raise FitError(f"need at least 3 nonzero points in [{lo}, {hi}], have {len(x)}")
    if model == "log-log":
        x = np.log(x)
    slope, intercept = np.polyfit(x, y, 1)
    resid = float(((y - (slope * x + intercept)) ** 2).sum())
    return FitResult(model, float(slope), float(intercept), resid, lo, hi, len(x))


def fit_loglog(c: CumulativeDistribution, window=None, n=None) -> FitResult:
    """Least squares of log d(i) on log i; the slope is the cumulative exponent."""
    if window is None:
        window = default_window(n if n is not None else int(c.values[0]))
    return _fit(c, window, "log-log")


def fit_loglinear(c: CumulativeDistribution, window=None, n=None) -> FitResult:
    """Least squares of log d(i) on i (exponential tail)."""
    if window is None:
        window = default_window(n if n is not None else int(c.values[0]))
    return _fit(c, window, "log-linear")


# ----------------------------------------------------------------------
# curvature and correlations


def forman_curvature_sum(T: Triangulation) -> int:
    """sum_i d_i^2 - 5 d_i, recomputed from the degrees."""
    d = T.size[1:].astype(np.int64)
    return int((d * d - 5 * d).sum())


def forman_curvature_tracked(T: Triangulation) -> int:
    """Same quantity from the incrementally maintained sum of squared degrees."""
    return T.sum_squared_degrees() - 5 * (6 * T.n - 12)


@dataclass
class NeighborDegreeStats:
    joint: dict
    correlation: float | None

    @property
    def degenerate(self) -> bool:
        return self.correlation is None

    def marginal(self) -> dict:
        out: dict = {}
        for (i, _), c in self.joint.items():
            out[i] = out.get(i, 0) + c
        return out


def neighbor_degree_stats(T: Triangulation) -> NeighborDegreeStats:
    """Joint counts of (d_i, d_j) over links, both orientations, and their Pearson r."""
    deg = T.size
    a = deg[T.ends[:, 0]]
    b = deg[T.ends[:, 1]]
    x = np.concatenate([a, b])
    y = np.concatenate([b, a])
    joint: dict = {}
    for i, j in zip(x.tolist(), y.tolist()):
        joint[(i, j)] = joint.get((i, j), 0) + 1
    if x.std() == 0:
        return NeighborDegreeStats(joint, None)
    return NeighborDegreeStats(joint, float(np.corrcoef(x, y)[0, 1]))


# ----------------------------------------------------------------------
# observers


@dataclass
class TimeSeries:
    attempts: list = field(default_factory=list)
    curvature: list = field(default_factory=list)
    rejection_rate: list = field(default_factory=list)
    max_degree: list = field(default_factory=list)

    def append(self, attempts, curvature, rejection_rate, max_degree):
        if self.attempts and attempts <= self.attempts[-1]:
            raise ValueError("time series attempts must increase")
        self.attempts.append(int(attempts))
        self.curvature.append(int(curvature))
        self.rejection_rate.append(float(rejection_rate))
        self.max_degree.append(int(max_degree))

    def __len__(self):
        return len(self.attempts)


class RejectionTracker:
    """Records rejected/attempted per window of ``window`` attempts, plus curvature and max degree."""

    def __init__(self, window: int):
        if window < 1:
            raise ValueError("window must be >= 1")
        self.every = int(window)
        self.series = TimeSeries()
        self.window_attempts: list = []
        self.window_rejected: list = []
        self._last = None

    def start(self, chain):
        if self._last is None:
            self._last = (chain.attempts, chain.rejected)

    def observe(self, chain):
        a0, r0 = self._last
        da, dr = chain.attempts - a0, chain.rejected - r0
        if da == 0:
            return
        self._last = (chain.attempts, chain.rejected)
        self.window_attempts.append(da)
        self.window_rejected.append(dr)
        self.series.append(chain.attempts, forman_curvature_tracked(chain.T), dr / da,
                           int(chain.T.size.max()))

    def rate_over_last(self, attempts: int) -> float:
        """Rejection fraction over the trailing windows covering ``attempts`` attempts."""
        tot = rej = 0
        for da, dr in zip(reversed(self.window_attempts), reversed(self.window_rejected)):
            if tot >= attempts:
                break
            tot += da
            rej += dr
        return rej / tot


def rejection_tracker(window: int) -> RejectionTracker:
    return RejectionTracker(window)


class DegreeSampler:
    """Time-averaged degree histogram and curvature, sampled every ``every`` attempts."""

    def __init__(self, n: int, every: int):
        self.every = int(every)
        self.hist = DegreeHistogram(np.zeros(8, dtype=np.int64), n, 0)
        self.curvature_total = 0

    def observe(self, chain):
        h = degree_histogram(chain.T)
        h.samples = 1
        self.hist = self.hist.merge(h)
        self.curvature_total += forman_curvature_tracked(chain.T)

    @property
    def mean_curvature(self) -> float:
        return self.curvature_total / self.hist.samples


# ----------------------------------------------------------------------
# CSV


def _num(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_histogram_csv(path, h: DegreeHistogram):
    c = cumulative(h)
    mean = h.mean
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["degree", "count", "cumulative_ge"])
        for d, cum in zip(c.degrees.tolist(), c.values.tolist()):
            count = mean[d] if d < len(mean) else 0.0
            if h.samples == 1:
                w.writerow([d, _num(int(count)), _num(int(cum))])
            else:
                w.writerow([d, _num(float(count)), _num(float(cum))])


def write_timeseries_csv(path, ts: TimeSeries):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["attempts", "curvature", "rejection_rate", "max_degree"])
        for row in zip(ts.attempts, ts.curvature, ts.rejection_rate, ts.max_degree):
            w.writerow([_num(v) for v in row])


def write_fits_csv(path, fits):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "d_lo", "d_hi", "slope", "intercept", "residual"])
        for f in fits:
            w.writerow([f.model, f.d_lo, f.d_hi, _num(f.slope), _num(f.intercept), _num(f.residual)])
