"""Phase-space reconstruction by the method of delays.

A scalar series s is lifted to m-dimensional points
    p[k] = (s[k], s[k+lag], ..., s[k+(m-1)*lag]),
which, by Takens' theorem, reconstructs a trajectory topologically
equivalent to the attractor of the underlying system.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConstantSeries, PreconditionViolation, SeriesTooShort
from .signal_io import TimeSeries


@dataclass(eq=False)
class Trajectory:
    """Ordered sequence of n-dimensional state points.

    Attributes:
        points: (N, dim) float array, all finite, N >= 2.
        dim: number of state coordinates.
        source: provenance text (e.g. "delay_embed(x3, dim=3, lag=7)").
    """

    points: np.ndarray
    dim: int
    source: str = ""

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim == 1:
            self.points = self.points[:, None]
        if self.points.shape[0] < 2:
            raise PreconditionViolation("a trajectory needs at least 2 points")
        if self.points.shape[1] != self.dim:
            raise PreconditionViolation(
                f"points have {self.points.shape[1]} coordinates, expected dim={self.dim}"
            )
        if not np.all(np.isfinite(self.points)):
            raise PreconditionViolation("trajectory coordinates must all be finite")
        self.points.setflags(write=False)

    def __len__(self):
        return self.points.shape[0]


def delay_embed(ts: TimeSeries, dim: int, lag: int) -> Trajectory:
    """Embed a scalar series into ``dim`` dimensions with the given delay.

    Point k is (s[k], s[k+lag], ..., s[k+(dim-1)*lag]); the result has
    len(ts) - (dim-1)*lag points.

    Raises:
        SeriesTooShort: if len(ts) < (dim-1)*lag + 2.
    """
    if dim < 1:
        raise PreconditionViolation("dim must be >= 1")
    if lag < 1:
        raise PreconditionViolation("lag must be >= 1")
    required = (dim - 1) * lag + 2
    if len(ts) < required:
        raise SeriesTooShort(len(ts), required)
    n = len(ts) - (dim - 1) * lag
    points = np.empty((n, dim))
    for j in range(dim):
        points[:, j] = ts.samples[j * lag : j * lag + n]
    return Trajectory(points, dim, source=f"delay_embed({ts.label}, dim={dim}, lag={lag})")


def autocorrelation(samples: np.ndarray, max_lag: int) -> np.ndarray:
    """Autocorrelation r[0..max_lag] with mean removal, biased normalization."""
    x = np.asarray(samples, dtype=float)
    x = x - x.mean()
    denom = float(np.dot(x, x))
    if denom == 0.0:
        raise ConstantSeries("autocorrelation undefined for a constant series")
    r = np.empty(max_lag + 1)
    for tau in range(max_lag + 1):
        r[tau] = np.dot(x[: len(x) - tau], x[tau:]) / denom
    return r


def estimate_lag(ts: TimeSeries) -> int:
    """Pick an embedding delay from the series' autocorrelation.

    Returns the smallest positive lag where the autocorrelation first
    crosses zero; failing that, the lag of its first local minimum;
    failing that, 1. Lags are scanned up to a quarter of the series length,
    beyond which the biased estimate is unreliable.

    Raises:
        SeriesTooShort: fewer than 8 samples.
        ConstantSeries: the series has no variation.
    """
    if len(ts) < 8:
        raise SeriesTooShort(len(ts), 8)
    max_lag = max(2, len(ts) // 4)
    r = autocorrelation(ts.samples, max_lag)
    for tau in range(1, max_lag + 1):
        if r[tau] <= 0.0:
            return tau
    for tau in range(1, max_lag):
        if r[tau] < r[tau - 1] and r[tau] < r[tau + 1]:
            return tau
    return 1


def write_trajectory(path, traj: Trajectory):
    """Export a trajectory as CSV with one point per row, columns x1..xn."""
    header = ",".join(f"x{j + 1}" for j in range(traj.dim))
    rows = "\n".join(",".join(repr(float(v)) for v in p) for p in traj.points)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(header + "\n" + rows + "\n")
    return path


def read_trajectory(path, source="") -> Trajectory:
    """Load a trajectory written by :func:`write_trajectory`."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return Trajectory(data, data.shape[1], source=source or str(path))
