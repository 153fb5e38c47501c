"""Marker placement and fragment extraction on a trajectory.

Markers go on strict local extrema of each coordinate plus evenly spaced
fill-in points on runs without extrema; candidate fragments are all marker
pairs whose raw length (contour point count, end - start + 1) falls inside
configured bounds. Each candidate is then resampled to a fixed number of
points, equally spaced along the polyline's arc length, so fragments of
different raw lengths can be compared point-for-point.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import peak_prominences

from .errors import PreconditionViolation, ZeroLengthFragment
from .embedding import Trajectory


@dataclass(eq=False)
class MarkerList:
    """Strictly increasing trajectory indices with a tag per marker.

    Tags are "extremum:<j>" for a strict local extremum of coordinate j
    (0-based, lowest coordinate wins when several qualify) or "spacing"
    for evenly distributed fill-in markers and the forced endpoints.
    """

    indices: np.ndarray
    kinds: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=int)
        if len(self.indices) and np.any(np.diff(self.indices) <= 0):
            raise PreconditionViolation("marker indices must be strictly increasing")
        if len(self.kinds) != len(self.indices):
            raise PreconditionViolation("one kind per marker index required")
        self.indices.setflags(write=False)

    def __len__(self):
        return len(self.indices)


@dataclass(eq=False)
class Fragment:
    """A contiguous trajectory slice plus its fixed-size resampled image.

    raw_len counts original contour points (end - start + 1); ``points``
    holds the m_pts x n resampled coordinates.
    """

    start: int
    end: int
    points: np.ndarray

    def __post_init__(self):
        if not self.start < self.end:
            raise PreconditionViolation("fragment needs start < end")
        self.points = np.asarray(self.points, dtype=float)
        if not np.all(np.isfinite(self.points)):
            raise PreconditionViolation("fragment points must be finite")
        self.points.setflags(write=False)

    @property
    def raw_len(self):
        return self.end - self.start + 1


def _strict_extrema(x):
    """Indices of strict local maxima and minima of a 1-D array."""
    left, mid, right = x[:-2], x[1:-1], x[2:]
    maxima = np.flatnonzero((mid > left) & (mid > right)) + 1
    minima = np.flatnonzero((mid < left) & (mid < right)) + 1
    return maxima, minima


def place_markers(traj: Trajectory, prominence: float = 0.0, spacing: int = 10) -> MarkerList:
    """Mark extrema of every coordinate and fill monotone runs evenly.

    The result is the deduplicated union of (a) strict local extrema of any
    coordinate whose prominence reaches the threshold and (b) every
    ``spacing``-th index inside runs that have no extremum marker, with the
    two endpoints always present.
    """
    if len(traj) < 3:
        raise PreconditionViolation("marker placement needs at least 3 points")
    if spacing < 2:
        raise PreconditionViolation("spacing must be at least 2")

    n_pts = len(traj)
    kind_of = {}
    for j in range(traj.dim):
        x = traj.points[:, j]
        maxima, minima = _strict_extrema(x)
        for idxs, sign in ((maxima, 1.0), (minima, -1.0)):
            if len(idxs) == 0:
                continue
            if prominence > 0:
                proms = peak_prominences(sign * x, idxs)[0]
                idxs = idxs[proms >= prominence]
            for i in idxs:
                kind_of.setdefault(int(i), f"extremum:{j}")

    anchors = sorted(set(kind_of) | {0, n_pts - 1})
    for a, b in zip(anchors[:-1], anchors[1:]):
        for i in range(a + spacing, b, spacing):
            kind_of.setdefault(i, "spacing")
    kind_of.setdefault(0, "spacing")
    kind_of.setdefault(n_pts - 1, "spacing")

    indices = sorted(kind_of)
    return MarkerList(np.array(indices), [kind_of[i] for i in indices])


def enumerate_fragments(markers: MarkerList, lmin: int | None = None,
                        lmax: int | None = None) -> list[tuple[int, int]]:
    """All ordered marker pairs whose raw length lies within the bounds.

    Bounds are in original contour points (end - start + 1); pass None to
    disable either bound, in which case the count is exactly n*(n-1)/2 for
    n markers. Pairs come out in lexicographic order.
    """
    if lmin is not None and lmax is not None and lmin > lmax:
        raise PreconditionViolation("lmin must not exceed lmax")
    idx = markers.indices
    lo = 2 if lmin is None else max(lmin, 2)
    hi = None if lmax is None else lmax
    pairs = []
    for i in range(len(idx) - 1):
        for j in range(i + 1, len(idx)):
            raw = int(idx[j]) - int(idx[i]) + 1
            if raw < lo:
                continue
            if hi is not None and raw > hi:
                break  # indices increase with j, so later pairs are longer
            pairs.append((int(idx[i]), int(idx[j])))
    return pairs


def resample_fragment(traj: Trajectory, start: int, end: int, m_pts: int) -> Fragment:
    """Resample the contour slice [start, end] to m_pts points.

    Points are placed at parameters equally spaced along the polyline's
    cumulative arc length; the first and last resampled points are the raw
    endpoints, bit-exactly.

    Raises:
        ZeroLengthFragment: all slice points coincide (zero arc length).
    """
    if not (0 <= start < end < len(traj)):
        raise PreconditionViolation(
            f"fragment [{start}, {end}] out of bounds for {len(traj)} points"
        )
    if m_pts < 2:
        raise PreconditionViolation("m_pts must be at least 2")
    raw = traj.points[start : end + 1]
    seg = np.linalg.norm(np.diff(raw, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = cum[-1]
    if total == 0.0:
        raise ZeroLengthFragment(f"fragment [{start}, {end}] has zero arc length")

    keep = np.concatenate([[True], seg > 0])  # drop duplicate knots for interp
    knots, values = cum[keep], raw[keep]
    targets = np.linspace(0.0, total, m_pts)
    points = np.column_stack([np.interp(targets, knots, values[:, j])
                              for j in range(raw.shape[1])])
    points[0] = raw[0]
    points[-1] = raw[-1]
    return Fragment(start, end, points)


def intervals_overlap(a: tuple[int, int], b: tuple[int, int]) -> bool:
    """True iff the two [start, end] index intervals intersect."""
    return a[0] <= b[1] and b[0] <= a[1]


def write_fragment_points(path, frag: Fragment):
    """Export a fragment's resampled points as CSV (columns x1..xn)."""
    n = frag.points.shape[1]
    header = ",".join(f"x{j + 1}" for j in range(n))
    rows = "\n".join(",".join(repr(float(v)) for v in p) for p in frag.points)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(header + "\n" + rows + "\n")
    return path
