"""Similarity-invariant canonical form of a fragment.

A fragment is reduced to a descriptor by a sequence of homogeneous
transformations: translate the main axis start to the origin, rotate the
axis onto the first coordinate axis with plane (Givens) rotations, repeat
for secondary axes on the residual coordinate subspace, center the bounding
box, and scale so the main axis has length 1. Two fragments related by a
translation + rotation + positive scaling map to the same descriptor, and
the recorded matrix chain converts one fragment's frame into another's.

Convention: points are row vectors, appended with a homogeneous 1, and
transforms act by right-multiplication, so every matrix here is
(n+1) x (n+1) with last column (0, ..., 0, 1)^T.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateFragment,
    PreconditionViolation,
    RankDeficientAxis,
    ShapeMismatch,
    SingularTransform,
)

AXIS_EPS = 1e-12          # below this max pairwise distance a fragment is degenerate
ROTATION_RESIDUAL = 1e-6  # allowed off-axis magnitude after alignment, relative


@dataclass(eq=False)
class Descriptor:
    """Normalized fragment image plus the transform that produced it.

    Attributes:
        points: m_pts x n matrix; main axis has length 1 and lies on the
            first coordinate axis, bounding box centered at the origin.
        norm_transform: (n+1) x (n+1) homogeneous matrix; appending 1 to the
            raw fragment rows and right-multiplying reproduces ``points``.
        axis_pair: (i, j) row indices (i < j) of the main-axis endpoints.
    """

    points: np.ndarray
    norm_transform: np.ndarray
    axis_pair: tuple[int, int]

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        self.norm_transform = np.asarray(self.norm_transform, dtype=float)
        self.points.setflags(write=False)
        self.norm_transform.setflags(write=False)

    @property
    def m_pts(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]


def translation_matrix(offset) -> np.ndarray:
    """Homogeneous matrix adding ``offset`` to every point."""
    offset = np.asarray(offset, dtype=float)
    n = len(offset)
    m = np.eye(n + 1)
    m[n, :n] = offset
    return m


def scaling_matrix(factor: float, n: int) -> np.ndarray:
    """Homogeneous matrix scaling all n coordinates by ``factor``."""
    m = np.eye(n + 1)
    m[:n, :n] *= factor
    return m


def rotation_matrix(n: int, i: int, j: int, angle: float) -> np.ndarray:
    """Homogeneous plane rotation by ``angle`` in the (i, j) coordinate plane.

    Right-multiplication rotates row vectors from axis i toward axis j.
    """
    c, s = np.cos(angle), np.sin(angle)
    m = np.eye(n + 1)
    m[i, i] = c
    m[i, j] = s
    m[j, i] = -s
    m[j, j] = c
    return m


def to_homogeneous(points: np.ndarray) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    return np.hstack([points, np.ones((points.shape[0], 1))])


def find_axis(points, min_coord: int = 0) -> tuple[int, int]:
    """Row indices (i, j), i < j, of the farthest point pair.

    Distances are measured over coordinates min_coord..n-1; ties resolve to
    the smallest i, then smallest j.

    Raises:
        DegenerateFragment: the largest distance is below 1e-12.
    """
    pts = np.asarray(points, dtype=float)[:, min_coord:]
    if pts.shape[0] < 2:
        raise PreconditionViolation("need at least 2 points to find an axis")
    sq = np.sum(pts * pts, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (pts @ pts.T)
    d2 = np.triu(d2, k=1)  # keep i < j; argmax scans row-major -> smallest (i, j)
    flat = int(np.argmax(d2))
    i, j = divmod(flat, pts.shape[0])
    if d2[i, j] < AXIS_EPS ** 2:
        raise DegenerateFragment("all points coincide; no axis can be found")
    return i, j


def _fragment_points(fragment) -> np.ndarray:
    pts = getattr(fragment, "points", fragment)
    pts = np.asarray(pts, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 2:
        raise PreconditionViolation("expected an m x n point matrix with m >= 2")
    return pts


def normalize(fragment) -> Descriptor:
    """Reduce a fragment (or bare m x n point matrix) to its descriptor.

    Raises:
        DegenerateFragment: no axis exists (all points coincide).
        RankDeficientAxis: internal failure, rotation left the axis with
            off-axis residual above tolerance.
    """
    raw = _fragment_points(fragment)
    m_count, n = raw.shape
    ph = to_homogeneous(raw)
    m_norm = np.eye(n + 1)
    axis_pair = None

    # one alignment stage per axis; n = 1 still needs the axis + translation
    for k in range(max(1, n - 1)):
        try:
            i, j = find_axis(ph[:, :n], min_coord=k)
        except DegenerateFragment:
            if k == 0:
                raise
            break  # residual subspace already flat; nothing left to align
        if k == 0:
            axis_pair = (i, j)

        shift = translation_matrix(-ph[i, :n])
        ph = ph @ shift
        m_norm = m_norm @ shift

        for p in range(n - 1, k, -1):
            angle = np.arctan2(ph[j, p], ph[j, k])
            rot = rotation_matrix(n, k, p, -angle)
            ph = ph @ rot
            m_norm = m_norm @ rot

        off_axis = np.linalg.norm(ph[j, k + 1 : n])
        if off_axis > ROTATION_RESIDUAL * max(abs(ph[j, k]), AXIS_EPS):
            raise RankDeficientAxis(
                f"axis alignment left off-axis residual {off_axis:.3e} at stage {k}"
            )

    lo = ph[:, :n].min(axis=0)
    hi = ph[:, :n].max(axis=0)
    center = translation_matrix(-(lo + hi) / 2.0)
    ph = ph @ center
    m_norm = m_norm @ center

    axis_len = hi[0] - lo[0]  # the main axis attains the first-coordinate extent
    if axis_len < AXIS_EPS:
        raise DegenerateFragment("main axis has zero length")
    scale = scaling_matrix(1.0 / axis_len, n)
    ph = ph @ scale
    m_norm = m_norm @ scale

    return Descriptor(ph[:, :n].copy(), m_norm, axis_pair)


def invert_transform(m: np.ndarray) -> np.ndarray:
    """Inverse of a homogeneous transform, checked for conditioning.

    Raises:
        SingularTransform: the inverse fails the M @ M^-1 = I residual test.
    """
    try:
        inv = np.linalg.inv(m)
    except np.linalg.LinAlgError as exc:
        raise SingularTransform(str(exc)) from None
    residual = np.max(np.abs(m @ inv - np.eye(m.shape[0])))
    if not np.isfinite(residual) or residual > 1e-6:
        raise SingularTransform(f"inversion residual {residual:.3e} above tolerance")
    return inv


def transform_between(a: Descriptor, b: Descriptor) -> np.ndarray:
    """Homogeneous matrix taking raw fragment A's points into B's raw frame.

    Composition-consistent: transform_between(a, c) equals
    transform_between(a, b) @ transform_between(b, c) up to rounding.
    """
    if a.points.shape != b.points.shape:
        raise ShapeMismatch(
            f"descriptors have shapes {a.points.shape} and {b.points.shape}"
        )
    return a.norm_transform @ invert_transform(b.norm_transform)


def apply_transform(points: np.ndarray, m: np.ndarray) -> np.ndarray:
    """Apply a homogeneous transform to an m x n point matrix."""
    return (to_homogeneous(points) @ m)[:, :-1]
