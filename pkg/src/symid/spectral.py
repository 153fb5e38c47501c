"""Fourier signatures of descriptors and the spectral shape distance.

Each descriptor coordinate is mapped through the unnormalized forward DFT
    s[k] = sum_p x[p] * exp(-2*pi*1j * k * p / m),   k = 0..m-1,
so for real input bins k and m-k are complex conjugates. The distance
between two signatures sums, over the first q conjugate pairs, the norms of
the imaginary- and real-part differences across coordinates, each pair
weighted by a positive factor beta_i (typically decreasing, so coarse shape
dominates fine detail). The DC bin carries only the contour position and is
excluded.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PreconditionViolation, ShapeMismatch
from .geometry import Descriptor


@dataclass(eq=False)
class SpectralSignature:
    """Per-coordinate DFT of a descriptor.

    Attributes:
        coeffs: (n, m_pts) complex array; row d is coordinate d's spectrum.
    """

    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        if self.coeffs.ndim != 2:
            raise PreconditionViolation("coeffs must be an (n, m_pts) array")
        self.coeffs.setflags(write=False)

    @property
    def n(self):
        return self.coeffs.shape[0]

    @property
    def m_pts(self):
        return self.coeffs.shape[1]


@dataclass
class DistanceWeights:
    """Number of conjugate pairs compared and their positive weights."""

    q: int
    betas: np.ndarray

    def __post_init__(self):
        self.betas = np.asarray(self.betas, dtype=float)
        if self.q < 1:
            raise PreconditionViolation("q must be at least 1")
        if self.betas.shape != (self.q,):
            raise PreconditionViolation(f"expected exactly {self.q} weights")
        if not np.all(self.betas > 0):
            raise PreconditionViolation("all weights must be positive")
        self.betas.setflags(write=False)

    @classmethod
    def default(cls, m_pts: int, q: int | None = None):
        """Halving weight schedule over min(10, (m_pts-1)//2) pairs."""
        max_q = (m_pts - 1) // 2
        if q is None:
            q = min(10, max_q)
        return cls(q, 2.0 ** -np.arange(q))


def _dft_matrix(m: int) -> np.ndarray:
    k = np.arange(m)
    return np.exp(-2j * np.pi * np.outer(k, k) / m)


def dft_points(points: np.ndarray) -> SpectralSignature:
    """Forward DFT of each column of an (m_pts, n) point matrix."""
    points = np.asarray(points, dtype=float)
    w = _dft_matrix(points.shape[0])
    return SpectralSignature((w @ points).T)


def dft_descriptor(d: Descriptor) -> SpectralSignature:
    """Forward DFT of each descriptor coordinate (unnormalized)."""
    return dft_points(d.points)


def inverse_dft(sig: SpectralSignature) -> np.ndarray:
    """Reconstruct descriptor points from a signature (1/m inverse DFT)."""
    m = sig.m_pts
    w = np.conj(_dft_matrix(m))
    return np.real((w @ sig.coeffs.T) / m)


def _check_pairs(m_pts: int, q: int):
    max_q = (m_pts - 1) // 2
    if q > max_q:
        raise PreconditionViolation(
            f"q={q} exceeds the {max_q} conjugate pairs available for {m_pts} points"
        )


def _stacked_parts(sigs, q):
    """Stack positive-frequency bins 1..q of each signature: (N, q, n) re/im."""
    coeffs = np.stack([s.coeffs for s in sigs])  # (N, n, m)
    block = np.swapaxes(coeffs[:, :, 1 : q + 1], 1, 2)  # (N, q, n)
    return np.ascontiguousarray(block.real), np.ascontiguousarray(block.imag)


def _distance_block(re_a, im_a, re_b, im_b, betas) -> np.ndarray:
    """Weighted spectral distances between two stacked signature blocks.

    Reductions over the pair and coordinate axes are unrolled into
    elementwise operations so every entry sees the same floating-point
    operation order regardless of block shape; distances are then bitwise
    identical whether computed singly, in chunks, or as a full matrix.
    """
    d_re = re_b[None, :] - re_a[:, None]  # (NA, NB, q, n)
    d_im = im_b[None, :] - im_a[:, None]
    sq_re = d_re * d_re
    sq_im = d_im * d_im
    out = np.zeros(d_re.shape[:2])
    for i in range(d_re.shape[2]):
        acc_re = sq_re[:, :, i, 0].copy()
        acc_im = sq_im[:, :, i, 0].copy()
        for j in range(1, d_re.shape[3]):
            acc_re += sq_re[:, :, i, j]
            acc_im += sq_im[:, :, i, j]
        out += betas[i] * (np.sqrt(acc_im) + np.sqrt(acc_re))
    return out


def distance(a: SpectralSignature, b: SpectralSignature, w: DistanceWeights) -> float:
    """Symmetry-breaking distance between two signatures.

    Zero iff the compared spectral bins agree; symmetric; satisfies the
    triangle inequality (a weighted sum of seminorms of differences).

    Raises:
        ShapeMismatch: signatures differ in dimension or point count.
    """
    if a.coeffs.shape != b.coeffs.shape:
        raise ShapeMismatch(f"signature shapes {a.coeffs.shape} != {b.coeffs.shape}")
    _check_pairs(a.m_pts, w.q)
    re_a, im_a = _stacked_parts([a], w.q)
    re_b, im_b = _stacked_parts([b], w.q)
    return float(_distance_block(re_a, im_a, re_b, im_b, w.betas)[0, 0])
