"""spectral: DFT signatures and the weighted spectral distance."""

import cmath
import math

import numpy as np
import pytest

from symid.errors import PreconditionViolation, ShapeMismatch
from symid.geometry import normalize
from symid.spectral import (
    DistanceWeights,
    SpectralSignature,
    dft_descriptor,
    dft_points,
    distance,
    inverse_dft,
)


# --- independent reference routines (plain Python, no numpy vectorization) ---

def ref_dft(points):
    """Direct-sum DFT per coordinate; returns list of lists of complex."""
    m = len(points)
    n = len(points[0])
    spectra = []
    for d in range(n):
        spectrum = []
        for k in range(m):
            acc = 0j
            for p in range(m):
                acc += points[p][d] * cmath.exp(-2j * cmath.pi * k * p / m)
            spectrum.append(acc)
        spectra.append(spectrum)
    return spectra


def ref_distance(spec_a, spec_b, betas):
    """Brute-force evaluation of the weighted conjugate-pair distance."""
    n = len(spec_a)
    total = 0.0
    for i, beta in enumerate(betas, start=1):
        sum_im = 0.0
        sum_re = 0.0
        for d in range(n):
            sum_im += (spec_b[d][i].imag - spec_a[d][i].imag) ** 2
            sum_re += (spec_b[d][i].real - spec_a[d][i].real) ** 2
        total += (math.sqrt(sum_im) + math.sqrt(sum_re)) * beta
    return total


def _sig(points):
    return dft_points(np.asarray(points, dtype=float))


def _random_descriptor_points(rng, m=60, n=3):
    walk = np.cumsum(rng.normal(size=(m, n)), axis=0)
    return normalize(walk).points


class TestDft:
    def test_constant_coordinate_dc_only(self):
        c = 2.75
        sig = _sig(np.full((8, 1), c))
        assert abs(sig.coeffs[0, 0] - 8 * c) < 1e-12
        assert np.max(np.abs(sig.coeffs[0, 1:])) < 1e-12

    def test_round_trip(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            pts = _random_descriptor_points(rng)
            back = inverse_dft(_sig(pts))
            assert np.max(np.abs(back - pts)) < 1e-9

    def test_parseval(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            pts = _random_descriptor_points(rng)
            sig = _sig(pts)
            # both sides computed independently of each other
            lhs = np.sum(pts * pts)
            rhs = np.sum(np.abs(sig.coeffs) ** 2) / pts.shape[0]
            assert abs(lhs - rhs) < 1e-9 * max(1.0, abs(lhs))

    def test_matches_reference_dft(self):
        rng = np.random.default_rng(2)
        pts = rng.normal(size=(12, 2))
        ours = _sig(pts).coeffs
        ref = ref_dft(pts.tolist())
        for d in range(2):
            for k in range(12):
                assert abs(ours[d, k] - ref[d][k]) < 1e-9

    def test_conjugate_pair_structure(self):
        rng = np.random.default_rng(3)
        pts = rng.normal(size=(16, 3))
        coeffs = _sig(pts).coeffs
        for d in range(3):
            for k in range(1, 16):
                assert abs(coeffs[d, k] - np.conj(coeffs[d, 16 - k])) < 1e-9

    def test_dft_descriptor_equals_dft_points(self):
        rng = np.random.default_rng(4)
        desc = normalize(np.cumsum(rng.normal(size=(20, 2)), axis=0))
        assert np.array_equal(dft_descriptor(desc).coeffs, dft_points(desc.points).coeffs)


class TestDistance:
    def test_zero_on_self_exact(self):
        rng = np.random.default_rng(5)
        sig = _sig(_random_descriptor_points(rng))
        w = DistanceWeights.default(60)
        assert distance(sig, sig, w) == 0.0

    def test_symmetry_exact(self):
        rng = np.random.default_rng(6)
        a = _sig(_random_descriptor_points(rng))
        b = _sig(_random_descriptor_points(rng))
        w = DistanceWeights.default(60)
        assert distance(a, b, w) == distance(b, a, w)

    def test_hand_case_four_points(self):
        a = _sig(np.array([[0.0], [1.0], [0.0], [-1.0]]))
        b = _sig(np.zeros((4, 1)))
        w = DistanceWeights(1, np.array([1.0]))
        ref = ref_distance(ref_dft([[0.0], [1.0], [0.0], [-1.0]]),
                           ref_dft([[0.0], [0.0], [0.0], [0.0]]), [1.0])
        ours = distance(a, b, w)
        assert abs(ours - ref) < 1e-12
        assert abs(ours - 2.0) < 1e-12  # |Im| difference of bin 1 is 2, Re is 0

    def test_matches_reference_on_random_pairs(self):
        rng = np.random.default_rng(7)
        w = DistanceWeights.default(60, q=5)
        for _ in range(10):
            pa = _random_descriptor_points(rng)
            pb = _random_descriptor_points(rng)
            ours = distance(_sig(pa), _sig(pb), w)
            ref = ref_distance(ref_dft(pa.tolist()), ref_dft(pb.tolist()), list(w.betas))
            assert abs(ours - ref) < 1e-9

    def test_triangle_inequality(self):
        rng = np.random.default_rng(8)
        w = DistanceWeights.default(60)
        for _ in range(50):
            sigs = [_sig(_random_descriptor_points(rng)) for _ in range(3)]
            dab = distance(sigs[0], sigs[1], w)
            dbc = distance(sigs[1], sigs[2], w)
            dac = distance(sigs[0], sigs[2], w)
            assert dac <= dab + dbc + 1e-12

    def test_monotone_in_pairs(self):
        rng = np.random.default_rng(9)
        a = _sig(_random_descriptor_points(rng))
        b = _sig(_random_descriptor_points(rng))
        prev = 0.0
        for q in range(1, 11):
            w = DistanceWeights(q, np.ones(q))
            val = distance(a, b, w)
            assert val >= prev
            prev = val

    def test_low_frequency_dominance(self):
        # equal-size bumps on the lowest and highest retained pairs: with
        # strictly decreasing weights the low-frequency bump must cost more
        m, n, q = 60, 2, 8
        w = DistanceWeights(q, 2.0 ** -np.arange(q))
        base = np.zeros((n, m), dtype=complex)
        lo = base.copy()
        lo[:, 1] += 1.0 + 1.0j
        hi = base.copy()
        hi[:, q] += 1.0 + 1.0j
        d_lo = distance(SpectralSignature(base), SpectralSignature(lo), w)
        d_hi = distance(SpectralSignature(base), SpectralSignature(hi), w)
        assert d_hi < d_lo

    def test_pair_uses_positive_frequency_bin(self):
        # perturbing the conjugate (negative-frequency) member must not
        # change the distance: pair i reads bin i only
        m = 16
        base = np.zeros((1, m), dtype=complex)
        tweaked = base.copy()
        tweaked[0, m - 1] += 3.0 - 2.0j  # conjugate partner of bin 1
        w = DistanceWeights(3, np.array([1.0, 0.5, 0.25]))
        assert distance(SpectralSignature(base), SpectralSignature(tweaked), w) == 0.0

    def test_shape_mismatch(self):
        a = _sig(np.zeros((8, 1)) + np.arange(8)[:, None])
        b = _sig(np.ones((10, 1)) * np.arange(10)[:, None])
        with pytest.raises(ShapeMismatch):
            distance(a, b, DistanceWeights(1, np.array([1.0])))

    def test_q_bounded_by_pairs_available(self):
        a = _sig(np.arange(8.0)[:, None])
        w = DistanceWeights(5, np.ones(5))  # only 3 pairs exist for m=8
        with pytest.raises(PreconditionViolation):
            distance(a, a, w)


class TestDistanceWeights:
    def test_default_schedule(self):
        w = DistanceWeights.default(60)
        assert w.q == 10
        assert np.array_equal(w.betas, 2.0 ** -np.arange(10))
        assert DistanceWeights.default(9).q == 4

    def test_validation(self):
        with pytest.raises(PreconditionViolation):
            DistanceWeights(0, np.array([]))
        with pytest.raises(PreconditionViolation):
            DistanceWeights(2, np.array([1.0, 0.0]))
        with pytest.raises(PreconditionViolation):
            DistanceWeights(2, np.array([1.0]))
