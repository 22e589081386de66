import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from mimodab import (RngStream, poly_positive_real_roots, pseudo_inverse,
                     sample_circular_gaussian)


class TestPolyRoots:
    def test_cube_root(self):
        # xi^3 - 8 = 0
        roots = poly_positive_real_roots([-8.0, 0.0, 0.0, 1.0])
        assert_allclose(roots, [2.0], rtol=1e-12)

    def test_no_real_roots(self):
        roots = poly_positive_real_roots([1.0, 0.0, 1.0])
        assert roots.size == 0

    def test_three_roots_ascending(self):
        # (xi-1)(xi-2)(xi-3) = xi^3 - 6 xi^2 + 11 xi - 6
        roots = poly_positive_real_roots([-6.0, 11.0, -6.0, 1.0])
        assert_allclose(roots, [1.0, 2.0, 3.0], rtol=1e-9)

    def test_negative_roots_excluded(self):
        # (xi+1)(xi-2)
        roots = poly_positive_real_roots([-2.0, -1.0, 1.0])
        assert_allclose(roots, [2.0], rtol=1e-12)

    def test_degree_zero_rejected(self):
        with pytest.raises(ValueError):
            poly_positive_real_roots([1.0])
        with pytest.raises(ValueError):
            poly_positive_real_roots([0.0, 0.0])

    def test_random_factored_polynomials_recovered(self):
        # distinct positive roots spread over [1e-3, 1e3]
        rng = np.random.default_rng(11)
        for _ in range(30):
            deg = rng.integers(2, 5)
            while True:
                r = 10.0 ** rng.uniform(-3, 3, size=deg)
                if np.min(np.diff(np.sort(r))) > 0.1 * np.min(r):
                    break
            coeffs = np.array([1.0])
            for root in r:
                coeffs = np.polynomial.polynomial.polymul(coeffs,
                                                          [-root, 1.0])
            got = poly_positive_real_roots(coeffs)
            assert got.size == deg
            assert_allclose(got, np.sort(r), rtol=1e-6)


class TestRngStream:
    def test_same_key_same_sequence(self):
        a = RngStream(42, 3).gen.standard_normal(16)
        b = RngStream(42, 3).gen.standard_normal(16)
        assert_array_equal(a, b)

    def test_different_streams_differ(self):
        a = RngStream(42, 0).gen.standard_normal(16)
        b = RngStream(42, 1).gen.standard_normal(16)
        assert not np.array_equal(a, b)

    def test_derive_reproducible_and_independent(self):
        base = RngStream(5, 2)
        a = base.derive(7).gen.standard_normal(8)
        b = RngStream(5, 2).derive(7).gen.standard_normal(8)
        assert_array_equal(a, b)
        c = base.derive(8).gen.standard_normal(8)
        assert not np.array_equal(a, c)


class TestCircularGaussian:
    def test_zero_variance(self):
        z = sample_circular_gaussian(10, 0.0, RngStream(1, 0))
        assert_array_equal(z, np.zeros(10, complex))

    def test_negative_variance_rejected(self):
        with pytest.raises(ValueError):
            sample_circular_gaussian(4, -1.0, RngStream(1, 0))

    def test_determinism(self):
        a = sample_circular_gaussian(32, 1.0, RngStream(9, 4))
        b = sample_circular_gaussian(32, 1.0, RngStream(9, 4))
        assert_array_equal(a, b)

    def test_moments(self):
        z = sample_circular_gaussian(10**6, 1.0, RngStream(3, 0))
        var = np.mean(np.abs(z) ** 2)
        assert 0.995 <= var <= 1.005
        # fourth moment of CN(0,1) is 2; it drives the distortion formulas
        m4 = np.mean(np.abs(z) ** 4)
        assert abs(m4 - 2.0) <= 0.02
        # components are each N(0, 1/2)
        assert abs(np.mean(z.real ** 2) - 0.5) < 0.005
        assert abs(np.mean(z.real)) < 0.005

    def test_shape_tuple(self):
        z = sample_circular_gaussian((3, 4), 2.0, RngStream(1, 1))
        assert z.shape == (3, 4)

    def test_broadcast_variance(self):
        v = np.array([0.0, 4.0])
        z = sample_circular_gaussian((2, 1000), v[:, None], RngStream(1, 2))
        assert_array_equal(z[0], np.zeros(1000, complex))
        assert abs(np.mean(np.abs(z[1]) ** 2) - 4.0) < 0.5


class TestPseudoInverse:
    def test_identity(self):
        assert_allclose(pseudo_inverse(np.eye(4)), np.eye(4), atol=1e-12)

    def test_rank_deficient_diagonal(self):
        a = np.diag([2.0, 0.0])
        assert_allclose(pseudo_inverse(a), np.diag([0.5, 0.0]), atol=1e-12)

    def test_reconstruction(self):
        rng = np.random.default_rng(2)
        a = rng.standard_normal((8, 4)) + 1j * rng.standard_normal((8, 4))
        ap = pseudo_inverse(a)
        assert_allclose(ap @ a, np.eye(4), atol=1e-9)
        assert np.linalg.norm(a @ ap @ a - a) <= 1e-9 * np.linalg.norm(a)

    def test_involution(self):
        rng = np.random.default_rng(3)
        a = rng.standard_normal((6, 3)) + 1j * rng.standard_normal((6, 3))
        back = pseudo_inverse(pseudo_inverse(a))
        assert np.linalg.norm(back - a) <= 1e-8 * np.linalg.norm(a)

    def test_zero_matrix_rejected(self):
        with pytest.raises(ValueError):
            pseudo_inverse(np.zeros((3, 3)))

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            pseudo_inverse(np.zeros((0, 2)))

    def test_nonfinite_rejected(self):
        a = np.eye(2, dtype=complex)
        a[0, 0] = np.nan
        with pytest.raises(ValueError):
            pseudo_inverse(a)
