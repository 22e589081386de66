import numpy as np
import pytest
from numpy.testing import assert_allclose

from mimodab import (PaArrayModel, PaModel, distortion_covariance,
                     is_distortion_degenerate, los_channel, measured_pa_array,
                     mrt, zero_distortion_array, zero_distortion_pair, zf)
from mimodab.bussgang import distortion_factor


def third_order_array(beta3_list):
    return PaArrayModel([PaModel(np.array([1.0, b3])) for b3 in beta3_list])


class TestMrt:
    def test_conjugate_direction(self):
        h = np.array([[1.0 + 1.0j], [2.0 - 1.0j]])
        p = mrt(h)
        assert_allclose(p, h.conj() / np.linalg.norm(h), rtol=1e-15)

    def test_unit_columns(self):
        rng = np.random.default_rng(50)
        h = rng.standard_normal((8, 3)) + 1j * rng.standard_normal((8, 3))
        p = mrt(h)
        assert_allclose(np.linalg.norm(p, axis=0), np.ones(3), rtol=1e-12)

    def test_vector_channel(self):
        h = los_channel(np.deg2rad(100.0), 4)
        p = mrt(h)
        assert p.shape == (4, 1)
        assert_allclose(p[:, 0], h.conj() / np.linalg.norm(h), rtol=1e-15)

    def test_zero_channel_rejected(self):
        with pytest.raises(ValueError):
            mrt(np.zeros((4, 1), complex))


class TestZf:
    def test_inverts_channel(self):
        rng = np.random.default_rng(51)
        for _ in range(30):
            b = int(rng.integers(2, 17))
            u = int(rng.integers(1, min(b, 4) + 1))
            h = (rng.standard_normal((b, u))
                 + 1j * rng.standard_normal((b, u)))
            p = zf(h)
            assert_allclose(h.T @ p, np.eye(u), atol=1e-12)

    def test_no_interference(self):
        rng = np.random.default_rng(52)
        h = rng.standard_normal((16, 4)) + 1j * rng.standard_normal((16, 4))
        p = zf(h)
        gains = h.T @ p
        off = gains - np.diag(np.diag(gains))
        assert np.max(np.abs(off)) <= 1e-13 * np.min(np.abs(np.diag(gains)))

    def test_rank_deficient_rejected(self):
        h = np.ones((6, 2), dtype=complex)  # coincident users
        with pytest.raises(ValueError, match="rank"):
            zf(h)

    def test_single_user_matches_mrt_direction(self):
        rng = np.random.default_rng(53)
        h = rng.standard_normal((8, 1)) + 1j * rng.standard_normal((8, 1))
        p = zf(h)
        q = mrt(h)
        inner = abs(np.vdot(p, q)) / (np.linalg.norm(p) * np.linalg.norm(q))
        assert_allclose(inner, 1.0, rtol=1e-12)


class TestZeroDistortionPair:
    def test_equal_pas_closed_form(self):
        pa = third_order_array([-0.05, -0.05])
        psi = np.deg2rad(73.0)
        p = zero_distortion_pair(pa, psi)
        assert_allclose(p[0, 0], 1.0, atol=1e-15)
        assert_allclose(p[1, 0], -np.exp(1j * np.pi * np.cos(psi)),
                        rtol=1e-12)

    def test_broadside_equal_pas(self):
        pa = third_order_array([-0.05, -0.05])
        p = zero_distortion_pair(pa, np.pi / 2)
        assert_allclose(p[:, 0], [1.0, -1.0], atol=1e-12)

    def test_magnitude_from_coefficient_ratio(self):
        pa = third_order_array([-0.08, -0.01])  # |ratio| = 8
        p = zero_distortion_pair(pa, np.deg2rad(120.0))
        assert_allclose(abs(p[1, 0]), 2.0, rtol=1e-12)

    def test_needs_two_antennas(self):
        pa = third_order_array([-0.05, -0.05, -0.05])
        with pytest.raises(ValueError):
            zero_distortion_pair(pa, np.pi / 2)

    def test_cubic_response_nulled(self):
        # defining property: sum_b h_b beta3_b p_b |p_b|^2 = 0 at psi
        rng = np.random.default_rng(54)
        for _ in range(100):
            beta3 = 0.05 * (rng.standard_normal(2)
                            + 1j * rng.standard_normal(2))
            if np.any(np.abs(beta3) < 1e-3):
                continue
            pa = third_order_array(beta3)
            psi = rng.uniform(0, np.pi)
            p = zero_distortion_pair(pa, psi)[:, 0]
            h = los_channel(psi, 2)
            resid = np.sum(h * beta3 * p * np.abs(p) ** 2)
            scale = np.sum(np.abs(beta3 * p * np.abs(p) ** 2))
            assert abs(resid) <= 1e-14 * scale


class TestZeroDistortionArray:
    def test_stacks_pairs(self):
        beta3 = np.array([-0.05, -0.02, -0.03, -0.07])
        pa = third_order_array(beta3)
        psi = np.deg2rad(95.0)
        p = zero_distortion_array(pa, psi)
        assert p.shape == (4, 1)
        top = zero_distortion_pair(third_order_array(beta3[:2]), psi)
        assert_allclose(p[:2], top, rtol=1e-14)

    def test_distortion_power_at_user_vanishes(self):
        # received distortion through the full covariance, factored form
        pa = measured_pa_array()
        psi = np.deg2rad(100.0)
        h = los_channel(psi, len(pa))
        p_zd = zero_distortion_array(pa, psi)
        p_mrt = mrt(h)
        lvl = {}
        for name, p in (("zd", p_zd), ("mrt", p_mrt)):
            ps = p * np.sqrt(1.0) / np.linalg.norm(p)
            f = distortion_factor(pa, ps)
            lvl[name] = float(np.sum(np.abs(h @ f) ** 2))
        assert lvl["zd"] <= 1e-12 * lvl["mrt"]

    def test_null_invariant_to_scaling(self):
        pa = measured_pa_array()
        psi = np.deg2rad(100.0)
        h = los_channel(psi, len(pa))
        p = zero_distortion_array(pa, psi)
        for alpha in (0.1, 1.0, 2.0):
            f = distortion_factor(pa, alpha * p)
            full = np.sum(np.abs(h @ distortion_factor(
                pa, alpha * mrt(h))) ** 2)
            assert np.sum(np.abs(h @ f) ** 2) <= 1e-12 * full

    def test_odd_size_rejected(self):
        pa = third_order_array([-0.05, -0.05, -0.05])
        with pytest.raises(ValueError, match="even"):
            zero_distortion_array(pa, np.pi / 2)

    def test_linear_pa_rejected(self):
        pa = PaArrayModel.uniform(2, PaModel(np.array([1.0])))
        with pytest.raises(ValueError):
            zero_distortion_array(pa, np.pi / 2)

    def test_zero_beta3_rejected(self):
        pa = third_order_array([-0.05, 0.0])
        with pytest.raises(ValueError, match="nonzero"):
            zero_distortion_array(pa, np.pi / 2)


class TestDegeneracy:
    def test_equal_pas_degenerate(self):
        pa = third_order_array([-0.05] * 4)
        assert is_distortion_degenerate(pa, np.deg2rad(70.0))

    def test_measured_array_not_degenerate(self):
        pa = measured_pa_array()
        assert not is_distortion_degenerate(pa, np.deg2rad(100.0))

    def test_degenerate_pair_nulls_signal(self):
        pa = third_order_array([-0.05, -0.05])
        psi = np.deg2rad(60.0)
        p = zero_distortion_pair(pa, psi)[:, 0]
        h = los_channel(psi, 2)
        assert abs(np.sum(h * p)) <= 1e-12
