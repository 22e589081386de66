import csv

import numpy as np
import pytest
from numpy.testing import assert_allclose

from mimodab import (PaArrayModel, PaModel, RadiationPattern, ScenarioConfig,
                     decompose, energy_efficiency, los_channel, mrt,
                     radiation_pattern, sindr, sum_rate, sum_rate_of, zf)


def random_pa(n, rng, order=1):
    models = []
    for _ in range(n):
        beta = [1.0 + 0.05 * (rng.standard_normal()
                              + 1j * rng.standard_normal())]
        for k, mag in zip(range(order), (0.05, 0.005)):
            beta.append(mag * rng.uniform(0.3, 1.0)
                        * np.exp(2j * np.pi * rng.uniform()))
        models.append(PaModel(np.array(beta)))
    return PaArrayModel(models)


def linear_pa(n):
    return PaArrayModel.uniform(n, PaModel(np.array([1.0])))


def sindr_oracle(pa, h, p, n0):
    """Straight re-implementation from the definition, one user at a time."""
    dec = decompose(pa, p)
    u_tot = p.shape[1]
    vals = []
    for u in range(u_tot):
        hu = h[:, u]
        sig = abs(np.sum(hu * dec.g * p[:, u])) ** 2
        mui = sum(abs(np.sum(hu * dec.g * p[:, r])) ** 2
                  for r in range(u_tot) if r != u)
        dist = float(np.real(hu @ dec.c_e @ hu.conj()))
        vals.append(sig / (mui + dist + n0))
    return np.array(vals)


class TestScenarioConfig:
    def test_defaults(self):
        sc = ScenarioConfig(n0=1e-3)
        assert sc.rho_tot is None and sc.bandwidth_hz == 1.0

    def test_validation(self):
        with pytest.raises(ValueError):
            ScenarioConfig(n0=0.0)
        with pytest.raises(ValueError):
            ScenarioConfig(n0=1.0, rho_tot=-1.0)
        with pytest.raises(ValueError):
            ScenarioConfig(n0=1.0, rho_tot=2.0, rho_tot_max=1.0)

    def test_ordered_powers_accepted(self):
        sc = ScenarioConfig(n0=1.0, rho_tot=1.0, rho_tot_max=2.0, r0=3.0)
        assert sc.r0 == 3.0


class TestSindr:
    def test_single_user_linear(self):
        pa = linear_pa(2)
        h = np.ones((2, 1), complex)
        p = np.full((2, 1), 0.5, dtype=complex)
        dec = decompose(pa, p)
        out = sindr(dec, h, p, 0.1)
        assert_allclose(out, [10.0], rtol=1e-12)

    def test_scalar_user_selection(self):
        pa = linear_pa(3)
        rng = np.random.default_rng(60)
        h = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
        p = zf(h)
        dec = decompose(pa, p)
        vec = sindr(dec, h, p, 0.5)
        assert sindr(dec, h, p, 0.5, u=1) == pytest.approx(vec[1])

    def test_zf_removes_interference(self):
        pa = linear_pa(8)
        rng = np.random.default_rng(61)
        h = rng.standard_normal((8, 3)) + 1j * rng.standard_normal((8, 3))
        p = zf(h)
        dec = decompose(pa, p)
        assert_allclose(sindr(dec, h, p, 0.25), np.full(3, 4.0), rtol=1e-10)

    def test_matches_definition(self):
        rng = np.random.default_rng(62)
        for order in (1, 2):
            for _ in range(10):
                b = int(rng.integers(2, 9))
                u = int(rng.integers(1, min(b, 3) + 1))
                pa = random_pa(b, rng, order=order)
                h = (rng.standard_normal((b, u))
                     + 1j * rng.standard_normal((b, u)))
                p = 0.3 * (rng.standard_normal((b, u))
                           + 1j * rng.standard_normal((b, u)))
                dec = decompose(pa, p)
                n0 = rng.uniform(0.01, 1.0)
                assert_allclose(sindr(dec, h, p, n0),
                                sindr_oracle(pa, h, p, n0), rtol=1e-8)

    def test_vector_channel_accepted(self):
        pa = linear_pa(4)
        h = los_channel(np.deg2rad(80.0), 4)
        p = mrt(h)
        dec = decompose(pa, p)
        out = sindr(dec, h, p, 1.0)
        assert out.shape == (1,)
        assert_allclose(out[0], 4.0, rtol=1e-12)  # array gain B

    def test_invalid_noise(self):
        pa = linear_pa(2)
        p = np.ones((2, 1), complex)
        dec = decompose(pa, p)
        with pytest.raises(ValueError):
            sindr(dec, np.ones((2, 1), complex), p, 0.0)


class TestSumRate:
    def test_matches_sindr_sum(self):
        rng = np.random.default_rng(63)
        pa = random_pa(6, rng)
        h = rng.standard_normal((6, 2)) + 1j * rng.standard_normal((6, 2))
        p = 0.4 * (rng.standard_normal((6, 2))
                   + 1j * rng.standard_normal((6, 2)))
        dec = decompose(pa, p)
        want = np.sum(np.log2(1.0 + sindr(dec, h, p, 0.3)))
        assert sum_rate(dec, h, p, 0.3) == pytest.approx(want, rel=1e-14)
        assert sum_rate_of(pa, h, p, 0.3) == pytest.approx(want, rel=1e-14)

    def test_known_value(self):
        pa = linear_pa(2)
        h = np.ones((2, 1), complex)
        p = np.full((2, 1), 0.5, dtype=complex)
        dec = decompose(pa, p)
        assert sum_rate(dec, h, p, 1.0) == pytest.approx(1.0)  # log2(1+1)


class TestRadiationPattern:
    def test_matches_quadratic_forms(self):
        rng = np.random.default_rng(64)
        pa = random_pa(8, rng)
        p = 0.4 * (rng.standard_normal((8, 2))
                   + 1j * rng.standard_normal((8, 2)))
        dec = decompose(pa, p)
        grid = np.deg2rad(np.array([10.0, 65.0, 100.0, 200.0]))
        pat = radiation_pattern(dec, p, grid)
        for i, ang in enumerate(grid):
            h = los_channel(ang, 8)
            gp = dec.g[:, None] * p
            lin = float(np.sum(np.abs(h @ gp) ** 2))
            dist = float(np.real(h @ dec.c_e @ h.conj()))
            assert_allclose(pat.rho_lin[i], lin, rtol=1e-10)
            assert_allclose(pat.rho_dist[i], dist, rtol=1e-8)

    def test_default_grid(self):
        pa = linear_pa(2)
        p = np.ones((2, 1), complex)
        pat = radiation_pattern(decompose(pa, p), p)
        assert pat.angles_rad.shape == (360,)
        assert pat.angles_rad[0] == 0.0
        assert_allclose(np.diff(pat.angles_rad), np.deg2rad(1.0))

    def test_mrt_peaks_at_steering_angle(self):
        psi = np.deg2rad(90.0)
        h = los_channel(psi, 16)
        p = mrt(h)
        pa = linear_pa(16)
        pat = radiation_pattern(decompose(pa, p), p,
                                np.deg2rad(np.arange(0.0, 180.0, 1.0)))
        assert int(np.argmax(pat.rho_lin)) == 90
        assert_allclose(pat.rho_lin[90], 16.0, rtol=1e-10)

    def test_single_antenna_isotropic(self):
        pa = linear_pa(1)
        p = np.array([[0.7]], dtype=complex)
        pat = radiation_pattern(decompose(pa, p), p)
        assert_allclose(pat.rho_lin, np.full(360, 0.49), rtol=1e-12)

    def test_empty_grid_rejected(self):
        pa = linear_pa(2)
        p = np.ones((2, 1), complex)
        with pytest.raises(ValueError):
            radiation_pattern(decompose(pa, p), p, np.empty(0))

    def test_csv_round_trip(self, tmp_path):
        pa = linear_pa(2)
        p = np.ones((2, 1), complex)
        pat = radiation_pattern(decompose(pa, p), p,
                                np.deg2rad([0.0, 90.0]))
        path = tmp_path / "pattern.csv"
        pat.to_csv(path)
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["angle_deg", "rho_lin_dbm", "rho_dist_dbm"]
        assert len(rows) == 3
        assert float(rows[2][0]) == pytest.approx(90.0)
        # linear PA: distortion is exactly zero, serialized at the dBm floor
        assert float(rows[1][2]) == pytest.approx(-370.0)
        want_lin = 10.0 * np.log10(pat.rho_lin[1] * 1e3)
        assert float(rows[2][1]) == pytest.approx(want_lin, rel=1e-12)


class TestEnergyEfficiency:
    def test_simple_ratio(self):
        assert energy_efficiency(2.0, 0.5) == pytest.approx(4.0)

    def test_bandwidth_scales(self):
        assert energy_efficiency(2.0, 0.5, bandwidth_hz=2.0) \
            == pytest.approx(8.0)

    def test_zero_rate(self):
        assert energy_efficiency(0.0, 0.5) == 0.0
        assert energy_efficiency(0.0, 0.0) == 0.0

    def test_invalid_consumed_power(self):
        with pytest.raises(ValueError):
            energy_efficiency(1.0, 0.0)
