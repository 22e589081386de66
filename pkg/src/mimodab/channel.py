"""Downlink channel models for a half-wavelength ULA: LoS plane waves, the
geometric multipath model with area-uniform user drops, path loss, and the
additive CSIT error model."""

from dataclasses import dataclass

import numpy as np

from .numerics import RngStream, sample_circular_gaussian
from .units import db_to_linear, linear_to_db

# Nominal cell-average channel gain for the 5-40 m user disk under the
# adopted path-loss law; the value a user at ~20 m sees. Used to convert
# between average SNR and (rho_tot, N0) pairs.
GAMMA_AVG_SQ_DB = -110.0


@dataclass
class GeometryConfig:
    """Scatterer geometry for the multipath channel. Distances in meters,
    AoDs uniform over [0, pi)."""

    n_path: int = 4
    d_min_m: float = 5.0
    d_max_m: float = 40.0
    f_c_hz: float = 28e9

    def __post_init__(self):
        if self.n_path < 1:
            raise ValueError("n_path must be >= 1")
        if not 0 < self.d_min_m < self.d_max_m:
            raise ValueError("need 0 < d_min_m < d_max_m")


@dataclass
class ChannelSet:
    """B x U matrix of user channels (columns h_u) plus generation metadata."""

    h: np.ndarray
    model: str = "custom"
    aod_rad: np.ndarray | None = None
    distances_m: np.ndarray | None = None
    gamma_sq: np.ndarray | None = None

    def __post_init__(self):
        self.h = np.atleast_2d(np.asarray(self.h, dtype=complex))
        b, u = self.h.shape
        if b < u:
            raise ValueError("need B >= U (channels are columns)")

    @property
    def n_antennas(self):
        return self.h.shape[0]

    @property
    def n_users(self):
        return self.h.shape[1]


def los_channel(psi_rad, n_antennas):
    """Plane-wave LoS channel [h]_b = exp(-j*pi*(b-1)*cos(psi)), unit-modulus
    entries, for a half-wavelength ULA."""
    if n_antennas < 1:
        raise ValueError("n_antennas must be >= 1")
    b = np.arange(n_antennas)
    return np.exp(-1j * np.pi * b * np.cos(psi_rad))


def steering_vector(psi_rad, n_antennas):
    """Unit-norm array response a(psi) = los_channel(psi)/sqrt(B)."""
    return los_channel(psi_rad, n_antennas) / np.sqrt(n_antennas)


def path_loss_db(d_m):
    """Distance-dependent path loss, -72 - 29.2*log10(d)."""
    d_m = np.asarray(d_m, dtype=float)
    if np.any(d_m <= 0):
        raise ValueError("distance must be positive")
    return -72.0 - 29.2 * np.log10(d_m)


def sample_user_distances(n, cfg: GeometryConfig, rng: RngStream):
    # area-uniform drop in the annulus: density proportional to d
    u = rng.gen.uniform(size=n)
    return np.sqrt(cfg.d_min_m**2 + u * (cfg.d_max_m**2 - cfg.d_min_m**2))


def geometric_channel(cfg: GeometryConfig, n_antennas, n_users,
                      rng: RngStream) -> ChannelSet:
    """Draw a geometric multipath channel set.

    Each user gets N_path single-scatterer paths with i.i.d. AoDs uniform on
    [0, pi) and complex gains CN(0, gamma_u^2), where gamma_u^2 is the linear
    path loss at an area-uniform distance in [d_min, d_max]:

        h_u = sqrt(B/N_path) * sum_l zeta_{u,l} a(psi_{u,l})

    so that E[||h_u||^2] = B * gamma_u^2.
    """
    b, u = n_antennas, n_users
    d = sample_user_distances(u, cfg, rng)
    gamma_sq = db_to_linear(path_loss_db(d))
    psi = rng.gen.uniform(0.0, np.pi, size=(u, cfg.n_path))
    zeta = sample_circular_gaussian((u, cfg.n_path), gamma_sq[:, None], rng)
    # steering matrix per user path: (u, n_path, b)
    steer = np.exp(-1j * np.pi * np.arange(b) * np.cos(psi)[..., None]) \
        / np.sqrt(b)
    h = np.sqrt(b / cfg.n_path) * np.einsum("up,upb->bu", zeta, steer)
    return ChannelSet(h, model="geometric", aod_rad=psi, distances_m=d,
                      gamma_sq=gamma_sq)


def corrupt_csit(h, tau, rng: RngStream):
    """Imperfect-CSIT model h_hat = sqrt(1-tau^2)*h + tau*v.

    The error v has i.i.d. CN(0, ||h_u||^2/B) entries per user (per-entry
    average channel power), drawn independently of h. Accepts a vector or a
    B x U matrix (columns treated per user).
    """
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must be in [0, 1]")
    h = np.asarray(h, dtype=complex)
    vec = h.ndim == 1
    hm = h[:, None] if vec else h
    b = hm.shape[0]
    sigma_sq = np.sum(np.abs(hm) ** 2, axis=0) / b
    v = sample_circular_gaussian(hm.shape, sigma_sq[None, :], rng)
    out = np.sqrt(1.0 - tau**2) * hm + tau * v
    return out[:, 0] if vec else out


def snr_avg_db(gamma_avg_sq, rho_tot_w, n0_w):
    """Average SNR 10*log10(gamma_avg^2 * rho_tot / N0) in dB."""
    if gamma_avg_sq <= 0 or rho_tot_w <= 0 or n0_w <= 0:
        raise ValueError("all arguments must be positive")
    return linear_to_db(gamma_avg_sq * rho_tot_w / n0_w)
