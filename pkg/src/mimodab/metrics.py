"""Figures of merit: per-user SINDR, the sum-rate lower bound, far-field
radiation patterns, and energy efficiency."""

import csv
from dataclasses import dataclass

import numpy as np

from .bussgang import BussgangDecomposition, decompose
from .channel import ChannelSet
from .units import watts_to_dbm

# floor for dBm columns so that exact zeros serialize as a finite number
_DBM_FLOOR_W = 1e-40


@dataclass
class ScenarioConfig:
    """Link-level scenario: noise power, radiated power target(s), bandwidth,
    and the minimum-rate target for energy-efficient operation. Watts/Hz."""

    n0: float
    rho_tot: float | None = None
    rho_tot_max: float | None = None
    bandwidth_hz: float = 1.0
    r0: float | None = None

    def __post_init__(self):
        if self.n0 <= 0:
            raise ValueError("n0 must be positive")
        for name in ("rho_tot", "rho_tot_max", "r0"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise ValueError(f"{name} must be positive when set")
        if self.rho_tot is not None and self.rho_tot_max is not None \
                and self.rho_tot > self.rho_tot_max:
            raise ValueError("rho_tot must not exceed rho_tot_max")


def _channel_matrix(h):
    if isinstance(h, ChannelSet):
        return h.h
    h = np.asarray(h, dtype=complex)
    return h[:, None] if h.ndim == 1 else h


def _quad_form_dist(dec, hm):
    """Real quadratic forms h_u^T C_e conj(h_u) per user.

    Goes through the PSD factor C_e = F F^H when available (exact
    nonnegativity, no cancellation); otherwise evaluates the full quadratic
    form, clamped at zero. Negative values beyond -1e-10*trace(C_e)
    indicate a formula bug and raise.
    """
    if dec.c_e_factor is not None:
        return np.sum(np.abs(hm.T @ dec.c_e_factor) ** 2, axis=1)
    q = np.einsum("bu,bc,cu->u", hm, dec.c_e, hm.conj())
    tr = float(np.real(np.trace(dec.c_e)))
    floor = -1e-10 * max(tr, 0.0)
    if np.any(np.real(q) < floor - 1e-300):
        raise ValueError("distortion quadratic form is significantly "
                         "negative; C_e is not PSD")
    return np.maximum(np.real(q), 0.0)


def sindr(dec: BussgangDecomposition, h, p, n0, u=None):
    """Per-user SINDR |h_u^T G p_u|^2 / (interference + distortion + N0).

    Returns the length-U vector, or a scalar when ``u`` is given.
    """
    hm = _channel_matrix(h)
    p = np.atleast_2d(np.asarray(p, dtype=complex))
    if n0 <= 0:
        raise ValueError("n0 must be positive")
    m = hm.T @ (dec.g[:, None] * p)  # m[u, r] = h_u^T G p_r
    sig = np.abs(np.diag(m)) ** 2
    mui = np.sum(np.abs(m) ** 2, axis=1) - sig
    dist = _quad_form_dist(dec, hm)
    out = sig / (mui + dist + n0)
    return out if u is None else float(out[u])


def sum_rate(dec: BussgangDecomposition, h, p, n0) -> float:
    """Achievable-rate lower bound sum_u log2(1 + SINDR_u), bits/c.u."""
    return float(np.sum(np.log2(1.0 + sindr(dec, h, p, n0))))


def sum_rate_of(pa, h, p, n0) -> float:
    """Convenience wrapper: decompose at P, then evaluate the sum rate."""
    return sum_rate(decompose(pa, p), h, p, n0)


@dataclass
class RadiationPattern:
    """Linear and distortion radiated powers over a LoS angle grid."""

    angles_rad: np.ndarray
    rho_lin: np.ndarray
    rho_dist: np.ndarray

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["angle_deg", "rho_lin_dbm", "rho_dist_dbm"])
            for a, rl, rd in zip(self.angles_rad, self.rho_lin, self.rho_dist):
                w.writerow([repr(float(np.degrees(a))),
                            repr(float(watts_to_dbm(max(rl, _DBM_FLOOR_W)))),
                            repr(float(watts_to_dbm(max(rd, _DBM_FLOOR_W))))])


def radiation_pattern(dec: BussgangDecomposition, p,
                      angles_rad=None) -> RadiationPattern:
    """Far-field linear and distortion powers toward each LoS angle:

        rho_lin(psi)  = h(psi)^T G P P^H G^H conj(h(psi))
        rho_dist(psi) = h(psi)^T C_e conj(h(psi))

    Defaults to a 1-degree grid over [0, 360).
    """
    p = np.atleast_2d(np.asarray(p, dtype=complex))
    b = p.shape[0]
    if angles_rad is None:
        angles_rad = np.radians(np.arange(0.0, 360.0, 1.0))
    angles_rad = np.atleast_1d(np.asarray(angles_rad, dtype=float))
    if angles_rad.size == 0:
        raise ValueError("angle grid must be nonempty")
    # rows of hg: h(psi)^T for each grid angle
    hg = np.exp(-1j * np.pi * np.outer(np.cos(angles_rad), np.arange(b)))
    gp = dec.g[:, None] * p
    lin = np.sum(np.abs(hg @ gp) ** 2, axis=1)
    if dec.c_e_factor is not None:
        dist = np.sum(np.abs(hg @ dec.c_e_factor) ** 2, axis=1)
    else:
        dist = np.real(np.einsum("ab,bc,ac->a", hg, dec.c_e, hg.conj()))
        dist = np.maximum(dist, 0.0)
    return RadiationPattern(angles_rad=angles_rad, rho_lin=lin,
                            rho_dist=dist)


def energy_efficiency(rate_sum, rho_cons_tot, bandwidth_hz=1.0) -> float:
    """Energy efficiency W*R/rho_cons in bits per joule."""
    if rate_sum == 0:
        return 0.0
    if rho_cons_tot <= 0:
        raise ValueError("consumed power must be positive at nonzero rate")
    return bandwidth_hz * rate_sum / rho_cons_tot
