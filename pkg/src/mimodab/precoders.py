"""Conventional precoders (MRT, ZF) and the analytic zero-distortion
single-user precoders for arrays with unequal third-order PAs.

All constructors return unnormalized B x U matrices; the caller applies
normalize_total_power or normalize_per_antenna afterwards.
"""

import numpy as np

from .channel import ChannelSet, los_channel
from .numerics import pseudo_inverse
from .pa import PaArrayModel


def _channel_matrix(h):
    if isinstance(h, ChannelSet):
        return h.h
    h = np.asarray(h, dtype=complex)
    return h[:, None] if h.ndim == 1 else h


def mrt(h) -> np.ndarray:
    """Maximal ratio transmission: column u = conj(h_u)/||h_u||, equal weight
    per user before normalization."""
    hm = _channel_matrix(h)
    norms = np.linalg.norm(hm, axis=0)
    if np.any(norms == 0):
        raise ValueError("zero channel vector")
    return hm.conj() / norms


def zf(h, rcond=1e-12) -> np.ndarray:
    """Zero-forcing: P = pinv(H^T), so H^T P = I (equal, real, positive
    per-user gains). Errors on a rank-deficient channel."""
    hm = _channel_matrix(h)
    s = np.linalg.svd(hm, compute_uv=False)
    if s[-1] <= rcond * s[0]:
        raise ValueError("rank-deficient channel matrix, ZF undefined")
    return pseudo_inverse(hm.T, rcond=rcond)


def _pair_entry(beta3_a, beta3_b, psi_rad):
    # second element of a zero-distortion pair: magnitude is the cube root of
    # the coefficient ratio, phase aligns the cubic terms in antiphase
    ratio = beta3_a / beta3_b
    return np.abs(ratio) ** (1.0 / 3.0) * np.exp(
        1j * (np.pi * np.cos(psi_rad) + np.pi + np.angle(ratio)))


def zero_distortion_pair(pa: PaArrayModel, psi_rad) -> np.ndarray:
    """Two-antenna single-user precoder with zero radiated distortion at the
    LoS angle psi: p = [1, |r|^(1/3) exp(j(pi cos psi + pi + angle(r)))] with
    r = beta3_1/beta3_2. Requires nonzero third-order coefficients.

    With equal PAs the useful (linear) signal at the user is nulled as well;
    unequal distortion profiles are what make the pair useful.
    """
    if len(pa) != 2:
        raise ValueError("pair precoder needs exactly 2 antennas")
    return zero_distortion_array(pa, psi_rad)


def zero_distortion_array(pa: PaArrayModel, psi_rad) -> np.ndarray:
    """Single-user zero-distortion precoder for even B, stacking independent
    two-antenna solutions on pairs (1,2), (3,4), ...

    Each pair cancels its own third-order distortion toward psi, so the
    radiated distortion power at the user is zero for any overall scaling.
    """
    b = len(pa)
    if b % 2 != 0:
        raise ValueError("zero-distortion construction needs an even number "
                         "of antennas")
    if pa.order < 1:
        raise ValueError("needs third-order PA coefficients")
    beta3 = pa.beta_odd_matrix[:, 1]
    if np.any(beta3 == 0):
        raise ValueError("every antenna needs a nonzero third-order "
                         "coefficient")
    p = np.ones(b, dtype=complex)
    for i in range(0, b, 2):
        p[i + 1] = _pair_entry(beta3[i], beta3[i + 1], psi_rad)
    return p[:, None]


def is_distortion_degenerate(pa: PaArrayModel, psi_rad, tol=1e-10) -> bool:
    """True when the zero-distortion construction also nulls the useful
    signal at psi (all-equal PAs): h^T A_1 p vanishes, so the precoder only
    radiates noise-shaped leftovers. Callers should fall back or warn."""
    p = zero_distortion_array(pa, psi_rad)[:, 0]
    h = los_channel(psi_rad, len(pa))
    beta1 = pa.beta_odd_matrix[:, 0]
    lin = np.abs(np.sum(h * beta1 * p))
    return bool(lin <= tol * np.sum(np.abs(beta1 * p)))
