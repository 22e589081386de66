"""Bussgang decomposition of the PA array output for Gaussian inputs.

With x = P s, s ~ CN(0, I_U), the output splits as f(x) = G x + e with e
uncorrelated with x. For the polynomial PA the gain and the distortion
covariance have closed forms in C_x = PP^H:

    [G]_bb = sum_k (k+1)! beta_{2k+1}^(b) ([C_x]_bb)^k
    C_e    = sum_{k=1..K} L_k (C_x o |C_x|^(2k)) L_k^H

with o the Hadamard product and L_k diagonal in the odd coefficients. The
module also provides the power normalizations (total and per-antenna) and a
Monte-Carlo oracle used to validate the closed forms.
"""

import math
from dataclasses import dataclass

import numpy as np

from .numerics import RngStream, poly_positive_real_roots, \
    sample_circular_gaussian
from .pa import PaArrayModel, pa_apply_array, pa_output_power
from .units import watts_to_dbm


class SaturationError(ValueError):
    """Requested total power is not reachable by the PA array."""


@dataclass
class BussgangDecomposition:
    """Gain vector g (diagonal of G), distortion covariance C_e, input
    covariance C_x = PP^H, and output covariance C_z = G C_x G^H + C_e.

    c_e_factor, when present, is a B x M matrix with C_e = F F^H; quadratic
    forms h^T C_e conj(h) evaluated as ||h^T F||^2 stay accurate in deep
    pattern nulls where the full quadratic form cancels catastrophically."""

    g: np.ndarray
    c_e: np.ndarray
    c_x: np.ndarray
    c_z: np.ndarray
    c_e_factor: np.ndarray | None = None


def _as_precoder(p):
    p = np.asarray(p, dtype=complex)
    if p.ndim == 1:
        p = p[:, None]
    if p.ndim != 2 or p.shape[0] < p.shape[1]:
        raise ValueError("precoder must be a B x U matrix with B >= U")
    if not np.all(np.isfinite(p.real)) or not np.all(np.isfinite(p.imag)):
        raise ValueError("precoder contains non-finite entries")
    return p


def bussgang_gain(pa: PaArrayModel, p) -> np.ndarray:
    """Per-antenna Bussgang gains g_b = sum_k (k+1)! beta_{2k+1}^(b) sigma_b^(2k)
    with sigma_b^2 = [PP^H]_bb. Zero rows give g_b = beta_1^(b)."""
    p = _as_precoder(p)
    if p.shape[0] != len(pa):
        raise ValueError("precoder rows must match the PA array size")
    sigma_sq = np.sum(np.abs(p) ** 2, axis=1)
    beta = pa.beta_odd_matrix
    k = np.arange(beta.shape[1])
    fact = np.array([math.factorial(i + 1) for i in k])
    return (beta * fact * sigma_sq[:, None] ** k).sum(axis=1)


def _l_diag(pa: PaArrayModel, sigma_sq, k) -> np.ndarray:
    """Diagonal of L_k: (1/sqrt(k+1)) sum_{l=k..K} C(l,k) (l+1)! beta_{2l+1}
    sigma^(2(l-k))."""
    beta = pa.beta_odd_matrix
    out = np.zeros(len(pa), dtype=complex)
    for l in range(k, pa.order + 1):
        out += math.comb(l, k) * math.factorial(l + 1) * beta[:, l] \
            * sigma_sq ** (l - k)
    return out / math.sqrt(k + 1)


def distortion_covariance(pa: PaArrayModel, p) -> np.ndarray:
    """Distortion covariance C_e = sum_{k>=1} L_k (C_x o |C_x|^(2k)) L_k^H.

    Hermitian PSD by construction (Schur products of PSD matrices). For K=1
    this is 2 A_3 (C_x o |C_x|^2) A_3^H.
    """
    p = _as_precoder(p)
    if p.shape[0] != len(pa):
        raise ValueError("precoder rows must match the PA array size")
    c_x = p @ p.conj().T
    sigma_sq = np.real(np.diag(c_x)).copy()
    abs_sq = np.abs(c_x) ** 2
    c_e = np.zeros_like(c_x)
    had = np.ones_like(abs_sq)
    for k in range(1, pa.order + 1):
        had = had * abs_sq  # |C_x|^(2k), entrywise
        lk = _l_diag(pa, sigma_sq, k)
        c_e += (lk[:, None] * lk.conj()[None, :]) * (c_x * had)
    return 0.5 * (c_e + c_e.conj().T)


def _khatri_rao_rows(mats):
    """Row-wise Khatri-Rao product: row b of the result is the Kronecker
    product of row b of every input."""
    out = mats[0]
    for nxt in mats[1:]:
        out = (out[:, :, None] * nxt[:, None, :]).reshape(out.shape[0], -1)
    return out


def distortion_factor(pa: PaArrayModel, p, max_cols=8192):
    """B x M factor F with C_e = F F^H, or None when M would exceed max_cols.

    Uses C_x o |C_x|^(2k) = W_k W_k^H where W_k is the row-wise Khatri-Rao
    product of k+1 copies of P and k copies of conj(P) (M_k = U^(2k+1)
    columns), so each C_e term factors through diag(L_k) W_k.
    """
    p = _as_precoder(p)
    if p.shape[0] != len(pa):
        raise ValueError("precoder rows must match the PA array size")
    n_users = p.shape[1]
    if sum(n_users ** (2 * k + 1)
           for k in range(1, pa.order + 1)) > max_cols:
        return None
    sigma_sq = np.sum(np.abs(p) ** 2, axis=1)
    blocks = [np.zeros((p.shape[0], 0), dtype=complex)]  # linear PA: C_e = 0
    for k in range(1, pa.order + 1):
        w_k = _khatri_rao_rows([p] * (k + 1) + [p.conj()] * k)
        blocks.append(_l_diag(pa, sigma_sq, k)[:, None] * w_k)
    return np.concatenate(blocks, axis=1)


def decompose(pa: PaArrayModel, p) -> BussgangDecomposition:
    """Full decomposition for a precoder: C_x, G, C_e, and C_z."""
    p = _as_precoder(p)
    c_x = p @ p.conj().T
    g = bussgang_gain(pa, p)
    c_e = distortion_covariance(pa, p)
    c_z = g[:, None] * c_x * g.conj()[None, :] + c_e
    return BussgangDecomposition(g=g, c_e=c_e, c_x=c_x, c_z=c_z,
                                 c_e_factor=distortion_factor(pa, p))


def total_radiated_power(pa: PaArrayModel, p) -> float:
    """trace(C_z) = sum_b E[|f_b(x_b)|^2], via the per-antenna moment series."""
    p = _as_precoder(p)
    sigma_sq = np.sum(np.abs(p) ** 2, axis=1)
    return float(sum(pa_output_power(m, s)
                     for m, s in zip(pa.models, sigma_sq)))


# === power normalization ===================================================

def _trace_poly_coeffs(pa: PaArrayModel, sigma_sq) -> np.ndarray:
    """Ascending coefficients of xi -> trace(C_z(sqrt(xi) P)), the exact
    per-antenna Gaussian-moment polynomial of degree 2K+1 in xi = alpha^2."""
    big_k = pa.order
    coeffs = np.zeros(2 * big_k + 2)
    for m, s in zip(pa.models, np.asarray(sigma_sq, dtype=float)):
        c = m.output_power_coeffs()
        n = np.arange(c.size)
        coeffs += c * s ** n
    return coeffs


def normalize_total_power(pa: PaArrayModel, p, rho_tot):
    """Scale P by alpha > 0 so the radiated power trace(C_z(alpha P)) equals
    rho_tot exactly.

    Builds the moment polynomial in xi = alpha^2, takes the smallest positive
    real root (the ascending branch of the power curve; larger roots are
    saturation artifacts), and returns (alpha, alpha * P).

    Raises SaturationError when rho_tot exceeds the peak of the ascending
    branch, naming the maximum reachable power.
    """
    p = _as_precoder(p)
    if rho_tot <= 0:
        raise ValueError("rho_tot must be positive")
    sigma_sq = np.sum(np.abs(p) ** 2, axis=1)
    if not np.any(sigma_sq > 0):
        raise ValueError("cannot normalize an all-zero precoder")
    coeffs = _trace_poly_coeffs(pa, sigma_sq)
    # the odd-degree polynomial always crosses rho_tot eventually, but only
    # the first ascending branch is a physical operating point
    reach = _max_reachable_power(coeffs)
    if rho_tot > reach * (1 + 1e-12):
        raise SaturationError(
            f"rho_tot = {watts_to_dbm(rho_tot):.2f} dBm is not reachable; "
            f"maximum reachable power ~ {watts_to_dbm(reach):.2f} dBm")
    coeffs[0] -= rho_tot
    roots = poly_positive_real_roots(coeffs, tol=1e-9)
    if roots.size == 0:
        # rho_tot ~ reach and rounding pushed the crossing complex; the
        # critical point itself is the operating point then
        dc = np.polynomial.polynomial.polyder(coeffs)
        roots = poly_positive_real_roots(dc, tol=1e-12)
    alpha = math.sqrt(roots[0])
    return alpha, alpha * p


def _max_reachable_power(coeffs) -> float:
    # largest value of the power polynomial on its first ascending branch
    dc = np.polynomial.polynomial.polyder(coeffs)
    if dc.size < 2:
        return np.inf  # affine power curve (linear PA), never turns over
    crit = poly_positive_real_roots(dc, tol=1e-12)
    if crit.size == 0:
        return np.inf
    return float(np.polynomial.polynomial.polyval(crit[0], coeffs))


def normalize_per_antenna(pa: PaArrayModel, p) -> np.ndarray:
    """Scale down every row whose transmit power exceeds its PA limit so it
    radiates exactly rho_max,b; feasible rows are returned untouched."""
    p = _as_precoder(p)
    sigma_sq = np.sum(np.abs(p) ** 2, axis=1)
    out = p
    for b, m in enumerate(pa.models):
        if sigma_sq[b] == 0:
            continue
        if pa_output_power(m, sigma_sq[b]) <= m.rho_max:
            continue
        c = m.output_power_coeffs()
        c = c * sigma_sq[b] ** np.arange(c.size)
        c[0] -= m.rho_max
        roots = poly_positive_real_roots(c, tol=1e-12)
        # reachable by downscaling: the ascending branch passes rho_max
        if out is p:
            out = p.copy()
        out[b] *= math.sqrt(roots[0])
    return out


def scale_to_per_antenna_boundary(pa: PaArrayModel, p) -> np.ndarray:
    """Scale the whole matrix by the largest alpha keeping every antenna
    feasible, i.e. put the most loaded antenna exactly at its power limit.
    Used to start per-antenna-constrained searches on the boundary."""
    p = _as_precoder(p)
    sigma_sq = np.sum(np.abs(p) ** 2, axis=1)
    if not np.any(sigma_sq > 0):
        raise ValueError("cannot scale an all-zero precoder")
    best = np.inf
    for b, m in enumerate(pa.models):
        if sigma_sq[b] == 0:
            continue
        c = m.output_power_coeffs()
        c = c * sigma_sq[b] ** np.arange(c.size)
        c[0] -= m.rho_max
        roots = poly_positive_real_roots(c, tol=1e-12)
        if roots.size:
            best = min(best, roots[0])
    if not np.isfinite(best):
        raise SaturationError("no antenna can reach its power limit")
    return math.sqrt(best) * p


# === Monte-Carlo oracle ====================================================

def mc_oracle(pa: PaArrayModel, p, n, rng: RngStream, block=1 << 16):
    """Estimate the decomposition empirically from n draws of s ~ CN(0, I_U).

    Returns (g_hat, c_e_hat, cross) where cross = ||E_hat[x e^H]||_F measures
    the input-distortion correlation that the decomposition removes. Moments
    are accumulated in blocks to bound memory.
    """
    p = _as_precoder(p)
    if n < 10**4:
        raise ValueError("need at least 1e4 samples for a usable estimate")
    b, u = p.shape
    s_fx = np.zeros(b, dtype=complex)      # sum f(x_b) conj(x_b)
    s_xx_diag = np.zeros(b)                # sum |x_b|^2
    s_ff = np.zeros((b, b), dtype=complex)
    s_fx_mat = np.zeros((b, b), dtype=complex)
    s_xx = np.zeros((b, b), dtype=complex)
    done = 0
    while done < n:
        m = min(block, n - done)
        s = sample_circular_gaussian((u, m), 1.0, rng)
        x = p @ s
        f = pa_apply_array(pa, x)
        s_fx += np.sum(f * x.conj(), axis=1)
        s_xx_diag += np.sum(np.abs(x) ** 2, axis=1)
        s_ff += f @ f.conj().T
        s_fx_mat += f @ x.conj().T
        s_xx += x @ x.conj().T
        done += m
    g_hat = np.divide(s_fx, s_xx_diag, out=np.zeros(b, complex),
                      where=s_xx_diag > 0)
    gd = g_hat[:, None]
    c_e_hat = (s_ff - gd * s_fx_mat.conj().T - s_fx_mat * gd.conj().T
               + gd * s_xx * gd.conj().T) / n
    cross_mat = (s_fx_mat.conj().T - s_xx * gd.conj().T) / n
    return g_hat, c_e_hat, float(np.linalg.norm(cross_mat))
