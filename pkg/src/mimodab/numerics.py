"""Shared numerical kernels: seeded random streams, circularly symmetric
Gaussian sampling, positive real polynomial roots, and the pseudo-inverse."""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class RngStream:
    """Independent, reproducible random stream keyed by (master_seed, stream_id).

    The generator is built from a SeedSequence over the full key, so the same
    key yields the same sample sequence on any platform and under any thread
    count. ``derive(k)`` creates an independent child stream; streams must not
    be shared between threads while sampling.
    """

    master_seed: int
    stream_id: int
    path: tuple = ()
    gen: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        seq = np.random.SeedSequence(self.master_seed,
                                     spawn_key=(self.stream_id, *self.path))
        self.gen = np.random.default_rng(seq)

    def derive(self, key: int) -> "RngStream":
        return RngStream(self.master_seed, self.stream_id, (*self.path, key))


def _generator(rng):
    # accept an RngStream or a bare numpy Generator
    return rng.gen if isinstance(rng, RngStream) else rng


def sample_circular_gaussian(n, variance, rng):
    """Draw i.i.d. CN(0, variance) samples.

    Parameters
    ----------
    n : int or tuple of int
        Output shape.
    variance : float or array_like
        Total variance E[|z|^2] per sample; broadcastable against the shape.
    rng : RngStream or numpy.random.Generator

    Returns
    -------
    ndarray of complex128, real and imaginary parts each N(0, variance/2).
    """
    variance = np.asarray(variance, dtype=float)
    if np.any(variance < 0):
        raise ValueError("variance must be nonnegative")
    gen = _generator(rng)
    shape = (n,) if np.isscalar(n) else tuple(n)
    z = gen.standard_normal(shape) + 1j * gen.standard_normal(shape)
    return z * np.sqrt(variance / 2.0)


def poly_positive_real_roots(coeffs, tol=1e-9):
    """Positive real roots of a real polynomial, ascending.

    Parameters
    ----------
    coeffs : array_like
        Real coefficients in ascending degree order.
    tol : float
        A companion-matrix root is kept when |imag| <= tol*(1+|root|) and its
        real part is positive; nearby roots are merged within a tol-sized
        window. The positivity cut is exact, not tol-based: normalization of
        large-entry precoders produces genuine roots far below any fixed
        threshold.

    Returns
    -------
    ndarray of float, sorted ascending. Empty when no positive real root
    exists; the caller decides how to handle that.
    """
    c = np.asarray(coeffs, dtype=float)
    if c.ndim != 1 or c.size < 2:
        raise ValueError("polynomial must have degree >= 1")
    # trim leading-degree coefficients that are numerically zero
    nz = np.nonzero(np.abs(c) > 1e-300)[0]
    if nz.size == 0:
        raise ValueError("zero polynomial")
    c = c[: nz[-1] + 1]
    if c.size < 2:
        return np.empty(0)

    roots = np.polynomial.polynomial.polyroots(c)
    keep = (np.abs(roots.imag) <= tol * (1.0 + np.abs(roots))) \
        & (roots.real > 0.0)
    cand = np.sort(roots.real[keep])
    if cand.size == 0:
        return np.empty(0)

    # Newton polish; companion eigenvalues are accurate but the normalization
    # callers need residuals at the 1e-10 level
    dc = np.polynomial.polynomial.polyder(c)
    for _ in range(3):
        p = np.polynomial.polynomial.polyval(cand, c)
        dp = np.polynomial.polynomial.polyval(cand, dc)
        step = np.where(dp != 0, p / np.where(dp == 0, 1.0, dp), 0.0)
        cand = cand - step

    cand = np.sort(cand[cand > 0.0])
    merged = [cand[0]]
    for r in cand[1:]:
        if r - merged[-1] > tol * (1.0 + abs(r)):
            merged.append(r)
    out = np.asarray(merged)

    # defining residual bound from the contract
    scale = 1e-8 * np.max(np.abs(c)) * np.maximum(1.0, out) ** (c.size - 1)
    resid = np.abs(np.polynomial.polynomial.polyval(out, c))
    return out[resid <= scale]


def pseudo_inverse(a, rcond=1e-12):
    """Moore-Penrose pseudo-inverse with singular values below rcond*sigma_max
    truncated. Errors on an all-zero matrix (rank zero)."""
    a = np.asarray(a)
    if a.size == 0:
        raise ValueError("empty matrix")
    if not np.all(np.isfinite(a.real)) or not np.all(np.isfinite(a.imag)):
        raise ValueError("matrix contains non-finite entries")
    if not np.any(a):
        raise ValueError("rank-zero (all-zero) matrix has no pseudo-inverse here")
    return np.linalg.pinv(a, rcond=rcond)
