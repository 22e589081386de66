"""Memoryless polynomial power-amplifier models.

Per antenna b the PA is f_b(x) = sum_k beta_{2k+1} x|x|^{2k} plus optional
even-order terms beta_{2m} x|x|^{2m-1}. The even-order coefficients are used
only in time-domain (out-of-band) simulation; every Gaussian-input analytic
quantity uses the odd part alone.
"""

import json
import math
import warnings
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .units import dbm_to_watts, watts_to_dbm


class PaConstraintError(ValueError):
    """Transmit power above the per-antenna limit."""


@dataclass
class PaModel:
    """Single-antenna polynomial PA.

    Parameters
    ----------
    beta_odd : complex array, [beta_1, beta_3, ..., beta_{2K+1}]
    beta_even : complex array, [beta_2, beta_4, ...] (time-domain only)
    eta_max : maximum PA efficiency, in (0, 1]
    rho_max : maximum per-antenna transmit power, watts
    """

    beta_odd: np.ndarray
    beta_even: np.ndarray = field(default_factory=lambda: np.zeros(0, complex))
    eta_max: float = 0.55
    rho_max: float = dbm_to_watts(25.0)

    def __post_init__(self):
        self.beta_odd = np.atleast_1d(np.asarray(self.beta_odd, dtype=complex))
        self.beta_even = np.atleast_1d(np.asarray(self.beta_even, dtype=complex))
        if self.beta_even.size == 0:
            self.beta_even = np.zeros(0, dtype=complex)
        if self.beta_odd.size < 1 or self.beta_odd[0] == 0:
            raise ValueError("beta_1 must be present and nonzero")
        if not 0.0 < self.eta_max <= 1.0:
            raise ValueError("eta_max must be in (0, 1]")
        if self.rho_max <= 0:
            raise ValueError("rho_max must be positive")

    @property
    def order(self) -> int:
        """K, the number of nonlinear odd terms (highest order 2K+1)."""
        return self.beta_odd.size - 1

    def output_power_coeffs(self) -> np.ndarray:
        """Ascending coefficients c of E[|f(x)|^2] = sum_n c_n sigma^(2n) for
        x ~ CN(0, sigma^2), from the complex Gaussian moments
        E[|x|^(2n)] = n! sigma^(2n). c_0 = 0, degree 2K+1."""
        k = self.order
        c = np.zeros(2 * k + 2)
        for i, bi in enumerate(self.beta_odd):
            for j, bj in enumerate(self.beta_odd):
                n = i + j + 1
                c[n] += (bi * np.conj(bj)).real * math.factorial(n)
        return c

    @property
    def sigma_sq_monotone_max(self) -> float:
        """Largest input variance up to which E[|f|^2] is strictly increasing
        (inf when monotone everywhere). Cached at first use."""
        if not hasattr(self, "_sig_mono"):
            dc = np.polynomial.polynomial.polyder(self.output_power_coeffs())
            from .numerics import poly_positive_real_roots
            if np.count_nonzero(np.abs(dc) > 1e-300) <= 1:
                # constant derivative |beta_1|^2 > 0: monotone everywhere
                self._sig_mono = np.inf
            else:
                roots = poly_positive_real_roots(dc, tol=1e-12)
                self._sig_mono = float(roots[0]) if roots.size else np.inf
        return self._sig_mono


@dataclass
class PaArrayModel:
    """Per-antenna PA models for a B-antenna array; all models are padded to
    a common polynomial order K."""

    models: list

    def __post_init__(self):
        if len(self.models) < 1:
            raise ValueError("need at least one PA model")
        k = max(m.order for m in self.models)
        padded = []
        for m in self.models:
            if m.order < k:
                beta = np.zeros(k + 1, dtype=complex)
                beta[: m.order + 1] = m.beta_odd
                m = PaModel(beta, m.beta_even, m.eta_max, m.rho_max)
            padded.append(m)
        self.models = padded

    def __len__(self):
        return len(self.models)

    def __getitem__(self, b):
        return self.models[b]

    @property
    def order(self) -> int:
        return self.models[0].order

    @property
    def beta_odd_matrix(self) -> np.ndarray:
        """B x (K+1) matrix of odd coefficients (cached)."""
        if not hasattr(self, "_beta_mat"):
            self._beta_mat = np.array([m.beta_odd for m in self.models])
        return self._beta_mat

    @property
    def rho_max(self) -> np.ndarray:
        return np.array([m.rho_max for m in self.models])

    @property
    def eta_max(self) -> np.ndarray:
        return np.array([m.eta_max for m in self.models])

    @classmethod
    def uniform(cls, n_antennas, model: PaModel) -> "PaArrayModel":
        """Array with the same PA at every antenna."""
        return cls([model] * n_antennas)


def pa_apply(m: PaModel, x):
    """Apply the polynomial PA sample-wise, including even-order terms when
    configured."""
    x = np.asarray(x, dtype=complex)
    ax = np.abs(x)
    out = np.zeros_like(x)
    for k, beta in enumerate(m.beta_odd):
        if beta != 0:
            out = out + beta * x * ax ** (2 * k)
    for i, beta in enumerate(m.beta_even):
        if beta != 0:
            out = out + beta * x * ax ** (2 * i + 1)
    return out


def pa_apply_array(pa: PaArrayModel, x):
    """Apply per-antenna PAs to the rows of a B x n sample block."""
    x = np.atleast_2d(np.asarray(x, dtype=complex))
    if x.shape[0] != len(pa):
        raise ValueError("row count must match the number of PA models")
    return np.vstack([pa_apply(m, x[b]) for b, m in enumerate(pa.models)])


def pa_output_power(m: PaModel, sigma_sq):
    """Analytic transmit power E[|f(x)|^2] for x ~ CN(0, sigma_sq), odd
    coefficients only. Warns when sigma_sq is beyond the variance at which
    the polynomial model stops being monotone (non-physical regime)."""
    sigma_sq = np.asarray(sigma_sq, dtype=float)
    if np.any(sigma_sq < 0):
        raise ValueError("sigma_sq must be nonnegative")
    mono = m.sigma_sq_monotone_max
    if np.any(sigma_sq > mono):
        warnings.warn(
            f"input variance beyond the monotone region (sigma_sq > {mono:.4g}); "
            "polynomial PA model is not trustworthy this deep in saturation",
            RuntimeWarning, stacklevel=2)
    val = np.polynomial.polynomial.polyval(sigma_sq, m.output_power_coeffs())
    return float(val) if np.isscalar(val) or val.ndim == 0 else val


def pa_consumed_power(m: PaModel, rho_tx, check_limit=True):
    """Consumed power (1/eta_max)*sqrt(rho_tx*rho_max) of one PA."""
    if rho_tx < 0:
        raise ValueError("rho_tx must be nonnegative")
    if check_limit and rho_tx > m.rho_max * (1.0 + 1e-9):
        raise PaConstraintError(
            f"rho_tx = {watts_to_dbm(rho_tx):.2f} dBm exceeds the per-antenna "
            f"limit {watts_to_dbm(m.rho_max):.2f} dBm")
    return math.sqrt(rho_tx * m.rho_max) / m.eta_max


def per_antenna_tx_power(pa: PaArrayModel, p: np.ndarray):
    """Per-antenna transmit powers rho_tx,b = E[|f_b(x_b)|^2] for x = P s,
    s ~ CN(0, I): evaluates the analytic output power at sigma_b^2 = [PP^H]_bb."""
    p = np.atleast_2d(np.asarray(p, dtype=complex))
    sigma_sq = np.sum(np.abs(p) ** 2, axis=1)
    return np.array([pa_output_power(m, s)
                     for m, s in zip(pa.models, sigma_sq)])


def consumed_power_total(pa: PaArrayModel, per_antenna_tx, check_limits=True):
    """Total consumed power sum_b (1/eta_b)*sqrt(rho_tx,b*rho_max,b)."""
    per_antenna_tx = np.asarray(per_antenna_tx, dtype=float)
    if per_antenna_tx.shape != (len(pa),):
        raise ValueError("need one transmit power per antenna")
    return sum(pa_consumed_power(m, r, check_limit=check_limits)
               for m, r in zip(pa.models, per_antenna_tx))


# === coefficient files =====================================================

def _complex_from_pairs(pairs):
    return np.array([complex(re, im) for re, im in pairs], dtype=complex)


def _pairs_from_complex(arr):
    return [[float(z.real), float(z.imag)] for z in np.asarray(arr, complex)]


def pa_array_from_dict(doc: dict) -> PaArrayModel:
    models = []
    for rec in doc["amplifiers"]:
        models.append(PaModel(
            beta_odd=_complex_from_pairs(rec["beta_odd"]),
            beta_even=_complex_from_pairs(rec.get("beta_even", [])),
            eta_max=float(rec.get("eta_max", 0.55)),
            rho_max=dbm_to_watts(float(rec.get("rho_max_dbm", 25.0))),
        ))
    return PaArrayModel(models)


def pa_array_to_dict(pa: PaArrayModel) -> dict:
    recs = []
    for m in pa.models:
        recs.append({
            "beta_odd": _pairs_from_complex(m.beta_odd),
            "beta_even": _pairs_from_complex(m.beta_even),
            "eta_max": m.eta_max,
            "rho_max_dbm": float(watts_to_dbm(m.rho_max)),
        })
    return {"amplifiers": recs}


def load_pa_array(path) -> PaArrayModel:
    """Load per-antenna PA coefficients from a JSON file."""
    with open(path, "r", encoding="utf-8") as fh:
        return pa_array_from_dict(json.load(fh))


def save_pa_array(pa: PaArrayModel, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(pa_array_to_dict(pa), fh, indent=2)
        fh.write("\n")


def measured_pa_array() -> PaArrayModel:
    """The bundled 10-amplifier measurement fixture with per-antenna
    third-order coefficients (unequal distortion profiles)."""
    ref = resources.files("mimodab").joinpath("data/measured_pa_10.json")
    with ref.open("r", encoding="utf-8") as fh:
        return pa_array_from_dict(json.load(fh))
