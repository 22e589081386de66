"""Sum-rate and consumed-power gradients, the distortion-aware beamforming
(DAB) optimizer, its energy-efficient two-stage variant (EE-DAB), and the
transmit-power-control sweep.

Gradient convention: for a real objective of a complex matrix, the ascent
direction is grad = 2*d/d(conj(P)) (Wirtinger), which is exactly what the
forward-difference estimate [(R(P+d_r)-R(P)) + j(R(P+d_i)-R(P))]/delta
approximates, so the closed form and the numeric estimate share one scale.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .bussgang import decompose, normalize_per_antenna, \
    normalize_total_power, scale_to_per_antenna_boundary
from .metrics import sum_rate, sum_rate_of
from .numerics import RngStream, sample_circular_gaussian
from .pa import PaArrayModel, consumed_power_total, per_antenna_tx_power
from .precoders import mrt, zf

_LOG2E = math.log2(math.e)
_MU_FLOOR = 1e-12


class RateTargetInfeasibleError(RuntimeError):
    """The minimum-rate target is not reachable; carries the achieved rate."""

    def __init__(self, r0, achieved):
        super().__init__(
            f"rate target R0 = {r0:g} bits/c.u. unreachable; the per-antenna "
            f"stage achieved {achieved:g} bits/c.u.")
        self.r0 = r0
        self.achieved = achieved


@dataclass
class OptimizerConfig:
    """Projected-gradient settings. ``delta`` is the finite-difference step
    relative to the RMS entry magnitude ||P||_F/sqrt(BU)."""

    mu0: float = 0.1
    n_iter: int = 50
    n_inits: int = 20
    delta: float = 1e-6
    gradient_mode: str = "auto"  # closed_form | numeric | auto

    def __post_init__(self):
        if self.mu0 <= 0 or self.n_iter < 1 or self.n_inits < 1:
            raise ValueError("mu0 > 0, n_iter >= 1, n_inits >= 1 required")
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.gradient_mode not in ("closed_form", "numeric", "auto"):
            raise ValueError("unknown gradient_mode")


@dataclass
class IterTrace:
    """Per-iteration record of one projected-gradient run; objective[0] is
    the initial point."""

    objective: np.ndarray
    mu: np.ndarray
    accepted: np.ndarray
    label: str = ""

    def to_csv(self, path):
        import csv
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["iter", "objective", "mu", "accepted"])
            for i in range(self.objective.size):
                w.writerow([i, repr(float(self.objective[i])),
                            repr(float(self.mu[i])), int(self.accepted[i])])


@dataclass
class DabTrace:
    """Traces of every initialization plus the index of the winner."""

    inits: list
    best: int

    @property
    def best_trace(self) -> IterTrace:
        return self.inits[self.best]


@dataclass
class EeDabTrace:
    """Stage traces of the energy-efficient optimizer: the per-antenna rate
    maximization (s1, None when a precomputed matrix was supplied) and the
    consumed-power descent (s2, objective = consumed power, rate tracked
    alongside)."""

    s1: DabTrace | None
    s2: IterTrace
    s2_rate: np.ndarray
    selected: str = "s2"


# === gradients =============================================================

def _abs_delta(p, delta):
    rms = np.linalg.norm(p) / math.sqrt(p.size)
    return delta * rms if rms > 0 else delta


def grad_sum_rate_numeric(pa, h, p, n0, delta=1e-6):
    """Forward-difference gradient of the sum rate, one full decomposition
    per perturbed entry (real and imaginary)."""
    p = np.atleast_2d(np.asarray(p, dtype=complex))
    if delta <= 0:
        raise ValueError("delta must be positive")
    d = _abs_delta(p, delta)
    base = sum_rate_of(pa, h, p, n0)
    out = np.zeros_like(p)
    for b in range(p.shape[0]):
        for u in range(p.shape[1]):
            pr = p.copy()
            pr[b, u] += d
            pi = p.copy()
            pi[b, u] += 1j * d
            out[b, u] = ((sum_rate_of(pa, h, pr, n0) - base)
                         + 1j * (sum_rate_of(pa, h, pi, n0) - base)) / d
    return out


def grad_sum_rate_central(pa, h, p, n0, delta=1e-6):
    """Central-difference gradient; the reference the closed form is checked
    against (second-order accurate)."""
    p = np.atleast_2d(np.asarray(p, dtype=complex))
    d = _abs_delta(p, delta)
    out = np.zeros_like(p)
    for b in range(p.shape[0]):
        for u in range(p.shape[1]):
            pr_p, pr_m = p.copy(), p.copy()
            pr_p[b, u] += d
            pr_m[b, u] -= d
            pi_p, pi_m = p.copy(), p.copy()
            pi_p[b, u] += 1j * d
            pi_m[b, u] -= 1j * d
            out[b, u] = ((sum_rate_of(pa, h, pr_p, n0)
                          - sum_rate_of(pa, h, pr_m, n0))
                         + 1j * (sum_rate_of(pa, h, pi_p, n0)
                                 - sum_rate_of(pa, h, pi_m, n0))) / (2 * d)
    return out


def grad_sum_rate_closed(pa, h, p, n0):
    """Closed-form sum-rate gradient for third-order PAs (K = 1).

    Derived by Wirtinger differentiation of SINDR_u through G(P) and C_e(P);
    per-antenna coefficients stay at their own antenna index throughout. For
    each user pair (u, r), with m_ur = h_u^T G p_r and z_ur = beta3 o h_u o p_r:

        d|m_ur|^2/dP* = m_ur (G^H conj(h_u)) e_r^T + diag(4 Re(conj(m_ur) z_ur)) P

    and the distortion quadratic form h_u^T C_e conj(h_u) contributes

        4 conj(w_u) o (|C|^2 (w_u o p)) + 2 w_u o ((C o C)(conj(w_u) o p))

    with w_u = beta3 o h_u and C = PP^H (Hadamard powers entrywise).
    """
    from .channel import ChannelSet
    hm = h.h if isinstance(h, ChannelSet) else np.atleast_2d(
        np.asarray(h, dtype=complex))
    p = np.atleast_2d(np.asarray(p, dtype=complex))
    if pa.order != 1:
        raise ValueError("closed-form gradient covers third-order PAs only")
    beta3 = pa.beta_odd_matrix[:, 1]
    b_ant, n_users = p.shape

    c = p @ p.conj().T
    abs_c_sq = np.abs(c) ** 2          # |C|^2, entrywise, real symmetric
    c_sq = c * c                       # C o C, entrywise
    dec = decompose(pa, p)
    g = dec.g

    m = hm.T @ (g[:, None] * p)        # m[u, r] = h_u^T G p_r
    sig = np.abs(np.diag(m)) ** 2
    mui = np.sum(np.abs(m) ** 2, axis=1) - sig
    dist = np.real(np.einsum("bu,bc,cu->u", hm, dec.c_e, hm.conj()))
    dist = np.maximum(dist, 0.0)
    den = mui + dist + n0

    grad = np.zeros_like(p)
    for u in range(n_users):
        h_u = hm[:, u]
        v_u = g.conj() * h_u.conj()    # G^H conj(h_u)
        w_u = beta3 * h_u

        # numerator derivative
        dn = np.zeros_like(p)
        dn[:, u] = m[u, u] * v_u
        dn += (4.0 * np.real(np.conj(m[u, u]) * (w_u * p[:, u])))[:, None] * p

        # multiuser interference derivative
        dmui = np.zeros_like(p)
        m_others = m[u].copy()
        m_others[u] = 0.0
        dmui += v_u[:, None] * m_others[None, :]
        dmui += (4.0 * np.real(w_u * (p @ np.conj(m_others))))[:, None] * p

        # distortion derivative
        wp = w_u[:, None] * p
        wcp = w_u.conj()[:, None] * p
        ddist = 4.0 * w_u.conj()[:, None] * (abs_c_sq @ wp) \
            + 2.0 * w_u[:, None] * (c_sq @ wcp)

        scale = 2.0 * _LOG2E / (den[u] * (den[u] + sig[u]))
        grad += scale * (den[u] * dn - sig[u] * (dmui + ddist))
    return grad


def grad_sum_rate(pa, h, p, n0, cfg: OptimizerConfig):
    mode = cfg.gradient_mode
    if mode == "auto":
        mode = "closed_form" if pa.order == 1 else "numeric"
    if mode == "closed_form":
        return grad_sum_rate_closed(pa, h, p, n0)
    return grad_sum_rate_numeric(pa, h, p, n0, cfg.delta)


def grad_consumed_numeric(pa, p, delta=1e-6):
    """Forward-difference gradient of the total consumed power. The square
    root in the consumption model has unbounded slope at zero transmit power,
    so every row must be nonzero."""
    p = np.atleast_2d(np.asarray(p, dtype=complex))
    if np.any(np.sum(np.abs(p) ** 2, axis=1) == 0):
        raise ValueError("consumed-power gradient undefined for zero rows "
                         "(square-root singularity)")
    d = _abs_delta(p, delta)

    def cons(mat):
        return consumed_power_total(pa, per_antenna_tx_power(pa, mat),
                                    check_limits=False)

    base = cons(p)
    out = np.zeros_like(p)
    for b in range(p.shape[0]):
        for u in range(p.shape[1]):
            pr = p.copy()
            pr[b, u] += d
            pi = p.copy()
            pi[b, u] += 1j * d
            out[b, u] = ((cons(pr) - base) + 1j * (cons(pi) - base)) / d
    return out


# === Algorithm 1: distortion-aware beamforming =============================

def _project(pa, p, scenario, constraint):
    if constraint == "total_power":
        return normalize_total_power(pa, p, scenario.rho_tot)[1]
    if constraint == "per_antenna":
        return normalize_per_antenna(pa, p)
    raise ValueError("constraint must be total_power or per_antenna")


def _initial_points(pa, h, cfg, scenario, constraint, rng, extra_inits):
    from .channel import ChannelSet
    hm = h.h if isinstance(h, ChannelSet) else np.atleast_2d(
        np.asarray(h, dtype=complex))
    b_ant, n_users = hm.shape
    cands = [("mrt", mrt(hm))]
    try:
        cands.append(("zf", zf(hm)))
    except ValueError:
        pass  # rank-deficient channel: ZF init skipped
    for i, mat in enumerate(extra_inits):
        cands.append((f"extra{i}", np.atleast_2d(np.asarray(mat, complex))))
    n_random = max(cfg.n_inits - 2, 0)
    if n_random > 0 and rng is None:
        raise ValueError("random initializations need an RngStream")
    for i in range(n_random):
        mat = sample_circular_gaussian((b_ant, n_users), 1.0, rng.derive(i))
        cands.append((f"random{i}", mat))

    out = []
    for label, mat in cands:
        if constraint == "total_power":
            mat = normalize_total_power(pa, mat, scenario.rho_tot)[1]
        else:
            mat = scale_to_per_antenna_boundary(pa, mat)
        out.append((label, mat))
    return out


def _ascend(pa, h, p0, cfg, scenario, constraint, n0, label):
    """One projected-gradient-ascent run of the sum rate from p0."""
    p = p0
    r = sum_rate_of(pa, h, p, n0)
    mu = cfg.mu0
    objective = np.empty(cfg.n_iter + 1)
    mus = np.empty(cfg.n_iter + 1)
    accepted = np.zeros(cfg.n_iter + 1, dtype=bool)
    objective[0], mus[0], accepted[0] = r, mu, True
    for i in range(1, cfg.n_iter + 1):
        step = grad_sum_rate(pa, h, p, n0, cfg)
        cand = _project(pa, p + mu * step, scenario, constraint)
        r_cand = sum_rate_of(pa, h, cand, n0)
        if r_cand > r:
            p, r = cand, r_cand
            mu = cfg.mu0
            accepted[i] = True
        else:
            mu *= 0.5
        objective[i], mus[i] = r, mu
        if mu < _MU_FLOOR:
            objective[i:] = r
            mus[i:] = mu
            break
    return p, r, IterTrace(objective, mus, accepted, label=label)


def dab(pa: PaArrayModel, h, cfg: OptimizerConfig, scenario,
        constraint="total_power", rng: RngStream | None = None,
        extra_inits=()):
    """Distortion-aware beamforming by projected gradient ascent.

    Runs one ascent per initialization (MRT, ZF, any ``extra_inits``, plus
    n_inits-2 random matrices), each projected onto the active power
    constraint, accepting a step only when the sum rate improves (step size
    resets on success, halves on rejection). Returns the best final matrix
    and the full trace set. The result is never worse than normalized MRT/ZF
    because both are initializations.
    """
    inits = _initial_points(pa, h, cfg, scenario, constraint, rng,
                            extra_inits)
    results = []
    traces = []
    for label, p0 in inits:
        p, r, tr = _ascend(pa, h, p0, cfg, scenario, constraint,
                           scenario.n0, label)
        results.append((r, p))
        traces.append(tr)
    best = int(np.argmax([r for r, _ in results]))
    return results[best][1], DabTrace(inits=traces, best=best)


# === Algorithm 2: energy-efficient DAB =====================================

def scale_to_rate(pa, h, p, n0, r0, iters=60):
    """Smallest global scaling of P (down from 1) whose sum rate still meets
    r0, by bisection on the ascending branch. Requires R(P) >= r0."""
    if sum_rate_of(pa, h, p, n0) < r0:
        raise ValueError("rate target not met at the starting point")
    lo, hi = 0.0, 1.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if sum_rate_of(pa, h, mid * p, n0) >= r0:
            hi = mid
        else:
            lo = mid
    return hi * p


def ee_dab(pa: PaArrayModel, h, cfg: OptimizerConfig, scenario,
           rng: RngStream | None = None, extra_inits=(), p_s1=None):
    """Energy-efficient DAB: maximize the rate under per-antenna power limits
    (stage 1), then descend the consumed power while the rate stays above
    scenario.r0 (stage 2).

    Stage 2 accepts a step only when the consumed power decreases (step size
    resets/halves as in stage 1) and stops once the rate drops below r0 or
    the iteration budget is spent; the last rate-feasible iterate wins. That
    iterate is then polished by bisecting a global downscale onto the rate
    boundary, and the cheaper of {polished iterate, stage-1 matrix scaled to
    r0} is returned, so the result never consumes more than the scaled
    stage-1 solution.

    Pass ``p_s1`` to reuse an already-optimized per-antenna matrix instead
    of rerunning stage 1. Raises RateTargetInfeasibleError when stage 1
    cannot reach r0.
    """
    if scenario.r0 is None:
        raise ValueError("scenario.r0 must be set for ee_dab")
    r0 = scenario.r0
    n0 = scenario.n0

    if p_s1 is None:
        p_s1, s1_trace = dab(pa, h, cfg, scenario, constraint="per_antenna",
                             rng=rng, extra_inits=extra_inits)
    else:
        p_s1 = np.atleast_2d(np.asarray(p_s1, dtype=complex))
        s1_trace = None
    r_s1 = sum_rate_of(pa, h, p_s1, n0)
    if r_s1 < r0:
        raise RateTargetInfeasibleError(r0, r_s1)

    def cons_of(mat):
        return consumed_power_total(pa, per_antenna_tx_power(pa, mat),
                                    check_limits=False)

    p = p_s1
    cons = cons_of(p)
    rate = r_s1
    mu = cfg.mu0
    objective = [cons]
    mus = [mu]
    accepted = [True]
    rates = [rate]
    for _ in range(cfg.n_iter):
        step = grad_consumed_numeric(pa, p, cfg.delta)
        cand = normalize_per_antenna(pa, p - mu * step)
        c_cand = cons_of(cand)
        took = c_cand < cons
        if took:
            r_cand = sum_rate_of(pa, h, cand, n0)
            if r_cand < r0:
                # crossed the rate boundary: keep the previous feasible point
                objective.append(cons)
                mus.append(mu)
                accepted.append(False)
                rates.append(rate)
                break
            p, cons, rate = cand, c_cand, r_cand
            mu = cfg.mu0
        else:
            mu *= 0.5
        objective.append(cons)
        mus.append(mu)
        accepted.append(took)
        rates.append(rate)
        if mu < _MU_FLOOR:
            break

    # polish down to the rate boundary; never increases consumed power
    p_polished = scale_to_rate(pa, h, p, n0, r0)
    p_scaled_s1 = scale_to_rate(pa, h, p_s1, n0, r0)
    cand_pol, cand_s1 = cons_of(p_polished), cons_of(p_scaled_s1)
    if cand_pol <= cand_s1:
        p_out, selected = p_polished, "s2"
    else:
        p_out, selected = p_scaled_s1, "s1_scaled"
    s2 = IterTrace(np.asarray(objective), np.asarray(mus),
                   np.asarray(accepted, dtype=bool), label="consumed_power")
    trace = EeDabTrace(s1=s1_trace, s2=s2, s2_rate=np.asarray(rates),
                       selected=selected)
    return p_out, trace


# === power-control sweep ===================================================

def power_control_sweep(pa: PaArrayModel, h, cfg: OptimizerConfig, scenario,
                        rho_grid, precoder_names=("mrt", "zf", "dab"),
                        rng: RngStream | None = None):
    """Sum rate of each precoder family at every total power in rho_grid.

    MRT/ZF keep a fixed direction and are renormalized per grid point; DAB is
    re-optimized per grid point, warm-started from the previous point's
    solution. Returns {name: {"rho_grid", "rates", "best_idx", "best_rho",
    "best_rate", "best_p"}}; with power control the achieved rate at a power
    cap is the running maximum of the full-power curve up to that cap.
    """
    from .channel import ChannelSet
    from dataclasses import replace
    hm = h.h if isinstance(h, ChannelSet) else np.atleast_2d(
        np.asarray(h, dtype=complex))
    rho_grid = np.asarray(rho_grid, dtype=float)
    out = {}
    for name in precoder_names:
        rates = np.empty(rho_grid.size)
        mats = []
        warm = None
        for i, rho in enumerate(rho_grid):
            scen = replace(scenario, rho_tot=float(rho), rho_tot_max=None)
            if name == "mrt":
                p = normalize_total_power(pa, mrt(hm), rho)[1]
            elif name == "zf":
                p = normalize_total_power(pa, zf(hm), rho)[1]
            elif name == "dab":
                extra = () if warm is None else (warm,)
                p, _ = dab(pa, hm, cfg, scen, constraint="total_power",
                           rng=rng if rng is None else rng.derive(i),
                           extra_inits=extra)
                warm = p
            else:
                raise ValueError(f"unknown precoder family '{name}'")
            rates[i] = sum_rate_of(pa, hm, p, scenario.n0)
            mats.append(p)
        best = int(np.argmax(rates))
        out[name] = {
            "rho_grid": rho_grid,
            "rates": rates,
            "best_idx": best,
            "best_rho": float(rho_grid[best]),
            "best_rate": float(rates[best]),
            "best_p": mats[best],
        }
    return out
