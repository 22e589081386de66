"""JSON-configured Monte-Carlo experiment harness.

Each experiment sweeps independent channel realizations, evaluates the
requested precoders, and writes a long-format result table plus a JSON run
manifest. Realization r always draws from RngStream(master_seed, r), so
results are reproducible and independent of the worker count. Powers enter
and leave in dBm and angles in degrees at this boundary only; everything
internal is watts and radians.
"""

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from ._version import __version__
from .bussgang import decompose, normalize_total_power, \
    scale_to_per_antenna_boundary
from .channel import GAMMA_AVG_SQ_DB, ChannelSet, GeometryConfig, \
    corrupt_csit, geometric_channel, los_channel
from .metrics import _DBM_FLOOR_W, ScenarioConfig, radiation_pattern, \
    sum_rate_of
from .numerics import RngStream, sample_circular_gaussian
from .oob import OfdmConfig, shoulder_level_db, worst_antenna_psd, \
    write_psd_csv
from .optimize import OptimizerConfig, dab, ee_dab, grad_sum_rate_central, \
    grad_sum_rate_closed, power_control_sweep, scale_to_rate
from .pa import PaArrayModel, PaModel, consumed_power_total, load_pa_array, \
    measured_pa_array, per_antenna_tx_power
from .precoders import mrt, zero_distortion_array, zf
from .units import db_to_linear, dbm_to_watts, watts_to_dbm

EXPERIMENT_KINDS = ("pattern", "rate_cdf", "snr_sweep", "power_control",
                    "ee_cdf", "convergence", "oob_psd", "gradcheck")

_DEFAULT_PA = {"kind": "equal",
               "beta_odd": [[1.0, 0.0], [-0.049, -0.023]],
               "beta_even": [],
               "eta_max": 0.55,
               "rho_max_dbm": 25.0}


def empirical_cdf(values, grid):
    """Fraction of values at or below each grid point."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("empirical_cdf needs at least one value")
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    return np.mean(values[None, :] <= grid[:, None], axis=1)


@dataclass
class ExperimentConfig:
    """Resolved experiment description. ``pa``/``channel`` stay as plain
    dicts (their kind decides the builder); leftover config keys land in
    ``params`` for the experiment-specific runner."""

    experiment: str
    b: int
    u: int
    pa: dict = field(default_factory=lambda: dict(_DEFAULT_PA))
    scenario: dict = field(default_factory=dict)
    channel: dict = field(default_factory=lambda: {"kind": "geometric"})
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    n_realizations: int = 1
    master_seed: int = 1
    out_dir: str = "."
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.experiment not in EXPERIMENT_KINDS:
            raise ValueError(f"unknown experiment '{self.experiment}'")
        if self.b < 1 or self.u < 1 or self.b < self.u:
            raise ValueError("need b >= u >= 1")
        if self.n_realizations < 1:
            raise ValueError("n_realizations must be >= 1")

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        known = {}
        for key in ("experiment", "b", "u", "pa", "scenario", "channel",
                    "n_realizations", "master_seed", "out_dir"):
            if key in d:
                known[key] = d.pop(key)
        if "optimizer" in d:
            known["optimizer"] = OptimizerConfig(**d.pop("optimizer"))
        if "experiment" not in known:
            raise ValueError("config must name an experiment")
        if known["experiment"] == "gradcheck":
            known.setdefault("b", 8)
            known.setdefault("u", 2)
        if known["experiment"] == "oob_psd":
            # Spectral regrowth is only controlled by rho_max when the
            # per-antenna constraint binds, which needs noise-limited links.
            scen = dict(known.get("scenario") or {})
            if "n0_dbm" not in scen and "snr_avg_db" not in scen:
                scen["n0_dbm"] = 20.0
                known["scenario"] = scen
        if "b" not in known or "u" not in known:
            raise ValueError("config must set b and u")
        # accept both flat extra keys and an explicit params block, so a
        # manifest's resolved config loads back unchanged
        params = d.pop("params", {})
        params.update(d)
        return cls(params=params, **known)

    @classmethod
    def from_json(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def resolved(self):
        """JSON-serializable copy of every setting after defaulting."""
        return {
            "experiment": self.experiment,
            "b": self.b,
            "u": self.u,
            "pa": self.pa,
            "scenario": self.scenario,
            "channel": self.channel,
            "optimizer": asdict(self.optimizer),
            "n_realizations": self.n_realizations,
            "master_seed": self.master_seed,
            "out_dir": str(self.out_dir),
            "params": self.params,
        }


@dataclass
class ResultTable:
    """Long-format results: one (realization, precoder, metric, value) row
    per measurement, followed by aggregate rows whose realization column is
    'mean' or 'cdf'."""

    rows: list = field(default_factory=list)

    def add(self, realization, precoder, metric, value):
        self.rows.append((realization, str(precoder), str(metric),
                          float(value)))

    def raw_rows(self):
        return [r for r in self.rows if isinstance(r[0], int)]

    def values(self, precoder=None, metric=None, finite_only=False,
               aggregate=None):
        """Values filtered by precoder/metric. By default only raw
        (integer-realization) rows are returned; pass aggregate='mean' or
        'cdf' to select the aggregate rows instead."""
        out = []
        for realization, prec, met, val in self.rows:
            if aggregate is None and not isinstance(realization, int):
                continue
            if aggregate is not None and realization != aggregate:
                continue
            if precoder is not None and prec != precoder:
                continue
            if metric is not None and met != metric:
                continue
            if finite_only and not np.isfinite(val):
                continue
            out.append(val)
        return np.asarray(out, dtype=float)

    def _raw_groups(self):
        """(precoder, metric) pairs among raw rows, first-appearance order."""
        seen = []
        for realization, prec, met, _ in self.rows:
            if isinstance(realization, int) and (prec, met) not in seen:
                seen.append((prec, met))
        return seen

    def add_means(self):
        """One 'mean' row per raw (precoder, metric) pair, over finite
        values; nan when every row was infeasible."""
        for prec, met in self._raw_groups():
            vals = self.values(precoder=prec, metric=met, finite_only=True)
            mean = float(np.mean(vals)) if vals.size else float("nan")
            self.rows.append(("mean", prec, met, mean))

    def add_cdf(self, metric, n_grid=101):
        """CDF rows for one raw metric, every precoder on a shared grid
        spanning the finite values; grid point encoded in the metric name."""
        precs = [p for p, m in self._raw_groups() if m == metric]
        allv = np.concatenate([
            self.values(precoder=p, metric=metric, finite_only=True)
            for p in precs]) if precs else np.array([])
        if allv.size == 0:
            return
        grid = (np.linspace(allv.min(), allv.max(), n_grid)
                if allv.max() > allv.min() else np.array([allv.min()]))
        for prec in precs:
            vals = self.values(precoder=prec, metric=metric,
                               finite_only=True)
            if vals.size == 0:
                continue
            for g, frac in zip(grid, empirical_cdf(vals, grid)):
                self.rows.append(("cdf", prec, f"{metric}@{float(g)!r}",
                                  float(frac)))

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["realization", "precoder", "metric", "value"])
            for realization, prec, met, val in self.rows:
                w.writerow([realization, prec, met, repr(float(val))])


# === shared builders =======================================================

def build_pa_array(spec, n_antennas) -> PaArrayModel:
    kind = spec.get("kind", "equal")
    if kind == "measured":
        pa = measured_pa_array()
    elif kind == "file":
        pa = load_pa_array(spec["path"])
    elif kind == "equal":
        beta_odd = [complex(re, im) for re, im in
                    spec.get("beta_odd", _DEFAULT_PA["beta_odd"])]
        beta_even = [complex(re, im) for re, im in
                     spec.get("beta_even", [])]
        model = PaModel(beta_odd, beta_even,
                        eta_max=spec.get("eta_max", 0.55),
                        rho_max=dbm_to_watts(spec.get("rho_max_dbm", 25.0)))
        return PaArrayModel.uniform(n_antennas, model)
    else:
        raise ValueError(f"unknown pa kind '{kind}'")
    if len(pa) != n_antennas:
        raise ValueError(
            f"pa fixture has {len(pa)} amplifiers, config asks for "
            f"{n_antennas} antennas")
    return pa


def _make_channel(cfg: ExperimentConfig, rng: RngStream) -> ChannelSet:
    kind = cfg.channel.get("kind", "geometric")
    if kind == "geometric":
        geo = GeometryConfig(
            n_path=cfg.channel.get("n_path", 4),
            d_min_m=cfg.channel.get("d_min_m", 5.0),
            d_max_m=cfg.channel.get("d_max_m", 40.0))
        return geometric_channel(geo, cfg.b, cfg.u, rng)
    if kind == "los":
        aod = cfg.channel.get("aod_deg", "random")
        if isinstance(aod, str):
            if aod != "random":
                raise ValueError("los aod_deg must be numeric or 'random'")
            psi = rng.gen.uniform(0.0, np.pi, size=cfg.u)
        else:
            psi = np.deg2rad(np.broadcast_to(
                np.atleast_1d(np.asarray(aod, dtype=float)),
                (cfg.u,)).copy())
        h = np.stack([los_channel(a, cfg.b) for a in psi], axis=1)
        return ChannelSet(h, model="los", aod_rad=psi)
    raise ValueError(f"unknown channel kind '{kind}'")


def _resolve_scenario(cfg: ExperimentConfig) -> ScenarioConfig:
    sc = cfg.scenario
    rho_tot = (dbm_to_watts(sc["rho_tot_dbm"])
               if "rho_tot_dbm" in sc else None)
    rho_max = (dbm_to_watts(sc["rho_tot_max_dbm"])
               if "rho_tot_max_dbm" in sc else None)
    if "n0_dbm" in sc:
        n0 = dbm_to_watts(sc["n0_dbm"])
    elif "snr_avg_db" in sc:
        if rho_tot is None:
            raise ValueError("snr_avg_db needs rho_tot_dbm alongside it")
        n0 = (db_to_linear(GAMMA_AVG_SQ_DB) * rho_tot
              / db_to_linear(sc["snr_avg_db"]))
    else:
        n0 = dbm_to_watts(-85.0)
    return ScenarioConfig(n0=n0, rho_tot=rho_tot, rho_tot_max=rho_max,
                          bandwidth_hz=sc.get("bandwidth_hz", 1.0),
                          r0=sc.get("r0"))


def _map_realizations(n, fn, threads):
    """fn(r) for r in 0..n-1, collected in index order regardless of the
    worker count; fn must derive all randomness from its index."""
    if threads <= 1:
        return [fn(r) for r in range(n)]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, range(n)))


def _consumed(pa, p):
    return consumed_power_total(pa, per_antenna_tx_power(pa, p))


def _min_scale_to_rate(pa, h, p_boundary, n0, r0, n_scan=64, iters=50):
    """Smallest global downscale of a boundary-feasible matrix that still
    meets the rate target: coarse scan for the first crossing, then
    bisection. None when no scale in (0, 1] reaches r0."""
    alphas = np.linspace(0.0, 1.0, n_scan + 1)[1:]
    rates = np.array([sum_rate_of(pa, h, a * p_boundary, n0)
                      for a in alphas])
    hits = np.nonzero(rates >= r0)[0]
    if hits.size == 0:
        return None
    i = int(hits[0])
    lo = alphas[i - 1] if i > 0 else 0.0
    hi = alphas[i]
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if sum_rate_of(pa, h, mid * p_boundary, n0) >= r0:
            hi = mid
        else:
            lo = mid
    return hi * p_boundary


# === experiment runners ====================================================

def _run_pattern(cfg, out_dir, threads):
    if cfg.u != 1:
        raise ValueError("pattern experiment is single-user")
    pa = build_pa_array(cfg.pa, cfg.b)
    scen = _resolve_scenario(cfg)
    if scen.rho_tot is None:
        raise ValueError("pattern needs scenario.rho_tot_dbm")
    aod_deg = float(cfg.params.get("aod_deg", 100.0))
    aod = np.deg2rad(aod_deg)
    step = float(cfg.params.get("angle_step_deg", 1.0))
    angles = np.deg2rad(np.arange(0.0, 360.0, step))
    names = cfg.params.get("precoders", ["mrt", "zero_distortion"])

    h = los_channel(aod, cfg.b)[:, None]
    table = ResultTable()
    files = []
    rng = RngStream(cfg.master_seed, 0)
    for name in names:
        if name == "mrt":
            p0 = mrt(h)
        elif name == "zero_distortion":
            p0 = zero_distortion_array(pa, aod)
        elif name == "dab":
            p0, _ = dab(pa, h, cfg.optimizer, scen, rng=rng.derive(0))
        else:
            raise ValueError(f"unknown pattern precoder '{name}'")
        _, p = normalize_total_power(pa, p0, scen.rho_tot)
        dec = decompose(pa, p)
        pat = radiation_pattern(dec, p, angles)
        fname = f"pattern_{name}.csv"
        pat.to_csv(out_dir / fname)
        files.append(fname)
        at_user = radiation_pattern(dec, p, np.array([aod]))
        table.add(0, name, "rho_lin_at_user_dbm",
                  watts_to_dbm(max(at_user.rho_lin[0], _DBM_FLOOR_W)))
        table.add(0, name, "rho_dist_at_user_dbm",
                  watts_to_dbm(max(at_user.rho_dist[0], _DBM_FLOOR_W)))
        table.add(0, name, "rate", sum_rate_of(pa, h, p, scen.n0))
    return table, files


def _run_rate_cdf(cfg, out_dir, threads):
    pa = build_pa_array(cfg.pa, cfg.b)
    scen = _resolve_scenario(cfg)
    if scen.rho_tot is None:
        raise ValueError("rate_cdf needs scenario.rho_tot_dbm")
    names = cfg.params.get("precoders", ["mrt", "zf", "dab"])
    tau = float(cfg.params.get("tau", 0.0))

    def one(r):
        rng = RngStream(cfg.master_seed, r)
        h = _make_channel(cfg, rng.derive(0)).h
        designs = [("", h)]
        if tau > 0:
            designs.append(("_csit", corrupt_csit(h, tau, rng.derive(1))))
        rows = []
        for suffix, h_design in designs:
            for k, name in enumerate(names):
                try:
                    if name == "mrt":
                        p = normalize_total_power(pa, mrt(h_design),
                                                  scen.rho_tot)[1]
                    elif name == "zf":
                        p = normalize_total_power(pa, zf(h_design),
                                                  scen.rho_tot)[1]
                    elif name == "dab":
                        p, _ = dab(pa, h_design, cfg.optimizer, scen,
                                   rng=rng.derive(10 + 2 * k + (suffix != "")))
                    else:
                        raise ValueError(f"unknown precoder '{name}'")
                except ValueError:
                    rows.append((r, name + suffix, "rate", float("nan")))
                    rows.append((r, name + suffix, "feasible", 0.0))
                    continue
                rows.append((r, name + suffix, "rate",
                             sum_rate_of(pa, h, p, scen.n0)))
                rows.append((r, name + suffix, "feasible", 1.0))
        return rows

    table = ResultTable()
    for rows in _map_realizations(cfg.n_realizations, one, threads):
        table.rows.extend(rows)
    table.add_means()
    table.add_cdf("rate")
    return table, []


def _run_snr_sweep(cfg, out_dir, threads):
    pa = build_pa_array(cfg.pa, cfg.b)
    scen = _resolve_scenario(cfg)
    if scen.rho_tot is None:
        raise ValueError("snr_sweep needs scenario.rho_tot_dbm")
    snr_grid = cfg.params.get("snr_db_grid")
    if not snr_grid:
        raise ValueError("snr_sweep needs snr_db_grid")
    snr_grid = sorted(float(s) for s in snr_grid)
    names = cfg.params.get("precoders", ["mrt", "zero_distortion", "dab"])
    if "zero_distortion" in names and cfg.u != 1:
        raise ValueError("zero_distortion precoding is single-user")

    def one(r):
        rng = RngStream(cfg.master_seed, r)
        ch = _make_channel(cfg, rng.derive(0))
        h = ch.h
        fixed = {}
        if "mrt" in names:
            fixed["mrt"] = normalize_total_power(pa, mrt(h), scen.rho_tot)[1]
        if "zero_distortion" in names:
            aod = np.asarray(ch.aod_rad) if ch.aod_rad is not None else None
            if aod is None or aod.size != 1:
                raise ValueError("zero_distortion needs a single-aod "
                                 "los channel")
            zd = zero_distortion_array(pa, float(aod.ravel()[0]))
            fixed["zero_distortion"] = normalize_total_power(
                pa, zd, scen.rho_tot)[1]
        rows = []
        warm = None
        for i, snr_db in enumerate(snr_grid):
            n0 = scen.rho_tot / db_to_linear(snr_db)
            scen_i = replace(scen, n0=n0)
            for name in names:
                if name in fixed:
                    p = fixed[name]
                elif name == "dab":
                    extras = [m for m in
                              (fixed.get("zero_distortion"), warm)
                              if m is not None]
                    p, _ = dab(pa, h, cfg.optimizer, scen_i,
                               rng=rng.derive(10 + i), extra_inits=extras)
                    warm = p
                elif name == "zf":
                    p = normalize_total_power(pa, zf(h), scen.rho_tot)[1]
                else:
                    raise ValueError(f"unknown precoder '{name}'")
                rows.append((r, name, f"rate@{snr_db:g}",
                             sum_rate_of(pa, h, p, n0)))
        return rows

    table = ResultTable()
    for rows in _map_realizations(cfg.n_realizations, one, threads):
        table.rows.extend(rows)
    table.add_means()
    return table, []


def _run_power_control(cfg, out_dir, threads):
    pa = build_pa_array(cfg.pa, cfg.b)
    scen = _resolve_scenario(cfg)
    grid_dbm = cfg.params.get("rho_grid_dbm")
    if not grid_dbm:
        raise ValueError("power_control needs rho_grid_dbm")
    grid_dbm = sorted(float(g) for g in grid_dbm)
    grid_w = np.array([dbm_to_watts(g) for g in grid_dbm])
    names = cfg.params.get("precoders", ["mrt", "zf", "dab"])

    def one(r):
        rng = RngStream(cfg.master_seed, r)
        h = _make_channel(cfg, rng.derive(0)).h
        sweep = power_control_sweep(pa, h, cfg.optimizer, scen, grid_w,
                                    precoder_names=names,
                                    rng=rng.derive(1))
        rows = []
        for name in names:
            res = sweep[name]
            pc = np.maximum.accumulate(res["rates"])
            for g_dbm, full, capped in zip(grid_dbm, res["rates"], pc):
                rows.append((r, name, f"rate_full@{g_dbm:g}", full))
                rows.append((r, name, f"rate_pc@{g_dbm:g}", capped))
            rows.append((r, name, "best_rho_dbm",
                         watts_to_dbm(res["best_rho"])))
        return rows

    table = ResultTable()
    for rows in _map_realizations(cfg.n_realizations, one, threads):
        table.rows.extend(rows)
    table.add_means()
    return table, []


def _run_ee_cdf(cfg, out_dir, threads):
    pa = build_pa_array(cfg.pa, cfg.b)
    scen = _resolve_scenario(cfg)
    if scen.r0 is None:
        raise ValueError("ee_cdf needs scenario.r0")
    r0 = scen.r0

    def one(r):
        rng = RngStream(cfg.master_seed, r)
        h = _make_channel(cfg, rng.derive(0)).h
        rows = []

        def record(name, p):
            if p is None:
                rows.append((r, name, "rho_cons_dbm", float("nan")))
                rows.append((r, name, "rate", float("nan")))
                rows.append((r, name, "feasible", 0.0))
            else:
                rows.append((r, name, "rho_cons_dbm",
                             watts_to_dbm(_consumed(pa, p))))
                rows.append((r, name, "rate",
                             sum_rate_of(pa, h, p, scen.n0)))
                rows.append((r, name, "feasible", 1.0))

        p_s1, _ = dab(pa, h, cfg.optimizer, scen, constraint="per_antenna",
                      rng=rng.derive(1))
        if sum_rate_of(pa, h, p_s1, scen.n0) >= r0:
            p_ee, _ = ee_dab(pa, h, cfg.optimizer, scen, p_s1=p_s1)
            record("ee_dab", p_ee)
            record("dab", scale_to_rate(pa, h, p_s1, scen.n0, r0))
        else:
            record("ee_dab", None)
            record("dab", None)
        try:
            z = scale_to_per_antenna_boundary(pa, zf(h))
        except ValueError:
            record("zf", None)
        else:
            record("zf", _min_scale_to_rate(pa, h, z, scen.n0, r0))
        return rows

    table = ResultTable()
    for rows in _map_realizations(cfg.n_realizations, one, threads):
        table.rows.extend(rows)
    table.add_means()
    table.add_cdf("rho_cons_dbm")
    return table, []


def _run_convergence(cfg, out_dir, threads):
    pa = build_pa_array(cfg.pa, cfg.b)
    scen = _resolve_scenario(cfg)
    if scen.rho_tot is None:
        raise ValueError("convergence needs scenario.rho_tot_dbm")
    run_ee = scen.r0 is not None
    n_len = cfg.optimizer.n_iter + 1

    def one(r):
        rng = RngStream(cfg.master_seed, r)
        h = _make_channel(cfg, rng.derive(0)).h
        p, tr = dab(pa, h, cfg.optimizer, scen, rng=rng.derive(1))
        rows = [(r, "dab", "rate", sum_rate_of(pa, h, p, scen.n0))]
        dab_obj = tr.best_trace.objective
        ee_obj = None
        if run_ee:
            from .optimize import RateTargetInfeasibleError
            try:
                p_ee, tr_ee = ee_dab(pa, h, cfg.optimizer, scen,
                                     rng=rng.derive(2))
            except RateTargetInfeasibleError:
                rows.append((r, "ee_dab", "rho_cons_dbm", float("nan")))
                rows.append((r, "ee_dab", "feasible", 0.0))
            else:
                rows.append((r, "ee_dab", "rho_cons_dbm",
                             watts_to_dbm(_consumed(pa, p_ee))))
                rows.append((r, "ee_dab", "feasible", 1.0))
                obj = tr_ee.s2.objective
                ee_obj = np.concatenate(
                    [obj, np.full(n_len - obj.size, obj[-1])])
        return rows, dab_obj, ee_obj

    results = _map_realizations(cfg.n_realizations, one, threads)
    table = ResultTable()
    files = []
    for rows, _, _ in results:
        table.rows.extend(rows)
    table.add_means()

    dab_mean = np.mean(np.stack([d for _, d, _ in results]), axis=0)
    fname = "convergence_dab.csv"
    with open(out_dir / fname, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["iter", "mean_objective"])
        for i, v in enumerate(dab_mean):
            w.writerow([i, repr(float(v))])
    files.append(fname)

    ee_objs = [e for _, _, e in results if e is not None]
    if ee_objs:
        ee_mean = np.mean(np.stack(ee_objs), axis=0)
        fname = "convergence_ee_dab.csv"
        with open(out_dir / fname, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["iter", "mean_objective_w", "mean_objective_dbm"])
            for i, v in enumerate(ee_mean):
                w.writerow([i, repr(float(v)), repr(watts_to_dbm(v))])
        files.append(fname)
    return table, files


def _run_oob_psd(cfg, out_dir, threads):
    if cfg.u != 1:
        raise ValueError("oob_psd experiment is single-user")
    scen = _resolve_scenario(cfg)
    grid_dbm = [float(g) for g in
                cfg.params.get("rho_max_dbm_grid", [15.0, 20.0, 25.0])]
    n_seeds = int(cfg.params.get("n_seeds", 5))
    aod = np.deg2rad(float(cfg.params.get("aod_deg", 100.0)))
    include_linear = bool(cfg.params.get("include_linear", True))
    ofdm = OfdmConfig(
        n_fft=int(cfg.params.get("n_fft", 1024)),
        n_symbols=int(cfg.params.get("n_symbols", 200)))
    h = los_channel(aod, cfg.b)[:, None]

    def pa_with_rho(spec, rho_dbm, linear=False):
        spec = dict(spec)
        spec["kind"] = "equal"
        spec["rho_max_dbm"] = rho_dbm
        if linear:
            spec["beta_odd"] = [spec.get(
                "beta_odd", _DEFAULT_PA["beta_odd"])[0]]
            spec["beta_even"] = []
        return build_pa_array(spec, cfg.b)

    cases = [(f"rho_max@{g:g}", pa_with_rho(cfg.pa, g)) for g in grid_dbm]
    if include_linear:
        cases.append(("linear", pa_with_rho(cfg.pa, max(grid_dbm),
                                            linear=True)))
    work = [(ci, s) for ci in range(len(cases)) for s in range(n_seeds)]

    def one(k):
        ci, s = work[k]
        name, pa_i = cases[ci]
        rng = RngStream(cfg.master_seed, s, (ci,))
        p, _ = dab(pa_i, h, cfg.optimizer, scen, constraint="per_antenna",
                   rng=rng.derive(0))
        idx, psd = worst_antenna_psd(pa_i, p, ofdm, rng.derive(1))
        return [(s, name, "shoulder_db", shoulder_level_db(psd, ofdm)),
                (s, name, "worst_antenna", float(idx))], psd

    results = _map_realizations(len(work), one, threads)
    table = ResultTable()
    files = []
    for k, (rows, psd) in enumerate(results):
        table.rows.extend(rows)
        ci, s = work[k]
        if s == 0:
            name = cases[ci][0].replace("@", "_").replace(".", "p")
            fname = f"psd_{name}dbm.csv" if name != "linear" \
                else "psd_linear.csv"
            write_psd_csv(out_dir / fname, psd)
            files.append(fname)
    table.add_means()
    return table, files


def _run_gradcheck(cfg, out_dir, threads):
    pa = build_pa_array(cfg.pa, cfg.b)
    if pa.order != 1:
        raise ValueError("gradcheck compares the third-order closed form")
    n_inst = int(cfg.params.get("n_instances", 5))
    n0 = float(cfg.params.get("n0", 1.0))

    def one(r):
        rng = RngStream(cfg.master_seed, r)
        h = sample_circular_gaussian((cfg.b, cfg.u), 1.0, rng.derive(0))
        p = sample_circular_gaussian((cfg.b, cfg.u), 1.0, rng.derive(1))
        g_closed = grad_sum_rate_closed(pa, h, p, n0)
        g_ref = grad_sum_rate_central(pa, h, p, n0,
                                      delta=cfg.optimizer.delta)
        rel = (np.linalg.norm(g_closed - g_ref)
               / np.linalg.norm(g_ref))
        return [(r, "dab", "grad_rel_error", rel)]

    table = ResultTable()
    for rows in _map_realizations(n_inst, one, threads):
        table.rows.extend(rows)
    worst = float(np.max(table.values(metric="grad_rel_error")))
    table.rows.append(("max", "dab", "grad_rel_error", worst))
    table.add_means()
    return table, []


_RUNNERS = {
    "pattern": _run_pattern,
    "rate_cdf": _run_rate_cdf,
    "snr_sweep": _run_snr_sweep,
    "power_control": _run_power_control,
    "ee_cdf": _run_ee_cdf,
    "convergence": _run_convergence,
    "oob_psd": _run_oob_psd,
    "gradcheck": _run_gradcheck,
}


def run_experiment(cfg: ExperimentConfig, threads=1):
    """Run one experiment end to end: results.csv, any per-experiment CSVs,
    and manifest.json in cfg.out_dir. Returns the ResultTable."""
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    table, files = _RUNNERS[cfg.experiment](cfg, out_dir, max(1, threads))
    table.to_csv(out_dir / "results.csv")
    manifest = {
        "experiment": cfg.experiment,
        "config": cfg.resolved(),
        "master_seed": cfg.master_seed,
        "code_version": __version__,
        "outputs": ["results.csv", *files],
    }
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return table
