"""Distortion-aware linear precoding for the massive MIMO downlink with
nonlinear power amplifiers: Bussgang-based distortion modeling, sum-rate and
consumed-power optimization, radiation patterns, and out-of-band emission
analysis."""

from ._version import __version__
from .bussgang import BussgangDecomposition, SaturationError, bussgang_gain, \
    decompose, distortion_covariance, mc_oracle, normalize_per_antenna, \
    normalize_total_power, scale_to_per_antenna_boundary, \
    total_radiated_power
from .channel import GAMMA_AVG_SQ_DB, ChannelSet, GeometryConfig, \
    corrupt_csit, geometric_channel, los_channel, path_loss_db, \
    sample_user_distances, snr_avg_db, steering_vector
from .experiments import ExperimentConfig, ResultTable, build_pa_array, \
    empirical_cdf, run_experiment
from .metrics import RadiationPattern, ScenarioConfig, energy_efficiency, \
    radiation_pattern, sindr, sum_rate, sum_rate_of
from .numerics import RngStream, poly_positive_real_roots, pseudo_inverse, \
    sample_circular_gaussian
from .oob import OfdmConfig, ofdm_generate, psd_estimate, psd_freq_axis, \
    shoulder_level_db, worst_antenna_psd, write_psd_csv
from .optimize import DabTrace, EeDabTrace, IterTrace, OptimizerConfig, \
    RateTargetInfeasibleError, dab, ee_dab, grad_consumed_numeric, \
    grad_sum_rate, grad_sum_rate_central, grad_sum_rate_closed, \
    grad_sum_rate_numeric, power_control_sweep, scale_to_rate
from .pa import PaArrayModel, PaConstraintError, PaModel, \
    consumed_power_total, load_pa_array, measured_pa_array, pa_apply, \
    pa_apply_array, pa_array_from_dict, pa_array_to_dict, pa_consumed_power, \
    pa_output_power, per_antenna_tx_power, save_pa_array
from .precoders import is_distortion_degenerate, mrt, zero_distortion_array, \
    zero_distortion_pair, zf
from .units import db_to_linear, dbm_to_watts, linear_to_db, watts_to_dbm

__all__ = [
    "__version__",
    "BussgangDecomposition", "SaturationError", "bussgang_gain", "decompose",
    "distortion_covariance", "mc_oracle", "normalize_per_antenna",
    "normalize_total_power", "scale_to_per_antenna_boundary",
    "total_radiated_power",
    "GAMMA_AVG_SQ_DB", "ChannelSet", "GeometryConfig", "corrupt_csit",
    "geometric_channel", "los_channel", "path_loss_db",
    "sample_user_distances", "snr_avg_db", "steering_vector",
    "ExperimentConfig", "ResultTable", "build_pa_array", "empirical_cdf",
    "run_experiment",
    "RadiationPattern", "ScenarioConfig", "energy_efficiency",
    "radiation_pattern", "sindr", "sum_rate", "sum_rate_of",
    "RngStream", "poly_positive_real_roots", "pseudo_inverse",
    "sample_circular_gaussian",
    "OfdmConfig", "ofdm_generate", "psd_estimate", "psd_freq_axis",
    "shoulder_level_db", "worst_antenna_psd", "write_psd_csv",
    "DabTrace", "EeDabTrace", "IterTrace", "OptimizerConfig",
    "RateTargetInfeasibleError", "dab", "ee_dab", "grad_consumed_numeric",
    "grad_sum_rate", "grad_sum_rate_central", "grad_sum_rate_closed",
    "grad_sum_rate_numeric", "power_control_sweep", "scale_to_rate",
    "PaArrayModel", "PaConstraintError", "PaModel", "consumed_power_total",
    "load_pa_array", "measured_pa_array", "pa_apply", "pa_apply_array",
    "pa_array_from_dict", "pa_array_to_dict", "pa_consumed_power",
    "pa_output_power", "per_antenna_tx_power", "save_pa_array",
    "is_distortion_degenerate", "mrt", "zero_distortion_array",
    "zero_distortion_pair", "zf",
    "db_to_linear", "dbm_to_watts", "linear_to_db", "watts_to_dbm",
]
