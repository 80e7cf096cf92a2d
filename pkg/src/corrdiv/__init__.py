"""Correlation-diversity Monte Carlo engine for downlink zero-forcing MU-MIMO."""

from .corrmodels import (
    CorrelationFactor,
    CorrelationMatrix,
    CorrelationModelSpec,
    average_correlation,
    build_clerckx,
    build_exponential,
    build_one_ring,
    factor,
)
from .errors import (
    CalibrationError,
    CorrDivError,
    DimensionMismatchError,
    IllConditionedChannelError,
    IndefiniteMatrixError,
    InvalidParameterError,
    QuadratureNonconvergenceError,
    RunFailureError,
    ScenarioError,
)
from .kernels import active_backend, gram_eta_stats
from .montecarlo import (
    DropResult,
    Scenario,
    ScenarioResult,
    collect_instantaneous_snr_db,
    empirical_cdf,
    percentile,
    pooled_expected_snr_db,
    run_drop,
    run_scenario,
)
from .propagation import (
    GeometryConfig,
    MeasuredAngularModel,
    TerminalProfile,
    calibrate_attenuation_constant,
    sample_angular_params,
    sample_link_gain,
    sample_terminal_geometry,
)
from .zfcore import (
    ChannelMatrix,
    SnrReport,
    draw_fading,
    expected_sum_se_closed_form,
    expected_zf_snr_closed_form,
    moment_trace_gram_squared,
    neumann_trace_inverse,
    sample_channel,
    zf_eta_exact,
    zf_snr_instantaneous,
)

__version__ = "0.1.0"

__all__ = [
    "CalibrationError",
    "ChannelMatrix",
    "CorrDivError",
    "CorrelationFactor",
    "CorrelationMatrix",
    "CorrelationModelSpec",
    "DimensionMismatchError",
    "DropResult",
    "GeometryConfig",
    "IllConditionedChannelError",
    "IndefiniteMatrixError",
    "InvalidParameterError",
    "MeasuredAngularModel",
    "QuadratureNonconvergenceError",
    "RunFailureError",
    "Scenario",
    "ScenarioError",
    "ScenarioResult",
    "SnrReport",
    "TerminalProfile",
    "active_backend",
    "average_correlation",
    "build_clerckx",
    "build_exponential",
    "build_one_ring",
    "calibrate_attenuation_constant",
    "collect_instantaneous_snr_db",
    "draw_fading",
    "empirical_cdf",
    "expected_sum_se_closed_form",
    "expected_zf_snr_closed_form",
    "factor",
    "gram_eta_stats",
    "moment_trace_gram_squared",
    "neumann_trace_inverse",
    "percentile",
    "pooled_expected_snr_db",
    "run_drop",
    "run_scenario",
    "sample_angular_params",
    "sample_channel",
    "sample_link_gain",
    "sample_terminal_geometry",
    "zf_eta_exact",
    "zf_snr_instantaneous",
]
