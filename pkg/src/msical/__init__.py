"""Multi-signal stochastic calibration of inertial sensors.

Simulates composite noise processes (white noise, quantization noise,
first-order autoregressions, random walks, drifts), estimates Haar
wavelet variance with confidence intervals and bootstrap covariances,
fits composite models to one or many replicate signals by wavelet-
moment matching, tests whether replicates share a single parameter
vector, and evaluates fitted models inside a Monte Carlo navigation
filter.
"""

__version__ = "0.1.0"

from .errors import (
    ConditioningError,
    ConfigError,
    ConvergenceError,
    DataError,
    DataExhaustedError,
    DegenerateWeightsError,
    MsicalError,
    NumericalError,
    ParameterDomainError,
    ScaleError,
    ShapeError,
    SizeError,
    UnderIdentifiedError,
    UnreliableTestError,
    UnsupportedBlockError,
)
from .fit import (
    FitOptions,
    FitResult,
    WeightScheme,
    agmwm_fit,
    asymptotic_covariance,
    awv_fit,
    compute_weights,
    gmwm_fit,
    msgmwm_fit,
    resolve_omega,
)
from .inference import TestResult, near_stationarity_test
from .models import (
    Ar1,
    BetaMarginal,
    CompositeModel,
    Drift,
    InternalSensorModel,
    QuantizationNoise,
    RandomWalk,
    Replicate,
    WhiteNoise,
    draw_parameters,
    simulate_path,
)
from .theory import TheoreticalWV, WVEvaluator, theoretical_wv, wv_jacobian, wv_oracle
from .wavelet import WVEstimate, estimate_wv, estimate_wv_cov, haar_coefficients

__all__ = [
    "Ar1",
    "BetaMarginal",
    "CompositeModel",
    "ConditioningError",
    "ConfigError",
    "ConvergenceError",
    "DataError",
    "DataExhaustedError",
    "DegenerateWeightsError",
    "Drift",
    "FitOptions",
    "FitResult",
    "InternalSensorModel",
    "MsicalError",
    "NumericalError",
    "ParameterDomainError",
    "QuantizationNoise",
    "RandomWalk",
    "Replicate",
    "ScaleError",
    "ShapeError",
    "SizeError",
    "TestResult",
    "TheoreticalWV",
    "UnderIdentifiedError",
    "UnreliableTestError",
    "UnsupportedBlockError",
    "WVEstimate",
    "WVEvaluator",
    "WeightScheme",
    "WhiteNoise",
    "agmwm_fit",
    "asymptotic_covariance",
    "awv_fit",
    "compute_weights",
    "draw_parameters",
    "estimate_wv",
    "estimate_wv_cov",
    "gmwm_fit",
    "haar_coefficients",
    "msgmwm_fit",
    "near_stationarity_test",
    "resolve_omega",
    "simulate_path",
    "theoretical_wv",
    "wv_jacobian",
    "wv_oracle",
]
