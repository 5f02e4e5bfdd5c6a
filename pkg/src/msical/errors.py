"""Exception taxonomy.

Two top-level families so the CLI can map failures to exit codes:
``ConfigError`` covers everything the caller got wrong (bad parameters,
incompatible shapes, unusable data), ``NumericalError`` covers failures
that arise while computing (non-convergence, singular systems).
"""


class MsicalError(Exception):
    """Base class for all package errors."""


class ConfigError(MsicalError):
    """Caller-side problem: bad arguments, shapes, or input data."""


class NumericalError(MsicalError):
    """Computation-side problem: convergence, conditioning, reliability."""


class ParameterDomainError(ConfigError):
    """A model parameter is outside its admissible domain."""


class SizeError(ConfigError):
    """A signal or collection is too short / too small for the request."""


class ShapeError(ConfigError):
    """Mismatched dimensions between related inputs."""


class ScaleError(ConfigError):
    """Requested wavelet scales violate the depth rule for the data length."""


class DataError(ConfigError):
    """Input data is unusable (NaN/inf, wrong dtype, malformed file)."""


class UnderIdentifiedError(ConfigError):
    """More free parameters than moment conditions."""


class DegenerateWeightsError(ConfigError):
    """Replicate weights are degenerate (all zero durations or factors)."""


class UnsupportedBlockError(ConfigError):
    """A noise block has no representation in the requested context."""


class DataExhaustedError(ConfigError):
    """A noise source is shorter than the chunks the evaluation needs."""


class ConvergenceError(NumericalError):
    """The optimizer failed to produce a usable minimum."""


class ConditioningError(NumericalError):
    """A matrix required by the computation is numerically singular."""


class UnreliableTestError(NumericalError):
    """Too many bootstrap refits failed for the test to be trusted."""
