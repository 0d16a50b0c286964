"""Exception hierarchy shared across the package."""


class SpartaError(Exception):
    """Base class for all errors raised by this package."""


class InvalidAngle(SpartaError):
    """Angle input is not a finite real number."""


class DimensionError(SpartaError):
    """Vector length or bin geometry mismatch between operands."""


class GenerationError(SpartaError):
    """Terrain or graph generation request cannot be satisfied."""


class BoundsError(SpartaError):
    """Requested window or footprint falls outside the available area."""


class EmptyInput(SpartaError):
    """Operation requires a nonempty input."""


class HeadContractError(SpartaError):
    """Angle argument passed (or missing) against the decoder head's contract."""


class TrainingDiverged(SpartaError):
    """Loss became non-finite during gradient descent."""


class UnderdeterminedFit(SpartaError):
    """Too few distinct angles to identify the Fourier coefficients."""


class FormatError(SpartaError):
    """Persisted file is corrupt, empty, or has an unsupported version."""


class CacheFull(SpartaError):
    """Cache reached its max-entries guard; nothing is evicted silently."""


class NoPath(SpartaError):
    """No feasible path exists under the given risk threshold."""


class ConfigError(SpartaError):
    """Experiment or CLI configuration is invalid."""
