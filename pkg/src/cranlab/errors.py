"""Exception hierarchy.

Every error derives from :class:`CranLabError` and from the closest builtin
exception, so callers can catch either.
"""

from typing import Any, Dict, Optional


class CranLabError(Exception):
    """Base class for all toolkit errors."""


# Matrix algebra
class NotHermitian(CranLabError, ValueError):
    """Matrix is not Hermitian within tolerance."""


class NotPsd(CranLabError, ValueError):
    """Matrix has an eigenvalue below the PSD tolerance."""


class NonFiniteEntries(CranLabError, ValueError):
    """Matrix contains NaN or infinite entries."""


class SingularMatrix(CranLabError, ValueError):
    """Matrix is not strictly positive definite."""


class SingularConditioningBlock(SingularMatrix):
    """Conditioning block of a Schur complement is not strictly PD."""


class SingularQuantizer(SingularMatrix):
    """Quantization noise covariance is singular (infinite-rate signal)."""


class IndexOutOfRange(CranLabError, IndexError):
    """Block index outside the partition."""


class DuplicateIndex(CranLabError, ValueError):
    """Block index repeated within an index set."""


class DimensionMismatch(CranLabError, ValueError):
    """Operand shapes are inconsistent."""


# Configuration
class InvalidConfig(CranLabError, ValueError):
    """Configuration object violates its invariants."""


class InvalidOrder(InvalidConfig):
    """Decoding, precoding or compression order is not a permutation."""


class CrossBlocksNotZero(InvalidConfig):
    """Quantization covariance has cross-RU blocks where none are allowed."""


class PowerBudgetExceeded(InvalidConfig):
    """Downlink plan exceeds a per-RU power budget."""


class InvalidRange(CranLabError, ValueError):
    """Scalar parameter outside its admissible range."""


# Quantizer fitting
class CapTooSmall(CranLabError, ValueError):
    """Fronthaul cap cannot be met even with extremely coarse quantization."""


class NonMonotone(CranLabError, RuntimeError):
    """Fronthaul cost failed to decrease with the quantization level."""


# IQ chain
class InvalidRatio(CranLabError, ValueError):
    """Resampling ratio is not a positive rational."""


class MalformedBitstream(CranLabError, ValueError):
    """Compressed IQ bitstream cannot be parsed."""


# Experiments
class SchemaError(CranLabError, ValueError):
    """Scenario, experiment spec or manifest fails validation."""


class ScenarioNotFound(CranLabError, FileNotFoundError):
    """Scenario file does not exist."""


class EngineError(CranLabError, RuntimeError):
    """An engine failed while evaluating one experiment cell."""

    def __init__(self, message: str, cell: Optional[Dict[str, Any]] = None):
        """Initialize engine error.

        Args:
            message: Description of the failure
            cell: Sweep coordinates and seed of the failing cell
        """
        self.message = message
        self.cell = dict(cell or {})
        if self.cell:
            coords = ", ".join(f"{k}={v}" for k, v in self.cell.items())
            message = f"{message} [cell: {coords}]"
        super().__init__(message)

    def __reduce__(self):
        # keep the cell when crossing a worker-process boundary
        return (type(self), (self.message, self.cell))
