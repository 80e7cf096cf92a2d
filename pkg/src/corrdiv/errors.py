"""Exception types shared across the package."""


class CorrDivError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(CorrDivError):
    """A constructor or operation received an out-of-contract argument."""


class DimensionMismatchError(CorrDivError):
    """Matrix or list operands do not share a common order."""


class IndefiniteMatrixError(CorrDivError):
    """A correlation matrix has an eigenvalue below the -1e-10 repair floor."""


class QuadratureNonconvergenceError(CorrDivError):
    """Node doubling hit its cap without the integral stabilizing."""


class IllConditionedChannelError(CorrDivError):
    """Gram matrix condition number exceeds the rejection threshold."""


class CalibrationError(CorrDivError):
    """Attenuation-constant calibration failed to converge."""


class ScenarioError(CorrDivError):
    """Scenario file failed parsing or validation.

    Carries an optional file/line location for diagnostics.
    """

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        prefix = ""
        if path is not None:
            prefix = f"{path}:" if line is None else f"{path}:{line}:"
        super().__init__(f"{prefix} {message}" if prefix else message)


class RunFailureError(CorrDivError):
    """A Monte Carlo run aborted (too many rejected trials or failed drops)."""
