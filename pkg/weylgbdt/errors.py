"""
Exception hierarchy for the GBDT engine.

Every failure the engine can report derives from GBDTError so callers (the CLI in
particular) can map the whole family to an exit status in one place. Errors carry
the diagnostic numbers a caller needs to act on them.
"""
from __future__ import annotations

from typing import Optional


class GBDTError(Exception):
    """Base class for all engine errors."""


class ShapeError(GBDTError, ValueError):
    pass


class NonFiniteError(GBDTError, ValueError):
    pass


class MatrixOverflow(GBDTError, OverflowError):
    """Exponential growth beyond the representable range."""


class SpectraOverlap(GBDTError):
    """F and G share (numerically) an eigenvalue; the Sylvester equation is ill-posed."""

    def __init__(self, separation: float, threshold: float):
        super().__init__(f"spectra overlap: separation {separation:.3e} <= {threshold:.3e}")
        self.separation = separation
        self.threshold = threshold


class NotHermitian(GBDTError, ValueError):
    def __init__(self, what: str, deviation: float, threshold: float):
        super().__init__(f"{what} is not Hermitian: deviation {deviation:.3e} > {threshold:.3e}")
        self.deviation = deviation
        self.threshold = threshold


class NearSingular(GBDTError):
    def __init__(self, condition: float, limit: float, x: Optional[float] = None):
        where = f" at x={x:.6g}" if x is not None else ""
        super().__init__(f"matrix is near singular{where}: condition {condition:.3e} > {limit:.1e}")
        self.condition = condition
        self.limit = limit
        self.x = x


class IdentityViolated(GBDTError):
    def __init__(self, residual: float, threshold: float):
        super().__init__(
            f"operator identity A S0 - S0 A* = i Pi0 Pi0* violated: residual {residual:.3e} > {threshold:.3e}"
        )
        self.residual = residual
        self.threshold = threshold


class ConstraintViolated(GBDTError, ValueError):
    pass


class NotSkewSymmetric(GBDTError, ValueError):
    pass


class InconsistentLowerPart(GBDTError, ValueError):
    def __init__(self, deviation: float):
        super().__init__(f"supplied lower part contradicts the forced entries (max deviation {deviation:.3e})")
        self.deviation = deviation


class QuadratureNonConvergence(GBDTError):
    pass


class StepSizeUnderflow(GBDTError):
    def __init__(self, x: float, message: str = ""):
        super().__init__(f"integrator step size underflow at x={x:.6g}" + (f": {message}" if message else ""))
        self.x = x


class IdentityDriftExceeded(GBDTError):
    def __init__(self, drift: float, limit: float, x: float):
        super().__init__(f"identity drift {drift:.3e} exceeds {limit:.1e} at x={x:.6g}")
        self.drift = drift
        self.limit = limit
        self.x = x


class OutOfCoverage(GBDTError, ValueError):
    def __init__(self, x: float, lo: float, hi: float):
        super().__init__(f"x={x:.6g} outside trajectory coverage [{lo:.6g}, {hi:.6g}]")
        self.x = x


class ConsistencyError(GBDTError):
    """Two formulas for the same quantity disagree; this is an engine bug."""


class ProfileEvaluationError(GBDTError):
    def __init__(self, x: float, cause: BaseException):
        super().__init__(f"evaluation failed at x={x:.6g}: {cause}")
        self.x = x
        self.cause = cause


class StencilOutOfDomain(GBDTError, ValueError):
    pass


class ResidualAtNoiseFloor(GBDTError):
    def __init__(self, residual: float, floor: float):
        super().__init__(f"residual {residual:.3e} below noise floor {floor:.1e}; slope is meaningless")
        self.residual = residual
        self.floor = floor


class ConfigError(GBDTError, ValueError):
    """Unparseable or schema-invalid run configuration."""
