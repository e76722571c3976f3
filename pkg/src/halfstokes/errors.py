"""Exception types shared across the package."""


class HalfStokesError(Exception):
    """Base class for all package errors."""


class ValidationError(HalfStokesError, ValueError):
    """Input failed a structural check (bad spec, bad config)."""


class SingularPoint(HalfStokesError, ValueError):
    """Evaluation requested at a pole of a kernel or weight."""


class GridMismatch(ValidationError):
    pass


class GridTooSmall(ValidationError):
    pass


class BadParameters(ValidationError):
    pass


class NonpositiveTime(ValidationError):
    pass


class DegenerateData(ValidationError):
    pass


class DatumNotSolenoidal(ValidationError):
    pass


class BoxTooSmall(ValidationError):
    pass


class StencilUnavailable(ValidationError):
    pass


class StabilityViolation(ValidationError):
    """Explicit time step above the diffusion stability bound."""


class NumericalFailure(HalfStokesError, ArithmeticError):
    """A computation produced non-finite values or failed to converge."""


class QuadratureFailure(NumericalFailure):
    pass
