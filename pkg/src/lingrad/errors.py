"""Exception types shared across the package."""


class LingradError(Exception):
    """Base class for all package-specific errors."""


class ShapeMismatchError(LingradError, ValueError):
    """An array argument has dimensions incompatible with the operation."""


class SingularPointError(LingradError, ValueError):
    """Gradient requested at a point where the integrand is not differentiable."""


class RecessionConvergenceError(LingradError, RuntimeError):
    """Richardson extrapolation of f(x, t*xi)/t did not stabilize."""


class ProxFailureError(LingradError, RuntimeError):
    """Inner solve of a proximal subproblem did not converge."""


class DualRangeError(LingradError, ValueError):
    """A dual argument lies outside the closure of the gradient range."""


class DomainError(LingradError, ValueError):
    """A spatial point violates a geometric precondition."""


class ResolutionError(LingradError, ValueError):
    """Grid resolution too coarse for the requested shape."""


class InvalidFieldError(LingradError, ValueError):
    """A field contains NaN or has an inconsistent shape."""


class InstabilityError(LingradError, RuntimeError):
    """Primal-dual iteration diverged; suggests smaller step sizes."""


class SpecFileError(LingradError, ValueError):
    """Problem-spec file could not be parsed or validated."""
