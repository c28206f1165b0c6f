"""Exception types shared across the package."""


class PballError(Exception):
    """Base class for all package errors."""


class DomainError(PballError, ValueError):
    """Argument outside the domain of validity (radius, sign constraint, ...)."""


class SingularPointError(PballError, ZeroDivisionError):
    """Evaluation at a point where the warping profile vanishes."""


class ProfileError(PballError, ValueError):
    """A warping profile, model or solution profile violates its invariants."""


class SaturationError(PballError, OverflowError):
    """A reaction term exceeded the representable range (|f| > 1e300)."""


class AssemblyError(PballError, ValueError):
    """Non-finite or malformed data fed to the discrete operator."""


class NewtonDivergenceError(PballError, RuntimeError):
    """Damped Newton exhausted its line search without reaching tolerance."""


class SupportError(PballError, ValueError):
    """Test function does not vanish where the quadratic form requires it."""


class AlphaRangeError(PballError, ValueError):
    """Weight exponent outside the admissible interval [1, alpha_max)."""


class EigenConvergenceError(PballError, RuntimeError):
    """Inverse power iteration failed to converge."""


class UnboundedLambdaStarError(PballError, RuntimeError):
    """No divergence found while doubling lambda; contradicts superlinear theory."""


class BranchError(PballError, ValueError):
    """Invalid branch request (bad samples, too few points near the fold, ...)."""


class MinimalityError(PballError, RuntimeError):
    """Cold-restart certification failed to reproduce a warm-started solution."""


class ConfigError(PballError, ValueError):
    """Configuration file violates the schema."""


class ExpressionError(ConfigError):
    """Expression string outside the supported arithmetic grammar."""
