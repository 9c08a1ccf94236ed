"""Exception types shared across the package."""


class LightObsError(Exception):
    """Base class for all package-specific errors."""


class DomainError(LightObsError):
    """A point lies outside the manifold or its boundary chart."""


class PreconditionError(LightObsError):
    """An argument violates a documented precondition (wrong causal type,
    not tangent, not on the boundary, ...)."""


class DegenerateBoundaryError(LightObsError):
    """The boundary defining function has a degenerate or non-spacelike
    gradient where a normal is required."""


class InsufficientDataError(LightObsError):
    """Too few sample points to run a local fit."""


class FitError(LightObsError):
    """A least-squares fit is underdetermined or numerically degenerate."""


class ChartError(LightObsError):
    """Chart construction failed (conditioning above threshold, or no
    usable curve family)."""


class TrackingError(LightObsError):
    """Continuous tracking of a regular point broke down (jump detected)."""


class StratumError(LightObsError):
    """A finite-difference bundle crossed into a different reflection
    stratum; retry with a smaller step."""


class TriangulationError(LightObsError):
    """Backward ray pair has no intersection within tolerance."""


class ConfigError(LightObsError):
    """Invalid or unparseable experiment configuration."""
