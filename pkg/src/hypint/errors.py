"""Exception hierarchy shared by all hypint modules."""


class HypintError(Exception):
    """Base class for every error raised by this package."""


class DomainError(HypintError, ValueError):
    """Input outside the domain of an operation (non-finite, wrong side of a curve, ...)."""


class DegenerateInputError(HypintError, ValueError):
    """Input is a degenerate configuration, e.g. two coincident points."""


class OnCurveError(HypintError, ValueError):
    """A point that must avoid a curve lies within tolerance of it."""


class ThetaResolutionError(HypintError, RuntimeError):
    """The angle field could not be unwrapped at the requested resolution."""


class BudgetError(HypintError, RuntimeError):
    """An adaptive routine exhausted its budget before reaching tolerance."""


class GenerationError(HypintError, RuntimeError):
    """A surface or mesh generator produced an invalid object."""


class GeometryInconsistencyError(HypintError, RuntimeError):
    """Mesh, curve and sampler disagree (e.g. a negative count integrand)."""


class ConfigError(HypintError, ValueError):
    """Invalid run configuration or input file."""
