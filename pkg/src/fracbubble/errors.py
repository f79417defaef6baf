"""Exception types shared across the package."""


class FracBubbleError(Exception):
    """Base class for all package errors."""


class ConfigError(FracBubbleError):
    """Malformed or inadmissible run configuration."""


# -- model ------------------------------------------------------------------

class DimensionOrderViolation(FracBubbleError):
    """The dimension/order pair violates n > 4s."""


class ExponentRange(FracBubbleError):
    """q outside (0, p) or s outside (0, 1)."""


class SublinearNeedsPositiveWeight(FracBubbleError):
    """q <= 2s/(n-2s) combined with a sign-changing weight."""


class EmptyWeight(FracBubbleError):
    """Weight with no bumps."""


# -- bubble -----------------------------------------------------------------

class NormalizationDiverged(FracBubbleError):
    """Two-point evaluations of the profile constant disagree."""


class GridTooCoarse(FracBubbleError):
    """Quadrature/grid refinement moved a certified quantity too much."""


class MomentDiverges(FracBubbleError):
    """The requested profile moment is not integrable."""


# -- field ------------------------------------------------------------------

class GridMismatch(FracBubbleError):
    """Operands live on different grids."""


# -- landscape --------------------------------------------------------------

class QuadratureNotConverged(FracBubbleError):
    """Two refinement levels of a quadrature disagree beyond tolerance."""


class AmbiguousRegime(FracBubbleError):
    """Sign of the small-scale limit cannot be certified."""


class FitRejected(FracBubbleError):
    """Log-log fit quality below the r^2 gate."""


class SlabNotCertified(FracBubbleError):
    """Boundary sampling could not certify the threshold condition."""


class NoInteriorCriticalPoint(FracBubbleError):
    """All refined candidates converged to the slab boundary."""


# -- reduction --------------------------------------------------------------

class BorderedSolveStalled(FracBubbleError):
    """Krylov iteration on the bordered system stagnated."""


class PositivityLost(FracBubbleError):
    """Corrected profile dropped below the positivity floor on the weight support."""


class NewtonDiverged(FracBubbleError):
    """Newton iteration did not converge within the step budget."""


class NotRequestedKind(FracBubbleError):
    """Critical point list lacks the requested kind."""


# -- regularity -------------------------------------------------------------

class HypothesisViolated(FracBubbleError):
    """A growth-spec inequality failed; the message names it."""


class InsufficientLevels(FracBubbleError):
    """Too few nonzero truncation levels for a recursion fit."""
