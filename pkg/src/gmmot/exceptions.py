"""Errors raised by gmmot solvers and model constructors."""


class GmmOtError(ValueError):
    """Base class for all gmmot-specific errors."""


class DimensionMismatch(GmmOtError):
    """Operands live in incompatible dimensions or have inconsistent shapes."""


class DimensionOrder(GmmOtError):
    """An embedding was requested from a lower- into a higher-dimensional space."""


class NotSymmetric(GmmOtError):
    """A matrix that must be symmetric is not, beyond tolerance."""


class NotPSD(GmmOtError):
    """A matrix that must be positive semi-definite has a genuinely negative eigenvalue."""


class SingularSourceCovariance(GmmOtError):
    """The source covariance is singular even after regularization."""


class DegenerateSource(GmmOtError):
    """The source Gaussian is degenerate where a non-singular one is required."""


class InfeasibleWeights(GmmOtError):
    """Marginal weight vectors whose total masses differ; no coupling exists."""


class NumericalUnderflow(GmmOtError):
    """The entropic scaling underflowed; the regularization is too small for the cost scale."""


class TooFewPoints(GmmOtError):
    """Fewer data points than mixture components requested."""


class DegenerateComponent(GmmOtError):
    """A mixture component collapsed onto too few points with no covariance regularization."""


class SingularComponent(GmmOtError):
    """A component covariance cannot be factorized even after regularization."""


class SingularInnerMatrix(GmmOtError):
    """An inner matrix that must be inverted in the gradient is singular."""


class RankDeficientP(GmmOtError):
    """A projection matrix lost column rank where full rank is required."""


class ZeroDensity(GmmOtError):
    """The mixture density underflowed to zero at a query point."""
