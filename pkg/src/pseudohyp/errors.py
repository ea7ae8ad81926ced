"""Exception hierarchy shared by every module of the package."""


class PseudoHypError(Exception):
    """Base class for all errors raised by pseudohyp."""


class DimensionMismatch(PseudoHypError, ValueError):
    pass


class NonNegativeNorm(PseudoHypError, ValueError):
    """Raised when a vector cannot be normalized onto the quadric b(x,x) = -1."""


class NotOrthogonal(PseudoHypError, ValueError):
    pass


class RepeatedPoint(PseudoHypError, ValueError):
    pass


class NotIsometry(PseudoHypError, ValueError):
    pass


class PreconditionViolation(PseudoHypError, ValueError):
    pass


class OutOfBall(PseudoHypError, ValueError):
    pass


class BadDirection(PseudoHypError, ValueError):
    pass


class OutsideDomain(PseudoHypError, ValueError):
    pass


class DegenerateEdge(PseudoHypError, ValueError):
    pass


class NotAdmissible(PseudoHypError, ValueError):
    """The boundary map is not an admissible non-negative sphere."""

    def __init__(self, message, worst_pair=None):
        super().__init__(message)
        self.worst_pair = worst_pair


class InvalidParameter(PseudoHypError, ValueError):
    pass


class EmptyInput(PseudoHypError, ValueError):
    pass


class SpacelikeViolation(PseudoHypError, ArithmeticError):
    pass


class NotNormal(PseudoHypError, ValueError):
    pass


class NewtonDivergence(PseudoHypError, ArithmeticError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class SpacelikeLost(PseudoHypError, ArithmeticError):
    pass


class OutsidePolarDomain(PseudoHypError, ValueError):
    pass


class LinkNotSpacelike(PseudoHypError, ValueError):
    pass


class HypothesisViolated(PseudoHypError, ValueError):
    def __init__(self, message, sample=None):
        super().__init__(message)
        self.sample = sample


class ProjectionFailed(PseudoHypError, ArithmeticError):
    pass


class NotRankOne(PseudoHypError, ValueError):
    pass


class NotIncreasing(PseudoHypError, ValueError):
    pass


class NotElliptic(PseudoHypError, ValueError):
    pass


class ConfigError(PseudoHypError, ValueError):
    pass
