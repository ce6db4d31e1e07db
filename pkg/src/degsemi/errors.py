"""Exception hierarchy shared by all modules."""


class DegsemiError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(DegsemiError, ValueError):
    pass


class SingularGram(DegsemiError):
    """Gram matrix of a basis is not numerically positive definite."""


class SingularSystem(DegsemiError):
    """A shifted linear system could not be factorized (spectral parameter near the spectrum)."""


class NotSectorial(DegsemiError):
    pass


class NotSymmetric(DegsemiError):
    pass


class RealLambda(DegsemiError, ValueError):
    pass


class ExpOverflow(DegsemiError, OverflowError):
    pass


class ContourOutsideSector(DegsemiError, ValueError):
    pass


class QuadratureUnstable(DegsemiError):
    pass


class ProjectionMismatch(DegsemiError):
    """Small-time semigroup value disagrees with the orthogonal projection beyond its bound."""


class ModesExceedGrid(DegsemiError, ValueError):
    pass


class QuadratureOrderTooLow(DegsemiError):
    pass


class EmptyDomain(DegsemiError, ValueError):
    pass


class InitialDataNotConverging(DegsemiError):
    pass


class SolverStagnation(DegsemiError):
    pass


class NotPositiveDefinite(DegsemiError):
    pass


class CellUnderResolved(DegsemiError, ValueError):
    pass


class SupportViolation(DegsemiError, ValueError):
    pass


class TruncationTooSmall(DegsemiError, ValueError):
    pass


class ProbeSupportTooLarge(DegsemiError, ValueError):
    pass


class ConfigInvalid(DegsemiError):
    pass


class ExperimentFailed(DegsemiError):
    pass


class IoError(DegsemiError, OSError):
    pass
