"""Exception types shared across modules."""


class PsdRankError(Exception):
    """Base class for all library errors."""


class DimensionMismatch(PsdRankError):
    pass


class DomainError(PsdRankError):
    pass


class RankMismatch(PsdRankError):
    pass


class NoConvergence(PsdRankError):
    """Eigensolver hit its sweep cap without converging."""


class NonTriangularLength(PsdRankError):
    """Vector length is not k(k+1)/2 for any integer k."""


class OnesNotInSpan(PsdRankError):
    """Ones-first factorization requested but the all-ones vector is not in the column span."""


class NotNested(PsdRankError):
    """Inner body has a vertex outside the outer body."""


class OriginNotInterior(PsdRankError):
    pass


class ZeroMatrix(PsdRankError):
    pass


class NotConvex(PsdRankError):
    pass


class CollinearVertices(PsdRankError):
    pass


class WrongVertexCount(PsdRankError):
    pass


class DegenerateParameters(PsdRankError):
    pass


class VertexNotInLift(PsdRankError):
    pass


class NoDualWitness(PsdRankError):
    pass


class RowCountMismatch(PsdRankError):
    pass


class NonpositiveScalar(PsdRankError):
    pass


class SearchFailed(PsdRankError):
    pass


class NotStrictlyElliptic(PsdRankError):
    """Quadratic part of the fitted conic is singular; no bounded affine normalization."""


class UnverifiedCertificate(PsdRankError):
    pass
