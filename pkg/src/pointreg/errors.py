"""Exception hierarchy shared by all modules."""


class PointRegError(Exception):
    """Base class for every error raised by pointreg."""


class NotSymmetric(PointRegError, ValueError):
    pass


class NoConvergence(PointRegError, RuntimeError):
    pass


class NotPSD(PointRegError, ValueError):
    pass


class DimensionMismatch(PointRegError, ValueError):
    pass


class ZeroWeightMass(PointRegError, ValueError):
    pass


class IllPosed(PointRegError):
    """The weighted problem has no unique optimal rotation.

    Raised for separable (uncoupled) weights, where the cross-covariance
    vanishes, and for numerically rank-deficient cross-covariance.
    """


class RankDeficient(IllPosed):
    pass


class DegenerateSource(IllPosed):
    """All weighted source points coincide, so no scale can be fitted."""


class DegenerateSet(PointRegError, ValueError):
    pass


class AllPairsPruned(PointRegError):
    pass


class InvalidConfig(PointRegError, ValueError):
    pass


class InvalidSpec(PointRegError, ValueError):
    pass


class NoAlignment(PointRegError):
    pass
