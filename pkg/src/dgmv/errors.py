"""Exception hierarchy.

``ModelError`` covers bad inputs (the CLI maps it to exit code 2),
``SolverError`` covers numerical failures of well-formed problems (exit 3).
"""


class DgmvError(Exception):
    pass


class ModelError(DgmvError, ValueError):
    pass


class SolverError(DgmvError, ArithmeticError):
    pass


# market
class NotSymmetric(ModelError):
    pass


class NotPositiveDefinite(ModelError):
    pass


class BadDimension(ModelError):
    pass


class NonzeroDrift(ModelError):
    pass


class ZeroBookValue(ModelError):
    pass


# instruments
class NegativeUnderlying(ModelError):
    pass


class BadOptionParams(ModelError):
    pass


class AsymmetricCustomGamma(ModelError):
    pass


# reduction
class DimensionMismatch(ModelError):
    pass


class EigenFailure(SolverError):
    pass


class SingularH(SolverError):
    def __init__(self, message, direction=None):
        super().__init__(message)
        self.direction = direction


# moments
class OutOfDomain(SolverError):
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


# optimizer
class Infeasible(SolverError):
    pass


class SingularKKT(SolverError):
    pass


class NotPD(SolverError):
    pass


class ZeroValues(SolverError):
    pass


# oracle
class CustomNotRepriceable(ModelError):
    pass


class ExpiryCrossed(ModelError):
    pass
