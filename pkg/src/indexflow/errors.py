"""Exception taxonomy shared by all modules."""


class IndexflowError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(IndexflowError):
    """An argument lies outside the domain an operation is defined on."""


class ContractViolation(IndexflowError):
    """An input violates a documented invariant (e.g. a non-Hermitian matrix)."""


class ResolutionError(IndexflowError):
    """The requested computation cannot be certified at the available resolution.

    Typically cured by a finer sample grid or a smaller step size.
    """


class ApproximationError(IndexflowError):
    """A requested approximation quality could not be reached."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class RepresentationError(IndexflowError):
    """An operation needs an analytic representation the input does not admit."""


class ChartDomainError(DomainError):
    """A subspace falls outside the domain of the requested chart."""

    def __init__(self, message, intersection_dim=None):
        super().__init__(message)
        self.intersection_dim = intersection_dim


class IllConditionedPairError(IndexflowError):
    """A pair of subspaces is numerically too close to being non-complementary."""


class SearchFailure(IndexflowError):
    """A randomized search exhausted its attempts."""

    def __init__(self, message, best=None, margin=None):
        super().__init__(message)
        self.best = best
        self.margin = margin


class ModelInconsistencyError(IndexflowError):
    """Two computation routes that must agree produced incompatible data."""


class ConvergenceError(IndexflowError):
    """A discretized quantity failed its resolution-doubling stability test."""
