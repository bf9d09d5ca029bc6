"""Exception hierarchy shared by all modules."""


class FBError(Exception):
    """Base class for every error raised by fbhgm."""


class ValidationError(FBError, ValueError):
    pass


class EigenFailure(FBError):
    pass


class SeriesOverflow(FBError, OverflowError):
    """A partial sum of the series became non-finite."""


class BoundInvalid(FBError):
    """The truncation bound requires ``L < n_from + 1``."""

    def __init__(self, L, n_from):
        super().__init__(f"truncation bound invalid: L={L:.6g} >= n_from+1={n_from + 1}")
        self.L = L
        self.n_from = n_from


class SingularFactor(FBError):
    """A factor matrix is too ill-conditioned to be inverted reliably."""

    def __init__(self, which, cond_estimate):
        super().__init__(f"factor {which} is numerically singular (cond ~ {cond_estimate:.3e})")
        self.which = which
        self.cond_estimate = cond_estimate


class IntegrationError(FBError):
    pass


class StepUnderflow(IntegrationError):
    pass


class MaxSteps(IntegrationError):
    pass


class NonFinite(IntegrationError):
    pass


class EigenvalueCollision(FBError):
    def __init__(self, gap):
        super().__init__(f"eigenvalues of x collide (gap {gap:.3e})")
        self.gap = gap


class AcceptanceTooLow(FBError):
    def __init__(self, rate):
        super().__init__(f"rejection sampler acceptance rate {rate:.3e} is below 1e-6")
        self.rate = rate


class AllStartsFailed(FBError):
    pass
