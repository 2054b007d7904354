"""Exception types shared across the package."""


class LassoSelectError(Exception):
    """Base class for all package errors."""


class DomainError(LassoSelectError):
    """A design point falls outside the dictionary's declared domain."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class ConfigError(LassoSelectError):
    """A scenario or experiment configuration is unusable as given."""


class ParseError(LassoSelectError):
    """Malformed dataset input; carries the offending row/column when known."""

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class UnsupportedMeasure(LassoSelectError):
    """Population moments requested for a measure that cannot supply them."""


class DegenerateColumn(LassoSelectError):
    """An empirical column norm is too close to zero to weight safely."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class ConvergenceError(LassoSelectError):
    """Coordinate descent exhausted its sweep budget; carries the best iterate."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class SingularSubset(LassoSelectError):
    """The restricted normal equations for a subset are singular."""


class EmptyLambda(LassoSelectError):
    """No coefficient vector of any sparsity enters the approximation ball."""


class ExhaustiveLimit(LassoSelectError):
    """Dictionary too large for exhaustive subset enumeration."""


class DegenerateGram(LassoSelectError):
    """A Gram matrix has a nonpositive diagonal entry."""


class GammaCapExceeded(LassoSelectError):
    """Dictionary size exceeds the declared polynomial growth cap."""


class ExperimentError(LassoSelectError):
    """A Monte Carlo experiment produced no usable replicates."""
