class VecbalError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(VecbalError, ValueError):
    pass


class ValidationError(VecbalError, ValueError):
    pass


class DomainError(VecbalError, ValueError):
    pass


class SizeError(VecbalError, ValueError):
    pass


class SupportCollisionError(VecbalError):
    """A column was about to be absorbed into two different combinations."""


class ImpossibleStateError(VecbalError):
    pass


class ReduceError(VecbalError):
    def __init__(self, message, residual_rank=None):
        super().__init__(message)
        self.residual_rank = residual_rank


class CleanupFailure(VecbalError):
    """Clean-up ran out of draws before the carried vector got small enough."""

    def __init__(self, message, best_norm, draws):
        super().__init__(message)
        self.best_norm = best_norm
        self.draws = draws
