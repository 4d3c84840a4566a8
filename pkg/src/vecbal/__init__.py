"""Vector balancing: exact oracle, fractional rounding, multi-phase differencing
and threshold numerics for random instances."""
from .core import (
    CombinationForest,
    DiscrepancyReport,
    SignedCombination,
    Signing,
    VectorSet,
    brute_force_min,
    discrepancy,
    signed_sum,
)
from .dist import BoundedDensity, parse_density, sample_instance
from .errors import (
    CleanupFailure,
    DimensionError,
    DomainError,
    ReduceError,
    SizeError,
    SupportCollisionError,
    ValidationError,
    VecbalError,
)
from .gkk import GkkConfig, GkkResult, gkk_run
from .reduce import reduce, reduce_bound, reduce_full
from .rng import RngStream

__version__ = "0.1.0"
