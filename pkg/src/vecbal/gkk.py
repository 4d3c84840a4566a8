"""Multi-phase differencing driver with a final REDUCE."""
from __future__ import annotations

import functools
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _config
from .core import DiscrepancyReport, Signing, VectorSet, discrepancy
from .dist import BoundedDensity
from .errors import CleanupFailure, ValidationError
from .prdc import PhaseDiagnostics, initial_state, per_axis_count, run_phase
from .reduce import reduce_full
from .rng import RngStream

C_STAR = 1.0 / (2.0 * math.log(10.0 / 3.0))
TRACK_RTOL = 1e-9


def phase_count(n: int) -> int:
    """T = ceil(C* ln n), at least one phase."""
    if n < 2:
        return 1
    return max(1, math.ceil(C_STAR * math.log(n)))


def alpha_schedule(n: int, m: int, sizes, delta: float = 1.0) -> list[float]:
    """alpha_1 = delta and alpha_{t+1} = alpha_t / ceil(sizes_t^(1/(4m)))."""
    alphas = [float(delta)]
    for s in sizes:
        if s < 1:
            raise ValidationError("set sizes must be positive")
        alphas.append(alphas[-1] / per_axis_count(int(s), m))
    return alphas


@functools.lru_cache(maxsize=None)
def estimate_c_star(m: int, directions: int = 100, samples: int = 100_000, seed: int = 20240229) -> float:
    """Monte Carlo lower estimate of min_nu E|<nu, u>| / alpha, u triangular on [-alpha, alpha]^m.

    The minimum over random unit directions of the sample mean, less three
    standard errors.  Scale free, so alpha = 1.
    """
    stream = RngStream(seed, (m,))
    gen = stream.generator()
    u = gen.random((samples, m)) - gen.random((samples, m))
    nu = gen.standard_normal((directions, m))
    nu /= np.linalg.norm(nu, axis=1, keepdims=True)
    proj = np.abs(u @ nu.T)
    means = proj.mean(axis=0)
    se = proj.std(axis=0, ddof=1) / math.sqrt(samples)
    return float(np.min(means - 3 * se))


def default_gamma(c_star: float) -> float:
    return max(2.0 / c_star, 2.0)


def default_min_set_size(m: int) -> int:
    return max(4 * 2**m, 64)


@dataclass
class GkkConfig:
    gamma: float | None = None
    c_star: float | None = None
    phase_cap: int | None = None
    min_set_size: int | None = None
    retries: int = 1
    budget_exponent: float = 0.75
    record_configuration: bool = False

    def resolved(self, n: int, m: int) -> "GkkConfig":
        c = self.c_star if self.c_star is not None else estimate_c_star(m)
        g = self.gamma if self.gamma is not None else default_gamma(c)
        cfg = GkkConfig(
            gamma=float(g),
            c_star=float(c),
            phase_cap=int(self.phase_cap) if self.phase_cap is not None else phase_count(n),
            min_set_size=int(self.min_set_size) if self.min_set_size is not None else default_min_set_size(m),
            retries=int(self.retries),
            budget_exponent=float(self.budget_exponent),
            record_configuration=bool(self.record_configuration),
        )
        cfg.validate()
        return cfg

    def validate(self):
        if not (self.c_star and self.c_star > 0):
            raise ValidationError("c_star must be positive")
        if not (self.gamma and self.gamma > 0):
            raise ValidationError("gamma must be positive")
        if self.gamma < 2.0 / self.c_star * (1 - 1e-12):
            raise ValidationError(f"gamma={self.gamma} is below 2/c_star={2.0 / self.c_star:.4f}")
        if self.phase_cap < 1:
            raise ValidationError("phase_cap must be at least 1")
        if self.min_set_size < 1:
            raise ValidationError("min_set_size must be at least 1")
        if self.retries < 0:
            raise ValidationError("retries must be non-negative")


@dataclass
class GkkResult:
    signing: Signing
    report: DiscrepancyReport
    phases: list[PhaseDiagnostics]
    alpha_trace: list[float]
    tracked_value: np.ndarray
    tracking_error: float
    config: GkkConfig
    untouched: int = 0
    ops: int = 0
    final_reduce_inputs: int = 0

    @property
    def sup_norm(self) -> float:
        return self.report.sup_norm

    @property
    def set_sizes(self) -> list[int]:
        return [d.set_size for d in self.phases]

    def to_dict(self) -> dict:
        return {
            "signing": str(self.signing),
            "sup_norm": self.report.sup_norm,
            "coordinate_sums": [float(x) for x in self.report.coordinate_sums],
            "tracked_value": [float(x) for x in self.tracked_value],
            "tracking_error": self.tracking_error,
            "alpha_trace": list(self.alpha_trace),
            "untouched": self.untouched,
            "ops": self.ops,
            "final_reduce_inputs": self.final_reduce_inputs,
            "config": asdict(self.config),
            "phases": [d.to_dict() for d in self.phases],
        }


def tracking_tolerance(X: VectorSet, recomputed) -> float:
    # relative 1e-9, floored at the rounding noise of the first-phase sums
    scale = float(np.abs(recomputed).max(initial=0.0))
    floor = X.count * np.finfo(float).eps * float(np.abs(X.data).max())
    return TRACK_RTOL * max(scale, floor)


def gkk_run(X, rho: BoundedDensity, cfg: GkkConfig | None = None, rng=0) -> GkkResult:
    """Sign the columns of X; ``rng`` is an RngStream or an integer seed."""
    if not isinstance(X, VectorSet):
        X = VectorSet(X)
    m, n = X.dim, X.count
    if n < 2:
        raise ValidationError("need at least two columns")
    cfg = (cfg or GkkConfig()).resolved(n, m)
    stream = rng if isinstance(rng, RngStream) else RngStream(int(rng))

    state = initial_state(X, rho)
    forest = state.forest
    phases: list[PhaseDiagnostics] = []
    alphas = [state.alpha]
    ops = 0
    for t in range(1, cfg.phase_cap + 1):
        if state.size < cfg.min_set_size:
            break
        mark = forest.checkpoint()
        for attempt in range(cfg.retries + 1):
            try:
                new_state, diag = run_phase(
                    state,
                    cfg.gamma,
                    stream.child(t, attempt),
                    record_configuration=cfg.record_configuration,
                    budget_exponent=cfg.budget_exponent,
                )
                break
            except CleanupFailure:
                forest.rollback(mark)
                if attempt == cfg.retries:
                    raise
        diag.attempt = attempt
        phases.append(diag)
        ops += diag.ops
        if diag.terminal:
            break
        if _config.CHECK_INVARIANTS:
            new_state.check(cfg.gamma)
        state = new_state
        alphas.append(state.alpha)

    pool_values = np.vstack([state.v_value[None, :], state.values])
    pool_nodes = np.r_[state.v_node, state.nodes].astype(np.int64)
    red = reduce_full(pool_values.T)
    ops += pool_values.shape[0] * m + red.iterations * (m + 1) ** 2
    root = forest.chain(pool_nodes, red.signing.signs)
    raw = forest.leaf_signs(root) if root >= 0 else np.zeros(n, dtype=np.int8)
    outside = raw == 0
    untouched = int(np.count_nonzero(outside))
    signing = Signing(np.where(outside, 1, raw))
    report = discrepancy(X, signing)

    tracked = red.value
    if untouched:
        # columns outside every support keep sign +1
        tracked = tracked + X.data[:, outside].sum(axis=1)
    err = float(np.abs(tracked - report.coordinate_sums).max())
    if _config.CHECK_INVARIANTS and err > tracking_tolerance(X, report.coordinate_sums):
        raise AssertionError(f"tracked final vector is off by {err:.3e}")
    return GkkResult(
        signing=signing,
        report=report,
        phases=phases,
        alpha_trace=alphas,
        tracked_value=np.asarray(tracked, dtype=np.float64),
        tracking_error=err,
        config=cfg,
        untouched=untouched,
        ops=ops,
        final_reduce_inputs=pool_values.shape[0],
    )


__all__ = [
    "C_STAR",
    "GkkConfig",
    "GkkResult",
    "alpha_schedule",
    "default_gamma",
    "default_min_set_size",
    "estimate_c_star",
    "gkk_run",
    "phase_count",
    "tracking_tolerance",
]
