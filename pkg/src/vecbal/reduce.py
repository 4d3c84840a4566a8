"""Beck-Fiala style rounding: many vectors in, one signing out.

Starting from the fractional signing s = 0, repeatedly move along a kernel
direction of the instance (restricted to coordinates that are not yet at
+-1) until some coordinate hits the boundary.  Once at most m coordinates
are still fractional, round everything by sign.  The signed sum is then
bounded by the sum of the m largest column sup-norms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _config, _kernels
from .core import Signing, VectorSet
from .errors import ReduceError, ValidationError

FREEZE_TOL = 1e-9
PIVOT_REL = 1e-12
RESIDUAL_REL = 1e-8


@dataclass
class FractionalState:
    s: np.ndarray
    frozen: np.ndarray  # boolean mask, |s_j| == 1 exactly where True

    @classmethod
    def zero(cls, n: int) -> "FractionalState":
        return cls(np.zeros(n), np.zeros(n, dtype=bool))

    @property
    def frozen_count(self) -> int:
        return int(self.frozen.sum())


@dataclass
class ReduceResult:
    signing: Signing
    value: np.ndarray
    bound: float
    iterations: int
    fractional: np.ndarray


def _as_matrix(X) -> np.ndarray:
    if isinstance(X, VectorSet):
        arr = X.data
    else:
        arr = np.asarray(X, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] < 1 or arr.shape[0] < 1:
        raise ValidationError(f"REDUCE needs a non-empty (m, N) matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("REDUCE input contains non-finite entries")
    return np.ascontiguousarray(arr, dtype=np.float64)


def reduce_bound(X) -> float:
    """Sum of the m largest column sup-norms (all of them if N < m)."""
    A = _as_matrix(X)
    norms = np.sort(np.abs(A).max(axis=0))[::-1]
    return math.fsum(norms[: A.shape[0]])


def exact_signed_sum(A: np.ndarray, signs: np.ndarray) -> np.ndarray:
    terms = A * signs[None, :]
    return np.array([math.fsum(row) for row in terms])


def reduce_full(X) -> ReduceResult:
    A = _as_matrix(X)
    m, N = A.shape
    if N <= m:
        s = np.zeros(N)
        iters = 0
    else:
        s, iters, status = _kernels.reduce_walk(A, np.arange(N, dtype=np.int64), FREEZE_TOL, PIVOT_REL, RESIDUAL_REL)
        if status != 0:
            # perturb the column order and try once more
            s, iters, status = _kernels.reduce_walk(
                A, np.arange(N - 1, -1, -1, dtype=np.int64), FREEZE_TOL, PIVOT_REL, RESIDUAL_REL
            )
            if status != 0:
                rank = int(np.linalg.matrix_rank(A))
                raise ReduceError(f"no certified kernel direction (rank {rank}, N={N})", residual_rank=rank)
    signs = np.where(s >= 0, 1, -1).astype(np.int8)
    value = exact_signed_sum(A, signs)
    bound = reduce_bound(A)
    if _config.CHECK_INVARIANTS:
        lhs = float(np.abs(value).max())
        slack = 1e-9 * max(bound, 1.0) + 64 * np.finfo(float).eps * float(np.abs(A).sum())
        if lhs > bound + slack:
            raise AssertionError(f"REDUCE bound violated: {lhs} > {bound}")
        if N > m and int(np.sum(np.abs(s) < 1.0)) > m:
            raise AssertionError("more than m fractional coordinates left after REDUCE")
    return ReduceResult(Signing(signs), value, bound, int(iters), s)


def reduce(X) -> Signing:
    return reduce_full(X).signing


def nullspace_step(X, state: FractionalState) -> FractionalState:
    """One kernel move of the fractional walk (the same move ``reduce`` makes)."""
    A = _as_matrix(X)
    m, N = A.shape
    if state.frozen_count >= N - m:
        raise ValidationError("no step possible: at least N - m coordinates are already frozen")
    free = np.flatnonzero(~state.frozen)
    cols = free[: m + 1]
    v, f = _kernels.kernel_vector(A, cols, PIVOT_REL)
    if f < 0:
        rank = int(np.linalg.matrix_rank(A[:, cols]))
        raise ReduceError("no kernel vector on the free columns", residual_rank=rank)
    sub = state.s[cols]
    nz = v != 0
    with np.errstate(divide="ignore", invalid="ignore"):
        up = np.where(v > 0, (1 - sub) / v, (-1 - sub) / v)
        down = np.where(v > 0, (1 + sub) / v, (sub - 1) / v)
    lam_pos = float(np.min(up[nz]))
    lam_neg = float(np.min(down[nz]))
    lam = -lam_neg if lam_neg < lam_pos else lam_pos
    s = state.s.copy()
    s[cols] = sub + lam * v
    frozen = state.frozen.copy()
    hit = cols[np.abs(s[cols]) >= 1.0 - FREEZE_TOL]
    s[hit] = np.sign(s[hit])
    frozen[hit] = True
    return FractionalState(s, frozen)
