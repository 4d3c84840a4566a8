"""Instances, signings, signed sums and the exhaustive discrepancy oracle."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import DimensionError, SizeError, SupportCollisionError, ValidationError

DEFAULT_ORACLE_CAP = 26


@dataclass(frozen=True)
class VectorSet:
    """n column vectors of dimension m, stored as an (m, n) float array."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64, copy=True)
        if arr.ndim == 1:
            arr = arr[None, :]
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DimensionError(f"expected a non-empty (m, n) array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("instance contains non-finite entries")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_columns(cls, columns) -> "VectorSet":
        cols = [np.atleast_1d(np.asarray(c, dtype=np.float64)) for c in columns]
        if not cols:
            raise DimensionError("need at least one column")
        dims = {c.shape for c in cols}
        if len(dims) != 1:
            raise DimensionError(f"columns have differing shapes {sorted(dims)}")
        return cls(np.stack(cols, axis=1))

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    @property
    def count(self) -> int:
        return self.data.shape[1]

    @property
    def columns(self) -> list[np.ndarray]:
        return [self.data[:, i] for i in range(self.count)]

    def column(self, i: int) -> np.ndarray:
        return self.data[:, i]

    def negated(self) -> "VectorSet":
        return VectorSet(-self.data)


@dataclass(frozen=True)
class Signing:
    signs: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.signs)
        if s.ndim != 1:
            raise DimensionError("signing must be one-dimensional")
        if not np.all((s == 1) | (s == -1)):
            raise ValidationError("signing entries must be exactly -1 or +1")
        s = s.astype(np.int8)
        s.setflags(write=False)
        object.__setattr__(self, "signs", s)

    def __len__(self):
        return self.signs.shape[0]

    def __str__(self):
        return "".join("+" if x > 0 else "-" for x in self.signs)

    @classmethod
    def from_string(cls, text: str) -> "Signing":
        text = text.strip()
        bad = set(text) - {"+", "-"}
        if bad:
            raise ValidationError(f"unexpected characters in signing: {sorted(bad)}")
        return cls(np.array([1 if ch == "+" else -1 for ch in text], dtype=np.int8))

    @classmethod
    def ones(cls, n: int) -> "Signing":
        return cls(np.ones(n, dtype=np.int8))


@dataclass
class DiscrepancyReport:
    signing: Signing
    sup_norm: float
    coordinate_sums: np.ndarray

    def to_dict(self) -> dict:
        return {
            "signing": str(self.signing),
            "sup_norm": float(self.sup_norm),
            "coordinate_sums": [float(x) for x in self.coordinate_sums],
        }


@dataclass
class SignedCombination:
    """A working vector together with the signed columns it is made of."""

    value: np.ndarray
    support: dict[int, int] = field(default_factory=dict)

    def recompute(self, X: VectorSet) -> np.ndarray:
        out = np.zeros(X.dim)
        for i, sg in sorted(self.support.items()):
            out += sg * X.data[:, i]
        return out

    def consistent_with(self, X: VectorSet, rtol: float = 1e-9) -> bool:
        exact = self.recompute(X)
        scale = max(1.0, float(np.abs(exact).max(initial=0.0)))
        return bool(np.abs(exact - self.value).max(initial=0.0) <= rtol * scale)


def _as_signs(X: VectorSet, sigma) -> np.ndarray:
    s = sigma.signs if isinstance(sigma, Signing) else Signing(np.asarray(sigma)).signs
    if s.shape[0] != X.count:
        raise DimensionError(f"signing has length {s.shape[0]} but instance has {X.count} columns")
    return s


def signed_sum(X: VectorSet, sigma) -> np.ndarray:
    """Sum of sigma_i * X_i, each coordinate summed exactly and rounded once."""
    s = _as_signs(X, sigma)
    terms = X.data * s[None, :]
    return np.array([math.fsum(row) for row in terms])


def discrepancy(X: VectorSet, sigma) -> DiscrepancyReport:
    sig = sigma if isinstance(sigma, Signing) else Signing(np.asarray(sigma))
    sums = signed_sum(X, sig)
    return DiscrepancyReport(sig, float(np.abs(sums).max()), sums)


def _gray_to_signs(g: int, n: int) -> np.ndarray:
    s = np.ones(n, dtype=np.int8)
    for j in range(n - 1):
        if (g >> j) & 1:
            s[j + 1] = -1
    return s


def _lex_key(signs: np.ndarray) -> tuple:
    return tuple(int(x) for x in signs)


def brute_force_min(X: VectorSet, cap: int = DEFAULT_ORACLE_CAP, chunks: int = 1) -> DiscrepancyReport:
    """Exact minimiser of |X sigma|_inf over all signings with sigma_1 = +1.

    Ties go to the lexicographically smallest sigma (-1 before +1).  The
    enumeration range may be cut into ``chunks`` pieces; the answer does not
    depend on the cut.
    """
    n = X.count
    if n > cap:
        raise SizeError(f"exhaustive search over 2^{n - 1} signings refused (n={n} > cap={cap})")
    total = 1 << (n - 1)
    chunks = max(1, min(int(chunks), total))
    bounds = np.linspace(0, total, chunks + 1).astype(np.int64)
    data = np.ascontiguousarray(X.data)
    best = None
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        if hi <= lo:
            continue
        val, g = _kernels.gray_min(data, int(lo), int(hi))
        signs = _gray_to_signs(int(g), n)
        cand = (float(val), _lex_key(signs), signs)
        if best is None or cand[:2] < best[:2]:
            best = cand
    return discrepancy(X, Signing(best[2]))


def brute_force_min_naive(X: VectorSet) -> float:
    """Full 2^n enumeration without symmetry or incremental updates (test oracle)."""
    import itertools

    best = math.inf
    for signs in itertools.product((-1.0, 1.0), repeat=X.count):
        val = float(np.abs(X.data @ np.array(signs)).max())
        best = min(best, val)
    return best


class CombinationForest:
    """Records how working vectors are built from the original columns.

    Ids ``0..n_leaves-1`` are the original columns.  Every later id is a
    node ``lsign*left + rsign*right``; a child of ``-1`` is the empty (zero)
    combination.  Each id may be used as a child at most once, which is
    exactly the pairwise-disjoint-support guarantee of a differencing
    method.
    """

    def __init__(self, n_leaves: int, capacity: int | None = None):
        self.n_leaves = int(n_leaves)
        cap = max(16, capacity or 2 * n_leaves)
        self._left = np.empty(cap, dtype=np.int64)
        self._right = np.empty(cap, dtype=np.int64)
        self._lsign = np.empty(cap, dtype=np.int8)
        self._rsign = np.empty(cap, dtype=np.int8)
        self._consumed = np.zeros(self.n_leaves + cap, dtype=bool)
        self.size = 0

    def __len__(self):
        return self.n_leaves + self.size

    def _grow(self, extra: int):
        need = self.size + extra
        cap = self._left.shape[0]
        if need <= cap:
            return
        new = max(need, 2 * cap)
        for name in ("_left", "_right", "_lsign", "_rsign"):
            arr = getattr(self, name)
            grown = np.empty(new, dtype=arr.dtype)
            grown[: self.size] = arr[: self.size]
            setattr(self, name, grown)
        consumed = np.zeros(self.n_leaves + new, dtype=bool)
        consumed[: self._consumed.shape[0]] = self._consumed
        self._consumed = consumed

    def _consume(self, ids: np.ndarray):
        ids = ids[ids >= 0]
        if ids.size == 0:
            return
        if np.any(ids >= len(self)):
            raise SupportCollisionError("reference to a node that does not exist yet")
        if np.any(self._consumed[ids]) or np.unique(ids).size != ids.size:
            clash = ids[self._consumed[ids]]
            raise SupportCollisionError(f"node(s) {clash[:5].tolist()} already absorbed elsewhere")
        self._consumed[ids] = True

    def combine(self, left, lsign, right, rsign) -> np.ndarray:
        left = np.atleast_1d(np.asarray(left, dtype=np.int64))
        right = np.atleast_1d(np.asarray(right, dtype=np.int64))
        k = left.shape[0]
        lsign = np.broadcast_to(np.asarray(lsign, dtype=np.int8), (k,))
        rsign = np.broadcast_to(np.asarray(rsign, dtype=np.int8), (k,))
        self._consume(np.concatenate([left, right]))
        self._grow(k)
        sl = slice(self.size, self.size + k)
        self._left[sl] = left
        self._right[sl] = right
        self._lsign[sl] = lsign
        self._rsign[sl] = rsign
        ids = np.arange(self.n_leaves + self.size, self.n_leaves + self.size + k, dtype=np.int64)
        self.size += k
        return ids

    def chain(self, nodes, signs) -> int:
        """Single node for sum_i signs[i] * nodes[i]; -1 if everything is empty."""
        nodes = np.asarray(nodes, dtype=np.int64)
        signs = np.asarray(signs, dtype=np.int8)
        keep = nodes >= 0
        nodes, signs = nodes[keep], signs[keep]
        if nodes.size == 0:
            return -1
        if nodes.size == 1:
            if signs[0] == 1:
                return int(nodes[0])
            return int(self.combine(nodes[:1], -1, [-1], 1)[0])
        k = nodes.size - 1
        self._consume(nodes)
        self._grow(k)
        base = self.n_leaves + self.size
        left = np.empty(k, dtype=np.int64)
        left[0] = nodes[0]
        left[1:] = np.arange(base, base + k - 1)
        sl = slice(self.size, self.size + k)
        self._left[sl] = left
        self._lsign[sl] = 1
        self._lsign[self.size] = signs[0]
        self._right[sl] = nodes[1:]
        self._rsign[sl] = signs[1:]
        # internal links of the chain are fresh ids; mark them used
        self._consumed[base : base + k - 1] = True
        self.size += k
        return base + k - 1

    def checkpoint(self) -> int:
        return self.size

    def rollback(self, mark: int):
        """Forget every node created after ``mark`` and free their children."""
        if mark > self.size:
            raise ValueError("checkpoint is ahead of the forest")
        sl = slice(mark, self.size)
        for arr in (self._left[sl], self._right[sl]):
            kids = arr[arr >= 0]
            self._consumed[kids] = False
        self._consumed[self.n_leaves + mark : self.n_leaves + self.size] = False
        self.size = mark

    def is_consumed(self, node: int) -> bool:
        return bool(self._consumed[node])

    def leaf_signs(self, root: int) -> np.ndarray:
        """Sign of every original column inside ``root`` (0 for columns outside)."""
        out = np.zeros(self.n_leaves, dtype=np.int8)
        _kernels.forest_signs(
            self._left[: self.size],
            self._right[: self.size],
            self._lsign[: self.size],
            self._rsign[: self.size],
            self.n_leaves,
            int(root),
            out,
        )
        return out

    def coverage(self, roots) -> np.ndarray:
        """How many of ``roots`` contain each original column."""
        roots = np.atleast_1d(np.asarray(roots, dtype=np.int64))
        count = np.zeros(self.n_leaves, dtype=np.int64)
        _kernels.forest_cover(self._left[: self.size], self._right[: self.size], self.n_leaves, roots, count)
        return count

    def support(self, node: int) -> dict[int, int]:
        if node < 0:
            return {}
        signs = self.leaf_signs(node)
        idx = np.flatnonzero(signs)
        return {int(i): int(signs[i]) for i in idx}

    def combination(self, node: int, value) -> SignedCombination:
        return SignedCombination(np.asarray(value, dtype=np.float64).copy(), self.support(node))
