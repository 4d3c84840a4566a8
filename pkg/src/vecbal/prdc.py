"""One differencing phase: partition, resample, difference, clean up.

Working vectors are carried as a value array plus a node id in a shared
``CombinationForest``; the forest is what lets the driver recover the
final signing without storing an explicit support map per vector.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _config
from .core import CombinationForest, SignedCombination, VectorSet
from .dist import BoundedDensity, triangular
from .errors import CleanupFailure, ImpossibleStateError, SizeError, ValidationError
from .reduce import reduce_full
from .rng import RngStream, as_generator

# sub-streams of a phase stream
_RESAMPLE, _DIFFERENCE, _CLEANUP = 0, 1, 2


def per_axis_count(set_size: int, m: int) -> int:
    """Smallest integer k with k^(4m) >= set_size, i.e. ceil(set_size^(1/(4m)))."""
    if set_size < 1 or m < 1:
        raise ValidationError("set_size and m must be positive")
    k = max(1, math.ceil(set_size ** (1.0 / (4 * m))))
    while k > 1 and (k - 1) ** (4 * m) >= set_size:
        k -= 1
    while k ** (4 * m) < set_size:
        k += 1
    return k


@dataclass(frozen=True)
class CubePartition:
    """Tiling of [-alpha, alpha]^m by (2k)^m half-open cubes of side alpha/k.

    The last cell on each axis is closed on the right so that +alpha has a
    home.  Cube ids are mixed-radix with axis 0 most significant.
    """

    alpha: float
    m: int
    per_axis: int
    child_alpha: float
    edges: np.ndarray = field(repr=False)

    @property
    def cells_per_axis(self) -> int:
        return 2 * self.per_axis

    @property
    def n_cubes(self) -> int:
        return self.cells_per_axis**self.m

    def axis_index(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[None, :]
        if pts.shape[-1] != self.m:
            raise ValidationError(f"points have dimension {pts.shape[-1]}, partition has {self.m}")
        if np.any(np.abs(pts) > self.alpha):
            raise ValidationError("point outside the partitioned cube")
        idx = np.searchsorted(self.edges, pts, side="right") - 1
        return np.clip(idx, 0, self.cells_per_axis - 1)

    def index_of(self, points) -> np.ndarray:
        idx = self.axis_index(points)
        c = self.cells_per_axis
        ids = np.zeros(idx.shape[0], dtype=np.int64)
        for d in range(self.m):
            ids = ids * c + idx[:, d]
        return ids

    def cube_axes(self, cube_id: int) -> np.ndarray:
        c = self.cells_per_axis
        out = np.empty(self.m, dtype=np.int64)
        rem = int(cube_id)
        for d in range(self.m - 1, -1, -1):
            out[d] = rem % c
            rem //= c
        return out

    def box(self, cube_id: int) -> tuple[np.ndarray, np.ndarray]:
        ax = self.cube_axes(cube_id)
        return self.edges[ax], self.edges[ax + 1]

    def contains(self, cube_id: int, point) -> bool:
        lo, hi = self.box(cube_id)
        ax = self.cube_axes(cube_id)
        p = np.asarray(point, dtype=np.float64)
        top = ax == self.cells_per_axis - 1
        upper_ok = np.where(top, p <= hi, p < hi)
        return bool(np.all(p >= lo) and np.all(upper_ok))


def partition(alpha: float, set_size: int, m: int) -> CubePartition:
    if not alpha > 0:
        raise ValidationError("alpha must be positive")
    k = per_axis_count(set_size, m)
    if (2 * k) ** m >= 2**62:
        raise SizeError("too many sub-cubes to index")
    child = alpha / k
    edges = -alpha + child * np.arange(2 * k + 1, dtype=np.float64)
    edges[0] = -alpha
    edges[-1] = alpha
    edges[k] = 0.0
    return CubePartition(float(alpha), int(m), int(k), float(child), edges)


@dataclass
class PhaseDiagnostics:
    phase: int
    set_size: int
    alpha: float
    child_alpha: float = float("nan")
    per_axis: int = 1
    n_cubes: int = 1
    n_good: int = 0
    n_bad: int = 0
    n_leftover: int = 0
    n_differences: int = 0
    reduce_inputs: int = 0
    reduce_iterations: int = 0
    v0_norm_inf: float = 0.0
    v0_norm2: float = 0.0
    cleanup_threshold: float = 0.0
    cleanup_budget: int = 0
    cleanup_draws: int = 0
    cleanup_stopped: bool = False
    v_norm2: float = 0.0
    survivors: int = 0
    terminal: bool = False
    attempt: int = 0
    ops: int = 0
    configuration: list | None = None

    @property
    def bad_fraction(self) -> float:
        return self.n_bad / self.set_size if self.set_size else 0.0

    @property
    def survival(self) -> float:
        return self.survivors / self.set_size if self.set_size else 0.0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["bad_fraction"] = self.bad_fraction
        d["survival"] = self.survival
        if d["configuration"] is None:
            d.pop("configuration")
        return d


@dataclass
class PhaseState:
    values: np.ndarray  # (P, m)
    nodes: np.ndarray  # (P,) forest ids
    v_value: np.ndarray  # (m,)
    v_node: int
    alpha: float
    density: BoundedDensity  # one-dimensional factor of g_t
    phase: int
    forest: CombinationForest

    @property
    def m(self) -> int:
        return self.v_value.shape[0]

    @property
    def size(self) -> int:
        return self.values.shape[0]

    def combinations(self) -> list[SignedCombination]:
        return [self.forest.combination(int(n), v) for n, v in zip(self.nodes, self.values)]

    def carried(self) -> SignedCombination:
        return self.forest.combination(int(self.v_node), self.v_value)

    def check(self, gamma: float | None = None, X=None, rtol: float = 1e-9) -> None:
        """Raise AssertionError if any PhaseState invariant fails."""
        tol = 1e-12 * self.alpha
        if self.size and np.abs(self.values).max() > self.alpha + tol:
            raise AssertionError("a working vector left [-alpha, alpha]^m")
        if gamma is not None and self.phase >= 2:
            if float(np.linalg.norm(self.v_value)) > gamma * self.m * self.alpha * (1 + 1e-12):
                raise AssertionError("carried vector exceeds gamma*m*alpha")
        cover = self.forest.coverage(np.r_[self.nodes, self.v_node])
        if np.any(cover > 1):
            raise AssertionError("supports overlap")
        if X is not None:
            if not isinstance(X, VectorSet):
                X = VectorSet(X)
            for comb in self.combinations() + [self.carried()]:
                if not comb.consistent_with(X, rtol):
                    raise AssertionError("working vector disagrees with its support")


def initial_state(X, rho: BoundedDensity) -> PhaseState:
    data = X.data if isinstance(X, VectorSet) else np.asarray(X, dtype=np.float64)
    m, n = data.shape
    if np.any(np.abs(data) > rho.half_width):
        raise ValidationError("instance entries exceed the density's support")
    forest = CombinationForest(n, capacity=3 * n + 16)
    return PhaseState(
        values=np.ascontiguousarray(data.T),
        nodes=np.arange(n, dtype=np.int64),
        v_value=np.zeros(m),
        v_node=-1,
        alpha=float(rho.half_width),
        density=rho,
        phase=1,
        forest=forest,
    )


def _density_on_cube_scale(rho: BoundedDensity, alpha: float) -> BoundedDensity:
    # g_t lives on [-alpha_t, alpha_t]; the initial rho already does
    if math.isclose(rho.half_width, alpha, rel_tol=1e-12):
        return rho
    raise ValidationError("density support does not match the phase cube")


def resample(values, density: BoundedDensity, part: CubePartition, rng):
    """Label each point good with probability min_{cube} g / g(x).

    Consumes exactly one uniform per point.  Returns (good_mask, cube_ids).
    """
    gen = as_generator(rng)
    values = np.asarray(values, dtype=np.float64)
    axes = part.axis_index(values)
    cell_min = density.interval_min(part.edges[:-1], part.edges[1:])
    dens = density.pdf(values)
    if np.any(dens <= 0):
        raise ImpossibleStateError("density vanishes at a sampled point")
    ratio = np.prod(cell_min[axes] / dens, axis=1)
    u = gen.random(values.shape[0])
    good = u < ratio
    c = part.cells_per_axis
    ids = np.zeros(values.shape[0], dtype=np.int64)
    for d in range(part.m):
        ids = ids * c + axes[:, d]
    return good, ids


def difference(values, nodes, cube_ids, rng, forest: CombinationForest):
    """Randomly pair points inside each cube and replace each pair by its difference.

    Returns (diff_values, diff_nodes, leftover_positions) where positions
    index into the inputs.
    """
    gen = as_generator(rng)
    values = np.asarray(values, dtype=np.float64)
    nodes = np.asarray(nodes, dtype=np.int64)
    P = values.shape[0]
    if P == 0:
        m = values.shape[1] if values.ndim == 2 else 0
        return np.empty((0, m)), np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    perm = gen.permutation(P)
    order = perm[np.argsort(cube_ids[perm], kind="stable")]
    sorted_ids = cube_ids[order]
    starts = np.flatnonzero(np.r_[True, sorted_ids[1:] != sorted_ids[:-1]])
    sizes = np.diff(np.r_[starts, P])
    group_start = np.repeat(starts, sizes)
    group_size = np.repeat(sizes, sizes)
    rank = np.arange(P) - group_start
    first = (rank % 2 == 0) & (rank + 1 < group_size)
    a = order[first]
    b = order[np.flatnonzero(first) + 1]
    leftovers = order[(rank == group_size - 1) & (group_size % 2 == 1)]
    diff_values = values[a] - values[b]
    diff_nodes = forest.combine(nodes[a], 1, nodes[b], -1)
    return diff_values, diff_nodes, np.sort(leftovers)


@dataclass
class CleanupResult:
    v_value: np.ndarray
    v_node: int
    survivors: np.ndarray  # positions into the differences, original order
    draws: int
    budget: int
    stopped: bool
    threshold: float
    reduce_inputs: int
    reduce_iterations: int
    v0_norm_inf: float
    v0_norm2: float


def cleanup_sign(v, u) -> int:
    """argmin over a in {+1, -1} of |v + a u|_2, ties to +1."""
    return -1 if float(np.dot(v, u)) > 0 else 1


def cleanup(
    pool_values,
    pool_nodes,
    diff_values,
    diff_nodes,
    child_alpha: float,
    gamma: float,
    rng,
    forest: CombinationForest,
    budget_exponent: float = 0.75,
):
    """REDUCE the pool into one vector, then shrink it with random differences.

    ``pool_*`` holds the carried vector, the bad points and the leftover
    good points.  Raises CleanupFailure when the draw budget
    ceil(|differences|^budget_exponent) runs out first.
    """
    gen = as_generator(rng)
    pool_values = np.asarray(pool_values, dtype=np.float64)
    m = pool_values.shape[1]
    red = reduce_full(pool_values.T)
    v = red.value.copy()
    v_node = forest.chain(pool_nodes, red.signing.signs)
    v0_inf = float(np.abs(v).max()) if v.size else 0.0
    v0_2 = float(np.linalg.norm(v))

    G = diff_values.shape[0]
    budget = math.ceil(G**budget_exponent) if G else 0
    threshold = gamma * m * child_alpha
    pool = np.arange(G)
    remaining = G
    draws = 0
    norm = v0_2
    best = norm
    picked_nodes = []
    picked_signs = []
    while norm >= threshold:
        if draws >= budget or remaining == 0:
            raise CleanupFailure(
                f"clean-up stopped at |v|_2={best:.3e} >= {threshold:.3e} after {draws} draws (budget {budget})",
                best_norm=best,
                draws=draws,
            )
        j = int(gen.integers(remaining))
        pick = pool[j]
        pool[j] = pool[remaining - 1]
        remaining -= 1
        u = diff_values[pick]
        a = cleanup_sign(v, u)
        v = v + a * u
        picked_nodes.append(diff_nodes[pick])
        picked_signs.append(a)
        draws += 1
        norm = float(np.linalg.norm(v))
        best = min(best, norm)
    if picked_nodes:
        v_node = forest.chain(np.r_[v_node, picked_nodes], np.r_[1, picked_signs])
    survivors = np.sort(pool[:remaining])
    return CleanupResult(
        v_value=v,
        v_node=int(v_node),
        survivors=survivors,
        draws=draws,
        budget=budget,
        stopped=True,
        threshold=threshold,
        reduce_inputs=pool_values.shape[0],
        reduce_iterations=red.iterations,
        v0_norm_inf=v0_inf,
        v0_norm2=v0_2,
    )


def _substream(rng, which: int):
    if isinstance(rng, RngStream):
        return rng.child(which).generator()
    return as_generator(rng)


def run_phase(
    state: PhaseState,
    gamma: float,
    rng,
    record_configuration: bool = False,
    budget_exponent: float = 0.75,
) -> tuple[PhaseState, PhaseDiagnostics]:
    """Transform phase t into phase t+1.

    A partition with one cell per half-axis cannot shrink anything; the
    phase is then reported as terminal and the state returned unchanged.
    """
    P, m = state.values.shape[0], state.m
    diag = PhaseDiagnostics(phase=state.phase, set_size=P, alpha=state.alpha)
    if P == 0:
        diag.terminal = True
        return state, diag
    part = partition(state.alpha, P, m)
    diag.child_alpha = part.child_alpha
    diag.per_axis = part.per_axis
    diag.n_cubes = part.n_cubes
    if part.per_axis == 1:
        diag.terminal = True
        return state, diag

    good, cube_ids = resample(state.values, state.density, part, _substream(rng, _RESAMPLE))
    gpos = np.flatnonzero(good)
    bpos = np.flatnonzero(~good)
    diag.n_good, diag.n_bad = int(gpos.size), int(bpos.size)
    if record_configuration:
        diag.configuration = [[int(c), int(g)] for c, g in zip(cube_ids, good)]

    diff_values, diff_nodes, left = difference(
        state.values[gpos], state.nodes[gpos], cube_ids[gpos], _substream(rng, _DIFFERENCE), state.forest
    )
    leftover_pos = gpos[left]
    diag.n_leftover = int(leftover_pos.size)
    diag.n_differences = int(diff_values.shape[0])

    pool_values = np.vstack([state.v_value[None, :], state.values[bpos], state.values[leftover_pos]])
    pool_nodes = np.r_[state.v_node, state.nodes[bpos], state.nodes[leftover_pos]].astype(np.int64)
    cres = cleanup(
        pool_values,
        pool_nodes,
        diff_values,
        diff_nodes,
        part.child_alpha,
        gamma,
        _substream(rng, _CLEANUP),
        state.forest,
        budget_exponent=budget_exponent,
    )
    if _config.CHECK_INVARIANTS:
        budget = (gamma + 1) * m * state.alpha
        if cres.v0_norm_inf > budget * (1 + 1e-9):
            raise AssertionError(f"REDUCE output {cres.v0_norm_inf} exceeds (gamma+1) m alpha = {budget}")
    diag.reduce_inputs = cres.reduce_inputs
    diag.reduce_iterations = cres.reduce_iterations
    diag.v0_norm_inf, diag.v0_norm2 = cres.v0_norm_inf, cres.v0_norm2
    diag.cleanup_threshold = cres.threshold
    diag.cleanup_budget = cres.budget
    diag.cleanup_draws = cres.draws
    diag.cleanup_stopped = cres.stopped
    diag.v_norm2 = float(np.linalg.norm(cres.v_value))
    diag.survivors = int(cres.survivors.size)
    diag.ops = 2 * P * m + cres.reduce_inputs * m + cres.reduce_iterations * (m + 1) ** 2 + cres.draws * m

    new_state = PhaseState(
        values=np.ascontiguousarray(diff_values[cres.survivors]),
        nodes=diff_nodes[cres.survivors],
        v_value=cres.v_value,
        v_node=cres.v_node,
        alpha=part.child_alpha,
        density=triangular(part.child_alpha),
        phase=state.phase + 1,
        forest=state.forest,
    )
    return new_state, diag
