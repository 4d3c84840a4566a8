"""Hot inner loops, compiled with numba when available.

Set ``VECBAL_NUMBA=0`` in the environment to force the pure-numpy/Python
path.  Both paths are importable side by side (``*_numba`` / ``*_numpy``)
so the benchmark and the tests can compare them directly; the un-suffixed
names are the ones the rest of the package calls.
"""
import os

import numpy as np

try:
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    _HAVE_NUMBA = False

USE_NUMBA = _HAVE_NUMBA and os.environ.get("VECBAL_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off")

# refresh the incremental Gray-code sums from scratch this often
_GRAY_RESYNC = 1 << 16


def _njit(fn):
    if not _HAVE_NUMBA:
        return fn
    return numba.njit(cache=True, nogil=True)(fn)


# ----------------------------------------------------------------------
# brute-force enumeration over {+1} x {-1,+1}^(n-1) in Gray-code order
# ----------------------------------------------------------------------
#
# A code c over n-1 bits encodes sigma with sigma[0] = +1 and
# sigma[j+1] = -1 iff bit j of gray(c) is set.  Lexicographic order on
# sigma (with -1 < +1) is: at the lowest differing bit, the code with the
# bit set is smaller.


def _lex_less(a, b):
    d = a ^ b
    if d == 0:
        return False
    low = d & (-d)
    return (a & low) != 0


def _sums_from_scratch(X, g, out):
    m, n = X.shape
    for r in range(m):
        out[r] = 0.0
    for i in range(n):
        neg = i > 0 and ((g >> (i - 1)) & 1) == 1
        for r in range(m):
            if neg:
                out[r] -= X[r, i]
            else:
                out[r] += X[r, i]


def _make_gray_min(lex_less, sums_from_scratch):
    def gray_min(X, start, stop):
        m, n = X.shape
        s = np.zeros(m)
        best = np.inf
        best_g = -1
        for c in range(start, stop):
            g = c ^ (c >> 1)
            if c == start or (c - start) % _GRAY_RESYNC == 0:
                sums_from_scratch(X, g, s)
            else:
                b = 0
                t = c
                while (t & 1) == 0:
                    t >>= 1
                    b += 1
                col = b + 1
                if (g >> b) & 1:
                    for r in range(m):
                        s[r] -= 2.0 * X[r, col]
                else:
                    for r in range(m):
                        s[r] += 2.0 * X[r, col]
            val = 0.0
            for r in range(m):
                a = abs(s[r])
                if a > val:
                    val = a
            if val < best or (val == best and lex_less(g, best_g)):
                best = val
                best_g = g
        return best, best_g

    return gray_min


def _gray_min_vectorized(X, start, stop, chunk=1 << 15):
    """Same contract as the compiled loop, evaluated chunk-wise with matmuls."""
    m, n = X.shape
    best = np.inf
    best_g = -1
    shifts = np.arange(n - 1, dtype=np.int64)
    for lo in range(start, stop, chunk):
        hi = min(stop, lo + chunk)
        c = np.arange(lo, hi, dtype=np.int64)
        g = c ^ (c >> 1)
        bits = (g[:, None] >> shifts[None, :]) & 1
        signs = np.empty((hi - lo, n))
        signs[:, 0] = 1.0
        signs[:, 1:] = 1.0 - 2.0 * bits
        vals = np.abs(signs @ X.T).max(axis=1)
        vmin = vals.min()
        if vmin > best:
            continue
        for gi in g[vals == vmin]:
            gi = int(gi)
            if vmin < best or _lex_less(gi, best_g):
                best = float(vmin)
                best_g = gi
    return best, best_g


# ----------------------------------------------------------------------
# REDUCE: kernel directions and the fractional walk
# ----------------------------------------------------------------------


def _kernel_vector_py(X, cols, q, pivot_rel):
    """Kernel vector of X[:, cols[:q]] tied to the first non-pivot column.

    Row-reduces left to right with partial pivoting; the first column with
    no usable pivot becomes the free variable set to 1.  Returns (v, f)
    where v has length q and f is the position of the free column, or
    f = -1 if every column carried a pivot.
    """
    m = X.shape[0]
    M = np.empty((m, q))
    scale = 0.0
    for j in range(q):
        for r in range(m):
            M[r, j] = X[r, cols[j]]
            if abs(M[r, j]) > scale:
                scale = abs(M[r, j])
    tol = pivot_rel * scale
    pivot_col = np.full(m, -1, dtype=np.int64)
    prow = 0
    f = -1
    for c in range(q):
        if prow == m:
            f = c
            break
        r_best = prow
        a_best = abs(M[prow, c])
        for r in range(prow + 1, m):
            if abs(M[r, c]) > a_best:
                a_best = abs(M[r, c])
                r_best = r
        if a_best <= tol:
            f = c
            break
        if r_best != prow:
            for j in range(q):
                tmp = M[prow, j]
                M[prow, j] = M[r_best, j]
                M[r_best, j] = tmp
        piv = M[prow, c]
        for j in range(q):
            M[prow, j] /= piv
        for r in range(m):
            if r != prow:
                factor = M[r, c]
                if factor != 0.0:
                    for j in range(q):
                        M[r, j] -= factor * M[prow, j]
        pivot_col[prow] = c
        prow += 1
    v = np.zeros(q)
    if f < 0:
        return v, f
    v[f] = 1.0
    for i in range(prow):
        v[pivot_col[i]] = -M[i, f]
    return v, f


def _make_reduce_walk(kernel_vector):
    def reduce_walk(X, order, freeze_tol, pivot_rel, resid_rel):
        """Fractional walk from s = 0 until at most m coordinates stay free.

        Returns (s, iterations, status).  status 0 is success; status 1 means a
        kernel direction could not be certified (residual too large).
        """
        m, N = X.shape
        s = np.zeros(N)
        free = order.copy()
        head = 0
        nfree = N
        iters = 0
        scale = 0.0
        for j in range(N):
            for r in range(m):
                if abs(X[r, j]) > scale:
                    scale = abs(X[r, j])
        while nfree > m:
            q = m + 1
            cols = free[head:head + q]
            v, f = kernel_vector(X, cols, q, pivot_rel)
            if f < 0:
                return s, iters, 1
            # certify X v = 0 on the touched columns
            vnorm = 0.0
            for j in range(q):
                vnorm += abs(v[j])
            for r in range(m):
                acc = 0.0
                for j in range(q):
                    acc += X[r, cols[j]] * v[j]
                if abs(acc) > resid_rel * max(scale, 1e-300) * vnorm:
                    return s, iters, 1
            lam_pos = np.inf
            lam_neg = np.inf
            for j in range(q):
                vj = v[j]
                if vj == 0.0:
                    continue
                sj = s[cols[j]]
                if vj > 0.0:
                    a = (1.0 - sj) / vj
                    b = (1.0 + sj) / vj
                else:
                    a = (-1.0 - sj) / vj
                    b = (sj - 1.0) / vj
                if a < lam_pos:
                    lam_pos = a
                if b < lam_neg:
                    lam_neg = b
            if lam_neg < lam_pos:
                lam = -lam_neg
            else:
                lam = lam_pos
            for j in range(q):
                if v[j] != 0.0:
                    s[cols[j]] += lam * v[j]
            # snap and compact the processed prefix, keeping relative order
            keep = np.empty(q, dtype=np.int64)
            nk = 0
            nfrozen = 0
            for j in range(q):
                idx = cols[j]
                if abs(s[idx]) >= 1.0 - freeze_tol:
                    s[idx] = 1.0 if s[idx] > 0.0 else -1.0
                    nfrozen += 1
                else:
                    keep[nk] = idx
                    nk += 1
            if nfrozen == 0:
                return s, iters, 1
            for j in range(nk):
                free[head + nfrozen + j] = keep[j]
            head += nfrozen
            nfree -= nfrozen
            iters += 1
        return s, iters, 0

    return reduce_walk


# ----------------------------------------------------------------------
# sign reconstruction for differencing forests
# ----------------------------------------------------------------------


def _forest_signs_py(left, right, lsign, rsign, n_leaves, root, out):
    """Propagate signs from ``root`` down to the leaves it covers.

    Internal node k (k >= n_leaves) is ``lsign*left + rsign*right`` and is
    stored at position k - n_leaves.  A child id of -1 is an empty slot.
    Leaves reached get their accumulated sign written into ``out``; the
    number of leaves reached is returned.
    """
    if root < 0:
        return 0
    n_int = left.shape[0]
    stack_node = np.empty(n_int + 2, dtype=np.int64)
    stack_sign = np.empty(n_int + 2, dtype=np.int8)
    top = 0
    stack_node[0] = root
    stack_sign[0] = 1
    top = 1
    reached = 0
    while top > 0:
        top -= 1
        node = stack_node[top]
        sg = stack_sign[top]
        if node < n_leaves:
            out[node] = sg
            reached += 1
            continue
        k = node - n_leaves
        a = left[k]
        b = right[k]
        if a >= 0:
            stack_node[top] = a
            stack_sign[top] = sg * lsign[k]
            top += 1
        if b >= 0:
            stack_node[top] = b
            stack_sign[top] = sg * rsign[k]
            top += 1
    return reached


def _forest_cover_py(left, right, n_leaves, roots, count):
    """Add one to ``count[leaf]`` for every leaf under every root.

    Any entry above one afterwards means two roots share a column.
    """
    n_int = left.shape[0]
    stack = np.empty(n_int + roots.shape[0] + 2, dtype=np.int64)
    for r in range(roots.shape[0]):
        if roots[r] < 0:
            continue
        top = 1
        stack[0] = roots[r]
        while top > 0:
            top -= 1
            node = stack[top]
            if node < n_leaves:
                count[node] += 1
                continue
            k = node - n_leaves
            if left[k] >= 0:
                stack[top] = left[k]
                top += 1
            if right[k] >= 0:
                stack[top] = right[k]
                top += 1


gray_min_numpy = _gray_min_vectorized
reduce_walk_numpy = _make_reduce_walk(_kernel_vector_py)
forest_signs_numpy = _forest_signs_py
forest_cover_numpy = _forest_cover_py

if _HAVE_NUMBA:
    _kernel_vector_numba = _njit(_kernel_vector_py)
    gray_min_numba = _njit(_make_gray_min(_njit(_lex_less), _njit(_sums_from_scratch)))
    reduce_walk_numba = _njit(_make_reduce_walk(_kernel_vector_numba))
    forest_signs_numba = _njit(_forest_signs_py)
    forest_cover_numba = _njit(_forest_cover_py)
else:  # pragma: no cover
    _kernel_vector_numba = None
    gray_min_numba = None
    reduce_walk_numba = None
    forest_signs_numba = None
    forest_cover_numba = None

if USE_NUMBA:
    gray_min = gray_min_numba
    reduce_walk = reduce_walk_numba
    forest_signs = forest_signs_numba
    forest_cover = forest_cover_numba
else:
    gray_min = gray_min_numpy
    reduce_walk = reduce_walk_numpy
    forest_signs = forest_signs_numpy
    forest_cover = forest_cover_numpy


def kernel_vector(X, cols, pivot_rel=1e-12):
    """Python-facing wrapper used by the single-step REDUCE API."""
    cols = np.ascontiguousarray(cols, dtype=np.int64)
    X = np.ascontiguousarray(X, dtype=np.float64)
    kv = _kernel_vector_numba if USE_NUMBA else _kernel_vector_py
    return kv(X, cols, cols.shape[0], pivot_rel)
