"""Numerics for the random-instance threshold: moments of the solution count,
the overlap exponent profile, small-ball bounds and the linear-regime constant.

Everything that can span hundreds of orders of magnitude is carried as a
natural logarithm.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize, special

from .errors import DomainError, SizeError, ValidationError

LN2 = math.log(2.0)
SQRT2 = math.sqrt(2.0)
SECOND_MOMENT_CAP = 4000
# below this z^2/(1-rho^2) the series is exact to double precision
_SERIES_CUT = 1e-6
_Z_SATURATE = 40.0


def epsilon_threshold(n: int, m: int, gamma: float) -> float:
    """gamma * sqrt(pi n / 2) * 2^(-n/m)."""
    if n < 1 or m < 1:
        raise ValidationError("n and m must be positive")
    if not gamma > 0:
        raise ValidationError("gamma must be positive")
    return gamma * math.sqrt(math.pi * n / 2.0) * 2.0 ** (-n / m)


def log_epsilon_threshold(n: int, m: int, gamma: float) -> float:
    return math.log(gamma) + 0.5 * math.log(math.pi * n / 2.0) - (n / m) * LN2


def gauss_interval(z: float) -> float:
    """P(|Z| <= z) for a standard normal Z."""
    if z < 0:
        raise DomainError("z must be non-negative")
    if math.isinf(z):
        return 1.0
    if z > 1.0:
        return 1.0 - math.erfc(z / SQRT2)
    return math.erf(z / SQRT2)


def log_gauss_interval(log_z: float) -> float:
    """ln P(|Z| <= z) given ln z; stays finite for z far below the float range."""
    if log_z == -math.inf:
        return -math.inf
    if log_z > math.log(_Z_SATURATE):
        return 0.0
    if log_z < 0.5 * math.log(_SERIES_CUT):
        z2 = math.exp(2 * log_z)
        # erf(x) = 2x/sqrt(pi) (1 - x^2/3 + ...) with x = z/sqrt(2)
        return 0.5 * math.log(2.0 / math.pi) + log_z + math.log1p(-z2 / 6.0)
    z = math.exp(log_z)
    if z > 1.0:
        return math.log1p(-math.erfc(z / SQRT2))
    return math.log(math.erf(z / SQRT2))


def _check_rho(rho: float):
    if not -1.0 < rho < 1.0:
        raise DomainError(f"correlation must lie in (-1, 1), got {rho}")


def _rect_quad(rho: float, z: float, epsrel: float) -> float:
    s = math.sqrt((1.0 - rho) * (1.0 + rho))
    c = 1.0 / (s * SQRT2)

    def inner(x):
        # P(|Y| <= z | X = x) times the density of X
        return (math.erf((z - rho * x) * c) + math.erf((z + rho * x) * c)) * math.exp(-0.5 * x * x)

    val, _ = integrate.quad(inner, 0.0, z, epsabs=0.0, epsrel=epsrel, limit=200)
    # factor 2 from the even integrand, 1/2 from the erf identity
    return val / math.sqrt(2.0 * math.pi)


def bivariate_rect(rho: float, z: float, epsrel: float = 1e-12) -> float:
    """P(|X| <= z, |Y| <= z) for standard normals with correlation rho.

    The inner variable is integrated exactly with erf; the outer one by
    adaptive quadrature.  Depends on rho only through |rho|.
    """
    _check_rho(rho)
    if z < 0:
        raise DomainError("z must be non-negative")
    rho = abs(float(rho))
    if z == 0:
        return 0.0
    z = min(float(z), _Z_SATURATE)
    s2 = (1.0 - rho) * (1.0 + rho)
    if z * z / s2 < _SERIES_CUT:
        return math.exp(log_bivariate_rect(rho, math.log(z), epsrel))
    return _rect_quad(rho, z, epsrel)


def log_bivariate_rect(rho: float, log_z: float, epsrel: float = 1e-12) -> float:
    """ln P_rho(|X| <= z, |Y| <= z); rho = +-1 is the one-dimensional case."""
    if abs(rho) == 1.0:
        return log_gauss_interval(log_z)
    _check_rho(rho)
    if log_z == -math.inf:
        return -math.inf
    rho = abs(float(rho))
    s2 = (1.0 - rho) * (1.0 + rho)
    r = math.exp(2 * log_z) / s2
    if r < _SERIES_CUT:
        # 4 z^2 psi_rho(0, 0) times the first correction from averaging
        # the quadratic form over the square
        return math.log(2.0 / math.pi) + 2 * log_z - 0.5 * math.log(s2) + math.log1p(-r / 3.0)
    z = min(math.exp(log_z), _Z_SATURATE)
    return math.log(_rect_quad(rho, z, epsrel))


def bivariate_rect_bound(rho: float, z: float) -> float:
    """Closed-form upper bound 2 z^2 / (pi sqrt(1 - rho^2))."""
    _check_rho(rho)
    return 2.0 * z * z / (math.pi * math.sqrt(1.0 - rho * rho))


@dataclass(frozen=True)
class MomentQuery:
    n: int
    m: int
    gamma: float | None = None
    eps: float | None = None
    epsrel: float = 1e-12
    cap: int = SECOND_MOMENT_CAP

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ValidationError("n and m must be positive")
        if (self.gamma is None) == (self.eps is None):
            raise ValidationError("give exactly one of gamma and eps")
        if self.gamma is not None and not self.gamma > 0:
            raise ValidationError("gamma must be positive")
        if self.eps is not None and self.eps < 0:
            raise ValidationError("eps must be non-negative")

    @property
    def log_eps(self) -> float:
        if self.gamma is not None:
            return log_epsilon_threshold(self.n, self.m, self.gamma)
        return math.log(self.eps) if self.eps > 0 else -math.inf

    @property
    def epsilon(self) -> float:
        return math.exp(self.log_eps)

    @property
    def log_z(self) -> float:
        """ln(eps / sqrt(n)), the per-coordinate standardized window."""
        return self.log_eps - 0.5 * math.log(self.n)


def first_moment_log(q: MomentQuery) -> float:
    """ln E[S] = n ln 2 + m ln P(|Z| <= eps/sqrt(n))."""
    lz = q.log_z
    if lz == math.inf:
        return q.n * LN2
    return q.n * LN2 + q.m * log_gauss_interval(lz)


def log_binom(n: int, k) -> np.ndarray:
    k = np.asarray(k, dtype=np.float64)
    return special.gammaln(n + 1.0) - special.gammaln(k + 1.0) - special.gammaln(n - k + 1.0)


def summand_profile(q: MomentQuery) -> np.ndarray:
    """ln binom(n, k) + m ln P_{rho_k}(z), k = 0..n, rho_k = 1 - 2k/n."""
    n = q.n
    if n > q.cap:
        raise SizeError(f"n={n} exceeds the second-moment cap {q.cap}")
    lz = q.log_z
    lb = log_binom(n, np.arange(n + 1))
    if lz == math.inf:
        return lb
    half = np.empty(n // 2 + 1)
    for k in range(n // 2 + 1):
        rho = 1.0 - 2.0 * k / n
        half[k] = log_bivariate_rect(rho, lz, q.epsrel)
    # P depends on |rho| only, and rho_{n-k} = -rho_k
    logp = np.empty(n + 1)
    logp[: n // 2 + 1] = half
    logp[n - np.arange(n // 2 + 1)] = half
    return lb + q.m * logp


def second_moment_log(q: MomentQuery) -> float:
    """ln E[S^2] = n ln 2 + logsumexp_k [ln binom(n,k) + m ln P_{rho_k}(eps/sqrt n)]."""
    terms = summand_profile(q)
    if np.all(terms == -np.inf):
        return -math.inf
    return q.n * LN2 + float(special.logsumexp(terms))


def moment_ratio(q: MomentQuery) -> float:
    """E[S^2] / E[S]^2."""
    return math.exp(second_moment_log(q) - 2.0 * first_moment_log(q))


def tail_fraction(q: MomentQuery, lo: float = 0.25, hi: float = 0.75) -> float:
    """Share of the second-moment sum coming from k <= lo n or k >= hi n."""
    terms = summand_profile(q)
    k = np.arange(q.n + 1)
    tail = (k <= lo * q.n) | (k >= hi * q.n)
    total = special.logsumexp(terms)
    return float(np.exp(special.logsumexp(terms[tail]) - total))


def binary_entropy(a):
    a = np.asarray(a, dtype=np.float64)
    return -special.xlogy(a, a) - special.xlogy(1 - a, 1 - a)


@dataclass
class PhiProfile:
    alphas: np.ndarray
    values: np.ndarray
    second_diffs: np.ndarray  # aligned with alphas[1:-1]
    n: int
    m: int
    eps: float

    @property
    def step(self) -> float:
        return float(self.alphas[1] - self.alphas[0])

    @property
    def argmax_alpha(self) -> float:
        return float(self.alphas[int(np.argmax(self.values))])

    def is_concave(self) -> bool:
        return bool(np.all(self.second_diffs < 0))

    def symmetry_error(self) -> float:
        """Largest relative gap between phi(a) and phi(1 - a) on the grid."""
        rev = self.values[::-1]
        scale = np.maximum(np.abs(self.values), np.finfo(float).tiny)
        return float(np.max(np.abs(self.values - rev) / scale))

    def second_diff_at(self, alpha: float) -> float:
        i = int(np.argmin(np.abs(self.alphas[1:-1] - alpha)))
        return float(self.second_diffs[i])

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["alpha", "phi"])
            for a, v in zip(self.alphas, self.values):
                w.writerow([repr(float(a)), repr(float(v))])


def phi_value(n: int, m: int, log_z: float, alpha: float, epsrel: float = 1e-12) -> float:
    rho = 1.0 - 2.0 * alpha
    return (
        n * float(binary_entropy(alpha))
        + m * log_bivariate_rect(rho, log_z, epsrel)
        - 0.5 * math.log(alpha * (1.0 - alpha))
    )


def phi_profile(q: MomentQuery, grid_size: int = 101, lo: float = 0.25, hi: float = 0.75) -> PhiProfile:
    """phi_n(a) = n h(a) + m ln P_{1-2a}(z) - ln(a(1-a))/2 on a uniform grid."""
    if grid_size < 101:
        raise ValidationError("grid_size must be at least 101")
    if not 0 < lo < hi < 1:
        raise ValidationError("grid must lie inside (0, 1)")
    # build the grid symmetric about the midpoint so a and 1-a are both nodes
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    alphas = mid + half * np.linspace(-1.0, 1.0, grid_size)
    lz = q.log_z
    vals = np.array([phi_value(q.n, q.m, lz, float(a), q.epsrel) for a in alphas])
    h = alphas[1] - alphas[0]
    d2 = (vals[2:] - 2 * vals[1:-1] + vals[:-2]) / (h * h)
    return PhiProfile(alphas, vals, d2, q.n, q.m, q.epsilon)


@dataclass
class SmallBallViolation:
    kind: str
    z: float
    rho: float | None
    lhs: float
    rhs: float


@dataclass
class SmallBallReport:
    checked: int
    violations: list

    @property
    def ok(self) -> bool:
        return not self.violations


def small_ball_checks(z_grid, rho_grid, cubic_c: float = 1.0) -> SmallBallReport:
    """Check the three small-ball inequalities on every grid point."""
    root = math.sqrt(2.0 / math.pi)
    bad = []
    checked = 0
    for z in np.asarray(z_grid, dtype=np.float64):
        z = float(z)
        if not 0 < z < 1:
            raise DomainError("z must lie in (0, 1)")
        p = gauss_interval(z)
        checked += 2
        if p > root * z:
            bad.append(SmallBallViolation("upper", z, None, p, root * z))
        if p < root * z - cubic_c * z**3:
            bad.append(SmallBallViolation("lower", z, None, p, root * z - cubic_c * z**3))
        for rho in np.asarray(rho_grid, dtype=np.float64):
            rho = float(rho)
            if not -0.5 < rho < 0.5:
                raise DomainError("rho must lie in (-0.5, 0.5)")
            q = bivariate_rect(rho, z)
            b = bivariate_rect_bound(rho, z)
            checked += 1
            if q > b:
                bad.append(SmallBallViolation("bivariate", z, rho, q, b))
    return SmallBallReport(checked, bad)


def c_delta(delta: float) -> float:
    """Root x > 0 of P(|Z| <= x) = 2^(-1/delta), solved in ln x."""
    if not delta > 0:
        raise DomainError("delta must be positive")
    target = -LN2 / delta

    def f(u):
        return log_gauss_interval(u) - target

    lo, hi = -10.0, 2.0
    while f(lo) > 0:
        lo *= 2.0
        if lo < -1e6:
            raise DomainError("delta too small to resolve")
    u = optimize.brentq(f, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)
    return math.exp(u)


def c_delta_erfinv(delta: float) -> float:
    """Same root through the inverse error function (loses accuracy once 2^(-1/delta) underflows)."""
    return SQRT2 * float(special.erfinv(2.0 ** (-1.0 / delta)))
