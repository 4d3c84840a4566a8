"""Bounded one-dimensional densities, their products, and instance sampling."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special
from scipy.integrate import trapezoid

from .core import VectorSet
from .errors import DomainError, ValidationError
from .rng import as_generator

KINDS = ("uniform", "triangular", "truncated_gaussian", "tabulated")
# kinds whose density is symmetric and nonincreasing in |x|
_RADIAL = ("uniform", "triangular", "truncated_gaussian")


def default_gaussian_half_width(n: int) -> float:
    return 3.0 * math.sqrt(max(1.0, math.log(max(n, 1))))


@dataclass(frozen=True)
class BoundedDensity:
    """A probability density on [-half_width, half_width].

    ``sigma`` is the scale of the underlying normal for the
    truncated_gaussian kind.  Tabulated densities are piecewise linear
    through ``(grid_x, grid_p)`` on a uniform grid and are renormalised on
    construction.
    """

    kind: str
    half_width: float
    sigma: float = 1.0
    grid_x: tuple = field(default=(), repr=False)
    grid_p: tuple = field(default=(), repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown density kind {self.kind!r}")
        if self.kind == "tabulated":
            x = np.asarray(self.grid_x, dtype=np.float64)
            p = np.asarray(self.grid_p, dtype=np.float64)
            if x.ndim != 1 or x.shape != p.shape or x.size < 2:
                raise ValidationError("tabulated density needs matching x and p grids with >= 2 points")
            h = np.diff(x)
            if np.any(h <= 0) or not np.allclose(h, h[0], rtol=1e-9, atol=0):
                raise ValidationError("tabulated grid must be strictly increasing and uniform")
            if np.any(p < 0) or not np.all(np.isfinite(p)):
                raise ValidationError("tabulated density values must be finite and nonnegative")
            if not math.isclose(x[0], -x[-1], rel_tol=1e-12, abs_tol=1e-12):
                raise ValidationError("tabulated grid must be symmetric: [-D, D]")
            mass = float(np.sum(0.5 * (p[1:] + p[:-1]) * h))
            if mass <= 0:
                raise ValidationError("tabulated density has zero mass")
            object.__setattr__(self, "grid_x", tuple(x.tolist()))
            object.__setattr__(self, "grid_p", tuple((p / mass).tolist()))
            object.__setattr__(self, "half_width", float(x[-1]))
        if not (self.half_width > 0 and math.isfinite(self.half_width)):
            raise ValidationError("half_width must be positive and finite")
        if self.kind == "truncated_gaussian" and not self.sigma > 0:
            raise ValidationError("sigma must be positive")

    # -- constants -----------------------------------------------------
    @property
    def _gauss_mass(self) -> float:
        return float(special.erf(self.half_width / (self.sigma * math.sqrt(2.0))))

    @property
    def lipschitz(self) -> float:
        d = self.half_width
        if self.kind == "uniform":
            return 0.0
        if self.kind == "triangular":
            return 1.0 / d**2
        if self.kind == "truncated_gaussian":
            s = self.sigma
            x = min(s, d)
            return x * math.exp(-0.5 * (x / s) ** 2) / (math.sqrt(2 * math.pi) * s**3 * self._gauss_mass)
        p = np.asarray(self.grid_p)
        h = self.grid_x[1] - self.grid_x[0]
        return float(np.max(np.abs(np.diff(p))) / h)

    @property
    def sup_bound(self) -> float:
        d = self.half_width
        if self.kind == "uniform":
            return 1.0 / (2 * d)
        if self.kind == "triangular":
            return 1.0 / d
        if self.kind == "truncated_gaussian":
            return 1.0 / (math.sqrt(2 * math.pi) * self.sigma * self._gauss_mass)
        return float(max(self.grid_p))

    # -- evaluation ----------------------------------------------------
    def pdf(self, x):
        x = np.asarray(x, dtype=np.float64)
        d = self.half_width
        inside = np.abs(x) <= d
        if self.kind == "uniform":
            out = np.full(x.shape, 1.0 / (2 * d))
        elif self.kind == "triangular":
            out = (d - np.abs(x)) / d**2
        elif self.kind == "truncated_gaussian":
            s = self.sigma
            out = np.exp(-0.5 * (x / s) ** 2) / (math.sqrt(2 * math.pi) * s * self._gauss_mass)
        else:
            out = np.interp(x, self.grid_x, self.grid_p)
        return np.where(inside, out, 0.0)

    def cdf(self, x):
        x = np.clip(np.asarray(x, dtype=np.float64), -self.half_width, self.half_width)
        d = self.half_width
        if self.kind == "uniform":
            return (x + d) / (2 * d)
        if self.kind == "triangular":
            return np.where(x <= 0, (d + x) ** 2 / (2 * d**2), 1.0 - (d - x) ** 2 / (2 * d**2))
        if self.kind == "truncated_gaussian":
            s = self.sigma
            return 0.5 + 0.5 * special.erf(x / (s * math.sqrt(2))) / self._gauss_mass
        gx = np.asarray(self.grid_x)
        gp = np.asarray(self.grid_p)
        h = gx[1] - gx[0]
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (gp[1:] + gp[:-1]) * h)])
        i = np.clip(np.searchsorted(gx, x, side="right") - 1, 0, gx.size - 2)
        t = x - gx[i]
        slope = (gp[i + 1] - gp[i]) / h
        return cum[i] + gp[i] * t + 0.5 * slope * t * t

    def interval_min(self, lo, hi):
        """Exact minimum of the density over each interval [lo, hi]."""
        lo = np.asarray(lo, dtype=np.float64)
        hi = np.asarray(hi, dtype=np.float64)
        if self.kind in _RADIAL:
            far = np.maximum(np.abs(lo), np.abs(hi))
            return self.pdf(np.minimum(far, self.half_width))
        # piecewise linear: the minimum sits at an endpoint or at a knot inside
        gx = np.asarray(self.grid_x)
        gp = np.asarray(self.grid_p)
        out = np.minimum(self.pdf(lo), self.pdf(hi))
        a = np.searchsorted(gx, lo, side="right")
        b = np.searchsorted(gx, hi, side="left")
        flat_out = out.reshape(-1)
        for k, (ia, ib) in enumerate(zip(a.reshape(-1), b.reshape(-1))):
            if ib > ia:
                flat_out[k] = min(flat_out[k], gp[ia:ib].min())
        return flat_out.reshape(out.shape)

    # -- sampling ------------------------------------------------------
    def sample(self, rng, size: int):
        """Draw ``size`` values.  Returns (values, uniforms_or_normals_used, rejections)."""
        gen = as_generator(rng)
        d = self.half_width
        if self.kind == "uniform":
            return gen.random(size) * (2 * d) - d, size, 0
        if self.kind == "triangular":
            uv = gen.random((size, 2)) * d
            return uv[:, 0] - uv[:, 1], 2 * size, 0
        if self.kind == "truncated_gaussian":
            vals, rej = _rejection_normals(gen, size, d / self.sigma)
            return vals * self.sigma, size + rej, rej
        u = gen.random(size)
        return self._inverse_cdf(u), size, 0

    def _inverse_cdf(self, u):
        gx = np.asarray(self.grid_x)
        gp = np.asarray(self.grid_p)
        h = gx[1] - gx[0]
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (gp[1:] + gp[:-1]) * h)])
        cum /= cum[-1]
        i = np.clip(np.searchsorted(cum, u, side="right") - 1, 0, gx.size - 2)
        r = u - cum[i]
        a = 0.5 * (gp[i + 1] - gp[i]) / h
        b = gp[i]
        # solve a t^2 + b t = r on [0, h], stable form
        disc = np.sqrt(np.maximum(b * b + 4 * a * r, 0.0))
        denom = b + disc
        t = np.where(denom > 0, 2 * r / np.where(denom > 0, denom, 1.0), 0.0)
        return np.clip(gx[i] + np.clip(t, 0, h), -self.half_width, self.half_width)


def _rejection_normals(gen: np.random.Generator, size: int, bound: float):
    vals = gen.standard_normal(size)
    bad = np.flatnonzero(np.abs(vals) > bound)
    rejections = 0
    while bad.size:
        rejections += bad.size
        vals[bad] = gen.standard_normal(bad.size)
        bad = bad[np.abs(vals[bad]) > bound]
    return vals, rejections


def uniform(half_width: float = 1.0) -> BoundedDensity:
    return BoundedDensity("uniform", half_width)


def triangular(half_width: float = 1.0) -> BoundedDensity:
    return BoundedDensity("triangular", half_width)


def truncated_gaussian(half_width: float, sigma: float = 1.0) -> BoundedDensity:
    return BoundedDensity("truncated_gaussian", half_width, sigma=sigma)


def tabulated(x, p) -> BoundedDensity:
    x = np.asarray(x, dtype=np.float64)
    return BoundedDensity("tabulated", float(x[-1]), grid_x=tuple(x), grid_p=tuple(np.asarray(p, dtype=np.float64)))


def load_tabulated(path) -> BoundedDensity:
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split(",")]
            try:
                rows.append((float(parts[0]), float(parts[1])))
            except (ValueError, IndexError):
                if rows:
                    raise ValidationError(f"bad line in tabulated density: {line!r}")
                continue  # header
    if len(rows) < 2:
        raise ValidationError("tabulated density needs at least two rows")
    arr = np.array(rows)
    return tabulated(arr[:, 0], arr[:, 1])


def parse_density(spec: str, n: int | None = None) -> BoundedDensity:
    """Parse ``kind[:half_width[:sigma]]`` or ``tabulated:<csv path>``.

    ``gaussian`` (no parameters) is a standard normal truncated at
    3*sqrt(max(1, ln n)), so it needs ``n``.
    """
    head, _, rest = spec.strip().partition(":")
    head = head.strip().lower()
    args = [a for a in rest.split(":") if a.strip()] if rest else []
    if head == "tabulated":
        if not rest:
            raise ValidationError("tabulated density needs a CSV path")
        return load_tabulated(rest)
    if head in ("uniform", "triangular"):
        return BoundedDensity(head, float(args[0]) if args else 1.0)
    if head in ("truncated_gaussian", "gaussian", "normal"):
        if args:
            hw = float(args[0])
        elif n is not None:
            hw = default_gaussian_half_width(n)
        else:
            raise ValidationError("gaussian density needs a half-width or an instance size")
        sigma = float(args[1]) if len(args) > 1 else 1.0
        return truncated_gaussian(hw, sigma)
    raise ValidationError(f"unknown density spec {spec!r}")


def density_to_spec(rho: BoundedDensity) -> str:
    if rho.kind == "truncated_gaussian":
        return f"truncated_gaussian:{rho.half_width!r}:{rho.sigma!r}"
    if rho.kind == "tabulated":
        return "tabulated"
    return f"{rho.kind}:{rho.half_width!r}"


def sample_instance(rho: BoundedDensity, m: int, n: int, rng) -> VectorSet:
    """m*n iid draws from rho, filled column by column."""
    if m < 1 or n < 1:
        raise ValidationError("m and n must be at least 1")
    vals, _, _ = rho.sample(rng, m * n)
    return VectorSet(vals.reshape(n, m).T)


def truncate_gaussian(m: int, n: int, half_width: float, rng) -> tuple[VectorSet, int]:
    """Standard normal entries conditioned on |entry| <= half_width.

    Rejected entries are redrawn one by one; returns (instance, rejections).
    """
    if not half_width > 0:
        raise ValidationError("half_width must be positive")
    gen = as_generator(rng)
    vals, rej = _rejection_normals(gen, m * n, half_width)
    return VectorSet(vals.reshape(n, m).T), rej


def product_density_eval(rho: BoundedDensity, x) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if np.any(np.abs(x) > rho.half_width):
        raise DomainError(f"point {x.tolist()} lies outside [-{rho.half_width}, {rho.half_width}]^m")
    return float(np.prod(rho.pdf(x)))


def product_lipschitz(rho: BoundedDensity, m: int) -> float:
    """l1-Lipschitz constant L * D^(m-1) of the m-fold product density."""
    return rho.lipschitz * rho.sup_bound ** (m - 1)


def subcube_density_min(rho: BoundedDensity, lo, hi) -> float:
    """Minimum of the product density over the box [lo, hi]."""
    lo = np.atleast_1d(np.asarray(lo, dtype=np.float64))
    hi = np.atleast_1d(np.asarray(hi, dtype=np.float64))
    if lo.shape != hi.shape or np.any(hi < lo):
        raise DomainError("box corners must have matching shapes and lo <= hi")
    if np.any(np.abs(lo) > rho.half_width * (1 + 1e-12)) or np.any(np.abs(hi) > rho.half_width * (1 + 1e-12)):
        raise DomainError("box leaves the support of the density")
    return float(np.prod(rho.interval_min(lo, hi)))


def check_density(rho: BoundedDensity, points: int = 10_000) -> dict:
    """Numerical sanity report: total mass, sup bound and Lipschitz bound on a grid."""
    x = np.linspace(-rho.half_width, rho.half_width, points)
    p = rho.pdf(x)
    mass = float(trapezoid(p, x))
    slopes = np.abs(np.diff(p)) / np.diff(x)
    return {
        "mass": mass,
        "max_density": float(p.max()),
        "sup_bound": rho.sup_bound,
        "max_slope": float(slopes.max()),
        "lipschitz": rho.lipschitz,
        "sup_ok": bool(p.max() <= rho.sup_bound * (1 + 1e-12)),
        "lipschitz_ok": bool(slopes.max() <= rho.lipschitz * (1 + 1e-9) + 1e-12),
    }
