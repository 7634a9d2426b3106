"""Staggered radial grids, weighted quadrature and the exterior energy form.

Everything downstream (solvers, projections, channel estimates) measures
fields through the quadrature and inner product defined here: integrals
against r^(D-1) dr over [R, r_max], with an optional analytic power-law
tail correction for integrands that keep decaying past the grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

# Nodes in the last decade of the grid feed the tail fit.
_TAIL_FIT_FRACTION = 0.1
_TAIL_MIN_NODES = 8


@dataclass(frozen=True)
class RadialGrid:
    """Staggered mesh r_i = (i + 1/2) h on [0, r_max] in effective dimension D.

    The half-offset keeps every node strictly positive, so effective
    potentials behaving like c/r^2 near the origin stay finite on nodes.
    """

    D: int
    h: float
    M: int
    r: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.D < 3 or self.D % 2 == 0:
            raise DomainError(f"D must be odd and >= 3, got {self.D}")
        if self.h <= 0 or self.M < 8:
            raise DomainError(f"need h > 0 and M >= 8, got h={self.h}, M={self.M}")
        r = (np.arange(self.M) + 0.5) * self.h
        r.setflags(write=False)
        object.__setattr__(self, "r", r)

    @property
    def r_max(self) -> float:
        return self.M * self.h

    @classmethod
    def make(cls, D: int, h: float, r_max: float) -> "RadialGrid":
        return cls(D=D, h=h, M=int(round(r_max / h)))

    def weights(self) -> np.ndarray:
        return self.r ** (self.D - 1) * self.h


@dataclass(frozen=True)
class FieldPair:
    """A state (f, g) = (v, d_t v) sampled on a radial grid."""

    grid: RadialGrid
    f: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.f, dtype=float).copy()
        g = np.asarray(self.g, dtype=float).copy()
        if f.shape != (self.grid.M,) or g.shape != (self.grid.M,):
            raise DomainError("f, g must each have exactly M samples")
        if not (np.all(np.isfinite(f)) and np.all(np.isfinite(g))):
            raise DomainError("FieldPair samples must be finite")
        f.setflags(write=False)
        g.setflags(write=False)
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "g", g)

    @classmethod
    def zero(cls, grid: RadialGrid) -> "FieldPair":
        z = np.zeros(grid.M)
        return cls(grid, z, z)


def radial_derivative(samples: np.ndarray, h: float) -> np.ndarray:
    """Centered 2nd-order d/dr, one-sided 2nd-order at both grid ends."""
    s = np.asarray(samples, dtype=float)
    d = np.empty_like(s)
    d[1:-1] = (s[2:] - s[:-2]) / (2.0 * h)
    d[0] = (-3.0 * s[0] + 4.0 * s[1] - s[2]) / (2.0 * h)
    d[-1] = (3.0 * s[-1] - 4.0 * s[-2] + s[-3]) / (2.0 * h)
    return d


def _tail_correction(grid: RadialGrid, samples: np.ndarray) -> float:
    """Analytic integral of a fitted power law c*r^p over (r_max, inf).

    The fit uses the last decade of samples; it is exact when the samples
    are a pure power law there, which is the regime this is meant for
    (squares of power-law tails). Mixed-sign or non-decaying tails get no
    correction.
    """
    r = grid.r
    lo = grid.r_max * (1.0 - _TAIL_FIT_FRACTION)
    sel = r >= lo
    if np.count_nonzero(sel) < _TAIL_MIN_NODES:
        return 0.0
    y = samples[sel]
    if np.all(y == 0.0):
        return 0.0
    sign = 1.0 if np.mean(y) >= 0 else -1.0
    ys = sign * y
    if np.any(ys <= 0.0):
        return 0.0
    logr = np.log(r[sel])
    logy = np.log(ys)
    p, a = np.polyfit(logr, logy, 1)
    if p + grid.D >= -0.1:
        # tail not integrable against r^(D-1); refuse to extrapolate
        return 0.0
    c = sign * np.exp(a)
    return -c * grid.r_max ** (p + grid.D) / (p + grid.D)


def quadrature(grid: RadialGrid, samples: np.ndarray, R: float = 0.0,
               tail: bool = False) -> float:
    """Midpoint-rule integral of samples against r^(D-1) dr over [R, r_max].

    With tail=True a fitted power-law continuation past r_max is added.
    """
    if R > grid.r_max:
        raise DomainError(f"R={R} exceeds r_max={grid.r_max}")
    s = np.asarray(samples, dtype=float)
    mask = grid.r >= R
    total = float(np.sum(s[mask] * grid.r[mask] ** (grid.D - 1)) * grid.h)
    if tail:
        total += _tail_correction(grid, s)
    return total


def h_norm_sq(p: FieldPair, R: float = 0.0, tail: bool = False) -> float:
    """Exterior energy norm squared: int_R^inf ((d_r f)^2 + g^2) r^(D-1) dr."""
    if R > p.grid.r_max - 2 * p.grid.h:
        raise DomainError("R too close to r_max for the derivative stencil")
    df = radial_derivative(p.f, p.grid.h)
    return quadrature(p.grid, df * df, R, tail) + quadrature(p.grid, p.g * p.g, R, tail)


def h_inner(p: FieldPair, q: FieldPair, R: float = 0.0) -> float:
    """Bilinear form polarizing h_norm_sq; h_inner(p, p, R) == h_norm_sq(p, R).

    No tail correction: the form must stay exactly bilinear so Gram solves
    against it reproduce span members to solver precision.
    """
    if p.grid is not q.grid and (p.grid.D, p.grid.h, p.grid.M) != (q.grid.D, q.grid.h, q.grid.M):
        raise DomainError("h_inner requires both pairs on the same grid")
    dfp = radial_derivative(p.f, p.grid.h)
    dfq = radial_derivative(q.f, q.grid.h)
    return quadrature(p.grid, dfp * dfq, R) + quadrature(p.grid, p.g * q.g, R)


def h_seminorm_distance(a: FieldPair, b: FieldPair, r_lo: float, r_hi: float) -> float:
    """Relative H-distance of two pairs restricted to the window [r_lo, r_hi].

    Used by oracle comparisons; the window lets callers exclude regions
    causally touched by the outer grid boundary.
    """
    g = a.grid
    if r_hi <= r_lo:
        raise DomainError(f"empty comparison window [{r_lo}, {r_hi}]")
    sel = (g.r >= r_lo) & (g.r <= r_hi)
    w = g.r[sel] ** (g.D - 1) * g.h
    da = radial_derivative(a.f, g.h)
    db = radial_derivative(b.f, g.h)
    num = np.sum(((da - db)[sel] ** 2 + (a.g - b.g)[sel] ** 2) * w)
    den = np.sum((db[sel] ** 2 + b.g[sel] ** 2) * w)
    if den == 0.0:
        return float(np.sqrt(num))
    return float(np.sqrt(num / den))
