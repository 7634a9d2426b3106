"""Distance to the traveling-wave manifold and modulation-parameter fits.

Data are axisymmetric pairs with translation X1 and velocity ell along the
symmetry axis. The fit minimizes the squared energy-norm distance to the
manifold member with parameters Theta = (X1, lambda, ell) over the chart
(X1, log lambda, atanh ell), which keeps the constraints lambda > 0 and
|ell| < 1 unconstrained. Minimization is derivative-free (Nelder-Mead);
the returned point carries a finite-difference stationarity certificate,
the discrete form of the minimizer's orthogonality conditions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .axiquad import PolarGrid
from .errors import DomainError
from .groundstate import w_prime, w_value

_FD_STEP = 1e-4
_GUESS_FRACTION = 0.1   # admissible delta at the initial guess, vs ||W||_H1^2


def default_quadrature(N: int) -> PolarGrid:
    return PolarGrid(N, n_tau=600, n_phi=96, tau_min=-9.0, tau_max=12.0)


@dataclass(frozen=True)
class AxisymPair:
    """Axisymmetric state: f with both partials, and the velocity g."""

    f: object
    fx: object
    fr: object
    g: object


def pair_from_radial(profile, dprofile, vprofile=None) -> AxisymPair:
    def f(x1, rho):
        return profile(np.hypot(x1, rho))

    def fx(x1, rho):
        rr = np.hypot(x1, rho)
        rs = np.where(rr > 0, rr, 1.0)
        return np.where(rr > 0, dprofile(rr) * x1 / rs, 0.0)

    def fr(x1, rho):
        rr = np.hypot(x1, rho)
        rs = np.where(rr > 0, rr, 1.0)
        return np.where(rr > 0, dprofile(rr) * rho / rs, 0.0)

    if vprofile is None:
        def g(x1, rho):
            return np.zeros_like(np.asarray(x1, dtype=float))
    else:
        def g(x1, rho):
            return vprofile(np.hypot(x1, rho))

    return AxisymPair(f=f, fx=fx, fr=fr, g=g)


def combine_pairs(a: AxisymPair, b: AxisymPair, cb: float) -> AxisymPair:
    return AxisymPair(
        f=lambda x1, rho: a.f(x1, rho) + cb * b.f(x1, rho),
        fx=lambda x1, rho: a.fx(x1, rho) + cb * b.fx(x1, rho),
        fr=lambda x1, rho: a.fr(x1, rho) + cb * b.fr(x1, rho),
        g=lambda x1, rho: a.g(x1, rho) + cb * b.g(x1, rho),
    )


def boosted_w_pair(N: int, X1: float, lam: float, ell: float) -> AxisymPair:
    """Manifold member: scaled, translated, boosted ground state at t = 0."""
    if lam <= 0 or abs(ell) >= 1.0:
        raise DomainError("need lambda > 0 and |ell| < 1")
    g = 1.0 / math.sqrt(1.0 - ell * ell)
    amp_f = lam ** (1.0 - N / 2.0)
    amp_g = lam ** (-N / 2.0)

    def geom(x1, rho):
        z1 = (np.asarray(x1, dtype=float) - X1) / lam
        zr = np.asarray(rho, dtype=float) / lam
        rr = np.hypot(g * z1, zr)
        rs = np.where(rr > 0, rr, 1.0)
        return z1, zr, rr, rs

    def f(x1, rho):
        _, _, rr, _ = geom(x1, rho)
        return amp_f * w_value(N, rr)

    def fx(x1, rho):
        z1, _, rr, rs = geom(x1, rho)
        return amp_f * w_prime(N, rr) * (g * g * z1) / rs / lam

    def fr(x1, rho):
        _, zr, rr, rs = geom(x1, rho)
        return amp_f * w_prime(N, rr) * zr / rs / lam

    def gfun(x1, rho):
        z1, _, rr, rs = geom(x1, rho)
        return amp_g * (-ell * g) * w_prime(N, rr) * (g * z1) / rs

    return AxisymPair(f=f, fx=fx, fr=fr, g=gfun)


def pair_h_norm_sq(data: AxisymPair, quad: PolarGrid) -> float:
    return quad.integrate(lambda x1, rho: data.fx(x1, rho) ** 2
                          + data.fr(x1, rho) ** 2 + data.g(x1, rho) ** 2)


@dataclass(frozen=True)
class ModulationPoint:
    X1: float
    lam: float
    ell: float
    value: float
    residuals: tuple
    converged: bool
    nfev: int

    def __post_init__(self):
        if self.lam <= 0 or abs(self.ell) >= 1.0 or self.value < -1e-12:
            raise DomainError("modulation point violates its invariants")


def member_gradient_arrays(N: int, theta: tuple, x1, rho):
    """(d_x1 f, d_rho f, g) of the manifold member, one fused evaluation."""
    X1, lam, ell = theta
    g = 1.0 / math.sqrt(1.0 - ell * ell)
    amp_f = lam ** (1.0 - N / 2.0)
    amp_g = lam ** (-N / 2.0)
    z1 = (x1 - X1) / lam
    zr = rho / lam
    rr = np.hypot(g * z1, zr)
    rs = np.where(rr > 0, rr, 1.0)
    wp = w_prime(N, rr)
    fx = amp_f * wp * (g * g * z1) / rs / lam
    fr = amp_f * wp * zr / rs / lam
    gg = amp_g * (-ell * g) * wp * (g * z1) / rs
    return fx, fr, gg


def _delta_from_arrays(data_fx, data_fr, data_g, N: int, theta: tuple,
                       quad: PolarGrid) -> float:
    mfx, mfr, mg = member_gradient_arrays(N, theta, quad.x1, quad.rho)
    val = float(np.sum(((data_fx - mfx) ** 2 + (data_fr - mfr) ** 2
                        + (data_g - mg) ** 2) * quad.w))
    if not np.isfinite(val):
        raise DomainError("distance quadrature failed")
    return val


def delta_w(data: AxisymPair, theta: tuple, N: int,
            quad: PolarGrid | None = None) -> float:
    """Squared energy-norm distance of data to the member with parameters
    theta = (X1, lambda, ell)."""
    quad = quad or default_quadrature(N)
    if theta[1] <= 0 or abs(theta[2]) >= 1.0:
        raise DomainError("need lambda > 0 and |ell| < 1")
    return _delta_from_arrays(data.fx(quad.x1, quad.rho),
                              data.fr(quad.x1, quad.rho),
                              data.g(quad.x1, quad.rho), N, theta, quad)


def _chart_to_theta(u) -> tuple:
    return float(u[0]), math.exp(float(u[1])), math.tanh(float(u[2]))


def minimize_delta_w(data: AxisymPair, N: int, theta0: tuple,
                     quad: PolarGrid | None = None,
                     w_h1_sq: float | None = None,
                     initial_step: float = 0.1) -> ModulationPoint:
    """Simplex descent of the manifold distance from a nearby guess.

    Raises if the guess is outside the small-distance regime. The result
    carries directional-derivative residuals along the three chart
    directions (central differences, step 1e-4).
    """
    quad = quad or default_quadrature(N)
    if w_h1_sq is None:
        def h1_integrand(x1, rho):
            return w_prime(N, np.hypot(x1, rho)) ** 2
        w_h1_sq = quad.integrate(h1_integrand)

    # data arrays are fixed over the minimization; evaluate them once
    dfx = data.fx(quad.x1, quad.rho)
    dfr = data.fr(quad.x1, quad.rho)
    dg = data.g(quad.x1, quad.rho)

    d0 = _delta_from_arrays(dfx, dfr, dg, N, theta0, quad)
    if d0 > _GUESS_FRACTION * w_h1_sq:
        raise DomainError(
            f"initial guess too far from the manifold: delta {d0:.3g} vs "
            f"admissible {_GUESS_FRACTION * w_h1_sq:.3g}")

    u0 = np.array([theta0[0], math.log(theta0[1]), math.atanh(theta0[2])])

    def objective(u):
        return _delta_from_arrays(dfx, dfr, dg, N, _chart_to_theta(u), quad)

    simplex = np.vstack([u0] + [u0 + initial_step * e for e in np.eye(3)])
    res = optimize.minimize(objective, u0, method="Nelder-Mead",
                            options=dict(initial_simplex=simplex,
                                         xatol=1e-8, fatol=1e-12,
                                         maxiter=4000, maxfev=6000))
    # polishing pass with a tight simplex around the incumbent
    simplex2 = np.vstack([res.x] + [res.x + 3e-6 * e for e in np.eye(3)])
    res2 = optimize.minimize(objective, res.x, method="Nelder-Mead",
                             options=dict(initial_simplex=simplex2,
                                          xatol=1e-10, fatol=1e-14,
                                          maxiter=1000, maxfev=2000))
    best = res2 if res2.fun <= res.fun else res

    grads = []
    for e in np.eye(3):
        up = best.x + _FD_STEP * e
        dn = best.x - _FD_STEP * e
        grads.append((objective(up) - objective(dn)) / (2 * _FD_STEP))
    data_sq = pair_h_norm_sq(data, quad)
    converged = bool(max(abs(g) for g in grads) <= 1e-6 * max(data_sq, 1e-300))
    X1, lam, ell = _chart_to_theta(best.x)
    return ModulationPoint(X1=X1, lam=lam, ell=ell, value=float(best.fun),
                           residuals=tuple(float(g) for g in grads),
                           converged=converged,
                           nfev=int(res.nfev + res2.nfev + 6))
