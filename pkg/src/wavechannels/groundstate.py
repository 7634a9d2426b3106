"""Closed forms for the ground state, its scaling generator, and energies.

All profile functions here are evaluated analytically (never from stored
samples) so they can serve as oracles for the solvers.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DomainError
from .grid import FieldPair, quadrature, radial_derivative


def _check_n(N: int):
    if N < 3 or N % 2 == 0:
        raise DomainError(f"N must be odd and >= 3, got {N}")


def sphere_area(n: int) -> float:
    """Surface area of the unit sphere S^n in R^(n+1)."""
    return 2.0 * math.pi ** ((n + 1) / 2) / math.gamma((n + 1) / 2)


def w_value(N: int, r):
    """Ground-state profile (1 + r^2/(N(N-2)))^(1-N/2)."""
    _check_n(N)
    r = np.asarray(r, dtype=float)
    return (1.0 + r * r / (N * (N - 2))) ** (1.0 - N / 2.0)


def w_prime(N: int, r):
    _check_n(N)
    r = np.asarray(r, dtype=float)
    a = N * (N - 2)
    return (1.0 - N / 2.0) * (2.0 * r / a) * (1.0 + r * r / a) ** (-N / 2.0)


def w_second(N: int, r):
    _check_n(N)
    r = np.asarray(r, dtype=float)
    a = N * (N - 2)
    u = 1.0 + r * r / a
    c = 1.0 - N / 2.0
    return (2.0 * c / a) * u ** (-N / 2.0 - 1.0) * (u - (N / a) * r * r)


def lambda_w_value(N: int, r):
    """Scaling generator r dW/dr + (N/2 - 1) W."""
    r = np.asarray(r, dtype=float)
    return r * w_prime(N, r) + (N / 2.0 - 1.0) * w_value(N, r)


def lambda_w_prime(N: int, r):
    """d/dr of the scaling generator, in closed form."""
    r = np.asarray(r, dtype=float)
    return r * w_second(N, r) + (N / 2.0) * w_prime(N, r)


def potential_value(N: int, r):
    """Linearized potential (N+2)/(N-2) W^(4/(N-2)).

    W^(4/(N-2)) collapses to (1 + r^2/(N(N-2)))^(-2) for every N, so the
    potential is an exact rational function with r^-4 decay.
    """
    _check_n(N)
    r = np.asarray(r, dtype=float)
    return (N + 2.0) / (N - 2.0) * (1.0 + r * r / (N * (N - 2))) ** -2


def potential_leading_coefficient(N: int) -> float:
    """Coefficient kappa in potential ~ kappa / r^4 at infinity."""
    return (N + 2.0) / (N - 2.0) * (N * (N - 2)) ** 2


def bubble_value(N: int, r):
    """(1 + r^2/(N(N-2)))^(-N/2): radial part of the translation generator."""
    _check_n(N)
    r = np.asarray(r, dtype=float)
    return (1.0 + r * r / (N * (N - 2))) ** (-N / 2.0)


def bubble_prime(N: int, r):
    _check_n(N)
    r = np.asarray(r, dtype=float)
    a = N * (N - 2)
    return -(N / a) * r * (1.0 + r * r / a) ** (-N / 2.0 - 1.0)


def scaled_w(N: int, lam: float, r):
    """Critical rescaling lam^(-(N/2-1)) W(r/lam)."""
    if lam <= 0:
        raise DomainError("scale must be positive")
    r = np.asarray(r, dtype=float)
    return lam ** (1.0 - N / 2.0) * w_value(N, r / lam)


def energy(p: FieldPair, N: int | None = None) -> float:
    """Conserved energy of the focusing critical equation at state (f, g).

    1/2 int (|d_r f|^2 + g^2) r^(N-1) dr * sigma  -  (N-2)/(2N) int |f|^(2N/(N-2)) ...
    with the unit-sphere area carried explicitly so values match full-space
    integrals. Tail-corrected quadratures keep slowly decaying profiles
    (like W itself) accurate on finite grids.
    """
    if N is None:
        N = p.grid.D
    if p.grid.D != N:
        raise DomainError("energy requires the grid dimension to equal N")
    _check_n(N)
    sigma = sphere_area(N - 1)
    df = radial_derivative(p.f, p.grid.h)
    kin = quadrature(p.grid, df * df, 0.0, tail=True) + quadrature(p.grid, p.g * p.g, 0.0, tail=True)
    pot = quadrature(p.grid, np.abs(p.f) ** (2.0 * N / (N - 2)), 0.0, tail=True)
    val = sigma * (0.5 * kin - (N - 2.0) / (2.0 * N) * pot)
    if not np.isfinite(val):
        raise DomainError("energy evaluated to a non-finite value")
    return float(val)
