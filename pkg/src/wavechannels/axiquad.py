"""Axisymmetric quadrature over R^N in (x1, rho) half-plane coordinates.

Polar-logarithmic midpoint grid: x1 = e^tau cos(phi), rho = e^tau sin(phi).
Smooth integrands with power-law tails converge quickly in tau, and the
rho^(N-2) sphere weight is carried explicitly so values match full-space
integrals.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .groundstate import sphere_area


@dataclass(frozen=True)
class PolarGrid:
    N: int
    n_tau: int = 920
    n_phi: int = 192
    tau_min: float = -9.0
    tau_max: float = 14.0
    x1: np.ndarray = field(init=False, repr=False, compare=False)
    rho: np.ndarray = field(init=False, repr=False, compare=False)
    w: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        dtau = (self.tau_max - self.tau_min) / self.n_tau
        dphi = np.pi / self.n_phi
        tau = self.tau_min + (np.arange(self.n_tau) + 0.5) * dtau
        phi = (np.arange(self.n_phi) + 0.5) * dphi
        T, P = np.meshgrid(tau, phi, indexing="ij")
        sigma = np.exp(T)
        x1 = sigma * np.cos(P)
        rho = sigma * np.sin(P)
        w = (sphere_area(self.N - 2) * np.exp(self.N * T)
             * np.sin(P) ** (self.N - 2) * dtau * dphi)
        for a in (x1, rho, w):
            a.setflags(write=False)
        object.__setattr__(self, "x1", x1)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "w", w)

    def integrate(self, func) -> float:
        """sigma_(N-2) * iint func(x1, rho) rho^(N-2) drho dx1."""
        return float(np.sum(func(self.x1, self.rho) * self.w))
