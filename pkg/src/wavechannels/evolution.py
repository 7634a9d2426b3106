"""Radial time evolution in effective dimension D, plus exact oracles.

The solver advances w = r^((D-1)/2) v with a velocity-Verlet step; the free
part of w obeys a 1-d wave equation with the centrifugal coefficient
(D-1)(D-3)/(4 r^2). Modes: free, linearized, cone-truncated linearized
(potential shut off inside {r < |t| + R}), and the focusing nonlinear flow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, DomainError, InstabilityError
from .grid import FieldPair, RadialGrid, h_norm_sq
from .groundstate import potential_value

MODES = ("free", "linearized", "linearized_truncated", "nonlinear")


def centrifugal_coefficient(D: int) -> float:
    return (D - 1.0) * (D - 3.0) / 4.0


def max_stable_cfl(D: int) -> float:
    """Verlet stability limit including the centrifugal term at r = h/2."""
    return 1.0 / math.sqrt(1.0 + centrifugal_coefficient(D))


def default_cfl(D: int) -> float:
    return min(0.5, 0.9 * max_stable_cfl(D))


@dataclass(frozen=True)
class EvolutionConfig:
    D: int
    mode: str
    t_final: float
    N: int | None = None
    R: float = 0.0
    cfl: float | None = None
    snapshot_stride: int | None = None
    snapshot_times: tuple | None = None
    guard: float = 1e6

    def __post_init__(self):
        if self.D < 3 or self.D % 2 == 0:
            raise ConfigError(f"D must be odd >= 3, got {self.D}")
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.mode != "free":
            if self.N is None or self.N < 3 or self.N % 2 == 0 or self.N > self.D:
                raise ConfigError("potential modes need odd 3 <= N <= D")
        if self.mode == "nonlinear" and self.N != self.D:
            raise ConfigError("nonlinear mode requires D == N")
        if self.R < 0:
            raise ConfigError("truncation radius must be >= 0")
        if self.t_final <= 0:
            raise ConfigError("t_final must be positive")
        cfl = self.cfl if self.cfl is not None else default_cfl(self.D)
        if not (0.0 < cfl < 1.0):
            raise ConfigError(f"cfl must lie in (0, 1), got {cfl}")
        if cfl > max_stable_cfl(self.D):
            raise ConfigError(
                f"cfl {cfl} violates the stability bound {max_stable_cfl(self.D):.3f} "
                f"for D={self.D}")
        object.__setattr__(self, "cfl", cfl)


@dataclass(frozen=True)
class Trajectory:
    grid: RadialGrid
    config: EvolutionConfig
    times: np.ndarray
    snapshots: list
    guard_triggered: bool = False
    guard_step: int | None = None

    def snapshot_at(self, t: float) -> FieldPair:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > 1e-9 + 0.51 * (self.times[-1] / max(len(self.times) - 1, 1)):
            raise DomainError(f"t={t} was not snapshotted (nearest {self.times[i]})")
        return self.snapshots[i]

    @property
    def t_final(self) -> float:
        return float(self.times[-1])


def _weight(grid: RadialGrid) -> np.ndarray:
    return grid.r ** ((grid.D - 1) / 2.0)


def _acceleration(w: np.ndarray, t: float, grid: RadialGrid, cfg: EvolutionConfig,
                  Vr: np.ndarray | None, wt: np.ndarray, cf_over_r2: np.ndarray):
    h = grid.h
    lap = np.empty_like(w)
    lap[1:-1] = (w[2:] - 2 * w[1:-1] + w[:-2])
    lap[0] = (w[1] - 2 * w[0] - w[0])           # ghost w(-h/2) = -w(h/2)
    lap[-1] = (-w[-1] - 2 * w[-1] + w[-2])      # Dirichlet at r_max
    lap /= h * h
    acc = lap - cf_over_r2 * w
    if cfg.mode == "linearized":
        acc += Vr * w
    elif cfg.mode == "linearized_truncated":
        acc += np.where(grid.r > abs(t) + cfg.R, Vr, 0.0) * w
    elif cfg.mode == "nonlinear":
        v = w / wt
        acc += np.abs(v) ** (4.0 / (cfg.N - 2)) * w
    return acc


def evolve(initial: FieldPair, cfg: EvolutionConfig) -> Trajectory:
    """Advance the state to t_final, storing snapshots; forward time only.

    Backward evolution uses time-reversal: evolve (f, -g) forward (every
    supported mode is even in t).
    """
    grid = initial.grid
    if grid.D != cfg.D:
        raise ConfigError("grid dimension disagrees with config")
    h = grid.h
    dt_max = cfg.cfl * h
    n_steps = int(math.ceil(cfg.t_final / dt_max / 8.0)) * 8
    dt = cfg.t_final / n_steps

    if cfg.snapshot_times is not None:
        snap_steps = sorted({int(round(t / dt)) for t in cfg.snapshot_times} | {0, n_steps})
    else:
        stride = cfg.snapshot_stride or max(n_steps // 8, 1)
        snap_steps = sorted(set(range(0, n_steps + 1, stride)) | {0, n_steps})

    wt = _weight(grid)
    cf = centrifugal_coefficient(grid.D) / grid.r ** 2
    Vr = potential_value(cfg.N, grid.r) if cfg.mode != "free" else None

    w = initial.f * wt
    u = initial.g * wt
    times, snaps = [], []

    def record(step):
        times.append(step * dt)
        snaps.append(FieldPair(grid, w / wt, u / wt))

    guard_triggered = False
    guard_step = None
    acc = _acceleration(w, 0.0, grid, cfg, Vr, wt, cf)
    if 0 in snap_steps:
        record(0)
    for n in range(n_steps):
        w = w + dt * u + 0.5 * dt * dt * acc
        acc_new = _acceleration(w, (n + 1) * dt, grid, cfg, Vr, wt, cf)
        u = u + 0.5 * dt * (acc + acc_new)
        acc = acc_new
        if not np.isfinite(w[::17]).all() or not np.isfinite(w[-1]):
            if not np.isfinite(w).all():
                raise InstabilityError("non-finite field values", step=n + 1)
        if cfg.mode == "nonlinear":
            sup = float(np.max(np.abs(w / wt)))
            if sup > cfg.guard:
                guard_triggered = True
                guard_step = n + 1
                record(n + 1)
                break
        if (n + 1) in snap_steps:
            record(n + 1)
    return Trajectory(grid=grid, config=cfg, times=np.asarray(times),
                      snapshots=snaps, guard_triggered=guard_triggered,
                      guard_step=guard_step)


def evolve_nonlinear(initial: FieldPair, cfg: EvolutionConfig) -> Trajectory:
    if cfg.mode != "nonlinear":
        raise ConfigError("evolve_nonlinear requires mode='nonlinear'")
    return evolve(initial, cfg)


def evolve_both_directions(initial: FieldPair, cfg: EvolutionConfig
                           ) -> tuple[Trajectory, Trajectory]:
    fwd = evolve(initial, cfg)
    bwd = evolve(FieldPair(initial.grid, initial.f, -initial.g), cfg)
    return fwd, bwd


def discrete_energy(traj: Trajectory, index: int) -> float:
    """The scheme-compatible discrete energy of a stored snapshot.

    This is the quadratic (plus nonlinear potential) that the
    velocity-Verlet flow conserves up to its O(dt^2) wobble; it is a
    second-order-accurate discretization of the H(0) energy (free and
    linearized modes) and of the conserved nonlinear energy. Not conserved
    in the cone-truncated mode, whose potential is time dependent.
    """
    grid = traj.grid
    cfg = traj.config
    snap = traj.snapshots[index]
    wt = _weight(grid)
    w = snap.f * wt
    u = snap.g * wt
    cf = centrifugal_coefficient(grid.D) / grid.r ** 2
    Vr = potential_value(cfg.N, grid.r) if cfg.mode == "linearized" else None
    h = grid.h
    lap = np.empty_like(w)
    lap[1:-1] = (w[2:] - 2 * w[1:-1] + w[:-2])
    lap[0] = w[1] - 3 * w[0]
    lap[-1] = -3 * w[-1] + w[-2]
    lap /= h * h
    a_lin = lap - cf * w
    if Vr is not None:
        a_lin = a_lin + Vr * w
    total = 0.5 * np.sum(u * u) * h - 0.5 * np.sum(w * a_lin) * h
    if cfg.mode == "nonlinear":
        N = cfg.N
        p = 2.0 * N / (N - 2.0)
        pot = (N - 2.0) / (2.0 * N) * np.abs(snap.f) ** p * grid.r ** (grid.D - 1)
        total -= np.sum(pot) * h
    return float(total)


def support_radius(p: FieldPair, threshold: float = 1e-10) -> float:
    """Smallest rho with exterior H-energy below threshold * total."""
    total = h_norm_sq(p, 0.0)
    if total == 0.0:
        return 0.0
    g = p.grid
    from .grid import radial_derivative
    dens = (radial_derivative(p.f, g.h) ** 2 + p.g ** 2) * g.r ** (g.D - 1) * g.h
    tail = np.cumsum(dens[::-1])[::-1]
    below = tail <= threshold * total
    if not below.any():
        return g.r_max
    i = int(np.argmax(below))
    return float(g.r[i])


# ----------------------------------------------------------------------
# Exact oracles


def exact_resonance_solution(fam, k: int, parity: str, t: float,
                             derivative: bool = False) -> np.ndarray:
    """Polynomial-in-time solution of the (cone-exterior) linearized flow.

    Data (Z_k, 0): sum_j t^(2k-2j)/(2k-2j)! Z_j; data (0, Z_k):
    sum_j t^(2k+1-2j)/(2k+1-2j)! Z_j. With derivative=True the time
    derivative is returned instead. Valid outside {r > |t| + R}.
    """
    if not (1 <= k <= fam.K):
        raise DomainError(f"k={k} outside 1..{fam.K}")
    if parity not in ("even", "odd"):
        raise DomainError("parity must be 'even' or 'odd'")
    out = np.zeros_like(fam.Z[0])
    for j in range(1, k + 1):
        p = (2 * k - 2 * j) if parity == "even" else (2 * k + 1 - 2 * j)
        if derivative:
            p -= 1
            if p < 0:
                continue
        out += t ** p / math.factorial(p) * fam.Z[j - 1]
    return out


def free_power_solution(grid: RadialGrid, k: int, parity: str, t: float,
                        derivative: bool = False) -> np.ndarray:
    """Same polynomial structure for the free flow with data r^(2k-D).

    Uses Delta_D r^(2j-D) = (2j-D)(2j-2) r^(2j-2-D); exact for r > 0 and,
    by finite speed, for the exterior of any cone avoiding the origin.
    """
    D = grid.D
    mu = {j: (2 * j - D) * (2 * j - 2.0) for j in range(1, k + 1)}
    out = np.zeros(grid.M)
    coef = 1.0
    for i in range(0, k):
        j = k - i
        p = 2 * i if parity == "even" else 2 * i + 1
        if i > 0:
            coef *= mu[k - i + 1]
        fac = coef
        if derivative:
            p -= 1
            if p < 0:
                continue
        # coefficient of t^p / p! on r^(2j-D): prod of mu down the chain
        out += fac * t ** p / math.factorial(p) * grid.r ** (2 * j - D)
    return out


def dalembert_solution(initial: FieldPair, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Exact D=3 free solution of w = r v via odd extensions.

    w(t,r) = (F(r+t) + F(r-t))/2 + (G(r+t) - G(r-t))/2 with F the odd
    extension of r f and G the (even) primitive of the odd extension of
    r g. Returns (v, d_t v) on the grid; assumes the data is compactly
    supported inside the grid.
    """
    g = initial.grid
    if g.D != 3:
        raise DomainError("d'Alembert oracle is for D=3")
    from scipy.interpolate import CubicSpline

    # cubic splines of the odd/even extensions keep the oracle's own error
    # (O(h^4) values, O(h^3) derivatives) below the solver's O(h^2)
    s_nodes = np.concatenate((-g.r[::-1], g.r))
    F = g.r * initial.f
    rg = g.r * initial.g
    F_spl = CubicSpline(s_nodes, np.concatenate((-F[::-1], F)))
    rg_spl = CubicSpline(s_nodes, np.concatenate((-rg[::-1], rg)))
    Fp_spl = F_spl.derivative()
    G0 = 0.25 * g.h * rg[0]
    G = G0 + np.concatenate(([0.0], np.cumsum(0.5 * (rg[1:] + rg[:-1]) * g.h)))
    G_spl = CubicSpline(s_nodes, np.concatenate((G[::-1], G)))  # even

    top = float(s_nodes[-1])

    def ev(spl, x, fill):
        x = np.asarray(x, dtype=float)
        out = np.where(np.abs(x) <= top, spl(np.clip(x, -top, top)), fill)
        return out

    rp, rm = g.r + t, g.r - t
    w = 0.5 * (ev(F_spl, rp, 0.0) + ev(F_spl, rm, 0.0)) \
        + 0.5 * (ev(G_spl, rp, G[-1]) - ev(G_spl, rm, G[-1]))
    wt = 0.5 * (ev(Fp_spl, rp, 0.0) - ev(Fp_spl, rm, 0.0)) \
        + 0.5 * (ev(rg_spl, rp, 0.0) + ev(rg_spl, rm, 0.0))
    return w / g.r, wt / g.r


def clean_window(traj_or_grid, t: float, inner: float = 0.0,
                 margin: float = 1.0) -> tuple[float, float]:
    """Radial window causally untouched by the outer grid boundary at time t.

    The margin absorbs the scheme's superluminal numerical precursors
    (signal speed h/dt exceeds 1), which decay exponentially with distance
    from the physical front but need a few dozen cells to die out.
    """
    grid = traj_or_grid.grid if hasattr(traj_or_grid, "grid") else traj_or_grid
    pad = max(margin, 4 * grid.h)
    lo = inner + abs(t) + pad
    hi = grid.r_max - abs(t) - pad
    if hi <= lo:
        raise DomainError("no causally clean window at this time")
    return lo, hi
