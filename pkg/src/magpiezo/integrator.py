"""Implicit-midpoint time stepping of the semi-discrete observer/error system."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .discretization import Grid, SemiDiscreteSystem, assemble, initial_profile
from .errors import SolveFailure
from .gains import GainSet
from .model import MaterialParams


@dataclass(frozen=True)
class SimState:
    t: float
    u: np.ndarray
    v: np.ndarray


@dataclass(frozen=True)
class StepperConfig:
    dt: float
    T: float
    tol: float = 1e-9
    stride: int = 10

    def __post_init__(self):
        if not (self.dt > 0 and self.T >= 0):
            raise ValueError(f"need dt > 0 and T >= 0, got dt={self.dt!r}, T={self.T!r}")
        if self.T > 0 and self.dt > self.T:
            raise ValueError(f"dt={self.dt!r} exceeds T={self.T!r}")
        if not self.tol > 0:
            raise ValueError("solve tolerance must be positive")
        if self.stride < 1:
            raise ValueError("snapshot stride must be >= 1")

    @property
    def n_steps(self) -> int:
        if self.T == 0:
            return 0
        return max(1, math.ceil(self.T / self.dt - 1e-9))


def default_dt(grid: Grid) -> float:
    return grid.h / 10


@dataclass(frozen=True)
class InitialCondition:
    """Cosine-sum plant data shared by w, p and their velocities.

    The observer starts from the plant data with its displacement fields
    scaled by ``1 - mismatch``; the error therefore starts at
    ``-mismatch * (w0, p0)`` with zero velocity.
    """

    amplitude: float = 1e-3 / 25
    kmin: int = 5
    kmax: int = 30
    mismatch: float = 0.0

    def vectors(self, grid: Grid):
        f = initial_profile(grid.nodes, self.amplitude, self.kmin, self.kmax, grid.L)
        hat_disp = (1.0 - self.mismatch) * f
        err = hat_disp - f
        zero = np.zeros_like(f)
        u = np.concatenate([hat_disp, hat_disp, err, err])
        v = np.concatenate([f, f, zero, zero])
        return u, v


class Stepper:
    """Implicit midpoint for ``u' = v, Mh v' = -K u - C v``.

    The velocity update solves ``(Mh + dt/2 C + dt^2/4 K) v1 = (Mh - dt/2 C - dt^2/4 K) v0 - dt K u0``,
    which stays well posed although ``Mh`` itself is singular (the alternating
    node pattern has zero averaged mass).  Factorizations are cached per ``dt``.
    """

    def __init__(self, system: SemiDiscreteSystem, tol: float = 1e-9):
        self.system = system
        self.K = system.stiffness
        self.C = system.damping
        self.M = system.Mh
        self.tol = tol
        self._cache = {}

    def _factors(self, dt):
        if dt not in self._cache:
            S = self.M + 0.5 * dt * self.C + 0.25 * dt * dt * self.K
            R = self.M - 0.5 * dt * self.C - 0.25 * dt * dt * self.K
            try:
                lu = sla.lu_factor(S, check_finite=True)
            except (sla.LinAlgError, ValueError) as exc:
                raise SolveFailure(f"stepping matrix factorization failed: {exc}") from exc
            if np.min(np.abs(np.diag(lu[0]))) <= np.finfo(float).eps * np.abs(S).max():
                raise SolveFailure("stepping matrix is numerically singular")
            self._cache[dt] = (S, R, lu)
        return self._cache[dt]

    def step(self, state: SimState, dt: float) -> SimState:
        S, R, lu = self._factors(dt)
        rhs = R @ state.v - dt * (self.K @ state.u)
        v1 = sla.lu_solve(lu, rhs)
        res = np.linalg.norm(S @ v1 - rhs)
        scale = np.linalg.norm(rhs) + np.linalg.norm(S, 1) * np.linalg.norm(v1)
        if not np.all(np.isfinite(v1)) or res > self.tol * max(scale, np.finfo(float).tiny):
            raise SolveFailure(f"linear solve residual {res:.3e} above tolerance")
        u1 = state.u + 0.5 * dt * (state.v + v1)
        return SimState(state.t + dt, u1, v1)


def step(system: SemiDiscreteSystem, state: SimState, cfg: StepperConfig) -> SimState:
    """One step of size ``cfg.dt``; use :class:`Stepper` to reuse the factorization."""
    return Stepper(system, cfg.tol).step(state, cfg.dt)


@dataclass
class Trajectory:
    """Recorded snapshots.

    ``vbar_sq[i]`` holds, per unknown, the mean of the squared midpoint
    velocities of the two steps adjacent to snapshot ``i``; these are the
    velocities at which the scheme evaluates boundary dissipation.
    """

    system: SemiDiscreteSystem
    states: list = field(default_factory=list)
    vbar_sq: list = field(default_factory=list)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    def __len__(self):
        return len(self.states)

    def __iter__(self):
        return iter(self.states)

    def __getitem__(self, i):
        return self.states[i]


def _sawtooth_correction(v_prev, v, v_next, n_nodes):
    """Remove the step-to-step flip of the velocity along ``ker(Mh)``.

    Under implicit midpoint the kernel component of the velocity (one
    alternating node pattern per field) changes sign every step and never
    feeds back into displacements or energies.  Replacing it by the kernel
    component of ``(v_prev + 2 v + v_next) / 4`` gives nodal velocities that
    are smooth in time; ``Mh @ v`` is unchanged.
    """
    d = 0.25 * (v_prev - 2.0 * v + v_next)
    s = (-1.0) ** np.arange(n_nodes)
    out = v.copy()
    for b in range(len(v) // n_nodes):
        blk = slice(b * n_nodes, (b + 1) * n_nodes)
        out[blk] += (s @ d[blk]) / n_nodes * s
    return out


def integrate(system: SemiDiscreteSystem, u0, v0, cfg: StepperConfig) -> Trajectory:
    """Advance ``(u0, v0)`` to ``cfg.T`` and keep every ``cfg.stride``-th state plus the last.

    Recorded velocities carry the kernel correction of :func:`_sawtooth_correction`;
    displacements are the raw stepper output.
    """
    n = cfg.n_steps
    dt = cfg.T / n if n else cfg.dt
    stepper = Stepper(system, cfg.tol)
    cur = SimState(0.0, np.asarray(u0, float).copy(), np.asarray(v0, float).copy())
    if cur.u.shape != (system.size,) or cur.v.shape != (system.size,):
        raise ValueError(f"state vectors must have length {system.size}")
    n_nodes = system.n_nodes
    prev = stepper.step(cur, -dt)
    traj = Trajectory(system, [])
    for i in range(n + 1):
        nxt = stepper.step(cur, dt)
        if i % cfg.stride == 0 or i == n:
            t = cfg.T if i == n else cur.t
            traj.states.append(SimState(t, cur.u, _sawtooth_correction(prev.v, cur.v, nxt.v, n_nodes)))
            lo, hi = 0.5 * (prev.v + cur.v), 0.5 * (cur.v + nxt.v)
            traj.vbar_sq.append(0.5 * (lo * lo + hi * hi))
        prev, cur = cur, nxt
    return traj


def simulate(
    mat: MaterialParams,
    gains: GainSet,
    grid: Grid,
    ic: InitialCondition,
    cfg: StepperConfig,
) -> Trajectory:
    system = assemble(mat, gains, grid)
    u0, v0 = ic.vectors(grid)
    return integrate(system, u0, v0, cfg)
