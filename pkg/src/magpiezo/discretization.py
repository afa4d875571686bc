"""Uniform grid and the averaged-mass / differenced-stiffness semi-discretization.

Unknowns live on the nodes ``x_0 .. x_{N+1}``; cell averages and difference
quotients at the midpoints are derived quantities.  All rows are scaled as
printed for the reduced model, i.e. the node-``j`` balance is divided by ``h``,
which keeps every assembled block symmetric:

* mass      ``Mh = kron(M, P^T P / 4)``
* stiffness ``Kh = kron(A, D^T D / h**2)``
* boundary gains enter as ``K_ij / h`` on the boundary node.

with ``P`` the (N+1)x(N+2) two-point averaging matrix and ``D`` the forward
difference.  The discrete energy of a state ``(u, v)`` is
``h/2 * (v.Mh.v + u.(Kh + Gh).u)``.

The global unknown vector is ordered ``[w_hat, p_hat, e1, e2]``, each block
holding N+2 nodal values.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridTooCoarse, NonPositiveParameter
from .gains import GainSet, gain_matrices
from .model import MaterialParams, coupling_matrices

FIELDS = ("hat_w", "hat_p", "e1", "e2")


@dataclass(frozen=True)
class Grid:
    N: int
    L: float

    @property
    def h(self) -> float:
        return self.L / (self.N + 1)

    @property
    def n_nodes(self) -> int:
        return self.N + 2

    @property
    def nodes(self) -> np.ndarray:
        x = np.arange(self.N + 2) * self.h
        x[-1] = self.L
        return x

    @property
    def midpoints(self) -> np.ndarray:
        x = self.nodes
        return 0.5 * (x[1:] + x[:-1])


def build_grid(L: float, N: int) -> Grid:
    if N < 2:
        raise GridTooCoarse(f"need at least 2 interior nodes, got N={N}")
    if not L > 0:
        raise NonPositiveParameter(f"L must be > 0, got {L!r}")
    return Grid(N=int(N), L=float(L))


def initial_profile(x, amplitude=1e-3 / 25, kmin=5, kmax=30, L=1.0):
    """``amplitude * sum_{k=kmin}^{kmax} cos(k pi x / L)``; accepts scalars or arrays."""
    x = np.asarray(x, dtype=float)
    k = np.arange(kmin, kmax + 1)
    out = amplitude * np.cos(np.multiply.outer(x, k) * np.pi / L).sum(axis=-1)
    return float(out) if out.ndim == 0 else out


def averaging_matrix(n_nodes: int) -> np.ndarray:
    P = np.zeros((n_nodes - 1, n_nodes))
    idx = np.arange(n_nodes - 1)
    P[idx, idx] = 0.5
    P[idx, idx + 1] = 0.5
    return P


def difference_matrix(n_nodes: int, h: float) -> np.ndarray:
    D = np.zeros((n_nodes - 1, n_nodes))
    idx = np.arange(n_nodes - 1)
    D[idx, idx] = -1.0 / h
    D[idx, idx + 1] = 1.0 / h
    return D


@dataclass(frozen=True)
class SemiDiscreteSystem:
    """Second-order system ``Mh u'' + (Dh + Cv) u' + (Kh + Gh + Cp) u = 0``.

    ``Cp`` and ``Cv`` hold the output-injection terms: they are nonzero only in
    observer rows and error columns.
    """

    grid: Grid
    material: MaterialParams
    gains: GainSet
    Mh: np.ndarray
    Kh: np.ndarray
    Dh: np.ndarray
    Gh: np.ndarray
    Cp: np.ndarray
    Cv: np.ndarray
    ordering: tuple = FIELDS

    @property
    def n_nodes(self) -> int:
        return self.grid.n_nodes

    @property
    def size(self) -> int:
        return 4 * self.grid.n_nodes

    @property
    def stiffness(self) -> np.ndarray:
        return self.Kh + self.Gh + self.Cp

    @property
    def damping(self) -> np.ndarray:
        return self.Dh + self.Cv

    def block(self, name: str) -> slice:
        i = FIELDS.index(name)
        n = self.n_nodes
        return slice(i * n, (i + 1) * n)

    @property
    def observer(self) -> slice:
        return slice(0, 2 * self.n_nodes)

    @property
    def error(self) -> slice:
        return slice(2 * self.n_nodes, 4 * self.n_nodes)


def assemble(mat: MaterialParams, gains: GainSet, grid: Grid) -> SemiDiscreteSystem:
    cm = coupling_matrices(mat)
    K = gain_matrices(gains)
    n = grid.n_nodes
    h = grid.h
    P = averaging_matrix(n)
    D = difference_matrix(n, h)
    mass1 = P.T @ P
    stiff1 = D.T @ D
    I2 = np.eye(2)
    Mh = np.kron(I2, np.kron(cm.M, mass1))
    Kh = np.kron(I2, np.kron(cm.A, stiff1))

    left = np.zeros((n, n))
    left[0, 0] = 1.0 / h
    right = np.zeros((n, n))
    right[-1, -1] = 1.0 / h
    obs_gain = np.zeros((2, 2))
    obs_gain[0, 0] = 1.0
    err_gain = np.zeros((2, 2))
    err_gain[1, 1] = 1.0
    couple = np.zeros((2, 2))
    couple[0, 1] = 1.0

    # observer: -K57 u_t - K68 u at x=L ; error: K13 e_t + K24 e at x=0
    Dh = np.kron(obs_gain, np.kron(K.K57, right)) + np.kron(err_gain, np.kron(K.K13, left))
    Gh = np.kron(obs_gain, np.kron(K.K68, right)) + np.kron(err_gain, np.kron(K.K24, left))
    # observer row at x=0 is driven by the error injection K13 e_t + K24 e
    Cv = np.kron(couple, np.kron(K.K13, left))
    Cp = np.kron(couple, np.kron(K.K24, left))
    return SemiDiscreteSystem(grid=grid, material=mat, gains=gains, Mh=Mh, Kh=Kh, Dh=Dh, Gh=Gh, Cp=Cp, Cv=Cv)


@dataclass(frozen=True)
class FieldSnapshot:
    t: float
    x: np.ndarray
    hat_w: np.ndarray
    hat_p: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    hat_w_t: np.ndarray
    hat_p_t: np.ndarray
    e1_t: np.ndarray
    e2_t: np.ndarray

    def __post_init__(self):
        n = len(self.x)
        for name in FIELDS:
            if len(getattr(self, name)) != n or len(getattr(self, name + "_t")) != n:
                raise ValueError(f"field {name} does not match the {n} grid nodes")

    @classmethod
    def from_vectors(cls, t, x, u, v):
        n = len(x)
        parts = [u[i * n:(i + 1) * n] for i in range(4)]
        vparts = [v[i * n:(i + 1) * n] for i in range(4)]
        return cls(t, x, *parts, *vparts)

    def vectors(self):
        u = np.concatenate([self.hat_w, self.hat_p, self.e1, self.e2])
        v = np.concatenate([self.hat_w_t, self.hat_p_t, self.e1_t, self.e2_t])
        return u, v


@dataclass(frozen=True)
class PlantFields:
    w: np.ndarray
    p: np.ndarray
    w_t: np.ndarray
    p_t: np.ndarray


def reconstruct_plant(snap: FieldSnapshot) -> PlantFields:
    return PlantFields(
        w=snap.hat_w - snap.e1,
        p=snap.hat_p - snap.e2,
        w_t=snap.hat_w_t - snap.e1_t,
        p_t=snap.hat_p_t - snap.e2_t,
    )
