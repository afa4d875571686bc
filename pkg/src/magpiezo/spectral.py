"""Closed-loop spectrum of the semi-discrete system.

The averaged mass ``Mh`` is singular: each field's alternating node pattern
has zero cell averages.  The plain first-order form ``E x' = A x`` (with
``E = diag(I, Mh)``) is therefore a descriptor system.  Its massless
directions carry very stiff modes of size ``~ stiffness / damping``, whose
values an unstructured QZ cannot resolve once the damping is tiny.

For eigenvalues we instead split ``u = Q y + Z z`` with ``Z`` spanning
``ker(Mh)`` and keep only ``y'`` as a velocity state, so the zero mass block is
exact::

    [I  0      0    ] [y]'   [ 0      I      0    ] [y]
    [0  QMQ    QCZ  ] [w]  = [-QKQ   -QCQ   -QKZ  ] [w]
    [0  0      ZCZ  ] [z]    [-ZKQ   -ZCQ   -ZKZ  ] [z]

which has ``4 - rank(Z^T C Z)`` infinite eigenvalues and no others.

Rigid motions (displacements annihilated by both stiffness and damping) give
defective zero eigenvalues whose round-off splitting would dominate the
abscissa of a conservative system; they are deflated exactly and reported as
zeros.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .discretization import SemiDiscreteSystem
from .errors import EigenFailure, SolveFailure


@dataclass(frozen=True)
class FirstOrderPencil:
    """Second-order data ``M u'' + C u' + K u = 0`` with its first-order pencil."""

    M: np.ndarray
    C: np.ndarray
    K: np.ndarray
    Z: np.ndarray  # orthonormal basis of ker(M)

    @property
    def A(self) -> np.ndarray:
        n = self.M.shape[0]
        return np.block([[np.zeros((n, n)), np.eye(n)], [-self.K, -self.C]])

    @property
    def E(self) -> np.ndarray:
        n = self.M.shape[0]
        return np.block([[np.eye(n), np.zeros((n, n))], [np.zeros((n, n)), self.M]])

    @property
    def shape(self):
        n = 2 * self.M.shape[0]
        return (n, n)

    @property
    def n_infinite(self) -> int:
        """Infinite eigenvalues of the reduced pencil."""
        k = self.Z.shape[1]
        return k - _column_scaled_rank(self.Z.T @ self.C @ self.Z) if k else 0

    def explicit(self) -> np.ndarray:
        """``E^{-1} A``; only defined when the mass block is invertible."""
        if self.Z.shape[1]:
            raise SolveFailure("mass matrix is singular; use the pencil form")
        return self.A if self.M.size == 0 else np.block(
            [[np.zeros_like(self.M), np.eye(len(self.M))],
             [-np.linalg.solve(self.M, self.K), -np.linalg.solve(self.M, self.C)]]
        )


@dataclass(frozen=True)
class SpectrumReport:
    eigenvalues: np.ndarray
    abscissa: float
    n_infinite: int
    N: int | None = None
    gains: tuple | None = None


def mass_kernel(system: SemiDiscreteSystem) -> np.ndarray:
    n = system.n_nodes
    s = (-1.0) ** np.arange(n) / np.sqrt(n)
    Z = np.zeros((system.size, 4))
    for b in range(4):
        Z[b * n:(b + 1) * n, b] = s
    return Z


def _column_scaled_rank(Mx):
    if Mx.size == 0:
        return 0
    scale = np.abs(Mx).max(axis=0)
    scale[scale == 0] = 1.0
    return int(np.linalg.matrix_rank(Mx / scale))


def first_order_matrix(system: SemiDiscreteSystem) -> FirstOrderPencil:
    return FirstOrderPencil(M=system.Mh, C=system.damping, K=system.stiffness, Z=mass_kernel(system))


def _reduced_pencil(p: FirstOrderPencil):
    M, C, K, Z = p.M, p.C, p.K, p.Z
    n, k = M.shape[0], Z.shape[1]
    Q = sla.null_space(Z.T) if k else np.eye(n)
    m = Q.shape[1]
    A = np.zeros((2 * m + k, 2 * m + k))
    E = np.zeros_like(A)
    y, w, z = slice(0, m), slice(m, 2 * m), slice(2 * m, 2 * m + k)
    E[y, y] = np.eye(m)
    E[w, w] = Q.T @ M @ Q
    E[w, z] = Q.T @ C @ Z
    E[z, z] = Z.T @ C @ Z
    A[y, w] = np.eye(m)
    A[w, y] = -Q.T @ K @ Q
    A[w, w] = -Q.T @ C @ Q
    A[w, z] = -Q.T @ K @ Z
    A[z, y] = -Z.T @ K @ Q
    A[z, w] = -Z.T @ C @ Q
    A[z, z] = -Z.T @ K @ Z
    # rigid motions: K R = C R = 0 gives the chain A X1 = 0, A X2 = E X1
    R = sla.null_space(np.vstack([K, C]))
    r = R.shape[1]
    if r == 0:
        return A, E, 0
    X = np.zeros((2 * m + k, 2 * r))
    X[y, :r] = Q.T @ R
    X[z, :r] = Z.T @ R
    X[w, r:] = Q.T @ R
    Qs = sla.null_space(sla.orth(X).T)
    Qe = sla.null_space(sla.orth(E @ X).T)
    return Qe.T @ A @ Qs, Qe.T @ E @ Qs, 2 * r


def spectral_abscissa(matrix, N=None, gains=None) -> SpectrumReport:
    """Eigenvalues and maximal real part of a square matrix or a :class:`FirstOrderPencil`."""
    try:
        if isinstance(matrix, FirstOrderPencil):
            A, E, n_zero = _reduced_pencil(matrix)
            n_inf = matrix.n_infinite
            alpha, beta = sla.eig(A, E, right=False, homogeneous_eigvals=True)
            order = np.argsort(np.abs(beta) / (np.abs(alpha) + np.abs(beta)))
            finite = order[n_inf:]
            lam = np.concatenate([alpha[finite] / beta[finite], np.zeros(n_zero, complex)])
        else:
            M = np.asarray(matrix, dtype=float)
            if M.ndim != 2 or M.shape[0] != M.shape[1] or not np.all(np.isfinite(M)):
                raise ValueError("spectral_abscissa needs a finite square matrix")
            lam = np.linalg.eigvals(M)
            n_inf = 0
    except (np.linalg.LinAlgError, sla.LinAlgError) as exc:
        raise EigenFailure(f"eigenvalue iteration failed: {exc}") from exc
    if not np.all(np.isfinite(lam)):
        raise EigenFailure("non-finite eigenvalues among the finite part", partial=lam)
    lam = lam[np.lexsort((lam.imag, -lam.real))]
    return SpectrumReport(eigenvalues=lam, abscissa=float(lam.real.max()), n_infinite=n_inf, N=N, gains=gains)


def system_spectrum(system: SemiDiscreteSystem) -> SpectrumReport:
    return spectral_abscissa(
        first_order_matrix(system), N=system.grid.N, gains=system.gains.as_tuple()
    )
