"""Material constants of the magnetizable piezoelectric beam and its 2x2 coupling matrices."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import IndefiniteCoupling, NonPositiveParameter


@dataclass(frozen=True)
class MaterialParams:
    """Physical constants in SI units.

    ``alpha`` is the piezoelectrically stiffened modulus; the purely elastic
    modulus ``alpha1 = alpha - gamma**2 * beta`` is derived.
    """

    rho: float
    mu: float
    alpha: float
    beta: float
    gamma: float
    L: float

    @property
    def alpha1(self) -> float:
        return self.alpha - self.gamma**2 * self.beta


@dataclass(frozen=True)
class CouplingMatrices:
    M: np.ndarray
    A: np.ndarray


PAPER_MATERIAL = dict(rho=1.0, mu=0.1, alpha=1.0, beta=3.0, gamma=0.01, L=1.0)


def validate_material(raw) -> MaterialParams:
    """Build a :class:`MaterialParams` from a mapping, checking positivity and definiteness."""
    vals = {}
    for key in ("rho", "mu", "alpha", "beta", "gamma", "L"):
        try:
            v = float(raw[key])
        except KeyError:
            raise NonPositiveParameter(f"missing material constant {key!r}") from None
        if not math.isfinite(v):
            raise NonPositiveParameter(f"{key} must be finite, got {v!r}")
        vals[key] = v
    for key in ("rho", "mu", "beta", "L"):
        if vals[key] <= 0:
            raise NonPositiveParameter(f"{key} must be > 0, got {vals[key]!r}")
    params = MaterialParams(**vals)
    if params.alpha1 <= 0:
        raise IndefiniteCoupling(
            f"alpha={params.alpha!r} must exceed gamma^2*beta={vals['gamma'] ** 2 * vals['beta']!r}"
        )
    return params


def coupling_matrices(params: MaterialParams) -> CouplingMatrices:
    gb = params.gamma * params.beta
    M = np.diag([params.rho, params.mu])
    A = np.array([[params.alpha, -gb], [-gb, params.beta]])
    return CouplingMatrices(M=M, A=A)
