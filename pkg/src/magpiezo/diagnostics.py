"""Energies, Lyapunov functional, dissipation residuals, decay fits and bound checks."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from .discretization import FieldSnapshot, SemiDiscreteSystem
from .errors import NonPositiveEnergy, TraceTooShort
from .gains import EquivalenceConstants, GainSet, LyapunovParams
from .model import MaterialParams


@dataclass(frozen=True)
class EnergyParts:
    E_hat: float
    E_e: float

    @property
    def E_total(self) -> float:
        return self.E_hat + self.E_e


def discrete_energy(system: SemiDiscreteSystem, state) -> EnergyParts:
    """``h/2 (v.Mh.v + u.(Kh+Gh).u)`` split into observer and error blocks.

    Kinetic terms use cell-averaged velocities, potential terms the difference
    quotients, and boundary terms the gain-weighted squared end-node values.
    """
    h = system.grid.h
    K = system.Kh + system.Gh
    out = []
    for blk in (system.observer, system.error):
        u, v = state.u[blk], state.v[blk]
        out.append(0.5 * h * (v @ system.Mh[blk, blk] @ v + u @ K[blk, blk] @ u))
    return EnergyParts(E_hat=float(out[0]), E_e=float(out[1]))


def _grad(f, x):
    return np.gradient(f, x, edge_order=2)


def _quad_energy(mat, x, u1, u2, v1, v2):
    g1, g2 = _grad(u1, x), _grad(u2, x)
    gb = mat.gamma * mat.beta
    dens = (
        mat.rho * v1**2
        + mat.mu * v2**2
        + mat.alpha * g1**2
        - 2 * gb * g1 * g2
        + mat.beta * g2**2
    )
    return 0.5 * trapezoid(dens, x)


def continuum_energy(mat: MaterialParams, gains: GainSet, snap: FieldSnapshot) -> EnergyParts:
    """Trapezoidal quadrature of the observer and error energies on the snapshot nodes."""
    x = snap.x
    E_hat = _quad_energy(mat, x, snap.hat_w, snap.hat_p, snap.hat_w_t, snap.hat_p_t)
    E_hat += 0.5 * gains.k6 * snap.hat_w[-1] ** 2 + 0.5 * gains.k8 * snap.hat_p[-1] ** 2
    E_e = _quad_energy(mat, x, snap.e1, snap.e2, snap.e1_t, snap.e2_t)
    E_e += 0.5 * gains.k2 * snap.e1[0] ** 2 + 0.5 * gains.k4 * snap.e2[0] ** 2
    return EnergyParts(E_hat=float(E_hat), E_e=float(E_e))


@dataclass(frozen=True)
class LyapunovValue:
    E_hat: float
    E_e: float
    L_e: float
    L_hat: float
    L_total: float
    psi: dict

    @property
    def E_total(self) -> float:
        return self.E_hat + self.E_e


def psi_terms(mat: MaterialParams, gains: GainSet, snap: FieldSnapshot) -> dict:
    x, L = snap.x, mat.L
    a1 = mat.alpha1
    g = gains
    e1x, e2x = _grad(snap.e1, x), _grad(snap.e2, x)
    wx, px = _grad(snap.hat_w, x), _grad(snap.hat_p, x)
    wL, pL = snap.hat_w[-1], snap.hat_p[-1]
    e10, e20 = snap.e1[0], snap.e2[0]
    return {
        "psi11": mat.rho * trapezoid((x - L) * snap.e1_t * e1x, x),
        "psi12": mat.mu * trapezoid((x - L) * snap.e2_t * e2x, x),
        "psi21": mat.rho * e10 * trapezoid(snap.e1_t, x) + 0.5 * g.k1 * e10**2,
        "psi22": mat.mu * e20 * trapezoid(snap.e2_t, x) + 0.5 * g.k3 * e20**2,
        "psi31": mat.rho * trapezoid((x + 2 * L) * snap.hat_w_t * wx, x)
        - 3 * L / a1 * g.k5 * g.k6 * wL**2
        - 3 * L / a1 * mat.gamma**2 * g.k7 * g.k8 * pL**2,
        "psi32": mat.mu * trapezoid((x + 2 * L) * snap.hat_p_t * px, x)
        - 3 * L / (2 * mat.beta) * g.k7 * g.k8 * pL**2,
        "psi41": wL * trapezoid(snap.hat_w_t, x) + 0.5 * g.k5 * snap.hat_w_t[-1] ** 2,
        "psi42": pL * trapezoid(snap.hat_p_t, x) + 0.5 * g.k7 * snap.hat_p_t[-1] ** 2,
    }


def lyapunov_value(
    mat: MaterialParams, gains: GainSet, lyap: LyapunovParams, snap: FieldSnapshot
) -> LyapunovValue:
    en = continuum_energy(mat, gains, snap)
    psi = {k: float(v) for k, v in psi_terms(mat, gains, snap).items()}
    L_e = en.E_e + lyap.eps1 * (psi["psi11"] + psi["psi12"] + lyap.N1 * (psi["psi21"] + psi["psi22"]))
    L_hat = en.E_hat + lyap.eps2 * (psi["psi31"] + psi["psi32"] + lyap.N2 * (psi["psi41"] + psi["psi42"]))
    return LyapunovValue(
        E_hat=en.E_hat, E_e=en.E_e, L_e=L_e, L_hat=L_hat, L_total=lyap.Ce * L_e + L_hat, psi=psi
    )


# ---------------------------------------------------------------------------
# traces


@dataclass
class EnergyTrace:
    t: np.ndarray
    E_hat: np.ndarray
    E_e: np.ndarray
    L_value: np.ndarray = None
    bound_value: np.ndarray = None

    def __post_init__(self):
        self.t = np.asarray(self.t, float)
        self.E_hat = np.asarray(self.E_hat, float)
        self.E_e = np.asarray(self.E_e, float)
        n = len(self.t)
        self.L_value = np.full(n, np.nan) if self.L_value is None else np.asarray(self.L_value, float)
        self.bound_value = (
            np.full(n, np.nan) if self.bound_value is None else np.asarray(self.bound_value, float)
        )
        if n > 1 and np.any(np.diff(self.t) <= 0):
            raise ValueError("trace times must be strictly increasing")

    @property
    def E_total(self) -> np.ndarray:
        return self.E_hat + self.E_e

    def __len__(self):
        return len(self.t)


def energy_trace(traj, lyap: LyapunovParams | None = None, constants: EquivalenceConstants | None = None):
    system = traj.system
    parts = [discrete_energy(system, s) for s in traj]
    tr = EnergyTrace(
        t=[s.t for s in traj],
        E_hat=[p.E_hat for p in parts],
        E_e=[p.E_e for p in parts],
    )
    if lyap is not None:
        x = system.grid.nodes
        tr.L_value = np.array(
            [
                lyapunov_value(system.material, system.gains, lyap, FieldSnapshot.from_vectors(s.t, x, s.u, s.v)).L_total
                for s in traj
            ]
        )
    if constants is not None:
        tr.bound_value = constants.ratio * tr.E_total[0] * np.exp(-constants.omega * tr.t)
    return tr


def boundary_error_velocities(traj) -> np.ndarray:
    """(n, 2) array of effective |e1_t(0)|, |e2_t(0)| at each snapshot.

    Root mean square of the two adjacent midpoint velocities, i.e. the values
    entering the scheme's own dissipation balance.
    """
    s = traj.system
    i1, i2 = s.block("e1").start, s.block("e2").start
    return np.sqrt(np.array([[q[i1], q[i2]] for q in traj.vbar_sq]))


def dissipation_residual(trace: EnergyTrace, boundary_velocity, gains: GainSet) -> np.ndarray:
    """Central-difference ``dE_e/dt + k1 e1_t(0)^2 + k3 e2_t(0)^2`` at interior snapshots."""
    if len(trace) < 3:
        raise TraceTooShort(f"need at least 3 snapshots, got {len(trace)}")
    dts = np.diff(trace.t)
    if not np.allclose(dts, dts[0], rtol=1e-9, atol=0):
        raise ValueError("dissipation residual needs uniformly spaced snapshots")
    bv = np.asarray(boundary_velocity, float)
    dE = (trace.E_e[2:] - trace.E_e[:-2]) / (trace.t[2:] - trace.t[:-2])
    return dE + gains.k1 * bv[1:-1, 0] ** 2 + gains.k3 * bv[1:-1, 1] ** 2


@dataclass(frozen=True)
class DecayFit:
    sigma: float
    prefactor: float
    window: tuple
    residual: float


def decay_fit(trace: EnergyTrace, window=None) -> DecayFit:
    """Least-squares fit of ``ln E_total = ln C - sigma t`` over ``window`` (default ``[0.2 T, T]``)."""
    t = trace.t
    E = trace.E_total
    if window is None:
        window = (0.2 * t[-1], t[-1])
    lo, hi = window
    sel = (t >= lo - 1e-12) & (t <= hi + 1e-12)
    if sel.sum() < 2:
        raise ValueError(f"fit window {window} holds fewer than two samples")
    if np.any(E[sel] <= 0):
        raise NonPositiveEnergy("energy must be positive inside the fit window")
    slope, intercept = np.polyfit(t[sel], np.log(E[sel]), 1)
    pred = intercept + slope * t[sel]
    resid = float(np.sqrt(np.mean((np.log(E[sel]) - pred) ** 2)))
    return DecayFit(sigma=float(-slope), prefactor=float(np.exp(intercept)), window=(lo, hi), residual=resid)


@dataclass(frozen=True)
class BoundCheck:
    holds: bool
    worst_margin: float


def bound_check(trace: EnergyTrace, constants: EquivalenceConstants) -> BoundCheck:
    """``E(t) <= (p2/p1) E(0) exp(-omega t)`` at every snapshot of the trace."""
    t = trace.t
    E = trace.E_total
    bound = constants.ratio * E[0] * np.exp(-constants.omega * (t - t[0]))
    margin = (bound - E) / bound
    return BoundCheck(holds=bool(np.all(E <= bound)), worst_margin=float(margin.min()))


@dataclass(frozen=True)
class SandwichCheck:
    holds: bool
    worst_lower: float
    worst_upper: float


def sandwich_check(values, constants: EquivalenceConstants) -> SandwichCheck:
    """``p1 E <= L <= p2 E`` for a sequence of :class:`LyapunovValue`."""
    lower = np.array([v.L_total - constants.p1 * v.E_total for v in values])
    upper = np.array([constants.p2 * v.E_total - v.L_total for v in values])
    scale = np.array([max(v.E_total, np.finfo(float).tiny) for v in values])
    return SandwichCheck(
        holds=bool(np.all(lower >= 0) and np.all(upper >= 0)),
        worst_lower=float((lower / scale).min()),
        worst_upper=float((upper / scale).min()),
    )
