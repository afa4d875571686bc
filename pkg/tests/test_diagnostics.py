import math

import numpy as np
import pytest

from magpiezo.diagnostics import (
    EnergyTrace, bound_check, continuum_energy, decay_fit, discrete_energy, dissipation_residual,
    energy_trace, lyapunov_value, psi_terms,
)
from magpiezo.discretization import FieldSnapshot, assemble, build_grid
from magpiezo.errors import NonPositiveEnergy, TraceTooShort
from magpiezo.gains import EquivalenceConstants, GainSet, LyapunovParams
from magpiezo.integrator import InitialCondition, SimState, StepperConfig, default_dt, simulate


def _snapshot(x, **fields):
    z = np.zeros_like(x)
    names = ["hat_w", "hat_p", "e1", "e2", "hat_w_t", "hat_p_t", "e1_t", "e2_t"]
    return FieldSnapshot(0.0, x, *(fields.get(k, z) for k in names))


def test_discrete_energy_zero_state(mat, gains, grid30):
    s = assemble(mat, gains, grid30)
    e = discrete_energy(s, SimState(0.0, np.zeros(s.size), np.zeros(s.size)))
    assert e.E_hat == e.E_e == e.E_total == 0.0


def test_discrete_energy_split(mat, gains, grid30):
    s = assemble(mat, gains, grid30)
    rng = np.random.default_rng(0)
    e = discrete_energy(s, SimState(0.0, rng.standard_normal(s.size), rng.standard_normal(s.size)))
    assert e.E_total == e.E_hat + e.E_e


def _exact_energy(mat):
    # hat_w = cos(pi x), hat_w_t = cos(pi x), e2 = x^2, zero gains
    rho, alpha, beta = mat.rho, mat.alpha, mat.beta
    E_hat = 0.5 * (rho * 0.5 + alpha * math.pi**2 * 0.5)
    E_e = 0.5 * beta * 4 / 3
    return E_hat, E_e


def test_discrete_energy_second_order(mat):
    g = GainSet()
    errs = []
    for N in (30, 61):
        grid = build_grid(1.0, N)
        x = grid.nodes
        s = assemble(mat, g, grid)
        c = np.cos(np.pi * x)
        u = np.concatenate([c, 0 * x, 0 * x, x**2])
        v = np.concatenate([c, 0 * x, 0 * x, 0 * x])
        e = discrete_energy(s, SimState(0.0, u, v))
        ex = _exact_energy(mat)
        errs.append(max(abs(e.E_hat - ex[0]), abs(e.E_e - ex[1])))
    assert math.log2(errs[0] / errs[1]) > 1.8


def test_continuum_energy_linear_field(mat):
    x = np.linspace(0, 1, 21)
    e = continuum_energy(mat, GainSet(), _snapshot(x, hat_w=x))
    assert e.E_hat == pytest.approx(0.5, rel=1e-13)
    assert e.E_e == 0.0


def test_continuum_energy_zero_and_constant(mat, gains):
    x = np.linspace(0, 1, 21)
    assert continuum_energy(mat, gains, _snapshot(x)).E_hat == 0.0
    assert continuum_energy(mat, GainSet(), _snapshot(x, hat_w=0 * x + 3.0)).E_hat <= 1e-25


def test_continuum_boundary_terms(mat):
    x = np.linspace(0, 1, 21)
    g = GainSet(k2=2.0, k4=4.0, k6=6.0, k8=8.0)
    c = 0 * x + 1.0
    e = continuum_energy(mat, g, _snapshot(x, hat_w=c, hat_p=c, e1=c, e2=c))
    assert e.E_hat == pytest.approx(0.5 * (6 + 8))
    assert e.E_e == pytest.approx(0.5 * (2 + 4))


LYAP = LyapunovParams(Ce=3.0, eps1=1e-3, eps2=2e-3, delta1=1e-4, delta2=1e-5, N1=2.0, N2=5.0)


def test_lyapunov_zero_snapshot(mat, gains):
    x = np.linspace(0, 1, 21)
    lv = lyapunov_value(mat, gains, LYAP, _snapshot(x))
    assert lv.L_total == 0.0 and all(v == 0.0 for v in lv.psi.values())
    assert sorted(lv.psi) == sorted(f"psi{i}{j}" for i in range(1, 5) for j in (1, 2))


def test_psi_vanish_without_velocity(mat, gains):
    x = np.linspace(0, 1, 21)
    f = np.sin(np.pi * x)  # zero at both ends
    psi = psi_terms(mat, gains, _snapshot(x, e1=f, e2=f, hat_w=f, hat_p=f))
    assert psi["psi11"] == 0.0 and psi["psi12"] == 0.0


def test_lyapunov_recomposition(mat, gains):
    rng = np.random.default_rng(5)
    x = np.linspace(0, 1, 33)
    snap = FieldSnapshot.from_vectors(0.0, x, rng.standard_normal(4 * 33), rng.standard_normal(4 * 33))
    lv = lyapunov_value(mat, gains, LYAP, snap)
    p = lv.psi
    L_e = lv.E_e + LYAP.eps1 * (p["psi11"] + p["psi12"] + LYAP.N1 * (p["psi21"] + p["psi22"]))
    L_hat = lv.E_hat + LYAP.eps2 * (p["psi31"] + p["psi32"] + LYAP.N2 * (p["psi41"] + p["psi42"]))
    assert lv.L_e == pytest.approx(L_e, rel=1e-15)
    assert lv.L_total == pytest.approx(LYAP.Ce * L_e + L_hat, rel=1e-14)


def test_psi11_quadrature(mat, gains):
    # psi11 = rho * int (x - L) e1_t e1_x dx with e1 = x, e1_t = 1  ->  -rho/2
    x = np.linspace(0, 1, 41)
    psi = psi_terms(mat, gains, _snapshot(x, e1=x, e1_t=0 * x + 1))
    assert psi["psi11"] == pytest.approx(-0.5 * mat.rho, rel=1e-12)


def test_dissipation_residual_zero_error(mat, gains, grid30):
    traj = simulate(mat, gains, grid30, InitialCondition(), StepperConfig(default_dt(grid30), 100 * default_dt(grid30)))
    tr = energy_trace(traj)
    from magpiezo.diagnostics import boundary_error_velocities
    r = dissipation_residual(tr, boundary_error_velocities(traj), gains)
    assert not r.any()


def test_dissipation_residual_constant_segment(gains):
    tr = EnergyTrace(t=[0, 1, 2, 3], E_hat=[1, 1, 1, 1], E_e=[2.0, 2.0, 2.0, 2.0])
    r = dissipation_residual(tr, np.zeros((4, 2)), gains)
    assert np.abs(r).max() <= 1e-10


def test_dissipation_residual_short(gains):
    tr = EnergyTrace(t=[0, 1], E_hat=[1, 1], E_e=[1, 1])
    with pytest.raises(TraceTooShort):
        dissipation_residual(tr, np.zeros((2, 2)), gains)


def test_dissipation_residual_nonuniform(gains):
    tr = EnergyTrace(t=[0, 1, 3], E_hat=[1, 1, 1], E_e=[1, 1, 1])
    with pytest.raises(ValueError):
        dissipation_residual(tr, np.zeros((3, 2)), gains)


def test_trace_time_order():
    with pytest.raises(ValueError):
        EnergyTrace(t=[0, 0], E_hat=[1, 1], E_e=[0, 0])


def test_decay_fit_exact():
    t = np.linspace(0, 5, 51)
    tr = EnergyTrace(t=t, E_hat=3 * np.exp(-2 * t), E_e=0 * t)
    fit = decay_fit(tr)
    assert fit.sigma == pytest.approx(2.0, abs=1e-9)
    assert fit.prefactor == pytest.approx(3.0, rel=1e-9)
    assert fit.window == (1.0, 5.0)


def test_decay_fit_constant_and_nonpositive():
    t = np.linspace(0, 5, 51)
    assert decay_fit(EnergyTrace(t=t, E_hat=0 * t + 2, E_e=0 * t)).sigma == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(NonPositiveEnergy):
        decay_fit(EnergyTrace(t=t, E_hat=0 * t, E_e=0 * t))


def test_bound_check_trivial_and_violated():
    t = np.linspace(0, 1, 11)
    E = np.exp(-t)
    unit = EquivalenceConstants(C1=1, C2=1, p1=1.0, p2=1.0, omega=0.0)
    assert bound_check(EnergyTrace(t=t, E_hat=E, E_e=0 * t), unit).holds
    c = EquivalenceConstants(C1=1, C2=1, p1=1.0, p2=2.0, omega=0.5)
    E = 2.0 * np.exp(-0.5 * t) * 0.9
    E[0] = 1.0
    E[5] = 2.0 * np.exp(-0.5 * t[5]) * 1.01  # above ratio * E0 * exp(-omega t)
    res = bound_check(EnergyTrace(t=t, E_hat=E, E_e=0 * t), c)
    assert not res.holds and res.worst_margin < 0
