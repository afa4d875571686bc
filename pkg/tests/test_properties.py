import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from magpiezo.config_io import format_config, parse_config
from magpiezo.discretization import assemble, build_grid
from magpiezo.errors import EquivalenceViolated
from magpiezo.gains import GainSet, LyapunovParams, c1_constant, c2_constant, equivalence_constants
from magpiezo.integrator import InitialCondition, StepperConfig, simulate
from magpiezo.diagnostics import energy_trace
from magpiezo.model import coupling_matrices, validate_material

pos = st.floats(min_value=1e-3, max_value=1e3)
gain = st.floats(min_value=1e-8, max_value=1e2)


@st.composite
def materials(draw):
    beta = draw(pos)
    gamma = draw(st.floats(min_value=-10, max_value=10))
    alpha = gamma**2 * beta * draw(st.floats(min_value=1.01, max_value=100)) + draw(st.floats(0, 1))
    assume(alpha > 0)
    return validate_material(dict(rho=draw(pos), mu=draw(pos), alpha=alpha, beta=beta, gamma=gamma,
                                  L=draw(st.floats(0.1, 1.9))))


@st.composite
def gainsets(draw):
    return GainSet(*(draw(gain) for _ in range(8)))


@given(materials())
def test_coupling_definite(mat):
    A = coupling_matrices(mat).A
    assert np.linalg.det(A) == pytest.approx(mat.beta * mat.alpha1, rel=1e-6, abs=1e-12 * mat.alpha * mat.beta)
    assert np.linalg.eigvalsh(A).min() > 0


def _short_run(g, mismatch):
    mat = validate_material(dict(rho=1.0, mu=0.1, alpha=1.0, beta=3.0, gamma=0.01, L=1.0))
    grid = build_grid(1.0, 8)
    dt = grid.h / 10
    traj = simulate(mat, g, grid, InitialCondition(amplitude=1e-3, kmin=1, kmax=4, mismatch=mismatch),
                    StepperConfig(dt=dt, T=40 * dt, stride=1))
    return energy_trace(traj)


@settings(max_examples=25, deadline=None)
@given(gainsets(), st.floats(0.0, 1.0))
def test_error_energy_nonincreasing(g, mismatch):
    # the error system is autonomous and dissipative for any nonnegative gains
    tr = _short_run(g, mismatch)
    assume(tr.E_e[0] > 0)
    assert np.all(np.diff(tr.E_e) <= 1e-10 * tr.E_e[0])


@settings(max_examples=25, deadline=None)
@given(gainsets())
def test_total_energy_nonincreasing_without_error(g):
    E = _short_run(g, 0.0).E_total
    assert np.all(np.diff(E) <= 1e-10 * E[0])


@given(gainsets())
def test_error_damping_positive_semidefinite(g):
    mat = validate_material(dict(rho=1.0, mu=0.1, alpha=1.0, beta=3.0, gamma=0.01, L=1.0))
    s = assemble(mat, g, build_grid(1.0, 6))
    e = np.r_[s.block("e1"), s.block("e2")]
    C = s.damping[np.ix_(e, e)]
    S = 0.5 * (C + C.T)
    assert np.linalg.eigvalsh(S).min() >= -1e-12 * max(1.0, np.abs(S).max())


lyaps = st.builds(
    LyapunovParams,
    Ce=st.floats(1e-3, 1e12), eps1=st.floats(1e-12, 1e-1), eps2=st.floats(1e-12, 1e-1),
    delta1=st.floats(1e-6, 1.0), delta2=st.floats(1e-6, 1.0), N1=st.floats(1e-3, 1e3), N2=st.floats(1e-3, 1e3),
)


@given(materials(), gainsets(), lyaps)
def test_equivalence_ordering(mat, g, lyap):
    try:
        c = equivalence_constants(mat, g, lyap)
    except EquivalenceViolated:
        assert lyap.eps1 * c1_constant(mat, g, lyap.N1) >= 1 or lyap.eps2 * c2_constant(mat, g, lyap.N2) >= 1
        return
    assert 0 < c.p1 <= c.p2
    assert c.ratio >= 1
    assert c.omega > 0


@given(materials(), gainsets(), lyaps, st.floats(1.0, 10.0))
def test_omega_monotone_in_eps1(mat, g, lyap, factor):
    small = lyap
    big = LyapunovParams(**{**lyap.__dict__, "eps1": lyap.eps1 * factor})
    try:
        a = equivalence_constants(mat, g, small)
        b = equivalence_constants(mat, g, big)
    except EquivalenceViolated:
        return
    assert b.omega >= a.omega * (1 - 1e-12)


finite = st.floats(allow_nan=False, allow_infinity=False, min_value=1e-300, max_value=1e300)


@given(
    st.floats(1e-3, 1e3), st.integers(2, 500), st.floats(1e-3, 100), st.integers(1, 50),
    st.lists(st.floats(0, 1e6), min_size=8, max_size=8), st.integers(1, 10), st.integers(0, 20),
    st.floats(0, 1), st.booleans(),
)
def test_config_round_trip(rho, N, T, stride, ks, kmin, extra, mismatch, with_dt):
    lines = [f"material.rho = {rho!r}", "material.mu = 0.1", "material.alpha = 1.0", "material.beta = 3.0",
             "material.gamma = 0.01", f"grid.N = {N}", f"time.T = {T!r}", f"time.snapshot_stride = {stride}",
             f"ic.kmin = {kmin}", f"ic.kmax = {kmin + extra}", f"observer.mismatch_scale = {mismatch!r}"]
    lines += [f"gains.k{i + 1} = {k!r}" for i, k in enumerate(ks)]
    if with_dt:
        lines.append(f"time.dt = {T / 7!r}")
    cfg = parse_config("\n".join(lines))
    assert parse_config(format_config(cfg)) == cfg
    assert format_config(parse_config(format_config(cfg))) == format_config(cfg)
