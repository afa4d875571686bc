"""Feedback gains, Lyapunov certificate parameters and the constants derived from them.

The certificate inequalities are evaluated exactly as written for the
observer/error Lyapunov functional, including the sign-indefinite terms under
absolute values.  Infeasibility is reported, never thrown, by
:func:`check_lemma4`; :func:`search_certificate` looks for the feasible
parameter tuple with the largest provable decay rate.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import astuple, dataclass, fields

import numpy as np

from .errors import EquivalenceViolated, Infeasible, NegativeGain, NonPositiveParameter
from .model import MaterialParams

DEFAULT_BUDGET = 20000


@dataclass(frozen=True)
class GainSet:
    k1: float = 0.0
    k2: float = 0.0
    k3: float = 0.0
    k4: float = 0.0
    k5: float = 0.0
    k6: float = 0.0
    k7: float = 0.0
    k8: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not math.isfinite(v):
                raise NegativeGain(f"{f.name} must be finite, got {v!r}")
            if v < 0:
                raise NegativeGain(f"{f.name} must be >= 0, got {v!r}")

    def as_tuple(self):
        return astuple(self)

    @property
    def all_positive(self) -> bool:
        return all(k > 0 for k in astuple(self))


PAPER_GAINS = GainSet(k1=1e-7, k2=1e-8, k3=1e-7, k4=3e-6, k5=60.0, k6=2e-2, k7=10.0, k8=4e-2)


@dataclass(frozen=True)
class GainMatrices:
    K13: np.ndarray
    K24: np.ndarray
    K57: np.ndarray
    K68: np.ndarray


def gain_matrices(gains: GainSet) -> GainMatrices:
    g = gains
    return GainMatrices(
        K13=np.diag([g.k1, g.k3]),
        K24=np.diag([g.k2, g.k4]),
        K57=np.diag([g.k5, g.k7]),
        K68=np.diag([g.k6, g.k8]),
    )


@dataclass(frozen=True)
class LyapunovParams:
    Ce: float
    eps1: float
    eps2: float
    delta1: float
    delta2: float
    N1: float
    N2: float


@dataclass(frozen=True)
class EquivalenceConstants:
    C1: float
    C2: float
    p1: float
    p2: float
    omega: float

    @property
    def ratio(self) -> float:
        return self.p2 / self.p1


def _require_positive_gains(gains: GainSet):
    if not gains.all_positive:
        raise NonPositiveParameter("certification needs every gain k1..k8 strictly positive")


def _speed_terms(mat: MaterialParams):
    a1 = mat.alpha1
    cross = math.sqrt(mat.mu * mat.gamma**2 / a1)
    return math.sqrt(mat.rho / a1) + cross, math.sqrt(mat.mu / mat.beta) + cross


def c1_constant(mat: MaterialParams, gains: GainSet, N1: float, printed: bool = False) -> float:
    """Equivalence constant of the error functional.

    With ``printed=True`` the gain quotients use unit numerators ``(1+k1)/k2``
    instead of ``(rho+k1)/k2``.
    """
    s1, s2 = _speed_terms(mat)
    if printed:
        q = max((1 + gains.k1) / gains.k2, (1 + gains.k3) / gains.k4, mat.L)
    else:
        q = max((mat.rho + gains.k1) / gains.k2, (mat.mu + gains.k3) / gains.k4, mat.L)
    return mat.L * max(s1, s2) + N1 * q


def c2_constant(mat: MaterialParams, gains: GainSet, N2: float, printed: bool = False) -> float:
    """Equivalence constant of the observer functional (see :func:`c1_constant`)."""
    s1, s2 = _speed_terms(mat)
    a1 = mat.alpha1
    base = 3 * mat.L * max(s1, s2, 2 * mat.gamma**2 / a1 + 1 / mat.beta, 2 / a1)
    if printed:
        q = max((1 / mat.rho + gains.k5) / gains.k6, (1 / mat.mu + gains.k7) / gains.k8, mat.L)
    else:
        q = max((mat.rho + gains.k5) / gains.k6, (mat.mu + gains.k7) / gains.k8, mat.L)
    return base + N2 * q


def equivalence_constants(
    mat: MaterialParams, gains: GainSet, lyap: LyapunovParams, printed: bool = False
) -> EquivalenceConstants:
    _require_positive_gains(gains)
    C1 = c1_constant(mat, gains, lyap.N1, printed)
    C2 = c2_constant(mat, gains, lyap.N2, printed)
    if lyap.eps1 * C1 >= 1 or lyap.eps2 * C2 >= 1:
        raise EquivalenceViolated(
            f"need eps1*C1 < 1 and eps2*C2 < 1, got {lyap.eps1 * C1:.6g} and {lyap.eps2 * C2:.6g}"
        )
    p1 = min(lyap.Ce * (1 - lyap.eps1 * C1), 1 - lyap.eps2 * C2)
    p2 = max(lyap.Ce * (1 + lyap.eps1 * C1), 1 + lyap.eps2 * C2)
    omega = min(
        lyap.eps1 * (1 - mat.L / 2) / (1 + C1 * lyap.eps1),
        (2 * lyap.eps2 / 3) / (1 + C2 * lyap.eps2),
    )
    return EquivalenceConstants(C1=C1, C2=C2, p1=p1, p2=p2, omega=omega)


# ---------------------------------------------------------------------------
# certificate inequalities


@dataclass(frozen=True)
class Condition:
    name: str
    lhs: float
    relation: str  # "<" or ">"
    rhs: float
    margin: float

    @property
    def satisfied(self) -> bool:
        return bool(self.margin > 0)


@dataclass(frozen=True)
class ConditionReport:
    conditions: tuple

    @property
    def feasible(self) -> bool:
        return all(c.satisfied for c in self.conditions)

    def __getitem__(self, name):
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)

    def format_table(self) -> str:
        lines = [f"{'condition':<12} {'lhs':>14}   {'rhs':>14} {'margin':>14}  ok"]
        for c in self.conditions:
            lines.append(
                f"{c.name:<12} {c.lhs:>14.6e} {c.relation} {c.rhs:>14.6e} {c.margin:>14.6e}  "
                f"{'yes' if c.satisfied else 'NO'}"
            )
        lines.append(f"feasible: {'yes' if self.feasible else 'no'}")
        return "\n".join(lines)


def _less(name, lhs, rhs):
    return Condition(name, float(lhs), "<", float(rhs), float(rhs - lhs))


def _greater(name, lhs, rhs):
    return Condition(name, float(lhs), ">", float(rhs), float(lhs - rhs))


def _bound(num, den):
    """num/den for a lower bound; a non-positive denominator makes the bound unattainable."""
    if not den > 0:
        return math.inf
    return num / den


def _safe_div(a, b):
    return a / b if b != 0 else math.inf


def lemma4_thresholds(mat: MaterialParams, gains: GainSet, lyap: LyapunovParams) -> dict:
    """Right-hand sides of all certificate inequalities for the given parameters."""
    rho, mu, alpha, beta, gamma, L = mat.rho, mat.mu, mat.alpha, mat.beta, mat.gamma, mat.L
    a1 = mat.alpha1
    k1, k2, k3, k4, k5, k6, k7, k8 = gains.as_tuple()
    e1, e2, N1, N2 = lyap.eps1, lyap.eps2, lyap.N1, lyap.N2

    abs1 = abs(_safe_div(1, lyap.delta1) + e2 * N2**2 + gamma**2 * e2 / a1 - 2 * e2 / a1)
    abs2 = abs(_safe_div(1, lyap.delta2) + e2 * N2**2 + 2 * e2 * gamma**2 / a1 - 2 * e2 / beta)
    ce_terms = (
        _bound(k1**2 * abs1, k1 - e1 * ((rho / 2 + 2 * k1**2 / a1) * L + N1**2 * rho)),
        _bound(k2**2 * abs1, e1 * (N1 * k2 - (k2 / 2 + L * k2**2 / a1))),
        _bound(k3**2 * abs2, k3 - e1 * ((mu / 2 + alpha / (a1 * beta) * k3**2) * L + mu * N1**2)),
        _bound(k4**2 * abs2, e1 * (N1 * k4 - (k4 / 2 + alpha * L / (a1 * beta) * k4**2))),
    )
    eps1_max = min(
        _safe_div(k1, (rho / 2 + 2 * k1**2 / a1) * L + rho * N1**2),
        _safe_div(k3, (mu / 2 + (a1 + 2 * gamma**2 * beta) / (a1 * beta) * k3**2) * L + mu * N1**2),
    )
    lead = _safe_div(2, 3 * k7)
    eps2_max = min(
        lead / (L * (rho * (1 + N1**2) + 2 * k5**2 / a1)),
        lead / (L * (mu * (1 + N2**2) + (2 * gamma**2 / a1 + 1 / beta) * k7**2)),
    )
    N1_min = 0.5 + L * max(k2 / a1, alpha * k4 / (a1 * beta))
    N2_min = 0.5 + max(
        _safe_div(1, 2 * k6) + 3 * L * k6 / a1,
        _safe_div(1, 2 * k8) + 3 * L * (alpha + gamma**2 * beta) * k8 / (2 * a1 * beta),
    )
    return dict(
        Ce_min=max(ce_terms),
        delta1_max=2 * e2 * rho,
        delta2_max=2 * e2 * mu,
        eps1_max=eps1_max,
        eps2_max=eps2_max,
        N1_min=N1_min,
        N2_min=N2_min,
    )


def check_lemma4(mat: MaterialParams, gains: GainSet, lyap: LyapunovParams) -> ConditionReport:
    with np.errstate(all="ignore"):
        th = lemma4_thresholds(mat, gains, lyap)
    positive = min(astuple(lyap))
    conds = (
        _greater("params>0", positive, 0.0),
        _less("L<2", mat.L, 2.0),
        _less("delta1", lyap.delta1, th["delta1_max"]),
        _less("delta2", lyap.delta2, th["delta2_max"]),
        _greater("Ce", lyap.Ce, th["Ce_min"]),
        _less("eps1", lyap.eps1, th["eps1_max"]),
        _less("eps2", lyap.eps2, th["eps2_max"]),
        _greater("N1", lyap.N1, th["N1_min"]),
        _greater("N2", lyap.N2, th["N2_min"]),
    )
    return ConditionReport(conds)


# ---------------------------------------------------------------------------
# certificate search


@dataclass(frozen=True)
class Certificate:
    params: LyapunovParams
    constants: EquivalenceConstants
    report: ConditionReport
    evaluated: int


def _axis_levels(n, per_decade):
    strides = []
    s = per_decade
    while s >= 1:
        strides.append(s)
        s //= 2
    if strides[-1] != 1:
        strides.append(1)

    def level(k):
        for i, st in enumerate(strides):
            if k % st == 0:
                return i
        return len(strides)

    return [level(k) for k in range(n)], len(strides)


def _candidate_indices(decades, per_decade):
    """Grid index tuples ordered coarse-to-fine; any prefix is a deterministic sub-search."""
    n = decades * per_decade + 1
    levels, nlev = _axis_levels(n, per_decade)
    # axes: N1 offset, N2 offset (index 0 allowed), eps1 fraction, eps2 fraction (index 0 excluded)
    for lev in range(nlev):
        off = [k for k in range(n) if levels[k] <= lev]
        frac = [k for k in off if k > 0]
        for tup in itertools.product(off, off, frac, frac):
            if max(levels[k] for k in tup) == lev:
                yield tup


def search_certificate(
    mat: MaterialParams,
    gains: GainSet,
    budget: int = DEFAULT_BUDGET,
    decades: int = 7,
    per_decade: int = 8,
) -> Certificate:
    """Log-spaced grid search for the feasible certificate with the largest decay rate.

    Each candidate is parameterized relative to its binding bound: ``N_i`` sits a
    log-spaced offset above its minimum, ``eps_i`` a log-spaced fraction below the
    tighter of its certificate bound and ``1/C_i``, ``delta_i`` at half its bound
    and ``Ce`` at twice its minimum.  Every candidate is re-checked in full with
    :func:`check_lemma4` and :func:`equivalence_constants` before it is accepted.
    """
    _require_positive_gains(gains)
    if budget <= 0:
        raise Infeasible("search budget is zero")
    base = LyapunovParams(Ce=1.0, eps1=1.0, eps2=1.0, delta1=1.0, delta2=1.0, N1=1.0, N2=1.0)
    th0 = lemma4_thresholds(mat, gains, base)
    N1_min, N2_min = th0["N1_min"], th0["N2_min"]

    def grid(k):
        return 10.0 ** (-k / per_decade)

    best = None
    best_key = None
    count = 0
    for i1, i2, j1, j2 in _candidate_indices(decades, per_decade):
        if count >= budget:
            break
        count += 1
        N1 = N1_min * (1 + grid(i1))
        N2 = N2_min * (1 + grid(i2))
        probe = LyapunovParams(1.0, 1.0, 1.0, 1.0, 1.0, N1, N2)
        th = lemma4_thresholds(mat, gains, probe)
        eps1 = grid(j1) * min(th["eps1_max"], 1 / c1_constant(mat, gains, N1))
        eps2 = grid(j2) * min(th["eps2_max"], 1 / c2_constant(mat, gains, N2))
        probe = LyapunovParams(1.0, eps1, eps2, eps2 * mat.rho, eps2 * mat.mu, N1, N2)
        ce_min = lemma4_thresholds(mat, gains, probe)["Ce_min"]
        if not math.isfinite(ce_min):
            continue
        lyap = LyapunovParams(2 * ce_min if ce_min > 0 else 1.0, *astuple(probe)[1:])
        report = check_lemma4(mat, gains, lyap)
        if not report.feasible:
            continue
        try:
            const = equivalence_constants(mat, gains, lyap)
        except EquivalenceViolated:
            continue
        key = (-const.omega, astuple(lyap))
        if best_key is None or key < best_key:
            best_key = key
            best = (lyap, const, report)
    if best is None:
        raise Infeasible(f"no feasible certificate among {count} candidates")
    return Certificate(params=best[0], constants=best[1], report=best[2], evaluated=count)
