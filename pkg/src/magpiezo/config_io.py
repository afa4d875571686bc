"""Experiment configuration files and CSV outputs.

Configuration is line-oriented text::

    # comment
    material.rho = 1.0
    grid.N = 30

Outputs are comma-separated with ``\\n`` line ends and ``repr``-exact floats
(17 significant digits), so identical runs give byte-identical files.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .discretization import FIELDS, Grid, build_grid
from .errors import MagPiezoError, NegativeGain, ParseError, RangeError
from .gains import GainSet, LyapunovParams
from .integrator import InitialCondition, StepperConfig
from .model import MaterialParams, validate_material

TRACE_COLUMNS = (
    "t", "E_hat", "E_e", "E_total", "L_value", "bound_value",
    "what_wL", "phat_pL", "e1_0", "e2_0",
)
SNAPSHOT_COLUMNS = ("t", "x", "hat_w", "hat_p", "e1", "e2")

_INT_KEYS = {"grid.N", "time.snapshot_stride", "ic.kmin", "ic.kmax"}
_MATERIAL = ("rho", "mu", "alpha", "beta", "gamma")
_LYAP = ("Ce", "eps1", "eps2", "delta1", "delta2", "N1", "N2")
_GAINS = tuple(f"k{i}" for i in range(1, 9))

KNOWN_KEYS = (
    tuple(f"material.{k}" for k in _MATERIAL)
    + ("geometry.L", "grid.N", "time.T", "time.dt", "time.snapshot_stride")
    + tuple(f"gains.{k}" for k in _GAINS)
    + tuple(f"lyapunov.{k}" for k in _LYAP)
    + ("ic.amplitude", "ic.kmin", "ic.kmax", "observer.mismatch_scale")
)

DEFAULTS = {
    "geometry.L": 1.0,
    "grid.N": 30,
    "time.T": 5.0,
    "time.snapshot_stride": 10,
    "ic.amplitude": 1e-3 / 25,
    "ic.kmin": 5,
    "ic.kmax": 30,
    "observer.mismatch_scale": 0.0,
    **{f"gains.{k}": 0.0 for k in _GAINS},
}


@dataclass(frozen=True)
class ExperimentConfig:
    material: MaterialParams
    grid: Grid
    T: float
    dt: float
    snapshot_stride: int
    gains: GainSet
    ic: InitialCondition
    lyapunov: LyapunovParams | None = None
    explicit_dt: bool = field(default=False, compare=False)

    @property
    def stepper(self) -> StepperConfig:
        return StepperConfig(dt=self.dt, T=self.T, stride=self.snapshot_stride)

    @property
    def mismatch_scale(self) -> float:
        return self.ic.mismatch

    def with_value(self, key: str, value) -> "ExperimentConfig":
        """Copy with one schema key replaced; re-validated through :func:`parse_config`."""
        raw = to_mapping(self)
        if key not in KNOWN_KEYS:
            raise RangeError(key, "unknown configuration key")
        raw[key] = value
        if key in ("grid.N", "geometry.L") and not self.explicit_dt:
            raw.pop("time.dt", None)
        return from_mapping(raw)


def _number(key, text, lineno):
    try:
        if key in _INT_KEYS:
            val = float(text)
            if not val.is_integer():
                raise ValueError
            return int(val)
        return float(text)
    except ValueError:
        raise ParseError(f"{key}: cannot parse {text!r} as a number", lineno) from None


def parse_config(text: str) -> ExperimentConfig:
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ParseError(f"expected 'section.key = value', got {body!r}", lineno)
        key, value = (s.strip() for s in body.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ParseError(f"unknown key {key!r}", lineno)
        if key in raw:
            raise ParseError(f"duplicate key {key!r}", lineno)
        if not value:
            raise ParseError(f"missing value for {key!r}", lineno)
        raw[key] = _number(key, value, lineno)
    return from_mapping(raw)


def from_mapping(raw: dict) -> ExperimentConfig:
    vals = {**DEFAULTS, **raw}
    for k in _MATERIAL:
        if f"material.{k}" not in vals:
            raise RangeError(f"material.{k}", "material constants are mandatory")
    for key, v in vals.items():
        if not math.isfinite(v):
            raise RangeError(key, f"value {v!r} is not finite")
    try:
        mat = validate_material({k: vals[f"material.{k}"] for k in _MATERIAL} | {"L": vals["geometry.L"]})
    except MagPiezoError as exc:
        raise RangeError("material", str(exc)) from exc
    if vals["grid.N"] < 2:
        raise RangeError("grid.N", f"need N >= 2, got {vals['grid.N']}")
    grid = build_grid(mat.L, vals["grid.N"])
    if not vals["time.T"] > 0:
        raise RangeError("time.T", "final time must be positive")
    explicit_dt = "time.dt" in vals
    dt = vals["time.dt"] if explicit_dt else min(grid.h / 10, vals["time.T"])
    if not (0 < dt <= vals["time.T"]):
        raise RangeError("time.dt", f"need 0 < dt <= T, got {dt!r}")
    if vals["time.snapshot_stride"] < 1:
        raise RangeError("time.snapshot_stride", "must be >= 1")
    try:
        gains = GainSet(**{k: vals[f"gains.{k}"] for k in _GAINS})
    except NegativeGain as exc:
        raise RangeError("gains", str(exc)) from exc
    if not (1 <= vals["ic.kmin"] <= vals["ic.kmax"]):
        raise RangeError("ic.kmin", "need 1 <= kmin <= kmax")
    ic = InitialCondition(
        amplitude=vals["ic.amplitude"], kmin=vals["ic.kmin"], kmax=vals["ic.kmax"],
        mismatch=vals["observer.mismatch_scale"],
    )
    lyap_keys = [f"lyapunov.{k}" for k in _LYAP]
    present = [k for k in lyap_keys if k in vals]
    lyap = None
    if present:
        missing = sorted(set(lyap_keys) - set(present))
        if missing:
            raise RangeError(missing[0], "lyapunov section must be given in full or omitted")
        for k in lyap_keys:
            if not vals[k] > 0:
                raise RangeError(k, "Lyapunov parameters must be positive")
        lyap = LyapunovParams(**{k: vals[f"lyapunov.{k}"] for k in _LYAP})
    return ExperimentConfig(
        material=mat, grid=grid, T=vals["time.T"], dt=dt,
        snapshot_stride=vals["time.snapshot_stride"], gains=gains, ic=ic,
        lyapunov=lyap, explicit_dt=explicit_dt,
    )


def to_mapping(cfg: ExperimentConfig) -> dict:
    m = cfg.material
    raw = {f"material.{k}": getattr(m, k) for k in _MATERIAL}
    raw.update({
        "geometry.L": m.L, "grid.N": cfg.grid.N, "time.T": cfg.T,
        "time.snapshot_stride": cfg.snapshot_stride,
    })
    if cfg.explicit_dt:
        raw["time.dt"] = cfg.dt
    raw.update({f"gains.{k}": getattr(cfg.gains, k) for k in _GAINS})
    if cfg.lyapunov is not None:
        raw.update({f"lyapunov.{k}": getattr(cfg.lyapunov, k) for k in _LYAP})
    raw.update({
        "ic.amplitude": cfg.ic.amplitude, "ic.kmin": cfg.ic.kmin, "ic.kmax": cfg.ic.kmax,
        "observer.mismatch_scale": cfg.ic.mismatch,
    })
    return raw


def format_config(cfg: ExperimentConfig) -> str:
    """Normalized text form; ``parse_config(format_config(c)) == c``."""
    return "".join(f"{k} = {_fmt(v)}\n" for k, v in to_mapping(cfg).items())


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return repr(float(v))


def _write_rows(path, header, rows):
    text = ",".join(header) + "\n" + "".join(",".join(_fmt(v) for v in r) + "\n" for r in rows)
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def write_trace(trace, path, boundary=None):
    """Write an energy trace.

    ``boundary`` is an optional (n, 4) array of ``hat_w(L), hat_p(L), e1(0), e2(0)``;
    missing columns are written as ``nan``.
    """
    n = len(trace)
    if n == 0:
        raise ValueError("trace is empty")
    b = np.full((n, 4), np.nan) if boundary is None else np.asarray(boundary, float)
    cols = [trace.t, trace.E_hat, trace.E_e, trace.E_total, trace.L_value, trace.bound_value]
    rows = [[c[i] for c in cols] + list(b[i]) for i in range(n)]
    _write_rows(path, TRACE_COLUMNS, rows)


def boundary_values(traj) -> np.ndarray:
    s = traj.system
    idx = [s.block("hat_w").stop - 1, s.block("hat_p").stop - 1, s.block("e1").start, s.block("e2").start]
    return np.array([[st.u[i] for i in idx] for st in traj])


def write_snapshots(states, path, x=None):
    """Long-format snapshot file with one row per (t, x).

    ``states`` is a :class:`~magpiezo.integrator.Trajectory` or a sequence of
    :class:`~magpiezo.discretization.FieldSnapshot`.
    """
    if x is None and hasattr(states, "system"):
        x = states.system.grid.nodes
    rows = []
    for s in states:
        if hasattr(s, "hat_w"):
            xs, vals = s.x, [getattr(s, f) for f in FIELDS]
        else:
            n = len(x)
            xs, vals = x, [s.u[i * n:(i + 1) * n] for i in range(4)]
        rows.extend([s.t, xs[j], *(v[j] for v in vals)] for j in range(len(xs)))
    if not rows:
        raise ValueError("no snapshots to write")
    _write_rows(path, SNAPSHOT_COLUMNS, rows)


def read_csv(path) -> tuple[list, np.ndarray]:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, data
