"""Command-line front end.

Exit codes: 0 success, 1 bad input (flags, missing or malformed config),
2 simulation or eigenvalue failure, 3 no certificate found (``certify``).
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config_io import (
    ExperimentConfig, boundary_values, format_config, parse_config, write_snapshots, write_trace,
)
from .diagnostics import bound_check, decay_fit, discrete_energy, energy_trace
from .discretization import assemble, build_grid
from .errors import (
    EquivalenceViolated, Infeasible, MagPiezoError, NonPositiveParameter, ParseError, RangeError,
)
from .gains import DEFAULT_BUDGET, Certificate, check_lemma4, equivalence_constants, search_certificate
from .integrator import SimState, simulate
from .spectral import system_spectrum

EXIT_OK, EXIT_INPUT, EXIT_SIM, EXIT_INFEASIBLE = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ParseError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def certificate_for(cfg: ExperimentConfig, budget: int = DEFAULT_BUDGET):
    """Certificate from the config's Lyapunov section, or a searched one; ``None`` if none exists."""
    mat, gains = cfg.material, cfg.gains
    if not gains.all_positive:
        return None
    if cfg.lyapunov is not None:
        report = check_lemma4(mat, gains, cfg.lyapunov)
        if not report.feasible:
            return None
        try:
            const = equivalence_constants(mat, gains, cfg.lyapunov)
        except EquivalenceViolated:
            return None
        return Certificate(cfg.lyapunov, const, report, evaluated=0)
    try:
        return search_certificate(mat, gains, budget=budget)
    except Infeasible:
        return None


def _certificate_summary(cert) -> list:
    if cert is None:
        return ["certificate: none (uncertified)"]
    p, c = cert.params, cert.constants
    return [
        "certificate: found" + (f" (searched {cert.evaluated} candidates)" if cert.evaluated else " (from config)"),
        f"  Ce = {p.Ce!r}", f"  eps1 = {p.eps1!r}", f"  eps2 = {p.eps2!r}",
        f"  delta1 = {p.delta1!r}", f"  delta2 = {p.delta2!r}", f"  N1 = {p.N1!r}", f"  N2 = {p.N2!r}",
        f"  C1 = {c.C1!r}", f"  C2 = {c.C2!r}", f"  p1 = {c.p1!r}", f"  p2 = {c.p2!r}",
        f"  omega = {c.omega!r}",
    ]


def run_experiment(cfg: ExperimentConfig, out: Path, budget: int = DEFAULT_BUDGET, trace_name="trace.csv",
                   snapshots=True):
    """Simulate, write outputs into ``out`` and return a summary dict."""
    traj = simulate(cfg.material, cfg.gains, cfg.grid, cfg.ic, cfg.stepper)
    cert = certificate_for(cfg, budget)
    trace = energy_trace(traj, cert.params if cert else None, cert.constants if cert else None)
    out.mkdir(parents=True, exist_ok=True)
    write_trace(trace, out / trace_name, boundary_values(traj))
    if snapshots:
        write_snapshots(traj, out / "snapshots.csv")
    try:
        fit = decay_fit(trace)
    except MagPiezoError:
        fit = None
    bc = bound_check(trace, cert.constants) if cert else None
    return dict(trace=trace, traj=traj, certificate=cert, fit=fit, bound=bc)


def _report_text(cfg, res) -> str:
    fit, bc = res["fit"], res["bound"]
    lines = [
        "# run report",
        f"N = {cfg.grid.N}", f"T = {cfg.T!r}", f"dt = {cfg.dt!r}", f"mismatch_scale = {cfg.ic.mismatch!r}",
        f"E_total(0) = {float(res['trace'].E_total[0])!r}", f"E_total(T) = {float(res['trace'].E_total[-1])!r}",
    ]
    if fit is None:
        lines.append("decay_fit: unavailable (non-positive energy in window)")
    else:
        lines += [f"decay_fit.window = [{float(fit.window[0])!r}, {float(fit.window[1])!r}]",
                  f"decay_fit.sigma = {float(fit.sigma)!r}", f"decay_fit.prefactor = {float(fit.prefactor)!r}"]
    lines += _certificate_summary(res["certificate"])
    if bc is None:
        lines.append("bound_check: not applicable")
    else:
        lines.append(f"bound_check: {'holds' if bc.holds else 'VIOLATED'} (worst relative margin {float(bc.worst_margin)!r})")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# subcommands


def cmd_run(args):
    cfg = load_config(args.config)
    if args.mismatch is not None:
        cfg = cfg.with_value("observer.mismatch_scale", args.mismatch)
    out = Path(args.out)
    res = run_experiment(cfg, out, args.budget)
    (out / "report.txt").write_text(_report_text(cfg, res), encoding="utf-8")
    print(f"wrote {out / 'trace.csv'}, {out / 'snapshots.csv'}, {out / 'report.txt'}")
    return EXIT_OK


def cmd_check_gains(args):
    cfg = load_config(args.config)
    lyap = cfg.lyapunov
    if lyap is None:
        cert = certificate_for(cfg, args.budget)
        if cert is None:
            print("no Lyapunov section and no certificate found; nothing to check")
            return EXIT_OK
        lyap = cert.params
        print("(Lyapunov parameters from certificate search)")
    print(check_lemma4(cfg.material, cfg.gains, lyap).format_table())
    return EXIT_OK


def cmd_certify(args):
    cfg = load_config(args.config)
    try:
        cert = search_certificate(cfg.material, cfg.gains, budget=args.budget)
    except NonPositiveParameter as exc:
        raise Infeasible(str(exc)) from exc
    print("\n".join(_certificate_summary(cert)))
    print(cert.report.format_table())
    return EXIT_OK


def cmd_spectrum(args):
    cfg = load_config(args.config)
    Ns = args.N_list or [cfg.grid.N]
    print("N,abscissa,n_finite")
    for N in Ns:
        system = assemble(cfg.material, cfg.gains, build_grid(cfg.material.L, N))
        rep = system_spectrum(system)
        print(f"{N},{rep.abscissa!r},{len(rep.eigenvalues)}")
    return EXIT_OK


def _sweep_one(job):
    text, key, value, out, budget, idx = job
    cfg = parse_config(text).with_value(key, value)
    res = run_experiment(cfg, Path(out), budget, trace_name=f"trace_{idx:03d}.csv", snapshots=False)
    cert = res["certificate"]
    sigma = res["fit"].sigma if res["fit"] else math.nan
    return (value, sigma, cert is not None, cert.constants.omega if cert else math.nan,
            res["bound"].holds if res["bound"] else None)


def cmd_sweep(args):
    cfg = load_config(args.config)
    try:
        values = [float(v) for v in args.values]
    except ValueError:
        raise RangeError(args.param, "sweep values must be numeric") from None
    for v in values:
        cfg.with_value(args.param, v)  # validate before launching anything
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    text = format_config(cfg)
    jobs = [(text, args.param, v, str(out), args.budget, i) for i, v in enumerate(values)]
    n_jobs = max(1, min(args.jobs or os.cpu_count() or 1, len(jobs)))
    if n_jobs == 1:
        rows = [_sweep_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=n_jobs) as ex:
            rows = list(ex.map(_sweep_one, jobs))
    lines = ["index,value,sigma,certified,omega,bound_check"]
    for i, (v, sigma, ok, omega, bc) in enumerate(rows):
        flag = "" if bc is None else ("holds" if bc else "violated")
        lines.append(f"{i},{v!r},{sigma!r},{'yes' if ok else 'no'},{omega!r},{flag}")
    summary = "\n".join(lines) + "\n"
    (out / "sweep_summary.csv").write_text(summary, encoding="utf-8")
    print(summary, end="")
    return EXIT_OK


def convergence_study(cfg: ExperimentConfig, levels: int = 3, T: float = 1.0):
    """Nested-grid self-convergence at time ``T``.

    Grids ``N_{l+1} = 2 N_l + 1`` halve ``h`` and share every coarse node; ``dt``
    keeps the configured ratio ``dt/h``.  Differences of consecutive levels are
    restricted to the coarser grid and measured in its discrete energy norm.
    """
    if levels < 3:
        raise RangeError("levels", "need at least 3 levels for an observed order")
    ratio = cfg.dt / cfg.grid.h
    Ns = [cfg.grid.N]
    for _ in range(levels - 1):
        Ns.append(2 * Ns[-1] + 1)
    finals = []
    for N in Ns:
        c = cfg.with_value("grid.N", N)
        c = c.with_value("time.T", T).with_value("time.dt", ratio * c.grid.h)
        traj = simulate(c.material, c.gains, c.grid, c.ic, c.stepper)
        finals.append((c, traj[-1]))
    diffs = []
    for (c0, s0), (_, s1) in zip(finals[:-1], finals[1:]):
        n0, n1 = c0.grid.n_nodes, 2 * c0.grid.n_nodes - 1
        pick = np.concatenate([b * n1 + 2 * np.arange(n0) for b in range(4)])
        d = SimState(T, s0.u - s1.u[pick], s0.v - s1.v[pick])
        sys0 = assemble(c0.material, c0.gains, c0.grid)
        diffs.append(math.sqrt(max(discrete_energy(sys0, d).E_total, 0.0)))
    orders = [math.log2(a / b) if a > 0 and b > 0 else math.nan for a, b in zip(diffs[:-1], diffs[1:])]
    return Ns, diffs, orders


def cmd_convergence(args):
    cfg = load_config(args.config)
    Ns, diffs, orders = convergence_study(cfg, args.levels, args.T)
    print("N_coarse,N_fine,diff_energy_norm")
    for i, d in enumerate(diffs):
        print(f"{Ns[i]},{Ns[i + 1]},{d!r}")
    for o in orders:
        print(f"observed order = {o:.4f}")
    return EXIT_OK


def build_parser():
    p = _Parser(prog="magpiezo", description="Observer-based boundary control of a magnetizable piezoelectric beam.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="simulate and write trace, snapshots and report")
    r.add_argument("--config", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--mismatch", type=float)
    r.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("check-gains", help="print the certificate inequality table")
    c.add_argument("--config", required=True)
    c.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    c.set_defaults(func=cmd_check_gains)

    c = sub.add_parser("certify", help="search for a Lyapunov certificate")
    c.add_argument("--config", required=True)
    c.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    c.set_defaults(func=cmd_certify)

    s = sub.add_parser("spectrum", help="spectral abscissa per grid size")
    s.add_argument("--config", required=True)
    s.add_argument("--N-list", dest="N_list", type=int, nargs="+")
    s.set_defaults(func=cmd_spectrum)

    w = sub.add_parser("sweep", help="run one simulation per parameter value")
    w.add_argument("--config", required=True)
    w.add_argument("--param", required=True)
    w.add_argument("--values", required=True, nargs="+")
    w.add_argument("--out", default="sweep_out")
    w.add_argument("--jobs", type=int, default=None)
    w.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    w.set_defaults(func=cmd_sweep)

    v = sub.add_parser("convergence", help="nested-grid self-convergence")
    v.add_argument("--config", required=True)
    v.add_argument("--levels", type=int, default=3)
    v.add_argument("--T", type=float, default=1.0)
    v.set_defaults(func=cmd_convergence)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # argparse: --help exits 0, usage errors exit 1
        return exc.code if isinstance(exc.code, int) else EXIT_INPUT
    if getattr(args, "jobs", None) is not None and args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except (ParseError, RangeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Infeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (MagPiezoError, np.linalg.LinAlgError) as exc:
        print(f"simulation error: {exc}", file=sys.stderr)
        return EXIT_SIM
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SIM


if __name__ == "__main__":
    sys.exit(main())
