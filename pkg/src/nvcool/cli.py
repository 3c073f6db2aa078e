"""Command-line entry point: ``nvcool <subcommand> --config run.json``."""

from __future__ import annotations

import argparse
import itertools
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor

from nvcool import experiments as ex
from nvcool import meanfield as mf
from nvcool import model as md
from nvcool.config import CI_DIMS, CI_MAX_NBAR_A, EVOLVE_MODES, RunSpec, load_config
from nvcool.errors import ConfigError, InvalidParameterError, NumericalConsistencyError
from nvcool.reduced import ReducedParams
from nvcool.tables import Table

log = logging.getLogger("nvcool")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_CHECK = 0, 1, 2, 3
SUBCOMMANDS = ("analytic-sweep", "gamma-sweep", "evolve", "compare", "derive-params")


def _table(spec: RunSpec, columns) -> Table:
    return Table(list(columns), header={"mode": spec.mode, "resolved": spec.resolved()},
                 comments=list(spec.warnings))


def _col(spec: RunSpec, name: str) -> str:
    return spec.units.key(name)


def _out(spec: RunSpec, name: str, value: float) -> float:
    return spec.units.to_config(name, value)


def cmd_analytic_sweep(spec: RunSpec) -> Table:
    """Stationary mean-field solution along a one-parameter sweep (default nbar_a)."""
    name, values = spec.sweep[0] if spec.sweep else ("nbar_a", [spec.params.nbar_a])
    table = _table(spec, [_col(spec, name), "nb_stationary", "ns_stationary", "A", "B", "C"])
    nbs = []
    for v in values:
        point = ex.analytic_point(spec.params.replace(**{name: v}))
        nbs.append(point["nb_stationary"])
        table.rows.append([_out(spec, name, v), point["nb_stationary"], point["ns_stationary"],
                           point["A"], point["B"], point["C"]])
    for (v0, n0), (v1, n1) in zip(zip(values, nbs), zip(values[1:], nbs[1:])):
        if (n0 - 1.0) * (n1 - 1.0) <= 0 and n0 != n1:
            x = ex.nb_crossing(spec.params, name, min(v0, v1), max(v0, v1))
            table.footer.setdefault("crossing_nb_eq_1", _out(spec, name, x))
            break
    return table


def cmd_gamma_sweep(spec: RunSpec) -> Table:
    _, values = spec.sweep[0]
    p = ReducedParams.from_system(spec.params)
    table = _table(spec, [_col(spec, "Gamma"), "nb_stationary", "nb_asymptotic"])
    for G in values:
        table.rows.append([_out(spec, "Gamma", G), mf.stationary_nb(p.replace(Gamma=G)),
                           mf.asymptotic_nb(p.nbar_b, p.gamma_b, G)])
    gamma_range = spec.gamma_range or (min(values), max(values))
    best = mf.optimal_gamma(p, gamma_range)
    table.footer["optimal_" + _col(spec, "Gamma")] = _out(spec, "Gamma", best.Gamma)
    table.footer["optimal_nb"] = best.n_b
    table.footer["optimal_nb_asymptotic"] = mf.asymptotic_nb(p.nbar_b, p.gamma_b, best.Gamma)
    for w in best.warnings:
        table.comments.append(w)
    return table


def cmd_evolve(spec: RunSpec) -> Table:
    params, integ = spec.params, spec.integrator
    if spec.mode == "evolve-meanfield":
        traj = ex.run_meanfield(params, integ)
        table = _table(spec, ["t", "n_b", "n_s"])
        table.rows = [[t, nb, ns] for t, nb, ns in zip(traj.times, traj.n_b, traj.n_s)]
        table.footer["stationary_at"] = "none" if traj.stationary_at is None else traj.stationary_at
        table.footer["final_n_b"] = float(traj.n_b[-1])
        table.footer["final_n_s"] = float(traj.n_s[-1])
        table.footer["stationary_nb_quadratic"] = ex.analytic_nb(params)
        return table
    dim_a, dim_b = spec.dims_for(params.nbar_a, params.nbar_b)
    if spec.mode == "evolve-full":
        traj = ex.run_full(params, (dim_a, dim_b), integ, stationarity=spec.stationarity)
        names = ["n_b", "n_a", "n_s"]
        table = _table(spec, ["t", *names, "trace_error"])
        table.header["dims"] = [2, dim_a, dim_b]
    else:
        traj = ex.run_reduced(params, dim_b, integ, stationarity=spec.stationarity)
        names = ["n_b", "n_s"]
        table = _table(spec, ["t", *names, "trace_error"])
        table.header["dims"] = [2, dim_b]
    for i, t in enumerate(traj.times):
        table.rows.append([float(t), *(float(traj[n][i]) for n in names), float(traj.trace_error[i])])
    table.footer["stationary_at"] = "none" if traj.stationary_at is None else traj.stationary_at
    for n in names:
        table.footer[f"final_{n}"] = traj.final(n)
    table.footer["max_trace_error"] = float(traj.trace_error.max())
    table.footer["max_hermiticity_drift"] = float(traj.hermiticity_drift.max())
    return table


def _compare_job(args):
    params, dims, integ, stationarity = args
    return ex.compare_point(params, dims, integ, stationarity)


def cmd_compare(spec: RunSpec, threads: int = 1) -> Table:
    sweeps = dict(spec.sweep)
    gammas = sweeps.get("Gamma", [spec.params.Gamma])
    nbars = sweeps.get("nbar_a", [spec.params.nbar_a])
    jobs = []
    for G, na in itertools.product(gammas, nbars):
        p = spec.params.replace(Gamma=G, nbar_a=na)
        jobs.append((p, spec.dims_for(na, p.nbar_b), spec.integrator, spec.stationarity))
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            points = list(pool.map(_compare_job, jobs))
    else:
        points = [_compare_job(j) for j in jobs]
    table = _table(spec, ["nbar_a", _col(spec, "Gamma"), "nb_numeric", "nb_analytic", "abs_diff", "rel_diff"])
    for pt, job in zip(points, jobs):
        table.rows.append([pt.nbar_a, _out(spec, "Gamma", pt.Gamma), pt.nb_numeric, pt.nb_analytic,
                           pt.abs_diff, pt.rel_diff])
        if pt.stationary_at is None:
            table.comments.append(f"nbar_a={pt.nbar_a:g}, Gamma={_out(spec, 'Gamma', pt.Gamma):g}: "
                                  "not stationary within the configured window")
    table.header["dims"] = {f"{j[0].nbar_a:g}": list(j[1]) for j in jobs}
    table.footer["max_abs_diff"] = max(pt.abs_diff for pt in points)
    table.footer["max_trace_error"] = max(pt.max_trace_error for pt in points)
    table.footer["min_eigenvalue"] = min(pt.min_eigenvalue for pt in points)
    return table


def cmd_derive_params(spec: RunSpec) -> Table:
    phys = spec.physical
    Gamma = 2 * math.pi * spec.derive.get("Gamma_over_2pi", 120.0)
    if "heating_temperature" in spec.derive:
        nbar_a = md.bose_occupation(phys.omega_a_mech, spec.derive["heating_temperature"])
    else:
        nbar_a = spec.derive.get("nbar_a", 0.0)
    try:
        params = md.derive_system_params(phys, Gamma=Gamma, nbar_a=nbar_a)
    except InvalidParameterError as exc:
        raise ConfigError(str(exc), "physical") from exc
    renorm = md.renormalized(params)
    table = Table(["quantity", "value_si", "value_over_2pi", "value_renormalized"],
                  header={"mode": spec.mode, "resolved": spec.resolved()})
    for name, value in params.as_dict().items():
        over = value / (2 * math.pi) if name in md.RATE_FIELDS else value
        table.rows.append([name, value, over, getattr(renorm, name)])
    table.header["x_a_m"] = md.zero_point_fluctuation(phys.mass_a, phys.omega_a_mech)
    table.header["x_b_m"] = md.zero_point_fluctuation(phys.mass_b, phys.omega_b_mech)
    table.comments.extend(md.validate_regime(params))
    return table


def apply_profile(spec: RunSpec, profile: str | None) -> None:
    if profile is None or spec.mode in ("analytic-sweep", "gamma-sweep", "derive-params", "evolve-meanfield"):
        return
    if profile == "paper":
        spec.truncation = None
        return
    spec.truncation = CI_DIMS
    if spec.mode == "compare":
        new = []
        for name, values in spec.sweep:
            if name == "nbar_a":
                kept = [v for v in values if v <= CI_MAX_NBAR_A]
                if len(kept) < len(values):
                    spec.warnings.append(f"ci profile drops nbar_a > {CI_MAX_NBAR_A}")
                values = kept or [min(values)]
            new.append((name, values))
        spec.sweep = new


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nvcool", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", help="output table (default: config 'output', else stdout)")
        p.add_argument("--threads", type=int, default=1, help="worker processes for sweep points")
        p.add_argument("--profile", choices=("ci", "paper"), help="truncation profile for evolve/compare")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "compare":
            p.add_argument("--check", action="store_true",
                           help="exit 3 if any |numeric - analytic| exceeds check_tol")
    return parser


def _matches(command: str, mode: str) -> bool:
    return command == mode or (command == "evolve" and mode in EVOLVE_MODES)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        spec = load_config(args.config)
        if not _matches(args.command, spec.mode):
            raise ConfigError(f"config mode {spec.mode!r} does not belong to subcommand {args.command!r}", "mode")
        if args.threads < 1:
            raise ConfigError("must be >= 1", "--threads")
        apply_profile(spec, args.profile)
        for w in spec.warnings:
            log.warning(w)
        if spec.mode == "analytic-sweep":
            table = cmd_analytic_sweep(spec)
        elif spec.mode == "gamma-sweep":
            table = cmd_gamma_sweep(spec)
        elif spec.mode == "compare":
            table = cmd_compare(spec, threads=args.threads)
        elif spec.mode == "derive-params":
            table = cmd_derive_params(spec)
        else:
            table = cmd_evolve(spec)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalConsistencyError, InvalidParameterError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL

    out = args.out or spec.output
    if out:
        table.write(out)
        print(f"wrote {out}", file=sys.stderr)
    else:
        sys.stdout.write(table.render())

    if args.command == "compare" and args.check:
        worst = table.footer["max_abs_diff"]
        if worst > spec.check_tol:
            print(f"check failed: max |numeric - analytic| = {worst:.4g} > {spec.check_tol:g}", file=sys.stderr)
            return EXIT_CHECK
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
