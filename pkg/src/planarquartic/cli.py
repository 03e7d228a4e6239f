"""Command-line interface: solve, tabulate, verify, sweep, sample.

Every command writes a text report plus CSV tables into the output
directory; reruns with identical config and seed are byte-identical
(no timestamps, 17-significant-digit floats).  Exit codes: 0 success,
2 config error, 3 solver non-convergence, 4 invariant violation.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import (COMMANDS, ConfigError, RunConfig, build_config,
                     config_lines, read_config_file)
from .coupling import lambda_eff
from .grids import SampledFunction, build_grid, hilbert_matrix
from .montecarlo import FiniteModel, SamplerSpec, moment, sd2_residual, \
    ward_residual
from .npoint import (DegenerateIndicesError, NPointRequest,
                     check_bijk_identity, check_ward_four_point, n_point)
from .solver import (ConvergenceError, ModelParams, boundary_angle,
                     compute_z_surrogate, residual_master_Ta,
                     solve_fixed_point)
from .twocycle import boundary_correlator, build_two_cycle_fields
from .twopoint import (build_two_point_field, check_addition_theorem,
                       check_tricomi, symmetry_defect, two_point)

__all__ = ["main"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NO_CONVERGENCE = 3
EXIT_INVARIANT = 4

_USAGE = """\
usage: planarquartic COMMAND [flags]

commands:
  solve       solve the boundary fixed point and tabulate G(b, 0)
  twopoint    tabulate an off-boundary two-point slice
  npoint      evaluate one planar N-point function
  b2          evaluate a one- or two-cycle boundary correlator
  lambda-eff  effective coupling by both quadrature forms
  oracle      finite-size Monte Carlo identity checks
  sweep       coupling sweep with one summary row per point
  verify      identity suite with thresholds (exit 4 on violation)

common flags: --config FILE  --lambda X  --nodes N  --cutoff X
              --output DIR  --seed N
run `planarquartic COMMAND --help` for command-specific flags.
"""

_TRIPLES_BIJK = ((0.3, 1.1, 2.4), (0.2, 0.9, 5.0), (1.7, 0.4, 3.3))


def main(argv=None) -> int:
    args = list(sys.argv[1:] if argv is None else argv)
    if not args or args[0] in ("-h", "--help"):
        print(_USAGE, end="")
        return EXIT_OK
    if args[0] in ("-V", "--version"):
        print(__version__)
        return EXIT_OK
    try:
        cfg = _resolve_config(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _dispatch(cfg)
    except ConvergenceError as exc:
        print(f"error: solver did not converge: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    except DegenerateIndicesError as exc:
        print(f"error: coincident indices: {exc}", file=sys.stderr)
        return EXIT_CONFIG


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------

def _flag_parser(command: str) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog=f"planarquartic {command}")
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--output", help="output directory (default: out)")
    p.add_argument("--seed", help="seed for seeded subtasks")
    if command != "oracle":
        p.add_argument("--lambda", dest="coupling",
                       help="renormalized quartic coupling")
        p.add_argument("--nodes", help="quadrature nodes (multiple of 8)")
        p.add_argument("--cutoff", dest="lambda_cut",
                       help="squared spectral cutoff (default 1e6)")
    if command == "twopoint":
        p.add_argument("--rows", help="comma list of first indices")
    if command == "npoint":
        p.add_argument("--indices", help="comma list, even count >= 4")
    if command == "b2":
        p.add_argument("--bs", dest="b_cycle", help="first index cycle")
        p.add_argument("--cs", dest="c_cycle", help="second index cycle")
    if command == "verify":
        p.add_argument("--suite", help="check suite (identities)")
    if command == "oracle":
        p.add_argument("--size", help="matrix size 1, 2, or 3")
        p.add_argument("--e-values", dest="e_values",
                       help="comma list, strictly increasing, positive")
        p.add_argument("--lambda4", help="quartic coupling of the measure")
        p.add_argument("--volume", help="volume factor V")
        p.add_argument("--samples", help="Monte Carlo sample budget")
    if command == "sweep":
        p.add_argument("--lambda-min", dest="lambda_min")
        p.add_argument("--lambda-max", dest="lambda_max")
        p.add_argument("--points", help="number of sweep points")
        p.add_argument("--workers", help="parallel workers (0 = auto)")
    return p


def _resolve_config(args) -> RunConfig:
    command = None
    if args and not args[0].startswith("-"):
        command = args.pop(0)
        if command not in COMMANDS:
            raise ConfigError(f"unknown command {command!r} (expected one "
                              f"of {', '.join(COMMANDS)})")
    ns = _flag_parser(command or "solve").parse_args(args)
    flag_values = vars(ns)
    path = flag_values.pop("config", None)
    file_entries = read_config_file(path) if path else None
    return build_config(command, file_entries, flag_values, path=path)


def _dispatch(cfg: RunConfig) -> int:
    out_dir = Path(cfg.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    handler = {
        "solve": _cmd_solve,
        "twopoint": _cmd_twopoint,
        "npoint": _cmd_npoint,
        "b2": _cmd_b2,
        "lambda-eff": _cmd_lambda_eff,
        "oracle": _cmd_oracle,
        "sweep": _cmd_sweep,
        "verify": _cmd_verify,
    }[cfg.command]
    return handler(cfg, out_dir)


# ---------------------------------------------------------------------------
# artifact writers
# ---------------------------------------------------------------------------

def _fmt(value) -> str:
    if isinstance(value, bool) or isinstance(value, np.bool_):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    if isinstance(value, tuple):
        return ",".join(_fmt(v) for v in value)
    return str(value)


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, quoting=csv.QUOTE_MINIMAL,
                            lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(cell) for cell in row])
    print(f"wrote {path}")


def _write_report(path: Path, cfg: RunConfig, sections,
                  grid=None) -> None:
    """Sectioned key = value report; doubles carry 17 significant digits."""
    lines = [f"planarquartic {cfg.command} report", ""]
    for title, pairs in sections:
        pairs = list(pairs)
        if not pairs:
            continue
        lines.append(f"[{title}]")
        lines.extend(f"{key} = {_fmt(value)}" for key, value in pairs)
        lines.append("")
    lines.append("[config]")
    lines.extend(config_lines(cfg))
    lines.append("")
    lines.append("[reproducibility]")
    lines.append(f"version = {__version__}")
    lines.append(f"seed = {cfg.seed}")
    if grid is not None:
        lines.append(f"grid_nodes = {grid.n}")
        lines.append(f"grid_panels = {grid.n_panels}")
        lines.append(f"grid_cutoff = {_fmt(grid.lambda_cut)}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"wrote {path}")


# ---------------------------------------------------------------------------
# shared continuum setup
# ---------------------------------------------------------------------------

def _solve(cfg: RunConfig):
    params = ModelParams(coupling=cfg.coupling, lambda_cut=cfg.lambda_cut,
                         allow_unverified=True)
    if params.unverified_regime:
        print(f"warning: coupling {cfg.coupling} exceeds 1/pi; the "
              "two-point symmetry is unverified there", file=sys.stderr)
    grid = build_grid(cfg.nodes, cfg.lambda_cut)
    g, report = solve_fixed_point(params, grid)
    return params, grid, g, report


def _base_scalars(params, grid, g, report):
    hilbert = hilbert_matrix(grid)
    eff = lambda_eff(g, report.slope_excess, params, hilbert=hilbert)
    scalars = [
        ("coupling", params.coupling),
        ("slope_excess", report.slope_excess),
        ("z_surrogate", report.z_surrogate),
        ("lambda_eff", eff),
    ]
    residuals = [
        ("picard_final", report.residual_history[-1]),
    ]
    invariants = [("converged", report.converged),
                  ("verified_regime", not params.unverified_regime)]
    invariants += sorted(g.validate().items())
    return scalars, residuals, invariants


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _cmd_solve(cfg: RunConfig, out_dir: Path) -> int:
    params, grid, g, report = _solve(cfg)
    scalars, residuals, invariants = _base_scalars(params, grid, g, report)
    _write_csv(out_dir / "g_b0.csv", ["b", "g_b0"],
               zip(grid.nodes, g.samples.values))
    _write_report(out_dir / "report.txt", cfg,
                  [("scalars", scalars), ("residuals", residuals),
                   ("invariants", invariants)], grid=grid)
    print(f"slope_excess = {_fmt(report.slope_excess)}")
    return EXIT_OK


def _cmd_twopoint(cfg: RunConfig, out_dir: Path) -> int:
    params, grid, g, report = _solve(cfg)
    scalars, residuals, invariants = _base_scalars(params, grid, g, report)
    hilbert_g = SampledFunction(grid, hilbert_matrix(grid) @ g.samples.values,
                                math.nan)
    rows = []
    for a in cfg.rows:
        for b in cfg.rows:
            rows.append((a, b, two_point(a, b, g, params,
                                         hilbert_g=hilbert_g)))
    field = build_two_point_field(g, params)
    residuals.append(("symmetry_defect", symmetry_defect(field)))
    _write_csv(out_dir / "g_b0.csv", ["b", "g_b0"],
               zip(grid.nodes, g.samples.values))
    _write_csv(out_dir / "g_ab.csv", ["a", "b", "g_ab"], rows)
    _write_report(out_dir / "report.txt", cfg,
                  [("scalars", scalars), ("residuals", residuals),
                   ("invariants", invariants)], grid=grid)
    return EXIT_OK


def _cmd_npoint(cfg: RunConfig, out_dir: Path) -> int:
    params, grid, g, report = _solve(cfg)
    field = build_two_point_field(g, params)
    value = n_point(NPointRequest(cfg.indices, allow_limits=True), field)
    header = [f"index_{k}" for k in range(len(cfg.indices))] + ["value"]
    _write_csv(out_dir / "npoint.csv", header, [(*cfg.indices, value)])
    scalars = [("coupling", params.coupling),
               ("order", len(cfg.indices)),
               ("value", value)]
    _write_report(out_dir / "report.txt", cfg, [("scalars", scalars)],
                  grid=grid)
    print(f"value = {_fmt(value)}")
    return EXIT_OK


def _cmd_b2(cfg: RunConfig, out_dir: Path) -> int:
    params, grid, g, report = _solve(cfg)
    fields = build_two_cycle_fields(g, params)
    cycles = [cfg.b_cycle] + ([cfg.c_cycle] if cfg.c_cycle else [])
    value = boundary_correlator(cycles, fields)
    _write_csv(out_dir / "b2.csv", ["b_cycle", "c_cycle", "value"],
               [(",".join(_fmt(b) for b in cfg.b_cycle),
                 ",".join(_fmt(c) for c in cfg.c_cycle), value)])
    scalars = [("coupling", params.coupling),
               ("cycle_lengths",
                tuple(float(len(c)) for c in cycles)),
               ("value", value)]
    _write_report(out_dir / "report.txt", cfg, [("scalars", scalars)],
                  grid=grid)
    print(f"value = {_fmt(value)}")
    return EXIT_OK


def _cmd_lambda_eff(cfg: RunConfig, out_dir: Path) -> int:
    params, grid, g, report = _solve(cfg)
    hilbert = hilbert_matrix(grid)
    rationalized = lambda_eff(g, report.slope_excess, params,
                              hilbert=hilbert, form="rationalized")
    sine = lambda_eff(g, report.slope_excess, params,
                      hilbert=hilbert, form="sine")
    split = abs(rationalized - sine) / max(abs(rationalized), 1e-300)
    _write_csv(out_dir / "lambda_eff.csv", ["form", "value"],
               [("rationalized", rationalized), ("sine", sine)])
    scalars = [("coupling", params.coupling),
               ("lambda_eff", rationalized),
               ("lambda_eff_ratio",
                rationalized / params.coupling if params.coupling else 1.0),
               ("slope_excess", report.slope_excess)]
    residuals = [("form_split_rel", split)]
    _write_report(out_dir / "report.txt", cfg,
                  [("scalars", scalars), ("residuals", residuals)],
                  grid=grid)
    print(f"lambda_eff = {_fmt(rationalized)}")
    return EXIT_OK


def _cmd_oracle(cfg: RunConfig, out_dir: Path) -> int:
    spec = SamplerSpec(samples=max(cfg.samples, 16), seed=cfg.seed)
    model = FiniteModel(n=cfg.size, e_values=cfg.e_values,
                        lambda4=cfg.lambda4, volume=cfg.volume,
                        sampler=spec)
    rows = []

    def record(name, est, *, gate=True):
        value, stderr = est.value, est.stderr
        if not gate:
            status = "recorded"
        elif stderr == 0.0:
            status = "pass" if abs(value) <= 1e-12 else "fail"
        else:
            status = "pass" if abs(value) <= 3.0 * stderr else "fail"
        rows.append((name, value, stderr, status))

    odd_pairs = [(0, 0)] if model.n == 1 else [(0, 1), (1, 0), (0, 0)]
    record("odd_moment", moment(model, odd_pairs))
    if model.n == 1:
        record("moment_power2", moment(model, [(0, 0), (0, 0)]),
               gate=False)
    else:
        record("pair_moment", moment(model, [(0, 1), (1, 0)]), gate=False)
        record("ward_residual", ward_residual(model, 0, 1))
        record("sd2_residual", sd2_residual(model, 0, 1))
    _write_csv(out_dir / "oracle.csv",
               ["check", "value", "stderr", "status"], rows)
    scalars = [("size", model.n), ("lambda4", model.lambda4),
               ("volume", model.volume), ("samples", spec.samples)]
    flags = [(name, status != "fail") for name, _, _, status in rows]
    _write_report(out_dir / "report.txt", cfg,
                  [("scalars", scalars), ("invariants", flags)])
    failed = [name for name, _, _, status in rows if status == "fail"]
    for name, value, stderr, status in rows:
        print(f"{name}: {status} ({_fmt(value)} +- {_fmt(stderr)})")
    return EXIT_INVARIANT if failed else EXIT_OK


def _sweep_task(task):
    """One sweep point; returns a row tuple or ("fail", lam, message)."""
    lam, nodes, lambda_cut = task
    try:
        params = ModelParams(coupling=lam, lambda_cut=lambda_cut,
                             allow_unverified=True)
        grid = build_grid(nodes, lambda_cut)
        g, report = solve_fixed_point(params, grid)
        eff = lambda_eff(g, report.slope_excess, params)
        defect = symmetry_defect(build_two_point_field(g, params))
    except ConvergenceError as exc:
        return ("fail", lam, str(exc))
    return (lam, report.slope_excess, report.z_surrogate,
            eff / lam if lam else 1.0, defect, report.iterations)


def _cmd_sweep(cfg: RunConfig, out_dir: Path) -> int:
    lams = np.geomspace(cfg.lambda_min, cfg.lambda_max, cfg.points)
    if lams[-1] > 1.0 / math.pi + 1e-15:
        print("warning: sweep extends beyond 1/pi; the two-point "
              "symmetry is unverified there", file=sys.stderr)
    tasks = [(float(lam), cfg.nodes, cfg.lambda_cut) for lam in lams]
    workers = cfg.workers or min(len(tasks), os.cpu_count() or 1, 8)
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_sweep_task, tasks))
    else:
        results = [_sweep_task(t) for t in tasks]
    for res in results:
        if res[0] == "fail":
            raise ConvergenceError(
                f"sweep point coupling={res[1]:g} failed: {res[2]}")
    _write_csv(out_dir / "sweep.csv",
               ["coupling", "slope_excess", "z_surrogate",
                "lambda_eff_ratio", "symmetry_defect", "iterations"],
               results)
    scalars = [("points", cfg.points),
               ("lambda_min", cfg.lambda_min),
               ("lambda_max", cfg.lambda_max),
               ("nodes", cfg.nodes)]
    _write_report(out_dir / "report.txt", cfg, [("scalars", scalars)])
    return EXIT_OK


def _cmd_verify(cfg: RunConfig, out_dir: Path) -> int:
    params, grid, g, report = _solve(cfg)
    hilbert = hilbert_matrix(grid)
    checks = []

    def add(name, defect, threshold):
        checks.append((name, float(defect), threshold,
                       "pass" if float(defect) <= threshold else "fail"))

    add("addition_theorem",
        check_addition_theorem(g, params, seed=cfg.seed), 1.0e-9)
    add("pair_product_identity",
        max(abs(check_bijk_identity(*t)) for t in _TRIPLES_BIJK), 1.0e-12)
    angle = SampledFunction(grid, boundary_angle(g, params,
                                                 hilbert=hilbert), 0.0)
    first, second = check_tricomi(angle)
    add("finite_transform_first", first, 1.0e-5)
    add("finite_transform_second", second, 1.0e-5)
    add("ward_four_point",
        check_ward_four_point(g, params, 0.5, 2.0), 1.0e-5)
    add("master_equation_rel",
        residual_master_Ta(g, params, hilbert=hilbert, relative=True),
        1.0e-3)
    defect = symmetry_defect(build_two_point_field(g, params,
                                                   hilbert=hilbert))
    if params.unverified_regime:
        checks.append(("two_point_symmetry", defect, math.nan, "recorded"))
    else:
        add("two_point_symmetry", defect, 1.0e-3)
    _write_csv(out_dir / "verify.csv",
               ["check", "defect", "threshold", "status"], checks)
    flags = [(name, status != "fail") for name, _, _, status in checks]
    _write_report(out_dir / "report.txt", cfg,
                  [("residuals", [(n, d) for n, d, _, _ in checks]),
                   ("invariants", flags)], grid=grid)
    failed = [name for name, _, _, status in checks if status == "fail"]
    for name, defect, threshold, status in checks:
        print(f"{name}: {status} (defect {_fmt(defect)}, "
              f"threshold {_fmt(threshold)})")
    return EXIT_INVARIANT if failed else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
