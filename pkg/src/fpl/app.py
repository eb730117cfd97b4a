"""Command-line front end: precompute | run | verify | analyze.

Configs are INI-style key/value files with sections (see parse_config).
Exit codes: 0 success, 2 usage error, 3 numerical failure, 4 stability halt.
The weight cache honors FPL_CACHE_DIR.
"""

import argparse
import configparser
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, suites
from .collision import CollisionWorkspace, CutoffFunction
from .dynamics import (
    LandauSolver,
    SolverConfig,
    bimaxwellian_field,
    maxwellian_initial,
    perturbed_maxwellian_field,
)
from .errors import NumericalError, StabilityError, UsageError
from .lattice import GridSpec, choose_domain
from .persist import CsvSink, Manifest, read_diagnostics_csv, save_snapshot
from .weights import build_table, load_table, save_table

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3
EXIT_STABILITY = 4


def _get(cp, section, key, default=None):
    if cp.has_option(section, key):
        return cp.get(section, key)
    return default


def _get_float(cp, section, key, default=None):
    raw = _get(cp, section, key)
    if raw is None:
        return default
    try:
        return float(raw)
    except ValueError:
        raise UsageError(f"[{section}] {key} = {raw!r} is not a number") from None


def _get_flag(cp, section, key, default):
    raw = _get(cp, section, key)
    if raw is None:
        return default
    low = raw.strip().lower()
    if low in ("on", "true", "yes", "1"):
        return True
    if low in ("off", "false", "no", "0"):
        return False
    raise UsageError(f"[{section}] {key} = {raw!r} is not a flag")


def parse_config(path):
    """Parse an INI config into (SolverConfig, initial-condition spec dict)."""
    if not Path(path).is_file():
        raise UsageError(f"config file not found: {path}")
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.read(path)
    if not cp.has_section("grid"):
        raise UsageError(f"{path}: missing [grid] section")

    n_modes = int(_get_float(cp, "grid", "n_modes", 16))
    half_raw = _get(cp, "grid", "half_length", "auto")
    if half_raw.strip().lower() == "auto":
        half_length = choose_domain(
            rho0=_get_float(cp, "domain", "rho0", 1.0),
            T0=_get_float(cp, "domain", "temperature", 1.0),
            stretch_C=_get_float(cp, "domain", "stretch", 1.0),
            dilate_r=_get_float(cp, "domain", "dilate", 1.0),
            tail_tol=_get_float(cp, "domain", "tail_tol", 1e-8),
        )
    else:
        half_length = float(half_raw)

    lam = _get_float(cp, "kernel", "lambda", 1.0)
    if lam is None or not (0.0 <= lam <= 1.0):
        raise UsageError(
            f"lambda = {lam} rejected: soft potentials out of scope (need 0 <= lambda <= 1)"
        )
    trunc = _get(cp, "kernel", "trunc_radius", "auto")
    trunc_radius = None if trunc.strip().lower() == "auto" else float(trunc)
    quad = _get(cp, "kernel", "quad_points", "auto")
    quad_points = None if quad.strip().lower() == "auto" else int(quad)

    dt_raw = _get(cp, "time", "dt", "auto")
    dt = None if dt_raw.strip().lower() == "auto" else float(dt_raw)
    cutoff = CutoffFunction(
        mode=_get(cp, "solver", "cutoff", "identity"),
        delta_chi=_get_float(cp, "solver", "delta_chi", 0.1),
    )
    cfg = SolverConfig(
        lam=lam,
        n_modes=n_modes,
        half_length=half_length,
        t_final=_get_float(cp, "time", "t_final", 0.0),
        dt=dt,
        cutoff=cutoff,
        padding=_get_flag(cp, "solver", "padding", True),
        epsilon_stability=_get_float(cp, "solver", "epsilon_stability", 0.25),
        output_stride=int(_get_float(cp, "time", "output_stride", 10)),
        rng_seed=int(_get_float(cp, "solver", "rng_seed", 0)),
        trunc_radius=trunc_radius,
        quad_points=quad_points,
        check_conservation=_get_flag(cp, "solver", "check_conservation", True),
    )

    kind = _get(cp, "initial", "kind", "maxwellian").strip().lower()
    init = {"kind": kind}
    if kind == "maxwellian":
        init["rho"] = _get_float(cp, "initial", "rho", 1.0)
        init["temperature"] = _get_float(cp, "initial", "temperature", 1.0)
        init["velocity"] = tuple(
            float(x) for x in _get(cp, "initial", "velocity", "0 0 0").split()
        )
    elif kind == "bimaxwellian":
        init["rho"] = _get_float(cp, "initial", "rho", 1.0)
        init["temperature"] = _get_float(cp, "initial", "temperature", 0.5)
        init["shift"] = tuple(
            float(x) for x in _get(cp, "initial", "shift", "1 0 0").split()
        )
    elif kind == "perturbed":
        init["rho"] = _get_float(cp, "initial", "rho", 1.0)
        init["temperature"] = _get_float(cp, "initial", "temperature", 1.0)
        init["amplitude"] = _get_float(cp, "initial", "amplitude", 0.05)
    else:
        raise UsageError(f"unknown initial kind {kind!r}")
    return cfg, init


def initial_field(cfg: SolverConfig, init: dict):
    grid = cfg.grid()
    kind = init["kind"]
    if kind == "maxwellian":
        return maxwellian_initial(grid, init["rho"], init["velocity"], init["temperature"])
    if kind == "bimaxwellian":
        return bimaxwellian_field(grid, init["rho"], init["shift"], init["temperature"])
    return perturbed_maxwellian_field(
        grid, init["rho"], init["temperature"], init["amplitude"], cfg.rng_seed
    )


def cache_dir(args) -> Path:
    if args.out:
        base = Path(args.out)
    else:
        base = Path(os.environ.get("FPL_CACHE_DIR", "fpl_cache"))
    base.mkdir(parents=True, exist_ok=True)
    return base


def table_cache_path(base: Path, grid, params) -> Path:
    return base / (
        f"fplw_N{grid.n_modes}_L{grid.half_length:g}_lam{params.lam:g}"
        f"_R{params.trunc_radius:g}_q{params.quad_points}.fplw"
    )


def load_or_build_table(cfg: SolverConfig, cache: Path, manifest=None):
    eval_grid = cfg.grid().padded() if cfg.padding else cfg.grid()
    params = cfg.kernel_params()
    path = table_cache_path(cache, eval_grid, params)
    if path.is_file():
        table = load_table(path, expect_grid=eval_grid, expect_params=params)
        if manifest:
            manifest.append("table", cache="hit", path=str(path), checksum=table.checksum)
        return table, True
    table = build_table(eval_grid, params)
    save_table(table, path)
    if manifest:
        manifest.append("table", cache="built", path=str(path), checksum=table.checksum)
    return table, False


def cmd_precompute(args) -> int:
    cfg, _ = parse_config(args.config)
    out = cache_dir(args)
    manifest = Manifest(out / "manifest.jsonl")
    manifest.append(
        "start", command="precompute", version=__version__, config=str(args.config)
    )
    table, hit = load_or_build_table(cfg, out, manifest)
    print(f"weight table {'cache hit' if hit else 'built'}: checksum {table.checksum}")
    manifest.append("end", exit_status=EXIT_OK)
    return EXIT_OK


def cmd_run(args) -> int:
    cfg, init = parse_config(args.config)
    out = Path(args.out or "fpl_run")
    out.mkdir(parents=True, exist_ok=True)
    manifest = Manifest(out / "manifest.jsonl")
    manifest.append(
        "start",
        command="run",
        version=__version__,
        config_path=str(args.config),
        config={
            "lambda": cfg.lam,
            "n_modes": cfg.n_modes,
            "half_length": cfg.half_length,
            "dt": cfg.dt,
            "t_final": cfg.t_final,
            "padding": cfg.padding,
            "epsilon_stability": cfg.epsilon_stability,
            "output_stride": cfg.output_stride,
            "cutoff": cfg.cutoff.mode,
            "rng_seed": cfg.rng_seed,
            "initial": init,
        },
    )
    cache = Path(os.environ.get("FPL_CACHE_DIR", out))
    cache.mkdir(parents=True, exist_ok=True)
    table, _ = load_or_build_table(cfg, cache, manifest)
    solver = LandauSolver(cfg, table=table)
    g0 = initial_field(cfg, init)
    manifest.append("stepping", **solver.describe(g0))
    save_snapshot(out / "initial.fpls", g0, 0.0)
    sink = CsvSink(out / "diagnostics.csv")
    t0 = time.time()
    try:
        final = solver.run(g0, sink)
    except StabilityError as exc:
        sink.close()
        manifest.append(
            "end", exit_status=EXIT_STABILITY, halt_time=exc.t, ratio=exc.ratio,
            error=str(exc),
        )
        print(f"stability halt: {exc}", file=sys.stderr)
        return EXIT_STABILITY
    except NumericalError as exc:
        sink.close()
        manifest.append("end", exit_status=EXIT_NUMERICAL, error=str(exc))
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    sink.close()
    save_snapshot(out / "final.fpls", final.g, final.t)
    drift = suites.moment_drift(out / "diagnostics.csv")
    print(
        f"run complete: t={final.t:.6g}, {final.step_index} steps, "
        f"{sink.count} records, wall {time.time() - t0:.1f}s"
    )
    print(f"max relative moment drift: {drift:.3e}")
    manifest.append(
        "end",
        exit_status=EXIT_OK,
        t_final=final.t,
        steps=final.step_index,
        records=sink.count,
        max_moment_drift=drift,
        artifacts={
            "diagnostics": str(out / "diagnostics.csv"),
            "initial": str(out / "initial.fpls"),
            "final": str(out / "final.fpls"),
        },
    )
    return EXIT_OK


def cmd_verify(args) -> int:
    name = args.suite or ""
    if name in ("equilibrium",):
        name = "maxwellian"
    if name not in suites.SUITES:
        print(
            f"unknown suite {name!r}; available: {', '.join(sorted(suites.SUITES))}",
            file=sys.stderr,
        )
        return EXIT_USAGE
    results = suites.SUITES[name](seed=args.seed)
    width = max(len(r.name) for r in results)
    ok = True
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"  {r.name:<{width}}  {status}  {r.detail}")
        ok = ok and r.passed
    print(f"suite {name}: {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_NUMERICAL


def cmd_analyze(args) -> int:
    run_dir = Path(args.run_dir)
    csv_path = run_dir / "diagnostics.csv" if run_dir.is_dir() else run_dir
    _, cols = read_diagnostics_csv(csv_path)
    t = cols["t"]
    dist = cols["dist_to_eq"]
    half_life = suites.relaxation_half_life(t, dist)
    violations = suites.entropy_violations(cols["entropy"])
    drift = suites.moment_drift(csv_path)
    print(f"records: {len(t)}, time span [{t[0]:g}, {t[-1]:g}]")
    if half_life is not None and math.isfinite(half_life):
        print(f"relaxation half-life of ||g - M_eq||_2: {half_life:.6g}")
    else:
        print("relaxation half-life: not measurable (no decay)")
    print(f"entropy monotonicity violations (> 1e-8): {violations}")
    print(f"max relative moment drift: {drift:.3e}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="fpl",
        description="Conservative spectral solver for the Fokker-Planck-Landau equation",
    )
    parser.add_argument("--version", action="version", version=f"fpl {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_pre = sub.add_parser("precompute", help="build and cache the weight table")
    p_pre.add_argument("--config", required=True)
    p_pre.add_argument("--out", default=None, help="cache directory")

    p_run = sub.add_parser("run", help="integrate the semi-discrete problem")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", default=None, help="run directory")

    p_ver = sub.add_parser("verify", help="run a named acceptance suite")
    p_ver.add_argument("--suite", required=True)
    p_ver.add_argument("--seed", type=int, default=0)

    p_ana = sub.add_parser("analyze", help="post-process a diagnostics CSV")
    p_ana.add_argument("run_dir", help="run directory or CSV path")

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK

    handler = {
        "precompute": cmd_precompute,
        "run": cmd_run,
        "verify": cmd_verify,
        "analyze": cmd_analyze,
    }[args.command]
    try:
        return handler(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except StabilityError as exc:
        print(f"stability halt: {exc}", file=sys.stderr)
        return EXIT_STABILITY
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
