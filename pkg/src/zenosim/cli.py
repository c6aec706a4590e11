"""Command-line front door: subcommands, config ingestion, file emission.

Every subcommand takes ``--config`` (JSON), repeatable ``--set KEY=VALUE``
overrides, ``--out``, ``--threads``, ``--seed``, and ``--verbose``; the
resolved config is echoed before any computation.  Exit codes: 0 on success,
1 on computation failure (structured error on stderr), 2 on usage or config
errors.  When no output directory is given, files land under the directory
named by the ``ZENOSIM_OUT`` environment variable (default: current
directory), in a subdirectory named after the subcommand.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .bloch import eigenvalue_sweep
from .core import trace_distance
from .dynamics import IntegratorOptions, evolve
from .experiments import (
    ConfigError,
    ExperimentConfig,
    _f_of,
    _json_ready,
    _reduced_operators,
    _zeno_generator,
    load_config,
    run_runtime_scaling,
    run_spectrum,
    run_zeno_grover,
    write_csv,
    write_manifest,
)
from .grover import gap, two_level_exact
from .oscillator import OscillatorBath, decay_sweep_summary, evolve_kernel, evolve_local

__all__ = ["build_parser", "parse_and_dispatch", "main"]

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
ENV_OUT = "ZENOSIM_OUT"

_SUBCOMMANDS = {
    "spectrum": "eigenvalue tables versus f and versus t under the schedule",
    "schedule": "control-parameter table of the configured sweep",
    "evolve": "time-resolved open (or closed) sweep of one problem",
    "bloch": "damped-qubit sector eigenvalues versus rate/frequency ratio",
    "oscillator": "memory-kernel versus time-local oscillator comparison",
    "zeno-sweep": "final success versus measurement rate of the marked state",
    "scaling": "run-time power-law fits, closed sweeps and open mixing",
    "validate": "check a config file and echo the resolved values",
}

# subcommand -> experiment id recorded in the config
_EXPERIMENT_ID = {"zeno-sweep": "zeno"}


def _run_schedule(config: ExperimentConfig, out_dir: Path, threads=None) -> dict:
    """Table of f(t), the closed-form gap, and the local adiabaticity ratio."""
    start = time.perf_counter()
    problem = config.search_space()
    sched = config.make_schedule(problem)
    t = np.linspace(0.0, sched.total_time, config["spectrum.t_points"])
    f = np.clip(np.asarray(sched.f(t), dtype=float), 0.0, 1.0)
    fdot = np.asarray(sched.fdot(t), dtype=float)
    de = np.asarray(gap(problem, f), dtype=float)
    eps_local = problem.omega * np.abs(fdot) / de**2
    header = ["t", "f", "gap", "fdot", "epsilon_local"]
    rows = np.column_stack([t, f, de, fdot, eps_local])
    meta = {
        "kind": sched.kind,
        "total_time": float(sched.total_time),
        "epsilon": config["schedule.epsilon"],
        "epsilon_local_max": float(eps_local.max()),
        "size": problem.size,
    }
    write_csv(out_dir / "schedule.csv", header, rows)
    write_manifest(
        out_dir,
        config=config,
        outputs=["schedule.csv"],
        elapsed=time.perf_counter() - start,
        meta=meta,
    )
    return {"meta": meta, "outputs": [str(out_dir / "schedule.csv")]}


def _record_rows(problem, sched, times, states):
    rows = []
    for t, rho in zip(times, states):
        f = _f_of(sched, float(t))
        _, vecs = np.linalg.eigh(two_level_exact(problem, f))
        pops = np.real(np.einsum("ia,ij,ja->a", vecs.conj(), rho, vecs))
        rows.append(
            [
                float(t),
                f,
                float(np.real(rho[0, 0])),
                float(np.real(rho[1, 1])),
                float(pops[0]),
                float(pops[1]),
                float(np.real(np.trace(rho @ rho))),
                float(trace_distance(rho, 0.5 * np.eye(2))),
            ]
        )
    return rows


def _run_evolution(config: ExperimentConfig, out_dir: Path, threads=None) -> dict:
    """Time-resolved sweep at the configured bath rate (in-plane reduction)."""
    start = time.perf_counter()
    problem = config.search_space()
    sched = config.make_schedule(problem)
    gamma = config["bath.gamma0"]
    records = config["evolve.records"]
    _, _, s = _reduced_operators(problem)
    rho0 = np.outer(s, s.conj())
    if config.backend == "coarse":
        raise ConfigError(
            "config key 'backend': the coarse stepper records no continuous "
            "trajectory; use lindblad, redfield, or singular"
        )
    gen = _zeno_generator(config, problem, sched, gamma, dephase_start=False)
    traj = evolve(
        gen,
        rho0,
        sched.total_time,
        options=IntegratorOptions(records=records, keep_states=True),
    )
    header = ["t", "f", "pop_w", "pop_perp", "pop_ground", "pop_excited", "purity", "dist_half"]
    rows = _record_rows(problem, sched, traj.columns["t"], traj.states)
    meta = {
        "size": problem.size,
        "gamma": gamma,
        "backend": config.backend,
        "total_time": float(sched.total_time),
        "final_success": rows[-1][2],
    }
    write_csv(out_dir / "evolve.csv", header, rows)
    write_manifest(
        out_dir,
        config=config,
        outputs=["evolve.csv"],
        elapsed=time.perf_counter() - start,
        meta=meta,
    )
    return {"meta": meta, "outputs": [str(out_dir / "evolve.csv")]}


def _run_bloch(config: ExperimentConfig, out_dir: Path, threads=None) -> dict:
    """Eigenvalue sweep of the damped-qubit sector matrix."""
    start = time.perf_counter()
    ratios = np.geomspace(
        config["bloch.ratio_min"], config["bloch.ratio_max"], config["bloch.points"]
    )
    table = eigenvalue_sweep(config["bloch.variant"], ratios, omega=config.omega)
    header = [
        "ratio",
        "re_lambda0",
        "re_lambda_plus",
        "re_lambda_minus",
        "im_lambda_plus",
        "im_lambda_minus",
    ]
    meta = {
        "variant": config["bloch.variant"],
        "omega": config.omega,
        "max_real_part": float(np.max(table[:, 1:4])),
    }
    write_csv(out_dir / "bloch_eigenvalues.csv", header, table)
    write_manifest(
        out_dir,
        config=config,
        outputs=["bloch_eigenvalues.csv"],
        elapsed=time.perf_counter() - start,
        meta=meta,
    )
    return {"meta": meta, "outputs": [str(out_dir / "bloch_eigenvalues.csv")]}


def _run_oscillator(config: ExperimentConfig, out_dir: Path, threads=None) -> dict:
    """Kernel versus time-local trajectories plus the slow-decay summary."""
    start = time.perf_counter()
    alpha = config["oscillator.alpha"]
    beta = config["oscillator.beta"]
    horizon = config["oscillator.horizon"]
    points = config["oscillator.points"]
    bath = OscillatorBath(2.0 * alpha, beta, omega=1.0)
    dt = 0.002
    stride = max(1, int(np.ceil(horizon / dt / points)))
    kernel = evolve_kernel(bath, 1.0, 0.0, horizon, dt=dt, stride=stride)
    local = evolve_local(bath, 1.0, 0.0, horizon, t_eval=kernel.tau, rtol=1e-11, atol=1e-13)
    header = ["tau", "x_local", "p_local", "x_kernel", "p_kernel"]
    rows = np.column_stack([kernel.tau, local.x, local.p, kernel.x, kernel.p])
    decay = decay_sweep_summary(config["oscillator.curve_alphas"])
    meta = {
        "alpha": alpha,
        "beta": beta,
        "horizon": horizon,
        "max_x_deviation": float(np.max(np.abs(kernel.x - local.x))),
    }
    write_csv(out_dir / "oscillator_traj.csv", header, rows)
    decay_path = out_dir / "oscillator_decay.json"
    decay_path.write_text(
        json.dumps(_json_ready(decay), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
        newline="\n",
    )
    write_manifest(
        out_dir,
        config=config,
        outputs=["oscillator_traj.csv", "oscillator_decay.json"],
        elapsed=time.perf_counter() - start,
        meta=meta,
    )
    return {
        "meta": meta,
        "outputs": [str(out_dir / "oscillator_traj.csv"), str(decay_path)],
    }


_DISPATCH = {
    "spectrum": run_spectrum,
    "schedule": _run_schedule,
    "evolve": _run_evolution,
    "bloch": _run_bloch,
    "oscillator": _run_oscillator,
    "zeno-sweep": run_zeno_grover,
    "scaling": run_runtime_scaling,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zenosim",
        description="Adiabatic search sweeps with measurement-induced freezing: "
        "tables, sweeps, and scaling fits written as CSV plus manifest.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND")
    for name, blurb in _SUBCOMMANDS.items():
        p = sub.add_parser(name, help=blurb, description=blurb)
        p.add_argument("--config", type=Path, default=None, help="JSON config file")
        p.add_argument(
            "--out", type=Path, default=None, help="output directory (created if missing)"
        )
        p.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="dotted-key override applied after the config file (repeatable)",
        )
        p.add_argument(
            "--threads",
            type=int,
            default=None,
            help="worker threads for sweep points (default: machine parallelism)",
        )
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--verbose", action="store_true", help="print run metadata")
        p.add_argument(
            "--no-plot", action="store_true", help="skip rendering the PNG for this run"
        )
    return parser


def _structured_error(kind: str, message: str, **extra) -> None:
    payload = {"error": {"type": kind, "message": message, **extra}}
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)


def parse_and_dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        print("error: a subcommand is required", file=sys.stderr)
        return EXIT_USAGE

    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    experiment = _EXPERIMENT_ID.get(args.command, args.command)
    if args.command != "validate":
        overrides.append(f"experiment={experiment}")
    try:
        config = load_config(args.config, overrides)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    print(json.dumps(config.as_dict(), indent=2, sort_keys=True))
    if args.command == "validate":
        print("config ok")
        return EXIT_OK

    if args.out is not None:
        out_dir = args.out
    elif config.out is not None:
        out_dir = Path(config.out)
    else:
        out_dir = Path(os.environ.get(ENV_OUT, ".")) / args.command
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    try:
        report = _DISPATCH[args.command](config, out_dir, threads=args.threads)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:
        _structured_error(type(exc).__name__, str(exc))
        return EXIT_FAILURE

    failures = report.get("meta", {}).get("failures") or []
    if failures:
        _structured_error("PointFailures", "some sweep points failed", failures=failures)
        return EXIT_FAILURE

    if not args.no_plot:
        from .plots import RENDERERS

        try:
            figure = RENDERERS[args.command](out_dir)
        except Exception as exc:
            _structured_error(type(exc).__name__, f"figure rendering failed: {exc}")
            return EXIT_FAILURE
        if args.verbose:
            print(f"figure: {figure}")
    if args.verbose:
        print(json.dumps({"meta": _json_ready(report.get("meta", {}))}, indent=2, sort_keys=True))
    for name in report.get("outputs", []):
        print(f"wrote {name}")
    return EXIT_OK


def main() -> None:
    sys.exit(parse_and_dispatch())


if __name__ == "__main__":
    main()
