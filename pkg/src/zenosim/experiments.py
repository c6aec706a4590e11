"""Experiment drivers: spectrum tables, Zeno sweeps, and run-time scaling fits.

Drivers consume a validated :class:`ExperimentConfig`, compute their tables
in memory, and, when handed an output directory, write CSV files plus a JSON
manifest embedding the resolved config and the library version.  Table bytes
are deterministic for a fixed config and seed; the manifest also records wall
time and is the one provenance file exempt from byte stability.
"""

from __future__ import annotations

import copy
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .config import MAX_QUBITS
from .core import trace_distance
from .dynamics import (
    BathModel,
    IntegratorOptions,
    LindbladGenerator,
    RedfieldGenerator,
    coarse_grained_step,
    evolve,
    propagate_piecewise,
    singular_coupling_generator,
    step_unitary,
)
from .grover import (
    GroverProblem,
    grover_hamiltonian,
    minimum_gap,
    schedule_adaptive,
    schedule_constant,
    two_level_exact,
)

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "ScalingFit",
    "load_config",
    "run_spectrum",
    "run_zeno_grover",
    "run_runtime_scaling",
    "write_csv",
    "write_manifest",
]

EXPERIMENTS = ("spectrum", "schedule", "evolve", "bloch", "oscillator", "zeno", "scaling")
BACKENDS = ("lindblad", "coarse", "redfield", "singular")

_DEFAULTS: dict = {
    "experiment": "spectrum",
    "n": 8,
    "size": None,
    "omega": 1.0,
    "marked": 0,
    "seed": 0,
    "backend": "lindblad",
    "out": None,
    "max_trajectories": 4096,
    "schedule": {"kind": "adaptive", "epsilon": 0.02, "total_time": None, "points": None},
    "bath": {"gamma0": 1.0, "tau_env": 0.05, "coupling": 1.0},
    "sweep": {
        "n_values": None,
        "gamma_values": None,
        "epsilon_values": None,
        "time_values": None,
    },
    "spectrum": {"f_points": 401, "t_points": 401, "n_states": None},
    "zeno": {"records": 201, "compare_dephasing": True, "coarse_steps": 2000},
    "scaling": {
        "gamma_over_omega": 2.0,
        "mix_threshold": 0.05,
        "success_target": 0.99,
        "bisection_steps": 30,
    },
    "bloch": {"variant": "dephasing_z", "ratio_min": 0.01, "ratio_max": 1000.0, "points": 40},
    "oscillator": {
        "alpha": 10.0,
        "beta": 5.0,
        "horizon": 50.0,
        "points": 2001,
        "curve_alphas": [8.0, 18.0, 100.0],
    },
    "evolve": {"records": 401},
}


class ConfigError(ValueError):
    """Invalid experiment configuration: bad file, unknown key, or bad value."""


def _fail(key: str, message: str, value) -> None:
    raise ConfigError(f"config key '{key}': {message} (got {value!r})")


def _require_int(key: str, value, lo: int | None = None, hi: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        _fail(key, "must be an integer", value)
    out = int(value)
    if lo is not None and out < lo:
        _fail(key, f"must be >= {lo}", value)
    if hi is not None and out > hi:
        _fail(key, f"must be <= {hi}", value)
    return out


def _require_float(
    key: str, value, lo: float | None = None, *, strict: bool = False
) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float, np.integer, np.floating)):
        _fail(key, "must be a number", value)
    out = float(value)
    if not np.isfinite(out):
        _fail(key, "must be finite", value)
    if lo is not None and (out <= lo if strict else out < lo):
        _fail(key, f"must be {'>' if strict else '>='} {lo}", value)
    return out


def _require_choice(key: str, value, choices) -> str:
    if value not in choices:
        _fail(key, "must be one of " + ", ".join(map(repr, choices)), value)
    return value


def _require_bool(key: str, value) -> bool:
    if not isinstance(value, (bool, np.bool_)):
        _fail(key, "must be a boolean", value)
    return bool(value)


def _require_list(key: str, value, item_check):
    if not isinstance(value, (list, tuple)) or len(value) == 0:
        _fail(key, "must be a non-empty list", value)
    return [item_check(f"{key}[{i}]", v) for i, v in enumerate(value)]


def _validate(data: dict) -> None:
    data["experiment"] = _require_choice("experiment", data["experiment"], EXPERIMENTS)
    data["n"] = _require_int("n", data["n"], 1, MAX_QUBITS)
    if data["size"] is not None:
        data["size"] = _require_int("size", data["size"], 2)
    data["omega"] = _require_float("omega", data["omega"], 0.0, strict=True)
    data["marked"] = _require_int("marked", data["marked"], 0)
    if data["marked"] >= 2 ** data["n"]:
        _fail("marked", f"must be < 2**n = {2 ** data['n']}", data["marked"])
    data["seed"] = _require_int("seed", data["seed"], 0)
    data["backend"] = _require_choice("backend", data["backend"], BACKENDS)
    if data["out"] is not None and not isinstance(data["out"], str):
        _fail("out", "must be a path string", data["out"])
    data["max_trajectories"] = _require_int("max_trajectories", data["max_trajectories"], 1)

    sch = data["schedule"]
    sch["kind"] = _require_choice("schedule.kind", sch["kind"], ("adaptive", "constant"))
    sch["epsilon"] = _require_float("schedule.epsilon", sch["epsilon"], 0.0, strict=True)
    if sch["total_time"] is not None:
        sch["total_time"] = _require_float(
            "schedule.total_time", sch["total_time"], 0.0, strict=True
        )
    if sch["points"] is not None:
        sch["points"] = _require_int("schedule.points", sch["points"], 3)

    bath = data["bath"]
    bath["gamma0"] = _require_float("bath.gamma0", bath["gamma0"], 0.0)
    bath["tau_env"] = _require_float("bath.tau_env", bath["tau_env"], 0.0)
    bath["coupling"] = _require_float("bath.coupling", bath["coupling"], 0.0)

    sweep = data["sweep"]
    if sweep["n_values"] is not None:
        sweep["n_values"] = _require_list(
            "sweep.n_values", sweep["n_values"], lambda k, v: _require_int(k, v, 1, MAX_QUBITS)
        )
    if sweep["gamma_values"] is not None:
        sweep["gamma_values"] = _require_list(
            "sweep.gamma_values", sweep["gamma_values"], lambda k, v: _require_float(k, v, 0.0)
        )
    if sweep["epsilon_values"] is not None:
        sweep["epsilon_values"] = _require_list(
            "sweep.epsilon_values",
            sweep["epsilon_values"],
            lambda k, v: _require_float(k, v, 0.0, strict=True),
        )
    if sweep["time_values"] is not None:
        sweep["time_values"] = _require_list(
            "sweep.time_values",
            sweep["time_values"],
            lambda k, v: _require_float(k, v, 0.0, strict=True),
        )
    active = [len(v) for v in sweep.values() if v is not None]
    total = int(np.prod(active)) if active else 1
    if total > data["max_trajectories"]:
        _fail(
            "sweep",
            f"grid of {total} points exceeds max_trajectories={data['max_trajectories']}",
            active,
        )

    spec = data["spectrum"]
    spec["f_points"] = _require_int("spectrum.f_points", spec["f_points"], 2)
    spec["t_points"] = _require_int("spectrum.t_points", spec["t_points"], 2)
    if spec["n_states"] is not None:
        spec["n_states"] = _require_int("spectrum.n_states", spec["n_states"], 1)

    zen = data["zeno"]
    zen["records"] = _require_int("zeno.records", zen["records"], 2)
    zen["compare_dephasing"] = _require_bool("zeno.compare_dephasing", zen["compare_dephasing"])
    zen["coarse_steps"] = _require_int("zeno.coarse_steps", zen["coarse_steps"], 10)

    sca = data["scaling"]
    sca["gamma_over_omega"] = _require_float(
        "scaling.gamma_over_omega", sca["gamma_over_omega"], 0.0, strict=True
    )
    sca["mix_threshold"] = _require_float("scaling.mix_threshold", sca["mix_threshold"], 0.0, strict=True)
    if sca["mix_threshold"] >= 1.0:
        _fail("scaling.mix_threshold", "must be < 1", sca["mix_threshold"])
    sca["success_target"] = _require_float(
        "scaling.success_target", sca["success_target"], 0.0, strict=True
    )
    if sca["success_target"] >= 1.0:
        _fail("scaling.success_target", "must be < 1", sca["success_target"])
    sca["bisection_steps"] = _require_int("scaling.bisection_steps", sca["bisection_steps"], 4)

    blo = data["bloch"]
    blo["variant"] = _require_choice(
        "bloch.variant", blo["variant"], ("dephasing_z", "two_projectors", "relaxation")
    )
    blo["ratio_min"] = _require_float("bloch.ratio_min", blo["ratio_min"], 0.0, strict=True)
    blo["ratio_max"] = _require_float("bloch.ratio_max", blo["ratio_max"], 0.0, strict=True)
    if blo["ratio_max"] <= blo["ratio_min"]:
        _fail("bloch.ratio_max", f"must be > ratio_min = {blo['ratio_min']}", blo["ratio_max"])
    blo["points"] = _require_int("bloch.points", blo["points"], 2)

    osc = data["oscillator"]
    osc["alpha"] = _require_float("oscillator.alpha", osc["alpha"], 0.0, strict=True)
    osc["beta"] = _require_float("oscillator.beta", osc["beta"], 0.0, strict=True)
    osc["horizon"] = _require_float("oscillator.horizon", osc["horizon"], 0.0, strict=True)
    osc["points"] = _require_int("oscillator.points", osc["points"], 2)
    osc["curve_alphas"] = _require_list(
        "oscillator.curve_alphas",
        osc["curve_alphas"],
        lambda k, v: _require_float(k, v, 2.0, strict=True),
    )

    data["evolve"]["records"] = _require_int("evolve.records", data["evolve"]["records"], 2)


def _apply(base: dict, incoming: dict, prefix: str) -> None:
    for key, value in incoming.items():
        path = f"{prefix}{key}"
        if not isinstance(key, str) or key not in base:
            raise ConfigError(f"unknown config key '{path}'")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(
                    f"config key '{path}': expected a JSON object (got {value!r})"
                )
            _apply(base[key], value, path + ".")
        else:
            base[key] = value


def _parse_override(item: str) -> tuple[str, object]:
    if "=" not in item:
        raise ConfigError(f"override '{item}' is not of the form KEY=VALUE")
    key, text = item.split("=", 1)
    key = key.strip()
    if not key:
        raise ConfigError(f"override '{item}' has an empty key")
    try:
        value = json.loads(text)
    except json.JSONDecodeError:
        value = text
    return key, value


def _set_dotted(data: dict, key: str, value) -> None:
    parts = key.split(".")
    node = data
    for part in parts[:-1]:
        if part not in node or not isinstance(node[part], dict):
            raise ConfigError(f"unknown config key '{key}'")
        node = node[part]
    leaf = parts[-1]
    if leaf not in node:
        raise ConfigError(f"unknown config key '{key}'")
    if isinstance(node[leaf], dict):
        raise ConfigError(f"config key '{key}': cannot assign a value to a section")
    node[leaf] = value


@dataclass(frozen=True)
class _SizedProblem:
    """Stand-in for :class:`GroverProblem` at an arbitrary search-space size.

    The closed-form gap, both schedules, and the exact two-level block only
    read ``size`` and ``omega``, so reduced-model tables work for any N.
    """

    size: int
    omega: float = 1.0


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved and validated experiment description.

    Construct via :func:`load_config` (file plus dotted overrides) or
    :meth:`from_dict`.  ``data`` holds the resolved nested mapping; dotted
    access is available through ``config["schedule.epsilon"]``.
    """

    data: dict

    @classmethod
    def from_dict(cls, mapping: dict | None = None, overrides=()) -> "ExperimentConfig":
        data = copy.deepcopy(_DEFAULTS)
        _apply(data, mapping or {}, "")
        for item in overrides:
            key, value = _parse_override(item)
            _set_dotted(data, key, value)
        _validate(data)
        return cls(data=data)

    def __getitem__(self, dotted: str):
        node = self.data
        for part in dotted.split("."):
            node = node[part]
        return node

    @property
    def experiment(self) -> str:
        return self.data["experiment"]

    @property
    def n(self) -> int:
        return self.data["n"]

    @property
    def size(self) -> int | None:
        return self.data["size"]

    @property
    def omega(self) -> float:
        return self.data["omega"]

    @property
    def marked(self) -> int:
        return self.data["marked"]

    @property
    def seed(self) -> int:
        return self.data["seed"]

    @property
    def backend(self) -> str:
        return self.data["backend"]

    @property
    def out(self) -> str | None:
        return self.data["out"]

    @property
    def max_trajectories(self) -> int:
        return self.data["max_trajectories"]

    def problem(self) -> GroverProblem:
        """Full search instance built from ``n``, ``omega``, ``marked``."""
        return GroverProblem(n=self.n, omega=self.omega, marked=self.marked)

    def search_space(self):
        """Problem object for reduced-model tables; honors an explicit size."""
        if self.size is not None:
            return _SizedProblem(size=self.size, omega=self.omega)
        return self.problem()

    def make_schedule(self, problem):
        """Schedule of the configured kind; a constant sweep with no explicit
        total time borrows the adaptive duration so the two are comparable."""
        sch = self.data["schedule"]
        if sch["kind"] == "adaptive":
            return schedule_adaptive(problem, sch["epsilon"], points=sch["points"])
        total = sch["total_time"]
        if total is None:
            total = schedule_adaptive(problem, sch["epsilon"], points=sch["points"]).total_time
        return schedule_constant(problem, total, points=sch["points"])

    def as_dict(self) -> dict:
        return copy.deepcopy(self.data)


def load_config(path=None, overrides=()) -> ExperimentConfig:
    """Resolve defaults, an optional JSON file, and dotted overrides, in order.

    Parameters
    ----------
    path : str or Path, optional
        JSON file whose keys override the defaults.  Unknown keys are
        rejected; parse errors report line and column.
    overrides : sequence of str
        ``KEY=VALUE`` pairs applied last; values are parsed as JSON with a
        plain-string fallback, keys use dotted paths (``bath.gamma0``).

    Returns
    -------
    ExperimentConfig

    Raises
    ------
    ConfigError
        On parse errors, unknown keys, or values outside their constraints;
        the message names the offending key.
    """
    raw: dict = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from None
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(
                f"config parse error in {path} at line {exc.lineno}, "
                f"column {exc.colno}: {exc.msg}"
            ) from None
        if not isinstance(raw, dict):
            raise ConfigError("config root must be a JSON object")
    return ExperimentConfig.from_dict(raw, overrides)


@dataclass(frozen=True)
class ScalingFit:
    """Power law ``y = amplitude * x**exponent`` from a log-log least square."""

    x: np.ndarray
    y: np.ndarray
    exponent: float
    stderr: float
    amplitude: float

    @classmethod
    def fit(cls, x, y) -> "ScalingFit":
        """Fit ``>= 4`` strictly positive points; stderr from the fit covariance."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.ndim != 1 or x.shape != y.shape:
            raise ValueError("x and y must be one-dimensional and equal length")
        if x.size < 4:
            raise ValueError("power-law fit needs at least 4 points")
        if np.any(x <= 0.0) or np.any(y <= 0.0):
            raise ValueError("power-law fit needs positive data")
        coef, cov = np.polyfit(np.log(x), np.log(y), 1, cov=True)
        return cls(
            x=x,
            y=y,
            exponent=float(coef[0]),
            stderr=float(np.sqrt(cov[0, 0])),
            amplitude=float(np.exp(coef[1])),
        )

    def as_dict(self) -> dict:
        return {
            "exponent": self.exponent,
            "stderr": self.stderr,
            "amplitude": self.amplitude,
        }


def _format_cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def write_csv(path, header, rows) -> Path:
    """Write a table: comma separated, '.' decimal, header row, LF endings,
    floats at 17 significant digits (round-trip exact)."""
    path = Path(path)
    lines = [",".join(header)]
    lines.extend(",".join(_format_cell(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    return path


def _json_ready(obj):
    if isinstance(obj, dict):
        return {str(k): _json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_ready(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return [_json_ready(v) for v in obj.tolist()]
    return obj


def write_manifest(out_dir, *, config: ExperimentConfig, outputs, elapsed, meta=None) -> Path:
    """Provenance record: resolved config, library version, outputs, wall time."""
    payload = {
        "config": config.as_dict(),
        "library": {"name": "zenosim", "version": __version__},
        "outputs": sorted(str(name) for name in outputs),
        "wall_time_s": round(float(elapsed), 6),
        "meta": _json_ready(meta or {}),
    }
    path = Path(out_dir) / "manifest.json"
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8", newline="\n")
    return path


def _workers(threads) -> int:
    if threads is None:
        threads = os.cpu_count() or 1
    return max(1, int(threads))


def _budget(config: ExperimentConfig, count: int) -> None:
    if count > config.max_trajectories:
        _fail(
            "max_trajectories",
            f"run needs {count} trajectories, above the configured cap",
            config.max_trajectories,
        )


def _plane_levels(problem, f):
    """Exact in-plane eigenvalue pair of H(f) for any search-space size.

    H(f) acts only inside span{|w>, |w_perp>} and its block trace is -Omega
    for every f, so the two levels are -(Omega +- split)/2 with the exact
    splitting below; the other N-2 eigenvalues vanish identically.
    """
    f = np.asarray(f, dtype=float)
    nn = float(problem.size)
    om = problem.omega
    diff = 1.0 - 2.0 * f + 2.0 * f / nn
    split = om * np.sqrt(diff * diff + 4.0 * f * f * (nn - 1.0) / nn**2)
    return -0.5 * (om + split), -0.5 * (om - split), split


def _level_columns(problem, f, count):
    lower, upper, split = _plane_levels(problem, f)
    cols = np.zeros((np.asarray(f).size, count))
    cols[:, 0] = lower
    if count > 1:
        cols[:, 1] = upper
    # columns beyond the second stay 0: the annihilated sector
    return cols, split


def _dwell_fraction(problem, sched, threshold, samples=20001) -> float:
    t = np.linspace(0.0, sched.total_time, samples)
    split = _plane_levels(problem, np.asarray(sched.f(t), dtype=float))[2]
    return float(np.mean(split < threshold))


def run_spectrum(config: ExperimentConfig, out_dir=None, threads=None) -> dict:
    """Spectrum tables versus f and versus t under the configured schedule.

    For ``n <= 10`` (and no explicit ``size``) the table lists all N
    eigenvalues from the exact rank-2 eigenstructure, cross-checked against a
    dense eigensolve at three f values; otherwise a reduced table with the
    in-plane pair plus one zero-sector column is emitted.  Raw and
    ground-shifted columns are both included.

    Returns
    -------
    dict
        ``f_table``/``t_table`` (header + rows), ``meta``, and ``outputs``
        (paths written when ``out_dir`` is given: spectrum_f.csv,
        spectrum_t.csv, manifest.json).
    """
    start = time.perf_counter()
    problem = config.search_space()
    nn = problem.size
    reduced = config.size is not None or config.n > 10
    n_states = config["spectrum.n_states"]
    if reduced:
        count = 3 if n_states is None else min(n_states, 3)
    else:
        count = nn if n_states is None else min(n_states, nn)

    f_grid = np.linspace(0.0, 1.0, config["spectrum.f_points"])
    f_cols, f_split = _level_columns(problem, f_grid, count)
    sched = config.make_schedule(problem)
    t_grid = np.linspace(0.0, sched.total_time, config["spectrum.t_points"])
    f_of_t = np.asarray(sched.f(t_grid), dtype=float)
    t_cols, _ = _level_columns(problem, f_of_t, count)

    header_f = ["f"] + [f"e{i}" for i in range(count)] + [f"shifted{i}" for i in range(count)]
    rows_f = np.column_stack([f_grid, f_cols, f_cols - f_cols[:, :1]])
    header_t = ["t", "f"] + [f"e{i}" for i in range(count)] + [f"shifted{i}" for i in range(count)]
    rows_t = np.column_stack([t_grid, f_of_t, t_cols, t_cols - t_cols[:, :1]])

    threshold = 2.0 * minimum_gap(problem)
    eps = config["schedule.epsilon"]
    adaptive = sched if sched.kind == "adaptive" else schedule_adaptive(problem, eps)
    constant = (
        sched
        if sched.kind == "constant"
        else schedule_constant(problem, adaptive.total_time)
    )
    meta = {
        "model": "reduced" if reduced else "full",
        "size": nn,
        "omega": problem.omega,
        "schedule_kind": sched.kind,
        "total_time": float(sched.total_time),
        "min_gap_closed_form": float(minimum_gap(problem)),
        "min_gap_grid": float(f_split.min()),
        "min_gap_grid_f": float(f_grid[int(np.argmin(f_split))]),
        "gap_at_endpoints": [float(f_split[0]), float(f_split[-1])],
        "dwell_threshold": float(threshold),
        "dwell_fraction_adaptive": _dwell_fraction(problem, adaptive, threshold),
        "dwell_fraction_constant": _dwell_fraction(problem, constant, threshold),
    }
    check_f = (0.0, 0.5, 1.0)
    if reduced:
        worst = 0.0
        for f in check_f:
            block = np.linalg.eigvalsh(two_level_exact(problem, f))
            lower, upper, _ = _plane_levels(problem, f)
            worst = max(worst, float(np.max(np.abs(block - np.array([lower, upper])))))
        meta["reduced_check_max_error"] = worst
        meta["zero_sector_multiplicity"] = nn - 2
        meta["note"] = (
            "the in-plane pair plus an (N-2)-fold zero level is the exact "
            "spectrum; the zero level is printed once"
        )
    else:
        grover = config.problem()
        worst = 0.0
        for f in check_f:
            dense = np.linalg.eigvalsh(grover_hamiltonian(grover, f))
            lower, upper, _ = _plane_levels(problem, f)
            exact = np.sort(np.concatenate([[lower, upper], np.zeros(nn - 2)]))
            worst = max(worst, float(np.max(np.abs(dense - exact))))
        meta["dense_check_f"] = list(check_f)
        meta["dense_check_max_error"] = worst

    report = {
        "f_table": {"header": header_f, "rows": rows_f},
        "t_table": {"header": header_t, "rows": rows_t},
        "meta": meta,
        "outputs": [],
    }
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_csv(out / "spectrum_f.csv", header_f, rows_f)
        write_csv(out / "spectrum_t.csv", header_t, rows_t)
        names = ["spectrum_f.csv", "spectrum_t.csv"]
        manifest = write_manifest(
            out, config=config, outputs=names, elapsed=time.perf_counter() - start, meta=meta
        )
        report["outputs"] = [str(out / name) for name in names] + [str(manifest)]
    return report


def _f_of(sched, t) -> float:
    """Schedule value with boundary rounding fuzz clipped into [0, 1]."""
    return float(np.clip(sched.f(t), 0.0, 1.0))


def _reduced_operators(problem):
    c = 1.0 / np.sqrt(problem.size)
    s = np.array([c, np.sqrt(1.0 - c * c)], dtype=complex)
    p_w = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)
    return p_w, np.outer(s, s.conj()), s


def _zeno_generator(config, problem, sched, gamma, *, dephase_start: bool):
    """Dissipative generator for one sweep point under the configured backend."""
    p_w, p_s, _ = _reduced_operators(problem)
    h_of_t = lambda t: two_level_exact(problem, _f_of(sched, t))
    backend = config.backend
    if backend == "lindblad":
        jumps = [np.sqrt(gamma) * p_w]
        if dephase_start:
            jumps.append(np.sqrt(gamma) * p_s)
        return LindbladGenerator(h_of_t, jumps)
    if backend == "singular":
        # delta-kernel bath of weight gamma: the decomposed jump is exactly
        # sqrt(gamma) P, rehosted on the time-dependent Hamiltonian
        ops = [p_w, p_s] if dephase_start else [p_w]
        jumps = []
        if gamma > 0.0:
            for op in ops:
                sg = singular_coupling_generator([op], BathModel(gamma0=gamma, kind="delta"))
                jumps.extend(sg.jumps)
        return LindbladGenerator(h_of_t, jumps)
    if backend == "redfield":
        # rate convention gamma_eff = g^2 omega^2 gamma0; keep gamma0 = 1
        tau = config["bath.tau_env"]
        bath = BathModel(gamma0=1.0, tau_env=tau)
        ops = [p_w, p_s] if dephase_start else [p_w]
        return RedfieldGenerator(
            h_of_t,
            ops,
            bath,
            g=np.sqrt(gamma) / problem.omega,
            omega=problem.omega,
            weights=np.eye(len(ops)),
            memory_span=8.0 * tau,
            grid_dt=tau / 4.0,
        )
    raise ConfigError(f"config key 'backend': no dissipative map for {backend!r}")


def _coarse_final_state(config, problem, sched, gamma, *, dephase_start: bool):
    """Final state from repeated coarse-grained measurement windows.

    The window kick applies twice the plain dissipator, so the step rate is
    gamma/2; the unitary increment comes from cached window-edge propagators
    of the exact in-plane sweep.
    """
    steps = config["zeno.coarse_steps"]
    total = sched.total_time
    dt = total / steps
    p_w, p_s, s = _reduced_operators(problem)
    unitaries = [np.eye(2, dtype=complex)]
    for j in range(steps):
        h_mid = two_level_exact(problem, _f_of(sched, (j + 0.5) * dt))
        unitaries.append(step_unitary(h_mid, dt) @ unitaries[-1])

    def u_of_t(t):
        return unitaries[int(round(t / dt))]

    identity = np.eye(2, dtype=complex)
    rho = np.outer(s, s.conj())
    for j in range(steps):
        rho = coarse_grained_step(
            rho, u_of_t, gamma / 2.0, dt, t=j * dt, projector=p_w, total_time=total
        )
        if dephase_start:
            rho = coarse_grained_step(
                rho,
                lambda _t: identity,
                gamma / 2.0,
                dt,
                t=j * dt,
                projector=p_s,
                total_time=total,
            )
    return rho


def _zeno_point(config, problem, sched, gamma, *, dephase_start: bool = False):
    """One sweep point: final reduced state and derived columns."""
    p_w, p_s, s = _reduced_operators(problem)
    if config.backend == "coarse":
        rho = _coarse_final_state(config, problem, sched, gamma, dephase_start=dephase_start)
    else:
        gen = _zeno_generator(config, problem, sched, gamma, dephase_start=dephase_start)
        traj = evolve(
            gen,
            np.outer(s, s.conj()),
            sched.total_time,
            options=IntegratorOptions(records=config["zeno.records"], keep_states=True),
        )
        rho = traj.final_state()
    vals, vecs = np.linalg.eigh(two_level_exact(problem, _f_of(sched, sched.total_time)))
    pops = np.real(np.einsum("ia,ij,ja->a", vecs.conj(), rho, vecs))
    half = 0.5 * np.eye(2)
    return {
        "success": float(np.real(rho[0, 0])),
        "pop_w": float(np.real(rho[0, 0])),
        "pop_perp": float(np.real(rho[1, 1])),
        "pop_ground": float(pops[0]),
        "pop_excited": float(pops[1]),
        "purity": float(np.real(np.trace(rho @ rho))),
        "dist_half": float(trace_distance(rho, half)),
    }


def run_zeno_grover(config: ExperimentConfig, out_dir=None, threads=None) -> dict:
    """Final ground population versus the measurement rate of the marked state.

    Sweeps the |w><w| channel rate over ``sweep.gamma_values`` (default: ten
    points with Gamma*T from 0 to 40) under the configured schedule, recording
    success, in-plane populations, purity, and the trace distance to the
    maximally mixed in-plane state.  With ``zeno.compare_dephasing`` a second
    run per point adds an equal-rate |s><s| channel.  Dynamics run in the
    exact two-dimensional invariant plane of the sweep, so no truncation
    error is incurred at any N; per-point failures are collected, not raised.
    """
    start = time.perf_counter()
    problem = config.search_space()
    sched = config.make_schedule(problem)
    total = sched.total_time
    gammas = config["sweep.gamma_values"]
    if gammas is None:
        targets = np.array([0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 24.0, 40.0])
        gammas = list(targets / total)
    gammas = sorted(float(g) for g in gammas)
    compare = config["zeno.compare_dephasing"]
    _budget(config, len(gammas) * (2 if compare else 1))

    def point(gamma):
        row = {"gamma": gamma, "gamma_T": gamma * total}
        row.update(_zeno_point(config, problem, sched, gamma))
        if compare:
            both = _zeno_point(config, problem, sched, gamma, dephase_start=True)
            row["success_dephased"] = both["success"]
        return row

    rows, failures = [], []
    with ThreadPoolExecutor(max_workers=_workers(threads)) as pool:
        futures = [(g, pool.submit(point, g)) for g in gammas]
        for gamma, fut in futures:
            try:
                rows.append(fut.result())
            except Exception as exc:  # per-point failure reporting
                failures.append({"gamma": gamma, "error": f"{type(exc).__name__}: {exc}"})

    header = [
        "gamma",
        "gamma_T",
        "success",
        "pop_w",
        "pop_perp",
        "pop_ground",
        "pop_excited",
        "purity",
        "dist_half",
    ]
    if compare:
        header.append("success_dephased")
    table = [[row[k] for k in header] for row in rows]
    meta = {
        "size": problem.size,
        "omega": problem.omega,
        "backend": config.backend,
        "schedule_kind": sched.kind,
        "total_time": float(total),
        "model": "in-plane reduction (exact for these channels)",
        "closed_baseline": next((r["success"] for r in rows if r["gamma"] == 0.0), None),
        "failures": failures,
    }
    report = {"header": header, "rows": rows, "meta": meta, "outputs": []}
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_csv(out / "zeno_sweep.csv", header, table)
        manifest = write_manifest(
            out,
            config=config,
            outputs=["zeno_sweep.csv"],
            elapsed=time.perf_counter() - start,
            meta=meta,
        )
        report["outputs"] = [str(out / "zeno_sweep.csv"), str(manifest)]
    return report


def _closed_success(problem, sched) -> float:
    """Final marked-state population of the closed sweep (exact 2-level)."""
    steps = max(401, int(np.ceil(8.0 * sched.total_time * problem.omega)))
    times = np.linspace(0.0, sched.total_time, steps)
    c = 1.0 / np.sqrt(problem.size)
    psi0 = np.array([c, np.sqrt(1.0 - c * c)], dtype=complex)
    psi = propagate_piecewise(
        lambda t: two_level_exact(problem, _f_of(sched, t)), times, psi0
    )[-1]
    return float(np.abs(psi[0]) ** 2)


def _time_to_target(problem, target, steps) -> float:
    """Smallest constant-sweep time reaching the target success, by bisection."""
    def success(total):
        return _closed_success(problem, schedule_constant(problem, total))

    lo = 1.0 / problem.omega
    hi = 4.0 * problem.size / problem.omega
    for _ in range(40):
        if success(hi) >= target:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise RuntimeError("no constant-sweep time reached the target success")
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        if success(mid) >= target:
            hi = mid
        else:
            lo = mid
    return hi


def _mixing_time(problem, gamma, threshold, records=600) -> float:
    """First time the frozen-crossing state reaches the mixed plane state.

    The sweep is frozen at f = 1/2 (the avoided crossing), the |w><w| channel
    runs at rate gamma, and the crossing time of the trace distance to 1/2
    identity is interpolated between records.
    """
    h = two_level_exact(problem, 0.5)
    p_w, _, s = _reduced_operators(problem)
    gen = LindbladGenerator(h, [np.sqrt(gamma) * p_w])
    horizon = 6.0 * problem.size * gamma / problem.omega**2
    half = 0.5 * np.eye(2)
    traj = evolve(
        gen,
        np.outer(s, s.conj()),
        horizon,
        options=IntegratorOptions(records=records),
        observables=lambda t, r: {"dist": float(trace_distance(r, half))},
    )
    dist = np.asarray(traj.columns["dist"], dtype=float)
    t = np.asarray(traj.columns["t"], dtype=float)
    below = np.nonzero(dist < threshold)[0]
    if below.size == 0:
        raise RuntimeError(f"no mixing below {threshold} within horizon {horizon}")
    j = int(below[0])
    if j == 0:
        return 0.0
    frac = (dist[j - 1] - threshold) / (dist[j - 1] - dist[j])
    return float(t[j - 1] + frac * (t[j] - t[j - 1]))


def run_runtime_scaling(config: ExperimentConfig, out_dir=None, threads=None) -> dict:
    """Run-time scaling fits: closed sweeps versus N, open mixing versus N.

    Closed part: adaptive sweep duration T(N) at the configured epsilon (with
    the final success verified against ``scaling.success_target``) and the
    constant-sweep time-to-target found by bisection.  Open part: time to mix
    into the in-plane identity at the frozen crossing under the |w><w|
    channel, at Gamma = ``scaling.gamma_over_omega`` * Omega and at twice
    that rate for the doubling factor.  Both parts are fitted to power laws
    in N with standard errors.
    """
    start = time.perf_counter()
    omega = config.omega
    n_values = config["sweep.n_values"]
    closed_n = sorted(n_values) if n_values is not None else list(range(4, 11))
    open_n = sorted(n_values) if n_values is not None else list(range(4, 10))
    _budget(config, len(closed_n) + 2 * len(open_n))
    eps = config["schedule.epsilon"]
    target = config["scaling.success_target"]
    threshold = config["scaling.mix_threshold"]
    bisect_steps = config["scaling.bisection_steps"]
    gamma = config["scaling.gamma_over_omega"] * omega

    def closed_row(n):
        problem = GroverProblem(n=n, omega=omega)
        sched = schedule_adaptive(problem, eps)
        return {
            "n": n,
            "size": problem.size,
            "t_adaptive": float(sched.total_time),
            "success_adaptive": _closed_success(problem, sched),
            "t99_constant": _time_to_target(problem, target, bisect_steps),
        }

    def open_row(args):
        n, rate = args
        problem = GroverProblem(n=n, omega=omega)
        return {
            "n": n,
            "size": problem.size,
            "gamma": rate,
            "t_mix": _mixing_time(problem, rate, threshold),
        }

    open_points = [(n, gamma) for n in open_n] + [(n, 2.0 * gamma) for n in open_n]
    with ThreadPoolExecutor(max_workers=_workers(threads)) as pool:
        closed_rows = list(pool.map(closed_row, closed_n))
        open_rows = list(pool.map(open_row, sorted(open_points)))

    sizes = np.array([row["size"] for row in closed_rows], dtype=float)
    adaptive_fit = ScalingFit.fit(sizes, [row["t_adaptive"] for row in closed_rows])
    constant_fit = ScalingFit.fit(sizes, [row["t99_constant"] for row in closed_rows])
    base = sorted(
        (row for row in open_rows if row["gamma"] == gamma), key=lambda r: r["n"]
    )
    doubled = sorted(
        (row for row in open_rows if row["gamma"] == 2.0 * gamma), key=lambda r: r["n"]
    )
    mixing_fit = ScalingFit.fit(
        [row["size"] for row in base], [row["t_mix"] for row in base]
    )
    doubling = [d["t_mix"] / b["t_mix"] for b, d in zip(base, doubled)]

    fits = {
        "adaptive": adaptive_fit.as_dict(),
        "constant": constant_fit.as_dict(),
        "mixing": mixing_fit.as_dict(),
        "gamma_doubling": doubling,
        "gamma_doubling_mean": float(np.mean(doubling)),
        "success_minimum": float(min(row["success_adaptive"] for row in closed_rows)),
    }
    meta = {
        "omega": omega,
        "epsilon": eps,
        "success_target": target,
        "mix_threshold": threshold,
        "gamma": gamma,
        "model": "exact two-level reduction of the invariant plane",
    }
    closed_header = ["n", "size", "t_adaptive", "success_adaptive", "t99_constant"]
    open_header = ["n", "size", "gamma", "t_mix"]
    report = {
        "closed_rows": closed_rows,
        "open_rows": open_rows,
        "adaptive_fit": adaptive_fit,
        "constant_fit": constant_fit,
        "mixing_fit": mixing_fit,
        "gamma_doubling": doubling,
        "fits": fits,
        "meta": meta,
        "outputs": [],
    }
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_csv(
            out / "scaling_closed.csv",
            closed_header,
            [[row[k] for k in closed_header] for row in closed_rows],
        )
        write_csv(
            out / "scaling_open.csv",
            open_header,
            [[row[k] for k in open_header] for row in open_rows],
        )
        fits_path = out / "scaling_fits.json"
        fits_path.write_text(
            json.dumps(_json_ready(fits), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
            newline="\n",
        )
        names = ["scaling_closed.csv", "scaling_open.csv", "scaling_fits.json"]
        manifest = write_manifest(
            out, config=config, outputs=names, elapsed=time.perf_counter() - start, meta=meta
        )
        report["outputs"] = [str(out / name) for name in names] + [str(manifest)]
    return report
