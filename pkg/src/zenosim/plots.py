"""Figure renderers for run directories.

Each renderer reads the CSV tables a driver wrote into a run directory and
saves a PNG next to them, returning the figure path.  The Agg backend is
forced so rendering works headless; nothing is shown interactively.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "plot_spectrum",
    "plot_schedule",
    "plot_evolution",
    "plot_bloch",
    "plot_oscillator",
    "plot_zeno",
    "plot_scaling",
    "RENDERERS",
]

# levels beyond this are visual clutter; tables keep the full set
MAX_LEVEL_LINES = 12


def _read(path) -> np.ndarray:
    return np.genfromtxt(path, delimiter=",", names=True)


def _single_column(data, name):
    # genfromtxt returns a 0-d record when the table has one row
    col = np.atleast_1d(data[name])
    return col


def plot_spectrum(run_dir, path=None) -> Path:
    """Ground-shifted levels versus f (top) and versus t (bottom)."""
    run_dir = Path(run_dir)
    fdata = _read(run_dir / "spectrum_f.csv")
    tdata = _read(run_dir / "spectrum_t.csv")
    names = [n for n in fdata.dtype.names if n.startswith("shifted")][:MAX_LEVEL_LINES]
    fig, (top, bottom) = plt.subplots(2, 1, figsize=(7.0, 7.5))
    for name in names:
        top.plot(_single_column(fdata, "f"), _single_column(fdata, name), lw=1.0)
    top.set_xlabel("f")
    top.set_ylabel("E - E0")
    top.set_title("shifted spectrum vs control parameter")
    top.grid(True, alpha=0.3)
    for name in names:
        bottom.plot(_single_column(tdata, "t"), _single_column(tdata, name), lw=1.0)
    bottom.set_xlabel("t")
    bottom.set_ylabel("E - E0")
    bottom.set_title("shifted spectrum along the schedule")
    bottom.grid(True, alpha=0.3)
    fig.tight_layout()
    out = Path(path) if path is not None else run_dir / "spectrum.png"
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def plot_schedule(run_dir, path=None) -> Path:
    """Control parameter f(t) and the local adiabaticity budget."""
    run_dir = Path(run_dir)
    data = _read(run_dir / "schedule.csv")
    fig, (top, bottom) = plt.subplots(2, 1, figsize=(7.0, 6.5), sharex=True)
    t = _single_column(data, "t")
    top.plot(t, _single_column(data, "f"), lw=1.2)
    top.set_ylabel("f")
    top.grid(True, alpha=0.3)
    bottom.plot(t, _single_column(data, "epsilon_local"), lw=1.2)
    bottom.set_xlabel("t")
    bottom.set_ylabel("omega |df/dt| / gap^2")
    bottom.grid(True, alpha=0.3)
    fig.tight_layout()
    out = Path(path) if path is not None else run_dir / "schedule.png"
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def plot_evolution(run_dir, path=None) -> Path:
    """Populations along the sweep plus purity and distance to 1/2 mixing."""
    run_dir = Path(run_dir)
    data = _read(run_dir / "evolve.csv")
    t = _single_column(data, "t")
    fig, (top, bottom) = plt.subplots(2, 1, figsize=(7.0, 6.5), sharex=True)
    for name, label in (("pop_ground", "ground"), ("pop_excited", "excited"), ("pop_w", "marked")):
        top.plot(t, _single_column(data, name), lw=1.2, label=label)
    top.set_ylabel("population")
    top.legend()
    top.grid(True, alpha=0.3)
    for name in ("purity", "dist_half"):
        bottom.plot(t, _single_column(data, name), lw=1.2, label=name)
    bottom.set_xlabel("t")
    bottom.legend()
    bottom.grid(True, alpha=0.3)
    fig.tight_layout()
    out = Path(path) if path is not None else run_dir / "evolve.png"
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def plot_bloch(run_dir, path=None) -> Path:
    """Bloch-sector eigenvalues against the rate/frequency ratio."""
    run_dir = Path(run_dir)
    data = _read(run_dir / "bloch_eigenvalues.csv")
    ratio = _single_column(data, "ratio")
    fig, (left, right) = plt.subplots(1, 2, figsize=(9.0, 4.0))
    for name, label in (
        ("re_lambda0", "Re l0"),
        ("re_lambda_plus", "Re l+"),
        ("re_lambda_minus", "Re l-"),
    ):
        left.plot(ratio, -_single_column(data, name), lw=1.2, label=label.replace("Re", "-Re"))
    left.set_xscale("log")
    left.set_yscale("log")
    left.set_xlabel("rate / omega")
    left.set_ylabel("decay rate")
    left.legend()
    left.grid(True, alpha=0.3)
    for name, label in (("im_lambda_plus", "Im l+"), ("im_lambda_minus", "Im l-")):
        right.plot(ratio, _single_column(data, name), lw=1.2, label=label)
    right.set_xscale("log")
    right.set_xlabel("rate / omega")
    right.set_ylabel("oscillation frequency")
    right.legend()
    right.grid(True, alpha=0.3)
    fig.tight_layout()
    out = Path(path) if path is not None else run_dir / "bloch.png"
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def plot_oscillator(run_dir, path=None) -> Path:
    """Kernel versus time-local oscillator trajectories and their gap."""
    run_dir = Path(run_dir)
    data = _read(run_dir / "oscillator_traj.csv")
    tau = _single_column(data, "tau")
    fig, (top, bottom) = plt.subplots(2, 1, figsize=(7.0, 6.5), sharex=True)
    top.plot(tau, _single_column(data, "x_kernel"), lw=1.2, label="memory kernel")
    top.plot(tau, _single_column(data, "x_local"), lw=1.0, ls="--", label="time local")
    top.set_ylabel("x")
    top.legend()
    top.grid(True, alpha=0.3)
    gap = np.abs(_single_column(data, "x_kernel") - _single_column(data, "x_local"))
    bottom.semilogy(tau, np.maximum(gap, 1e-18), lw=1.0)
    bottom.set_xlabel("Omega t")
    bottom.set_ylabel("|x_kernel - x_local|")
    bottom.grid(True, alpha=0.3)
    fig.tight_layout()
    out = Path(path) if path is not None else run_dir / "oscillator.png"
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def plot_zeno(run_dir, path=None) -> Path:
    """Success and mixing diagnostics against the measurement strength."""
    run_dir = Path(run_dir)
    data = _read(run_dir / "zeno_sweep.csv")
    gamma_t = _single_column(data, "gamma_T")
    fig, (top, bottom) = plt.subplots(2, 1, figsize=(7.0, 6.5), sharex=True)
    top.plot(gamma_t, _single_column(data, "success"), "o-", lw=1.2, label="marked channel")
    if "success_dephased" in data.dtype.names:
        top.plot(
            gamma_t,
            _single_column(data, "success_dephased"),
            "s-",
            lw=1.2,
            label="plus start-state channel",
        )
    top.axhline(0.5, color="gray", lw=0.8, ls=":")
    top.set_ylabel("final ground population")
    top.legend()
    top.grid(True, alpha=0.3)
    bottom.plot(gamma_t, _single_column(data, "purity"), "o-", lw=1.2, label="purity")
    bottom.plot(gamma_t, _single_column(data, "dist_half"), "s-", lw=1.2, label="distance to 1/2")
    bottom.set_xscale("symlog", linthresh=1.0)
    bottom.set_xlabel("Gamma T")
    bottom.legend()
    bottom.grid(True, alpha=0.3)
    top.set_xscale("symlog", linthresh=1.0)
    fig.tight_layout()
    out = Path(path) if path is not None else run_dir / "zeno_sweep.png"
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def plot_scaling(run_dir, path=None) -> Path:
    """Run-time power laws: closed sweeps and open mixing versus N."""
    run_dir = Path(run_dir)
    closed = _read(run_dir / "scaling_closed.csv")
    opened = _read(run_dir / "scaling_open.csv")
    fig, (left, right) = plt.subplots(1, 2, figsize=(9.0, 4.0))
    size = _single_column(closed, "size")
    left.loglog(size, _single_column(closed, "t_adaptive"), "o-", label="adaptive T")
    left.loglog(size, _single_column(closed, "t99_constant"), "s-", label="constant T to target")
    left.set_xlabel("N")
    left.set_ylabel("sweep time")
    left.legend()
    left.grid(True, alpha=0.3, which="both")
    gammas = np.unique(_single_column(opened, "gamma"))
    for gamma in gammas:
        mask = _single_column(opened, "gamma") == gamma
        right.loglog(
            _single_column(opened, "size")[mask],
            _single_column(opened, "t_mix")[mask],
            "o-",
            label=f"gamma={gamma:g}",
        )
    right.set_xlabel("N")
    right.set_ylabel("time to mixing")
    right.legend()
    right.grid(True, alpha=0.3, which="both")
    fig.tight_layout()
    out = Path(path) if path is not None else run_dir / "scaling.png"
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


RENDERERS = {
    "spectrum": plot_spectrum,
    "schedule": plot_schedule,
    "evolve": plot_evolution,
    "bloch": plot_bloch,
    "oscillator": plot_oscillator,
    "zeno-sweep": plot_zeno,
    "scaling": plot_scaling,
}
