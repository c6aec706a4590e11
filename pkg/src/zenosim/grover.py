"""Adiabatic Grover search model: Hamiltonian, two-level reduction, schedules.

The interpolating Hamiltonian is ``H(f) = -Omega [ f |s><s| + (1-f) |w><w| ]``
with ``|s>`` the uniform superposition and ``|w>`` the marked state, so the
control parameter runs from f=1 (start) down to f=0 (end).  Dynamics started
in ``|s>`` stay exactly inside span{|w>, |w_perp>}, which is what makes the
two-level reductions here useful beyond the usual large-N approximation.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from .config import MAX_QUBITS
from .core import basis_state

__all__ = [
    "GroverProblem",
    "TwoLevelHamiltonian",
    "Schedule",
    "uniform_state",
    "marked_state",
    "grover_hamiltonian",
    "lz_basis",
    "two_level_exact",
    "landau_zener_reduced",
    "gap",
    "minimum_gap",
    "schedule_constant",
    "schedule_adaptive",
    "generalized_lz_projection",
]


@dataclass(frozen=True)
class GroverProblem:
    """Search instance: ``n`` qubits, energy scale ``omega``, marked index."""

    n: int
    omega: float = 1.0
    marked: int = 0

    def __post_init__(self) -> None:
        if not 1 <= self.n <= MAX_QUBITS:
            raise ValueError(f"n={self.n} outside [1, {MAX_QUBITS}]")
        if self.omega <= 0.0:
            raise ValueError("omega must be positive")
        if not 0 <= self.marked < 2**self.n:
            raise ValueError(f"marked index {self.marked} outside [0, 2**{self.n})")

    @property
    def size(self) -> int:
        """Search-space size N = 2**n."""
        return 2**self.n


def uniform_state(problem: GroverProblem) -> np.ndarray:
    """Uniform superposition ``|s>``."""
    dim = problem.size
    return np.full(dim, 1.0 / np.sqrt(dim), dtype=complex)


def marked_state(problem: GroverProblem) -> np.ndarray:
    """Marked computational basis state ``|w>``."""
    return basis_state(problem.marked, problem.size)


def grover_hamiltonian(problem: GroverProblem, f: float) -> np.ndarray:
    """Dense ``H(f) = -Omega [ f |s><s| + (1-f) |w><w| ]``."""
    _check_f(f)
    s = uniform_state(problem)
    w = marked_state(problem)
    return -problem.omega * (
        f * np.outer(s, s.conj()) + (1.0 - f) * np.outer(w, w.conj())
    )


def lz_basis(problem: GroverProblem) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal basis (|w>, |w_perp>) of the dynamically invariant plane.

    ``|w_perp>`` is the unit vector along ``|s>`` minus its ``|w>`` component,
    so span{|w>, |w_perp>} = span{|w>, |s>}.
    """
    w = marked_state(problem)
    s = uniform_state(problem)
    overlap = 1.0 / np.sqrt(problem.size)
    w_perp = (s - overlap * w) / np.sqrt(1.0 - overlap**2)
    return w, w_perp


def two_level_exact(problem: GroverProblem, f: float) -> np.ndarray:
    """Exact 2x2 block of H(f) in the orthonormal (|w>, |w_perp>) basis.

    The remaining N-2 directions are annihilated by H(f), so this block plus
    a zero sector reproduces the full spectrum exactly at any N.
    """
    _check_f(f)
    n_size = problem.size
    c = 1.0 / np.sqrt(n_size)  # <s|w>
    b = np.sqrt(1.0 - c * c)  # <s|w_perp>
    om = problem.omega
    h_ww = -om * (f * c * c + (1.0 - f))
    h_wp = -om * f * c * b
    h_pp = -om * f * b * b
    return np.array([[h_ww, h_wp], [h_wp, h_pp]], dtype=complex)


@dataclass(frozen=True)
class TwoLevelHamiltonian:
    """A 2x2 effective Hamiltonian with basis labels and gap estimate."""

    matrix: np.ndarray
    labels: tuple[str, str]
    min_gap: float | None = None

    def gap(self) -> float:
        """Instantaneous splitting of the two eigenvalues."""
        vals = np.linalg.eigvalsh(self.matrix)
        return float(vals[1] - vals[0])


def landau_zener_reduced(problem: GroverProblem, f: float) -> TwoLevelHamiltonian:
    """Large-N avoided-crossing form ``-Omega [[1-f, f/sqrt(N)], [f/sqrt(N), f]]``.

    This drops O(1/N) against :func:`two_level_exact`; its splitting is the
    closed-form :func:`gap` used by the adaptive schedule.
    """
    _check_f(f)
    om = problem.omega
    c = f / np.sqrt(problem.size)
    matrix = -om * np.array([[1.0 - f, c], [c, f]], dtype=complex)
    return TwoLevelHamiltonian(
        matrix=matrix, labels=("w", "w_perp"), min_gap=minimum_gap(problem)
    )


def gap(problem: GroverProblem, f) -> np.ndarray | float:
    """Closed-form splitting ``Omega sqrt((1-2f)^2 + 4 f^2 / N)``."""
    f = np.asarray(f, dtype=float)
    if np.any(f < 0.0) or np.any(f > 1.0):
        raise ValueError("f outside [0, 1]")
    out = problem.omega * np.sqrt((1.0 - 2.0 * f) ** 2 + 4.0 * f**2 / problem.size)
    return float(out) if out.ndim == 0 else out


def minimum_gap(problem: GroverProblem) -> float:
    """Minimum splitting ``Omega / sqrt(N)``, attained at f = 1/2."""
    return problem.omega / np.sqrt(problem.size)


@dataclass(frozen=True)
class Schedule:
    """Sampled control curve f(t) on [0, T] with monotone-cubic interpolation.

    ``times`` increase from 0 to ``total_time`` while ``values`` decrease from
    1 to 0; interpolation is shape-preserving (PCHIP) so f stays monotone
    between samples.
    """

    kind: str
    times: np.ndarray
    values: np.ndarray
    epsilon: float | None = None
    _interp: PchipInterpolator = field(init=False, repr=False, compare=False)
    _deriv: PchipInterpolator = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.ndim != 1 or times.shape != values.shape or times.size < 2:
            raise ValueError("schedule needs matching 1-d time/value samples")
        if times[0] != 0.0 or np.any(np.diff(times) <= 0.0):
            raise ValueError("schedule times must increase strictly from 0")
        if abs(values[0] - 1.0) > 1e-12 or abs(values[-1]) > 1e-12:
            raise ValueError("schedule must run from f=1 to f=0")
        if np.any(np.diff(values) > 1e-15):
            raise ValueError("schedule values must be non-increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        interp = PchipInterpolator(times, values, extrapolate=False)
        object.__setattr__(self, "_interp", interp)
        object.__setattr__(self, "_deriv", interp.derivative())

    @property
    def total_time(self) -> float:
        return float(self.times[-1])

    def f(self, t) -> np.ndarray | float:
        """Control value at time ``t`` (clamped to the endpoints)."""
        t = np.clip(t, 0.0, self.total_time)
        out = self._interp(t)
        return float(out) if np.ndim(out) == 0 else out

    def fdot(self, t) -> np.ndarray | float:
        """Time derivative df/dt at ``t``."""
        t = np.clip(t, 0.0, self.total_time)
        out = self._deriv(t)
        return float(out) if np.ndim(out) == 0 else out


def _check_f(f: float) -> None:
    if not 0.0 <= f <= 1.0:
        raise ValueError(f"f={f} outside [0, 1]")


def _grid_points(problem: GroverProblem, points: int | None) -> int:
    # Keep at least 20*sqrt(N) samples so the gap dip is resolved.
    if points is None:
        points = max(401, int(np.ceil(20.0 * np.sqrt(problem.size))) + 1)
    if points < 3:
        raise ValueError("need at least 3 grid points")
    return points


def schedule_constant(
    problem: GroverProblem, total_time: float, *, points: int | None = None
) -> Schedule:
    """Linear sweep ``f(t) = 1 - t/T``."""
    if total_time <= 0.0:
        raise ValueError("total_time must be positive")
    points = _grid_points(problem, points)
    times = np.linspace(0.0, total_time, points)
    return Schedule(kind="constant", times=times, values=1.0 - times / total_time)


def schedule_adaptive(
    problem: GroverProblem, epsilon: float, *, points: int | None = None
) -> Schedule:
    """Gap-adaptive sweep solving ``df/dt = -(eps/Omega) dE(f)^2``.

    Integrating the reciprocal speed gives
    ``t(f) = (Omega/eps) * integral_f^1 df' / dE(f')^2`` by cumulative
    trapezoid on a uniform f grid; the emergent total time is ``t(0)``,
    which grows like sqrt(N) instead of the linear-sweep N.
    """
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    if epsilon > 0.3:
        warnings.warn(
            f"epsilon={epsilon} is outside the adiabatic regime; the schedule "
            "is still well defined but the leakage bound no longer applies",
            stacklevel=2,
        )
    points = _grid_points(problem, points)
    f_grid = np.linspace(1.0, 0.0, points)
    speed = 1.0 / gap(problem, f_grid) ** 2  # integrand of t(f)
    dt = -np.diff(f_grid) * 0.5 * (speed[1:] + speed[:-1])
    times = np.concatenate(([0.0], np.cumsum(dt))) * problem.omega / epsilon
    return Schedule(kind="adaptive", times=times, values=f_grid, epsilon=epsilon)


def generalized_lz_projection(
    h: np.ndarray, in_state: np.ndarray, out_state: np.ndarray
) -> TwoLevelHamiltonian:
    """Project a Hamiltonian onto span{|in>, |out>} for crossing estimates.

    ``out`` is orthonormalized against ``in`` (rejecting nearly parallel
    inputs), and the reported ``min_gap`` is ``2 |<in|H|out'>|``, the familiar
    avoided-crossing splitting once the diagonal terms are tuned equal.
    """
    h = np.asarray(h, dtype=complex)
    a = np.asarray(in_state, dtype=complex)
    b = np.asarray(out_state, dtype=complex)
    a = a / np.linalg.norm(a)
    b = b / np.linalg.norm(b)
    overlap = np.vdot(a, b)
    if abs(overlap) >= 0.99:
        raise ValueError(f"states nearly parallel: |<in|out>| = {abs(overlap):.4f}")
    b = b - overlap * a
    b = b / np.linalg.norm(b)
    h_aa = np.vdot(a, h @ a)
    h_ab = np.vdot(a, h @ b)
    h_bb = np.vdot(b, h @ b)
    matrix = np.array([[h_aa, h_ab], [np.conj(h_ab), h_bb]], dtype=complex)
    return TwoLevelHamiltonian(
        matrix=matrix, labels=("in", "out"), min_gap=2.0 * abs(h_ab)
    )
