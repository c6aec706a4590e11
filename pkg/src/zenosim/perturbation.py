"""Weak-coupling perturbation theory for the adiabatic search model.

The system couples to its surroundings through ``g * Omega * sum_i
sigma_i B_i`` with dimensionless Pauli operators ``sigma_i`` and bath
operators ``B_i`` of order unity.  First order in ``g`` shifts the
instantaneous Hamiltonian by the bath expectation values; second order
produces transitions out of the adiabatic ground state whose probability
is a double time integral over the bath correlation function.  Both are
evaluated on the exact two-level reduction of the search Hamiltonian,
with the (N - 2)-dimensional zero-energy sector handled analytically.

An explicit system (x) bath-qubit model with known correlation functions
serves as an exact, fully unitary oracle for the perturbative results.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.integrate import simpson, solve_ivp

from .config import MAX_QUBITS
from .core import pauli_operator
from .dynamics import BathModel, Trajectory
from .grover import GroverProblem, Schedule, lz_basis, two_level_exact

_AXES = ("x", "y", "z")

__all__ = [
    "InteractionSpec",
    "JointBathSpec",
    "pauli_lz_block",
    "first_order_shift",
    "lz_sector_shifts",
    "AdiabaticPropagator",
    "adiabatic_propagator",
    "second_order_error",
    "joint_exact_evolve",
    "exact_bath_correlation",
    "error_scaling_report",
]


# ---------------------------------------------------------------------------
# coupling specification


@dataclass(frozen=True)
class InteractionSpec:
    """Coupling ``g * Omega * sum sigma_mu^a B_mu^a`` to a stationary bath.

    Parameters
    ----------
    g : float
        Dimensionless coupling strength, ``g >= 0``.
    couplings : sequence of (int, str)
        Which Pauli acts where: pairs ``(qubit, axis)``.
    expectations : mapping, optional
        ``<B_mu^a>`` keyed by ``(qubit, axis)``, with a bare axis string
        accepted as a default for every coupling on that axis; required
        for the first-order shift.
    correlation : BathModel | sequence of (weight, freq) | callable, optional
        Stationary correlation ``C(tau) = <B(tau) B(0)>``: either a bath
        model, a modal table meaning ``C(tau) = sum w_k exp(i w_k tau)``,
        or a plain callable of ``tau``.
    tau_env : float, optional
        Correlation decay time for callables (BathModel carries its own).
    correlated : str
        ``"long"`` for one bath shared by every coupling (coherent sum),
        ``"short"`` for an independent identical bath per coupling.
    """

    g: float
    couplings: tuple
    expectations: Mapping | None = None
    correlation: object | None = None
    tau_env: float | None = None
    correlated: str = "long"

    def __post_init__(self) -> None:
        if self.g < 0.0:
            raise ValueError("coupling g must be non-negative")
        pairs = tuple((int(mu), str(axis)) for mu, axis in self.couplings)
        if not pairs:
            raise ValueError("at least one coupling term is required")
        for mu, axis in pairs:
            if axis not in _AXES:
                raise ValueError(f"axis {axis!r} not in {_AXES}")
            if mu < 0:
                raise ValueError("qubit index must be non-negative")
        object.__setattr__(self, "couplings", pairs)
        if self.correlated not in ("long", "short"):
            raise ValueError("correlated must be 'long' or 'short'")
        if self.expectations is not None:
            for key, val in self.expectations.items():
                if abs(complex(val).imag) > 1e-12:
                    raise ValueError(f"<B> for {key} must be real (Hermitian bath operator)")


def _expectation(spec: InteractionSpec, mu: int, axis: str) -> float:
    """Bath mean for one coupling, with axis-wide defaults allowed."""
    if spec.expectations is None:
        return 0.0
    val = spec.expectations.get((mu, axis), spec.expectations.get(axis, 0.0))
    return float(np.real(val))


def _z_sign(problem: GroverProblem, mu: int) -> float:
    """Eigenvalue of sigma_mu^z on the marked basis state."""
    if not 0 <= mu < problem.n:
        raise ValueError(f"qubit index {mu} outside register of size {problem.n}")
    bit = (problem.marked >> (problem.n - 1 - mu)) & 1
    return 1.0 - 2.0 * bit


def pauli_lz_block(problem: GroverProblem, mu: int, axis: str) -> np.ndarray:
    """Exact 2x2 block of ``sigma_mu^axis`` in the (|w>, |w_perp>) basis.

    Closed forms follow from counting bit flips inside the uniform
    superposition; they hold for every register size.
    """
    if axis not in _AXES:
        raise ValueError(f"axis {axis!r} not in {_AXES}")
    n_size = problem.size
    if n_size < 2:
        raise ValueError("block basis needs at least one unmarked state")
    z = _z_sign(problem, mu)
    root = np.sqrt(n_size - 1.0)
    if axis == "z":
        return np.array([[z, 0.0], [0.0, -z / (n_size - 1.0)]], dtype=complex)
    if axis == "x":
        return np.array(
            [
                [0.0, 1.0 / root],
                [1.0 / root, (n_size - 2.0) / (n_size - 1.0)],
            ],
            dtype=complex,
        )
    return z * np.array([[0.0, -1.0j / root], [1.0j / root, 0.0]], dtype=complex)


def _pauli_apply(axis: str, mu: int, n: int, vec: np.ndarray) -> np.ndarray:
    """Apply a single-qubit Pauli to a state vector without building matrices."""
    dim = vec.shape[0]
    idx = np.arange(dim)
    bit = (idx >> (n - 1 - mu)) & 1
    if axis == "z":
        return np.where(bit == 0, 1.0, -1.0) * vec
    flipped = idx ^ (1 << (n - 1 - mu))
    if axis == "x":
        return vec[flipped]
    # sigma_y |b> = i (-1)^b |1-b>
    sign = np.where(bit == 0, 1.0j, -1.0j)
    return sign * vec[flipped]


def first_order_shift(
    spec: InteractionSpec, n: int, *, omega: float = 1.0
) -> np.ndarray:
    """Environment-averaged interaction ``g*Omega*sum sigma <B>`` as an operator.

    This is the Hermitian shift the bath adds to the system Hamiltonian at
    first order in ``g``; it vanishes when every ``<B>`` does.
    """
    if spec.expectations is None:
        raise ValueError("first-order shift needs bath expectation values")
    dim = 2**n
    out = np.zeros((dim, dim), dtype=complex)
    for mu, axis in spec.couplings:
        if mu >= n:
            raise ValueError(f"coupling on qubit {mu} outside register of size {n}")
        b_val = _expectation(spec, mu, axis)
        if b_val != 0.0:
            out += spec.g * omega * b_val * pauli_operator(axis, mu, n)
    return out


def lz_sector_shifts(spec: InteractionSpec, problem: GroverProblem) -> dict:
    """First-order energy shifts of the crossing sectors.

    Returns the diagonal shifts ``<w|V|w>`` and ``<s|V|s>`` (order ``g``)
    and the cross element ``<w|V|s>`` (order ``g/sqrt(N)``); a difference
    between the diagonal entries moves the position of the minimum gap.
    """
    if spec.expectations is None:
        raise ValueError("sector shifts need bath expectation values")
    g_om = spec.g * problem.omega
    root_n = np.sqrt(problem.size)
    delta_w = 0.0
    delta_s = 0.0
    offdiag = 0.0 + 0.0j
    for mu, axis in spec.couplings:
        b_val = _expectation(spec, mu, axis)
        if b_val == 0.0:
            continue
        z = _z_sign(problem, mu)
        if axis == "z":
            delta_w += g_om * b_val * z
            offdiag += g_om * b_val * z / root_n
        elif axis == "x":
            delta_s += g_om * b_val
            offdiag += g_om * b_val / root_n
        else:  # y: traceless in both sectors, off-diagonal only
            offdiag += g_om * b_val * (-1.0j) * z / root_n
    return {"delta_w": delta_w, "delta_s": delta_s, "offdiag": offdiag}


def _shift_block(spec: InteractionSpec, problem: GroverProblem) -> np.ndarray:
    """First-order shift restricted to the (|w>, |w_perp>) plane."""
    block = np.zeros((2, 2), dtype=complex)
    if spec.expectations is None:
        return block
    for mu, axis in spec.couplings:
        b_val = _expectation(spec, mu, axis)
        if b_val != 0.0:
            block += spec.g * problem.omega * b_val * pauli_lz_block(problem, mu, axis)
    return block


# ---------------------------------------------------------------------------
# adiabatic propagator on the invariant plane


def _f_of_t(schedule) -> Callable[[float], float]:
    if isinstance(schedule, Schedule):
        return schedule.f
    if callable(schedule):
        return schedule
    raise TypeError("schedule must be a Schedule or a callable t -> f")


class AdiabaticPropagator:
    """Instantaneous-eigenbasis propagator built on the two-level reduction.

    ``U(t)`` maps the eigenbasis at t=0 onto the eigenbasis at t with the
    accumulated dynamical phases ``phi_n = integral E_n dt``; the N - 2
    directions outside the plane carry zero energy and stay frozen.  The
    eigenvectors are kept real and sign-continuous along the sweep, which
    makes the geometric phase vanish identically.
    """

    def __init__(
        self,
        problem: GroverProblem,
        schedule,
        *,
        horizon: float | None = None,
        points: int | None = None,
        shift_block: np.ndarray | None = None,
    ) -> None:
        self.problem = problem
        self.schedule = schedule
        f_fun = _f_of_t(schedule)
        if horizon is None:
            if isinstance(schedule, Schedule):
                horizon = schedule.total_time
            else:
                raise ValueError("a callable schedule needs an explicit horizon")
        if horizon <= 0.0:
            raise ValueError("horizon must be positive")
        self.horizon = float(horizon)
        if points is None:
            per_period = 32.0 * self.horizon * problem.omega / (2.0 * np.pi)
            points = int(min(400_001, max(4001, np.ceil(per_period))))
        self.times = np.linspace(0.0, self.horizon, points)
        # clip roundoff-level excursions of the interpolated control
        self.f_values = np.clip(
            np.asarray([f_fun(t) for t in self.times], dtype=float), 0.0, 1.0
        )
        self._shift = (
            np.zeros((2, 2)) if shift_block is None else np.real(shift_block)
        )

        blocks = np.empty((points, 2, 2))
        for i, f_val in enumerate(self.f_values):
            blocks[i] = np.real(two_level_exact(problem, float(f_val))) + self._shift
        energies, vecs = np.linalg.eigh(blocks)
        # sign continuity along t for both eigenvector columns
        for col in range(2):
            v0 = vecs[0, :, col]
            if v0[np.argmax(np.abs(v0))] < 0.0:
                vecs[0, :, col] = -v0
            flips = np.einsum("ti,ti->t", vecs[:-1, :, col], vecs[1:, :, col]) < 0.0
            sign = np.concatenate(([1.0], np.cumprod(np.where(flips, -1.0, 1.0))))
            vecs[:, :, col] *= sign[:, None]
        self.energies = energies  # (points, 2) ascending
        self.vectors = vecs  # (points, 2, 2) real, [:, :, level]
        dt = np.diff(self.times)
        self.phases = np.zeros_like(energies)
        self.phases[1:] = np.cumsum(
            0.5 * dt[:, None] * (energies[1:] + energies[:-1]), axis=0
        )

    # -- interpolation helpers ------------------------------------------------

    def _phase_at(self, t: float, level: int) -> float:
        return float(np.interp(t, self.times, self.phases[:, level]))

    def _vectors_at(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        f_val = float(np.interp(t, self.times, self.f_values))
        block = np.real(two_level_exact(self.problem, f_val)) + self._shift
        _, vecs = np.linalg.eigh(block)
        idx = int(np.searchsorted(self.times, t))
        idx = min(max(idx, 0), len(self.times) - 1)
        out = []
        for col in range(2):
            v = vecs[:, col]
            if float(self.vectors[idx, :, col] @ v) < 0.0:
                v = -v
            out.append(v)
        return out[0], out[1]

    # -- public surface --------------------------------------------------------

    def state(self, t: float, level: int = 0, *, dense: bool = False) -> np.ndarray:
        """Instantaneous eigenvector at time t (plane coordinates or dense)."""
        v = self._vectors_at(t)[level]
        if not dense:
            return v.astype(complex)
        w_vec, wp_vec = lz_basis(self.problem)
        return v[0] * w_vec + v[1] * wp_vec

    def unitary(self, t: float, *, subspace: bool = False) -> np.ndarray:
        """Propagator U(t) from t=0; 2x2 on the plane or dense with frozen rest."""
        if not 0.0 <= t <= self.horizon + 1e-12:
            raise ValueError(f"t={t} outside the schedule window [0, {self.horizon}]")
        v0_t, v1_t = self._vectors_at(t)
        v0_0 = self.vectors[0, :, 0]
        v1_0 = self.vectors[0, :, 1]
        u2 = np.exp(-1.0j * self._phase_at(t, 0)) * np.outer(v0_t, v0_0) + np.exp(
            -1.0j * self._phase_at(t, 1)
        ) * np.outer(v1_t, v1_0)
        if subspace:
            return u2
        w_vec, wp_vec = lz_basis(self.problem)
        basis = np.column_stack([w_vec, wp_vec])
        plane = basis @ basis.conj().T
        return basis @ u2 @ basis.conj().T + np.eye(self.problem.size) - plane

    def gap(self) -> np.ndarray:
        """Instantaneous splitting E_1 - E_0 on the grid."""
        return self.energies[:, 1] - self.energies[:, 0]

    def adiabaticity(self) -> float:
        """Max of |<psi_1| dH/dt |psi_0>| / (E_1 - E_0)^2 along the sweep.

        For the gap-adaptive schedule this stays of order epsilon.
        """
        fdot = np.gradient(self.f_values, self.times)
        om = self.problem.omega
        c = 1.0 / np.sqrt(self.problem.size)
        b = np.sqrt(1.0 - c * c)
        dh_df = -om * np.array([[c * c - 1.0, c * b], [c * b, b * b]])
        elem = np.einsum("ti,ij,tj->t", self.vectors[:, :, 1], dh_df, self.vectors[:, :, 0])
        return float(np.max(np.abs(fdot * elem) / self.gap() ** 2))

    def coupling_element(self, mu: int, axis: str) -> np.ndarray:
        """Matrix element <psi_1(t)|sigma_mu^axis|psi_0(t)> on the grid."""
        block = pauli_lz_block(self.problem, mu, axis)
        return np.einsum(
            "ti,ij,tj->t", self.vectors[:, :, 1], block, self.vectors[:, :, 0]
        )

    def ground_envelopes(self) -> tuple[np.ndarray, np.ndarray]:
        """Components (cos-like, sin-like) of psi_0(t) on (|w>, |w_perp>)."""
        return self.vectors[:, 0, 0], self.vectors[:, 1, 0]


def adiabatic_propagator(
    problem: GroverProblem, schedule, t: float, **kwargs
) -> np.ndarray:
    """Dense adiabatic propagator U(t); see :class:`AdiabaticPropagator`."""
    subspace = kwargs.pop("subspace", False)
    prop = AdiabaticPropagator(problem, schedule, **kwargs)
    return prop.unitary(t, subspace=subspace)


# ---------------------------------------------------------------------------
# second-order error probability


def _correlation_modes(spec: InteractionSpec):
    """Return (modes, c_fun, tau_env): modal table or callable plus decay scale."""
    corr = spec.correlation
    if corr is None:
        raise ValueError("second order needs a bath correlation function")
    if isinstance(corr, BathModel):
        return None, corr.correlation, corr.tau_env
    if callable(corr):
        return None, corr, spec.tau_env
    modes = tuple((float(w), float(om)) for w, om in corr)
    for weight, _ in modes:
        if weight < 0.0:
            raise ValueError("modal correlation weights must be non-negative")
    return modes, None, spec.tau_env


def _rest_channel_vectors(problem: GroverProblem, mu: int, axis: str):
    """Projections of sigma|w> and sigma|w_perp> onto the frozen sector."""
    n = problem.n
    w_vec, wp_vec = lz_basis(problem)
    a_vec = _pauli_apply(axis, mu, n, w_vec)
    b_vec = _pauli_apply(axis, mu, n, wp_vec)
    for vec in (a_vec, b_vec):
        vec -= w_vec * (w_vec.conj() @ vec)
        vec -= wp_vec * (wp_vec.conj() @ vec)
    return a_vec, b_vec


def second_order_error(
    spec: InteractionSpec,
    problem: GroverProblem,
    schedule,
    window: tuple[float, float] | None = None,
    *,
    points: int | None = None,
    nodes_minus: int = 64,
    tminus_max: float | None = None,
    refine: int = 1,
    include_rest: bool = True,
    propagator: AdiabaticPropagator | None = None,
) -> float:
    """Probability of leaving the adiabatic ground state at order ``g**2``.

    The one-bath amplitude into state m is ``-i g Omega integral dt
    <psi_m(t)|sigma(t)|psi_0(t)> B(t)`` in the interaction picture; squaring
    and averaging over the stationary bath gives a double time integral
    against ``C(t1 - t2)``.  Modal correlations factorize it into single
    integrals (evaluated by Simpson quadrature); decaying correlations use
    a (t_plus, t_minus) grid with t_minus truncated at ``8 tau_env`` and
    exponentially clustered nodes.  Transitions into the zero-energy sector
    outside the crossing plane are included unless ``include_rest=False``.

    Doubling ``refine`` doubles both quadrature grids; the result should
    move by well under a percent when converged.
    """
    if spec.g == 0.0:
        return 0.0
    modes, c_fun, tau_env = _correlation_modes(spec)
    if isinstance(schedule, Schedule):
        horizon = schedule.total_time
    else:
        if window is None:
            raise ValueError("a callable schedule needs an explicit window")
        horizon = window[1]
    if window is None:
        window = (0.0, horizon)
    t0, t1 = float(window[0]), float(window[1])
    if not 0.0 <= t0 < t1 <= horizon + 1e-12:
        raise ValueError(f"window {window} outside [0, {horizon}]")
    if tau_env is not None and (t1 - t0) < tau_env:
        raise ValueError("integration window shorter than the bath memory time")

    prop = propagator or AdiabaticPropagator(
        problem, schedule, horizon=horizon, shift_block=_shift_block(spec, problem)
    )
    for mu, _ in spec.couplings:
        if mu >= problem.n:
            raise ValueError(f"coupling on qubit {mu} outside register of size {problem.n}")

    # master grid dense enough for the fastest phase in play
    omega_max = 0.0
    if modes is not None:
        omega_max = max((abs(om) for _, om in modes), default=0.0)
    elif isinstance(spec.correlation, BathModel):
        omega_max = abs(spec.correlation.omega_env)
    rate = problem.omega * 1.25 + omega_max
    if points is None:
        points = int(min(600_001, max(1601, np.ceil((t1 - t0) * rate * 32.0 / (2.0 * np.pi)))))
    points = int(points) * int(refine)
    nodes_minus = int(nodes_minus) * int(refine)

    tp = np.linspace(t0, t1, points)
    dphi = np.interp(tp, prop.times, prop.phases[:, 1] - prop.phases[:, 0])
    phi0 = np.interp(tp, prop.times, prop.phases[:, 0])

    # plane-channel kernels, grouped by bath topology
    elems = {}
    for mu, axis in spec.couplings:
        grid_elem = prop.coupling_element(mu, axis)
        elems[(mu, axis)] = np.interp(tp, prop.times, grid_elem.real) + 1.0j * np.interp(
            tp, prop.times, grid_elem.imag
        )
    if spec.correlated == "long":
        plane_kernels = [sum(elems.values())]
        rest_groups = [list(spec.couplings)]
    else:
        plane_kernels = [elems[key] for key in spec.couplings]
        rest_groups = [[key] for key in spec.couplings]

    # rest-channel kernels: psi_0 = c_w(t)|w> + c_p(t)|w_perp| drives the
    # frozen sector through two fixed vectors per coupling
    rest_data = []
    if include_rest:
        c_w = np.interp(tp, prop.times, prop.vectors[:, 0, 0])
        c_p = np.interp(tp, prop.times, prop.vectors[:, 1, 0])
        for group in rest_groups:
            pieces = [_rest_channel_vectors(problem, mu, axis) for mu, axis in group]
            stack_a = np.array([p[0] for p in pieces])
            stack_b = np.array([p[1] for p in pieces])
            rest_data.append((stack_a.sum(axis=0), stack_b.sum(axis=0)))

    pref = (spec.g * problem.omega) ** 2
    total = 0.0

    if modes is not None:
        for weight, om_b in modes:
            osc = np.exp(1.0j * (dphi - om_b * tp))
            for kern in plane_kernels:
                amp = simpson(kern * osc, x=tp)
                total += pref * weight * abs(amp) ** 2
            if include_rest:
                osc0 = np.exp(-1.0j * (phi0 + om_b * tp))
                for vec_a, vec_b in rest_data:
                    i_c = simpson(c_w * osc0, x=tp)
                    i_s = simpson(c_p * osc0, x=tp)
                    amp_vec = i_c * vec_a + i_s * vec_b
                    total += pref * weight * float(np.real(amp_vec.conj() @ amp_vec))
        return float(total)

    # general decaying correlation: (t_plus, t_minus) quadrature
    if tminus_max is None:
        if tau_env is None:
            raise ValueError(
                "a generic correlation needs tau_env (or tminus_max) to truncate"
            )
        tminus_max = 8.0 * tau_env
    u = np.linspace(0.0, 1.0, nodes_minus)
    tm_nodes = tminus_max * np.expm1(4.0 * u) / np.expm1(4.0)

    def _m_query(kern, times):
        out = np.interp(times, tp, kern.real) + 1.0j * np.interp(times, tp, kern.imag)
        return out * np.exp(1.0j * np.interp(times, tp, dphi))

    for kern in plane_kernels:
        rows = np.zeros(nodes_minus, dtype=complex)
        for j, tm in enumerate(tm_nodes):
            lo, hi = t0 + 0.5 * tm, t1 - 0.5 * tm
            if hi <= lo:
                continue
            tq = np.linspace(lo, hi, points)
            m1 = _m_query(kern, tq + 0.5 * tm)
            m2 = _m_query(kern, tq - 0.5 * tm)
            rows[j] = c_fun(tm) * np.trapezoid(np.conj(m1) * m2, tq)
        total += pref * np.trapezoid(2.0 * rows.real, tm_nodes)

    if include_rest:

        def _env(times):
            cw = np.interp(times, tp, c_w)
            cp = np.interp(times, tp, c_p)
            ph = np.exp(-1.0j * np.interp(times, tp, phi0))
            return cw * ph, cp * ph

        for vec_a, vec_b in rest_data:
            gram = np.array(
                [
                    [vec_a.conj() @ vec_a, vec_a.conj() @ vec_b],
                    [vec_b.conj() @ vec_a, vec_b.conj() @ vec_b],
                ]
            )
            rows = np.zeros(nodes_minus, dtype=complex)
            for j, tm in enumerate(tm_nodes):
                lo, hi = t0 + 0.5 * tm, t1 - 0.5 * tm
                if hi <= lo:
                    continue
                tq = np.linspace(lo, hi, points)
                a1, b1 = _env(tq + 0.5 * tm)
                a2, b2 = _env(tq - 0.5 * tm)
                rows[j] = c_fun(tm) * (
                    gram[0, 0] * np.trapezoid(np.conj(a1) * a2, tq)
                    + gram[0, 1] * np.trapezoid(np.conj(a1) * b2, tq)
                    + gram[1, 0] * np.trapezoid(np.conj(b1) * a2, tq)
                    + gram[1, 1] * np.trapezoid(np.conj(b1) * b2, tq)
                )
            total += pref * np.trapezoid(2.0 * rows.real, tm_nodes)
    return float(total)


# ---------------------------------------------------------------------------
# exact joint system (x) bath-qubit oracle


@dataclass(frozen=True)
class JointBathSpec:
    """A few explicit bath qubits with exactly known correlation functions.

    Each bath qubit b has Hamiltonian ``-(omega_b/2) sigma_x`` and couples
    through ``B_b = cos(tilt_b) sigma_z + sin(tilt_b) sigma_x``; prepared in
    an eigenstate of sigma_x it is stationary with centered correlation
    ``cos^2(tilt) exp(+/- i omega_b tau)`` (excited / ground) and mean
    ``<B_b> = -/+ sin(tilt)``.  Excited bath qubits can hand energy to the
    system and so induce real transitions; ground-state qubits only dephase.
    A non-zero tilt gives the bath a non-Gaussian odd cumulant, so the
    leading correction beyond second order is O(g^3) instead of O(g^4).
    """

    splittings: tuple[float, ...]
    links: tuple[tuple[int, str, int], ...]
    excited: tuple[bool, ...] | None = None
    tilts: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        splittings = tuple(float(w) for w in self.splittings)
        if not 1 <= len(splittings) <= 4:
            raise ValueError("between 1 and 4 explicit bath qubits are supported")
        links = tuple((int(mu), str(axis), int(b)) for mu, axis, b in self.links)
        for mu, axis, b in links:
            if axis not in _AXES:
                raise ValueError(f"axis {axis!r} not in {_AXES}")
            if not 0 <= b < len(splittings):
                raise ValueError(f"link references bath qubit {b} of {len(splittings)}")
        excited = self.excited
        if excited is None:
            excited = tuple(True for _ in splittings)
        excited = tuple(bool(e) for e in excited)
        if len(excited) != len(splittings):
            raise ValueError("one excited flag per bath qubit")
        tilts = self.tilts
        if tilts is None:
            tilts = tuple(0.0 for _ in splittings)
        tilts = tuple(float(x) for x in tilts)
        if len(tilts) != len(splittings):
            raise ValueError("one tilt angle per bath qubit")
        object.__setattr__(self, "splittings", splittings)
        object.__setattr__(self, "links", links)
        object.__setattr__(self, "excited", excited)
        object.__setattr__(self, "tilts", tilts)

    @property
    def k(self) -> int:
        return len(self.splittings)

    def bath_mean(self, b: int) -> float:
        """Stationary expectation value of the coupling operator B_b."""
        sign = -1.0 if self.excited[b] else 1.0
        return sign * np.sin(self.tilts[b])


def exact_bath_correlation(joint: JointBathSpec, b: int, tau) -> np.ndarray | complex:
    """Centered correlation ``<B_b(tau) B_b(0)> - <B_b>^2`` of bath qubit b."""
    if not 0 <= b < joint.k:
        raise ValueError(f"bath qubit {b} outside [0, {joint.k})")
    sign = 1.0 if joint.excited[b] else -1.0
    return np.cos(joint.tilts[b]) ** 2 * np.exp(1.0j * sign * joint.splittings[b] * tau)


def _modes_by_bath(joint: JointBathSpec):
    """Group links per bath qubit: independent qubits are uncorrelated."""
    groups: dict[int, list[tuple[int, str]]] = {}
    for mu, axis, b in joint.links:
        groups.setdefault(b, []).append((mu, axis))
    out = []
    for b, pairs in sorted(groups.items()):
        sign = 1.0 if joint.excited[b] else -1.0
        weight = np.cos(joint.tilts[b]) ** 2
        out.append((weight, sign * joint.splittings[b], joint.bath_mean(b), pairs))
    return out


def joint_shift_block(
    joint: JointBathSpec, problem: GroverProblem, *, g: float
) -> np.ndarray:
    """First-order shift of the crossing block induced by non-zero <B_b>."""
    block = np.zeros((2, 2), dtype=complex)
    for mu, axis, b in joint.links:
        mean = joint.bath_mean(b)
        if mean != 0.0:
            block += g * problem.omega * mean * pauli_lz_block(problem, mu, axis)
    return block


def second_order_error_joint(
    joint: JointBathSpec,
    problem: GroverProblem,
    schedule,
    *,
    g: float,
    window: tuple[float, float] | None = None,
    points: int | None = None,
    refine: int = 1,
    include_rest: bool = True,
    propagator: AdiabaticPropagator | None = None,
) -> float:
    """Perturbative error prediction for the explicit bath-qubit model.

    Distinct bath qubits are uncorrelated, so each contributes its own
    modal term with the couplings wired to it summed coherently.  Non-zero
    bath means are renormalized into the reference Hamiltonian before the
    centered second-order integrals are taken.
    """
    total = 0.0
    if isinstance(schedule, Schedule):
        horizon = schedule.total_time
    elif window is not None:
        horizon = window[1]
    else:
        raise ValueError("a callable schedule needs an explicit window")
    if propagator is None:
        propagator = AdiabaticPropagator(
            problem,
            schedule,
            horizon=horizon,
            shift_block=joint_shift_block(joint, problem, g=g),
        )
    for weight, freq, _, pairs in _modes_by_bath(joint):
        if weight == 0.0:
            continue
        spec = InteractionSpec(
            g=g, couplings=tuple(pairs), correlation=((weight, freq),), correlated="long"
        )
        total += second_order_error(
            spec,
            problem,
            schedule,
            window,
            points=points,
            refine=refine,
            include_rest=include_rest,
            propagator=propagator,
        )
    return total


def joint_exact_evolve(
    problem: GroverProblem,
    joint: JointBathSpec,
    schedule,
    *,
    g: float,
    horizon: float | None = None,
    record_times: np.ndarray | None = None,
    psi_system: np.ndarray | None = None,
    rtol: float = 1e-10,
    atol: float = 1e-12,
    keep_states: bool = False,
) -> Trajectory:
    """Exact unitary evolution of system plus bath qubits, then partial trace.

    The joint state stays pure; the reduced system density matrix is
    recorded against the instantaneous two-level eigenbasis.  This is the
    oracle the perturbative error estimates are judged against.
    """
    n = problem.n
    k = joint.k
    if n + k > MAX_QUBITS:
        raise ValueError(
            f"joint register of {n + k} qubits exceeds the {MAX_QUBITS}-qubit cap"
        )
    for mu, _, _ in joint.links:
        if mu >= n:
            raise ValueError(f"link on system qubit {mu} outside register of size {n}")
    f_fun = _f_of_t(schedule)
    if horizon is None:
        if isinstance(schedule, Schedule):
            horizon = schedule.total_time
        else:
            raise ValueError("a callable schedule needs an explicit horizon")

    dim_s, dim_b = 2**n, 2**k
    w_vec, wp_vec = lz_basis(problem)
    s_vec = (w_vec + np.sqrt(problem.size - 1.0) * wp_vec) / np.sqrt(problem.size)
    s_proj = np.outer(s_vec, s_vec.conj())
    w_proj = np.outer(w_vec, w_vec.conj())
    s_full = np.kron(s_proj, np.eye(dim_b))
    w_full = np.kron(w_proj, np.eye(dim_b))

    h_const = np.zeros((dim_s * dim_b, dim_s * dim_b), dtype=complex)
    for b, om_b in enumerate(joint.splittings):
        h_const += np.kron(
            np.eye(dim_s), -(om_b / 2.0) * pauli_operator("x", b, k)
        )
    for mu, axis, b in joint.links:
        bath_op = np.cos(joint.tilts[b]) * pauli_operator("z", b, k) + np.sin(
            joint.tilts[b]
        ) * pauli_operator("x", b, k)
        h_const += g * problem.omega * np.kron(pauli_operator(axis, mu, n), bath_op)

    if psi_system is None:
        block0 = np.real(two_level_exact(problem, float(f_fun(0.0))))
        _, vecs0 = np.linalg.eigh(block0)
        psi_system = vecs0[0, 0] * w_vec + vecs0[1, 0] * wp_vec
    psi_system = np.asarray(psi_system, dtype=complex)
    if psi_system.shape != (dim_s,):
        raise ValueError(f"system state must have length {dim_s}")
    plus = np.array([1.0, 1.0]) / np.sqrt(2.0)
    minus = np.array([1.0, -1.0]) / np.sqrt(2.0)
    psi_bath = np.array([1.0 + 0.0j])
    for exc in joint.excited:
        psi_bath = np.kron(psi_bath, minus if exc else plus)
    psi0 = np.kron(psi_system, psi_bath)

    om = problem.omega

    def rhs(t, psi):
        f_val = f_fun(t)
        h_psi = -om * (f_val * (s_full @ psi) + (1.0 - f_val) * (w_full @ psi))
        h_psi += h_const @ psi
        return -1.0j * h_psi

    if record_times is None:
        record_times = np.linspace(0.0, horizon, 201)
    record_times = np.asarray(record_times, dtype=float)
    sol = solve_ivp(
        rhs,
        (0.0, float(horizon)),
        psi0,
        t_eval=record_times,
        method="DOP853",
        rtol=rtol,
        atol=atol,
    )
    if not sol.success:
        raise RuntimeError(f"joint evolution failed: {sol.message}")

    n_rec = record_times.size
    cols = {
        name: np.empty(n_rec)
        for name in ("t", "f", "P_ground", "P_excited", "trace", "min_eig", "entropy")
    }
    states = [] if keep_states else None
    norm_drift = 0.0
    for i in range(n_rec):
        psi = sol.y[:, i]
        norm_drift = max(norm_drift, abs(float(np.vdot(psi, psi).real) - 1.0))
        mat = psi.reshape(dim_s, dim_b)
        rho = mat @ mat.conj().T
        f_val = float(f_fun(record_times[i]))
        block = np.real(two_level_exact(problem, min(max(f_val, 0.0), 1.0)))
        _, vecs = np.linalg.eigh(block)
        ground = vecs[0, 0] * w_vec + vecs[1, 0] * wp_vec
        excited = vecs[0, 1] * w_vec + vecs[1, 1] * wp_vec
        cols["t"][i] = record_times[i]
        cols["f"][i] = f_val
        cols["P_ground"][i] = float(np.real(ground.conj() @ rho @ ground))
        cols["P_excited"][i] = float(np.real(excited.conj() @ rho @ excited))
        cols["trace"][i] = float(np.real(np.trace(rho)))
        eigs = np.linalg.eigvalsh(rho)
        cols["min_eig"][i] = float(eigs[0])
        pos = eigs[eigs > 1e-14]
        cols["entropy"][i] = float(-np.sum(pos * np.log(pos)))
        if keep_states:
            states.append(rho)
    meta = {
        "kind": "joint_exact",
        "g": g,
        "bath_qubits": k,
        "dimension": dim_s * dim_b,
        "norm_drift": norm_drift,
        "splittings": list(joint.splittings),
    }
    return Trajectory(columns=cols, meta=meta, states=states)


def error_scaling_report(
    problem: GroverProblem,
    joint: JointBathSpec,
    schedule,
    g_values: Sequence[float],
    *,
    path=None,
    rtol: float = 1e-10,
    atol: float = 1e-12,
) -> dict:
    """Predicted vs exact error probabilities across couplings, as JSON rows.

    The exact error is the final population outside the instantaneous
    ground state, with the g=0 residual (pure schedule non-adiabaticity)
    subtracted so the table isolates the bath-induced part.
    """
    horizon = schedule.total_time if isinstance(schedule, Schedule) else None
    if horizon is None:
        raise ValueError("error_scaling_report needs a Schedule")
    record = np.array([0.0, horizon])
    base = joint_exact_evolve(
        problem, joint, schedule, g=0.0, record_times=record, rtol=rtol, atol=atol
    )
    baseline = 1.0 - float(base.columns["P_ground"][-1])
    rows = []
    for g in g_values:
        # the first-order shift scales with g, so the reference propagator
        # is rebuilt for every coupling value
        predicted = second_order_error_joint(joint, problem, schedule, g=float(g))
        traj = joint_exact_evolve(
            problem, joint, schedule, g=float(g), record_times=record, rtol=rtol, atol=atol
        )
        exact = 1.0 - float(traj.columns["P_ground"][-1]) - baseline
        mismatch = abs(predicted - exact) / exact if exact > 0.0 else np.nan
        rows.append(
            {
                "g": float(g),
                "predicted": float(predicted),
                "exact": float(exact),
                "relative_mismatch": float(mismatch),
            }
        )
    report = {
        "problem": {"n": problem.n, "omega": problem.omega, "marked": problem.marked},
        "baseline_error": baseline,
        "rows": rows,
    }
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return report
