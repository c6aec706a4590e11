"""Open-system generators and the adaptive density-matrix integrator.

Implements the Lindblad right-hand side, a coarse-grained measurement-window
step, the second-order (Redfield) master equation with finite bath memory,
its short-memory reduction, and the singular-coupling-limit generator.  All
of them plug into :func:`evolve`, an embedded Dormand-Prince 5(4) integrator
that re-hermitizes and renormalizes the state after every accepted step and
monitors positivity instead of projecting it back.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import simpson

from .config import DEFAULT_TOLERANCES
from .grover import Schedule

__all__ = [
    "BathModel",
    "ShortMemoryRate",
    "Trajectory",
    "IntegratorOptions",
    "LindbladGenerator",
    "CouplingHistory",
    "RedfieldGenerator",
    "PositivityError",
    "StepSizeError",
    "lindblad_rhs",
    "coarse_grained_step",
    "redfield_rhs",
    "redfield_short_memory_rate",
    "singular_coupling_generator",
    "evolve",
    "propagate_piecewise",
    "step_unitary",
]


# ---------------------------------------------------------------------------
# bath correlation model


@dataclass(frozen=True)
class BathModel:
    """Stationary bath autocorrelation ``C(tau)``.

    ``kind="exponential"`` means
    ``C(tau) = gamma0/(2 tau_env) * exp(-|tau|/tau_env) * exp(-i omega_env tau)``,
    normalized so the full integral of ``C`` equals ``gamma0`` at
    ``omega_env = 0``.  ``kind="delta"`` is the analytic ``tau_env -> 0``
    limit, a white-noise kernel of weight ``gamma0``.
    """

    gamma0: float
    tau_env: float = 0.0
    omega_env: float = 0.0
    g: float = 0.0
    kind: str = "exponential"

    def __post_init__(self) -> None:
        if self.kind not in ("exponential", "delta"):
            raise ValueError(f"unknown bath kind {self.kind!r}")
        if self.gamma0 < 0.0:
            raise ValueError("gamma0 must be non-negative")
        if self.kind == "exponential":
            if self.tau_env <= 0.0:
                raise ValueError("exponential bath needs tau_env > 0")
            self._bochner_check()

    def _bochner_check(self) -> None:
        # sampled positive-definiteness check: the Fourier transform of a
        # valid autocorrelation must be non-negative
        span = 40.0 * self.tau_env
        m = 4096
        tau = (np.arange(m) - m // 2) * (2.0 * span / m)
        spectrum = np.fft.fft(np.fft.ifftshift(self.correlation(tau))).real
        floor = -1e-8 * max(float(np.max(np.abs(spectrum))), 1e-300)
        if float(np.min(spectrum)) < floor:
            raise ValueError("correlation function fails the spectral positivity check")

    def correlation(self, tau):
        """``C(tau)`` for real ``tau`` (scalar or array); delta kind has none."""
        if self.kind == "delta":
            raise ValueError("delta-correlated bath has no pointwise C(tau)")
        tau = np.asarray(tau, dtype=float)
        out = (
            self.gamma0
            / (2.0 * self.tau_env)
            * np.exp(-np.abs(tau) / self.tau_env)
            * np.exp(-1j * self.omega_env * tau)
        )
        return complex(out) if out.ndim == 0 else out

    def half_integral(self) -> complex:
        """Closed form of ``integral_0^inf C(tau) dtau``."""
        if self.kind == "delta":
            return complex(self.gamma0 / 2.0)
        return self.gamma0 / 2.0 / (1.0 + 1j * self.omega_env * self.tau_env)


@dataclass(frozen=True)
class ShortMemoryRate:
    """Markovian reduction of the memory kernel.

    ``rate`` is the real part of ``g^2 Omega^2 * m * integral_0^inf C``;
    the imaginary part is a Hamiltonian shift, reported separately.  The
    equivalent Lindblad dissipator ``D[sqrt(r) A]`` uses ``r = 2 * rate``
    because both time orderings of the memory integral contribute.
    """

    rate: float
    shift: float

    @property
    def lindblad_rate(self) -> float:
        return 2.0 * self.rate


def redfield_short_memory_rate(
    bath: BathModel, g: float, omega: float, n: int, *, correlated: str = "long"
) -> ShortMemoryRate:
    """Effective measurement rate ``Gamma = g^2 Omega^2 m Re integral_0^inf C``.

    ``correlated="long"`` sums coherently over all n^2 qubit pairs of the
    homogeneous model; ``"short"`` keeps only the n diagonal pairs.
    """
    if correlated == "long":
        m = n * n
    elif correlated == "short":
        m = n
    else:
        raise ValueError(f"correlated must be 'long' or 'short', got {correlated!r}")
    half = bath.half_integral()
    pref = g * g * omega * omega * m
    return ShortMemoryRate(rate=pref * half.real, shift=pref * half.imag)


# ---------------------------------------------------------------------------
# right-hand sides


def lindblad_rhs(
    rho: np.ndarray, h: np.ndarray, jumps: Sequence[np.ndarray] = ()
) -> np.ndarray:
    """``-i[H, rho] + sum_k ( L_k rho L_k^dag - 1/2 {L_k^dag L_k, rho} )``."""
    out = -1j * (h @ rho - rho @ h)
    for l_op in jumps:
        ld = l_op.conj().T
        ldl = ld @ l_op
        out += l_op @ rho @ ld - 0.5 * (ldl @ rho + rho @ ldl)
    return out


@dataclass
class LindbladGenerator:
    """Markovian generator with a static or scheduled Hamiltonian.

    ``hamiltonian`` is a matrix or a callable ``t -> matrix``; ``jumps`` is a
    sequence of jump operators or a callable ``t -> sequence``.
    """

    hamiltonian: np.ndarray | Callable[[float], np.ndarray]
    jumps: Sequence[np.ndarray] | Callable[[float], Sequence[np.ndarray]] = ()
    meta: dict = field(default_factory=dict)

    def h(self, t: float) -> np.ndarray:
        if callable(self.hamiltonian):
            return self.hamiltonian(t)
        return self.hamiltonian

    def jump_ops(self, t: float) -> Sequence[np.ndarray]:
        if callable(self.jumps):
            return self.jumps(t)
        return self.jumps

    def rhs(self, t: float, rho: np.ndarray) -> np.ndarray:
        return lindblad_rhs(rho, self.h(t), self.jump_ops(t))


def coarse_grained_step(
    rho: np.ndarray,
    u_of_t: Callable[[float], np.ndarray],
    gamma: float,
    dt: float,
    *,
    t: float = 0.0,
    projector: np.ndarray,
    delta_h: np.ndarray | None = None,
    bath: BathModel | None = None,
    total_time: float | None = None,
) -> np.ndarray:
    """One coarse-grained measurement-window step of length ``dt``.

    Applies the window-averaged dissipative kick with the self-adjoint
    operator ``L = sqrt(gamma) P`` (both time orderings of the second-order
    term, hence twice the plain dissipator) and then rotates with the exact
    propagator increment ``U(t+dt) U(t)^dag``:

        rho' = U_step [ rho - i [dH, rho] + dt (2 L rho L - {L^2, rho}) ] U_step^dag

    The step is only meaningful for windows long against the bath memory and
    short against the total sweep; both are checked and warned about when the
    context objects are supplied.
    """
    if gamma < 0.0 or dt <= 0.0:
        raise ValueError("need gamma >= 0 and dt > 0")
    p = np.asarray(projector, dtype=complex)
    if bath is not None and bath.kind == "exponential" and dt < 10.0 * bath.tau_env:
        warnings.warn(
            f"window dt={dt:.3g} is not long against bath memory "
            f"tau_env={bath.tau_env:.3g}; coarse-grained step inaccurate",
            stacklevel=2,
        )
    if total_time is not None and dt > total_time / 10.0:
        warnings.warn(
            f"window dt={dt:.3g} is not short against the sweep T={total_time:.3g}",
            stacklevel=2,
        )
    p2 = p @ p
    kicked = rho + dt * gamma * (2.0 * (p @ rho @ p) - p2 @ rho - rho @ p2)
    if delta_h is not None:
        kicked = kicked - 1j * (delta_h @ rho - rho @ delta_h)
    u0 = u_of_t(t)
    u1 = u_of_t(t + dt)
    u_step = u1 @ u0.conj().T
    return u_step @ kicked @ u_step.conj().T


# ---------------------------------------------------------------------------
# piecewise-exact unitary propagation (shared by Redfield and the oracles)


def step_unitary(h: np.ndarray, dt: float) -> np.ndarray:
    """``exp(-i H dt)`` for Hermitian ``H`` via eigendecomposition."""
    vals, vecs = np.linalg.eigh(h)
    return (vecs * np.exp(-1j * vals * dt)) @ vecs.conj().T


def propagate_piecewise(
    h_of_t: Callable[[float], np.ndarray], times: np.ndarray, psi0: np.ndarray
) -> np.ndarray:
    """Time-ordered product of midpoint-rule steps applied to ``psi0``.

    Returns the stacked state at every grid time (shape ``(len(times), dim)``).
    Second-order accurate in the grid spacing; used as a brute-force oracle.
    """
    times = np.asarray(times, dtype=float)
    psi = np.array(psi0, dtype=complex)
    out = np.empty((times.size, psi.size), dtype=complex)
    out[0] = psi
    for k in range(times.size - 1):
        dt = times[k + 1] - times[k]
        u = step_unitary(h_of_t(0.5 * (times[k] + times[k + 1])), dt)
        psi = u @ psi
        out[k + 1] = psi
    return out


# ---------------------------------------------------------------------------
# Redfield with finite memory


class CouplingHistory:
    """Interaction-picture coupling operators cached on a uniform grid.

    Maintains the system propagator ``U(t)`` by midpoint-rule accumulation
    and stores ``A_I(t) = U(t)^dag A U(t)`` for each coupling operator.  The
    buffer must span at least ``memory_span`` (>= 8 bath memory times) behind
    the current time; older entries are discarded.
    """

    def __init__(
        self,
        hamiltonian: np.ndarray | Callable[[float], np.ndarray],
        couplings: Sequence[np.ndarray],
        *,
        grid_dt: float,
        memory_span: float,
    ) -> None:
        if grid_dt <= 0.0 or memory_span <= 0.0:
            raise ValueError("grid_dt and memory_span must be positive")
        self._h = hamiltonian
        self.couplings = [np.asarray(a, dtype=complex) for a in couplings]
        self.grid_dt = float(grid_dt)
        self.memory_span = float(memory_span)
        dim = self.couplings[0].shape[0]
        self._times: list[float] = [0.0]
        self._u: list[np.ndarray] = [np.eye(dim, dtype=complex)]
        self._ops: list[list[np.ndarray]] = [[a.copy() for a in self.couplings]]
        self._offset = 0  # grid index of the first retained entry

    def h(self, t: float) -> np.ndarray:
        return self._h(t) if callable(self._h) else self._h

    def _append_step(self) -> None:
        t = self._times[-1]
        dt = self.grid_dt
        u = step_unitary(self.h(t + 0.5 * dt), dt) @ self._u[-1]
        self._times.append(t + dt)
        self._u.append(u)
        self._ops.append([u.conj().T @ a @ u for a in self.couplings])

    def extend_to(self, t: float) -> None:
        while self._times[-1] < t - 1e-12 * max(1.0, abs(t)):
            self._append_step()
        self._trim(t)

    def _trim(self, t: float) -> None:
        cut = t - self.memory_span - 2.0 * self.grid_dt
        drop = 0
        while drop + 1 < len(self._times) and self._times[drop + 1] < cut:
            drop += 1
        if drop:
            del self._times[:drop]
            del self._u[:drop]
            del self._ops[:drop]
            self._offset += drop

    def window(self, t: float) -> tuple[np.ndarray, list[list[np.ndarray]]]:
        """Grid times and interaction-picture ops covering [t - span, t]."""
        self.extend_to(t)
        lo = t - self.memory_span
        times = np.array(self._times)
        keep = np.nonzero((times <= t + 1e-12) & (times >= lo - 1e-12))[0]
        return times[keep], [self._ops[int(i)] for i in keep]

    def interaction_ops(self, t: float) -> list[np.ndarray]:
        """``A_I(t)`` at an arbitrary time, one local step off the grid."""
        self.extend_to(t)
        times = np.array(self._times)
        k = int(np.argmin(np.abs(times - t)))
        dt = t - times[k]
        if abs(dt) < 1e-14:
            return self._ops[k]
        u = step_unitary(self.h(times[k] + 0.5 * dt), dt) @ self._u[k]
        return [u.conj().T @ a @ u for a in self.couplings]


def redfield_rhs(
    rho: np.ndarray,
    t: float,
    history: CouplingHistory,
    bath: BathModel,
    *,
    g: float,
    omega: float,
    weights: np.ndarray | None = None,
) -> np.ndarray:
    """Second-order memory-kernel right-hand side in the Schroedinger picture.

    Evaluates, by trapezoid quadrature over the history grid,

        g^2 Omega^2 sum_jk W_jk  integral_0^t dt' [
            C(t-t') ( A_k(t') rho A_j(t) - A_j(t) A_k(t') rho )
          + C*(t-t') ( A_j(t) rho A_k(t') - rho A_k(t') A_j(t) ) ]

    which is the double-commutator (Born) form: Hermiticity- and
    trace-preserving term by term.  The unitary part ``-i[H(t), rho]`` is
    included.  For a delta-correlated bath the integral collapses
    analytically to a Lindblad dissipator of rate ``g^2 Omega^2 gamma0``.
    """
    if bath.kind == "exponential" and history.memory_span < 8.0 * bath.tau_env:
        raise ValueError("history buffer must span at least 8 bath memory times")
    k_ops = len(history.couplings)
    w = np.eye(k_ops) if weights is None else np.asarray(weights, dtype=float)
    pref = g * g * omega * omega
    h_now = history.h(t)
    out = -1j * (h_now @ rho - rho @ h_now)

    # Schroedinger picture: the endpoint operator A_I(t) conjugates back to A
    a_now_s = history.couplings

    if bath.kind == "delta":
        rate = pref * bath.gamma0
        for j in range(k_ops):
            for k in range(k_ops):
                if w[j, k] == 0.0:
                    continue
                aj, ak = a_now_s[j], a_now_s[k]
                out += (
                    rate
                    * w[j, k]
                    * (ak @ rho @ aj - 0.5 * (aj @ ak @ rho + rho @ aj @ ak))
                )
        return out

    times, ops = history.window(t)
    if times.size == 0 or t <= times[0] + 1e-15:
        return out
    u_now = _propagator_at(history, t)
    nodes = list(times[times < t - 1e-14])
    node_ops = ops[: len(nodes)]
    nodes.append(t)
    node_ops.append(history.interaction_ops(t))
    nodes = np.asarray(nodes)
    weights_q = _trapezoid_weights(nodes)
    c_vals = bath.correlation(t - nodes)

    for j in range(k_ops):
        # G_j = integral C(t-t') sum_k W_jk A_k(t') dt', then one matrix algebra
        gmat = np.zeros_like(rho)
        for i, a_i in enumerate(node_ops):
            acc = np.zeros_like(rho)
            for k in range(k_ops):
                if w[j, k] != 0.0:
                    acc = acc + w[j, k] * a_i[k]
            gmat = gmat + (weights_q[i] * c_vals[i]) * acc
        gmat = u_now @ gmat @ u_now.conj().T
        gd = gmat.conj().T
        aj = a_now_s[j]
        out += pref * (gmat @ rho @ aj + aj @ rho @ gd - aj @ gmat @ rho - rho @ gd @ aj)
    return out


def _propagator_at(history: CouplingHistory, t: float) -> np.ndarray:
    history.extend_to(t)
    times = np.array(history._times)
    k = int(np.argmin(np.abs(times - t)))
    dt = t - times[k]
    u = history._u[k]
    if abs(dt) < 1e-14:
        return u
    return step_unitary(history.h(times[k] + 0.5 * dt), dt) @ u


def _trapezoid_weights(nodes: np.ndarray) -> np.ndarray:
    w = np.zeros(nodes.size)
    if nodes.size < 2:
        return w
    d = np.diff(nodes)
    w[:-1] += 0.5 * d
    w[1:] += 0.5 * d
    return w


class RedfieldGenerator:
    """Bundles a Hamiltonian, coupling operators and a bath into a generator.

    ``weights`` is the real symmetric spatial correlation matrix W_jk of the
    couplings (identity = independent baths, all-ones = one common bath).
    """

    def __init__(
        self,
        hamiltonian: np.ndarray | Callable[[float], np.ndarray],
        couplings: Sequence[np.ndarray],
        bath: BathModel,
        *,
        g: float,
        omega: float,
        weights: np.ndarray | None = None,
        grid_dt: float | None = None,
        memory_span: float | None = None,
    ) -> None:
        self.bath = bath
        self.g = float(g)
        self.omega = float(omega)
        self.weights = weights
        if bath.kind == "exponential":
            span = 8.0 * bath.tau_env if memory_span is None else float(memory_span)
            if span < 8.0 * bath.tau_env:
                raise ValueError("memory_span must cover at least 8 tau_env")
            dt = (
                min(bath.tau_env / 8.0, 0.1 / max(omega, 1e-30))
                if grid_dt is None
                else float(grid_dt)
            )
        else:
            span = 1.0 if memory_span is None else float(memory_span)
            dt = 0.1 / max(omega, 1e-30) if grid_dt is None else float(grid_dt)
        self.history = CouplingHistory(
            hamiltonian, couplings, grid_dt=dt, memory_span=span
        )

    def h(self, t: float) -> np.ndarray:
        return self.history.h(t)

    def rhs(self, t: float, rho: np.ndarray) -> np.ndarray:
        return redfield_rhs(
            rho,
            t,
            self.history,
            self.bath,
            g=self.g,
            omega=self.omega,
            weights=self.weights,
        )


# ---------------------------------------------------------------------------
# singular-coupling limit


def singular_coupling_generator(
    a_ops: Sequence[np.ndarray],
    correlation: Callable[[int, int, np.ndarray], np.ndarray] | BathModel,
    *,
    g: float = 1.0,
    h_sys: np.ndarray | None = None,
    horizon: float | None = None,
    points: int = 8193,
) -> LindbladGenerator:
    """Markovian generator of the singular-coupling limit.

    Computes ``gamma_ab = integral C_ab(tau) dtau`` (must be positive
    semidefinite, enforced) and ``sigma_ab = integral C_ab(tau) sgn(tau)
    dtau`` by quadrature over ``[-horizon, horizon]``, builds the Lamb-type
    shift ``(g^2/2i) sum sigma_ab A_a A_b`` and decomposes the dissipator

        g^2 sum_ab gamma_ab ( A_b rho A_a - 1/2 {A_a A_b, rho} )

    into explicit jump operators via the eigenbasis of ``gamma``.  The
    returned generator carries ``gamma``/``sigma``/``lamb_shift`` in ``meta``.
    """
    ops = [np.asarray(a, dtype=complex) for a in a_ops]
    k = len(ops)
    if isinstance(correlation, BathModel):
        # gamma = I1 + I1* and sigma = I1 - I1* with I1 the half integral
        half = correlation.half_integral()
        gamma = np.eye(k, dtype=complex) * (2.0 * half.real)
        sigma = np.eye(k, dtype=complex) * (2j * half.imag)
    else:
        if horizon is None:
            raise ValueError("horizon required for a generic correlation table")
        if points % 2 == 0:
            points += 1  # keep a node exactly at tau = 0
        tau = np.linspace(-horizon, horizon, points)
        mid = points // 2
        gamma = np.empty((k, k), dtype=complex)
        sigma = np.empty((k, k), dtype=complex)
        for a in range(k):
            for b in range(k):
                c_tau = np.asarray(correlation(a, b, tau), dtype=complex)
                # split at the |tau| kink so Simpson keeps its full order
                neg = simpson(c_tau[: mid + 1], x=tau[: mid + 1])
                pos = simpson(c_tau[mid:], x=tau[mid:])
                gamma[a, b] = neg + pos
                sigma[a, b] = pos - neg

    gamma = 0.5 * (gamma + gamma.conj().T)  # numerically Hermitian
    vals, vecs = np.linalg.eigh(gamma)
    scale = max(float(np.max(np.abs(vals))), 1e-300)
    if float(vals[0]) < -1e-10 * scale:
        raise ValueError(
            f"gamma matrix is not positive semidefinite (min eigenvalue {vals[0]:.3e})"
        )

    lamb = np.zeros_like(ops[0])
    for a in range(k):
        for b in range(k):
            lamb = lamb + (g * g / 2j) * sigma[a, b] * (ops[a] @ ops[b])
    lamb = 0.5 * (lamb + lamb.conj().T)

    jumps = []
    for i in range(k):
        if vals[i] <= 1e-14 * scale:
            continue
        combo = np.zeros_like(ops[0])
        for a in range(k):
            combo = combo + np.conj(vecs[a, i]) * ops[a]
        jumps.append(np.sqrt(g * g * vals[i].real) * combo)

    h_total = lamb if h_sys is None else np.asarray(h_sys, dtype=complex) + lamb
    return LindbladGenerator(
        hamiltonian=h_total,
        jumps=jumps,
        meta={"gamma": gamma, "sigma": sigma, "lamb_shift": lamb},
    )


# ---------------------------------------------------------------------------
# trajectories


_CSV_COLUMNS = ("t", "f", "P_ground", "P_excited", "trace", "min_eig", "entropy")


@dataclass
class Trajectory:
    """Recorded observables along one evolution.

    ``columns`` always contains the keys in ``_CSV_COLUMNS`` (values may be
    NaN when not applicable); extra observables keep their insertion order.
    """

    columns: dict[str, np.ndarray]
    meta: dict = field(default_factory=dict)
    states: list[np.ndarray] | None = None

    @property
    def times(self) -> np.ndarray:
        return self.columns["t"]

    def column(self, name: str) -> np.ndarray:
        return self.columns[name]

    def final_state(self) -> np.ndarray:
        if not self.states:
            raise ValueError("trajectory was recorded without states")
        return self.states[-1]

    def to_csv(self, path) -> None:
        names = list(_CSV_COLUMNS) + [k for k in self.columns if k not in _CSV_COLUMNS]
        data = np.column_stack([self.columns[k] for k in names])
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(",".join(names) + "\n")
            for row in data:
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")

    def to_json(self, path, *, include_states: bool = False) -> None:
        payload = {
            "meta": _jsonable(self.meta),
            "columns": {k: [float(v) for v in col] for k, col in self.columns.items()},
        }
        if include_states and self.states is not None:
            payload["states"] = [
                {
                    "re": np.real(s).ravel().tolist(),
                    "im": np.imag(s).ravel().tolist(),
                    "dim": s.shape[0],
                }
                for s in self.states
            ]
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


# ---------------------------------------------------------------------------
# adaptive integrator


class PositivityError(RuntimeError):
    """State developed a negative eigenvalue beyond the allowed floor."""


class StepSizeError(RuntimeError):
    """Step control underflowed; the problem is stiffer than the tolerances."""


@dataclass(frozen=True)
class IntegratorOptions:
    rtol: float = 1e-7
    atol: float = 1e-9
    max_step: float = np.inf
    first_step: float | None = None
    max_steps: int = 2_000_000
    records: int = 800
    keep_states: bool = False
    positivity_floor: float = -1e-8
    on_positivity: str = "raise"  # or "record"
    eig_check_dim: int = 64  # check positivity every step up to this dim


# Dormand-Prince 5(4) tableau
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)
_DP_ERR = _DP_B5 - _DP_B4


def evolve(
    generator,
    rho0: np.ndarray,
    horizon: float | tuple[float, float] | None = None,
    *,
    schedule: Schedule | None = None,
    options: IntegratorOptions | None = None,
    observables: Callable[[float, np.ndarray], dict] | None = None,
    record_times: np.ndarray | None = None,
) -> Trajectory:
    """Integrate ``d rho/dt = generator.rhs(t, rho)`` with an embedded DP 5(4) pair.

    After every accepted step the state is re-hermitized and its trace
    renormalized; the pre-renormalization trace is recorded so drift stays
    visible.  Positivity is monitored (never projected): a minimum eigenvalue
    below ``options.positivity_floor`` raises :class:`PositivityError` or, with
    ``on_positivity="record"``, flags the trajectory and continues.  Records
    land exactly on the requested output times.
    """
    opts = options or IntegratorOptions()
    if horizon is None:
        if schedule is None:
            raise ValueError("need a horizon or a schedule")
        t0, t1 = 0.0, schedule.total_time
    elif np.isscalar(horizon):
        t0, t1 = 0.0, float(horizon)
    else:
        t0, t1 = map(float, horizon)
    if t1 <= t0:
        raise ValueError("horizon must advance forward in time")

    if record_times is None:
        record_times = np.linspace(t0, t1, opts.records)
    else:
        record_times = np.asarray(record_times, dtype=float)
        if record_times[0] != t0 or record_times[-1] != t1 or record_times.size < 2:
            raise ValueError("record_times must start at t0 and end at t1")

    rho = np.array(rho0, dtype=complex)
    dim = rho.shape[0]
    rows: list[dict] = []
    states: list[np.ndarray] = []
    meta = {"positivity_flag": False, "min_eig_overall": np.inf, "steps": 0}

    def hamiltonian_at(t: float):
        h_fn = getattr(generator, "h", None)
        return h_fn(t) if h_fn is not None else None

    def record(t: float, rho_now: np.ndarray, raw_trace: float) -> None:
        herm = 0.5 * (rho_now + rho_now.conj().T)
        eigs = np.linalg.eigvalsh(herm)
        min_eig = float(eigs[0])
        meta["min_eig_overall"] = min(meta["min_eig_overall"], min_eig)
        p = eigs[np.abs(eigs) > DEFAULT_TOLERANCES.entropy_floor]
        p = p[p > 0]
        entropy = float(-np.sum(p * np.log(p)))
        row = {
            "t": t,
            "f": schedule.f(t) if schedule is not None else np.nan,
            "P_ground": np.nan,
            "P_excited": np.nan,
            "trace": raw_trace,
            "min_eig": min_eig,
            "entropy": entropy,
        }
        h_now = hamiltonian_at(t)
        if h_now is not None:
            vals, vecs = np.linalg.eigh(h_now)
            row["P_ground"] = float(np.real(vecs[:, 0].conj() @ herm @ vecs[:, 0]))
            if dim > 1:
                row["P_excited"] = float(np.real(vecs[:, 1].conj() @ herm @ vecs[:, 1]))
        if observables is not None:
            row.update(observables(t, herm))
        rows.append(row)
        if opts.keep_states:
            states.append(herm.copy())

    def check_positivity(t: float, rho_now: np.ndarray) -> None:
        lo = float(np.linalg.eigvalsh(rho_now)[0])
        meta["min_eig_overall"] = min(meta["min_eig_overall"], lo)
        if lo < opts.positivity_floor:
            if opts.on_positivity == "record":
                meta["positivity_flag"] = True
            else:
                f_txt = f", f={schedule.f(t):.6f}" if schedule is not None else ""
                raise PositivityError(
                    f"min eigenvalue {lo:.3e} below floor at t={t:.6g}{f_txt}"
                )

    t = t0
    record(t, rho, float(np.real(np.trace(rho))))
    next_record = 1

    k1 = generator.rhs(t, rho)
    scale = float(np.max(np.abs(k1)))
    h_step = opts.first_step or min(
        0.1 / max(scale, 1e-12), (t1 - t0) / 10.0, opts.max_step
    )
    n_accept = 0

    while t < t1 - 1e-14 * max(1.0, abs(t1)):
        if meta["steps"] >= opts.max_steps:
            raise StepSizeError(f"exceeded {opts.max_steps} steps at t={t:.6g}")
        meta["steps"] += 1
        target = record_times[next_record]
        h_step = min(h_step, opts.max_step, t1 - t, target - t)
        if h_step < 1e-13 * max(1.0, abs(t)):
            f_txt = f", f={schedule.f(t):.6f}" if schedule is not None else ""
            raise StepSizeError(f"step size underflow at t={t:.6g}{f_txt}")

        ks = [k1]
        for i in range(1, 7):
            yi = rho + h_step * sum(a * k for a, k in zip(_DP_A[i], ks))
            ks.append(generator.rhs(t + _DP_C[i] * h_step, yi))
        y5 = rho + h_step * sum(b * k for b, k in zip(_DP_B5, ks) if b != 0.0)
        err_vec = h_step * sum(e * k for e, k in zip(_DP_ERR, ks) if e != 0.0)
        tol = opts.atol + opts.rtol * np.maximum(np.abs(rho), np.abs(y5))
        err = float(np.sqrt(np.mean(np.abs(err_vec / tol) ** 2)))

        if err <= 1.0:
            t = t + h_step
            raw_trace = float(np.real(np.trace(y5)))
            rho = 0.5 * (y5 + y5.conj().T)
            if abs(raw_trace) > 1e-300:
                rho = rho / raw_trace
            if dim <= opts.eig_check_dim:
                check_positivity(t, rho)
            n_accept += 1
            if abs(t - record_times[next_record]) < 1e-12 * max(1.0, abs(t)):
                if dim > opts.eig_check_dim:
                    check_positivity(t, rho)
                record(t, rho, raw_trace)
                next_record += 1
                if next_record >= record_times.size:
                    break
            # FSAL would reuse ks[6], but re-hermitization invalidates it
            k1 = generator.rhs(t, rho)
        factor = 0.9 * err ** (-0.2) if err > 0.0 else 5.0
        h_step = h_step * min(5.0, max(0.2, factor))

    columns = {k: np.array([row[k] for row in rows]) for k in rows[0]}
    meta["schedule_kind"] = schedule.kind if schedule is not None else None
    return Trajectory(columns=columns, meta=meta, states=states or None)
