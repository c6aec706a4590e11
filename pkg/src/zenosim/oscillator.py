"""Damped harmonic oscillator with an exponential memory kernel.

The Ohmic bath with a Lorentz-Drude cutoff gives the spectral function
``Gamma(w) = Gamma0 w w_c / (w^2 + w_c^2)`` and the position-coupled memory
kernel ``(Gamma0 w_c / 2) exp(-w_c t)``.  In dimensionless variables
(``alpha = Gamma0/(2 m Omega^2)``, ``beta = w_c/Omega``, ``tau = Omega t``)
the expectation values close either as an integro-differential pair
(:func:`evolve_kernel`, quadrature over stored position history) or as the
time-local enlarged system ``dr/dtau = M r`` with the extra memory variable
``B`` (:func:`evolve_local`).  Strong damping pins the dynamics to the slow
eigenvector of ``M`` whose decay rate shrinks as ``3/sqrt(2 alpha)``: the
oscillator analogue of Zeno freezing.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import IntegrationWarning, quad, solve_ivp
from scipy.interpolate import PchipInterpolator

__all__ = [
    "OscillatorBath",
    "DimensionlessSystem",
    "OscillatorTrajectory",
    "spectral_function",
    "memory_kernel",
    "kernel_from_spectral",
    "m_matrix",
    "curve_beta",
    "analytic_eigenvalues_on_curve",
    "zeno_eigenvector",
    "evolve_local",
    "evolve_kernel",
    "decay_sweep_summary",
]


class OscillatorBath:
    """Bath parameters plus the (possibly driven) trap frequency ``Omega(t)``.

    ``omega`` may be a positive constant, a sampled curve ``(times, values)``
    interpolated monotonically, or a callable.  Sampled curves are the
    preferred contract for drives; callables are convenient for tests.
    """

    def __init__(self, gamma0: float, omega_c: float, *, mass: float = 1.0, omega=1.0):
        if gamma0 < 0.0:
            raise ValueError("gamma0 must be non-negative")
        if omega_c <= 0.0:
            raise ValueError("omega_c must be positive")
        if mass <= 0.0:
            raise ValueError("mass must be positive")
        self.gamma0 = float(gamma0)
        self.omega_c = float(omega_c)
        self.mass = float(mass)
        self._omega_spec = omega
        if np.isscalar(omega):
            if float(omega) <= 0.0:
                raise ValueError("omega must be positive")
            self._omega_kind = "constant"
            self._omega0 = float(omega)
        elif callable(omega):
            self._omega_kind = "callable"
            self._omega0 = float(omega(0.0))
        else:
            times, values = (np.asarray(a, dtype=float) for a in omega)
            if times.size < 2 or np.any(np.diff(times) <= 0.0):
                raise ValueError("sampled omega needs strictly increasing times")
            if np.any(values <= 0.0):
                raise ValueError("omega samples must be positive")
            self._omega_kind = "sampled"
            self._omega_interp = PchipInterpolator(times, values)
            self._omega_deriv = self._omega_interp.derivative()
            self._omega0 = float(values[0])
        if self._omega0 <= 0.0:
            raise ValueError("omega(0) must be positive")

    @property
    def constant_omega(self) -> bool:
        return self._omega_kind == "constant"

    def omega_at(self, t: float) -> float:
        if self._omega_kind == "constant":
            return self._omega0
        if self._omega_kind == "callable":
            return float(self._omega_spec(t))
        return float(self._omega_interp(t))

    def omega_dot(self, t: float) -> float:
        if self._omega_kind == "constant":
            return 0.0
        if self._omega_kind == "sampled":
            return float(self._omega_deriv(t))
        h = 1e-6 * max(1.0, abs(t))
        return (self.omega_at(t + h) - self.omega_at(t - h)) / (2.0 * h)

    def alpha(self, t: float = 0.0) -> float:
        om = self.omega_at(t)
        return self.gamma0 / (2.0 * self.mass * om * om)

    def beta(self, t: float = 0.0) -> float:
        return self.omega_c / self.omega_at(t)


@dataclass(frozen=True)
class DimensionlessSystem:
    """Snapshot of the dimensionless damping/memory pair and its matrix."""

    alpha: float
    beta: float
    matrix: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "matrix", m_matrix(self.alpha, self.beta))


def spectral_function(w, bath: OscillatorBath):
    """``Gamma0 w w_c / (w^2 + w_c^2)`` for frequencies ``w >= 0``."""
    w = np.asarray(w, dtype=float)
    if np.any(w < 0.0):
        raise ValueError("spectral function defined for non-negative frequencies")
    out = bath.gamma0 * w * bath.omega_c / (w * w + bath.omega_c**2)
    return float(out) if out.ndim == 0 else out


def memory_kernel(t, bath: OscillatorBath):
    """``(Gamma0 w_c / 2) exp(-w_c t)`` for delays ``t >= 0``."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0):
        raise ValueError("memory kernel defined for non-negative delays")
    out = 0.5 * bath.gamma0 * bath.omega_c * np.exp(-bath.omega_c * t)
    return float(out) if out.ndim == 0 else out


def kernel_from_spectral(t: float, bath: OscillatorBath) -> float:
    """Sine transform ``(1/pi) integral_0^inf Gamma(w) sin(w t) dw``.

    Quadrature oracle for :func:`memory_kernel`; the two agree analytically.
    """
    if t <= 0.0:
        raise ValueError("transform evaluated for positive delays")
    with warnings.catch_warnings():
        # QAWF emits an advisory on some cycles; convergence is checked below.
        warnings.simplefilter("ignore", IntegrationWarning)
        val, err = quad(
            lambda w: spectral_function(w, bath) / np.pi,
            0.0,
            np.inf,
            weight="sin",
            wvar=t,
            limit=400,
            limlst=200,
            epsabs=1e-13,
        )
    if err > 1e-8 * max(abs(val), 1e-12):
        raise RuntimeError(f"sine-transform quadrature did not converge (err {err:.2e})")
    return val


def m_matrix(alpha: float, beta: float) -> np.ndarray:
    """Coefficient matrix of the enlarged system ``d(x, p, B)/dtau = M r``."""
    if alpha < 0.0 or beta < 0.0:
        raise ValueError("alpha and beta must be non-negative")
    return np.array(
        [
            [0.0, 1.0, 0.0],
            [-(1.0 + alpha), 0.0, 1.0],
            [alpha * beta, 0.0, -beta],
        ]
    )


def curve_beta(alpha: float) -> float:
    """Memory scale ``beta = 3 sqrt((alpha-2)/2)`` of the all-real window."""
    if alpha < 2.0:
        raise ValueError("curve defined for alpha >= 2")
    return 3.0 * np.sqrt((alpha - 2.0) / 2.0)


def analytic_eigenvalues_on_curve(alpha: float) -> np.ndarray:
    """Real eigenvalue triple of ``M`` on the curve ``beta = 3 sqrt((a-2)/2)``.

    Valid for ``alpha >= 8``; the slow rate ``lambda_1`` tends to
    ``-3/sqrt(2 alpha)`` for strong damping.
    """
    if alpha < 8.0:
        raise ValueError("analytic triple valid for alpha >= 8")
    a, b = np.sqrt(alpha - 8.0), np.sqrt(alpha - 2.0)
    lam1 = (a - b) / np.sqrt(2.0)
    lam2 = -b / np.sqrt(2.0)
    lam3 = -(a + b) / np.sqrt(2.0)
    return np.array([lam1, lam2, lam3])


def zeno_eigenvector(alpha: float) -> np.ndarray:
    """Unit eigenvector of the slow mode, ``v prop (1, lambda_1, a+1+lambda_1^2)``.

    Its momentum component shrinks with damping: slow decay protects states
    of negligible momentum.
    """
    lam1 = analytic_eigenvalues_on_curve(alpha)[0]
    v = np.array([1.0, lam1, alpha + 1.0 + lam1 * lam1])
    v = v / np.linalg.norm(v)
    m = m_matrix(alpha, curve_beta(alpha))
    residual = float(np.linalg.norm(m @ v - lam1 * v))
    if residual > 1e-9:
        raise RuntimeError(f"eigenvector residual {residual:.2e} above 1e-9")
    return v


@dataclass
class OscillatorTrajectory:
    """Dimensionless trajectory ``(tau, x, p, B)`` of one oscillator run."""

    tau: np.ndarray
    x: np.ndarray
    p: np.ndarray
    b: np.ndarray
    meta: dict = field(default_factory=dict)

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("tau,x_tilde,p_tilde,B_tilde\n")
            for row in zip(self.tau, self.x, self.p, self.b):
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def _tau_of_t_map(bath: OscillatorBath, tau_end: float):
    """Monotone map between physical time and ``tau = Omega(t) t``."""
    # generous physical window: Omega bounded below by its minimum on a grid
    t_hi = tau_end / bath.omega_at(0.0)
    for _ in range(60):
        if bath.omega_at(t_hi) * t_hi >= tau_end:
            break
        t_hi *= 1.5
    t_grid = np.linspace(0.0, t_hi, 4001)
    om = np.array([bath.omega_at(t) for t in t_grid])
    tau_grid = om * t_grid
    if np.any(np.diff(tau_grid) <= 0.0):
        raise ValueError(
            "frequency drive reverses dimensionless time: (1 + t dOmega/dt / Omega)"
            " must stay positive"
        )
    return PchipInterpolator(tau_grid, t_grid)


def evolve_local(
    bath: OscillatorBath,
    x0: float,
    p0: float,
    horizon: float,
    *,
    points: int = 2001,
    t_eval: np.ndarray | None = None,
    rtol: float = 1e-10,
    atol: float = 1e-12,
    method: str = "RK45",
) -> OscillatorTrajectory:
    """Integrate the time-local enlarged system over ``tau in [0, horizon]``.

    Physical inputs are converted at the boundary using the initial frequency:
    ``x = x0``, ``p = p0/(m Omega(0))``, and the memory variable starts at 0.
    For a driven frequency the equation ``dr/dtau = M(tau) r / (1 + tau
    dOmega/dt / Omega^2)`` is used, with the instantaneous ``alpha, beta``.
    """
    om0 = bath.omega_at(0.0)
    r0 = np.array([x0, p0 / (bath.mass * om0), 0.0])
    if t_eval is None:
        t_eval = np.linspace(0.0, horizon, points)

    if bath.constant_omega:
        m = m_matrix(bath.alpha(), bath.beta())

        def rhs(tau, r):
            return m @ r

    else:
        t_of_tau = _tau_of_t_map(bath, horizon)

        def rhs(tau, r):
            t = float(t_of_tau(tau))
            om = bath.omega_at(t)
            factor = 1.0 + tau * bath.omega_dot(t) / (om * om)
            if factor <= 1e-9:
                raise ValueError("frequency drive too fast: time factor vanished")
            m = m_matrix(
                bath.gamma0 / (2.0 * bath.mass * om * om), bath.omega_c / om
            )
            return (m @ r) / factor

    sol = solve_ivp(
        rhs, (0.0, horizon), r0, t_eval=t_eval, rtol=rtol, atol=atol, method=method
    )
    if not sol.success:
        raise RuntimeError(f"local oscillator integration failed: {sol.message}")
    meta = {"alpha": bath.alpha(), "beta": bath.beta(), "form": "local"}
    return OscillatorTrajectory(sol.t, sol.y[0], sol.y[1], sol.y[2], meta)


def evolve_kernel(
    bath: OscillatorBath,
    x0: float,
    p0: float,
    horizon: float,
    *,
    dt: float = 2e-3,
    stride: int | None = None,
    window: float | None = None,
) -> OscillatorTrajectory:
    """Integrate the memory-integral form by quadrature over stored history.

    Fourth-order multistep scheme (Adams-Bashforth-Moulton predictor and
    corrector) on a uniform grid; the memory term

        B(tau) = alpha beta  integral_0^tau  exp(-beta (tau - s)) x(s) ds

    is evaluated at every node by trapezoid quadrature over the stored
    position history with Euler-Maclaurin endpoint corrections (the endpoint
    derivative is known exactly from ``dx/dtau = p``), truncated beyond
    ``window`` (default ``20/beta``, residual about 2e-9 relative).  Only for
    constant trap frequency; use :func:`evolve_local` for drives.
    """
    if not bath.constant_omega:
        raise ValueError("memory-kernel form implemented for constant omega only")
    if dt <= 0.0 or horizon <= dt * 8:
        raise ValueError("need dt > 0 and a horizon of at least a few steps")
    alpha, beta = bath.alpha(), bath.beta()
    om0 = bath.omega_at(0.0)
    n_steps = int(np.ceil(horizon / dt))
    h = horizon / n_steps
    win = 20.0 / beta if window is None else float(window)
    win_nodes = min(n_steps, int(np.ceil(win / h)))

    # geometric kernel weights exp(-beta h k), newest node first
    decay = np.exp(-beta * h * np.arange(win_nodes + 1))

    x_hist = np.empty(n_steps + 1)
    p_hist = np.empty(n_steps + 1)
    b_hist = np.empty(n_steps + 1)
    x_hist[0], p_hist[0], b_hist[0] = x0, p0 / (bath.mass * om0), 0.0

    def memory_at(n: int, x_n: float, p_n: float) -> float:
        """Corrected trapezoid of alpha beta e^{-beta (tau_n - s)} x(s)."""
        if n == 0:
            return 0.0
        lo = max(0, n - win_nodes)
        count = n - lo  # intervals in the window
        vals = np.empty(count + 1)
        vals[:count] = x_hist[lo:n]
        vals[count] = x_n
        g = vals * decay[count::-1]
        total = h * (np.sum(g) - 0.5 * (g[0] + g[-1]))
        # endpoint correction: g'(s) = e^{-beta (tau_n - s)} (beta x + p)
        gp_hi = beta * x_n + p_n
        x_lo = x_hist[lo]
        p_lo = p_hist[lo]
        gp_lo = decay[count] * (beta * x_lo + p_lo)
        total -= h * h / 12.0 * (gp_hi - gp_lo)
        return alpha * beta * total

    def rhs(n: int, x_n: float, p_n: float) -> tuple[float, float, float]:
        b = memory_at(n, x_n, p_n)
        return p_n, -(1.0 + alpha) * x_n + b, b

    # startup: Heun steps on a fine subgrid (quadrature only at grid nodes)
    sub = 64
    hf = h / sub
    decay_f = np.exp(-beta * hf * np.arange(3 * sub + 1))
    xf = np.empty(3 * sub + 1)
    pf = np.empty(3 * sub + 1)
    xf[0], pf[0] = x_hist[0], p_hist[0]

    def memory_fine(n: int, x_n: float, p_n: float) -> float:
        if n == 0:
            return 0.0
        vals = np.empty(n + 1)
        vals[:n] = xf[:n]
        vals[n] = x_n
        g = vals * decay_f[n::-1]
        total = hf * (np.sum(g) - 0.5 * (g[0] + g[-1]))
        gp_hi = beta * x_n + p_n
        gp_lo = decay_f[n] * (beta * xf[0] + pf[0])
        total -= hf * hf / 12.0 * (gp_hi - gp_lo)
        return alpha * beta * total

    for k in range(3 * sub):
        bk = memory_fine(k, xf[k], pf[k])
        fx, fp = pf[k], -(1.0 + alpha) * xf[k] + bk
        xp, pp = xf[k] + hf * fx, pf[k] + hf * fp
        bp = memory_fine(k + 1, xp, pp)
        gx, gp = pp, -(1.0 + alpha) * xp + bp
        xf[k + 1] = xf[k] + 0.5 * hf * (fx + gx)
        pf[k + 1] = pf[k] + 0.5 * hf * (fp + gp)

    f_hist = []
    for k in range(4):
        if k > 0:
            x_hist[k], p_hist[k] = xf[k * sub], pf[k * sub]
        fx, fp, bk = rhs(k, x_hist[k], p_hist[k])
        b_hist[k] = bk
        f_hist.append((fx, fp))

    # Adams-Bashforth-Moulton 4 in PECE mode
    for n in range(3, n_steps):
        (f0x, f0p), (f1x, f1p), (f2x, f2p), (f3x, f3p) = f_hist[-4:]
        xp = x_hist[n] + h / 24.0 * (55 * f3x - 59 * f2x + 37 * f1x - 9 * f0x)
        pp = p_hist[n] + h / 24.0 * (55 * f3p - 59 * f2p + 37 * f1p - 9 * f0p)
        fpx, fpp, _ = rhs(n + 1, xp, pp)
        x_hist[n + 1] = x_hist[n] + h / 24.0 * (9 * fpx + 19 * f3x - 5 * f2x + f1x)
        p_hist[n + 1] = p_hist[n] + h / 24.0 * (9 * fpp + 19 * f3p - 5 * f2p + f1p)
        fx, fp, bk = rhs(n + 1, x_hist[n + 1], p_hist[n + 1])
        b_hist[n + 1] = bk
        f_hist.append((fx, fp))
        if len(f_hist) > 4:
            f_hist.pop(0)

    if stride is None:
        stride = max(1, n_steps // 2000)
    idx = np.arange(0, n_steps + 1, stride)
    if idx[-1] != n_steps:
        idx = np.append(idx, n_steps)
    tau = h * idx
    meta = {"alpha": alpha, "beta": beta, "form": "kernel", "dt": h, "window": win}
    return OscillatorTrajectory(tau, x_hist[idx], p_hist[idx], b_hist[idx], meta)


def decay_sweep_summary(
    alphas: Sequence[float],
    *,
    horizon: float | None = None,
    path=None,
) -> list[dict]:
    """Slow-rate summary along the all-real curve, optionally written as JSON.

    For each ``alpha``: the curve ``beta``, the analytic eigenvalue triple,
    and the decay rate fitted from a simulated position trajectory.
    """
    out = []
    for alpha in alphas:
        beta = curve_beta(alpha)
        lams = analytic_eigenvalues_on_curve(alpha)
        slow = abs(lams[0])
        # fit only after the two fast modes have decayed relative to the slow one
        gap = abs(lams[1]) - slow
        t_lo = max(1.0, 6.0 / max(gap, slow))
        t_end = t_lo + 3.0 / slow if horizon is None else horizon
        bath = OscillatorBath(2.0 * alpha, beta, omega=1.0)
        traj = evolve_local(bath, 1.0, 0.0, t_end, points=400)
        mask = (traj.tau > t_lo) & (np.abs(traj.x) > 1e-12)
        rate = -np.polyfit(traj.tau[mask], np.log(np.abs(traj.x[mask])), 1)[0]
        out.append(
            {
                "alpha": float(alpha),
                "beta": float(beta),
                "eigenvalues": [float(v) for v in lams],
                "fitted_rate": float(rate),
            }
        )
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(out, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return out
