"""Two-level analytic laboratory: Bloch matrices, Zeno survival, entropy rate.

The three dissipative variants share the Hamiltonian ``Omega sigma_y`` and
differ in the jump content: z-dephasing, both-projector measurement, and
infinite-temperature relaxation.  Their Bloch-vector dynamics is linear,
``dv/dt = M v`` with a real 3x3 matrix, so the crossover from damped Rabi
oscillation to Zeno freezing is read off the eigenvalues of ``M``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import PAULI, require_hermitian

__all__ = [
    "BlochMatrix",
    "ZenoSurvival",
    "bloch_matrix",
    "bloch_model",
    "bloch_eigenvalues",
    "closed_form_eigenvalues",
    "bloch_vector",
    "density_from_bloch",
    "entropy_production",
    "strong_dissipation_rates",
    "eigenvalue_sweep",
]

_VARIANTS = ("dephasing_z", "two_projectors", "relaxation")


@dataclass(frozen=True)
class BlochMatrix:
    """3x3 real generator of ``dv/dt = M v`` for one dissipative variant."""

    variant: str
    omega: float
    rates: tuple[float, ...]
    matrix: np.ndarray

    def __post_init__(self) -> None:
        if self.variant not in _VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")


def _check_rates(*rates: float) -> None:
    for r in rates:
        if r < 0.0:
            raise ValueError("rates must be non-negative")


def bloch_matrix(
    variant: str,
    *,
    omega: float,
    gamma: float | None = None,
    gamma1: float | None = None,
    gamma2: float | None = None,
    sigma_rate: float | None = None,
) -> BlochMatrix:
    """Bloch generator for one of the three dissipative two-level models.

    ``dephasing_z`` needs ``gamma``; ``two_projectors`` needs ``gamma1`` and
    ``gamma2``; ``relaxation`` needs ``sigma_rate``.
    """
    if variant == "dephasing_z":
        if gamma is None:
            raise ValueError("dephasing_z needs gamma")
        _check_rates(gamma)
        m = np.array(
            [
                [-2.0 * gamma, 0.0, 2.0 * omega],
                [0.0, -2.0 * gamma, 0.0],
                [-2.0 * omega, 0.0, 0.0],
            ]
        )
        return BlochMatrix(variant, omega, (gamma,), m)
    if variant == "two_projectors":
        if gamma1 is None or gamma2 is None:
            raise ValueError("two_projectors needs gamma1 and gamma2")
        _check_rates(gamma1, gamma2)
        half = 0.5 * (gamma1 + gamma2)
        m = np.array(
            [
                [-half, 0.0, 2.0 * omega],
                [0.0, -half, 0.0],
                [-2.0 * omega, 0.0, 0.0],
            ]
        )
        return BlochMatrix(variant, omega, (gamma1, gamma2), m)
    if variant == "relaxation":
        if sigma_rate is None:
            raise ValueError("relaxation needs sigma_rate")
        _check_rates(sigma_rate)
        m = np.array(
            [
                [-0.5 * sigma_rate, 0.0, 2.0 * omega],
                [0.0, -0.5 * sigma_rate, 0.0],
                [-2.0 * omega, 0.0, -sigma_rate],
            ]
        )
        return BlochMatrix(variant, omega, (sigma_rate,), m)
    raise ValueError(f"unknown variant {variant!r}")


def bloch_model(m: BlochMatrix) -> tuple[np.ndarray, list[np.ndarray]]:
    """Hamiltonian and jump operators generating the same Bloch dynamics.

    All variants rotate with ``H = Omega sigma_y``.  The relaxation variant
    uses symmetric raising/lowering jumps so the Bloch equation stays
    homogeneous (no drift term), matching the displayed matrix exactly.
    """
    h = m.omega * PAULI["y"]
    if m.variant == "dephasing_z":
        (gamma,) = m.rates
        return h, [np.sqrt(gamma) * PAULI["z"]]
    if m.variant == "two_projectors":
        gamma1, gamma2 = m.rates
        up = np.diag([1.0, 0.0]).astype(complex)
        down = np.diag([0.0, 1.0]).astype(complex)
        return h, [np.sqrt(gamma1) * up, np.sqrt(gamma2) * down]
    (sig,) = m.rates
    raise_op = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
    lower_op = raise_op.conj().T
    return h, [np.sqrt(sig / 2.0) * raise_op, np.sqrt(sig / 2.0) * lower_op]


def bloch_eigenvalues(m: BlochMatrix | np.ndarray) -> np.ndarray:
    """Numeric eigenvalues sorted by descending real part (then imag)."""
    mat = m.matrix if isinstance(m, BlochMatrix) else np.asarray(m)
    vals = np.linalg.eigvals(mat)
    order = np.lexsort((-vals.imag, -vals.real))
    return vals[order]


def closed_form_eigenvalues(m: BlochMatrix) -> np.ndarray:
    """Analytic eigenvalue triple for the variant, in the numeric sort order.

    The decoupled y-row contributes one real eigenvalue; the (x, z) block
    contributes the pair.  Written with complex square roots so both the
    underdamped and the Zeno regime come out right.
    """
    om = m.omega
    if m.variant == "dephasing_z":
        (gamma,) = m.rates
        root = np.sqrt(complex(gamma * gamma - 4.0 * om * om))
        vals = np.array([-2.0 * gamma, -gamma + root, -gamma - root])
    elif m.variant == "two_projectors":
        gamma1, gamma2 = m.rates
        s = gamma1 + gamma2
        root = np.sqrt(complex(s * s - 64.0 * om * om))
        vals = np.array([-0.5 * s, 0.25 * (-s + root), 0.25 * (-s - root)])
    else:
        (sig,) = m.rates
        root = np.sqrt(complex(sig * sig - 64.0 * om * om))
        vals = np.array([-0.5 * sig, 0.25 * (-3.0 * sig + root), 0.25 * (-3.0 * sig - root)])
    order = np.lexsort((-vals.imag, -vals.real))
    return vals[order]


def bloch_vector(rho: np.ndarray) -> np.ndarray:
    """``(<sigma_x>, <sigma_y>, <sigma_z>)`` of a 2x2 density matrix."""
    return np.array(
        [float(np.real(np.trace(PAULI[ax] @ rho))) for ax in ("x", "y", "z")]
    )


def density_from_bloch(v: Sequence[float]) -> np.ndarray:
    """``rho = (1 + v . sigma)/2``; requires ``|v| <= 1``."""
    v = np.asarray(v, dtype=float)
    if np.linalg.norm(v) > 1.0 + 1e-12:
        raise ValueError("Bloch vector must lie inside the unit ball")
    rho = 0.5 * (
        np.eye(2, dtype=complex)
        + v[0] * PAULI["x"]
        + v[1] * PAULI["y"]
        + v[2] * PAULI["z"]
    )
    return rho


@dataclass(frozen=True)
class ZenoSurvival:
    """Survival under ``n_meas`` projective checks spaced ``dt`` apart."""

    omega: float
    dt: float
    n_meas: int

    def __post_init__(self) -> None:
        if self.n_meas < 1:
            raise ValueError("need at least one measurement")
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")

    @property
    def survival(self) -> float:
        return float(np.cos(self.omega * self.dt) ** (2 * self.n_meas))

    @property
    def transition(self) -> float:
        return 1.0 - self.survival

    @property
    def weak_pulse_estimate(self) -> float:
        """Leading-order transition ``n (Omega dt)^2``, valid when small."""
        return self.n_meas * (self.omega * self.dt) ** 2


def entropy_production(
    rho: np.ndarray, l_op: np.ndarray, *, floor: float = 1e-14
) -> float:
    """Entropy rate of the dissipator with the self-adjoint jump ``l_op``.

    Evaluated in the eigenbasis of ``rho`` as
    ``1/2 sum_ab |L_ab|^2 (p_a - p_b)(ln p_a - ln p_b)``, a sum of
    non-negative terms, so the result is non-negative by construction.
    Eigenvalues of ``rho`` are floored at ``floor`` to keep the logarithm
    finite for (numerically) rank-deficient states.
    """
    require_hermitian(l_op, name="jump operator")
    p, vecs = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    p = np.clip(p.real, floor, None)
    p = p / p.sum()
    l_eig = vecs.conj().T @ l_op @ vecs
    diff = p[:, None] - p[None, :]
    logdiff = np.log(p)[:, None] - np.log(p)[None, :]
    return float(0.5 * np.sum(np.abs(l_eig) ** 2 * diff * logdiff))


def strong_dissipation_rates(
    h: np.ndarray,
    o: np.ndarray,
    gamma: float,
    *,
    gap_threshold: float = 1e-6,
) -> np.ndarray:
    """Classical rate matrix of the strong-measurement limit ``L = sqrt(G) O``.

    In the eigenbasis of ``O`` (eigenvalues ``lam_l``), populations hop with
    rates ``W_ln = 4 |<l|H|n>|^2 / (G (lam_l - lam_n)^2)``; diagonals make
    columns sum to zero.  The matrix is symmetric, so the uniform distribution
    is stationary.  Near-degenerate ``O`` spectra are rejected because the
    adiabatic elimination underlying the formula breaks down.
    """
    if gamma <= 0.0:
        raise ValueError("gamma must be positive")
    require_hermitian(h, name="hamiltonian")
    require_hermitian(o, name="measured operator")
    lam, vecs = np.linalg.eigh(o)
    spread = float(lam[-1] - lam[0])
    gaps = np.diff(lam)
    if spread <= 0.0 or float(np.min(gaps)) < gap_threshold * spread:
        raise ValueError("measured operator has (near-)degenerate eigenvalues")
    h_eig = vecs.conj().T @ h @ vecs
    k = lam.size
    w = np.zeros((k, k))
    for l in range(k):
        for n in range(k):
            if l == n:
                continue
            w[l, n] = 4.0 * abs(h_eig[l, n]) ** 2 / (gamma * (lam[l] - lam[n]) ** 2)
    w -= np.diag(w.sum(axis=0))
    return w


_SWEEP_HEADER = (
    "Gamma_over_Omega,Re_lambda0,Re_lambda_plus,Re_lambda_minus,"
    "Im_lambda_plus,Im_lambda_minus"
)


def eigenvalue_sweep(
    variant: str,
    ratios: Sequence[float],
    *,
    omega: float = 1.0,
    path=None,
) -> np.ndarray:
    """Eigenvalue triple versus rate/Omega ratio; optionally written as CSV.

    ``lambda_0`` is the decoupled y-row eigenvalue; ``lambda_+/-`` come from
    the (x, z) block, ``+`` the one with the larger real part (slow mode in
    the Zeno regime).  Rows: ratio, Re l0, Re l+, Re l-, Im l+, Im l-.
    """
    rows = []
    for r in ratios:
        rate = float(r) * omega
        if variant == "dephasing_z":
            m = bloch_matrix(variant, omega=omega, gamma=rate)
        elif variant == "two_projectors":
            m = bloch_matrix(variant, omega=omega, gamma1=rate, gamma2=rate)
        else:
            m = bloch_matrix(variant, omega=omega, sigma_rate=rate)
        lam0 = m.matrix[1, 1]
        block = m.matrix[np.ix_((0, 2), (0, 2))]
        pair = np.linalg.eigvals(block)
        order = np.lexsort((-pair.imag, -pair.real))
        pair = pair[order]
        rows.append(
            [r, lam0, pair[0].real, pair[1].real, pair[0].imag, pair[1].imag]
        )
    data = np.array(rows)
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(_SWEEP_HEADER + "\n")
            for row in data:
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
    return data
