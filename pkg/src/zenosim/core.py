"""Dense linear-algebra primitives for small qubit registers.

Conventions: qubit 0 is the most significant bit of the basis index, basis
states are ordered lexicographically, and spin-up is ``|1>``.  All operators
are dense complex ``numpy`` arrays; the register size is capped at
``MAX_QUBITS`` so a full eigensolve stays within desk-scale memory.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import DEFAULT_TOLERANCES, MAX_QUBITS, Tolerances

__all__ = [
    "PAULI",
    "EigenSystem",
    "pauli_matrix",
    "pauli_operator",
    "basis_state",
    "pure_state_density",
    "require_hermitian",
    "require_density_matrix",
    "hermitian_eigensystem",
    "von_neumann_entropy",
    "expectation",
    "trace_distance",
    "maximally_mixed",
]

PAULI = {
    "i": np.eye(2, dtype=complex),
    "x": np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex),
    "y": np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex),
    "z": np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex),
}


def pauli_matrix(axis: str) -> np.ndarray:
    """Return a copy of the single-qubit Pauli matrix for ``axis``."""
    try:
        return PAULI[axis.lower()].copy()
    except KeyError:
        raise ValueError(f"unknown Pauli axis {axis!r}; expected one of i, x, y, z")


def pauli_operator(axis: str, qubit: int, n: int) -> np.ndarray:
    """Embed a single-qubit Pauli into an ``n``-qubit register.

    Parameters
    ----------
    axis : str
        One of ``"x"``, ``"y"``, ``"z"`` (or ``"i"``).
    qubit : int
        Target qubit; qubit 0 is the most significant bit.
    n : int
        Register size, ``1 <= n <= MAX_QUBITS``.

    Returns
    -------
    numpy.ndarray
        Dense ``(2**n, 2**n)`` complex matrix ``I ⊗ ... ⊗ σ ⊗ ... ⊗ I``.
    """
    if not 1 <= n <= MAX_QUBITS:
        raise ValueError(f"register size n={n} outside [1, {MAX_QUBITS}]")
    if not 0 <= qubit < n:
        raise ValueError(f"qubit index {qubit} outside register of size {n}")
    sigma = pauli_matrix(axis)
    left = 2**qubit
    right = 2 ** (n - qubit - 1)
    return np.kron(np.kron(np.eye(left), sigma), np.eye(right)).astype(complex)


def basis_state(index: int, dim: int) -> np.ndarray:
    """Computational basis ket ``|index>`` as a length-``dim`` vector."""
    if not 0 <= index < dim:
        raise ValueError(f"basis index {index} outside [0, {dim})")
    vec = np.zeros(dim, dtype=complex)
    vec[index] = 1.0
    return vec


def pure_state_density(psi: np.ndarray) -> np.ndarray:
    """Density matrix ``|psi><psi|`` of a normalized state vector."""
    psi = np.asarray(psi, dtype=complex)
    norm = np.linalg.norm(psi)
    if norm == 0.0:
        raise ValueError("zero state vector")
    psi = psi / norm
    return np.outer(psi, psi.conj())


def _frobenius(a: np.ndarray) -> float:
    return float(np.linalg.norm(a))


def require_hermitian(
    a: np.ndarray, *, tols: Tolerances = DEFAULT_TOLERANCES, name: str = "matrix"
) -> np.ndarray:
    """Validate Hermiticity to relative Frobenius tolerance and return ``a``."""
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    scale = max(_frobenius(a), 1.0)
    defect = _frobenius(a - a.conj().T)
    if defect > tols.hermiticity * scale:
        raise ValueError(
            f"{name} is not Hermitian: relative defect {defect / scale:.3e} "
            f"exceeds {tols.hermiticity:.1e}"
        )
    return a


def require_density_matrix(
    rho: np.ndarray, *, tols: Tolerances = DEFAULT_TOLERANCES
) -> np.ndarray:
    """Validate Hermiticity, unit trace and positivity of ``rho``."""
    rho = require_hermitian(rho, tols=tols, name="density matrix")
    tr = complex(np.trace(rho))
    if abs(tr - 1.0) > tols.trace:
        raise ValueError(f"density matrix trace {tr} deviates from 1 beyond {tols.trace:.1e}")
    lo = float(np.linalg.eigvalsh(rho)[0])
    if lo < tols.psd:
        raise ValueError(f"density matrix has negative eigenvalue {lo:.3e}")
    return rho


@dataclass(frozen=True)
class EigenSystem:
    """Eigendecomposition with a reproducible ordering and phase convention.

    ``values`` ascend; ``vectors[:, k]`` is the unit eigenvector of
    ``values[k]`` with its largest-magnitude component made real positive.
    """

    values: np.ndarray
    vectors: np.ndarray

    @property
    def ground(self) -> np.ndarray:
        return self.vectors[:, 0]

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * self.values) @ self.vectors.conj().T


def _fix_phases(vectors: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Rotate each column so its largest-|.| component is real positive."""
    anchors = np.argmax(np.abs(vectors), axis=0)
    fixed = vectors.copy()
    for k, j in enumerate(anchors):
        pivot = fixed[j, k]
        if pivot != 0.0:
            fixed[:, k] *= np.conj(pivot) / abs(pivot)
    return fixed, anchors


def hermitian_eigensystem(
    h: np.ndarray, *, tols: Tolerances = DEFAULT_TOLERANCES
) -> EigenSystem:
    """Eigendecompose a Hermitian matrix with deterministic tie-breaking.

    Eigenvalues come out ascending.  Within groups degenerate to within
    ``tols.eig_residual * scale`` the columns are ordered by the index of
    their largest-magnitude component, and every column's phase is fixed so
    that component is real positive, which makes repeated runs byte-stable.
    """
    h = require_hermitian(h, tols=tols, name="Hamiltonian")
    values, vectors = np.linalg.eigh(h)
    vectors, anchors = _fix_phases(vectors)

    scale = max(float(np.max(np.abs(values))), 1.0)
    tie = tols.eig_residual * scale
    order = np.arange(values.size)
    start = 0
    while start < values.size:
        stop = start + 1
        while stop < values.size and values[stop] - values[start] <= tie:
            stop += 1
        if stop - start > 1:
            block = order[start:stop]
            order[start:stop] = block[np.argsort(anchors[block], kind="stable")]
        start = stop
    values = values[order]
    vectors = vectors[:, order]

    residual = _frobenius((vectors * values) @ vectors.conj().T - h)
    if residual > tols.eig_residual * max(_frobenius(h), 1.0):
        raise ArithmeticError(f"eigendecomposition residual {residual:.3e} too large")
    return EigenSystem(values=values, vectors=vectors)


def von_neumann_entropy(
    rho: np.ndarray,
    *,
    floor: float | None = None,
    tols: Tolerances = DEFAULT_TOLERANCES,
    validate: bool = True,
) -> float:
    """Von Neumann entropy ``-tr(rho ln rho)`` in nats.

    Eigenvalues below ``floor`` (default ``tols.entropy_floor``) are treated
    as exact zeros, so pure states return 0 instead of NaN.
    """
    if validate:
        rho = require_density_matrix(rho, tols=tols)
    eps = tols.entropy_floor if floor is None else floor
    p = np.linalg.eigvalsh(rho)
    p = p[p > eps]
    return float(-np.sum(p * np.log(p)))


def expectation(
    rho: np.ndarray, a: np.ndarray, *, tols: Tolerances = DEFAULT_TOLERANCES
) -> float:
    """Real expectation value ``tr(rho A)`` of a Hermitian observable.

    The imaginary part must be numerical noise (below 1e-10 relative to the
    result scale); anything larger indicates a non-Hermitian input and raises.
    """
    val = complex(np.trace(rho @ a))
    if abs(val.imag) > 1e-10 * max(1.0, abs(val.real)):
        raise ValueError(f"expectation value has imaginary part {val.imag:.3e}")
    return float(val.real)


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Trace distance ``0.5 ||rho - sigma||_1`` between Hermitian matrices."""
    diff = np.asarray(rho) - np.asarray(sigma)
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(diff))))


def maximally_mixed(dim: int) -> np.ndarray:
    """The state ``I/dim``."""
    return np.eye(dim, dtype=complex) / dim
