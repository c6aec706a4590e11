"""Central numeric tolerances shared across the package.

Every validation and solver default reads from one record so that a single
override propagates consistently (tests rely on these values being frozen).
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    """Package-wide numeric tolerances.

    Attributes
    ----------
    hermiticity : float
        Relative Frobenius tolerance for accepting a matrix as Hermitian.
    trace : float
        Absolute tolerance on ``|tr(rho) - 1|`` for density matrices.
    psd : float
        Most negative eigenvalue accepted when validating positivity.
    eig_residual : float
        Relative tolerance on ``||H - V diag(w) V^dag||`` after an eigensolve.
    entropy_floor : float
        Eigenvalues below this are treated as exact zeros inside logs.
    atol : float
        Default absolute tolerance of the adaptive integrator.
    rtol : float
        Default relative tolerance of the adaptive integrator.
    trace_drift : float
        Allowed drift of ``tr(rho)`` along a trajectory before renormalizing
        is considered a failure.
    positivity_floor : float
        Trajectory minimum eigenvalue below this aborts the run.
    """

    hermiticity: float = 1e-12
    trace: float = 1e-10
    psd: float = -1e-10
    eig_residual: float = 1e-10
    entropy_floor: float = 1e-14
    atol: float = 1e-9
    rtol: float = 1e-7
    trace_drift: float = 1e-8
    positivity_floor: float = -1e-8


#: Shared default instance; pass an explicit ``Tolerances`` to override.
DEFAULT_TOLERANCES = Tolerances()

#: Largest qubit register for dense operators (dim 2**14 = 16384).
MAX_QUBITS = 14
