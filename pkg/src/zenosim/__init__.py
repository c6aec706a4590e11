"""Open-system simulations of adiabatic quantum search at desk scale.

Subpackage map: :mod:`zenosim.core` (dense qubit linear algebra),
:mod:`zenosim.grover` (search Hamiltonian and schedules),
:mod:`zenosim.dynamics` (master-equation generators and the adaptive
integrator), :mod:`zenosim.bloch` (two-level relaxation analysis),
:mod:`zenosim.oscillator` (memory-kernel damped oscillator),
:mod:`zenosim.perturbation` (weak-coupling error estimates and exact
joint-system oracles), :mod:`zenosim.experiments` (reproducible runs),
:mod:`zenosim.cli` (command-line front end).
"""

__version__ = "0.1.0"

__all__ = ["__version__"]
