"""Tests for the two-level Bloch models, Zeno survival and entropy rates."""

import numpy as np
import pytest
from scipy.linalg import expm

from zenosim.bloch import (
    BlochMatrix,
    ZenoSurvival,
    bloch_eigenvalues,
    bloch_matrix,
    bloch_model,
    bloch_vector,
    closed_form_eigenvalues,
    density_from_bloch,
    eigenvalue_sweep,
    entropy_production,
    strong_dissipation_rates,
)
from zenosim.core import PAULI, von_neumann_entropy
from zenosim.dynamics import IntegratorOptions, LindbladGenerator, evolve

SX, SY, SZ = PAULI["x"], PAULI["y"], PAULI["z"]


# ---------------------------------------------------------------------------
# matrices and eigenvalues


def test_dephasing_matrix_entries():
    m = bloch_matrix("dephasing_z", omega=1.0, gamma=3.0)
    expected = np.array([[-6.0, 0.0, 2.0], [0.0, -6.0, 0.0], [-2.0, 0.0, 0.0]])
    np.testing.assert_allclose(m.matrix, expected)


def test_dephasing_unitary_limit_is_rotation():
    m = bloch_matrix("dephasing_z", omega=1.0, gamma=0.0)
    np.testing.assert_allclose(m.matrix, -m.matrix.T)
    vals = bloch_eigenvalues(m)
    np.testing.assert_allclose(sorted(vals.imag), [-2.0, 0.0, 2.0], atol=1e-12)
    np.testing.assert_allclose(vals.real, 0.0, atol=1e-12)


def test_dephasing_eigenvalues_frozen_case():
    m = bloch_matrix("dephasing_z", omega=1.0, gamma=3.0)
    vals = bloch_eigenvalues(m)
    expected = np.array([-3.0 + np.sqrt(5.0), -3.0 - np.sqrt(5.0), -6.0])
    np.testing.assert_allclose(vals.real, expected, atol=1e-12)
    np.testing.assert_allclose(vals.imag, 0.0, atol=1e-12)


def test_two_projector_critical_damping():
    m = bloch_matrix("two_projectors", omega=1.0, gamma1=4.0, gamma2=4.0)
    vals = bloch_eigenvalues(m)
    np.testing.assert_allclose(sorted(vals.real), [-4.0, -2.0, -2.0], atol=1e-7)


def test_relaxation_critical_damping():
    m = bloch_matrix("relaxation", omega=1.0, sigma_rate=8.0)
    vals = bloch_eigenvalues(m)
    np.testing.assert_allclose(sorted(vals.real), [-6.0, -6.0, -4.0], atol=1e-6)


@pytest.mark.parametrize("ratio", [1e-2, 0.1, 1.0, 10.0, 1e3])
def test_closed_forms_match_numeric_dephasing(ratio):
    m = bloch_matrix("dephasing_z", omega=1.0, gamma=ratio)
    np.testing.assert_allclose(
        bloch_eigenvalues(m), closed_form_eigenvalues(m), atol=1e-10
    )


def test_closed_forms_match_numeric_all_variants():
    rng = np.random.default_rng(3)
    for _ in range(40):
        om = rng.uniform(0.2, 3.0)
        g1, g2, sig = rng.uniform(0.0, 20.0, size=3)
        for m in (
            bloch_matrix("dephasing_z", omega=om, gamma=g1),
            bloch_matrix("two_projectors", omega=om, gamma1=g1, gamma2=g2),
            bloch_matrix("relaxation", omega=om, sigma_rate=sig),
        ):
            np.testing.assert_allclose(
                bloch_eigenvalues(m), closed_form_eigenvalues(m), atol=1e-8
            )
            assert bloch_eigenvalues(m).real.max() <= 1e-12


def test_slow_eigenvalue_approaches_zeno_rate():
    # strong dephasing: slowest decay -> -2 Omega^2 / Gamma
    gamma = 50.0
    m = bloch_matrix("dephasing_z", omega=1.0, gamma=gamma)
    slow = bloch_eigenvalues(m)[0].real
    assert abs(slow + 2.0 / gamma) / (2.0 / gamma) < 4.0 / gamma**2


def test_matrix_validation():
    with pytest.raises(ValueError):
        bloch_matrix("dephasing_z", omega=1.0, gamma=-1.0)
    with pytest.raises(ValueError):
        bloch_matrix("squeezing", omega=1.0, gamma=1.0)
    with pytest.raises(ValueError):
        bloch_matrix("two_projectors", omega=1.0, gamma1=1.0)


# ---------------------------------------------------------------------------
# Bloch dynamics vs the master equation


@pytest.mark.parametrize(
    "m",
    [
        bloch_matrix("dephasing_z", omega=1.0, gamma=0.7),
        bloch_matrix("two_projectors", omega=1.0, gamma1=0.8, gamma2=1.9),
        bloch_matrix("relaxation", omega=1.0, sigma_rate=1.3),
    ],
    ids=["dephasing_z", "two_projectors", "relaxation"],
)
def test_master_equation_matches_matrix_exponential(m):
    h, jumps = bloch_model(m)
    v0 = np.array([0.3, -0.2, 0.8])
    rho0 = density_from_bloch(v0)
    t_end = 4.0
    pts = np.linspace(0.0, t_end, 9)
    traj = evolve(
        LindbladGenerator(h, jumps),
        rho0,
        t_end,
        record_times=pts,
        options=IntegratorOptions(keep_states=True, rtol=1e-10, atol=1e-12),
    )
    for t, rho in zip(pts, traj.states):
        expected = expm(m.matrix * t) @ v0
        np.testing.assert_allclose(bloch_vector(rho), expected, atol=1e-7)


def _fitted_slow_rate(gamma, omega=1.0):
    """Log-linear decay fit of <sigma_z> from a simulated trajectory."""
    m = bloch_matrix("dephasing_z", omega=omega, gamma=gamma)
    h, jumps = bloch_model(m)
    rho0 = density_from_bloch([0.0, 0.0, 1.0])
    if gamma < 2.0 * omega:
        # underdamped: sample at period multiples so the envelope is clean,
        # and stop near three decay times to stay above integrator noise
        period = 2.0 * np.pi / np.sqrt(4.0 * omega**2 - gamma**2)
        count = int(np.clip(np.ceil(3.0 / (gamma * period)), 3, 40))
        pts = period * np.arange(count + 1)
    else:
        slow = gamma - np.sqrt(gamma**2 - 4.0 * omega**2)
        pts = np.linspace(8.0 / gamma, 8.0 / gamma + 3.0 / slow, 40)
        pts = np.concatenate([[0.0], pts])
    traj = evolve(
        LindbladGenerator(h, jumps),
        rho0,
        (0.0, pts[-1]),
        record_times=pts,
        options=IntegratorOptions(rtol=1e-9, atol=1e-12),
        observables=lambda t, rho: {"sz": float(np.real(np.trace(SZ @ rho)))},
    )
    sz = traj.column("sz")[1:] if gamma >= 2.0 * omega else traj.column("sz")
    tt = traj.times[1:] if gamma >= 2.0 * omega else traj.times
    mask = sz > 1e-7
    slope = np.polyfit(tt[mask], np.log(sz[mask]), 1)[0]
    return -slope


@pytest.mark.parametrize("ratio", [0.1, 1.0, 10.0, 100.0])
def test_zeno_crossover_fitted_rate_matches_eigenvalue(ratio):
    m = bloch_matrix("dephasing_z", omega=1.0, gamma=ratio)
    slow = -bloch_eigenvalues(m)[0].real
    fitted = _fitted_slow_rate(ratio)
    assert abs(fitted - slow) / slow < 0.02


# ---------------------------------------------------------------------------
# Zeno survival


def test_survival_single_half_pulse():
    z = ZenoSurvival(omega=1.0, dt=np.pi / 2.0, n_meas=1)
    np.testing.assert_allclose(z.transition, 1.0, atol=1e-15)


def test_survival_frozen_value():
    z = ZenoSurvival(omega=1.0, dt=np.pi / 200.0, n_meas=100)
    assert abs(z.survival - 0.97563) < 1e-5
    np.testing.assert_allclose(
        z.survival, np.cos(np.pi / 200.0) ** 200, rtol=1e-15
    )


def test_transition_weak_pulse_regime():
    rng = np.random.default_rng(5)
    for _ in range(50):
        n = int(rng.integers(1, 2000))
        x = np.sqrt(rng.uniform(1e-6, 0.01) / n)
        z = ZenoSurvival(omega=1.0, dt=x, n_meas=n)
        est = z.weak_pulse_estimate
        assert est <= 0.0100001
        assert abs(z.transition - est) / est < 0.03


def test_survival_monotone_in_measurement_count():
    total = np.pi / 2.0  # fixed overall rotation angle
    probs = [
        ZenoSurvival(omega=1.0, dt=total / n, n_meas=n).survival
        for n in (1, 2, 4, 8, 16, 64, 256, 1024)
    ]
    assert all(b > a for a, b in zip(probs, probs[1:]))
    # Zeno limit: survival -> exp(-pi^2/(4 n)) -> 1
    np.testing.assert_allclose(probs[-1], np.exp(-np.pi**2 / 4096.0), rtol=1e-6)
    assert probs[-1] > 0.995


def test_survival_validation():
    with pytest.raises(ValueError):
        ZenoSurvival(omega=1.0, dt=0.0, n_meas=1)
    with pytest.raises(ValueError):
        ZenoSurvival(omega=1.0, dt=0.1, n_meas=0)


# ---------------------------------------------------------------------------
# entropy production


def test_entropy_production_commuting_case_vanishes():
    rho = np.diag([0.7, 0.3]).astype(complex)
    assert abs(entropy_production(rho, 1.3 * SZ)) < 1e-12


def test_entropy_production_frozen_value():
    rho = np.diag([0.9, 0.1]).astype(complex)
    rate = entropy_production(rho, SX)
    np.testing.assert_allclose(rate, 0.8 * np.log(9.0), rtol=1e-12)
    gamma = 2.5
    np.testing.assert_allclose(
        entropy_production(rho, np.sqrt(gamma) * SX), gamma * 0.8 * np.log(9.0),
        rtol=1e-12,
    )


def test_entropy_production_matches_finite_difference():
    rho = np.diag([0.9, 0.1]).astype(complex)
    l_op = SX
    drho = l_op @ rho @ l_op - 0.5 * (l_op @ l_op @ rho + rho @ l_op @ l_op)
    h = 1e-6
    s_plus = von_neumann_entropy(rho + h * drho, validate=False)
    s_minus = von_neumann_entropy(rho - h * drho, validate=False)
    fd = (s_plus - s_minus) / (2.0 * h)
    rate = entropy_production(rho, l_op)
    assert abs(rate - fd) / fd < 1e-4


def test_entropy_production_never_negative():
    rng = np.random.default_rng(17)
    for dim in (2, 4):
        for _ in range(500):
            a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
            rho = a @ a.conj().T
            rho /= np.trace(rho).real
            b = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
            l_op = 0.5 * (b + b.conj().T)
            assert entropy_production(rho, l_op) >= -1e-10


def test_entropy_production_rejects_non_hermitian():
    rho = np.diag([0.6, 0.4]).astype(complex)
    lower = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)
    with pytest.raises(ValueError):
        entropy_production(rho, lower)


# ---------------------------------------------------------------------------
# strong-dissipation rate equation


def test_rates_commuting_hamiltonian_is_frozen():
    h = np.diag([0.4, -1.1, 0.7]).astype(complex)
    o = np.diag([1.0, 2.0, 3.0]).astype(complex)
    w = strong_dissipation_rates(h, o, 5.0)
    np.testing.assert_allclose(w, 0.0, atol=1e-14)


def test_rates_two_level_value_and_scaling():
    gamma = 10.0
    w = strong_dissipation_rates(SY, SZ, gamma)
    np.testing.assert_allclose(w[0, 1], 1.0 / gamma, rtol=1e-12)
    np.testing.assert_allclose(w[1, 0], 1.0 / gamma, rtol=1e-12)
    np.testing.assert_allclose(w.sum(axis=0), 0.0, atol=1e-14)
    w2 = strong_dissipation_rates(SY, SZ, 2.0 * gamma)
    np.testing.assert_allclose(w2, 0.5 * w, rtol=1e-12)


def test_rates_stationary_distribution_is_uniform():
    rng = np.random.default_rng(23)
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    h = 0.5 * (a + a.conj().T)
    o = np.diag([0.0, 1.0, 2.5, 4.0]).astype(complex)
    w = strong_dissipation_rates(h, o, 3.0)
    uniform = np.full(4, 0.25)
    np.testing.assert_allclose(w @ uniform, 0.0, atol=1e-12)


def test_rates_match_full_lindblad_relaxation():
    # strong measurement of sigma_z while sigma_y rotates: the z-magnetization
    # relaxes at W_01 + W_10 = 2 Omega^2 / Gamma
    gamma = 20.0
    w = strong_dissipation_rates(SY, SZ, gamma)
    predicted = w[0, 1] + w[1, 0]
    gen = LindbladGenerator(SY, [np.sqrt(gamma) * SZ])
    pts = np.concatenate([[0.0], np.linspace(1.0, 25.0, 49)])
    traj = evolve(
        gen,
        density_from_bloch([0.0, 0.0, 1.0]),
        (0.0, 25.0),
        record_times=pts,
        observables=lambda t, rho: {"sz": float(np.real(np.trace(SZ @ rho)))},
    )
    sz, tt = traj.column("sz")[1:], traj.times[1:]
    slope = np.polyfit(tt, np.log(sz), 1)[0]
    assert abs(-slope - predicted) / predicted < 0.05


def test_rates_reject_degenerate_operator():
    o = np.diag([1.0, 1.0 + 1e-9, 2.0]).astype(complex)
    h = np.ones((3, 3), dtype=complex)
    with pytest.raises(ValueError, match="degenerate"):
        strong_dissipation_rates(h, o, 1.0)


# ---------------------------------------------------------------------------
# sweep CSV


def test_eigenvalue_sweep_csv(tmp_path):
    path = tmp_path / "sweep.csv"
    ratios = [0.1, 0.5, 3.0, 50.0]
    data = eigenvalue_sweep("dephasing_z", ratios, path=path)
    assert data.shape == (4, 6)
    np.testing.assert_allclose(data[:, 1], -2.0 * np.array(ratios))
    row = data[2]  # gamma = 3: real pair -3 +- sqrt(5)
    np.testing.assert_allclose(row[2], -3.0 + np.sqrt(5.0), atol=1e-12)
    np.testing.assert_allclose(row[3], -3.0 - np.sqrt(5.0), atol=1e-12)
    text = path.read_text().splitlines()
    assert text[0] == (
        "Gamma_over_Omega,Re_lambda0,Re_lambda_plus,Re_lambda_minus,"
        "Im_lambda_plus,Im_lambda_minus"
    )
    loaded = np.loadtxt(path, delimiter=",", skiprows=1)
    np.testing.assert_allclose(loaded, data, atol=1e-16)


def test_bloch_vector_roundtrip():
    v = np.array([0.2, -0.4, 0.5])
    np.testing.assert_allclose(bloch_vector(density_from_bloch(v)), v, atol=1e-14)
    with pytest.raises(ValueError):
        density_from_bloch([1.0, 1.0, 1.0])
