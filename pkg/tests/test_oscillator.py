"""Tests for the memory-kernel oscillator and its time-local twin."""

import json

import numpy as np
import pytest
from scipy.linalg import expm

from zenosim.oscillator import (
    DimensionlessSystem,
    OscillatorBath,
    analytic_eigenvalues_on_curve,
    curve_beta,
    decay_sweep_summary,
    evolve_kernel,
    evolve_local,
    kernel_from_spectral,
    m_matrix,
    memory_kernel,
    spectral_function,
    zeno_eigenvector,
)


# ---------------------------------------------------------------------------
# spectral function and kernel


def test_spectral_function_values():
    bath = OscillatorBath(1.3, 2.0)
    assert spectral_function(0.0, bath) == 0.0
    np.testing.assert_allclose(spectral_function(2.0, bath), 1.3 / 2.0, rtol=1e-15)
    w = np.linspace(0.0, 50.0, 5001)
    vals = spectral_function(w, bath)
    assert abs(w[np.argmax(vals)] - bath.omega_c) < 0.02
    np.testing.assert_allclose(
        spectral_function(1e4, bath), 1.3 * 2.0 / 1e4, rtol=1e-7
    )
    with pytest.raises(ValueError):
        spectral_function(-1.0, bath)


def test_memory_kernel_values():
    bath = OscillatorBath(1.3, 2.0)
    np.testing.assert_allclose(memory_kernel(0.0, bath), 1.3, rtol=1e-15)
    np.testing.assert_allclose(
        memory_kernel(0.5, bath), 1.3 / np.e, rtol=1e-15
    )
    with pytest.raises(ValueError):
        memory_kernel(-0.1, bath)


def test_kernel_matches_sine_transform():
    bath = OscillatorBath(1.3, 2.0)
    for t_wc in (0.1, 0.3, 1.0, 3.0, 10.0):
        t = t_wc / bath.omega_c
        direct = memory_kernel(t, bath)
        transform = kernel_from_spectral(t, bath)
        assert abs(transform - direct) / direct < 1e-6


# ---------------------------------------------------------------------------
# matrix and eigenstructure


def test_m_matrix_entries_and_limits():
    m = m_matrix(3.0, 2.0)
    expected = np.array([[0.0, 1.0, 0.0], [-4.0, 0.0, 1.0], [6.0, 0.0, -2.0]])
    np.testing.assert_allclose(m, expected)
    m0 = m_matrix(0.0, 0.0)
    np.testing.assert_allclose(m0[:2, :2], [[0.0, 1.0], [-1.0, 0.0]])
    np.testing.assert_allclose(m0[2], 0.0)
    with pytest.raises(ValueError):
        m_matrix(-1.0, 1.0)


def test_m_matrix_trace_and_determinant():
    rng = np.random.default_rng(2)
    for _ in range(20):
        alpha, beta = rng.uniform(0.0, 50.0, size=2)
        m = m_matrix(alpha, beta)
        np.testing.assert_allclose(np.trace(m), -beta, atol=1e-12)
        np.testing.assert_allclose(np.linalg.det(m), -beta, atol=1e-9)


def test_eigenvalues_never_grow():
    grid = np.logspace(-2, 3, 40)
    worst = -np.inf
    for alpha in grid:
        for beta in grid:
            vals = np.linalg.eigvals(m_matrix(alpha, beta))
            worst = max(worst, float(vals.real.max()))
    assert worst <= 1e-12


def test_on_curve_spectrum_is_real():
    # strictly above the triple-degenerate endpoint alpha = 8
    for alpha in np.concatenate([[8.001, 8.01, 8.1], np.linspace(8.5, 1000.0, 25)]):
        vals = np.linalg.eigvals(m_matrix(alpha, curve_beta(alpha)))
        assert np.max(np.abs(vals.imag)) <= 1e-10


def test_analytic_triple_matches_numeric():
    rng = np.random.default_rng(9)
    for alpha in np.concatenate([[8.25, 18.0], rng.uniform(8.5, 500.0, 20)]):
        lams = analytic_eigenvalues_on_curve(alpha)
        numeric = np.sort(np.linalg.eigvals(m_matrix(alpha, curve_beta(alpha))).real)
        np.testing.assert_allclose(np.sort(lams), numeric, atol=1e-10)
    # at the triple-degenerate point the numeric solver is only eps**(1/3) good
    numeric = np.linalg.eigvals(m_matrix(8.0, curve_beta(8.0)))
    np.testing.assert_allclose(numeric, [-np.sqrt(3.0)] * 3, atol=1e-4)


def test_analytic_triple_frozen_values():
    np.testing.assert_allclose(
        analytic_eigenvalues_on_curve(8.0), [-np.sqrt(3.0)] * 3, atol=1e-12
    )
    np.testing.assert_allclose(curve_beta(18.0), 6.0 * np.sqrt(2.0), rtol=1e-14)
    lams = analytic_eigenvalues_on_curve(18.0)
    exact = np.array(
        [
            (np.sqrt(10.0) - 4.0) / np.sqrt(2.0),
            -2.0 * np.sqrt(2.0),
            -(np.sqrt(10.0) + 4.0) / np.sqrt(2.0),
        ]
    )
    np.testing.assert_allclose(lams, exact, rtol=1e-12)
    np.testing.assert_allclose(lams, [-0.59235, -2.82843, -5.06451], atol=2e-5)
    with pytest.raises(ValueError):
        analytic_eigenvalues_on_curve(7.9)


def test_slow_rate_zeno_limit():
    alpha = 5000.0
    lam1 = analytic_eigenvalues_on_curve(alpha)[0]
    target = -3.0 / np.sqrt(2.0 * alpha)
    assert abs(lam1 - target) / abs(target) < 0.01


def test_zeno_eigenvector_residual_and_shape():
    for alpha in (8.0, 18.0, 100.0):
        v = zeno_eigenvector(alpha)
        lam1 = analytic_eigenvalues_on_curve(alpha)[0]
        m = m_matrix(alpha, curve_beta(alpha))
        assert np.linalg.norm(m @ v - lam1 * v) <= 1e-9
        np.testing.assert_allclose(np.linalg.norm(v), 1.0, rtol=1e-12)
    v18 = zeno_eigenvector(18.0)
    np.testing.assert_allclose(abs(v18[1]) / abs(v18[2]), 0.030611, atol=1e-5)
    fractions = [abs(zeno_eigenvector(a)[1]) for a in (18.0, 100.0, 1000.0)]
    assert fractions[0] > fractions[1] > fractions[2]
    assert fractions[2] < 2e-3


def test_dimensionless_system_carries_matrix():
    sys = DimensionlessSystem(3.0, 2.0)
    np.testing.assert_allclose(sys.matrix, m_matrix(3.0, 2.0))


# ---------------------------------------------------------------------------
# local solver


def test_local_undamped_conserves_energy():
    bath = OscillatorBath(0.0, 1.0, omega=1.0)
    traj = evolve_local(bath, 1.0, 0.0, 50.0, points=501)
    energy = traj.x**2 + traj.p**2
    np.testing.assert_allclose(energy, 1.0, atol=1e-7)
    np.testing.assert_allclose(traj.b, 0.0, atol=1e-10)


def test_local_matches_matrix_exponential():
    alpha, beta = 3.7, 2.2
    bath = OscillatorBath(2.0 * alpha, beta, omega=1.0)
    r0 = np.array([0.7, -0.3, 0.0])
    traj = evolve_local(bath, r0[0], r0[1], 8.0, points=17)
    m = m_matrix(alpha, beta)
    for k, tau in enumerate(traj.tau):
        expected = expm(m * tau) @ r0
        actual = np.array([traj.x[k], traj.p[k], traj.b[k]])
        np.testing.assert_allclose(actual, expected, atol=1e-8)


def test_local_overdamped_fitted_rate():
    alpha = 200.0
    bath = OscillatorBath(2.0 * alpha, curve_beta(alpha), omega=1.0)
    slow = abs(analytic_eigenvalues_on_curve(alpha)[0])
    traj = evolve_local(bath, 1.0, 0.0, 1.0 + 3.0 / slow, points=400)
    mask = traj.tau > 1.0
    rate = -np.polyfit(traj.tau[mask], np.log(np.abs(traj.x[mask])), 1)[0]
    assert abs(rate - 3.0 / np.sqrt(2.0 * alpha)) / rate < 0.10


# ---------------------------------------------------------------------------
# kernel solver and the equivalence of the two forms


def test_kernel_undamped_conserves_energy():
    bath = OscillatorBath(0.0, 1.0, omega=1.0)
    traj = evolve_kernel(bath, 1.0, 0.0, 50.0)
    energy = traj.x**2 + traj.p**2
    np.testing.assert_allclose(energy, 1.0, atol=1e-7)


@pytest.mark.parametrize("alpha,beta", [(1.0, 1.0), (10.0, 5.0), (50.0, 20.0)])
def test_kernel_matches_local_form(alpha, beta):
    bath = OscillatorBath(2.0 * alpha, beta, omega=1.0)
    ker = evolve_kernel(bath, 1.0, 0.0, 50.0, stride=25)
    loc = evolve_local(bath, 1.0, 0.0, 50.0, t_eval=ker.tau, rtol=1e-11, atol=1e-13)
    assert np.max(np.abs(ker.x - loc.x)) < 1e-6
    assert np.max(np.abs(ker.p - loc.p)) < 1e-6


def test_kernel_damped_state_dies_out():
    bath = OscillatorBath(20.0, 5.0, omega=1.0)  # alpha 10, beta 5
    traj = evolve_kernel(bath, 1.0, 0.0, 50.0)
    assert abs(traj.x[-1]) < 1e-6
    assert abs(traj.p[-1]) < 1e-6


def test_kernel_rejects_driven_frequency():
    bath = OscillatorBath(1.0, 1.0, omega=((0.0, 10.0), (1.0, 0.8)))
    with pytest.raises(ValueError, match="constant omega"):
        evolve_kernel(bath, 1.0, 0.0, 10.0)


# ---------------------------------------------------------------------------
# driven frequency


def test_driven_local_matches_physical_time_integration():
    t_samples = np.linspace(0.0, 40.0, 81)
    omega_curve = 1.0 - 0.01 * t_samples
    bath = OscillatorBath(2.0, 1.5, omega=(t_samples, omega_curve))
    horizon = 10.0
    traj = evolve_local(bath, 1.0, 0.0, horizon, points=101)

    # independent route: integrate dr/dt = Omega(t) M(t) r in physical time
    from scipy.integrate import solve_ivp

    def rhs(t, r):
        om = bath.omega_at(t)
        m = m_matrix(bath.gamma0 / (2.0 * om * om), bath.omega_c / om)
        return om * (m @ r)

    # invert tau = Omega(t) t on a fine grid for the sample times
    t_fine = np.linspace(0.0, 40.0, 40001)
    tau_fine = np.array([bath.omega_at(t) for t in t_fine]) * t_fine
    t_at_tau = np.interp(traj.tau, tau_fine, t_fine)
    sol = solve_ivp(rhs, (0.0, t_at_tau[-1]), [1.0, 0.0, 0.0],
                    t_eval=t_at_tau, rtol=1e-11, atol=1e-13)
    np.testing.assert_allclose(traj.x, sol.y[0], atol=1e-6)
    np.testing.assert_allclose(traj.p, sol.y[1], atol=1e-6)
    np.testing.assert_allclose(traj.b, sol.y[2], atol=1e-6)


def test_driven_sampled_constant_curve_recovers_static_form():
    t_samples = np.linspace(0.0, 60.0, 13)
    bath = OscillatorBath(2.0, 1.0, omega=(t_samples, np.full(13, 1.0)))
    traj = evolve_local(bath, 1.0, 0.0, 5.0, points=6)
    m = m_matrix(1.0, 1.0)
    for k, tau in enumerate(traj.tau):
        expected = expm(m * tau) @ np.array([1.0, 0.0, 0.0])
        np.testing.assert_allclose(
            [traj.x[k], traj.p[k], traj.b[k]], expected, atol=1e-7
        )


def test_driven_too_fast_is_rejected():
    t_samples = np.linspace(0.0, 5.0, 51)
    omega_curve = np.clip(1.0 - 0.3 * t_samples, 0.05, None)
    bath = OscillatorBath(1.0, 1.0, omega=(t_samples, omega_curve))
    with pytest.raises(ValueError, match="reverses"):
        evolve_local(bath, 1.0, 0.0, 2.0)


# ---------------------------------------------------------------------------
# serialization and sweeps


def test_trajectory_csv(tmp_path):
    bath = OscillatorBath(2.0, 1.0, omega=1.0)
    traj = evolve_local(bath, 1.0, 0.0, 5.0, points=21)
    path = tmp_path / "osc.csv"
    traj.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "tau,x_tilde,p_tilde,B_tilde"
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    np.testing.assert_allclose(data[:, 0], traj.tau, atol=1e-16)
    np.testing.assert_allclose(data[:, 3], traj.b, atol=1e-16)


def test_decay_sweep_summary(tmp_path):
    path = tmp_path / "sweep.json"
    rows = decay_sweep_summary([18.0, 50.0, 200.0], path=path)
    loaded = json.loads(path.read_text())
    assert loaded == rows
    for row in rows:
        slow = abs(row["eigenvalues"][0])
        assert abs(row["fitted_rate"] - slow) / slow < 0.10
        np.testing.assert_allclose(row["beta"], curve_beta(row["alpha"]), rtol=1e-12)


def test_bath_validation():
    with pytest.raises(ValueError):
        OscillatorBath(-1.0, 1.0)
    with pytest.raises(ValueError):
        OscillatorBath(1.0, 0.0)
    with pytest.raises(ValueError):
        OscillatorBath(1.0, 1.0, mass=0.0)
    with pytest.raises(ValueError):
        OscillatorBath(1.0, 1.0, omega=0.0)
    with pytest.raises(ValueError):
        OscillatorBath(1.0, 1.0, omega=((0.0, 1.0, 0.5), (1.0, 1.0, 1.0)))
    with pytest.raises(ValueError):
        curve_beta(1.0)
