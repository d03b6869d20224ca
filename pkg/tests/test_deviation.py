"""Tests for the deviation-limit covariance and Gaussian limit solvers."""

import numpy as np
import pytest

from slowfast_ldp.averaging import AveragedDrift, solve_averaged
from slowfast_ldp.deviation import (
    CovOperator,
    _clip_psd,
    analytic_example_cov,
    deviation_path,
    dev_limit_final_samples,
    empirical_covariance,
    simulate_avg_plus_dev,
    simulate_dev_limit,
)
from slowfast_ldp.grids import FieldPath, TimeGrid
from slowfast_ldp.noise import QSpec, RngStream
from slowfast_ldp.slowfast import SystemSpec
from slowfast_ldp.spectral import BasisSpec, SpectralField

ANALYTIC = AveragedDrift(mode="analytic")


def make_spec(n_modes=6, epsilon=0.05, sigma=0.5, lam=1.0):
    basis = BasisSpec(n_modes=n_modes)
    return SystemSpec(
        epsilon=epsilon, sigma=sigma, lam=lam, basis=basis, q=QSpec.inverse_square(n_modes)
    )


def test_analytic_cov_matches_resolvent_squared_formula():
    spec = make_spec(n_modes=8, sigma=0.7)
    cov = analytic_example_cov(spec)
    i = np.arange(1, 9)
    expected = np.diag(0.49 * i**-2.0 / (1.0 + i**2.0) ** 2)
    np.testing.assert_allclose(cov.matrix, expected, atol=1e-15)
    assert cov.mode == "analytic"


def test_cov_operator_validates_and_freezes():
    with pytest.raises(ValueError):
        CovOperator(sqrt_matrix=np.ones((2, 3)), mode="analytic")
    cov = analytic_example_cov(make_spec(n_modes=3))
    with pytest.raises(ValueError):
        cov.sqrt_matrix[0, 0] = 99.0
    with pytest.raises(ValueError):
        cov.aggregate_se()


def test_min_eigenvalue_on_active_modes():
    spec = make_spec(n_modes=6, sigma=1.0)
    # Kill the noise beyond mode 3: full-space minimum is 0, active-space
    # minimum is the smallest surviving diagonal entry q_3 / (1 + 9)^2.
    q = QSpec(np.array([1.0, 0.25, 1.0 / 9.0, 0.0, 0.0, 0.0]))
    spec = SystemSpec(epsilon=spec.epsilon, sigma=1.0, lam=1.0, basis=spec.basis, q=q)
    cov = analytic_example_cov(spec)
    assert cov.min_eigenvalue() == 0.0
    active = spec.q.q > 0
    got = cov.min_eigenvalue(active=active)
    np.testing.assert_allclose(got, (1.0 / 9.0) / 100.0, rtol=1e-12)
    with pytest.raises(ValueError):
        cov.min_eigenvalue(active=np.zeros(6, dtype=bool))


def test_apply_sqrt_batched():
    spec = make_spec(n_modes=4)
    cov = analytic_example_cov(spec)
    z = RngStream(3).normals((5, 4))
    expected = z @ cov.sqrt_matrix.T
    np.testing.assert_array_equal(cov.apply_sqrt(z), expected)


def test_psd_clip_helper_counts_and_projects():
    b = np.diag([1.0, -0.5, 2.0])
    clipped, n = _clip_psd(b)
    assert n == 1
    np.testing.assert_allclose(clipped, np.diag([1.0, 0.0, 2.0]), atol=1e-12)
    assert np.linalg.eigvalsh(clipped)[0] >= 0.0


def test_empirical_covariance_matches_analytic():
    # The defining lag integral at unit separation: for the sine reaction
    # the fluctuation is -eta_tilde, an OU process per mode with rate
    # (1 + lambda_i) and stationary variance sigma^2 q_i / (2 (1 + lambda_i)),
    # so B_ii = sigma^2 q_i / (1 + lambda_i)^2 and off-diagonals vanish.
    spec = make_spec(n_modes=4, sigma=0.5)
    u = SpectralField.unit_mode(spec.basis, 1, 0.4)
    cov = empirical_covariance(
        u, spec, lag_horizon=4.0, n_samples=12000, rng=RngStream(77), dt=0.01, n_replicas=8
    )
    expected = analytic_example_cov(spec).matrix
    err = np.linalg.norm(cov.matrix - expected)
    assert err < 3.0 * cov.aggregate_se()
    assert cov.mode == "empirical"
    assert len(cov.u_fingerprint) == 12


def test_empirical_covariance_independent_of_frozen_field():
    # Linear fast input: the fluctuation law cannot see u.  Two distinct
    # frozen fields must agree within joint error bars.
    spec = make_spec(n_modes=3, sigma=0.5)
    kwargs = dict(lag_horizon=4.0, n_samples=9000, dt=0.01, n_replicas=6)
    cov0 = empirical_covariance(
        SpectralField.zero(spec.basis), spec, rng=RngStream(101), **kwargs
    )
    cov1 = empirical_covariance(
        SpectralField.unit_mode(spec.basis, 2, 1.3), spec, rng=RngStream(102), **kwargs
    )
    err = np.linalg.norm(cov0.matrix - cov1.matrix)
    joint = np.sqrt(cov0.aggregate_se() ** 2 + cov1.aggregate_se() ** 2)
    assert err < 3.0 * joint
    assert cov0.u_fingerprint != cov1.u_fingerprint


def test_empirical_covariance_rejects_short_runs():
    spec = make_spec(n_modes=3)
    u = SpectralField.zero(spec.basis)
    with pytest.raises(ValueError):
        empirical_covariance(u, spec, lag_horizon=4.0, n_samples=100, rng=RngStream(0))
    with pytest.raises(ValueError):
        empirical_covariance(
            u, spec, lag_horizon=1.0, n_samples=4000, rng=RngStream(0), n_replicas=1
        )


def test_deviation_path_rescales_and_checks_layout():
    basis = BasisSpec(n_modes=2)
    grid = TimeGrid(t_end=1.0, n_steps=4)
    a = FieldPath(np.ones((5, 2)), grid, basis)
    b = FieldPath(np.zeros((5, 2)), grid, basis)
    z = deviation_path(a, b, epsilon=0.25)
    np.testing.assert_allclose(z.values, 2.0, atol=1e-15)
    with pytest.raises(ValueError):
        deviation_path(a, b, epsilon=0.0)
    other = FieldPath(np.zeros((3, 2)), TimeGrid(t_end=1.0, n_steps=2), basis)
    with pytest.raises(ValueError):
        deviation_path(a, other, epsilon=0.25)


def test_dev_limit_stationary_variance_first_mode():
    # Oracle: with lam = 0 and the averaged path frozen at zero, mode 1 of
    # the limit is scalar OU with drift rate lambda_1 + 1/(1 + lambda_1)
    # = 3/2, so its stationary variance is B_11 / 3.
    spec = make_spec(n_modes=3, sigma=0.8, lam=0.0)
    basis = spec.basis
    grid = TimeGrid(t_end=5.0, n_steps=1000)
    avg = FieldPath(np.zeros((grid.n_steps + 1, 3)), grid, basis)
    cov = analytic_example_cov(spec)
    n = 4000
    z = dev_limit_final_samples(avg, spec, cov, n, RngStream(909))
    b11 = cov.matrix[0, 0]
    target = b11 / 3.0
    var = z[:, 0].var(ddof=1)
    se = target * np.sqrt(2.0 / n)
    # dt bias of the end-of-step noise is O(rate * dt) ~ 0.8%; absorb it
    # alongside the Monte Carlo band.
    assert abs(var - target) < 3.0 * se + 0.02 * target


def test_dev_limit_is_gaussian_at_final_time():
    spec = make_spec(n_modes=3, sigma=0.6, lam=0.5)
    basis = spec.basis
    grid = TimeGrid(t_end=3.0, n_steps=600)
    avg = FieldPath(
        np.broadcast_to(0.3 * np.eye(1, 3, 0), (grid.n_steps + 1, 3)).copy(), grid, basis
    )
    n = 4000
    z = dev_limit_final_samples(avg, spec, analytic_example_cov(spec), n, RngStream(44))
    x = z[:, 0] / z[:, 0].std(ddof=1)
    skew = np.mean(x**3)
    kurt = np.mean(x**4) - 3.0
    assert abs(skew) < 3.0 * np.sqrt(6.0 / n)
    assert abs(kurt) < 3.0 * np.sqrt(24.0 / n)


def test_dev_limit_single_path_shape_and_start():
    spec = make_spec(n_modes=4, lam=0.3)
    grid = TimeGrid(t_end=1.0, n_steps=50)
    avg = FieldPath(np.zeros((51, 4)), grid, spec.basis)
    z0 = SpectralField.unit_mode(spec.basis, 2, 0.7)
    path = simulate_dev_limit(avg, spec, analytic_example_cov(spec), RngStream(5), z0=z0)
    assert path.values.shape == (51, 4)
    np.testing.assert_array_equal(path.values[0], z0.coeffs)


def test_dev_limit_rejects_mismatched_operator():
    spec = make_spec(n_modes=4)
    grid = TimeGrid(t_end=1.0, n_steps=10)
    avg = FieldPath(np.zeros((11, 4)), grid, spec.basis)
    small = analytic_example_cov(make_spec(n_modes=3))
    with pytest.raises(ValueError):
        simulate_dev_limit(avg, spec, small, RngStream(0))


def test_avg_plus_dev_reduces_to_averaged_solve_without_noise():
    spec = make_spec(n_modes=4, sigma=0.0, lam=1.2)
    basis = spec.basis
    grid = TimeGrid(t_end=2.0, n_steps=200)
    u0 = SpectralField.unit_mode(basis, 1, 0.5)
    cov = analytic_example_cov(spec)  # zero factor since sigma = 0
    noisy = simulate_avg_plus_dev(u0, spec, cov, grid, RngStream(1))
    plain = solve_averaged(u0, spec, grid, ANALYTIC)
    np.testing.assert_array_equal(noisy.values, plain.values)


def test_avg_plus_dev_spread_scales_like_sqrt_epsilon():
    # Fluctuation RMS around the deterministic solve should halve when
    # eps drops by 4: fit the log-log slope over a 10x span.
    base = make_spec(n_modes=3, sigma=0.5, lam=0.8)
    basis = base.basis
    grid = TimeGrid(t_end=1.0, n_steps=200)
    u0 = SpectralField.unit_mode(basis, 1, 0.4)
    plain = solve_averaged(u0, base, grid, ANALYTIC)
    eps_list = [0.1, 0.01]
    rms = []
    for idx, eps in enumerate(eps_list):
        spec = base.with_epsilon(eps)
        cov = analytic_example_cov(spec)
        finals = []
        rng = RngStream(600, (idx,))
        for _ in range(80):
            path = simulate_avg_plus_dev(u0, spec, cov, grid, rng)
            finals.append(path.values[-1])
        diffs = np.asarray(finals) - plain.values[-1]
        rms.append(np.sqrt(np.mean(np.sum(diffs**2, axis=1))))
    slope = np.log(rms[0] / rms[1]) / np.log(eps_list[0] / eps_list[1])
    assert 0.35 < slope < 0.65
