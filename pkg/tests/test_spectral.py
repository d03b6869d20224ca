"""Basis, field, and operator checks for the spectral core."""

import numpy as np
import pytest
from scipy.integrate import simpson

from slowfast_ldp.spectral import (
    BasisSpec,
    SpectralField,
    apply_A,
    apply_resolvent,
    project,
    semigroup_apply,
)


def quad_oracle_coeffs(f, basis, refine=10):
    """Projection coefficients by Simpson quadrature at `refine` x resolution."""
    n = refine * 8 * basis.n_modes
    x = np.linspace(0.0, basis.domain_length, n + 1)
    e = basis.mode_values(x)
    return simpson(np.asarray(f(x))[:, None] * e, x=x, axis=0)


class TestBasisSpec:
    def test_eigenvalues_default_length(self):
        basis = BasisSpec(n_modes=8)
        expected = np.arange(1, 9, dtype=float) ** 2
        np.testing.assert_allclose(basis.eigenvalues, expected, rtol=1e-14)
        assert basis.eigenvalue(3) == pytest.approx(9.0)

    def test_eigenvalues_general_length(self):
        L = 2.5
        basis = BasisSpec(n_modes=5, domain_length=L)
        i = np.arange(1, 6)
        np.testing.assert_allclose(basis.eigenvalues, (i * np.pi / L) ** 2, rtol=1e-14)
        assert np.all(np.diff(basis.eigenvalues) > 0)

    def test_orthonormality_by_quadrature(self):
        basis = BasisSpec(n_modes=6)
        n = 4096
        x = np.linspace(0.0, basis.domain_length, n + 1)
        e = basis.mode_values(x)
        gram = np.empty((6, 6))
        for i in range(6):
            for j in range(6):
                gram[i, j] = simpson(e[:, i] * e[:, j], x=x)
        np.testing.assert_allclose(gram, np.eye(6), atol=1e-8)

    def test_invalid_spec_rejected(self):
        with pytest.raises(ValueError):
            BasisSpec(n_modes=0)
        with pytest.raises(ValueError):
            BasisSpec(n_modes=4, domain_length=-1.0)


class TestSpectralField:
    def test_parseval(self):
        # Coefficient norm vs quadrature norm of the reconstructed function.
        basis = BasisSpec(n_modes=32)
        rng = np.random.default_rng(101)
        coeffs = rng.standard_normal(32)
        u = SpectralField(coeffs, basis)
        n = 128 * basis.n_modes
        x = np.linspace(0.0, basis.domain_length, n + 1)
        vals = u.evaluate(x)
        quad_norm = np.sqrt(simpson(vals**2, x=x))
        assert quad_norm == pytest.approx(u.norm(), rel=1e-6)

    def test_norm_alpha(self):
        basis = BasisSpec(n_modes=4)
        u = SpectralField([1.0, 2.0, 0.0, 0.0], basis)
        # lambda = 1, 4 on the active modes
        assert u.norm_alpha(1.0) == pytest.approx(np.sqrt(1.0 + 4.0 * 4.0))
        assert u.norm_alpha(0.0) == pytest.approx(u.norm())

    def test_arithmetic_and_immutability(self):
        basis = BasisSpec(n_modes=3)
        u = SpectralField([1.0, 0.0, 2.0], basis)
        v = SpectralField([0.5, 1.0, 0.0], basis)
        np.testing.assert_allclose((u + v).coeffs, [1.5, 1.0, 2.0])
        np.testing.assert_allclose((u - v).coeffs, [0.5, -1.0, 2.0])
        np.testing.assert_allclose((2.0 * u).coeffs, [2.0, 0.0, 4.0])
        with pytest.raises(ValueError):
            u.coeffs[0] = 9.0

    def test_basis_mismatch_rejected(self):
        u = SpectralField([1.0, 0.0], BasisSpec(n_modes=2))
        v = SpectralField([1.0, 0.0], BasisSpec(n_modes=2, domain_length=1.0))
        with pytest.raises(ValueError):
            _ = u + v

    def test_collocation_round_trip_is_exact(self):
        basis = BasisSpec(n_modes=16)
        rng = np.random.default_rng(7)
        coeffs = rng.standard_normal(16)
        back = basis.from_values(basis.to_values(coeffs))
        np.testing.assert_allclose(back, coeffs, atol=1e-13)


class TestProjection:
    def test_sine_mode_exact(self):
        basis = BasisSpec(n_modes=4)
        u = project(np.sin, basis)
        expected = np.array([np.sqrt(np.pi / 2.0), 0.0, 0.0, 0.0])
        np.testing.assert_allclose(u.coeffs, expected, atol=1e-12)

    def test_parabola_against_refined_oracle(self):
        basis = BasisSpec(n_modes=3)
        f = lambda x: x * (np.pi - x)
        # Analytic truth: <x(pi-x), e_i> = sqrt(2/pi) * 4 / i^3 for odd i.
        analytic = np.array(
            [np.sqrt(2.0 / np.pi) * 4.0, 0.0, np.sqrt(2.0 / np.pi) * 4.0 / 27.0]
        )
        oracle = quad_oracle_coeffs(f, basis, refine=10)
        np.testing.assert_allclose(oracle, analytic, atol=1e-9)
        # The default 8N-interval Simpson rule carries O(h^4) error here.
        u = project(f, basis)
        np.testing.assert_allclose(u.coeffs, oracle, atol=2e-4)

    def test_nonfinite_rejected(self):
        basis = BasisSpec(n_modes=2)
        with pytest.raises(ValueError):
            project(lambda x: np.where(x > 0, x, np.inf), basis)


class TestOperators:
    def test_apply_A_sign_and_scale(self):
        basis = BasisSpec(n_modes=3)
        u = SpectralField([1.0, 1.0, 1.0], basis)
        np.testing.assert_allclose(apply_A(u).coeffs, [-1.0, -4.0, -9.0])

    def test_resolvent_inverts_I_minus_A(self):
        basis = BasisSpec(n_modes=12)
        rng = np.random.default_rng(3)
        u = SpectralField(rng.standard_normal(12), basis)
        w = SpectralField((1.0 + basis.eigenvalues) * u.coeffs, basis)  # (I - A) u
        np.testing.assert_allclose(apply_resolvent(w).coeffs, u.coeffs, atol=1e-12)

    def test_semigroup_contraction(self):
        basis = BasisSpec(n_modes=10)
        rng = np.random.default_rng(11)
        for _ in range(20):
            u = SpectralField(rng.standard_normal(10), basis)
            t = float(rng.uniform(0.0, 2.0))
            assert semigroup_apply(u, t).norm() <= np.exp(-t) * u.norm() + 1e-12

    def test_semigroup_identity_and_composition(self):
        basis = BasisSpec(n_modes=5)
        u = SpectralField(np.arange(1.0, 6.0), basis)
        np.testing.assert_allclose(semigroup_apply(u, 0.0).coeffs, u.coeffs)
        one_step = semigroup_apply(u, 0.7)
        two_step = semigroup_apply(semigroup_apply(u, 0.3), 0.4)
        np.testing.assert_allclose(one_step.coeffs, two_step.coeffs, rtol=1e-14)

    def test_negative_time_rejected(self):
        u = SpectralField([1.0], BasisSpec(n_modes=1))
        with pytest.raises(ValueError):
            semigroup_apply(u, -0.1)
