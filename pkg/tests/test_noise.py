"""Checks for Q spectra, RNG streams, Wiener increments, and filters."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from slowfast_ldp.noise import (
    CascadeFilterState,
    ExpFilterState,
    QSpec,
    RngStream,
    cascade_step_white,
    filter_step,
    filter_step_white,
    ou_increment_std,
    wiener_increment,
)
from slowfast_ldp.spectral import BasisSpec


class TestQSpec:
    def test_inverse_square(self):
        q = QSpec.inverse_square(4)
        np.testing.assert_allclose(q.q, [1.0, 0.25, 1.0 / 9.0, 1.0 / 16.0])
        assert q.trace == pytest.approx(sum(1.0 / i**2 for i in range(1, 5)))

    def test_first_modes(self):
        q = QSpec.first_modes(6, active=3)
        np.testing.assert_allclose(q.q, [1, 1, 1, 0, 0, 0])
        np.testing.assert_array_equal(q.active, [True] * 3 + [False] * 3)

    def test_validation(self):
        with pytest.raises(ValueError):
            QSpec(np.array([1.0, -0.5]))
        with pytest.raises(ValueError):
            QSpec(np.array([np.inf]))


class TestRngStream:
    def test_same_address_replays(self):
        a = RngStream(42, (3,)).normals(100)
        b = RngStream(42, (3,)).normals(100)
        np.testing.assert_array_equal(a, b)

    def test_reset_replays(self):
        s = RngStream(7)
        first = s.normals(50)
        s.reset()
        np.testing.assert_array_equal(s.normals(50), first)

    def test_different_addresses_differ(self):
        a = RngStream(42, (3,)).normals(100)
        b = RngStream(42, (4,)).normals(100)
        c = RngStream(43, (3,)).normals(100)
        assert not np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_substream_statistically_independent(self):
        base = RngStream(2024)
        x = base.substream(0).normals(20000)
        y = base.substream(1).normals(20000)
        corr = np.corrcoef(x, y)[0, 1]
        assert abs(corr) < 3.0 / math.sqrt(20000)


class TestWienerIncrement:
    def test_mode_variance_scaling(self):
        basis = BasisSpec(n_modes=4)
        q = QSpec.inverse_square(4)
        dt = 0.05
        rng = RngStream(5)
        n = 20000
        draws = np.empty((n, 4))
        for k in range(n):
            draws[k] = wiener_increment(q, dt, rng, basis).coeffs
        var = draws.var(axis=0)
        # 3-sigma band for a sample variance of n normals
        tol = 3.0 * q.q * dt * math.sqrt(2.0 / n)
        np.testing.assert_array_less(np.abs(var - q.q * dt), tol + 1e-12)

    def test_successive_increments_uncorrelated(self):
        basis = BasisSpec(n_modes=1)
        q = QSpec.inverse_square(1)
        rng = RngStream(6)
        n = 100000
        xs = np.array(
            [wiener_increment(q, 0.01, rng, basis).coeffs[0] for _ in range(n)]
        )
        lag1 = np.corrcoef(xs[:-1], xs[1:])[0, 1]
        assert abs(lag1) < 3.0 / math.sqrt(n)

    def test_errors(self):
        basis = BasisSpec(n_modes=2)
        with pytest.raises(ValueError):
            wiener_increment(QSpec.inverse_square(2), 0.0, RngStream(1), basis)
        with pytest.raises(ValueError):
            wiener_increment(QSpec.inverse_square(3), 0.1, RngStream(1), basis)


class TestExpFilter:
    def test_constant_input_closed_form(self):
        # Held input: value(T) = c/a + (v0 - c/a) exp(-a T), exactly.
        a, c, v0, dt = 1.7, 0.8, -0.3, 0.05
        state = ExpFilterState(rate=a, value=v0)
        for _ in range(200):
            state = filter_step(state, c, dt)
        t = 200 * dt
        expected = c / a + (v0 - c / a) * math.exp(-a * t)
        assert state.value == pytest.approx(expected, rel=1e-12)

    def test_ou_stationary_variance(self):
        # Unit white noise: Var -> 1/(2a) within 3 SE of the sample variance.
        a, dt = 1.0, 0.1
        rng = RngStream(11)
        state = ExpFilterState(rate=a, value=0.0)
        n = 200000
        dws = rng.normals(n) * math.sqrt(dt)
        vals = np.empty(n)
        for k in range(n):
            state = filter_step_white(state, dt, float(dws[k]))
            vals[k] = state.value
        vals = vals[2000:]  # past transient
        target = 1.0 / (2.0 * a)
        # effective sample count reduced by autocorrelation ~ (1+rho)/(1-rho)
        rho = math.exp(-a * dt)
        n_eff = vals.size * (1 - rho) / (1 + rho)
        se = target * math.sqrt(2.0 / n_eff)
        assert abs(vals.var() - target) < 3.0 * se

    def test_stiff_rate_variance_still_exact(self):
        # rate*dt = 5: an explicit Euler would be wildly unstable; the
        # exact update keeps the stationary variance at 1/(2a).
        a, dt = 50.0, 0.1
        rng = RngStream(12)
        state = ExpFilterState(rate=a, value=0.0)
        n = 50000
        vals = np.empty(n)
        for k in range(n):
            state = filter_step_white(state, dt, float(rng.normals(()) * math.sqrt(dt)))
            vals[k] = state.value
        target = 1.0 / (2.0 * a)
        se = target * math.sqrt(2.0 / n)  # decorrelated: exp(-a dt) ~ 0
        assert abs(vals[100:].var() - target) < 3.0 * se

    def test_increment_std_small_dt_limit(self):
        assert ou_increment_std(2.0, 1e-8) == pytest.approx(1e-4, rel=1e-6)

    def test_validation(self):
        with pytest.raises(ValueError):
            ExpFilterState(rate=0.0)
        with pytest.raises(ValueError):
            filter_step(ExpFilterState(rate=1.0), 0.0, -0.1)


class TestCascadeFilter:
    def test_stationary_rms_ratio(self):
        # Oracle: kernel variances by quadrature. Inner kernel exp(-a s),
        # outer kernel s exp(-a s).
        a, dt = 3.0, 0.05
        var_inner = quad(lambda s: math.exp(-2 * a * s), 0, 50)[0]
        var_outer = quad(lambda s: (s * math.exp(-a * s)) ** 2, 0, 50)[0]
        expected_ratio = math.sqrt(var_outer / var_inner)

        rng = RngStream(13)
        state = CascadeFilterState(rate=a)
        n = 200000
        dws = rng.normals(n) * math.sqrt(dt)
        extras = rng.normals(n)
        inner = np.empty(n)
        outer = np.empty(n)
        for k in range(n):
            state = cascade_step_white(state, dt, float(dws[k]), float(extras[k]))
            inner[k] = state.inner
            outer[k] = state.outer
        ratio = outer[2000:].std() / inner[2000:].std()
        assert ratio == pytest.approx(expected_ratio, rel=0.05)
        assert var_inner == pytest.approx(1.0 / (2 * a), rel=1e-8)
        assert var_outer == pytest.approx(1.0 / (4 * a**3), rel=1e-8)

    def test_noiseless_decay(self):
        a, dt = 2.0, 0.01
        state = CascadeFilterState(rate=a, inner=1.0, outer=0.5)
        zero = cascade_step_white(state, dt, 0.0, 0.0)
        assert zero.inner == pytest.approx(math.exp(-a * dt) * 1.0)
        assert zero.outer == pytest.approx(math.exp(-a * dt) * (dt * 1.0 + 0.5))
