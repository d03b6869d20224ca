"""Amplitude models on the superslow manifold near the pitchfork.

Near ``lam = 3/2`` the first sine mode of the slow field evolves on a
time scale of order ``1 / lam_prime`` with ``lam = 3/2 + lam_prime``.
Reducing both the two-scale system and its averaged counterpart onto
that manifold (noise truncated to the first three spatial modes,
``dW = phi_1 sin x + phi_2 sin 2x + phi_3 sin 3x``) yields two scalar
amplitude SDEs whose coefficients are exact rationals.  Their drifts
differ by ``eps (lam_prime a / 4 - 3 a^3 / 64)`` identically and their
additive noise by ``eps^{3/2} sigma / 8`` on the first channel, which is
the quantitative sense in which the averaged equation captures the slow
dynamics.

Filtered noises ``Z^{-alpha} phi`` denote stationary convolutions
``integral_0^inf exp(-alpha s) phi(t - s) ds``; the field
reconstructions additionally need fast filters at rates ``beta / eps``
and their one-fold cascades.  Quadratic noise products ``phi Z phi``
are integrated in the Ito sense: the filter value predates the white
increment multiplying it.  Off-manifold components are attracted at
rate ``27/10`` at criticality, which is ``lam_2 - 3/2 + 1/(1+lam_2)``
for the second mode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Dict, Optional, Tuple

import numpy as np
from scipy.optimize import brentq

from slowfast_ldp._ensemble import ensemble_mode_trajectory
from slowfast_ldp.grids import TimeGrid
from slowfast_ldp.noise import (
    CascadeFilterState,
    ExpFilterState,
    QSpec,
    RngStream,
    _cascade_noise_cov,
    cascade_step_white,
    filter_step_white,
    ou_increment_std,
)
from slowfast_ldp.slowfast import BlowupError, SystemSpec, simulate_path
from slowfast_ldp.spectral import BasisSpec, FloatArray, SpectralField, apply_resolvent

__all__ = [
    "SsmCoefficients",
    "COEFFS",
    "AmplitudeState",
    "sf_drift",
    "ldp_drift",
    "drift_difference",
    "noise_phi1_difference",
    "step_amplitude",
    "simulate_amplitude",
    "cubic_amplitude",
    "amplitude_fixed_point",
    "reconstruct_field",
    "reconstruct_fast_field",
    "offmanifold_decay_rate",
    "full_steady_amplitude",
    "amplitude_variance_pair",
    "SsmComparison",
    "ssm_vs_full",
]

# sin(k x) carries norm sqrt(pi/2) in the orthonormal mode basis on (0, pi).
_SIN_NORM = math.sqrt(math.pi / 2.0)


@dataclass(frozen=True)
class SsmCoefficients:
    """Exact rational coefficients of the two amplitude models.

    Every rational constant of the reduced equations appears exactly
    once here: the amplitude drifts and noises, the slow-field and
    fast-field reconstructions, the off-manifold attraction rate, and
    the critical reaction strength.
    """

    # two-scale amplitude drift: lam' (1 + eps/4) a - (3/16 + lam'/8 + 3 eps/64) a^3 + (91/9728) a^5
    sf_linear_eps: Fraction = Fraction(1, 4)
    cubic_base: Fraction = Fraction(3, 16)
    cubic_lam: Fraction = Fraction(1, 8)
    sf_cubic_eps: Fraction = Fraction(3, 64)
    quintic: Fraction = Fraction(91, 9728)
    # additive noise: -sqrt(eps) sigma [(1/2 (+ eps/8)) phi_1 + (3/1216) a^2 phi_3]
    noise_phi1: Fraction = Fraction(1, 2)
    sf_noise_phi1_eps: Fraction = Fraction(1, 8)
    noise_phi3: Fraction = Fraction(3, 1216)
    # quadratic noise: eps sigma^2 a [-(1/180) phi2 Z2 phi2 + (3/1216) phi1 Z3 phi3 - (3/6080) phi3 Z3 phi3]
    quad_22: Fraction = Fraction(1, 180)
    quad_13: Fraction = Fraction(3, 1216)
    quad_33: Fraction = Fraction(3, 6080)
    # slow field: a sin x + (5/608) a^3 sin 3x + (1/2) sqrt(eps) sigma Zf1 phi1 sin x
    #             - sqrt(eps) sigma [(1/5) sin 2x (Z2 - Zf2) phi2 + (1/10) sin 3x (Z3 - Zf3) phi3]
    field_cubic: Fraction = Fraction(5, 608)
    field_noise1: Fraction = Fraction(1, 2)
    field_noise2: Fraction = Fraction(1, 5)
    field_noise3: Fraction = Fraction(1, 10)
    # fast field: (1/2) a sin x + (1/1216) a^3 sin 3x + (sigma/sqrt(eps)) [...]
    fast_linear: Fraction = Fraction(1, 2)
    fast_cubic: Fraction = Fraction(1, 1216)
    fast_eps1: Fraction = Fraction(1, 4)
    fast_eps2: Fraction = Fraction(1, 25)
    fast_eps3: Fraction = Fraction(1, 100)
    fast_cascade1: Fraction = Fraction(1, 2)
    fast_cascade2: Fraction = Fraction(1, 5)
    fast_cascade3: Fraction = Fraction(1, 10)
    # linear landscape
    attraction_rate: Fraction = Fraction(27, 10)
    critical_lam: Fraction = Fraction(3, 2)


COEFFS = SsmCoefficients()


def sf_drift(a, lam_p, eps, co: SsmCoefficients = COEFFS):
    """Two-scale amplitude drift; exact when the arguments are rational."""
    return (
        lam_p * (1 + eps * co.sf_linear_eps) * a
        - (co.cubic_base + co.cubic_lam * lam_p + co.sf_cubic_eps * eps) * a**3
        + co.quintic * a**5
    )


def ldp_drift(a, lam_p, co: SsmCoefficients = COEFFS):
    """Averaged-model amplitude drift; exact when the arguments are rational."""
    return lam_p * a - (co.cubic_base + co.cubic_lam * lam_p) * a**3 + co.quintic * a**5


def drift_difference(a, lam_p, eps, co: SsmCoefficients = COEFFS):
    """``sf_drift - ldp_drift`` at equal amplitude.

    Collapses to ``eps (lam_p a / 4 - 3 a^3 / 64)`` identically; rational
    inputs give the exact value.
    """
    return sf_drift(a, lam_p, eps, co) - ldp_drift(a, lam_p, co)


def noise_phi1_difference(eps: float, sigma: float, co: SsmCoefficients = COEFFS) -> float:
    """Magnitude of the first-channel additive-noise mismatch."""
    return float(co.sf_noise_phi1_eps) * sigma * eps * math.sqrt(eps)


@dataclass(frozen=True)
class AmplitudeState:
    """Amplitude plus the filtered-noise states both models share.

    The slow filters (rates 2 and 3 on channels 2 and 3) feed the
    quadratic-noise terms; the fast cascades (rates ``beta / eps``)
    exist only for ``eps > 0`` and feed the field reconstructions.
    """

    a: float
    t: float = 0.0
    z2: ExpFilterState = field(default_factory=lambda: ExpFilterState(rate=2.0))
    z3: ExpFilterState = field(default_factory=lambda: ExpFilterState(rate=3.0))
    fast1: Optional[CascadeFilterState] = None
    fast2: Optional[CascadeFilterState] = None
    fast3: Optional[CascadeFilterState] = None

    def __post_init__(self) -> None:
        if not np.isfinite(self.a):
            raise ValueError(f"amplitude must be finite, got {self.a}")

    @classmethod
    def initial(cls, a0: float, eps: float) -> "AmplitudeState":
        if eps < 0:
            raise ValueError(f"eps must be >= 0, got {eps}")
        fasts = (None, None, None)
        if eps > 0:
            fasts = tuple(CascadeFilterState(rate=beta / eps) for beta in (1.0, 2.0, 3.0))
        return cls(a=a0, z2=ExpFilterState(2.0), z3=ExpFilterState(3.0),
                   fast1=fasts[0], fast2=fasts[1], fast3=fasts[2])


@lru_cache(maxsize=128)
def _drift_floats(model: str, lam_p: float, eps: float) -> Tuple[float, float, float, float]:
    """Float drift coefficients (c1, c3, c5) and the phi_1 noise weight."""
    co = COEFFS
    if model == "sf":
        c1 = lam_p * (1.0 + eps * float(co.sf_linear_eps))
        c3 = -(float(co.cubic_base) + lam_p * float(co.cubic_lam) + eps * float(co.sf_cubic_eps))
        n1 = float(co.noise_phi1) + eps * float(co.sf_noise_phi1_eps)
    elif model == "ldp":
        c1 = lam_p
        c3 = -(float(co.cubic_base) + lam_p * float(co.cubic_lam))
        n1 = float(co.noise_phi1)
    else:
        raise ValueError(f"model must be 'sf' or 'ldp', got {model!r}")
    return c1, c3, float(co.quintic), n1


def _dt_limit(lam_p: float, eps: float) -> float:
    limit = min(0.05, 0.01 / max(abs(lam_p), 0.2))
    if eps > 0:
        limit = min(limit, eps / 10.0)
    return limit


_Q22 = float(COEFFS.quad_22)
_Q13 = float(COEFFS.quad_13)
_Q33 = float(COEFFS.quad_33)
_N3 = float(COEFFS.noise_phi3)


def step_amplitude(
    state: AmplitudeState,
    model: str,
    lam_p: float,
    eps: float,
    sigma: float,
    dt: float,
    rng: RngStream,
) -> AmplitudeState:
    """One Euler step of the chosen amplitude SDE with exact filter updates.

    Each step draws six normals in a fixed order (three shared channel
    increments, three cascade extras), so runs of the two models on
    identically seeded streams see identical noise.  Aborts when the
    amplitude leaves ``|a| <= 10``, far outside asymptotic validity.
    """
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    if dt > _dt_limit(lam_p, eps) * (1 + 1e-12):
        raise ValueError(
            f"dt = {dt} too large; the fast filters need dt <= {_dt_limit(lam_p, eps):.4g}"
        )
    c1, c3, c5, n1 = _drift_floats(model, lam_p, eps)
    xi = rng.normals(6)
    sqdt = math.sqrt(dt)
    dw1 = xi[0] * sqdt
    dw2 = xi[1] * sqdt
    dw3 = xi[2] * sqdt

    a = state.a
    se_sigma = math.sqrt(eps) * sigma
    es2 = eps * sigma * sigma
    da = (c1 * a + c3 * (a * a * a) + c5 * (a * a * a * a * a)) * dt
    da -= se_sigma * (n1 * dw1 + _N3 * (a * a) * dw3)
    da += es2 * a * (-_Q22 * state.z2.value * dw2 + _Q13 * state.z3.value * dw1 - _Q33 * state.z3.value * dw3)
    a_new = a + da
    if not np.isfinite(a_new) or abs(a_new) > 10.0:
        raise BlowupError(state.t + dt, "amplitude", abs(a_new))

    z2 = filter_step_white(state.z2, dt, dw2)
    z3 = filter_step_white(state.z3, dt, dw3)
    fasts = [state.fast1, state.fast2, state.fast3]
    if eps > 0:
        dws = (dw1, dw2, dw3)
        fasts = [
            cascade_step_white(f, dt, dws[b], xi[3 + b]) for b, f in enumerate(fasts)
        ]
    return AmplitudeState(
        a=float(a_new), t=state.t + dt, z2=z2, z3=z3,
        fast1=fasts[0], fast2=fasts[1], fast3=fasts[2],
    )


def simulate_amplitude(
    a0: float,
    model: str,
    lam_p: float,
    eps: float,
    sigma: float,
    grid: TimeGrid,
    rng: RngStream,
    n_replicas: Optional[int] = None,
) -> FloatArray:
    """Amplitude trajectories over a grid, vectorized across replicas.

    Returns shape ``(n_steps + 1,)`` when ``n_replicas`` is None, else
    ``(n_replicas, n_steps + 1)``.  A single replica consumes the stream
    exactly like a loop of :func:`step_amplitude`.
    """
    dt = grid.dt
    if dt > _dt_limit(lam_p, eps) * (1 + 1e-12):
        raise ValueError(
            f"dt = {dt} too large; the fast filters need dt <= {_dt_limit(lam_p, eps):.4g}"
        )
    r = 1 if n_replicas is None else n_replicas
    c1, c3, c5, n1 = _drift_floats(model, lam_p, eps)
    sqdt = math.sqrt(dt)
    se_sigma = math.sqrt(eps) * sigma
    es2 = eps * sigma * sigma
    d2, s2 = math.exp(-2.0 * dt), ou_increment_std(2.0, dt)
    d3, s3 = math.exp(-3.0 * dt), ou_increment_std(3.0, dt)
    q2 = s2 / sqdt
    q3 = s3 / sqdt
    if eps > 0:
        rates = [1.0 / eps, 2.0 / eps, 3.0 / eps]
        decays = [math.exp(-rt * dt) for rt in rates]
        chols = [np.linalg.cholesky(_cascade_noise_cov(rt, dt)) for rt in rates]
        inner = [np.zeros(r) for _ in range(3)]
        outer = [np.zeros(r) for _ in range(3)]

    a = np.full(r, float(a0))
    z2 = np.zeros(r)
    z3 = np.zeros(r)
    out = np.empty((r, grid.n_steps + 1))
    out[:, 0] = a
    for k in range(grid.n_steps):
        xi = rng.normals((r, 6))
        dw1 = xi[:, 0] * sqdt
        dw2 = xi[:, 1] * sqdt
        dw3 = xi[:, 2] * sqdt
        da = (c1 * a + c3 * (a * a * a) + c5 * (a * a * a * a * a)) * dt
        da -= se_sigma * (n1 * dw1 + _N3 * (a * a) * dw3)
        da += es2 * a * (-_Q22 * z2 * dw2 + _Q13 * z3 * dw1 - _Q33 * z3 * dw3)
        a = a + da
        bad = ~np.isfinite(a) | (np.abs(a) > 10.0)
        if np.any(bad):
            worst = float(np.max(np.where(np.isfinite(a), np.abs(a), np.inf)))
            raise BlowupError((k + 1) * dt, "amplitude", worst)
        z2 = d2 * z2 + dw2 * q2
        z3 = d3 * z3 + dw3 * q3
        if eps > 0:
            for b in range(3):
                x0 = (dw1, dw2, dw3)[b] / sqdt
                ch = chols[b]
                e0 = ch[0, 0] * x0 + ch[0, 1] * xi[:, 3 + b]
                e1 = ch[1, 0] * x0 + ch[1, 1] * xi[:, 3 + b]
                new_inner = decays[b] * inner[b] + e0
                outer[b] = decays[b] * (dt * inner[b] + outer[b]) + e1
                inner[b] = new_inner
        out[:, k + 1] = a
    return out[0] if n_replicas is None else out


def cubic_amplitude(lam_p: float, co: SsmCoefficients = COEFFS) -> float:
    """Leading-order steady amplitude from the cubic truncation."""
    if lam_p <= 0:
        raise ValueError("cubic amplitude needs lam_p > 0")
    return math.sqrt(lam_p / float(co.cubic_base))


def amplitude_fixed_point(
    lam_p: float, eps: float = 0.0, model: str = "sf", co: SsmCoefficients = COEFFS
) -> float:
    """Positive root of the quintic drift polynomial."""
    if lam_p <= 0:
        raise ValueError("nontrivial fixed point needs lam_p > 0")
    if model == "sf":
        f = lambda a: float(sf_drift(a, lam_p, eps, co))
    elif model == "ldp":
        f = lambda a: float(ldp_drift(a, lam_p, co))
    else:
        raise ValueError(f"model must be 'sf' or 'ldp', got {model!r}")
    lo = 1e-8
    hi = 3.0
    if f(hi) >= 0:
        raise ValueError("no sign change on (0, 3]; lam_p outside the asymptotic regime")
    return float(brentq(f, lo, hi, xtol=1e-14))


def _mode_field(contributions: Dict[int, float], basis: BasisSpec) -> SpectralField:
    coeffs = np.zeros(basis.n_modes)
    for k, amp in contributions.items():
        coeffs[k - 1] = amp * _SIN_NORM
    return SpectralField(coeffs, basis)


def reconstruct_field(
    state: AmplitudeState,
    model: str,
    eps: float,
    sigma: float,
    basis: Optional[BasisSpec] = None,
    co: SsmCoefficients = COEFFS,
) -> SpectralField:
    """Slow field on the manifold from the amplitude and filter states."""
    if basis is None:
        basis = BasisSpec(n_modes=3)
    if basis.n_modes < 3:
        raise ValueError("field reconstruction spans three modes")
    a = state.a
    se_sigma = math.sqrt(eps) * sigma
    m1 = a
    m3 = float(co.field_cubic) * a**3
    m2 = 0.0
    if se_sigma != 0.0:
        if model == "sf":
            if state.fast1 is None:
                raise ValueError("fast filter states missing; build with eps > 0")
            m1 += se_sigma * float(co.field_noise1) * state.fast1.inner
            m2 -= se_sigma * float(co.field_noise2) * (state.z2.value - state.fast2.inner)
            m3 -= se_sigma * float(co.field_noise3) * (state.z3.value - state.fast3.inner)
        elif model == "ldp":
            m2 -= se_sigma * float(co.field_noise2) * state.z2.value
            m3 -= se_sigma * float(co.field_noise3) * state.z3.value
        else:
            raise ValueError(f"model must be 'sf' or 'ldp', got {model!r}")
    elif model not in ("sf", "ldp"):
        raise ValueError(f"model must be 'sf' or 'ldp', got {model!r}")
    return _mode_field({1: m1, 2: m2, 3: m3}, basis)


def reconstruct_fast_field(
    state: AmplitudeState,
    eps: float,
    sigma: float,
    basis: Optional[BasisSpec] = None,
    co: SsmCoefficients = COEFFS,
) -> SpectralField:
    """Fast field on the two-scale manifold (order-one fluctuations)."""
    if basis is None:
        basis = BasisSpec(n_modes=3)
    if basis.n_modes < 3:
        raise ValueError("field reconstruction spans three modes")
    a = state.a
    m1 = float(co.fast_linear) * a
    m3 = float(co.fast_cubic) * a**3
    m2 = 0.0
    if sigma != 0.0:
        if eps <= 0 or state.fast1 is None:
            raise ValueError("fast field needs eps > 0 and fast filter states")
        amp = sigma / math.sqrt(eps)
        m1 += amp * (
            (1.0 + eps * float(co.fast_eps1)) * state.fast1.inner
            + float(co.fast_cascade1) * state.fast1.outer
        )
        m2 += amp * (
            (1.0 + eps * float(co.fast_eps2)) * state.fast2.inner
            - eps * float(co.fast_eps2) * state.z2.value
            + float(co.fast_cascade2) * state.fast2.outer
        )
        m3 += amp * (
            (1.0 + eps * float(co.fast_eps3)) * state.fast3.inner
            - eps * float(co.fast_eps3) * state.z3.value
            + float(co.fast_cascade3) * state.fast3.outer
        )
    return _mode_field({1: m1, 2: m2, 3: m3}, basis)


def _three_mode_spec(lam_p: float, eps: float, sigma: float, n_modes: int) -> SystemSpec:
    """Full system with noise on the first three modes, matching the
    ``dW = sum phi_k sin(kx)`` convention (per-mode weight pi/2)."""
    q = np.zeros(n_modes)
    q[:3] = math.pi / 2.0
    return SystemSpec(
        epsilon=eps,
        sigma=sigma,
        lam=1.5 + lam_p,
        basis=BasisSpec(n_modes=n_modes),
        q=QSpec(q),
    )


def offmanifold_decay_rate(
    eps: float = 0.02,
    delta: float = 0.05,
    a0: float = 0.1,
    n_modes: int = 8,
    t_end: float = 1.2,
    fit_window: Tuple[float, float] = (0.2, 1.0),
    dt: Optional[float] = None,
) -> float:
    """Fitted decay rate of a second-mode perturbation at criticality.

    Deterministic run of the full system at ``lam = 3/2`` from
    ``a0 sin x + delta sin 2x`` with the fast field pre-equilibrated;
    the log-slope of the second mode over the fit window estimates the
    attraction rate onto the manifold (27/10 in the limit).
    """
    spec = _three_mode_spec(0.0, eps, 0.0, n_modes)
    basis = spec.basis
    u0 = np.zeros(n_modes)
    u0[0] = a0 * _SIN_NORM
    u0[1] = delta * _SIN_NORM
    u0f = SpectralField(u0, basis)
    v0f = SpectralField(apply_resolvent(u0f).coeffs, basis)
    if dt is None:
        dt = eps / 20.0
    grid = TimeGrid(t_end=t_end, n_steps=int(round(t_end / dt)))
    u_path, _ = simulate_path(u0f, v0f, spec, grid, RngStream(0))
    mode2 = np.abs(u_path.values[:, 1]) / _SIN_NORM
    t = grid.times
    keep = (t >= fit_window[0]) & (t <= fit_window[1]) & (mode2 > 0)
    slope = np.polyfit(t[keep], np.log(mode2[keep]), 1)[0]
    return float(-slope)


def full_steady_amplitude(
    lam_p: float = 0.1,
    eps: float = 0.05,
    a0: float = 0.3,
    n_modes: int = 8,
    t_end: float = 80.0,
    dt: Optional[float] = None,
) -> float:
    """First-mode amplitude of the noiseless full system after settling."""
    spec = _three_mode_spec(lam_p, eps, 0.0, n_modes)
    basis = spec.basis
    u0 = np.zeros(n_modes)
    u0[0] = a0 * _SIN_NORM
    u0f = SpectralField(u0, basis)
    v0f = SpectralField(apply_resolvent(u0f).coeffs, basis)
    if dt is None:
        dt = eps / 20.0
    grid = TimeGrid(t_end=t_end, n_steps=int(round(t_end / dt)))
    u_path, _ = simulate_path(u0f, v0f, spec, grid, RngStream(0))
    return float(u_path.values[-1, 0] / _SIN_NORM)


def amplitude_variance_pair(
    rng: RngStream,
    lam_p: float = 0.1,
    eps: float = 0.05,
    sigma: float = 0.1,
    n_replicas: int = 24,
    t_end: float = 30.0,
    burn: float = 15.0,
    n_modes: int = 8,
    dt: Optional[float] = None,
) -> Dict[str, float]:
    """Stationary amplitude variance: full system vs the two-scale model.

    Both ensembles start at the deterministic fixed point and discard
    the burn-in window; per-replica variances give the spread estimate.
    """
    if dt is None:
        dt = eps / 20.0
    a_star = amplitude_fixed_point(lam_p, eps, "sf")
    spec = _three_mode_spec(lam_p, eps, sigma, n_modes)
    basis = spec.basis
    u0 = np.zeros(n_modes)
    u0[0] = a_star * _SIN_NORM
    v0 = apply_resolvent(SpectralField(u0, basis)).coeffs
    grid = TimeGrid(t_end=t_end, n_steps=int(round(t_end / dt)))
    traj, blown = ensemble_mode_trajectory(
        spec, grid, u0, v0, n_replicas, rng.substream(0), mode=1
    )
    if blown.any():
        raise BlowupError(t_end, "full-system replica", np.inf)
    a_full = traj / _SIN_NORM
    a_model = simulate_amplitude(
        a_star, "sf", lam_p, eps, sigma, grid, rng.substream(1), n_replicas=n_replicas
    )
    keep = grid.times >= burn

    def pooled(arr: FloatArray) -> Tuple[float, float]:
        block = arr[:, keep]
        mean = block.mean()
        per_rep = ((block - mean) ** 2).mean(axis=1)
        return float(per_rep.mean()), float(per_rep.std(ddof=1) / math.sqrt(arr.shape[0]))

    var_full, se_full = pooled(a_full)
    var_model, se_model = pooled(a_model)
    return {
        "var_full": var_full,
        "se_full": se_full,
        "var_model": var_model,
        "se_model": se_model,
        "ratio": var_full / var_model if var_model > 0 else math.inf,
    }


@dataclass(frozen=True)
class SsmComparison:
    """Report of the full-system vs amplitude-model comparison."""

    lam_p: float
    epsilon: float
    sigma: float
    decay_rate: float
    sf_fixed_point: float
    full_steady: float
    steady_gap: float
    var_full: float
    var_model: float
    var_se_full: float
    var_se_model: float
    n_replicas: int

    def to_dict(self) -> Dict[str, float]:
        return {
            "lam_p": self.lam_p,
            "epsilon": self.epsilon,
            "sigma": self.sigma,
            "decay_rate": self.decay_rate,
            "sf_fixed_point": self.sf_fixed_point,
            "full_steady": self.full_steady,
            "steady_gap": self.steady_gap,
            "var_full": self.var_full,
            "var_model": self.var_model,
            "var_se_full": self.var_se_full,
            "var_se_model": self.var_se_model,
            "n_replicas": self.n_replicas,
        }


def ssm_vs_full(
    spec: SystemSpec,
    lam_p: float,
    grid: TimeGrid,
    rng: RngStream,
    n_replicas: int = 24,
) -> SsmComparison:
    """Compare the full system against the amplitude model on its manifold.

    Runs three probes: the off-manifold decay rate at criticality, the
    noiseless steady amplitude against the drift fixed point, and the
    paired stationary amplitude variance (the asymptotic soft check).
    ``spec.lam`` must equal ``3/2 + lam_p``.
    """
    if abs(spec.lam - (1.5 + lam_p)) > 1e-12:
        raise ValueError("spec.lam and lam_p disagree about the bifurcation offset")
    n_modes = spec.basis.n_modes
    decay = offmanifold_decay_rate(eps=spec.epsilon, n_modes=n_modes)
    a_star = amplitude_fixed_point(lam_p, spec.epsilon, "sf")
    steady = full_steady_amplitude(lam_p, spec.epsilon, n_modes=n_modes)
    pair = amplitude_variance_pair(
        rng,
        lam_p=lam_p,
        eps=spec.epsilon,
        sigma=spec.sigma,
        n_replicas=n_replicas,
        t_end=grid.t_end,
        burn=0.5 * grid.t_end,
        n_modes=n_modes,
    )
    return SsmComparison(
        lam_p=lam_p,
        epsilon=spec.epsilon,
        sigma=spec.sigma,
        decay_rate=decay,
        sf_fixed_point=a_star,
        full_steady=steady,
        steady_gap=abs(steady - a_star),
        var_full=pair["var_full"],
        var_model=pair["var_model"],
        var_se_full=pair["se_full"],
        var_se_model=pair["se_model"],
        n_replicas=n_replicas,
    )
