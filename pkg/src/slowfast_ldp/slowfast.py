"""Coupled slow-fast stochastic reaction-diffusion integrator.

The pair solved here is, on the sine basis of ``A`` with Dirichlet
boundary,

    du = [A u + f(u, v)] dt
    dv = (1/eps) [A v + g(u, v)] dt + (sigma / sqrt(eps)) dW

with a Q-Wiener ``W``.  The reference reaction is ``f(u, v) =
lam * sin(u) - v`` and ``g(u, v) = -v + u``; its ``-v`` term is folded
into the fast linear operator, which makes every fast mode an exact
Ornstein-Uhlenbeck update.  For a frozen slow field the fast equation
then has the Gaussian stationary law with mean ``(I - A)^{-1} u`` and
mode variance ``sigma^2 q_i / (2 (1 + lambda_i))``, independent of
``eps``.

Integration is exponential Euler: per mode the linear decay factor is
exact and the nonlinear contribution enters with weight
``(1 - exp(-lambda dt)) / lambda``; the fast noise is added with its
exact per-step OU variance.  The stiff fast scale therefore constrains
accuracy, not stability.  States that leave the float range raise
:class:`BlowupError`; nothing is clipped.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from slowfast_ldp.grids import FieldPath, TimeGrid
from slowfast_ldp.noise import QSpec, RngStream
from slowfast_ldp.spectral import BasisSpec, FloatArray, SpectralField

__all__ = [
    "BlowupError",
    "Reaction",
    "sine_reaction",
    "HypothesisConstants",
    "SystemSpec",
    "State",
    "StepCoefficients",
    "step",
    "simulate_path",
    "frozen_fast_stationary",
    "check_hypotheses",
]


class BlowupError(RuntimeError):
    """A trajectory left the representable range; no clipping is applied."""

    def __init__(self, t: float, what: str, magnitude: float):
        self.t = t
        self.what = what
        self.magnitude = magnitude
        super().__init__(
            f"solution blow-up at t={t:.6g}: {what} reached magnitude {magnitude:.3g}"
        )


@dataclass(frozen=True)
class Reaction:
    """Pointwise reaction pair evaluated on collocation values.

    ``fold_rate`` is the coefficient of the ``-v`` part of ``g`` that is
    folded into the fast linear operator; ``g_residual`` must return
    ``g(u, v) + fold_rate * v``.
    """

    f: Callable[[FloatArray, FloatArray], FloatArray]
    g_residual: Callable[[FloatArray, FloatArray], FloatArray]
    fold_rate: float = 0.0

    def __post_init__(self) -> None:
        if self.fold_rate < 0 or not np.isfinite(self.fold_rate):
            raise ValueError(f"fold_rate must be finite and >= 0, got {self.fold_rate}")


def sine_reaction(lam: float) -> Reaction:
    """Reference reaction ``f = lam sin(u) - v``, ``g = -v + u``."""
    return Reaction(
        f=lambda u, v: lam * np.sin(u) - v,
        g_residual=lambda u, v: u,
        fold_rate=1.0,
    )


@dataclass(frozen=True)
class HypothesisConstants:
    """Constants of the structural growth and Lipschitz bounds."""

    L_f: float
    L_g: float
    a: float
    b: float
    c: float
    d: float
    e: float

    @classmethod
    def for_sine_reaction(cls, lam: float) -> "HypothesisConstants":
        al = abs(lam)
        return cls(
            L_f=max(al, 1.0),
            L_g=1.0,
            a=max(2.0 * al * al, al),
            b=2.0,
            c=2.0 * al * al + 1.0,
            d=1.0,
            e=1.0,
        )


@dataclass(frozen=True)
class SystemSpec:
    """Full parameter set of the slow-fast pair.

    Parameters
    ----------
    epsilon : float
        Time-scale separation, ``> 0``.
    sigma : float
        Noise strength on the fast equation, ``>= 0``.
    lam : float
        Reaction strength of the sine nonlinearity.
    basis : BasisSpec
    q : QSpec
        Mode weights of the driving Q-Wiener process.
    reaction : Reaction, optional
        Defaults to the sine reaction built from ``lam``.
    constants : HypothesisConstants, optional
        Structural-bound metadata used by :func:`check_hypotheses`.
    """

    epsilon: float
    sigma: float
    lam: float
    basis: BasisSpec
    q: QSpec
    reaction: Optional[Reaction] = None
    constants: Optional[HypothesisConstants] = None

    def __post_init__(self) -> None:
        if not np.isfinite(self.epsilon) or self.epsilon <= 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if not np.isfinite(self.sigma) or self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        if not np.isfinite(self.lam):
            raise ValueError("lam must be finite")
        if self.q.n_modes != self.basis.n_modes:
            raise ValueError("QSpec and basis disagree on the number of modes")
        if self.reaction is None:
            object.__setattr__(self, "reaction", sine_reaction(self.lam))
        if self.constants is None:
            object.__setattr__(
                self, "constants", HypothesisConstants.for_sine_reaction(self.lam)
            )

    def with_epsilon(self, epsilon: float) -> "SystemSpec":
        return SystemSpec(
            epsilon, self.sigma, self.lam, self.basis, self.q, self.reaction, self.constants
        )

    def default_dt(self) -> float:
        """Step resolving the fast scale: ``eps / 20``."""
        return self.epsilon / 20.0

    def stationary_mean_coeffs(self, u_coeffs: FloatArray) -> FloatArray:
        """Frozen-fast stationary mean ``(I - A)^{-1} u`` (sine reaction)."""
        return np.asarray(u_coeffs) / (1.0 + self.basis.eigenvalues)

    def stationary_var_coeffs(self) -> FloatArray:
        """Frozen-fast stationary mode variances (sine reaction)."""
        return self.sigma**2 * self.q.q / (2.0 * (1.0 + self.basis.eigenvalues))


@dataclass(frozen=True)
class State:
    """Instantaneous state of the pair."""

    u: SpectralField
    v: SpectralField
    t: float = 0.0


@dataclass(frozen=True)
class StepCoefficients:
    """Per-mode factors of one exponential-Euler step at fixed ``dt``."""

    dt: float
    slow_decay: FloatArray
    slow_weight: FloatArray
    fast_decay: FloatArray
    fast_weight: FloatArray
    noise_std: FloatArray

    @classmethod
    def build(cls, spec: SystemSpec, dt: float) -> "StepCoefficients":
        if dt <= 0 or not np.isfinite(dt):
            raise ValueError(f"dt must be positive, got {dt}")
        lam = spec.basis.eigenvalues
        fold = spec.reaction.fold_rate
        slow_decay = np.exp(-lam * dt)
        slow_weight = -np.expm1(-lam * dt) / lam
        shifted = lam + fold
        fast_exponent = shifted * dt / spec.epsilon
        fast_decay = np.exp(-fast_exponent)
        fast_weight = -np.expm1(-fast_exponent) / shifted
        noise_std = spec.sigma * np.sqrt(
            spec.q.q * -np.expm1(-2.0 * fast_exponent) / (2.0 * shifted)
        )
        return cls(dt, slow_decay, slow_weight, fast_decay, fast_weight, noise_std)


def _step_arrays(
    u: FloatArray,
    v: FloatArray,
    coef: StepCoefficients,
    spec: SystemSpec,
    xi: FloatArray,
) -> Tuple[FloatArray, FloatArray]:
    """One step on raw coefficient arrays; batched over leading axes."""
    basis = spec.basis
    u_vals = basis.to_values(u)
    v_vals = basis.to_values(v)
    f_c = basis.from_values(spec.reaction.f(u_vals, v_vals))
    g_c = basis.from_values(spec.reaction.g_residual(u_vals, v_vals))
    u_new = coef.slow_decay * u + coef.slow_weight * f_c
    v_new = coef.fast_decay * v + coef.fast_weight * g_c + coef.noise_std * xi
    return u_new, v_new


def step(state: State, spec: SystemSpec, dt: float, rng: RngStream) -> State:
    """Advance the pair by one step.

    Raises
    ------
    BlowupError
        If either field leaves the finite range.
    """
    coef = StepCoefficients.build(spec, dt)
    xi = rng.normals(spec.basis.n_modes)
    u_new, v_new = _step_arrays(state.u.coeffs, state.v.coeffs, coef, spec, xi)
    t_new = state.t + dt
    _check_finite(u_new, v_new, t_new)
    basis = spec.basis
    return State(SpectralField(u_new, basis), SpectralField(v_new, basis), t_new)


def _check_finite(u: FloatArray, v: FloatArray, t: float) -> None:
    if not np.all(np.isfinite(u)):
        finite = np.abs(u[np.isfinite(u)])
        raise BlowupError(t, "slow field", float(np.max(finite, initial=0.0)))
    if not np.all(np.isfinite(v)):
        finite = np.abs(v[np.isfinite(v)])
        raise BlowupError(t, "fast field", float(np.max(finite, initial=0.0)))


def simulate_path(
    u0: SpectralField,
    v0: SpectralField,
    spec: SystemSpec,
    grid: TimeGrid,
    rng: RngStream,
) -> Tuple[FieldPath, FieldPath]:
    """Simulate one trajectory of the pair on a time grid.

    Returns the slow and fast paths sampled at every grid node.  The
    noise uses one draw of ``n_modes`` normals per step in step order,
    so a fixed stream reproduces the trajectory exactly.
    """
    basis = spec.basis
    if u0.basis is not basis and not u0.basis.compatible_with(basis):
        raise ValueError("u0 basis does not match the system basis")
    if v0.basis is not basis and not v0.basis.compatible_with(basis):
        raise ValueError("v0 basis does not match the system basis")
    coef = StepCoefficients.build(spec, grid.dt)
    n = grid.n_steps
    us = np.empty((n + 1, basis.n_modes))
    vs = np.empty((n + 1, basis.n_modes))
    us[0] = u0.coeffs
    vs[0] = v0.coeffs
    u, v = us[0].copy(), vs[0].copy()
    for k in range(n):
        xi = rng.normals(basis.n_modes)
        u, v = _step_arrays(u, v, coef, spec, xi)
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            _check_finite(u, v, grid.times[k + 1])
        us[k + 1] = u
        vs[k + 1] = v
    return FieldPath(us, grid, basis), FieldPath(vs, grid, basis)


def frozen_fast_stationary(
    u: SpectralField,
    spec: SystemSpec,
    burn_in: float,
    n_samples: int,
    rng: RngStream,
    dt: Optional[float] = None,
    stride: Optional[int] = None,
    n_chains: int = 1,
) -> FloatArray:
    """Sample the stationary law of the fast field with ``u`` frozen.

    Runs the fast equation alone, discards a burn-in window, then records
    every ``stride``-th state along the chain (time averaging).  With
    ``n_chains > 1`` the samples are split across independent chains,
    each with its own burn-in.  Chain ``c`` draws from ``rng.substream(c)``,
    so a given stream address always reproduces the same sample set;
    independent repetitions must pass distinct stream addresses.

    Parameters
    ----------
    u : SpectralField
        Frozen slow field.
    burn_in : float
        Equilibration horizon; must satisfy
        ``exp(-(lambda_1 + fold) burn_in / eps) < 1e-6``.
    n_samples : int
        Total number of recorded states.
    stride : int, optional
        Steps between records; defaults to three correlation times of
        the slowest fast mode.

    Returns
    -------
    ndarray of shape ``(n_samples, n_modes)``
        Rows are mode coefficients of sampled fast fields.

    Warns
    -----
    UserWarning
        If the first and second halves of the sample drift apart by more
        than three combined standard errors in some mode, which signals
        insufficient burn-in.
    """
    basis = spec.basis
    fold = spec.reaction.fold_rate
    slowest = basis.eigenvalue(1) + fold
    if np.exp(-slowest * burn_in / spec.epsilon) >= 1e-6:
        need = 14.0 * spec.epsilon / slowest
        raise ValueError(
            f"burn_in={burn_in:.4g} too short for equilibration; need > {need:.4g}"
        )
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if not 1 <= n_chains <= n_samples:
        raise ValueError("n_chains must be in 1..n_samples")
    if dt is None:
        dt = spec.default_dt()
    if stride is None:
        corr_time = spec.epsilon / slowest
        stride = max(1, int(np.ceil(3.0 * corr_time / dt)))

    coef = StepCoefficients.build(spec, dt)
    u_vals = basis.to_values(u.coeffs)
    burn_steps = int(np.ceil(burn_in / dt))
    per_chain = int(np.ceil(n_samples / n_chains))

    def g_coeffs(v: FloatArray) -> FloatArray:
        v_vals = basis.to_values(v)
        return basis.from_values(spec.reaction.g_residual(u_vals, v_vals))

    samples = np.empty((n_chains, per_chain, basis.n_modes))
    for c in range(n_chains):
        chain_rng = rng.substream(c)
        v = np.zeros(basis.n_modes)
        for _ in range(burn_steps):
            xi = chain_rng.normals(basis.n_modes)
            v = coef.fast_decay * v + coef.fast_weight * g_coeffs(v) + coef.noise_std * xi
        for s in range(per_chain):
            for _ in range(stride):
                xi = chain_rng.normals(basis.n_modes)
                v = coef.fast_decay * v + coef.fast_weight * g_coeffs(v) + coef.noise_std * xi
            samples[c, s] = v
    out = samples.reshape(-1, basis.n_modes)[:n_samples]

    half = n_samples // 2
    if half >= 8:
        first, second = out[:half], out[n_samples - half:]
        gap = np.abs(first.mean(axis=0) - second.mean(axis=0))
        se = np.sqrt(first.var(axis=0) / half + second.var(axis=0) / half)
        if np.any(gap > 3.0 * np.maximum(se, 1e-300)):
            warnings.warn(
                "frozen-fast sample halves drift apart by more than 3 SE; "
                "burn-in may be insufficient",
                stacklevel=2,
            )
    return out


def check_hypotheses(
    spec: SystemSpec, radius: float = 8.0, n_points: int = 400, seed: int = 0
) -> dict:
    """Numerically screen the structural bounds on a sampled box.

    Checks, over random points of ``[-radius, radius]^2``:

    * Lipschitz bounds ``|f(p) - f(p')| <= L_f (|dx| + |dy|)`` and the
      same for ``g`` with ``L_g``;
    * growth ``|f(x,y)|^2 <= a x^2 + b y^2 + c`` and
      ``f(x,y) x <= a x^2 + b |x y| + c``;
    * fast dissipativity ``g(x,y) y <= -d y^2 + e |x y|``;
    * the spectral-gap condition ``L_g < lambda_1 + fold_rate``: the
      folded linear part shifts the fast operator, so mixing requires
      the residual reaction's Lipschitz constant to lie below the first
      eigenvalue of the shifted operator (for ``fold_rate = 0`` this is
      the plain ``L_g < lambda_1``);
    * finiteness of ``tr Q``.

    Returns a dict mapping check names to ``(ok, margin)`` where margin
    is the worst slack observed (negative means violated).
    """
    cst = spec.constants
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-radius, radius, size=(n_points, 2))
    pts2 = rng.uniform(-radius, radius, size=(n_points, 2))
    x, y = pts[:, 0], pts[:, 1]
    x2, y2 = pts2[:, 0], pts2[:, 1]

    def f_scalar(a, b):
        return spec.reaction.f(np.asarray(a), np.asarray(b))

    def g_scalar(a, b):
        return spec.reaction.g_residual(np.asarray(a), np.asarray(b)) - spec.reaction.fold_rate * np.asarray(b)

    fv, fv2 = f_scalar(x, y), f_scalar(x2, y2)
    gv, gv2 = g_scalar(x, y), g_scalar(x2, y2)
    dist = np.abs(x - x2) + np.abs(y - y2)

    results = {}
    results["H1_lipschitz_f"] = _margin(cst.L_f * dist - np.abs(fv - fv2))
    results["H2_lipschitz_g"] = _margin(cst.L_g * dist - np.abs(gv - gv2))
    results["H1_growth_sq"] = _margin(cst.a * x**2 + cst.b * y**2 + cst.c - fv**2)
    results["H1_growth_x"] = _margin(cst.a * x**2 + cst.b * np.abs(x * y) + cst.c - fv * x)
    results["H2_dissipative"] = _margin(-cst.d * y**2 + cst.e * np.abs(x * y) - gv * y)
    gap = spec.basis.eigenvalue(1) + spec.reaction.fold_rate - cst.L_g
    results["H3_spectral_gap"] = (gap > 0, gap)
    results["H4_trace_class"] = (np.isfinite(spec.q.trace), spec.q.trace)
    return results


def _margin(slack: FloatArray) -> Tuple[bool, float]:
    worst = float(np.min(slack))
    return (worst >= -1e-9, worst)
