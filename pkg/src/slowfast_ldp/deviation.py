"""Normal deviations around the averaged dynamics.

The rescaled error ``z_eps = (u_eps - u) / sqrt(eps)`` converges to the
Gaussian process solving

    dz = [A z + Dfbar(u(t)) z] dt + sqrt(B) dWbar

driven by a cylindrical Wiener process on the truncated basis.  The
noise covariance is the integrated autocovariance of the fast
fluctuation of the slow drift,

    B(u) = 2 * integral_0^inf E[(f(u, eta(t)) - fbar(u))
                                 (x) (f(u, eta(0)) - fbar(u))] dt

with ``eta`` the stationary frozen-fast process at unit time-scale
separation.  For the sine reaction ``f`` is linear in the fast variable,
so ``sqrt(B) = sigma (I - A)^{-1} sqrt(Q)`` exactly: B is diagonal with
entries ``sigma^2 q_i / (1 + lambda_i)^2`` and does not depend on the
frozen slow field.

``Dfbar`` is the derivative of the averaged drift; for the sine reaction
it acts as ``z -> lam * P[cos(u) z] - (I - A)^{-1} z``, combining the
pointwise linearisation with the derivative of the frozen-fast mean.
"""

from __future__ import annotations

import hashlib
import warnings
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from slowfast_ldp._ensemble import ensemble_final_states
from slowfast_ldp.grids import FieldPath, TimeGrid
from slowfast_ldp.noise import RngStream
from slowfast_ldp.slowfast import StepCoefficients, SystemSpec
from slowfast_ldp.spectral import BasisSpec, FloatArray, SpectralField

__all__ = [
    "CovOperator",
    "analytic_example_cov",
    "empirical_covariance",
    "deviation_path",
    "simulate_dev_limit",
    "dev_limit_final_samples",
    "simulate_avg_plus_dev",
]


@dataclass(frozen=True)
class CovOperator:
    """Square root of the deviation noise covariance on the mode basis.

    ``sqrt_matrix`` is the symmetric factor ``S`` with ``B = S S^T``.
    ``stderr`` (optional) carries per-entry standard errors of an
    empirical ``B`` across replicas.
    """

    sqrt_matrix: FloatArray
    mode: str
    u_fingerprint: str = ""
    n_samples: int = 0
    lag_horizon: float = 0.0
    stderr: Optional[FloatArray] = None

    def __post_init__(self) -> None:
        s = np.asarray(self.sqrt_matrix, dtype=np.float64)
        if s.ndim != 2 or s.shape[0] != s.shape[1]:
            raise ValueError("sqrt_matrix must be square")
        s = s.copy()
        s.setflags(write=False)
        object.__setattr__(self, "sqrt_matrix", s)
        if self.stderr is not None:
            e = np.asarray(self.stderr, dtype=np.float64).copy()
            e.setflags(write=False)
            object.__setattr__(self, "stderr", e)

    @property
    def n_modes(self) -> int:
        return self.sqrt_matrix.shape[0]

    @property
    def matrix(self) -> FloatArray:
        """The covariance ``B = S S^T``."""
        return self.sqrt_matrix @ self.sqrt_matrix.T

    def apply_sqrt(self, z: FloatArray) -> FloatArray:
        """Apply ``S`` to coefficient vectors (batched over leading axes)."""
        return np.asarray(z) @ self.sqrt_matrix.T

    def min_eigenvalue(self, active: Optional[np.ndarray] = None) -> float:
        """Smallest eigenvalue of ``B``, optionally on an active-mode subset.

        This is the nondegeneracy constant: a uniformly positive value on
        the noise-active subspace makes the action finite on controlled
        paths.
        """
        b = self.matrix
        if active is not None:
            idx = np.flatnonzero(np.asarray(active))
            if idx.size == 0:
                raise ValueError("active mask selects no modes")
            b = b[np.ix_(idx, idx)]
        return float(np.linalg.eigvalsh(b)[0])

    def aggregate_se(self) -> float:
        """Frobenius aggregation of the per-entry standard errors."""
        if self.stderr is None:
            raise ValueError("no standard errors recorded for this operator")
        return float(np.sqrt(np.sum(self.stderr**2)))


def analytic_example_cov(spec: SystemSpec) -> CovOperator:
    """Closed-form factor ``S = sigma (I - A)^{-1} sqrt(Q)`` (sine reaction)."""
    s = np.diag(spec.sigma * np.sqrt(spec.q.q) / (1.0 + spec.basis.eigenvalues))
    return CovOperator(sqrt_matrix=s, mode="analytic")


def _clip_psd(b: FloatArray) -> Tuple[FloatArray, int]:
    """Project a symmetric matrix onto the PSD cone; count clipped eigenvalues."""
    w, v = np.linalg.eigh(b)
    n_clipped = int(np.sum(w < 0))
    w_clip = np.maximum(w, 0.0)
    return (v * w_clip) @ v.T, n_clipped


def _sym_sqrt(b: FloatArray) -> FloatArray:
    w, v = np.linalg.eigh(b)
    return (v * np.sqrt(np.maximum(w, 0.0))) @ v.T


def _lag_integrated_cov(
    y: FloatArray, dt: float, max_lag: int
) -> FloatArray:
    """Matrix ``2 * integral C_ij(tau) dtau`` from one centered sample block.

    Cross-correlation sums come from FFTs; each pair integrates by the
    trapezoid rule up to the first lag where the integrand drops below
    1e-3 of its lag-0 magnitude (or ``max_lag``).
    """
    k, n = y.shape
    nfft = 1 << int(np.ceil(np.log2(2 * k)))
    f = np.fft.rfft(y, n=nfft, axis=0)
    counts = k - np.arange(max_lag + 1)
    out = np.empty((n, n))
    for i in range(n):
        sums = np.fft.irfft(f[:, i : i + 1] * np.conj(f), n=nfft, axis=0)[: max_lag + 1]
        c = sums / counts[:, None]  # C_ij(l dt) for this i, all j
        thresh = 1e-3 * np.abs(c[0])
        for j in range(n):
            below = np.flatnonzero(np.abs(c[1:, j]) < thresh[j])
            cut = int(below[0]) + 1 if below.size else max_lag
            out[i, j] = 2.0 * np.trapezoid(c[: cut + 1, j], dx=dt)
    return out


def empirical_covariance(
    u: SpectralField,
    spec: SystemSpec,
    lag_horizon: float,
    n_samples: int,
    rng: RngStream,
    dt: float = 0.01,
    n_replicas: int = 8,
) -> CovOperator:
    """Estimate ``B(u)`` from frozen-fast trajectories at unit separation.

    Each replica runs the fast equation with ``u`` frozen and ``eps = 1``
    (the defining time scale of ``B``), records the drift fluctuation
    ``f(u, eta(t))`` minus its sample mean at every step, and integrates
    the empirical lag covariance.  The estimate is the replica mean,
    symmetrised and projected onto the PSD cone; a warning reports any
    clipped eigenvalues.  Per-entry standard errors across replicas are
    attached.

    Parameters
    ----------
    lag_horizon : float
        Hard cap of the lag integration window.
    n_samples : int
        Recorded steps per replica; the trajectory spans
        ``n_samples * dt`` time units.
    """
    if n_replicas < 2:
        raise ValueError("need n_replicas >= 2 to attach standard errors")
    if n_samples * dt < 3.0 * lag_horizon:
        raise ValueError("trajectory shorter than three lag horizons")
    basis = spec.basis
    spec1 = spec.with_epsilon(1.0)
    coef = StepCoefficients.build(spec1, dt)
    fold = spec.reaction.fold_rate
    burn_steps = int(np.ceil(14.0 / (basis.eigenvalue(1) + fold) / dt))
    max_lag = int(np.round(lag_horizon / dt))
    u_vals = basis.to_values(u.coeffs)

    estimates = np.empty((n_replicas, basis.n_modes, basis.n_modes))
    for r in range(n_replicas):
        chain = rng.substream(r)
        v = np.zeros(basis.n_modes)
        for _ in range(burn_steps):
            xi = chain.normals(basis.n_modes)
            g_c = basis.from_values(spec1.reaction.g_residual(u_vals, basis.to_values(v)))
            v = coef.fast_decay * v + coef.fast_weight * g_c + coef.noise_std * xi
        y = np.empty((n_samples, basis.n_modes))
        for s in range(n_samples):
            xi = chain.normals(basis.n_modes)
            g_c = basis.from_values(spec1.reaction.g_residual(u_vals, basis.to_values(v)))
            v = coef.fast_decay * v + coef.fast_weight * g_c + coef.noise_std * xi
            y[s] = basis.from_values(spec1.reaction.f(u_vals, basis.to_values(v)))
        y -= y.mean(axis=0)
        estimates[r] = _lag_integrated_cov(y, dt, max_lag)

    b = estimates.mean(axis=0)
    b = 0.5 * (b + b.T)
    stderr = estimates.std(axis=0, ddof=1) / np.sqrt(n_replicas)
    b, n_clipped = _clip_psd(b)
    if n_clipped:
        warnings.warn(
            f"covariance estimate had {n_clipped} negative eigenvalue(s); "
            "clipped to the PSD cone",
            stacklevel=2,
        )
    fingerprint = hashlib.sha256(np.ascontiguousarray(u.coeffs).tobytes()).hexdigest()[:12]
    return CovOperator(
        sqrt_matrix=_sym_sqrt(b),
        mode="empirical",
        u_fingerprint=fingerprint,
        n_samples=n_samples * n_replicas,
        lag_horizon=lag_horizon,
        stderr=stderr,
    )


def deviation_path(u_path: FieldPath, avg_path: FieldPath, epsilon: float) -> FieldPath:
    """Rescaled deviation ``(u_eps - u) / sqrt(eps)`` node by node."""
    if not u_path.same_layout(avg_path):
        raise ValueError("paths must share the same grid and basis")
    if epsilon <= 0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    z = (u_path.values - avg_path.values) / np.sqrt(epsilon)
    return FieldPath(z, u_path.grid, u_path.basis)


def _dfbar_apply(z: FloatArray, u_vals_cos: FloatArray, spec: SystemSpec) -> FloatArray:
    """Derivative of the averaged drift at ``u`` applied to ``z`` (batched)."""
    basis = spec.basis
    z_vals = basis.to_values(z)
    pointwise = basis.from_values(u_vals_cos * z_vals)
    return spec.lam * pointwise - z / (1.0 + basis.eigenvalues)


def simulate_dev_limit(
    avg_path: FieldPath,
    spec: SystemSpec,
    cov: CovOperator,
    rng: RngStream,
    z0: Optional[SpectralField] = None,
) -> FieldPath:
    """One trajectory of the Gaussian deviation limit along ``avg_path``.

    Exponential Euler on ``A``; the linearised drift and the noise
    ``S xi sqrt(dt)`` enter per step, with the drift frozen at the left
    node of the averaged path.
    """
    samples = _dev_limit_run(avg_path, spec, cov, rng, z0, n_replicas=1, keep_path=True)
    return samples


def dev_limit_final_samples(
    avg_path: FieldPath,
    spec: SystemSpec,
    cov: CovOperator,
    n_replicas: int,
    rng: RngStream,
) -> FloatArray:
    """Final-time deviation samples across a batch of replicas."""
    return _dev_limit_run(avg_path, spec, cov, rng, None, n_replicas, keep_path=False)


def _dev_limit_run(avg_path, spec, cov, rng, z0, n_replicas, keep_path):
    basis = spec.basis
    if cov.n_modes != basis.n_modes:
        raise ValueError("covariance operator does not match the basis")
    grid = avg_path.grid
    dt = grid.dt
    lam = basis.eigenvalues
    decay = np.exp(-lam * dt)
    weight = -np.expm1(-lam * dt) / lam
    sqdt = np.sqrt(dt)
    z = np.zeros((n_replicas, basis.n_modes))
    if z0 is not None:
        z[:] = z0.coeffs
    if keep_path:
        out = np.empty((grid.n_steps + 1, basis.n_modes))
        out[0] = z[0]
    cos_vals = np.cos(basis.to_values(avg_path.values))  # all nodes at once
    for k in range(grid.n_steps):
        drift = _dfbar_apply(z, cos_vals[k], spec)
        noise = cov.apply_sqrt(rng.normals((n_replicas, basis.n_modes))) * sqdt
        z = decay * z + weight * drift + noise
        if keep_path:
            out[k + 1] = z[0]
    if keep_path:
        return FieldPath(out, grid, basis)
    return z


def simulate_avg_plus_dev(
    u0: SpectralField,
    spec: SystemSpec,
    cov: CovOperator,
    grid: TimeGrid,
    rng: RngStream,
) -> FieldPath:
    """Averaged drift plus scaled deviation noise in one slow equation.

    Solves ``du = [A u + fbar(u)] dt + sqrt(eps) S dWbar``.  With the
    noise factor zero this reproduces :func:`solve_averaged` exactly,
    step by step.
    """
    basis = spec.basis
    if cov.n_modes != basis.n_modes:
        raise ValueError("covariance operator does not match the basis")
    lam = basis.eigenvalues
    dt = grid.dt
    decay = np.exp(-lam * dt)
    weight = -np.expm1(-lam * dt) / lam
    amp = np.sqrt(spec.epsilon * dt)
    out = np.empty((grid.n_steps + 1, basis.n_modes))
    out[0] = u0.coeffs
    u = out[0].copy()
    for k in range(grid.n_steps):
        sin_part = basis.from_values(np.sin(basis.to_values(u)))
        fb = spec.lam * sin_part - u / (1.0 + lam)
        noise = cov.apply_sqrt(rng.normals(basis.n_modes)) * amp
        u = decay * u + weight * fb + noise
        if not np.all(np.isfinite(u)):
            raise FloatingPointError(f"corrected averaged solve diverged at step {k + 1}")
        out[k + 1] = u
    return FieldPath(out, grid, basis)
