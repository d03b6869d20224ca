"""Averaged slow dynamics and the rate of the averaging approximation.

Replacing the fast field by its frozen-slow stationary measure turns the
slow equation into ``du/dt = A u + fbar(u)`` with the averaged drift
``fbar(u) = integral f(u, v) mu_u(dv)``.  For the sine reaction the
measure is Gaussian with mean ``(I - A)^{-1} u``, so the drift has the
closed form

    fbar(u) = lam * P sin(u) - (I - A)^{-1} u

with ``P`` the basis projection.  The empirical mode estimates the same
integral by time-averaging ``f(u, v_k)`` over frozen-fast samples.

The averaging error ``sup_t ||u_eps(t) - u(t)||`` decays like
``sqrt(eps)`` in the noisy regime; :func:`averaging_error_table` measures
it replica-wise over an epsilon sweep and fits the log-log slope by
weighted least squares.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from slowfast_ldp._ensemble import ensemble_sup_distance
from slowfast_ldp.grids import FieldPath, TimeGrid
from slowfast_ldp.noise import RngStream
from slowfast_ldp.slowfast import (
    StepCoefficients,
    SystemSpec,
    frozen_fast_stationary,
)
from slowfast_ldp.spectral import FloatArray, SpectralField, apply_resolvent

__all__ = [
    "AveragedDrift",
    "averaged_drift",
    "averaged_drift_with_se",
    "solve_averaged",
    "averaged_fixed_point",
    "RateRow",
    "RateTable",
    "averaging_error_table",
    "fit_loglog_slope",
]


@dataclass(frozen=True)
class AveragedDrift:
    """How to evaluate the averaged drift.

    ``mode`` is ``"analytic"`` (closed form of the sine reaction) or
    ``"empirical"`` (frozen-fast sampling; needs an RNG and at least 100
    samples).
    """

    mode: str = "analytic"
    n_samples: int = 2000
    burn_in: Optional[float] = None
    n_chains: int = 8

    def __post_init__(self) -> None:
        if self.mode not in ("analytic", "empirical"):
            raise ValueError(f"unknown drift mode {self.mode!r}")


def _analytic_drift_coeffs(u: FloatArray, spec: SystemSpec) -> FloatArray:
    basis = spec.basis
    sin_part = basis.from_values(np.sin(basis.to_values(u)))
    return spec.lam * sin_part - u / (1.0 + basis.eigenvalues)


def averaged_drift(
    u: SpectralField,
    spec: SystemSpec,
    drift: AveragedDrift = AveragedDrift(),
    rng: Optional[RngStream] = None,
) -> SpectralField:
    """Averaged drift ``fbar(u)`` as a field."""
    if drift.mode == "analytic":
        return SpectralField(_analytic_drift_coeffs(u.coeffs, spec), spec.basis)
    value, _ = averaged_drift_with_se(u, spec, drift, rng)
    return value


def averaged_drift_with_se(
    u: SpectralField,
    spec: SystemSpec,
    drift: AveragedDrift,
    rng: Optional[RngStream],
) -> Tuple[SpectralField, SpectralField]:
    """Empirical ``fbar(u)`` with a per-mode standard error.

    Averages ``f(u, v_k)`` over decorrelated frozen-fast samples; the
    standard error is the sample one, valid because the recording stride
    spans several mixing times.
    """
    if drift.mode != "empirical":
        raise ValueError("standard errors only apply to the empirical mode")
    if drift.n_samples < 100:
        raise ValueError(f"empirical drift needs n_samples >= 100, got {drift.n_samples}")
    if rng is None:
        raise ValueError("empirical drift needs an RngStream")
    basis = spec.basis
    fold = spec.reaction.fold_rate
    burn_in = drift.burn_in
    if burn_in is None:
        burn_in = 15.0 * spec.epsilon / (basis.eigenvalue(1) + fold)
    samples = frozen_fast_stationary(
        u, spec, burn_in, drift.n_samples, rng, n_chains=drift.n_chains
    )
    u_vals = basis.to_values(u.coeffs)
    v_vals = basis.to_values(samples)
    f_coeffs = basis.from_values(spec.reaction.f(u_vals, v_vals))
    mean = f_coeffs.mean(axis=0)
    se = f_coeffs.std(axis=0, ddof=1) / np.sqrt(samples.shape[0])
    return SpectralField(mean, basis), SpectralField(se, basis)


def solve_averaged(
    u0: SpectralField,
    spec: SystemSpec,
    grid: TimeGrid,
    drift: AveragedDrift = AveragedDrift(),
    rng: Optional[RngStream] = None,
) -> FieldPath:
    """Deterministic exponential-Euler solution of the averaged equation.

    The linear decay is exact per mode and the drift enters with weight
    ``(1 - exp(-lambda dt)) / lambda``, so discrete fixed points satisfy
    ``A u + fbar(u) = 0`` without step-size bias.
    """
    basis = spec.basis
    coef = StepCoefficients.build(spec, grid.dt)
    use_analytic = drift.mode == "analytic"
    out = np.empty((grid.n_steps + 1, basis.n_modes))
    out[0] = u0.coeffs
    u = out[0].copy()
    for k in range(grid.n_steps):
        if use_analytic:
            fb = _analytic_drift_coeffs(u, spec)
        else:
            fb = averaged_drift(SpectralField(u, basis), spec, drift, rng).coeffs
        u = coef.slow_decay * u + coef.slow_weight * fb
        if not np.all(np.isfinite(u)):
            raise FloatingPointError(f"averaged solve left finite range at step {k + 1}")
        out[k + 1] = u
    return FieldPath(out, grid, basis)


def averaged_fixed_point(
    spec: SystemSpec,
    u0: SpectralField,
    dt: float = 0.05,
    tol: float = 1e-12,
    max_steps: int = 200000,
) -> SpectralField:
    """Run the averaged flow to a fixed point.

    Stops when the per-step increment falls below ``tol``; the returned
    field then satisfies ``A u + fbar(u) = 0`` to comparable accuracy.
    """
    basis = spec.basis
    coef = StepCoefficients.build(spec, dt)
    u = u0.coeffs.copy()
    for _ in range(max_steps):
        nxt = coef.slow_decay * u + coef.slow_weight * _analytic_drift_coeffs(u, spec)
        delta = float(np.max(np.abs(nxt - u)))
        u = nxt
        if delta < tol:
            return SpectralField(u, basis)
    raise RuntimeError(f"no fixed point within {max_steps} steps (last delta {delta:.3g})")


@dataclass(frozen=True)
class RateRow:
    epsilon: float
    mean_error: float
    stderr: float
    n_ok: int
    n_blowup: int


@dataclass(frozen=True)
class RateTable:
    rows: Tuple[RateRow, ...]
    slope: float
    slope_se: float


def fit_loglog_slope(
    x: FloatArray, y: FloatArray, y_se: Optional[FloatArray] = None
) -> Tuple[float, float]:
    """Weighted least-squares slope of ``log y`` against ``log x``.

    Weights are inverse variances of ``log y`` via the delta method
    (``se / y``); unweighted if no errors are given.  Returns the slope
    and its standard error.
    """
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    if y_se is None:
        w = np.ones_like(lx)
    else:
        rel = np.asarray(y_se, dtype=float) / np.asarray(y, dtype=float)
        w = 1.0 / np.maximum(rel, 1e-12) ** 2
    sw = np.sum(w)
    mx = np.sum(w * lx) / sw
    my = np.sum(w * ly) / sw
    sxx = np.sum(w * (lx - mx) ** 2)
    slope = float(np.sum(w * (lx - mx) * (ly - my)) / sxx)
    slope_se = float(np.sqrt(1.0 / sxx))
    return slope, slope_se


def averaging_error_table(
    spec: SystemSpec,
    eps_list: List[float],
    t_end: float,
    n_replicas: int,
    u0: SpectralField,
    rng: RngStream,
    v0: Optional[SpectralField] = None,
    dt_factor: float = 20.0,
    chunk_size: int = 64,
    threads: int = 1,
) -> RateTable:
    """Replica-averaged sup-distance to the averaged path per epsilon.

    For each ``eps`` the pair is simulated with ``dt = eps / dt_factor``
    and compared node-wise to the averaged trajectory solved on the same
    grid; replicas are independent substreams indexed by chunk.  Blown
    replicas are excluded and counted; more than 5% exclusions at any
    epsilon aborts.

    The returned table carries the WLS log-log slope of the mean error
    over the sweep.
    """
    if v0 is None:
        v0 = apply_resolvent(u0)
    rows = []
    for idx, eps in enumerate(sorted(eps_list, reverse=True)):
        spec_eps = spec.with_epsilon(eps)
        n_steps = int(np.ceil(t_end * dt_factor / eps))
        grid = TimeGrid(t_end, n_steps)
        avg = solve_averaged(u0, spec_eps, grid)
        dists, blown = ensemble_sup_distance(
            spec_eps,
            grid,
            u0.coeffs,
            v0.coeffs,
            avg.values,
            n_replicas,
            rng.substream(idx),
            chunk_size=chunk_size,
            threads=threads,
        )
        n_blow = int(np.sum(blown))
        if n_blow > 0.05 * n_replicas:
            raise RuntimeError(
                f"{n_blow}/{n_replicas} replicas blew up at eps={eps:g}; run rejected"
            )
        ok = dists[~blown]
        stderr = float(np.std(ok, ddof=1) / np.sqrt(ok.size)) if ok.size > 1 else 0.0
        rows.append(
            RateRow(
                epsilon=float(eps),
                mean_error=float(np.mean(ok)),
                stderr=stderr,
                n_ok=int(ok.size),
                n_blowup=n_blow,
            )
        )
    eps_arr = np.array([r.epsilon for r in rows])
    err_arr = np.array([r.mean_error for r in rows])
    se_arr = np.array([r.stderr for r in rows])
    slope, slope_se = fit_loglog_slope(eps_arr, err_arr, se_arr)
    return RateTable(rows=tuple(rows), slope=slope, slope_se=slope_se)
