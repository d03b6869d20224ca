"""Path-space rate functional for the slow equation and instanton search.

The controlled (skeleton) equation

    phi' = A phi + fbar(phi) + S h,        phi(0) = u0,

maps a control ``h`` to a path; the rate functional of a path is the
minimal control energy ``1/2 integral ||h||^2 dt`` over all controls
that produce it.  With ``S`` invertible the optimal control inverts
``S`` on the residual

    r(t) = phi'(t) - A phi(t) - fbar(phi(t)),

and for the sine reaction ``S = sigma (I - A)^{-1} sqrt(Q)`` turns this
into the explicit weighted form

    I(phi) = 1/2 integral || (I - A) (sigma sqrt(Q))^{-1} r(t) ||^2 dt.

Discretisation: centered differences for ``phi'`` at interior nodes,
one-sided at the endpoints, trapezoid in time.  Modes carrying no noise
admit no control, so any residual component there beyond
``1e-8 * path scale`` makes the value infinite.

The minimizer runs gradient descent with an Armijo backtracking line
search on the discrete functional.  The gradient is the exact analytic
gradient of the discrete quadratic-in-residual objective; the descent
direction applies the covariance ``B = S S^T`` as an SPD metric, which
undoes the per-mode weight disparity without changing stationary points.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional, Tuple

import numpy as np

from slowfast_ldp.averaging import AveragedDrift, _analytic_drift_coeffs, averaged_drift
from slowfast_ldp.deviation import CovOperator
from slowfast_ldp.grids import ControlPath, FieldPath, TimeGrid
from slowfast_ldp.noise import RngStream
from slowfast_ldp.slowfast import StepCoefficients, SystemSpec
from slowfast_ldp.spectral import FloatArray, SpectralField

__all__ = [
    "KERNEL_TOL",
    "path_residual",
    "action_explicit",
    "action_infimum",
    "skeleton_solve",
    "action_gradient",
    "OptParams",
    "MinimizeResult",
    "minimize_action",
    "LevelSet",
]

# Residual allowed in no-noise modes, relative to the path scale.
KERNEL_TOL = 1e-8

_ANALYTIC = AveragedDrift()


def _time_derivative(values: FloatArray, dt: float) -> FloatArray:
    d = np.empty_like(values)
    d[0] = (values[1] - values[0]) / dt
    d[-1] = (values[-1] - values[-2]) / dt
    d[1:-1] = (values[2:] - values[:-2]) / (2.0 * dt)
    return d


def _drift_nodes(
    values: FloatArray, spec: SystemSpec, drift: AveragedDrift, rng: Optional[RngStream]
) -> FloatArray:
    if drift.mode == "analytic":
        return _analytic_drift_coeffs(values, spec)
    basis = spec.basis
    rows = [
        averaged_drift(SpectralField(v, basis), spec, drift, rng).coeffs for v in values
    ]
    return np.stack(rows)


def path_residual(
    phi: FieldPath,
    spec: SystemSpec,
    drift: AveragedDrift = _ANALYTIC,
    rng: Optional[RngStream] = None,
) -> FloatArray:
    """Node-wise residual ``phi' - A phi - fbar(phi)`` as coefficients."""
    if phi.grid.n_steps < 2:
        raise ValueError("need at least two steps for the derivative stencil")
    values = phi.values
    dphi = _time_derivative(values, phi.grid.dt)
    fb = _drift_nodes(values, spec, drift, rng)
    return dphi + spec.basis.eigenvalues * values - fb


def _trapezoid_weights(n_nodes: int, dt: float) -> FloatArray:
    tau = np.full(n_nodes, dt)
    tau[0] = tau[-1] = 0.5 * dt
    return tau


def _path_scale(phi: FieldPath) -> float:
    return max(1.0, float(phi.node_norms().max()))


def action_explicit(phi: FieldPath, spec: SystemSpec) -> float:
    """Closed-form rate of a path under the sine reaction.

    Returns ``inf`` when the residual has a component in a mode with
    ``q_i = 0`` larger than ``1e-8`` times the path scale.
    """
    if spec.sigma == 0.0:
        raise ValueError("explicit action needs sigma != 0")
    r = path_residual(phi, spec)
    q = spec.q.q
    active = q > 0
    if not active.all():
        if np.abs(r[:, ~active]).max() > KERNEL_TOL * _path_scale(phi):
            return np.inf
    lam = spec.basis.eigenvalues[active]
    w2 = (1.0 + lam) ** 2 / (spec.sigma**2 * q[active])
    integrand = (r[:, active] ** 2 * w2).sum(axis=1)
    return float(0.5 * np.trapezoid(integrand, dx=phi.grid.dt))


def _sqrt_pinv(cov: CovOperator) -> Tuple[FloatArray, FloatArray, int]:
    """Pseudo-inverse of the noise factor and its range projector rank."""
    u, sv, vt = np.linalg.svd(cov.sqrt_matrix)
    cut = sv.max(initial=0.0) * 1e-10
    keep = sv > cut
    inv = np.zeros_like(sv)
    inv[keep] = 1.0 / sv[keep]
    pinv = (vt.T * inv) @ u.T
    range_basis = u[:, keep]
    return pinv, range_basis, int(keep.sum())


def _recover_control(
    phi: FieldPath,
    cov: CovOperator,
    drift: AveragedDrift,
    spec: SystemSpec,
    rng: Optional[RngStream] = None,
) -> Tuple[ControlPath, bool]:
    """Optimal control for a path; flag is False when none exists."""
    if cov.n_modes != phi.basis.n_modes:
        raise ValueError("covariance operator does not match the basis")
    r = path_residual(phi, spec, drift, rng)
    pinv, range_basis, rank = _sqrt_pinv(cov)
    in_range = True
    if rank < cov.n_modes:
        perp = r - (r @ range_basis) @ range_basis.T
        norms = np.sqrt((perp**2).sum(axis=1))
        in_range = bool(norms.max() <= KERNEL_TOL * _path_scale(phi))
    h = r @ pinv.T
    return ControlPath(h, phi.grid, phi.basis), in_range


def action_infimum(
    phi: FieldPath,
    cov: CovOperator,
    drift: AveragedDrift,
    spec: SystemSpec,
    rng: Optional[RngStream] = None,
) -> float:
    """Minimal control energy producing ``phi``; ``inf`` when unreachable."""
    control, in_range = _recover_control(phi, cov, drift, spec, rng)
    if not in_range:
        return np.inf
    return control.energy()


def skeleton_solve(
    h: ControlPath,
    u0: SpectralField,
    cov: CovOperator,
    drift: AveragedDrift,
    spec: SystemSpec,
    rng: Optional[RngStream] = None,
) -> FieldPath:
    """Exponential-Euler solve of the controlled equation along ``h``.

    The control is held at its left node over each step, entering with
    the same exact per-mode weight as the drift; a zero control
    reproduces :func:`solve_averaged` step for step.
    """
    basis = spec.basis
    if not h.basis.compatible_with(basis):
        raise ValueError("control path basis does not match the system")
    if cov.n_modes != basis.n_modes:
        raise ValueError("covariance operator does not match the basis")
    grid = h.grid
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
        forcing = fb + cov.apply_sqrt(h.values[k])
        u = coef.slow_decay * u + coef.slow_weight * forcing
        if not np.all(np.isfinite(u)):
            raise FloatingPointError(f"controlled solve left finite range at step {k + 1}")
        out[k + 1] = u
    return FieldPath(out, grid, basis)


def _discrete_action(values: FloatArray, spec: SystemSpec, pinv: FloatArray, tau: FloatArray, dt: float) -> float:
    dphi = _time_derivative(values, dt)
    r = dphi + spec.basis.eigenvalues * values - _analytic_drift_coeffs(values, spec)
    hsq = ((r @ pinv.T) ** 2).sum(axis=1)
    return float(0.5 * np.sum(tau * hsq))


def action_gradient(
    phi: FieldPath, cov: CovOperator, spec: SystemSpec
) -> FloatArray:
    """Exact gradient of the discrete action at every node.

    Only the closed-form drift is supported; an estimated drift has no
    analytic linearisation to differentiate through.
    """
    basis = spec.basis
    if cov.n_modes != basis.n_modes:
        raise ValueError("covariance operator does not match the basis")
    values = phi.values
    dt = phi.grid.dt
    tau = _trapezoid_weights(values.shape[0], dt)
    pinv, _, _ = _sqrt_pinv(cov)
    dphi = _time_derivative(values, dt)
    r = dphi + basis.eigenvalues * values - _analytic_drift_coeffs(values, spec)
    rho = tau[:, None] * ((r @ pinv.T) @ pinv)

    g = np.zeros_like(values)
    # Transpose of the derivative stencil.
    g[0] -= rho[0] / dt
    g[1] += rho[0] / dt
    g[-1] += rho[-1] / dt
    g[-2] -= rho[-1] / dt
    g[2:] += rho[1:-1] / (2.0 * dt)
    g[:-2] -= rho[1:-1] / (2.0 * dt)
    # Self-adjoint linearisation of -(A phi + fbar(phi)) applied to rho:
    # A and the resolvent are diagonal, and multiplication by cos(phi)
    # has a symmetric matrix in the orthonormal basis.
    cos_vals = np.cos(basis.to_values(values))
    pointwise = basis.from_values(cos_vals * basis.to_values(rho))
    g += basis.eigenvalues * rho - spec.lam * pointwise + rho / (1.0 + basis.eigenvalues)
    return g


@dataclass(frozen=True)
class OptParams:
    """Knobs for the instanton search."""

    n_steps: int = 64
    max_iters: int = 2000
    grad_tol: float = 1e-6
    step_init: float = 1.0
    armijo: float = 1e-4
    shrink: float = 0.5
    grow: float = 2.0
    max_backtracks: int = 60

    def __post_init__(self) -> None:
        if self.n_steps < 4:
            raise ValueError("need at least 4 steps for distinct stencils")
        if not 0.0 < self.shrink < 1.0:
            raise ValueError("shrink must lie in (0, 1)")


@dataclass
class MinimizeResult:
    """Instanton search outcome; unpacks as (path, control, action value)."""

    path: FieldPath
    control: ControlPath
    action_value: float
    converged: bool
    n_iters: int
    grad_norm: float

    def __iter__(self) -> Iterator:
        return iter((self.path, self.control, self.action_value))


def minimize_action(
    u_start: SpectralField,
    u_end: SpectralField,
    t_end: float,
    cov: CovOperator,
    drift: AveragedDrift,
    spec: SystemSpec,
    opt_params: OptParams = OptParams(),
    initial: Optional[FieldPath] = None,
) -> MinimizeResult:
    """Descend the discrete action over paths with both endpoints fixed.

    Interior nodes are the unknowns; the initial guess is the straight
    line between the endpoints unless ``initial`` is given.  Declares
    convergence when the interior gradient sup-norm falls under
    ``grad_tol`` or the objective stops moving at float precision.
    """
    if drift.mode != "analytic":
        raise ValueError("instanton search needs the closed-form drift")
    basis = spec.basis
    pinv, _, rank = _sqrt_pinv(cov)
    if rank < cov.n_modes:
        raise ValueError("noise-free modes make the endpoint problem ill-posed")
    if initial is None:
        grid = TimeGrid(t_end=t_end, n_steps=opt_params.n_steps)
        frac = (grid.times / t_end)[:, None]
        values = (1.0 - frac) * u_start.coeffs + frac * u_end.coeffs
    else:
        grid = initial.grid
        if abs(grid.t_end - t_end) > 1e-12 * max(1.0, t_end):
            raise ValueError("initial path does not span the requested horizon")
        values = initial.values.copy()
        values[0] = u_start.coeffs
        values[-1] = u_end.coeffs
    dt = grid.dt
    tau = _trapezoid_weights(grid.n_steps + 1, dt)
    metric = cov.matrix  # SPD preconditioner; cancels the mode weights

    j_cur = _discrete_action(values, spec, pinv, tau, dt)
    step = opt_params.step_init
    converged = False
    grad_norm = np.inf
    stall = 0
    it = 0
    for it in range(1, opt_params.max_iters + 1):
        g = action_gradient(FieldPath(values, grid, basis), cov, spec)
        g_int = g[1:-1]
        grad_norm = float(np.abs(g_int).max())
        if grad_norm < opt_params.grad_tol:
            converged = True
            break
        direction = g_int @ metric
        slope = float((g_int * direction).sum())
        accepted = False
        for _ in range(opt_params.max_backtracks):
            trial = values.copy()
            trial[1:-1] = values[1:-1] - step * direction
            j_new = _discrete_action(trial, spec, pinv, tau, dt)
            if np.isfinite(j_new) and j_new <= j_cur - opt_params.armijo * step * slope:
                accepted = True
                break
            step *= opt_params.shrink
        if not accepted:
            break
        values = trial
        if j_cur - j_new < 1e-14 * max(1.0, abs(j_cur)):
            stall += 1
            if stall >= 5:
                converged = True
                j_cur = j_new
                break
        else:
            stall = 0
        j_cur = j_new
        step = min(step * opt_params.grow, 1e6)

    path = FieldPath(values, grid, basis)
    control, _ = _recover_control(path, cov, _ANALYTIC, spec)
    return MinimizeResult(
        path=path,
        control=control,
        action_value=j_cur,
        converged=converged,
        n_iters=it,
        grad_norm=grad_norm,
    )


@dataclass(frozen=True)
class LevelSet:
    """Sublevel set of the rate functional at threshold ``r``."""

    r: float

    def __post_init__(self) -> None:
        if not np.isfinite(self.r) or self.r < 0:
            raise ValueError(f"threshold must be finite and >= 0, got {self.r}")

    def contains(
        self,
        phi: FieldPath,
        cov: CovOperator,
        drift: AveragedDrift,
        spec: SystemSpec,
        slack: float = 0.0,
    ) -> bool:
        return action_infimum(phi, cov, drift, spec) <= self.r + slack
