"""Noise inputs: mode covariances, seeded streams, exponential filters.

The driving noise is a Q-Wiener process expanded on the sine basis,
``W(t) = sum_i sqrt(q_i) beta_i(t) e_i`` with independent scalar Brownian
motions ``beta_i`` and a trace-class weight sequence ``q_i >= 0``.  An
increment over ``dt`` therefore has independent mode coefficients
``sqrt(q_i dt) xi_i`` with standard normal ``xi_i``.

Exponential filters implement the causal convolution
``(Z_a phi)(t) = integral_0^inf exp(-a s) phi(t - s) ds``, i.e. the state
of ``dz = (-a z + phi) dt``.  Against a white-noise input the filter is an
Ornstein-Uhlenbeck process with stationary variance ``1 / (2 a)`` per unit
noise intensity; updates use the exact decay factor ``exp(-a dt)`` so
stiff rates never force the step size.

Reproducibility: a stream is identified by ``(seed, path)`` and always
replays the same draw sequence.  Ensembles assign disjoint substreams to
replicas (or fixed replica chunks), which makes results independent of
worker scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from slowfast_ldp.spectral import BasisSpec, FloatArray, SpectralField

__all__ = [
    "QSpec",
    "RngStream",
    "ExpFilterState",
    "CascadeFilterState",
    "wiener_increment",
    "filter_step",
    "filter_step_white",
    "cascade_step_white",
    "ou_increment_std",
]


@dataclass(frozen=True)
class QSpec:
    """Per-mode noise weights ``q_i >= 0`` of a trace-class covariance."""

    q: FloatArray

    def __post_init__(self) -> None:
        q = np.asarray(self.q, dtype=np.float64)
        if q.ndim != 1 or q.size < 1:
            raise ValueError("q must be a non-empty 1-d array")
        if not np.all(np.isfinite(q)) or np.any(q < 0):
            raise ValueError("q entries must be finite and >= 0")
        q = q.copy()
        q.setflags(write=False)
        object.__setattr__(self, "q", q)

    @property
    def n_modes(self) -> int:
        return int(self.q.size)

    @property
    def trace(self) -> float:
        return float(np.sum(self.q))

    @property
    def active(self) -> np.ndarray:
        """Boolean mask of modes with ``q_i > 0``."""
        return self.q > 0

    @classmethod
    def inverse_square(cls, n_modes: int) -> "QSpec":
        """Default decay ``q_i = i**-2``."""
        i = np.arange(1, n_modes + 1, dtype=np.float64)
        return cls(i**-2)

    @classmethod
    def first_modes(cls, n_modes: int, active: int = 3) -> "QSpec":
        """Unit weight on the first ``active`` modes, zero beyond."""
        if not 1 <= active <= n_modes:
            raise ValueError(f"active must be in 1..{n_modes}, got {active}")
        q = np.zeros(n_modes)
        q[:active] = 1.0
        return cls(q)


class RngStream:
    """Counter-based random stream addressed by ``(seed, path)``.

    Two streams with the same address produce identical draw sequences;
    streams with different addresses are statistically independent.
    ``substream(k)`` derives a child address, so replica ``k`` of an
    ensemble can own its noise regardless of execution order.
    """

    def __init__(self, seed: int, path: Tuple[int, ...] = ()):  # noqa: D107
        if seed < 0:
            raise ValueError(f"seed must be >= 0, got {seed}")
        self.seed = int(seed)
        self.path = tuple(int(p) for p in path)
        self._gen: Optional[np.random.Generator] = None

    @property
    def generator(self) -> np.random.Generator:
        if self._gen is None:
            ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self.path)
            self._gen = np.random.Generator(np.random.Philox(ss))
        return self._gen

    def substream(self, k: int) -> "RngStream":
        return RngStream(self.seed, self.path + (int(k),))

    def normals(self, shape) -> FloatArray:
        """Draw standard normals, advancing the stream state."""
        return self.generator.standard_normal(shape)

    def reset(self) -> None:
        """Rewind the stream to the start of its sequence."""
        self._gen = None

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, path={self.path})"


def wiener_increment(q: QSpec, dt: float, rng: RngStream, basis: BasisSpec) -> SpectralField:
    """One Q-Wiener increment over ``dt`` as a field.

    Mode coefficients are independent ``N(0, q_i dt)``; successive calls
    on the same stream are independent increments.
    """
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    if q.n_modes != basis.n_modes:
        raise ValueError("QSpec and basis disagree on the number of modes")
    xi = rng.normals(q.n_modes)
    return SpectralField(np.sqrt(q.q * dt) * xi, basis)


@dataclass(frozen=True)
class ExpFilterState:
    """State of one exponential filter ``dz = (-rate z + input) dt``."""

    rate: float
    value: float = 0.0

    def __post_init__(self) -> None:
        if not np.isfinite(self.rate) or self.rate <= 0:
            raise ValueError(f"filter rate must be > 0, got {self.rate}")


def ou_increment_std(rate: float, dt: float) -> float:
    """Standard deviation of the exact OU noise increment over one step.

    For unit-intensity white-noise input the update
    ``z' = exp(-a dt) z + eta`` reproduces the continuous-time variance
    when ``eta ~ N(0, (1 - exp(-2 a dt)) / (2 a))``, at any step size.
    """
    return math.sqrt(-math.expm1(-2.0 * rate * dt) / (2.0 * rate))


def filter_step(state: ExpFilterState, input_value: float, dt: float) -> ExpFilterState:
    """Advance the filter against an input held constant over the step.

    ``value' = exp(-a dt) value + (1 - exp(-a dt)) / a * input``.  The
    decay factor is exact, so the update is unconditionally stable.
    """
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    decay = math.exp(-state.rate * dt)
    new = decay * state.value + (-math.expm1(-state.rate * dt)) / state.rate * input_value
    return ExpFilterState(state.rate, new)


def filter_step_white(state: ExpFilterState, dt: float, dw: float) -> ExpFilterState:
    """Advance the filter against white noise with Wiener increment ``dw``.

    The shared increment ``dw ~ N(0, dt)`` is rescaled to the exact OU
    step variance, so the stationary variance is ``1 / (2 a)`` at any
    step size while the draw stays perfectly correlated with ``dw``.
    """
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    decay = math.exp(-state.rate * dt)
    eta = dw * (ou_increment_std(state.rate, dt) / math.sqrt(dt))
    return ExpFilterState(state.rate, decay * state.value + eta)


@dataclass(frozen=True)
class CascadeFilterState:
    """Two chained equal-rate filters: ``z2`` filters the output of ``z1``.

    Against unit white noise the pair is a linear system with exact
    transition ``exp(M dt)`` and a rank-two step noise; stationary
    variances are ``1/(2a)`` for the inner and ``1/(4a^3)`` for the outer
    state.
    """

    rate: float
    inner: float = 0.0
    outer: float = 0.0

    def __post_init__(self) -> None:
        if not np.isfinite(self.rate) or self.rate <= 0:
            raise ValueError(f"filter rate must be > 0, got {self.rate}")


def _cascade_noise_cov(rate: float, dt: float) -> np.ndarray:
    # integral_0^dt exp(-2 a s) * [[1, s], [s, s^2]] ds
    a = rate
    e2 = math.exp(-2.0 * a * dt)
    s11 = -math.expm1(-2.0 * a * dt) / (2.0 * a)
    s12 = (1.0 - e2 * (1.0 + 2.0 * a * dt)) / (4.0 * a * a)
    s22 = (2.0 - e2 * (2.0 + 4.0 * a * dt + 4.0 * a * a * dt * dt)) / (8.0 * a**3)
    return np.array([[s11, s12], [s12, s22]])


def cascade_step_white(
    state: CascadeFilterState, dt: float, dw: float, extra: float
) -> CascadeFilterState:
    """Advance the chained pair against white noise.

    Parameters
    ----------
    state : CascadeFilterState
    dt : float
    dw : float
        Wiener increment ``N(0, dt)`` shared with any co-driven filters.
    extra : float
        Independent standard normal; the step noise of the pair is rank
        two, so one extra draw is needed beyond ``dw``.
    """
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    a = state.rate
    decay = math.exp(-a * dt)
    cov = _cascade_noise_cov(a, dt)
    chol = np.linalg.cholesky(cov)
    xi = np.array([dw / math.sqrt(dt), extra])
    eta = chol @ xi
    inner = decay * state.inner + eta[0]
    outer = decay * (dt * state.inner + state.outer) + eta[1]
    return CascadeFilterState(a, inner, outer)
