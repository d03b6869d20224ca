"""Time grids and discrete paths of fields and controls.

A path stores the mode coefficients of a field at every node of a uniform
time grid, as a read-only ``(n_steps + 1, n_modes)`` array.  The path
distance used throughout is the sup-in-time L2 distance
``rho(u, w) = max_k ||u(t_k) - w(t_k)||``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from slowfast_ldp.spectral import BasisSpec, FloatArray, SpectralField

__all__ = ["TimeGrid", "FieldPath", "ControlPath", "rho_0T"]


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid of ``n_steps + 1`` nodes on ``[0, t_end]``."""

    t_end: float
    n_steps: int

    def __post_init__(self) -> None:
        if not np.isfinite(self.t_end) or self.t_end <= 0:
            raise ValueError(f"t_end must be positive, got {self.t_end}")
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")

    @property
    def dt(self) -> float:
        return self.t_end / self.n_steps

    @cached_property
    def times(self) -> FloatArray:
        t = np.linspace(0.0, self.t_end, self.n_steps + 1)
        t.setflags(write=False)
        return t

    def refined(self, factor: int) -> "TimeGrid":
        """Same horizon with ``factor`` times as many steps."""
        if factor < 1:
            raise ValueError(f"refinement factor must be >= 1, got {factor}")
        return TimeGrid(self.t_end, self.n_steps * factor)


def _as_path_values(values: np.ndarray, grid: TimeGrid, basis: BasisSpec) -> FloatArray:
    v = np.asarray(values, dtype=np.float64)
    expected = (grid.n_steps + 1, basis.n_modes)
    if v.shape != expected:
        raise ValueError(f"path values must have shape {expected}, got {v.shape}")
    v = v.copy()
    v.setflags(write=False)
    return v


@dataclass(frozen=True)
class FieldPath:
    """Field trajectory: node ``k`` holds the coefficients at ``t_k``."""

    values: FloatArray
    grid: TimeGrid
    basis: BasisSpec

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", _as_path_values(self.values, self.grid, self.basis))

    @classmethod
    def from_fields(cls, fields: Sequence[SpectralField], grid: TimeGrid) -> "FieldPath":
        basis = fields[0].basis
        return cls(np.stack([f.coeffs for f in fields]), grid, basis)

    def node(self, k: int) -> SpectralField:
        return SpectralField(self.values[k], self.basis)

    @property
    def initial(self) -> SpectralField:
        return self.node(0)

    @property
    def final(self) -> SpectralField:
        return self.node(self.grid.n_steps)

    def node_norms(self) -> FloatArray:
        return np.linalg.norm(self.values, axis=1)

    def interpolate(self, times: np.ndarray) -> FloatArray:
        """Linear-in-time interpolation of coefficients to given times."""
        t = np.asarray(times, dtype=np.float64)
        if np.any(t < -1e-12) or np.any(t > self.grid.t_end * (1 + 1e-12)):
            raise ValueError("interpolation times fall outside the grid horizon")
        out = np.empty((t.size, self.basis.n_modes))
        for j in range(self.basis.n_modes):
            out[:, j] = np.interp(t, self.grid.times, self.values[:, j])
        return out

    def same_layout(self, other: "FieldPath") -> bool:
        return (
            self.grid == other.grid
            and self.basis.compatible_with(other.basis)
        )


@dataclass(frozen=True)
class ControlPath:
    """Control trajectory ``h`` on a time grid, in mode coefficients."""

    values: FloatArray
    grid: TimeGrid
    basis: BasisSpec

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", _as_path_values(self.values, self.grid, self.basis))

    def node(self, k: int) -> FloatArray:
        return self.values[k]

    def energy(self) -> float:
        """Control energy ``0.5 * integral ||h||^2 dt`` by the trapezoid rule."""
        sq = np.sum(self.values**2, axis=1)
        return 0.5 * float(np.trapezoid(sq, dx=self.grid.dt))

    @classmethod
    def zero(cls, grid: TimeGrid, basis: BasisSpec) -> "ControlPath":
        return cls(np.zeros((grid.n_steps + 1, basis.n_modes)), grid, basis)


def rho_0T(a: FieldPath, b: FieldPath) -> float:
    """Sup-in-time L2 distance between two paths on the same layout."""
    if not a.same_layout(b):
        raise ValueError("paths live on different grids or bases")
    return float(np.max(np.linalg.norm(a.values - b.values, axis=1)))
