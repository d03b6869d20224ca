"""Sine spectral basis for the Dirichlet Laplacian on an interval.

Everything downstream works in the coefficient space of the orthonormal
basis ``e_i(x) = sqrt(2/L) sin(i pi x / L)`` on ``(0, L)``, which
diagonalises ``A = d^2/dx^2`` with zero boundary conditions:
``A e_i = -lambda_i e_i`` and ``lambda_i = (i pi / L)^2``.  For the
default ``L = pi`` the eigenvalues are ``1, 4, 9, ...``.

A field is a truncated expansion ``u = sum_i c_i e_i``; the L2 norm of
the field equals the Euclidean norm of its coefficients.  Nonlinear
reaction terms are evaluated pseudo-spectrally: transform to point
values on a uniform collocation grid of ``4 N`` subintervals, apply the
nonlinearity pointwise, and project back by the discrete sine transform
(truncation to the first ``N`` modes de-aliases).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np
from numpy.typing import NDArray
from scipy.integrate import simpson

FloatArray = NDArray[np.float64]

__all__ = [
    "BasisSpec",
    "SpectralField",
    "project",
    "apply_A",
    "apply_resolvent",
    "semigroup_apply",
]


def _readonly(a: np.ndarray) -> FloatArray:
    out = np.asarray(a, dtype=np.float64)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class BasisSpec:
    """Truncated sine basis on ``(0, domain_length)``.

    Parameters
    ----------
    n_modes : int
        Number of retained modes ``N >= 1``.
    domain_length : float, optional
        Interval length ``L > 0``.  Defaults to ``pi``, for which
        ``eigenvalue(i) = i**2``.
    """

    n_modes: int
    domain_length: float = float(np.pi)

    def __post_init__(self) -> None:
        if self.n_modes < 1:
            raise ValueError(f"n_modes must be >= 1, got {self.n_modes}")
        if not np.isfinite(self.domain_length) or self.domain_length <= 0:
            raise ValueError(f"domain_length must be positive, got {self.domain_length}")

    @cached_property
    def eigenvalues(self) -> FloatArray:
        """Eigenvalues ``lambda_i = (i pi / L)^2`` for ``i = 1..N``."""
        i = np.arange(1, self.n_modes + 1, dtype=np.float64)
        return _readonly((i * np.pi / self.domain_length) ** 2)

    def eigenvalue(self, i: int) -> float:
        """Eigenvalue of mode ``i`` (1-based)."""
        if not 1 <= i <= self.n_modes:
            raise ValueError(f"mode index {i} outside 1..{self.n_modes}")
        return float(self.eigenvalues[i - 1])

    def mode_values(self, x: FloatArray) -> FloatArray:
        """Basis function values ``e_i(x_j)``, shape ``(len(x), N)``."""
        x = np.asarray(x, dtype=np.float64)
        i = np.arange(1, self.n_modes + 1, dtype=np.float64)
        return np.sqrt(2.0 / self.domain_length) * np.sin(
            np.outer(x, i) * (np.pi / self.domain_length)
        )

    # Collocation grid: M = 4N uniform subintervals, interior nodes only.
    # The trapezoid rule on this grid is exact for products of retained
    # modes (discrete sine orthogonality), so to/from round-trips exactly.
    @cached_property
    def _n_subintervals(self) -> int:
        return 4 * self.n_modes

    @cached_property
    def collocation_points(self) -> FloatArray:
        m = self._n_subintervals
        x = self.domain_length * np.arange(1, m, dtype=np.float64) / m
        return _readonly(x)

    @cached_property
    def _colloc_matrix(self) -> FloatArray:
        return _readonly(self.mode_values(self.collocation_points))

    @cached_property
    def quadrature_points(self) -> FloatArray:
        x = np.linspace(0.0, self.domain_length, 8 * self.n_modes + 1)
        return _readonly(x)

    @cached_property
    def _quad_matrix(self) -> FloatArray:
        return _readonly(self.mode_values(self.quadrature_points))

    def to_values(self, coeffs: FloatArray) -> FloatArray:
        """Point values on the collocation grid; batched over leading axes."""
        return np.asarray(coeffs) @ self._colloc_matrix.T

    def from_values(self, values: FloatArray) -> FloatArray:
        """Project collocation values onto the first ``N`` modes."""
        w = self.domain_length / self._n_subintervals
        return (np.asarray(values) @ self._colloc_matrix) * w

    def compatible_with(self, other: "BasisSpec") -> bool:
        return (
            self.n_modes == other.n_modes
            and self.domain_length == other.domain_length
        )


@dataclass(frozen=True)
class SpectralField:
    """Immutable field ``u = sum_i coeffs[i-1] e_i`` on a given basis."""

    coeffs: FloatArray
    basis: BasisSpec

    def __post_init__(self) -> None:
        c = np.asarray(self.coeffs, dtype=np.float64)
        if c.shape != (self.basis.n_modes,):
            raise ValueError(
                f"coefficient shape {c.shape} does not match n_modes={self.basis.n_modes}"
            )
        object.__setattr__(self, "coeffs", _readonly(c))

    @classmethod
    def zero(cls, basis: BasisSpec) -> "SpectralField":
        return cls(np.zeros(basis.n_modes), basis)

    @classmethod
    def unit_mode(cls, basis: BasisSpec, i: int, amplitude: float = 1.0) -> "SpectralField":
        """Field ``amplitude * e_i`` (1-based mode index)."""
        if not 1 <= i <= basis.n_modes:
            raise ValueError(f"mode index {i} outside 1..{basis.n_modes}")
        c = np.zeros(basis.n_modes)
        c[i - 1] = amplitude
        return cls(c, basis)

    def norm(self) -> float:
        """L2 norm, equal to the Euclidean norm of the coefficients."""
        return float(np.linalg.norm(self.coeffs))

    def norm_alpha(self, alpha: float) -> float:
        """Fractional-power norm ``sqrt(sum lambda_i^alpha c_i^2)``."""
        lam = self.basis.eigenvalues
        return float(np.sqrt(np.sum(lam**alpha * self.coeffs**2)))

    def evaluate(self, x: FloatArray) -> FloatArray:
        """Field values at arbitrary points of ``[0, L]``."""
        return self.basis.mode_values(np.atleast_1d(np.asarray(x, dtype=np.float64))) @ self.coeffs

    def _check_same_basis(self, other: "SpectralField") -> None:
        if not self.basis.compatible_with(other.basis):
            raise ValueError("fields live on incompatible bases")

    def __add__(self, other: "SpectralField") -> "SpectralField":
        self._check_same_basis(other)
        return SpectralField(self.coeffs + other.coeffs, self.basis)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        self._check_same_basis(other)
        return SpectralField(self.coeffs - other.coeffs, self.basis)

    def __mul__(self, scalar: float) -> "SpectralField":
        return SpectralField(self.coeffs * float(scalar), self.basis)

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return SpectralField(-self.coeffs, self.basis)


def project(f: Callable[[FloatArray], FloatArray], basis: BasisSpec) -> SpectralField:
    """Project a pointwise function onto the truncated basis.

    Coefficients are ``c_i = integral_0^L f(x) e_i(x) dx`` computed by
    composite Simpson quadrature on ``8 N + 1`` uniform points.

    Parameters
    ----------
    f : callable
        Vectorised function of position, finite on ``[0, L]``.
    basis : BasisSpec

    Returns
    -------
    SpectralField

    Raises
    ------
    ValueError
        If ``f`` returns non-finite values on the quadrature grid.
    """
    x = basis.quadrature_points
    fx = np.asarray(f(x), dtype=np.float64)
    if fx.shape != x.shape:
        raise ValueError(f"f must map shape {x.shape} to itself, got {fx.shape}")
    if not np.all(np.isfinite(fx)):
        raise ValueError("function returned non-finite values on the quadrature grid")
    coeffs = simpson(fx[:, None] * basis._quad_matrix, x=x, axis=0)
    return SpectralField(coeffs, basis)


def apply_A(u: SpectralField) -> SpectralField:
    """Apply the Dirichlet Laplacian: coefficients map to ``-lambda_i c_i``."""
    return SpectralField(-u.basis.eigenvalues * u.coeffs, u.basis)


def apply_resolvent(u: SpectralField) -> SpectralField:
    """Apply ``(I - A)^{-1}``: coefficients map to ``c_i / (1 + lambda_i)``."""
    return SpectralField(u.coeffs / (1.0 + u.basis.eigenvalues), u.basis)


def semigroup_apply(u: SpectralField, t: float) -> SpectralField:
    """Apply the heat semigroup ``e^{A t}`` for ``t >= 0``.

    Contraction holds mode-wise: each coefficient is damped by
    ``exp(-lambda_i t)``, so the L2 norm shrinks at least by
    ``exp(-lambda_1 t)``.
    """
    if t < 0:
        raise ValueError(f"semigroup time must be >= 0, got {t}")
    return SpectralField(np.exp(-u.basis.eigenvalues * t) * u.coeffs, u.basis)
