"""Slow-fast stochastic reaction-diffusion toolkit.

Simulation and analysis of a two-time-scale stochastic reaction-diffusion
pair on an interval with Dirichlet boundary: a slow field driven by a fast
field that mixes toward a frozen-slow stationary measure.  The package
covers the averaged dynamics and its convergence rate, the Gaussian
deviation (fluctuation) limit and its noise covariance, the quadratic
large-deviation action with its control formulation and minimisation, and
reduced amplitude models on the superslow manifold near the first
bifurcation.

Modules
-------
spectral
    Sine basis of the Dirichlet Laplacian, fields, projections.
noise
    Mode-wise Wiener increments, seeded RNG streams, exponential filters.
grids
    Time grids, field-valued paths, control paths, path distances.
slowfast
    The coupled slow-fast integrator and frozen-fast sampling.
averaging
    Averaged drift, averaged equation solver, error-vs-epsilon tables.
deviation
    Deviation paths, noise covariance estimation, Gaussian limit solver.
action
    Controlled (skeleton) equation, action functionals, minimisation.
superslow
    Exact-rational amplitude models near criticality and field rebuilds.
experiments
    Config-driven experiment runners, artifact output, LDP probes.
"""

from slowfast_ldp.spectral import (
    BasisSpec,
    SpectralField,
    apply_A,
    apply_resolvent,
    project,
    semigroup_apply,
)

__version__ = "0.1.0"

__all__ = [
    "BasisSpec",
    "SpectralField",
    "project",
    "apply_A",
    "apply_resolvent",
    "semigroup_apply",
    "__version__",
]
