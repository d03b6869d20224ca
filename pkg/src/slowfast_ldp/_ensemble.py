"""Replica-batched simulation of the slow-fast pair.

Replicas are processed in fixed-size chunks; chunk ``c`` draws its noise
from ``rng.substream(c)``, so the decomposition (and hence every output
byte) depends only on ``n_replicas`` and ``chunk_size``, never on worker
scheduling.  Optional thread parallelism maps chunks to a pool and then
reduces in chunk order.

Replicas whose state leaves the finite range are flagged as blown, their
rows zeroed so the remaining batch stays representable, and excluded
from whatever statistic the caller computes.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Optional, Tuple

import numpy as np

from slowfast_ldp.grids import TimeGrid
from slowfast_ldp.noise import RngStream
from slowfast_ldp.slowfast import StepCoefficients, SystemSpec, _step_arrays
from slowfast_ldp.spectral import FloatArray

__all__ = [
    "ensemble_sup_distance",
    "ensemble_final_states",
    "ensemble_mode_trajectory",
]

DEFAULT_CHUNK = 64


def _chunk_sizes(n_replicas: int, chunk_size: int):
    sizes = []
    left = n_replicas
    while left > 0:
        take = min(chunk_size, left)
        sizes.append(take)
        left -= take
    return sizes


def _run_chunk(
    spec: SystemSpec,
    grid: TimeGrid,
    u0: FloatArray,
    v0: FloatArray,
    chunk_rng: RngStream,
    n_c: int,
    node_fn: Callable[[int, FloatArray, FloatArray, np.ndarray], None],
) -> np.ndarray:
    """Advance one chunk, invoking ``node_fn`` at every node (including 0).

    Returns the blown mask of the chunk.
    """
    coef = StepCoefficients.build(spec, grid.dt)
    n_modes = spec.basis.n_modes
    u = np.broadcast_to(u0, (n_c, n_modes)).copy()
    v = np.broadcast_to(v0, (n_c, n_modes)).copy()
    blown = np.zeros(n_c, dtype=bool)
    node_fn(0, u, v, blown)
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(grid.n_steps):
            xi = chunk_rng.normals((n_c, n_modes))
            u, v = _step_arrays(u, v, coef, spec, xi)
            bad = ~(np.all(np.isfinite(u), axis=1) & np.all(np.isfinite(v), axis=1))
            if np.any(bad):
                newly = bad & ~blown
                blown |= newly
                u[blown] = 0.0
                v[blown] = 0.0
            node_fn(k + 1, u, v, blown)
    return blown


def _map_chunks(runs, threads: int):
    if threads <= 1:
        return [run() for run in runs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(run) for run in runs]
        return [f.result() for f in futures]


def ensemble_sup_distance(
    spec: SystemSpec,
    grid: TimeGrid,
    u0: FloatArray,
    v0: FloatArray,
    ref_values: FloatArray,
    n_replicas: int,
    rng: RngStream,
    chunk_size: int = DEFAULT_CHUNK,
    threads: int = 1,
) -> Tuple[FloatArray, np.ndarray]:
    """Sup-in-time L2 distance of each slow replica to a reference path.

    ``ref_values`` must hold the reference coefficients at every node of
    ``grid``.  Returns ``(distances, blown)`` ordered by replica id;
    distances of blown replicas are NaN.
    """
    ref = np.asarray(ref_values)
    if ref.shape != (grid.n_steps + 1, spec.basis.n_modes):
        raise ValueError("reference path shape does not match grid and basis")

    def make_run(c: int, n_c: int):
        def run():
            acc = np.zeros(n_c)

            def node_fn(k, u, v, blown):
                d = np.linalg.norm(u - ref[k], axis=1)
                np.maximum(acc, d, out=acc)

            blown = _run_chunk(spec, grid, u0, v0, rng.substream(c), n_c, node_fn)
            acc[blown] = np.nan
            return acc, blown

        return run

    sizes = _chunk_sizes(n_replicas, chunk_size)
    results = _map_chunks([make_run(c, n) for c, n in enumerate(sizes)], threads)
    dists = np.concatenate([r[0] for r in results])
    blown = np.concatenate([r[1] for r in results])
    return dists, blown


def ensemble_final_states(
    spec: SystemSpec,
    grid: TimeGrid,
    u0: FloatArray,
    v0: FloatArray,
    n_replicas: int,
    rng: RngStream,
    chunk_size: int = 256,
    threads: int = 1,
) -> Tuple[FloatArray, FloatArray, np.ndarray]:
    """Final ``(u, v)`` coefficients of every replica, plus blown mask."""

    def make_run(c: int, n_c: int):
        def run():
            out_u = np.empty((n_c, spec.basis.n_modes))
            out_v = np.empty((n_c, spec.basis.n_modes))

            def node_fn(k, u, v, blown):
                if k == grid.n_steps:
                    out_u[:] = u
                    out_v[:] = v

            blown = _run_chunk(spec, grid, u0, v0, rng.substream(c), n_c, node_fn)
            out_u[blown] = np.nan
            out_v[blown] = np.nan
            return out_u, out_v, blown

        return run

    sizes = _chunk_sizes(n_replicas, chunk_size)
    results = _map_chunks([make_run(c, n) for c, n in enumerate(sizes)], threads)
    u_fin = np.concatenate([r[0] for r in results])
    v_fin = np.concatenate([r[1] for r in results])
    blown = np.concatenate([r[2] for r in results])
    return u_fin, v_fin, blown


def ensemble_mode_trajectory(
    spec: SystemSpec,
    grid: TimeGrid,
    u0: FloatArray,
    v0: FloatArray,
    n_replicas: int,
    rng: RngStream,
    mode: int = 1,
    chunk_size: int = DEFAULT_CHUNK,
    threads: int = 1,
) -> Tuple[FloatArray, np.ndarray]:
    """Slow-mode coefficient of one mode at every node for each replica.

    Returns ``(values, blown)`` with ``values`` of shape
    ``(n_replicas, n_steps + 1)``; rows of blown replicas are NaN.
    """
    j = mode - 1
    if not 0 <= j < spec.basis.n_modes:
        raise ValueError(f"mode {mode} outside 1..{spec.basis.n_modes}")

    def make_run(c: int, n_c: int):
        def run():
            traj = np.empty((n_c, grid.n_steps + 1))

            def node_fn(k, u, v, blown):
                traj[:, k] = u[:, j]

            blown = _run_chunk(spec, grid, u0, v0, rng.substream(c), n_c, node_fn)
            traj[blown] = np.nan
            return traj, blown

        return run

    sizes = _chunk_sizes(n_replicas, chunk_size)
    results = _map_chunks([make_run(c, n) for c, n in enumerate(sizes)], threads)
    traj = np.concatenate([r[0] for r in results])
    blown = np.concatenate([r[1] for r in results])
    return traj, blown
