"""Config-driven experiment runs with reproducible artifacts.

``run`` dispatches a parsed config to the owning module, writes every
output through the artifact layer, and returns a process-style status:
0 success, 3 numerical blow-up, 4 Monte-Carlo underflow (an LDP probe
with zero hits at every epsilon).  Config errors raise before any file
is touched.  Replica work is scheduled in fixed-size chunks whose
streams are addressed by chunk index, and aggregation concatenates in
chunk order, so thread count never changes output bytes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from slowfast_ldp import __version__
from slowfast_ldp._ensemble import ensemble_final_states, ensemble_sup_distance
from slowfast_ldp.action import OptParams, action_explicit, action_infimum, minimize_action
from slowfast_ldp.averaging import AveragedDrift, averaging_error_table, solve_averaged
from slowfast_ldp.artifacts import (
    fmt_float,
    write_binary,
    write_csv,
    write_json,
    write_manifest,
)
from slowfast_ldp.config import ConfigError, ExperimentConfig, canonical_text, config_hash
from slowfast_ldp.deviation import analytic_example_cov, dev_limit_final_samples
from slowfast_ldp.grids import FieldPath, TimeGrid
from slowfast_ldp.noise import RngStream
from slowfast_ldp.slowfast import BlowupError, SystemSpec, simulate_path
from slowfast_ldp.superslow import (
    _dt_limit,
    ldp_drift,
    sf_drift,
    simulate_amplitude,
    ssm_vs_full,
)

__all__ = [
    "RunResult",
    "ProbeRow",
    "ProbeTable",
    "wilson_interval",
    "ldp_probe",
    "run",
]

# Two-sided 95% normal quantile, the confidence level of every interval
# reported by the probe.
WILSON_Z = 1.959963984540054

# Fraction of blown replicas an ensemble kind tolerates before the whole
# run is declared a numerical failure.
BLOWUP_BUDGET = 0.05


def wilson_interval(n_hits: int, n: int, z: float = WILSON_Z) -> Tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if not 0 <= n_hits <= n or n < 1:
        raise ValueError(f"need 0 <= n_hits <= n, got {n_hits}/{n}")
    p = n_hits / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / denom
    # the algebra gives exactly 0 (resp. 1) at the empty and full counts;
    # keep the sqrt rounding out of it
    lo = 0.0 if n_hits == 0 else max(0.0, center - half)
    hi = 1.0 if n_hits == n else min(1.0, center + half)
    return lo, hi


@dataclass(frozen=True)
class ProbeRow:
    """Tube-probability estimate at one epsilon."""

    epsilon: float
    n_hits: int
    n_replicas: int
    n_blowup: int
    p_hat: float
    p_lo: float
    p_hi: float
    eps_log_p: float  # nan when no hits
    lower_bound: float  # -(I + gamma)
    upper_ref: float  # -(I - gamma)
    lower_ok: bool
    out_of_reach: bool


@dataclass(frozen=True)
class ProbeTable:
    """LDP probe sweep with the action value it was run against."""

    rows: Tuple[ProbeRow, ...]
    i_phi: float
    delta: float
    gamma: float

    @property
    def all_underflow(self) -> bool:
        return all(r.n_hits == 0 for r in self.rows)

    def eps_log_p(self) -> np.ndarray:
        return np.array([r.eps_log_p for r in self.rows])


def _interp_path(phi: FieldPath, grid: TimeGrid) -> np.ndarray:
    out = np.empty((grid.n_steps + 1, phi.values.shape[1]))
    for j in range(phi.values.shape[1]):
        out[:, j] = np.interp(grid.times, phi.grid.times, phi.values[:, j])
    return out


def ldp_probe(
    phi: FieldPath,
    delta: float,
    gamma: float,
    eps_list: Sequence[float],
    n_replicas: int,
    spec: SystemSpec,
    rng: RngStream,
    *,
    i_phi: float,
    dt_factor: float = 20.0,
    chunk_size: int = 64,
    threads: int = 1,
) -> ProbeTable:
    """Monte-Carlo hit rate of the ``delta`` tube around ``phi``.

    For each epsilon (descending) the pair starts at ``phi(0)`` with the
    fast field slaved, runs on a nested refinement of the path's grid
    with ``dt <= eps / dt_factor``, and counts replicas whose sup
    distance to ``phi`` stays within ``delta``.  Blown replicas count as
    misses.  ``i_phi`` is the action of ``phi`` computed beforehand;
    rows report whether ``eps log p_hat`` clears ``-(i_phi + gamma)``.

    Epsilons with zero hits get a Wilson upper bound only and are
    flagged out of Monte-Carlo reach.
    """
    if delta <= 0:
        raise ValueError(f"delta must be > 0, got {delta}")
    if gamma < 0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    if not np.isfinite(i_phi) or i_phi < 0:
        raise ValueError(f"i_phi must be finite and >= 0, got {i_phi}")
    if n_replicas < 1:
        raise ValueError("n_replicas must be >= 1")
    u0 = phi.values[0]
    v0 = u0 / (1.0 + spec.basis.eigenvalues)
    lower = -(i_phi + gamma)
    upper = -(i_phi - gamma)
    rows: List[ProbeRow] = []
    for idx, eps in enumerate(sorted(eps_list, reverse=True)):
        spec_eps = spec.with_epsilon(float(eps))
        factor = max(1, int(np.ceil(phi.grid.dt * dt_factor / eps)))
        grid = phi.grid.refined(factor)
        ref = _interp_path(phi, grid)
        dists, blown = ensemble_sup_distance(
            spec_eps,
            grid,
            u0,
            v0,
            ref,
            n_replicas,
            rng.substream(idx),
            chunk_size=chunk_size,
            threads=threads,
        )
        ok = ~blown
        hits = int(np.sum(ok & (dists <= delta)))
        p_hat = hits / n_replicas
        p_lo, p_hi = wilson_interval(hits, n_replicas)
        if hits > 0:
            elp = float(eps) * math.log(p_hat)
            lower_ok = elp >= lower
            out_of_reach = False
        else:
            elp = float("nan")
            lower_ok = False
            out_of_reach = True
        rows.append(
            ProbeRow(
                epsilon=float(eps),
                n_hits=hits,
                n_replicas=n_replicas,
                n_blowup=int(np.sum(blown)),
                p_hat=p_hat,
                p_lo=p_lo,
                p_hi=p_hi,
                eps_log_p=elp,
                lower_bound=lower,
                upper_ref=upper,
                lower_ok=lower_ok,
                out_of_reach=out_of_reach,
            )
        )
    return ProbeTable(rows=tuple(rows), i_phi=i_phi, delta=delta, gamma=gamma)


# -- run orchestration ---------------------------------------------------


@dataclass(frozen=True)
class RunResult:
    """Outcome of one experiment run."""

    status: int
    out_dir: Path
    files: Tuple[str, ...]


class _Sink:
    """Artifact writer bound to one run directory."""

    def __init__(self, cfg: ExperimentConfig, out_dir: Path):
        self.cfg = cfg
        self.out_dir = out_dir
        self.hash = config_hash(cfg)

    def table(self, name: str, meta: Dict, columns: Sequence[str], rows) -> None:
        write_csv(
            self.out_dir / f"{name}.csv",
            self.cfg.kind,
            self.hash,
            self.cfg.seed,
            __version__,
            meta,
            columns,
            rows,
        )

    def array(self, name: str, columns: Sequence[str], matrix: np.ndarray, meta: Dict) -> None:
        """Path-like payload; binary format applies here only."""
        if self.cfg.fmt == "binary":
            write_binary(self.out_dir / f"{name}.bin", matrix)
        else:
            self.table(name, meta, columns, [tuple(row) for row in matrix])

    def summary(self, payload: Dict) -> None:
        write_json(self.out_dir / "summary.json", payload)


def _jf(x: float) -> Optional[float]:
    """JSON-safe float: non-finite values become null."""
    x = float(x)
    return x if math.isfinite(x) else None


def _path_columns(n_modes: int) -> List[str]:
    return ["t"] + [f"mode_{i}" for i in range(1, n_modes + 1)]


def _with_times(path: FieldPath) -> np.ndarray:
    return np.column_stack([path.grid.times, path.values])


def _run_simulate(cfg: ExperimentConfig, sink: _Sink, threads: int) -> Tuple[int, Dict]:
    spec = cfg.system_spec()
    grid = TimeGrid(cfg.t_end, cfg.n_steps)
    u_path, v_path = simulate_path(cfg.u0_field(), cfg.v0_field(), spec, grid, RngStream(cfg.seed))
    cols = _path_columns(cfg.n_modes)
    meta = {"epsilon": spec.epsilon, "sigma": spec.sigma, "lam": spec.lam}
    sink.array("u_path", cols, _with_times(u_path), meta)
    sink.array("v_path", cols, _with_times(v_path), meta)
    sink.summary(
        {
            "epsilon": spec.epsilon,
            "final_u_norm": float(u_path.node(grid.n_steps).norm()),
            "final_v_norm": float(v_path.node(grid.n_steps).norm()),
            "n_steps": grid.n_steps,
        }
    )
    return 0, {}


def _run_average_rate(cfg: ExperimentConfig, sink: _Sink, threads: int) -> Tuple[int, Dict]:
    spec = cfg.system_spec()
    try:
        table = averaging_error_table(
            spec,
            list(cfg.eps_list),
            cfg.t_end,
            cfg.n_replicas,
            cfg.u0_field(),
            RngStream(cfg.seed),
            threads=threads,
        )
    except RuntimeError as exc:
        raise BlowupError(cfg.t_end, f"replica ensemble ({exc})", float("nan"))
    sink.table(
        "rate",
        {"slope": table.slope, "slope_se": table.slope_se},
        ["epsilon", "mean_error", "stderr", "n_ok", "n_blowup"],
        [(r.epsilon, r.mean_error, r.stderr, r.n_ok, r.n_blowup) for r in table.rows],
    )
    sink.summary(
        {
            "slope": _jf(table.slope),
            "slope_se": _jf(table.slope_se),
            "n_replicas": cfg.n_replicas,
            "epsilons": [r.epsilon for r in table.rows],
        }
    )
    return 0, {}


def _run_deviation(cfg: ExperimentConfig, sink: _Sink, threads: int) -> Tuple[int, Dict]:
    eps = cfg.eps_list[0]
    spec = cfg.system_spec(eps)
    grid = TimeGrid(cfg.t_end, cfg.n_steps)
    u0, v0 = cfg.u0_field(), cfg.v0_field()
    avg = solve_averaged(u0, spec, grid)
    root = RngStream(cfg.seed)
    u_fin, _, blown = ensemble_final_states(
        spec, grid, u0.coeffs, v0.coeffs, cfg.n_replicas, root.substream(0), threads=threads
    )
    n_blow = int(np.sum(blown))
    if n_blow > BLOWUP_BUDGET * cfg.n_replicas:
        raise BlowupError(cfg.t_end, f"{n_blow}/{cfg.n_replicas} replicas blew up", float("nan"))
    z_eps = (u_fin[~blown, 0] - avg.values[-1, 0]) / math.sqrt(eps)
    cov = analytic_example_cov(spec)
    z_lim = dev_limit_final_samples(avg, spec, cov, cfg.n_replicas, root.substream(1))[:, 0]
    ks = float(stats.ks_2samp(z_eps, z_lim).statistic)
    n = max(z_eps.size, z_lim.size)
    padded = np.full((n, 2), np.nan)
    padded[: z_eps.size, 0] = z_eps
    padded[: z_lim.size, 1] = z_lim
    meta = {
        "epsilon": eps,
        "ks": ks,
        "limit_mean": float(np.mean(z_lim)),
        "limit_var": float(np.var(z_lim, ddof=1)),
        "n_eps_ok": z_eps.size,
        "n_blowup": n_blow,
    }
    sink.table(
        "samples",
        meta,
        ["replica", "z_eps_mode1", "z_limit_mode1"],
        [(i, padded[i, 0], padded[i, 1]) for i in range(n)],
    )
    sink.summary(
        {
            "epsilon": eps,
            "ks_distance": ks,
            "limit_mean": _jf(np.mean(z_lim)),
            "limit_var": _jf(np.var(z_lim, ddof=1)),
            "n_eps_ok": int(z_eps.size),
            "n_blowup": n_blow,
        }
    )
    return 0, ({"partial": n_blow > 0} if n_blow else {})


def _ramped_path(cfg: ExperimentConfig, spec: SystemSpec, grid: TimeGrid) -> FieldPath:
    avg = solve_averaged(cfg.u0_field(), spec, grid)
    vals = avg.values.copy()
    vals[:, 0] += cfg.ramp * grid.times / grid.t_end
    return FieldPath(vals, grid, spec.basis)


def _run_action_eval(cfg: ExperimentConfig, sink: _Sink, threads: int) -> Tuple[int, Dict]:
    spec = cfg.system_spec()
    grid = TimeGrid(cfg.t_end, cfg.n_steps)
    phi = _ramped_path(cfg, spec, grid)
    a_exp = action_explicit(phi, spec)
    a_inf = action_infimum(phi, analytic_example_cov(spec), AveragedDrift(), spec)
    if math.isfinite(a_exp) and math.isfinite(a_inf):
        rel_gap = abs(a_exp - a_inf) / max(a_exp, a_inf, 1e-12)
    else:
        rel_gap = float("nan")
    meta = {"action_explicit": a_exp, "action_infimum": a_inf, "ramp": cfg.ramp}
    sink.array("path", _path_columns(cfg.n_modes), _with_times(phi), meta)
    sink.summary(
        {
            "action_explicit": _jf(a_exp),
            "action_infimum": _jf(a_inf),
            "rel_gap": _jf(rel_gap),
            "finite": bool(math.isfinite(a_exp) and math.isfinite(a_inf)),
            "ramp": cfg.ramp,
        }
    )
    return 0, {}


def _run_instanton(cfg: ExperimentConfig, sink: _Sink, threads: int) -> Tuple[int, Dict]:
    spec = cfg.system_spec()
    opt = OptParams(n_steps=cfg.n_steps, max_iters=cfg.max_iters, grad_tol=cfg.grad_tol)
    result = minimize_action(
        cfg.u0_field(),
        cfg.u_end_field(),
        cfg.t_end,
        analytic_example_cov(spec),
        AveragedDrift(),
        spec,
        opt,
    )
    cols = _path_columns(cfg.n_modes)
    meta = {
        "action": result.action_value,
        "converged": result.converged,
        "n_iters": result.n_iters,
        "grad_norm": result.grad_norm,
    }
    sink.array("instanton_path", cols, _with_times(result.path), meta)
    control = np.column_stack([result.path.grid.times, result.control.values])
    sink.array("control", cols, control, meta)
    sink.summary(
        {
            "action_value": _jf(result.action_value),
            "converged": bool(result.converged),
            "n_iters": int(result.n_iters),
            "grad_norm": _jf(result.grad_norm),
            "control_energy": _jf(result.control.energy()),
        }
    )
    return 0, ({} if result.converged else {"unconverged": True})


def _run_ssm_compare(cfg: ExperimentConfig, sink: _Sink, threads: int) -> Tuple[int, Dict]:
    spec = cfg.system_spec()
    grid = TimeGrid(cfg.t_end, cfg.n_steps)
    eps, lam_p = spec.epsilon, float(cfg.lam_prime)
    if grid.dt > _dt_limit(lam_p, eps):
        raise ConfigError(
            "grid.n_steps", f"dt {grid.dt:g} exceeds the amplitude step limit "
            f"{_dt_limit(lam_p, eps):g}"
        )
    root = RngStream(cfg.seed)
    report = ssm_vs_full(spec, lam_p, grid, root.substream(0), n_replicas=cfg.n_replicas)
    a = simulate_amplitude(
        report.sf_fixed_point, "sf", lam_p, eps, spec.sigma, grid, root.substream(1)
    )
    sink.array(
        "amplitude",
        ["t", "a"],
        np.column_stack([grid.times, a]),
        {"lam_prime": lam_p, "epsilon": eps, "sigma": spec.sigma},
    )
    a_grid = np.linspace(-1.2, 1.2, 241)
    sink.table(
        "drift_difference",
        {"lam_prime": lam_p, "epsilon": eps},
        ["a", "sf_drift", "ldp_drift", "difference"],
        [
            (
                ai,
                sf_drift(ai, lam_p, eps),
                ldp_drift(ai, lam_p),
                sf_drift(ai, lam_p, eps) - ldp_drift(ai, lam_p),
            )
            for ai in a_grid
        ],
    )
    payload = {k: _jf(v) if isinstance(v, float) else v for k, v in report.to_dict().items()}
    sink.summary(payload)
    return 0, {}


def _run_ldp_probe(cfg: ExperimentConfig, sink: _Sink, threads: int) -> Tuple[int, Dict]:
    spec = cfg.system_spec()
    grid = TimeGrid(cfg.t_end, cfg.n_steps)
    fine = grid.refined(max(1, int(np.ceil(2000 / cfg.n_steps))))
    i_phi = action_explicit(_ramped_path(cfg, spec, fine), spec)
    if not math.isfinite(i_phi):
        raise ConfigError("probe.ramp", "reference path has infinite action under this noise")
    gamma = cfg.gamma_frac * i_phi
    phi = _ramped_path(cfg, spec, grid)
    table = ldp_probe(
        phi,
        cfg.delta,
        gamma,
        cfg.eps_list,
        cfg.n_replicas,
        spec,
        RngStream(cfg.seed),
        i_phi=i_phi,
        threads=threads,
    )
    sink.table(
        "probe",
        {"i_phi": i_phi, "gamma": gamma, "delta": cfg.delta},
        [
            "epsilon",
            "n_hits",
            "n_replicas",
            "n_blowup",
            "p_hat",
            "p_lo",
            "p_hi",
            "eps_log_p",
            "lower_bound",
            "upper_ref",
            "lower_ok",
            "out_of_reach",
        ],
        [
            (
                r.epsilon,
                r.n_hits,
                r.n_replicas,
                r.n_blowup,
                r.p_hat,
                r.p_lo,
                r.p_hi,
                r.eps_log_p,
                r.lower_bound,
                r.upper_ref,
                r.lower_ok,
                r.out_of_reach,
            )
            for r in table.rows
        ],
    )
    sink.summary(
        {
            "i_phi": _jf(i_phi),
            "gamma": _jf(gamma),
            "delta": cfg.delta,
            "all_underflow": bool(table.all_underflow),
            "n_epsilons": len(table.rows),
            "lower_ok_everywhere": bool(all(r.lower_ok for r in table.rows)),
        }
    )
    if table.all_underflow:
        return 4, {"underflow": True}
    return 0, {}


_RUNNERS = {
    "simulate": _run_simulate,
    "average-rate": _run_average_rate,
    "deviation": _run_deviation,
    "action-eval": _run_action_eval,
    "instanton": _run_instanton,
    "ssm-compare": _run_ssm_compare,
    "ldp-probe": _run_ldp_probe,
}

_STATUS_NAMES = {0: "ok", 3: "blowup", 4: "underflow"}


def run(
    config: ExperimentConfig,
    config_text: Optional[str] = None,
    threads: int = 1,
) -> RunResult:
    """Execute one experiment and write its artifact directory.

    ``config_text`` is the original file content, copied verbatim as
    provenance; the canonical serialization stands in when absent.
    Numerical blow-up is reported as status 3 with a manifest marking
    the run partial, not raised.  Config problems only detectable at
    run time (a step size too coarse for the amplitude model) still
    raise ``ConfigError``.
    """
    if threads < 1:
        raise ValueError("threads must be >= 1")
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    sink = _Sink(config, out_dir)
    (out_dir / "config.ini").write_text(
        canonical_text(config) if config_text is None else config_text, encoding="utf-8"
    )
    try:
        status, notes = _RUNNERS[config.kind](config, sink, threads)
    except BlowupError as exc:
        sink.summary(
            {
                "error": "blowup",
                "t": _jf(exc.t),
                "what": exc.what,
                "magnitude": _jf(exc.magnitude),
            }
        )
        status, notes = 3, {"blowup_at": _jf(exc.t)}
    write_manifest(
        out_dir,
        config.kind,
        sink.hash,
        config.seed,
        __version__,
        _STATUS_NAMES[status],
        notes,
    )
    files = tuple(sorted(p.name for p in out_dir.iterdir() if p.is_file()))
    return RunResult(status=status, out_dir=out_dir, files=files)
