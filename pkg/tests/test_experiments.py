"""Tests for configs, artifact files, and the experiment runner."""

import dataclasses
import json

import numpy as np
import pytest

from slowfast_ldp import __version__
from slowfast_ldp.artifacts import (
    ArtifactError,
    file_sha256,
    meta_dict,
    read_binary,
    read_csv,
    write_binary,
    write_csv,
    write_manifest,
)
from slowfast_ldp.config import (
    ConfigError,
    canonical_text,
    config_hash,
    parse_config,
)
from slowfast_ldp.experiments import ldp_probe, run, wilson_interval
from slowfast_ldp.grids import FieldPath, TimeGrid
from slowfast_ldp.noise import RngStream
from slowfast_ldp.spectral import BasisSpec

BASE = """
[experiment]
kind = simulate

[system]
epsilon = 0.1
sigma = 0.5
lam = 1.0
n_modes = 4
u0 = 0.2

[grid]
t_end = 1.0
n_steps = 50

[mc]
n_replicas = 4
seed = 7

[output]
directory = {out}
format = csv
"""


def base_config(tmp_path, **edits):
    text = BASE.format(out=tmp_path / "out")
    cfg = parse_config(text)
    return dataclasses.replace(cfg, **edits) if edits else cfg


# -- config ---------------------------------------------------------------


def test_config_round_trip(tmp_path):
    cfg = base_config(tmp_path)
    again = parse_config(canonical_text(cfg))
    assert again == cfg
    assert config_hash(again) == config_hash(cfg)


def test_config_hash_tracks_values(tmp_path):
    cfg = base_config(tmp_path)
    assert config_hash(cfg) != config_hash(dataclasses.replace(cfg, seed=8))
    assert config_hash(cfg) != config_hash(dataclasses.replace(cfg, sigma=0.25))


def test_config_defaults(tmp_path):
    cfg = base_config(tmp_path)
    assert cfg.q_kind == "inverse-square"
    assert cfg.v0 is None
    np.testing.assert_allclose(cfg.q_spec().q, [1, 1 / 4, 1 / 9, 1 / 16])
    np.testing.assert_array_equal(cfg.u0_field().coeffs, [0.2, 0, 0, 0])
    # slaved fast start is the stationary mean (I - A)^{-1} u0
    np.testing.assert_allclose(cfg.v0_field().coeffs, [0.1, 0, 0, 0])


def test_config_q_families(tmp_path):
    text = BASE.format(out=tmp_path).replace("u0 = 0.2", "u0 = 0.2\nq = first-modes:2")
    np.testing.assert_array_equal(parse_config(text).q_spec().q, [1, 1, 0, 0])
    text = BASE.format(out=tmp_path).replace("u0 = 0.2", "u0 = 0.2\nq = sine-modes:3")
    np.testing.assert_allclose(parse_config(text).q_spec().q, [np.pi / 2] * 3 + [0])


@pytest.mark.parametrize(
    "mangle, where",
    [
        (lambda t: t.replace("kind = simulate", "kind = frobnicate"), "experiment.kind"),
        (lambda t: t.replace("epsilon = 0.1", "epsilon = -0.1"), "system.epsilon"),
        (lambda t: t.replace("sigma = 0.5", "sigma = fast"), "system.sigma"),
        (lambda t: t.replace("n_steps = 50", "n_steps = 0"), "grid.n_steps"),
        (lambda t: t.replace("seed = 7", "seed = 18446744073709551616"), "mc.seed"),
        (lambda t: t.replace("format = csv", "format = parquet"), "output.format"),
        (lambda t: t.replace("[grid]", "[grids]"), "grids"),
        (lambda t: t.replace("t_end = 1.0", "t_end = 1.0\nwarp = 9"), "grid.warp"),
        (lambda t: t.replace("\nsigma = 0.5", ""), "system.sigma"),
    ],
)
def test_config_rejects_with_field_path(tmp_path, mangle, where):
    with pytest.raises(ConfigError) as err:
        parse_config(mangle(BASE.format(out=tmp_path)))
    assert err.value.where == where


def test_config_kind_requirements(tmp_path):
    with pytest.raises(ConfigError) as err:
        base_config(tmp_path, kind="instanton")
    assert err.value.where == "instanton.u_end"
    with pytest.raises(ConfigError) as err:
        base_config(tmp_path, kind="ldp-probe", eps_list=(0.2, 0.01))
    assert err.value.where == "system.epsilon"
    cfg = base_config(tmp_path, kind="ldp-probe", eps_list=(0.2, 0.01), allow_small_eps=True)
    assert cfg.allow_small_eps
    with pytest.raises(ConfigError) as err:
        base_config(tmp_path, kind="action-eval", sigma=0.0)
    assert err.value.where == "system.sigma"
    with pytest.raises(ConfigError) as err:
        base_config(tmp_path, kind="ssm-compare", lam_prime=0.1)
    assert err.value.where == "system.lam"


# -- artifacts ------------------------------------------------------------


def test_csv_round_trip(tmp_path):
    path = tmp_path / "t.csv"
    rows = [(1, 0.5, float("nan")), (2, -1.25e-17, float("inf"))]
    write_csv(path, "simulate", "ab" * 32, 9, __version__,
              {"alpha": 0.125, "flag": True}, ["i", "x", "y"], rows)
    header, columns, data = read_csv(path)
    assert header["kind"] == "simulate"
    assert header["seed"] == "9"
    assert meta_dict(header["meta"]) == {"alpha": "0.125", "flag": "1"}
    assert columns == ["i", "x", "y"]
    assert data[1, 1] == -1.25e-17  # 17 significant digits survive
    assert np.isnan(data[0, 2]) and np.isinf(data[1, 2])
    assert path.read_text().count("\n# ") == 7  # eight-line header


def test_csv_rejects_malformed(tmp_path):
    path = tmp_path / "t.csv"
    with pytest.raises(ValueError):
        write_csv(path, "k", "h", 0, "v", {}, ["a", "b"], [(1,)])
    write_csv(path, "k", "h", 0, "v", {}, ["a"], [(1,)])
    broken = path.read_text().replace("# end-header", "# fin")
    path.write_text(broken)
    with pytest.raises(ArtifactError):
        read_csv(path)
    path.write_text("just text\n")
    with pytest.raises(ArtifactError):
        read_csv(path)


def test_binary_round_trip(tmp_path):
    a = np.arange(12.0).reshape(3, 4) * np.pi
    path = write_binary(tmp_path / "a.bin", a)
    np.testing.assert_array_equal(read_binary(path), a)
    path.write_bytes(b"WRONGMAG" + path.read_bytes()[8:])
    with pytest.raises(ArtifactError):
        read_binary(path)


def test_manifest_checksums(tmp_path):
    (tmp_path / "x.csv").write_text("data\n")
    (tmp_path / "y.bin").write_bytes(b"\x00\x01")
    write_manifest(tmp_path, "simulate", "hash", 3, __version__, "ok", {"n": 1})
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert set(manifest["files"]) == {"x.csv", "y.bin"}
    assert manifest["files"]["x.csv"] == file_sha256(tmp_path / "x.csv")
    assert manifest["status"] == "ok"
    assert manifest["notes"] == {"n": 1}


# -- wilson intervals -----------------------------------------------------


def test_wilson_edge_cases():
    lo, hi = wilson_interval(0, 50)
    assert lo == 0.0 and 0 < hi < 0.12
    lo, hi = wilson_interval(50, 50)
    assert hi == 1.0 and lo > 0.88
    lo, hi = wilson_interval(25, 50)
    assert lo < 0.5 < hi
    with pytest.raises(ValueError):
        wilson_interval(5, 4)


def test_wilson_coverage_on_known_bernoulli():
    # Known-p streams: the 95% interval should cover p at close to the
    # nominal rate for each p.
    gen = np.random.default_rng(2024)
    n = 150
    for p in (0.1, 0.5, 0.9):
        hits = gen.binomial(n, p, size=3000)
        covered = 0
        for k in hits:
            lo, hi = wilson_interval(int(k), n)
            covered += lo <= p <= hi
        rate = covered / 3000
        assert 0.925 <= rate <= 0.985, f"coverage {rate} at p={p}"


# -- ldp probe ------------------------------------------------------------


def probe_setup(tmp_path):
    cfg = base_config(tmp_path, kind="ldp-probe", eps_list=(0.2, 0.1), u0=(0.0,))
    spec = cfg.system_spec()
    grid = TimeGrid(1.0, 50)
    phi = FieldPath(np.zeros((51, 4)), grid, spec.basis)
    return spec, phi


def test_probe_zero_action_path_fills_the_tube(tmp_path):
    spec, phi = probe_setup(tmp_path)
    table = ldp_probe(
        phi, 0.5, 0.0, [0.2, 0.1], 60, spec, RngStream(5), i_phi=0.0
    )
    assert [r.epsilon for r in table.rows] == [0.2, 0.1]
    for row in table.rows:
        assert row.p_hat >= 0.85
        assert row.eps_log_p > -0.1
        assert not row.out_of_reach
    assert not table.all_underflow


def test_probe_tube_monotone_in_delta(tmp_path):
    spec, phi = probe_setup(tmp_path)
    small = ldp_probe(phi, 0.1, 0.0, [0.2, 0.1], 50, spec, RngStream(6), i_phi=0.0)
    big = ldp_probe(phi, 0.2, 0.0, [0.2, 0.1], 50, spec, RngStream(6), i_phi=0.0)
    for s, b in zip(small.rows, big.rows):
        assert b.n_hits >= s.n_hits  # same replicas, wider tube


def test_probe_flags_out_of_reach(tmp_path):
    spec, phi = probe_setup(tmp_path)
    table = ldp_probe(phi, 1e-5, 0.05, [0.2, 0.1], 30, spec, RngStream(7), i_phi=0.1)
    assert table.all_underflow
    for row in table.rows:
        assert row.n_hits == 0 and row.out_of_reach
        assert row.p_lo == 0.0 and row.p_hi > 0.0
        assert np.isnan(row.eps_log_p)
        assert not row.lower_ok


def test_probe_validation(tmp_path):
    spec, phi = probe_setup(tmp_path)
    with pytest.raises(ValueError):
        ldp_probe(phi, -1.0, 0.0, [0.2], 10, spec, RngStream(0), i_phi=0.0)
    with pytest.raises(ValueError):
        ldp_probe(phi, 0.1, 0.0, [0.2], 10, spec, RngStream(0), i_phi=float("inf"))


# -- run dispatch ---------------------------------------------------------


def test_run_simulate_zero_noise_zero_start(tmp_path):
    cfg = base_config(tmp_path, sigma=0.0, u0=(0.0,))
    result = run(cfg)
    assert result.status == 0
    assert set(result.files) == {
        "config.ini", "manifest.json", "summary.json", "u_path.csv", "v_path.csv"
    }
    _, _, data = read_csv(result.out_dir / "u_path.csv")
    np.testing.assert_array_equal(data[:, 1:], 0.0)
    summary = json.loads((result.out_dir / "summary.json").read_text())
    assert summary["final_u_norm"] == 0.0


def test_run_rerun_is_byte_identical(tmp_path):
    cfg = base_config(tmp_path)
    first = run(cfg)
    snapshot = {
        name: (first.out_dir / name).read_bytes() for name in first.files
    }
    second = run(cfg, threads=3)
    assert second.files == first.files
    for name in second.files:
        assert (second.out_dir / name).read_bytes() == snapshot[name], name


def test_run_binary_format(tmp_path):
    cfg = base_config(tmp_path, fmt="binary")
    result = run(cfg)
    assert "u_path.bin" in result.files and "u_path.csv" not in result.files
    payload = read_binary(result.out_dir / "u_path.bin")
    assert payload.shape == (51, 5)
    np.testing.assert_array_equal(payload[:, 0], np.linspace(0, 1, 51))
    manifest = json.loads((result.out_dir / "manifest.json").read_text())
    assert manifest["files"]["u_path.bin"] == file_sha256(result.out_dir / "u_path.bin")


def test_run_average_rate_reports_slope(tmp_path):
    cfg = base_config(
        tmp_path,
        kind="average-rate",
        eps_list=(0.1, 0.05),
        n_replicas=8,
        t_end=0.5,
        n_steps=100,
    )
    result = run(cfg)
    assert result.status == 0
    header, _, data = read_csv(result.out_dir / "rate.csv")
    assert "slope" in meta_dict(header["meta"])
    assert data.shape[0] == 2
    summary = json.loads((result.out_dir / "summary.json").read_text())
    assert isinstance(summary["slope"], float)


def test_run_deviation_writes_ks(tmp_path):
    cfg = base_config(
        tmp_path, kind="deviation", eps_list=(0.05,), n_replicas=30, t_end=0.5, n_steps=200
    )
    result = run(cfg)
    summary = json.loads((result.out_dir / "summary.json").read_text())
    assert 0.0 <= summary["ks_distance"] <= 1.0
    assert summary["n_eps_ok"] == 30
    header, _, data = read_csv(result.out_dir / "samples.csv")
    assert meta_dict(header["meta"])["n_blowup"] == "0"
    assert data.shape == (30, 3)


def test_run_action_eval_dual_forms_agree(tmp_path):
    cfg = base_config(
        tmp_path, kind="action-eval", ramp=0.3, t_end=1.0, n_steps=200
    )
    result = run(cfg)
    summary = json.loads((result.out_dir / "summary.json").read_text())
    assert summary["finite"]
    assert summary["rel_gap"] < 1e-3
    assert summary["action_explicit"] > 0


def test_run_instanton_persists_result(tmp_path):
    cfg = base_config(
        tmp_path,
        kind="instanton",
        u0=(0.0,),
        u_end=(0.25,),
        t_end=2.0,
        n_steps=24,
        max_iters=1200,
        grad_tol=1e-5,
    )
    result = run(cfg)
    assert result.status == 0
    summary = json.loads((result.out_dir / "summary.json").read_text())
    assert summary["converged"] is True
    assert summary["action_value"] > 0
    assert summary["action_value"] == pytest.approx(summary["control_energy"], rel=1e-12)
    _, cols, data = read_csv(result.out_dir / "instanton_path.csv")
    assert cols[0] == "t" and data.shape == (25, 5)
    np.testing.assert_allclose(data[-1, 1], 0.25, atol=1e-12)


def test_run_ssm_compare_smoke(tmp_path):
    cfg = base_config(
        tmp_path,
        kind="ssm-compare",
        lam=1.6,
        lam_prime=0.1,
        sigma=0.1,
        eps_list=(0.05,),
        n_modes=8,
        q_kind="sine-modes",
        q_active=3,
        t_end=8.0,
        n_steps=3200,
        n_replicas=4,
    )
    result = run(cfg)
    assert result.status == 0
    summary = json.loads((result.out_dir / "summary.json").read_text())
    assert abs(summary["decay_rate"] - 2.7) < 0.3
    _, _, data = read_csv(result.out_dir / "drift_difference.csv")
    gap = data[:, 1] - data[:, 2]
    np.testing.assert_allclose(gap, data[:, 3], atol=1e-15)


def test_run_ssm_compare_rejects_coarse_grid(tmp_path):
    cfg = base_config(
        tmp_path,
        kind="ssm-compare",
        lam=1.6,
        lam_prime=0.1,
        sigma=0.1,
        eps_list=(0.05,),
        n_modes=8,
        q_kind="sine-modes",
        q_active=3,
        t_end=8.0,
        n_steps=100,
        n_replicas=4,
    )
    with pytest.raises(ConfigError) as err:
        run(cfg)
    assert err.value.where == "grid.n_steps"


def test_run_ldp_probe_underflow_status(tmp_path):
    cfg = base_config(
        tmp_path,
        kind="ldp-probe",
        eps_list=(0.2, 0.1),
        u0=(0.0,),
        ramp=1.4,
        delta=1e-4,
        n_replicas=20,
    )
    result = run(cfg)
    assert result.status == 4
    manifest = json.loads((result.out_dir / "manifest.json").read_text())
    assert manifest["status"] == "underflow"
    summary = json.loads((result.out_dir / "summary.json").read_text())
    assert summary["all_underflow"] is True


def test_run_blowup_status_and_partial_manifest(tmp_path):
    cfg = base_config(
        tmp_path,
        kind="ssm-compare",
        lam=1.6,
        lam_prime=0.1,
        sigma=40.0,
        eps_list=(0.05,),
        n_modes=8,
        q_kind="sine-modes",
        q_active=3,
        t_end=4.0,
        n_steps=1600,
        n_replicas=2,
    )
    result = run(cfg)
    assert result.status == 3
    manifest = json.loads((result.out_dir / "manifest.json").read_text())
    assert manifest["status"] == "blowup"
    summary = json.loads((result.out_dir / "summary.json").read_text())
    assert summary["error"] == "blowup"
