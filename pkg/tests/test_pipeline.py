import os
from dataclasses import replace

import numpy as np
import pytest

from bifrom import pipeline
from bifrom.ann import mlp_init
from bifrom.cli import run_cli
from bifrom.config import PipelineConfig, load_config, parse_config
from bifrom.errors import ConfigError, MissingArtifactError
from bifrom.evaluation import run_method
from bifrom.matrixio import load_matrix
from bifrom.selection import Standardized
from bifrom.workspace import Workspace

SMALL = """\
# quick desk configuration
n_interior=31
snap_n1=8
snap_n2=9
ref_n1=6
ref_n2=5
hidden=16,8
max_epochs_per_round=100
max_rounds=3
"""


@pytest.fixture
def cfg_file(tmp_path):
    p = tmp_path / "small.cfg"
    p.write_text(SMALL, encoding="utf-8")
    return p


def _cli(*args, ws, cfg_file):
    return run_cli([*args, "--workspace", str(ws), "--config", str(cfg_file), "--quiet"])


# ---- configuration -----------------------------------------------------------


def test_parse_config_roundtrip():
    cfg = parse_config(SMALL)
    assert cfg.n_interior == 31 and cfg.hidden == (16, 8) and cfg.seed == 0
    assert parse_config(cfg.to_text()) == cfg
    assert cfg.digest() == parse_config(cfg.to_text()).digest()
    assert cfg.digest() != replace(cfg, seed=1).digest()


@pytest.mark.parametrize("text", ["bogus=1", "k", "k=abc", "k=0", "tol1=1e-6\ntol2=1e-4", "n_interior=2"])
def test_bad_config(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_seed_env_override(cfg_file):
    assert load_config(cfg_file, environ={"BIFROM_SEED": "17"}).seed == 17
    assert load_config(None, environ={}).seed == 0
    with pytest.raises(ConfigError):
        load_config(None, environ={"BIFROM_SEED": "x"})
    with pytest.raises(ConfigError):
        load_config(cfg_file.parent / "missing.cfg", environ={})


def test_full_scale_defaults():
    cfg = PipelineConfig()
    assert cfg.hidden == (2048, 1024) and cfg.k == 8
    assert (cfg.snap_n1, cfg.snap_n2, cfg.ref_n1, cfg.ref_n2) == (8, 9, 40, 41)


# ---- workspace ---------------------------------------------------------------


def test_manifest_and_hash_mismatch(tmp_path):
    cfg = parse_config(SMALL)
    ws = Workspace(tmp_path / "ws", cfg)
    lines = (tmp_path / "ws" / "manifest.txt").read_text(encoding="utf-8").splitlines()
    assert lines[:3] == ["format_version=1", f"config_hash={cfg.digest()}", "seed=0"]
    ws.save("snapshots/x.mat", np.ones((1, 1)))
    ws.mark("snapshots")
    assert "stage.snapshots=1" in (tmp_path / "ws" / "manifest.txt").read_text()
    assert Workspace(tmp_path / "ws", cfg).has("snapshots")
    with pytest.raises(ConfigError):
        Workspace(tmp_path / "ws", replace(cfg, seed=3))


def test_missing_stage_and_artifact(tmp_path):
    ws = Workspace(tmp_path / "ws", parse_config(SMALL))
    with pytest.raises(MissingArtifactError):
        ws.require("global")
    with pytest.raises(MissingArtifactError):
        ws.load("global/modes.mat")
    with pytest.raises(MissingArtifactError):
        ws.load_net("nets/none")


def test_single_writer_lock(tmp_path):
    ws = Workspace(tmp_path / "ws", parse_config(SMALL))
    with ws.lock():
        other = Workspace(tmp_path / "ws", parse_config(SMALL))
        with pytest.raises(ConfigError):
            with other.lock():
                pass
    with other.lock():
        pass


def test_network_serialization(tmp_path):
    ws = Workspace(tmp_path / "ws", parse_config(SMALL))
    net = mlp_init([2, 5, 3], "softmax", seed=2)
    ws.save_net("nets/cls", net)
    back = ws.load_net("nets/cls")
    assert back.layer_dims == [2, 5, 3] and back.output_mode == "softmax"
    for p, q in zip(net.parameters(), back.parameters()):
        assert np.array_equal(p, q)
    reg = Standardized(mlp_init([2, 4, 2], "linear"), np.array([1.0, 2.0]), np.array([0.5, 3.0]))
    ws.save_net("nets/reg", reg.net, reg.mean, reg.std)
    back = ws.load_net("nets/reg")
    x = np.array([[0.2, 0.7]])
    assert np.array_equal(back.predict(x), reg.predict(x))
    manifest = (tmp_path / "ws" / "nets" / "reg" / "manifest.txt").read_text()
    assert "dims=2,4,2" in manifest and "mode=linear" in manifest


def test_reloaded_methods_evaluate_identically(tmp_path):
    cfg = parse_config(SMALL)
    ws = Workspace(tmp_path / "ws", cfg)
    built = {tag: pipeline.build_method(ws, tag) for tag in ("global", "local-classifier", "local-regression-independent", "podnn")}
    fresh = Workspace(tmp_path / "ws", cfg)
    mus = np.array([[0.77, 0.061], [1.9, 0.14], [1.2, 0.1]])
    for tag, method in built.items():
        loaded = pipeline.load_method(fresh, tag)
        for a, b in zip(run_method(method, mus), run_method(loaded, mus)):
            assert np.array_equal(a.state, b.state), tag
            assert a.cluster == b.cluster


def test_tags():
    assert pipeline.parse_tag("local-regression-independent-nooverlap")[1:] == (pipeline.Criterion("regression-independent"), False)
    assert pipeline.make_tag("local", "snapshot", False) == "local-snapshot-nooverlap"
    with pytest.raises(ConfigError):
        pipeline.parse_tag("local-kriging")


# ---- CLI ---------------------------------------------------------------------


def test_cli_snapshots_72_columns(tmp_path, cfg_file, capsys):
    ws = tmp_path / "ws"
    assert _cli("snapshots", ws=ws, cfg_file=cfg_file) == 0
    states = load_matrix(ws / "snapshots" / "states.mat")
    assert states.shape == (62, 72)
    out = capsys.readouterr()
    assert out.out == ""


def test_cli_exit_codes(tmp_path, cfg_file, capsys):
    ws = tmp_path / "ws"
    assert _cli("evaluate", ws=ws, cfg_file=cfg_file) == 4
    assert "error:" in capsys.readouterr().err
    assert _cli("compare", ws=ws, cfg_file=cfg_file) == 4
    assert _cli("plot", ws=ws, cfg_file=cfg_file) == 4
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour=blue\n")
    assert run_cli(["snapshots", "--workspace", str(ws), "--config", str(bad)]) == 2
    assert run_cli(["frobnicate"]) == 2
    assert run_cli(["build", "--method", "spline", "--workspace", str(ws)]) == 2
    # a different config against an existing workspace
    assert _cli("snapshots", ws=ws, cfg_file=cfg_file) == 0
    assert run_cli(["snapshots", "--workspace", str(ws), "--quiet"]) == 2
    diverge = tmp_path / "diverge.cfg"
    diverge.write_text(SMALL + "dt=50\n")
    assert run_cli(["snapshots", "--workspace", str(tmp_path / "ws2"), "--config", str(diverge), "--quiet"]) == 3


def test_cli_seed_env(tmp_path, cfg_file, monkeypatch):
    monkeypatch.setenv("BIFROM_SEED", "5")
    ws = tmp_path / "ws"
    assert _cli("snapshots", ws=ws, cfg_file=cfg_file) == 0
    assert "seed=5" in (ws / "manifest.txt").read_text().splitlines()
    monkeypatch.delenv("BIFROM_SEED")
    assert _cli("snapshots", ws=ws, cfg_file=cfg_file) == 2


def test_cli_flow_and_stage_isolation(tmp_path, cfg_file):
    ws = tmp_path / "ws"
    assert _cli("build", "--method", "local", "--criterion", "centroid", ws=ws, cfg_file=cfg_file) == 0
    assert _cli("evaluate", "--method", "local", "--criterion", "centroid", ws=ws, cfg_file=cfg_file) == 0
    assert _cli("evaluate", "--method", "global", ws=ws, cfg_file=cfg_file) == 4
    rows = (ws / "reports" / "diagram.csv").read_text().splitlines()
    assert rows[0] == "mu1,mu2,observable,converged" and len(rows) == 31
    assert _cli("plot", ws=ws, cfg_file=cfg_file) == 0
    assert (ws / "reports" / "diagram.svg").exists() and (ws / "reports" / "diagram.txt").exists()

    assert _cli("compare", ws=ws, cfg_file=cfg_file) == 4  # no reference yet
    assert _cli("reference", ws=ws, cfg_file=cfg_file) == 0
    assert _cli("compare", ws=ws, cfg_file=cfg_file) == 0
    errors = (ws / "reports" / "errors.csv").read_text().splitlines()
    assert errors[0] == "method,samples,mean_l2,mean_linf" and errors[1].startswith("local-centroid,30,")
    assert (ws / "reports" / "method_local-centroid_points.csv").exists()

    snap_bytes = (ws / "snapshots" / "states.mat").read_bytes()
    snap_mtime = os.stat(ws / "snapshots" / "states.mat").st_mtime_ns
    table = (ws / "local" / "error_table_l2.mat").read_bytes()
    import shutil

    shutil.rmtree(ws / "local")
    assert _cli("build", "--method", "local", "--criterion", "centroid", ws=ws, cfg_file=cfg_file) == 0
    assert os.stat(ws / "snapshots" / "states.mat").st_mtime_ns == snap_mtime
    assert (ws / "snapshots" / "states.mat").read_bytes() == snap_bytes
    assert (ws / "local" / "error_table_l2.mat").read_bytes() == table

    (ws / "local" / "labels.mat").unlink()
    assert _cli("evaluate", "--method", "local", "--criterion", "centroid", ws=ws, cfg_file=cfg_file) == 4


def test_cli_reference_diagram_and_overrides(tmp_path, cfg_file):
    ws = tmp_path / "ws"
    assert _cli("reference", ws=ws, cfg_file=cfg_file) == 0
    out = tmp_path / "ref.csv"
    assert _cli("evaluate", "--method", "reference", "--output", str(out), ws=ws, cfg_file=cfg_file) == 0
    assert len(out.read_text().splitlines()) == 31
    assert _cli("plot", "--input", str(out), ws=ws, cfg_file=cfg_file) == 0
    assert out.with_suffix(".svg").exists()
    # grid overrides change the configuration and therefore need a fresh workspace
    assert run_cli(["snapshots", "--n1", "4", "--n2", "3", "--workspace", str(tmp_path / "w4"), "--config", str(cfg_file), "-q"]) == 0
    assert load_matrix(tmp_path / "w4" / "snapshots" / "states.mat").shape == (62, 12)
