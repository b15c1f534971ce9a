import json
import subprocess
import sys

import numpy as np
import pytest

from blindcd.cli import main
from blindcd.excitation import load_batch, load_csv, read_matrix
from blindcd.graph import Graph

CFG = {
    "schema_version": 1, "scenario": "diffusion",
    "graph": {"type": "sbm", "n": 24, "k": 2, "a": 0.8, "b": 0.05},
    "filter": {"variant": "diffusion", "taps": 3, "alpha": None},
    "excitation": {"r": 4}, "n_samples": 300, "sigma_w2": 1e-3,
    "methods": ["blind", "boosted", "oracle"], "seeds": [0, 1],
}


@pytest.fixture
def cfg_path(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(CFG))
    return p


def test_presets_list(capsys):
    assert main(["presets"]) == 0
    assert capsys.readouterr().out.split() == ["fig2", "fig3", "karate", "opinion", "pricing"]


def test_presets_show(capsys):
    assert main(["presets", "--show", "fig3"]) == 0
    assert json.loads(capsys.readouterr().out)["sweep"] == {"r": [5, 15, 25, 35, 45]}


def test_run_stdout(cfg_path, capsys):
    assert main(["run", "--config", str(cfg_path)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("seed,point,n_samples,r,taps,method,status")
    assert len(lines) == 1 + 2 * 3


def test_run_file_deterministic(cfg_path, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["run", "--config", str(cfg_path), "--out", str(a)]) == 0
    assert main(["run", "--config", str(cfg_path), "--out", str(b), "--jobs", "2"]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_run_seed_override(cfg_path, capsys):
    assert main(["run", "--config", str(cfg_path), "--seed", "5", "--include-runtime"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert "runtime_ms" in lines[0]
    assert all(line.startswith("5,") for line in lines[1:])


def test_theory(cfg_path, capsys):
    assert main(["theory", "--config", str(cfg_path)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert set(out) >= {"blind", "boosted", "seed"}
    assert set(out["blind"]["conditions_met"]) == {"low_pass", "head_rank", "sketch_rank", "gap"}


@pytest.mark.parametrize("fmt", ["binary", "csv"])
def test_generate(cfg_path, tmp_path, fmt):
    out = tmp_path / "gen"
    assert main(["generate", "--config", str(cfg_path), "--out", str(out), "--format", fmt]) == 0
    g = Graph.from_json((out / "graph.json").read_text())
    assert g.n == 24
    assert len((out / "labels.txt").read_text().split()) == 24
    if fmt == "binary":
        with open(out / "sketch.bcdm", "rb") as fh:
            assert read_matrix(fh).shape == (24, 4)
        batch = load_batch(out / "signals.bcdm")
        assert batch.y.shape == (24, 300)
    else:
        assert load_csv(out / "y.csv").shape == (24, 300)
        assert np.all(np.isfinite(load_csv(out / "z.csv")))


@pytest.mark.parametrize("argv", [
    ["bogus"],
    ["run"],
    ["run", "--preset", "nope"],
    ["run", "--preset", "karate", "--seed", "-1"],
    ["run", "--preset", "karate", "--jobs", "0"],
])
def test_usage_errors_exit_1(argv):
    assert main(argv) == 1


def test_config_error_exit_1(tmp_path, capsys):
    bad = dict(CFG, typo=1)
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(bad))
    assert main(["run", "--config", str(p)]) == 1
    assert "config: unknown key" in capsys.readouterr().err


def test_generate_rejects_dynamics(tmp_path):
    d = dict(CFG, scenario="degroot", excitation={"r": 4, "mode": "bipartite_stubborn"})
    d.pop("filter")
    p = tmp_path / "c.json"
    p.write_text(json.dumps(d))
    assert main(["generate", "--config", str(p), "--out", str(tmp_path / "o")]) == 1


def test_runtime_error_exit_2(tmp_path, monkeypatch):
    from blindcd import harness

    def boom(*a, **k):
        raise RuntimeError("disk on fire")
    monkeypatch.setattr(harness, "run_experiment", boom)
    p = tmp_path / "c.json"
    p.write_text(json.dumps(CFG))
    assert main(["run", "--config", str(p)]) == 2


def test_console_script_module():
    res = subprocess.run([sys.executable, "-m", "blindcd.cli", "presets"], capture_output=True, text=True)
    assert res.returncode == 0 and "karate" in res.stdout
