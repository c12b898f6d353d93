import json
import math

import numpy as np
import pytest
from click.testing import CliRunner

from capiso import cli, io
from capiso.geometry import Bubble, CapillarityParams, MeasureTriple, VoxelSet, bubble_profile, voxelize


def run(*args):
    return CliRunner().invoke(cli.main, [str(a) for a in args])


def manifest(out):
    d = json.loads((out / "manifest.json").read_text())
    return {e["path"]: e["sha256"] for e in d["files"]}, d["config"]


def test_bubble_lambda_zero(tmp_path):
    out = tmp_path / "o"
    r = run("bubble", "--lambda", 0, "--n", 2, "--out", out)
    assert r.exit_code == 0, r.output
    rep = json.loads((out / "report.json").read_text())
    assert rep["p_lambda"] == pytest.approx(math.pi, rel=1e-12)
    assert abs(rep["deficit"]) <= 1e-8
    files, cfg = manifest(out)
    assert set(files) == {"bubble.csv", "report.json", "config.txt"}
    assert files["report.json"] == io.sha256(out / "report.json")
    assert cfg["lam"] == 0.0 and "lam = 0.0" in (out / "config.txt").read_text()


def test_bubble_lambda_half_and_3d(tmp_path):
    r = run("bubble", "--lambda", 0.5, "--out", tmp_path / "a")
    assert r.exit_code == 0 and "p_lambda = 1.22836" in r.output
    r = run("bubble", "--lambda", 0.9, "--n", 3, "--out", tmp_path / "b")
    assert r.exit_code == 0
    assert abs(json.loads((tmp_path / "b" / "report.json").read_text())["deficit"]) <= 1e-8


def test_config_file_and_errors(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("lambda = 0.25\nn = 3\n")
    r = run("bubble", "--config", cfg, "--n", 2, "--out", tmp_path / "o")
    assert r.exit_code == 0
    _, c = manifest(tmp_path / "o")
    assert (c["lam"], c["n"]) == (0.25, 2)
    assert run("bubble", "--lambda", 1.5, "--out", tmp_path / "x").exit_code == 3
    assert run("bubble", "--config", tmp_path / "missing.cfg", "--out", tmp_path / "x").exit_code == 4
    cfg.write_text("lambda: 0.25\n")
    r = run("bubble", "--config", cfg, "--out", tmp_path / "x")
    assert r.exit_code == 4 and "key = value" in r.output


def test_assertion_failure_exit_2(tmp_path, monkeypatch):
    def broken(b):
        return MeasureTriple(b.volume, 2 * math.pi, 2.0)
    monkeypatch.setattr(cli, "bubble_measures", broken)
    out = tmp_path / "o"
    r = run("bubble", "--out", out)
    assert r.exit_code == 2 and "assertion failed: bubble energy identity" in r.output
    # outputs and manifest are still written for inspection
    assert "report.json" in manifest(out)[0]


def test_eval_square_voxel(tmp_path):
    path = io.write_voxel(tmp_path / "sq.json", VoxelSet(np.ones((1, 1), bool), 1.0, (-0.5, 0.0)))[0]
    r = run("eval", path, "--out", tmp_path / "o")
    assert r.exit_code == 0, r.output
    rep = json.loads((tmp_path / "o" / "report.json").read_text())
    # 3 / (2 sqrt(pi/2)) - 1
    assert rep["deficit"] == pytest.approx(3 / (2 * math.sqrt(math.pi / 2)) - 1, rel=1e-12)
    assert rep["deficit"] == pytest.approx(0.19683, abs=1e-5)


def test_eval_bubble_file(tmp_path):
    p = CapillarityParams(0.0, 2)
    path = io.write_profile(tmp_path / "b.csv", bubble_profile(Bubble(p, p.cap_volume)))
    r = run("eval", path, "--out", tmp_path / "o")
    assert r.exit_code == 0
    rep = json.loads((tmp_path / "o" / "report.json").read_text())
    assert rep["alpha"] <= 1e-6


def test_eval_errors(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("x,y\n0,1\n")
    r = run("eval", bad, "--out", tmp_path / "o")
    assert r.exit_code == 4 and "header" in r.output
    hdr = tmp_path / "bad.json"
    hdr.write_text('{"dim": 2,')
    assert run("eval", hdr, "--out", tmp_path / "o").exit_code == 4
    assert run("eval", tmp_path / "none.csv", "--out", tmp_path / "o").exit_code == 4
    vox = io.write_voxel(tmp_path / "v.json", VoxelSet(np.ones((2, 2), bool), 1.0))[0]
    assert run("eval", vox, "--n", 3, "--out", tmp_path / "o").exit_code == 3


def test_symmetrize_two_squares(tmp_path):
    path = io.write_voxel(tmp_path / "two.json", VoxelSet(np.array([[1], [0], [0], [1]], bool), 1.0))[0]
    out = tmp_path / "o"
    r = run("symmetrize", path, "--out", out)
    assert r.exit_code == 0, r.output
    stages = (out / "stages.csv").read_text().splitlines()
    p = {line.split(",")[0]: float(line.split(",")[2]) for line in stages[1:]}
    assert p["schwarz"] < p["input"]
    trunc = json.loads((out / "truncation.json").read_text())
    assert not trunc["applied"] and "gate" in trunc["refusal"]
    assert "truncation skipped" in r.output
    r = run("symmetrize", path, "--truncate", "require", "--out", tmp_path / "q")
    assert r.exit_code == 3


def test_symmetrize_bubble_identity(tmp_path):
    p = CapillarityParams(0.0, 2)
    path = io.write_profile(tmp_path / "b.csv", bubble_profile(Bubble(p, p.cap_volume)))
    out = tmp_path / "o"
    assert run("symmetrize", path, "--out", out).exit_code == 0
    rows = [line.split(",") for line in (out / "stages.csv").read_text().splitlines()[1:]]
    d = [float(r[3]) for r in rows]
    assert max(abs(x) for x in d) < 1e-8


def test_abp_commands(tmp_path):
    p = CapillarityParams(0.0, 2)
    v = voxelize(bubble_profile(Bubble(p, p.cap_volume)), 2, 1 / 32)
    path = io.write_voxel(tmp_path / "b.json", v)[0]
    out = tmp_path / "o"
    r = run("abp", path, "--out", out, "--xi-step", 1 / 32)
    assert r.exit_code == 0, r.output
    rep = json.loads((out / "abp.json").read_text())
    assert rep["covered_fraction"] >= 0.99 and rep["r2"] >= -1e-8
    vox, ch = io.read_voxel(out / "solution.json", with_channels=True)
    assert set(ch) == {"u", "grad_x", "grad_y", "contact"}
    assert np.all(np.isnan(ch["u"][~vox.occupancy])) and np.all(np.isfinite(ch["u"][vox.occupancy]))
    two = io.write_voxel(tmp_path / "two.json", VoxelSet(np.array([[1], [0], [1]], bool), 1.0))[0]
    r = run("abp", two, "--out", tmp_path / "t")
    assert r.exit_code == 3 and "connected" in r.output
    prof = io.write_profile(tmp_path / "b.csv", bubble_profile(Bubble(p, p.cap_volume)))
    assert run("abp", prof, "--n", 3, "--out", tmp_path / "u").exit_code == 3


def test_sweep_zero_only(tmp_path):
    out = tmp_path / "o"
    r = run("sweep", "--eps", "0", "--out", out)
    assert r.exit_code == 0, r.output
    lines = (out / "sweep.csv").read_text().splitlines()
    assert lines[0].startswith("eps,volume,p_lambda,deficit") and len(lines) == 2
    assert abs(float(lines[1].split(",")[3])) <= 1e-8
    meta = json.loads((out / "sweep.json").read_text())
    assert meta["meta"]["n"] == 2 and meta["config"]["out"] == str(out)


def test_sweep_mode2_slopes(tmp_path):
    out = tmp_path / "o"
    r = run("sweep", "--lambda", 0.3, "--out", out)
    assert r.exit_code == 0, r.output
    fits = json.loads((out / "sweep.json").read_text())["fits"]
    assert fits["slope_alpha"][0] == pytest.approx(1.0, abs=0.1)
    assert fits["slope_deficit"][0] == pytest.approx(2.0, abs=0.1)
    assert fits["alpha2_over_deficit_band"] <= 50


def test_lemma1d_and_factor3(tmp_path):
    r = run("lemma1d", "--trials", 500, "--out", tmp_path / "l")
    assert r.exit_code == 0, r.output
    recs = json.loads((tmp_path / "l" / "lemma1d.json").read_text())
    assert len(recs) == 3 and all(math.isfinite(x["fitted"]) and x["stable"] for x in recs.values())
    assert run("lemma1d", "--l", 50, "--out", tmp_path / "m").exit_code == 3
    r = run("factor3", "--trials", 10, "--out", tmp_path / "f")
    assert r.exit_code == 0, r.output
    assert json.loads((tmp_path / "f" / "factor3.json").read_text())["ok"]


def test_deterministic_outputs(tmp_path):
    # reruns into the same directory reproduce every byte
    out = tmp_path / "a"
    seen = []
    for _ in range(2):
        assert run("sweep", "--eps", "0,0.05,0.1", "--seed", 3, "--out", out).exit_code == 0
        assert run("factor3", "--trials", 5, "--seed", 3, "--out", out / "f").exit_code == 0
        seen.append((manifest(out)[0], manifest(out / "f")[0]))
    assert seen[0] == seen[1]
