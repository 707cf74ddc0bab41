import csv
import json

import numpy as np
import pytest

from ibc.cli import emit_figure1_data, main, run, verify_artifact
from ibc.config import ExperimentConfig, config_hash, load_config
from ibc.exceptions import ConfigError


def _write(tmp_path, data, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return str(p)


def _read_csv(path):
    with open(path) as fh:
        meta = fh.readline()
        rows = list(csv.reader(fh))
    return meta, rows[0], rows[1:]


def test_config_defaults_and_validation(tmp_path):
    cfg = ExperimentConfig.from_dict({"experiment": "example2-dp"})
    assert cfg["initial"]["prior_interpretation"] == "posterior"
    assert cfg["initial"]["S0"] == [[5.0, 0.0], [0.0, 0.1]]
    for bad in ({"experiment": "nope"}, {"experiment": "example1", "extra": 1},
                {"experiment": "example1", "model": {"s_v": -1}},
                {"experiment": "example1", "plan": {"horizon": 1}},
                {"experiment": "example1", "initial": {"prior_interpretation": "maybe"}}, [1, 2], {}):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(bad)
    p = tmp_path / "broken.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(str(p))


def test_example1_table(tmp_path):
    run({"experiment": "example1"}, out=str(tmp_path))
    meta, header, rows = _read_csv(tmp_path / "example1.csv")
    assert meta.startswith("# config_sha256=")
    x2 = [float(r[header.index("x2")]) for r in rows]
    assert x2 == [0.0] * len(rows)
    assert sorted({float(r[0]) for r in rows}) == pytest.approx(np.linspace(0, 1, 11))


def test_bounds_check_rows(tmp_path):
    res = run({"experiment": "bounds-check"}, out=str(tmp_path))
    _, header, rows = _read_csv(tmp_path / "bounds.csv")
    i = header.index("slack")
    for r in rows:
        if r[0] in ("theorem2", "data_processing"):
            assert float(r[i]) >= -1e-10
    assert res["all_hold"]


def test_example2_ibc_outputs(tmp_path):
    res = run({"experiment": "example2-ibc"}, out=str(tmp_path))
    meta, header, rows = _read_csv(tmp_path / "figure1.csv")
    assert header == ["u0", "R0", "Psi_nu1", "Psi_nu2", "Psi_nu3"]
    assert "nu=[0.5,0.7816,1.0]" in meta
    data = np.array(rows, dtype=float)
    u_r0 = data[np.argmin(data[:, 1]), 0]
    assert abs(abs(u_r0) - 2.0352) <= 0.05
    _, _, rows = _read_csv(tmp_path / "curves.csv")
    data = np.array(rows, dtype=float)
    assert abs(abs(data[np.argmin(data[:, 2]), 0]) - 2.0352) <= 0.05
    payload = json.loads((tmp_path / "result.json").read_text())
    assert payload["tuned_nu"] == res["tuned_nu"] > 0
    assert payload["config"]["experiment"] == "example2-ibc"
    assert all(abs(abs(m) - 2.0352) <= 0.05 for m in payload["dp_minimizers"])


def test_rerun_is_byte_identical(tmp_path):
    cfg = {"experiment": "mc-demo", "plan": {"n_s": 200}}
    run(cfg, out=str(tmp_path / "a"))
    run(cfg, out=str(tmp_path / "b"))
    for name in ("mc_trace.csv", "result.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    run(cfg, out=str(tmp_path / "c"), seed=5)
    assert (tmp_path / "a" / "mc_trace.csv").read_bytes() != (tmp_path / "c" / "mc_trace.csv").read_bytes()


def test_hash_mismatch_detected(tmp_path):
    cfg = ExperimentConfig.from_dict({"experiment": "example2-dp"})
    run(cfg, out=str(tmp_path))
    for name in ("r0_curve.csv", "result.json"):
        assert verify_artifact(str(tmp_path / name), cfg)
    other = cfg.with_overrides(model={"s_v": 0.02})
    assert config_hash(other) != cfg.sha256
    for name in ("r0_curve.csv", "result.json"):
        assert not verify_artifact(str(tmp_path / name), other)


def test_emit_figure1(tmp_path):
    grid = np.linspace(-1, 1, 5)
    r0 = (grid - 0.5) ** 2
    curves = {0.5: grid**2, 0.7816: grid**4, 1.0: np.abs(grid)}
    path = emit_figure1_data(str(tmp_path / "f.csv"), grid, r0, curves, "abc")
    lines = open(path).read().splitlines()
    assert lines[0].startswith("#") and not lines[1].startswith("#")
    assert sum(1 for ln in lines if not ln[0].isdigit() and ln[0] != "-") == 2
    assert lines[1] == "u0,R0,Psi_nu1,Psi_nu2,Psi_nu3"
    data = np.array([ln.split(",") for ln in lines[2:]], dtype=float)
    assert data[np.argmin(data[:, 1]), 0] == 0.5
    with pytest.raises(ValueError):
        emit_figure1_data(str(tmp_path / "g.csv"), [], [], {1: [], 2: [], 3: []}, "abc")
    with pytest.raises(ValueError):
        emit_figure1_data(str(tmp_path / "g.csv"), grid, r0[:3], curves, "abc")


def test_main_success_and_env_dir(tmp_path, monkeypatch, capsys):
    out = tmp_path / "envout"
    monkeypatch.setenv("IBC_OUT_DIR", str(out))
    assert main(["run", _write(tmp_path, {"experiment": "example1"})]) == 0
    assert (out / "example1.csv").exists()
    summary = json.loads(capsys.readouterr().out)
    assert summary["max_abs_x2"] == 0.0


def test_main_errors(tmp_path, capsys):
    assert main(["run", _write(tmp_path, {"experiment": "bogus"}), "--out", str(tmp_path)]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["status"] == "error" and err["kind"] == "config"
    assert main(["run", str(tmp_path / "missing.json")]) == 2
    bad = {"experiment": "example2-dp", "search": {"lo": 0.0, "hi": 1.0, "step": 0.5},
           "dp": {"max_order": 8, "quad_order": 8}}
    assert main(["run", _write(tmp_path, bad, "num.json"), "--out", str(tmp_path)]) == 1
    assert json.loads(capsys.readouterr().err.strip().splitlines()[-1])["kind"] == "numerical"


def test_sweep_nu_command(tmp_path):
    cfg = _write(tmp_path, {"experiment": "nu-sweep", "search": {"step": 0.05}})
    out = tmp_path / "sw"
    assert main(["sweep-nu", cfg, "--nu-from", "0", "--nu-to", "0.1", "--nu-step", "0.05",
                 "--out", str(out)]) == 0
    meta, header, rows = _read_csv(out / "nu_sweep.csv")
    assert header[:2] == ["nu", "abs_argmin"] and len(rows) == 3
    mags = [float(r[1]) for r in rows]
    assert mags == sorted(mags)
    assert main(["sweep-nu", cfg, "--nu-from", "1", "--nu-to", "0", "--nu-step", "0.1",
                 "--out", str(out)]) == 2
