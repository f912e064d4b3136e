import csv
import json

import numpy as np
import pytest

from fvtaxis import cli
from fvtaxis.config import DEFAULTS, ConfigError, barenblatt, load, validate
from fvtaxis.field import Grid, integral, read_snapshot
from fvtaxis.runner import run, simulate, sweep, sweep_m

MINIMAL = {"cells": [16], "m": 2.0, "T": 0.05,
           "u0": [{"profile": "constant", "value": 0.5}],
           "v0": [{"profile": "constant", "value": 1.0}]}

SMALL = {"cells": [16], "m": 2.0, "eps": 1e-3, "T": 0.02, "dt_out": 0.005,
         "motility": {"name": "exp_decay", "params": [1.0]},
         "u0": [{"profile": "constant", "value": 0.1},
                {"profile": "gaussian", "center": 0.4, "width": 0.1, "amplitude": 1.0}],
         "v0": [{"profile": "constant", "value": 0.5},
                {"profile": "gaussian", "center": 0.6, "width": 0.1, "amplitude": 0.5}]}


def _errors(raw):
    with pytest.raises(ConfigError) as exc:
        validate(raw)
    return exc.value.errors


def test_minimal_config_defaults():
    cfg = validate(MINIMAL)
    assert cfg.dim == 1 and cfg.lengths == (1.0,)
    assert cfg.eps == DEFAULTS["eps"] and cfg.dt_out == pytest.approx(0.0005)
    assert cfg.p_list == (2.0, 3.0, 4.0) and cfg.q == 2.0
    assert cfg.alpha_list == (1.25, 2.0, 3.0)
    assert cfg.motility == {"name": "constant", "params": [1.0]}


def test_m_must_exceed_one():
    errs = _errors(dict(MINIMAL, m=0.9))
    assert any("m must exceed 1" in e for e in errs)


def test_negative_amplitude_rejected():
    raw = dict(MINIMAL, u0=[{"profile": "gaussian", "center": 0.5, "width": 0.1,
                             "amplitude": -1.0}])
    assert any("non-negative" in e for e in _errors(raw))


def test_error_list_is_exhaustive():
    raw = dict(MINIMAL, m=0.5, eps=2.0, T=-1.0, colour="red", alpha_list=[0.1])
    errs = _errors(raw)
    joined = "\n".join(errs)
    for needle in ("unknown key 'colour'", "m must exceed 1", "eps must lie", "T must be > 0"):
        assert needle in joined
    assert len(errs) >= 4


def test_missing_keys_and_bad_json():
    errs = _errors({"cells": [4]})
    assert sum("missing required key" in e for e in errs) == 4
    assert _errors("{not json")[0].startswith("not valid JSON")
    assert _errors("[1, 2]") == ["config must be a JSON object"]


def test_bad_profiles_and_motility():
    raw = dict(MINIMAL, u0=[{"profile": "spiral"}],
               v0=[{"profile": "gaussian", "center": 0.5, "width": 0.0, "amplitude": 1.0}],
               motility={"name": "constant", "params": [0.0]})
    errs = _errors(raw)
    assert any(e.startswith("u0[0]") for e in errs)
    assert any("width must be > 0" in e for e in errs)
    assert any(e.startswith("motility") for e in errs)


def test_cosine_sum_negative_rejected():
    raw = dict(MINIMAL, v0=[{"profile": "cosine", "amplitude": 1.0, "modes": 1}])
    assert any("non-negative" in e for e in _errors(raw))


def test_round_trip_and_hash():
    cfg = validate(SMALL)
    again = validate(cfg.emit())
    assert again == cfg
    assert again.hash() == cfg.hash()
    reordered = dict(reversed(list(SMALL.items())))
    assert validate(reordered).hash() == cfg.hash()
    assert cfg.replace(m=3.0, alpha_list=None, p_list=None).hash() != cfg.hash()


def test_profiles():
    g = Grid((8, 8), (1.0, 1.0))
    cfg = validate({"cells": [8, 8], "m": 2.0, "T": 1.0, "seed": 7,
                    "u0": [{"profile": "checkerboard", "amplitude": 2.0, "block": 2}],
                    "v0": [{"profile": "random", "amplitude": 1.0}]})
    u, v = cfg.initial_data()
    assert set(np.unique(u)) == {0.0, 2.0} and u[0, 0] == 0.0 and u[2, 0] == 2.0
    assert 0 <= v.min() and v.max() <= 1.0
    _, v2 = cfg.initial_data()
    np.testing.assert_array_equal(v, v2)
    b = barenblatt(g, 2.0, 0.01, 0.2, [0.5, 0.5])
    assert b.min() == 0.0 and b.max() > 0


def test_file_profile(tmp_path, monkeypatch):
    from fvtaxis.field import write_snapshot
    g = Grid((6,), (1.0,))
    write_snapshot(tmp_path / "u0.csv", np.linspace(0, 1, 6), g)
    monkeypatch.chdir(tmp_path)
    cfg = validate(dict(MINIMAL, cells=[6], u0=[{"profile": "file", "path": "u0.csv"}]))
    np.testing.assert_allclose(cfg.initial_data()[0], np.linspace(0, 1, 6))
    errs = _errors(dict(MINIMAL, u0=[{"profile": "file", "path": "u0.csv"}]))
    assert errs[0].startswith("initial data")


def test_run_zero_u(tmp_path):
    cfg = validate(dict(MINIMAL, T=1.0, dt_out=0.1, u0=[{"profile": "constant", "value": 0.0}]))
    man = run(cfg, tmp_path / "out")
    assert man["exit_status"] == 0 and man["status"] == "ok"
    rows = list(csv.DictReader(open(tmp_path / "out" / "monitor.csv")))
    assert len(rows) == 11
    assert all(float(r["mass_u"]) == 0.0 for r in rows)


def test_run_artifacts_and_determinism(tmp_path):
    cfg = validate(SMALL)
    a = run(cfg, tmp_path / "a", snapshot_every=0.01)
    b = run(cfg, tmp_path / "b", snapshot_every=0.01)
    assert b["config_hash"] == a["config_hash"]
    for name in a["artifacts"]:
        assert (tmp_path / "a" / name).exists(), name
    assert "snapshots/u_00000.csv" in a["artifacts"] and "snapshots/v_00002.csv" in a["artifacts"]
    assert (tmp_path / "a" / "monitor.csv").read_bytes() == (tmp_path / "b" / "monitor.csv").read_bytes()
    man = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert man["config_hash"] == cfg.hash() and man["config"]["cfl_safety"] == 0.9
    verdict = json.loads((tmp_path / "a" / "verdict.json").read_text())
    assert verdict["invariants"]["mass_drift"] <= 1e-12
    g, u, header = read_snapshot(tmp_path / "a" / "snapshots" / "u_00002.csv")
    assert header["t"] == pytest.approx(0.02)
    assert integral(u, g) == pytest.approx(integral(cfg.initial_data()[0], g), rel=1e-12)


def test_run_nonconvergence(tmp_path):
    cfg = validate(dict(SMALL, dt_fixed=0.01))
    man = run(cfg, tmp_path / "bad")
    assert man["exit_status"] == 3 and "error" in man


def test_simulate_invariants():
    res = simulate(validate(SMALL))
    assert res.invariants.violations() == []
    assert res.verdict["m_gt_half_d"]


def test_sweep_flags_and_isolation(tmp_path):
    base = validate(dict(SMALL, T=0.01))
    rows = sweep(base, [{"m": 1.5, "alpha_list": None, "p_list": None}, {"m": 0.9},
                        {"m": 2.5, "alpha_list": None, "p_list": None}], tmp_path)
    assert [r["status"] for r in rows] == ["ok", "failed", "ok"]
    assert rows[1]["exit_status"] == 2
    assert (tmp_path / "member_000" / "monitor.csv").exists()
    assert (tmp_path / "member_002" / "monitor.csv").exists()
    summary = list(csv.DictReader(open(tmp_path / "summary.csv")))
    assert len(summary) == 3 and summary[0]["m_gt_half_d"] == "True"


def test_sweep_m_thresholds(tmp_path):
    base2 = validate({"cells": [6, 6], "m": 2.0, "T": 0.01,
                      "u0": [{"profile": "constant", "value": 0.2}],
                      "v0": [{"profile": "constant", "value": 0.5}]})
    rows = sweep_m(base2, [1.1, 1.5, 2, 3], tmp_path / "d2")
    assert [r["m_gt_half_d"] for r in rows] == [True] * 4
    base3 = base2.replace(cells=[4, 4, 4], lengths=[1.0, 1.0, 1.0])
    rows = sweep_m(base3, [1.2, 1.6, 2.5], tmp_path / "d3")
    assert [r["m_gt_half_d"] for r in rows] == [False, True, True]
    with pytest.raises(ValueError):
        sweep_m(base2, [1.0], tmp_path / "x")


@pytest.mark.slow
def test_sweep_d3_bounded_above_threshold(tmp_path):
    base = validate({"cells": [12, 12, 12], "m": 2.0, "eps": 1e-3, "T": 2.0, "dt_out": 0.05,
                     "motility": {"name": "exp_decay", "params": [1.0]},
                     "u0": [{"profile": "constant", "value": 0.1},
                            {"profile": "gaussian", "center": [0.4, 0.5, 0.5], "width": 0.1,
                             "amplitude": 0.5}],
                     "v0": [{"profile": "constant", "value": 0.5},
                            {"profile": "gaussian", "center": [0.6, 0.5, 0.5], "width": 0.15,
                             "amplitude": 0.5}]})
    rows = sweep_m(base, [1.6, 2.5], tmp_path, workers=2)
    assert all(r["status"] == "ok" and r["bounded_flag"] for r in rows)


def _write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


def test_cli_check_and_exit_codes(tmp_path, capsys):
    good = _write(tmp_path / "good.json", SMALL)
    assert cli.main(["check", good]) == 0
    assert json.loads(capsys.readouterr().out)["cfl_safety"] == 0.9
    bad = _write(tmp_path / "bad.json", dict(SMALL, m=0.5))
    assert cli.main(["check", bad]) == 2
    assert "m must exceed 1" in capsys.readouterr().err
    assert cli.main(["check", str(tmp_path / "missing.json")]) == 2
    stiff = _write(tmp_path / "stiff.json", dict(SMALL, dt_fixed=0.01))
    assert cli.main(["run", stiff, "--out", str(tmp_path / "stiff")]) == 3


def test_cli_run_and_sweep(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("FVTAXIS_OUT", str(tmp_path / "root"))
    cfg = _write(tmp_path / "small.json", SMALL)
    assert cli.main(["run", cfg, "--snapshots", "0.01"]) == 0
    assert (tmp_path / "root" / "small" / "manifest.json").exists()
    ov = _write(tmp_path / "ov.json", {"m": [1.5, 3.0]})
    assert cli.main(["sweep", cfg, ov, "--out", str(tmp_path / "sw")]) == 0
    rows = list(csv.DictReader(open(tmp_path / "sw" / "summary.csv")))
    assert [float(r["m"]) for r in rows] == [1.5, 3.0]
    capsys.readouterr()


def test_cli_studies(tmp_path, capsys):
    cfg = _write(tmp_path / "small.json", SMALL)
    assert cli.main(["eps-study", cfg, "--eps", "1e-1,1e-2,1e-3", "--out", str(tmp_path / "e")]) == 0
    table = json.loads((tmp_path / "e" / "eps_study.json").read_text())
    assert len(table["rows"]) == 2
    assert cli.main(["converge", cfg, "--mode", "time", "--levels", "3",
                     "--out", str(tmp_path / "c")]) == 0
    table = json.loads((tmp_path / "c" / "convergence.json").read_text())
    assert len(table["errors"]) == 2
    capsys.readouterr()


def test_load_configs_shipped():
    from pathlib import Path
    root = Path(__file__).resolve().parents[1] / "configs"
    names = [p for p in root.glob("*.json") if p.name != "m_sweep.json"]
    assert len(names) >= 4
    for p in names:
        load(p)
