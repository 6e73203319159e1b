import json
import shutil
import subprocess

import pytest

from didlab import harness
from didlab.cli import main
from didlab.dgp import PanelDataset
from didlab.harness import ReplicateOutcome


def test_oracle_command(capsys, tmp_path):
    assert main(["oracle", "--scenario", "s6", "--out", str(tmp_path / "t.csv")]) == 0
    out = capsys.readouterr().out
    assert "true ATT = 0.85" in out and "true ATT = 0.87" in out
    assert (tmp_path / "t_s6a.csv").exists() and (tmp_path / "t_s6b.csv").exists()
    assert main(["oracle", "--scenario", "s2"]) == 0
    assert "s2: true ATT = 1" in capsys.readouterr().out


def test_run_command(tmp_path):
    out = tmp_path / "r.csv"
    code = main(["run", "--scenario", "s2", "--method", "tva", "--method", "ca", "--reps", "3",
                 "--n-units", "80", "--seed", "42", "--out", str(out), "--json", str(tmp_path / "r.json")])
    assert code == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 3 and lines[1].startswith("s2,-,tva,3,0,")
    assert json.loads((tmp_path / "r.json").read_text())["config"]["master_seed"] == 42


def test_run_from_config(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"scenarios": ["s4b"], "methods": ["simple"], "reps": 2, "n_units": 60}))
    out = tmp_path / "r.csv"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
    assert out.read_text().splitlines()[1].startswith("s4,b,simple,2,")


def test_config_errors(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"reps": 2, "typo_key": 1}))
    assert main(["run", "--config", str(cfg)]) == 1
    assert "typo_key" in capsys.readouterr().err
    assert main(["run"]) == 1
    assert main(["run", "--scenario", "s9"]) == 1


def test_all_cells_failed_exit_code(monkeypatch, tmp_path):
    monkeypatch.setattr(harness, "apply_method", lambda *a, **k: ReplicateOutcome(error="boom"))
    assert main(["run", "--scenario", "s1", "--method", "simple", "--reps", "2",
                 "--n-units", "40", "--out", str(tmp_path / "r.csv")]) == 2


def test_generate_command(tmp_path):
    out = tmp_path / "p.csv"
    assert main(["generate", "--scenario", "s4", "--process", "b", "--seed", "7", "--n-units", "30", "--out", str(out)]) == 0
    data = PanelDataset.from_csv(out)
    assert data.n_units == 30 and data.n_times == 10 and data.is_balanced()
    again = tmp_path / "q.csv"
    main(["generate", "--scenario", "s4", "--process", "b", "--seed", "7", "--n-units", "30", "--out", str(again)])
    assert out.read_bytes() == again.read_bytes()


def test_demo_command(tmp_path, capsys):
    out = tmp_path / "f.csv"
    assert main(["demo-figure1", "--out", str(out), "--n-units", "50"]) == 0
    assert out.read_text().startswith("unit,period,group,x,y,")
    assert capsys.readouterr().out.startswith("series,group,period,mean")


@pytest.mark.skipif(shutil.which("didlab") is None, reason="console script not installed")
def test_console_script():
    res = subprocess.run(["didlab", "oracle", "--scenario", "s6", "--process", "a"], capture_output=True, text=True)
    assert res.returncode == 0 and "0.85" in res.stdout
