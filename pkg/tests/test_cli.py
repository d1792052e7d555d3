import csv
import json

import numpy as np
import pytest

from windjoint.cli import main
from windjoint.fixtures import write_all
from windjoint.scenarios import load_report

CORRIDOR = ["--config", "fixture:corridor_config.json", "--rose", "fixture:aligned_rose.csv",
            "--layout", "fixture:corridor_layout.csv"]
QUICK = ["--swarm-size", "8", "--pso-iterations", "5", "--pso-restarts", "1", "--max-iter", "3"]


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_evaluate_rect16(tmp_path, capsys):
    code = main(["evaluate", "--config", "fixture:rect16_config.json", "--rose", "fixture:wnw_rose36.csv",
                 "--layout", "fixture:rect16_layout.csv", "--scenarios", "12", "--out", str(tmp_path)])
    assert code == 0
    assert "AEP:" in capsys.readouterr().out
    rep = load_report(tmp_path / "report.json")
    assert rep.plan.n_scenarios == 12
    assert not rep.aep_mismatch
    assert (tmp_path / "layout.csv").is_file()
    assert "wall_clock_seconds" in json.loads((tmp_path / "timing.json").read_text())


def test_missing_rose_names_path(tmp_path, capsys):
    code = main(["evaluate", "--config", "fixture:corridor_config.json", "--rose", str(tmp_path / "gone.csv"),
                 "--layout", "fixture:corridor_layout.csv", "--out", str(tmp_path / "o")])
    assert code == 1
    assert "gone.csv" in capsys.readouterr().err


def test_bad_layout_length_is_input_error(tmp_path, capsys):
    (tmp_path / "l.csv").write_text("turbine_id,x_m,y_m\n0,0.0,0.0\n")
    code = main(["evaluate", "--config", "fixture:corridor_config.json", "--rose", "fixture:aligned_rose.csv",
                 "--layout", str(tmp_path / "l.csv"), "--out", str(tmp_path / "o")])
    assert code == 1


def test_optimize_same_seed_same_bytes(tmp_path):
    for name in ("a", "b"):
        assert main(["optimize", *CORRIDOR, *QUICK, "--seed", "4", "--out", str(tmp_path / name)]) == 0
    assert (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()
    rows = _rows(tmp_path / "a" / "trace.csv")
    stages = {r["stage"] for r in rows}
    assert stages == {"pso", "dbhm"}
    rep = load_report(tmp_path / "a" / "report.json")
    assert rep.metadata["mode"] == "dbhm" and rep.metadata["seed"] == 4
    assert rep.layout.x[0] == 0.0 and rep.layout.x[2] == 1100.0


@pytest.mark.parametrize("mode", ["pso", "sequential", "control-only"])
def test_optimize_modes(tmp_path, mode):
    assert main(["optimize", *CORRIDOR, *QUICK, "--mode", mode, "--out", str(tmp_path)]) == 0
    assert load_report(tmp_path / "report.json").metadata["mode"] == mode


def test_flowfield_single_turbine(tmp_path):
    (tmp_path / "one.csv").write_text("turbine_id,x_m,y_m\n0,500.0,850.0\n")
    code = main(["flowfield", "--config", "fixture:rect16_config.json", "--rose", "fixture:aligned_rose.csv",
                 "--layout", str(tmp_path / "one.csv"), "--grid-res", "50", "--margin", "0",
                 "--out", str(tmp_path / "f")])
    assert code == 0
    rows = _rows(tmp_path / "f" / "flowfield.csv")
    up = [float(r["velocity_mps"]) for r in rows if float(r["x_m"]) < 500.0]
    down = [float(r["velocity_mps"]) for r in rows if float(r["x_m"]) > 600.0 and float(r["y_m"]) == 850.0]
    assert up and all(v == 9.0 for v in up)
    assert max(down) < 9.0


def test_flowfield_weighted_equals_single_scenario(tmp_path):
    common = ["flowfield", *CORRIDOR, "--grid-res", "100", "--margin", "0"]
    assert main([*common, "--out", str(tmp_path / "w")]) == 0
    assert main([*common, "--scenario", "0", "--out", str(tmp_path / "s")]) == 0
    assert (tmp_path / "w" / "flowfield.csv").read_bytes() == (tmp_path / "s" / "flowfield.csv").read_bytes()


def test_flowfield_rejects_bad_resolution(tmp_path, capsys):
    assert main(["flowfield", *CORRIDOR, "--grid-res", "0", "--out", str(tmp_path)]) == 1
    assert "grid-res" in capsys.readouterr().err


def test_sweep_csv(tmp_path):
    code = main(["sweep", *CORRIDOR, "--start", "520", "--stop", "580", "--step", "10", "--out", str(tmp_path)])
    assert code == 0
    rows = _rows(tmp_path / "sweep.csv")
    assert [float(r["position_m"]) for r in rows] == list(np.arange(520.0, 581.0, 10.0))
    for r in rows:
        assert float(r["aep_optimized_mwh"]) >= float(r["aep_greedy_mwh"])


def test_sweep_rejects_coarse_step(tmp_path):
    assert main(["sweep", *CORRIDOR, "--start", "520", "--stop", "580", "--step", "30",
                 "--out", str(tmp_path)]) == 1


def test_shipped_fixtures_match_generators(tmp_path):
    from windjoint.fixtures import data_dir

    write_all(tmp_path)
    shipped = sorted(p.name for p in data_dir().iterdir() if p.suffix in (".csv", ".json"))
    assert shipped == sorted(p.name for p in tmp_path.iterdir())
    for name in shipped:
        assert (data_dir() / name).read_bytes() == (tmp_path / name).read_bytes(), name
