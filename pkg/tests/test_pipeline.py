import json
import math
import warnings
from dataclasses import replace

import numpy as np
import pytest

from systems import REFERENCE_GRID, area_grid

from modalwadc import reports
from modalwadc.cli import main
from modalwadc.errors import InputError
from modalwadc.grid import save_grid
from modalwadc.pipeline import Scenario, resolve_ids
from modalwadc.simulation import PmuDataset, write_pmu_csv


def _scenario(tmp_path, grid, **wadc):
    cfg = {
        "grid": str(grid),
        "outputs": "out",
        "simulation": {"duration": 40.0, "dt": 0.001, "seed": 3, "model": "linear"},
        "pmu": {"fs": 30.0},
        "wadc": wadc,
        "delay": {"taus": [0.0, 0.05], "N": 12},
    }
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(cfg))
    return path


@pytest.fixture
def damped_grid(tmp_path):
    """Four machines whose modes are all well damped."""
    model, delta = area_grid(2, 2, seed=1, sigma=0.02)
    model = replace(model, D=model.D * 400)
    path = tmp_path / "damped.json"
    save_grid(model, path)
    data = json.loads(path.read_text())
    data["equilibrium_guess"] = list(delta)
    path.write_text(json.dumps(data))
    return path


def test_nothing_to_damp_exits_clean(tmp_path, damped_grid):
    cfg = _scenario(tmp_path, damped_grid)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        assert main(["run", "--config", str(cfg)]) == 0
    out = tmp_path / "out"
    design = reports.load_json(out / "design.json")
    assert design["selected"] == [] and design["critical_modes"] == [] and design["passed"]
    assert not np.any(design["K"])
    sweep = (out / "delay_sweep.csv").read_text().splitlines()
    assert sweep[0] == "tau_d,worst_mode_zeta,rightmost_real" and len(sweep) == 3
    assert not (out / "error.json").exists()


def test_stagewise_commands_and_analyze(tmp_path, damped_grid):
    cfg = _scenario(tmp_path, damped_grid)
    out = tmp_path / "out"
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for cmd in ("simulate", "estimate", "analyze", "design", "delay"):
            assert main([cmd, "--config", str(cfg)]) == 0, cmd
    first = (out / "modes_true.json").read_text()
    other = tmp_path / "again"
    other.mkdir()
    (other / "linear_model.json").write_text((out / "linear_model.json").read_text())
    assert main(["analyze", "--config", str(cfg), "--out", str(other),
                 "--matrix", str(other / "linear_model.json")]) == 0
    assert (other / "modes_true.json").read_text() == first
    est = reports.load_json(out / "modes_estimated.json")
    assert "comparison" in est and est["modes"][0]["mode"] == 1


def test_effort_flag_switches_mode(tmp_path):
    cfg = tmp_path / "ref.json"
    cfg.write_text(json.dumps({
        "grid": str(REFERENCE_GRID), "outputs": "out",
        "simulation": {"duration": 60.0, "seed": 7, "model": "linear"},
        "delay": {"taus": [0.0], "N": 8},
    }))
    assert main(["run", "--config", str(cfg), "--effort"]) in (0, 1)
    design = reports.load_json(tmp_path / "out" / "design.json")
    assert design["mode"] == "effort"
    assert len(set(design["sigma_d"])) == 1
    assert design["J_C"] == pytest.approx(sum(design["sigma_d"]))
    assert main(["design", "--config", str(cfg)]) in (0, 1)
    assert reports.load_json(tmp_path / "out" / "design.json")["mode"] == "selection"


def test_short_csv_is_reported(tmp_path, damped_grid, capsys):
    cfg = _scenario(tmp_path, damped_grid)
    csv_path = tmp_path / "tiny.csv"
    data = PmuDataset(30.0, 0.0, np.zeros((2, 8)), (0, 1, 2, 3), (0, 1, 2, 3))
    write_pmu_csv(data, csv_path)
    assert main(["estimate", "--config", str(cfg), "--csv", str(csv_path)]) == 2
    err = json.loads((tmp_path / "out" / "error.json").read_text())
    assert err["error"] == "insufficient_data" and err["stage"] == "estimate"
    assert json.loads(capsys.readouterr().err) == err


def test_missing_config_and_grid(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "nope.json")]) == 2
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"grid": "missing.json"}))
    assert main(["simulate", "--config", str(cfg)]) == 2
    assert json.loads(capsys.readouterr().err.splitlines()[-1])["error"] == "input_error"


def test_scenario_validation(tmp_path, damped_grid):
    base = {"grid": str(damped_grid)}
    scn = Scenario.from_dict(base, tmp_path)
    assert scn.model == "linear" and scn.sigma_d == 2.0 and scn.grid == damped_grid.resolve()
    with pytest.warns(RuntimeWarning, match="short"):
        Scenario.from_dict({**base, "simulation": {"duration": 10.0}}, tmp_path)
    with pytest.raises(InputError):
        Scenario.from_dict({**base, "simulation": {"model": "pde"}}, tmp_path)
    with pytest.raises(InputError):
        Scenario.from_dict({**base, "modal": {"ranking": "sum"}}, tmp_path)
    with pytest.raises(InputError):
        Scenario.from_dict({}, tmp_path)


def test_resolve_ids():
    names = ("G1", "G2", "G3")
    assert resolve_ids(None, names) is None
    assert resolve_ids(["G3", 1], names) == [2, 0]
    with pytest.raises(InputError):
        resolve_ids(["G9"], names)
    with pytest.raises(InputError):
        resolve_ids([0], names)


def test_report_cleaning(tmp_path):
    obj = {"a": np.float64(1 / 3), "b": [math.nan, math.inf], "c": 1 + 2j, "d": np.array([[1, 2]]),
           "e": np.bool_(True), "f": -0.0}
    assert reports.clean(obj) == {"a": 0.333333333333, "b": [None, None], "c": [1.0, 2.0],
                                  "d": [[1, 2]], "e": True, "f": 0.0}
    path = tmp_path / "r.json"
    reports.dump_json(obj, path)
    assert json.loads(path.read_text())["a"] == 0.333333333333
