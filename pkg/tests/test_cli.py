import json
import subprocess
import sys
from pathlib import Path

import pytest

from algest.cli import main
from algest.sampled import read_csv

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def run(*args):
    return main([str(a) for a in args])


# -- derive ------------------------------------------------------------------------

def test_derive_amplitude(tmp_path):
    assert run("derive", "--config", CONFIGS / "amplitude.json", "--out", tmp_path, "--quiet") == 0
    plan = json.loads((tmp_path / "plan.json").read_text())
    assert plan["params"] == ["theta"]
    # divisor omega t^2 / 2 with omega = 2
    assert plan["A"] == [[[{"c": "2", "k": 3, "j": 0, "source": "unit"}]]]
    ident = json.loads((tmp_path / "identifiability.json").read_text())
    assert ident["identifiability"]["verdict"] == "identifiable"


def test_derive_frequency_has_four_measured_atoms(tmp_path):
    assert run("derive", "--config", CONFIGS / "frequency.json", "--out", tmp_path, "--quiet") == 0
    plan = json.loads((tmp_path / "plan.json").read_text())
    atoms = [a for row in plan["A"] for f in row for a in f] + [a for f in plan["B"] for a in f]
    assert sum(a["source"] == "measured" for a in atoms) == 4


@pytest.mark.parametrize("name", ["phase.json", "sinc.json"])
def test_derive_other_models(tmp_path, name):
    assert run("derive", "--config", CONFIGS / name, "--out", tmp_path, "--quiet") == 0


def test_derive_non_minimal_exits_2(tmp_path):
    assert run("derive", "--config", CONFIGS / "nonminimal.json", "--out", tmp_path, "--quiet") == 2
    rep = json.loads((tmp_path / "identifiability.json").read_text())
    assert rep["identifiability"]["verdict"] == "not-identifiable"


def test_derive_ode_model(tmp_path, capsys):
    cfg = {"model": {"kind": "ode", "terms": [[0, 2, 1], [0, 0, "k"]], "initial": ["x0", "x1"]},
           "estimator": {"params": ["k"]}}
    assert run("derive", "--config", write(tmp_path, cfg)) == 0
    assert "plan:" in capsys.readouterr().out


# -- simulate / estimate -----------------------------------------------------------

def test_simulate_estimate_round_trip(tmp_path):
    assert run("simulate", "--config", CONFIGS / "amplitude.json", "--out", tmp_path, "--quiet") == 0
    sig, meta = read_csv(tmp_path / "signal.csv")
    assert meta["seed"] == 7 and meta["config"]["model"]["kind"] == "amplitude"
    assert run("estimate", "--config", CONFIGS / "amplitude.json", "--signal", tmp_path / "signal.csv",
               "--out", tmp_path, "--quiet") == 0
    est = json.loads((tmp_path / "estimate.json").read_text())
    assert abs(est["estimates"]["theta"] - 1.5) < 1e-6
    assert est["config"]["model"]["omega"] == 2.0


def test_simulate_noise_is_seeded(tmp_path):
    cfg = json.loads((CONFIGS / "amplitude.json").read_text())
    cfg["noise"] = {"kind": "white", "amplitude": 0.1}
    cfg["grid"]["nbar"] = 200
    path = write(tmp_path, cfg)
    for d in ("a", "b"):
        assert run("simulate", "--config", path, "--out", tmp_path / d, "--quiet", "--seed", 5) == 0
    assert (tmp_path / "a" / "signal.csv").read_text() == (tmp_path / "b" / "signal.csv").read_text()


def test_guard_dominated_estimate_exits_3(tmp_path):
    cfg = json.loads((CONFIGS / "amplitude.json").read_text())
    cfg["grid"] = {"nbar": 100, "eps_div": 10.0}
    path = write(tmp_path, cfg)
    assert run("simulate", "--config", path, "--out", tmp_path, "--quiet") == 0
    assert run("estimate", "--config", path, "--signal", tmp_path / "signal.csv", "--quiet") == 3


def test_estimate_without_signal_is_input_error(tmp_path):
    assert run("estimate", "--config", CONFIGS / "amplitude.json", "--quiet") == 1


# -- config errors -----------------------------------------------------------------

def test_malformed_json(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "model": {"kind": "amplitude",,}\n}')
    assert run("derive", "--config", p) == 1
    err = capsys.readouterr().err
    assert "line 2" in err and "column" in err


def test_unknown_key_rejected(tmp_path, capsys):
    cfg = {"model": {"kind": "amplitude", "omega": 2.0, "colour": "red"}}
    assert run("derive", "--config", write(tmp_path, cfg)) == 1
    assert "colour" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert run("derive", "--config", tmp_path / "nope.json") == 1


def test_negative_trials_rejected(tmp_path):
    assert run("sweep", "--config", CONFIGS / "sweep_white.json", "--trials", 0, "--quiet") == 1


# -- sweep / demod -----------------------------------------------------------------

def test_sweep_slope_and_reproduction(tmp_path):
    cfg = json.loads((CONFIGS / "sweep_sinusoid.json").read_text())
    cfg["experiment"]["trials"] = 8
    path = write(tmp_path, cfg)
    assert run("sweep", "--config", path, "--out", tmp_path / "a", "--quiet") == 0
    summary = json.loads((tmp_path / "a" / "sweep.json").read_text())
    assert summary["slopes"]["mean_err"]["slope"] == pytest.approx(-1.0, abs=0.15)
    # re-run from the config embedded in the CSV header
    header = (tmp_path / "a" / "sweep.csv").read_text().splitlines()[0]
    echo = json.loads(header[2:])["config"]
    again = write(tmp_path, {"experiment": {"kind": "sweep", **echo}}, "again.json")
    assert run("sweep", "--config", again, "--out", tmp_path / "b", "--quiet") == 0
    assert (tmp_path / "a" / "sweep.csv").read_bytes() == (tmp_path / "b" / "sweep.csv").read_bytes()


def test_sweep_seed_override(tmp_path):
    cfg = {"experiment": {"kind": "sweep", "noise": "white", "vary": "Nbar", "values": [100, 200, 400],
                          "trials": 4, "seed": 1}}
    path = write(tmp_path, cfg)
    assert run("sweep", "--config", path, "--out", tmp_path, "--seed", 99, "--quiet") == 0
    assert json.loads((tmp_path / "sweep.json").read_text())["seed"] == 99


def test_demod_small(tmp_path):
    cfg = {"experiment": {"kind": "ser", "symbols": 300, "snr_db": [0], "nbar": [200], "seed": 1,
                          "noiseless": True}}
    assert run("demod", "--config", write(tmp_path, cfg), "--out", tmp_path, "--quiet") == 0
    summary = json.loads((tmp_path / "ser.json").read_text())
    row = summary["rows"][0]
    assert row["ser_algebraic"] == 0 and row["symbols"] == 300
    assert (tmp_path / "ser.csv").read_text().splitlines()[1].startswith("snr_db,Nbar")


def test_wrong_experiment_kind(tmp_path):
    assert run("demod", "--config", CONFIGS / "sweep_white.json", "--quiet") == 1


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "algest", "derive", "--config",
                          str(CONFIGS / "amplitude.json")], capture_output=True, text=True)
    assert res.returncode == 0
    assert "divisor" in res.stdout
