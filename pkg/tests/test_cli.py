import json
import math
import os

import numpy as np
import pytest

from attractor_lab.cli import main
from attractor_lab.errors import ConfigError
from attractor_lab.io import csv_text, json_text, write_csv
from attractor_lab.scenario import bundled_scenarios, load_scenario, run_scenario, scenario_from_dict

MINIMAL = {
    "schema": 1,
    "name": "mini",
    "driver": {"kind": "p2"},
    "nonlinearity": {"kind": "pure_power", "rho": 1.0, "theta": 3.0},
    "experiments": [{"kind": "sections", "shifts": [0], "include_limits": False, "horizons": [25, 50, 100],
                     "expect": "Trivial"}],
}


def test_csv_uses_round_trip_floats():
    text = csv_text([("t", "v"), (0.1, 1 / 3), (np.float64(2.0), np.int64(3))])
    assert text == "t,v\n0.1,0.3333333333333333\n2.0,3\n"
    assert float(text.splitlines()[1].split(",")[1]) == 1 / 3


def test_json_sanitises_non_finite():
    obj = json.loads(json_text({"a": math.inf, "b": math.nan, "c": np.array([1.5]), "d": np.bool_(True)}))
    assert obj == {"a": "inf", "b": None, "c": [1.5], "d": True}


def test_atomic_write_leaves_no_temp_files(tmp_path):
    write_csv(tmp_path / "sub" / "x.csv", [("a",), (1.0,)])
    assert os.listdir(tmp_path / "sub") == ["x.csv"]


def test_bundled_scenarios_load():
    names = bundled_scenarios()
    assert names == sorted(["autonomous_s1", "autonomous_s5", "deadzone_equivalence", "heteroclinic_p1",
                            "homoclinic_p0", "trivial_p2"])
    for n in names:
        assert load_scenario(n).name == n


@pytest.mark.parametrize("patch, message", [
    ({"schema": 2}, "schema"),
    ({"colour": "red"}, "colour"),
    ({"driver": {"kind": "p0", "c": 1}}, "unknown key"),
    ({"nonlinearity": {"kind": "cubic"}}, "nonlinearity kind"),
    ({"gamma": "big"}, "gamma"),
    ({"experiments": []}, "nonempty"),
    ({"experiments": [{"kind": "sections", "bogus": 1}]}, "bogus"),
    ({"experiments": [{"kind": "sections", "horizons": [50, 25]}]}, "increasing"),
    ({"grid": {"n_nodes": 64, "bc": "dirichlet", "alpha": 1}}, "alpha"),
])
def test_config_validation(patch, message):
    with pytest.raises(ConfigError, match=message):
        scenario_from_dict({**MINIMAL, **patch})


def test_parse_error_reports_line(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "schema": 1,\n  "name": oops\n}')
    with pytest.raises(ConfigError, match="line 3"):
        load_scenario(p)


def test_run_scenario_writes_report(tmp_path):
    code, report = run_scenario(scenario_from_dict(MINIMAL), tmp_path)
    assert code == 0
    saved = json.loads((tmp_path / "report.json").read_text())
    assert saved["experiments"][0]["anchor"]
    assert saved["experiments"][0]["status"] == "pass"
    assert (tmp_path / saved["experiments"][0]["artifact"]).exists()


def test_failed_expectation_exits_1(tmp_path):
    cfg = json.loads(json.dumps(MINIMAL))
    cfg["experiments"][0]["expect"] = "StronglyPositive"
    code, _ = run_scenario(scenario_from_dict(cfg), tmp_path)
    assert code == 1


def test_numeric_error_is_reported_with_experiment_name(tmp_path):
    cfg = json.loads(json.dumps(MINIMAL))
    cfg["experiments"] = [{"kind": "sections", "name": "tiny", "shifts": [0], "horizons": [5, 7]}]
    code, report = run_scenario(scenario_from_dict(cfg), tmp_path)
    assert code == 1
    assert report["experiments"][0]["status"] == "error"
    assert report["experiments"][0]["error"].startswith("tiny:")


def test_outputs_identical_across_thread_counts(tmp_path):
    sc = load_scenario("trivial_p2")
    run_scenario(sc, tmp_path / "one", workers=1)
    run_scenario(sc, tmp_path / "four", workers=4)
    for f in sorted(os.listdir(tmp_path / "one")):
        assert (tmp_path / "one" / f).read_bytes() == (tmp_path / "four" / f).read_bytes()


def test_cli_tail(capsys):
    assert main(["tail", "--driver", "p0", "--theta", "3", "--horizon", "1000"]) == 0
    out = capsys.readouterr().out
    assert "value = 0.643255767" in out and "converged = true" in out


def test_cli_eigen(capsys):
    assert main(["eigen", "--bc", "dirichlet", "--grid-n", "257"]) == 0
    value = float(capsys.readouterr().out.split("=")[1])
    assert abs(value - math.pi ** 2) < 0.01


def test_cli_verify_lemma(capsys):
    assert main(["verify-lemma", "--driver", "constant:1", "--theta", "3"]) == 0
    out = capsys.readouterr().out
    assert float(out.split("=")[1].split()[0]) < 1e-6


def test_cli_pullback_json(tmp_path, capsys):
    out = tmp_path / "b.json"
    code = main(["pullback", "--driver", "p1", "--theta", "3", "--rho", "0.5", "--scale", "0.5", "--out", str(out)])
    assert code == 0
    sec = json.loads(out.read_text())
    assert set(sec) >= {"hull_point", "classification", "sup_norm", "min_interior", "horizon", "cauchy_gap"}
    assert abs(sec["sup_norm"] - 1.3272506) < 1e-4


def test_cli_cocycle_and_orbit(tmp_path, capsys):
    assert main(["cocycle", "--driver", "p2", "--horizon", "1000", "--out", str(tmp_path / "c.csv")]) == 0
    assert (tmp_path / "c.csv").read_text().startswith("t,log_c\n")
    assert main(["orbit", "--driver", "p1", "--rho", "0.5", "--scale", "0.5", "--t-min", "-2", "--t-max", "2",
                 "--horizon", "200", "--out", str(tmp_path / "o.csv")]) == 0
    assert (tmp_path / "o.csv").read_text().startswith("t,sup_norm\n")


def test_cli_trichotomy(capsys):
    assert main(["trichotomy", "--driver", "p2", "--horizon", "200"]) == 0
    assert json.loads(capsys.readouterr().out)["case_tag"] == "s2"


def test_cli_run_bundled(tmp_path, capsys):
    assert main(["run", "autonomous_s1", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "report.json").exists()
    assert main(["run", "--list"]) == 0


@pytest.mark.parametrize("argv", [["bogus"], ["tail", "--nope"], ["orbit", "--driver", "p1"], []])
def test_usage_errors_exit_64(argv):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 64


def test_bad_driver_is_config_error(capsys):
    assert main(["tail", "--driver", "sine"]) == 1
    assert "configuration error" in capsys.readouterr().err


def test_cli_cocycle_default_horizon_and_short_horizon(capsys):
    assert main(["cocycle", "--driver", "p1", "--shift", "-5"]) == 0
    assert '"p1@-5"' in capsys.readouterr().out
    assert main(["cocycle", "--horizon", "100"]) == 1
    assert "too short" in capsys.readouterr().err
