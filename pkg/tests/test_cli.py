import json
import subprocess
import sys

import pytest

from typical_worlds.cli import main, parse_psi, to_json_text
from typical_worlds.errors import ConfigError


def run_cli(capsys, *argv):
    rc = main(list(argv))
    out, err = capsys.readouterr()
    return rc, out, err


def test_distribution_json(capsys):
    rc, out, _ = run_cli(capsys, "distribution", "--builtin", "sec9")
    assert rc == 0
    rep = json.loads(out)
    assert rep["tool"] == "typical-worlds"
    assert rep["space"]["probs"] == pytest.approx([0.64, 0.36])
    assert rep["completeness_residual"] < 1e-12


def test_distribution_psi_and_csv(capsys):
    rc, out, _ = run_cli(capsys, "distribution", "--builtin", "sec9", "--psi", "[1, 1]", "--format", "csv")
    assert rc == 0
    lines = out.strip().splitlines()
    assert lines[0] == "symbol,probability"
    assert [float(l.split(",")[1]) for l in lines[1:]] == pytest.approx([0.5, 0.5])


def test_run_reports_frequencies(capsys):
    rc, out, _ = run_cli(capsys, "run", "--builtin", "sec10", "--seed", "1", "--n", "20000")
    assert rc == 0
    freq = json.loads(out)["frequency"]
    assert freq["total"] == 20000 and freq["within_bound"]


def test_run_csv_tuple_symbols(capsys):
    rc, out, _ = run_cli(capsys, "run", "--builtin", "sec10", "--seed", "1", "--n", "100", "--format", "csv")
    assert rc == 0
    assert out.splitlines()[0] == "symbol,count,empirical,reference"
    assert out.splitlines()[1].startswith("(")


def test_bb84_reports_byte_identical(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["bb84", "--p", "0.5", "--seed", "4", "--n", "20000", "--out", str(a)]) == 0
    assert main(["bb84", "--p", "0.5", "--seed", "4", "--n", "20000", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    rep = json.loads(a.read_text())
    assert rep["config"]["seed"] == 4 and rep["detection_rate"] == 0.0


def test_bb84_eve(capsys):
    rc, out, _ = run_cli(capsys, "bb84", "--eve", "--n", "20000")
    rep = json.loads(out)
    assert rc == 0 and rep["flag_round"] is not None and rep["kept_key_rate"] == 0.0


def test_battery_and_transforms(capsys):
    rc, out, _ = run_cli(capsys, "battery", "--builtin", "sec9", "--seed", "2", "--n", "20000")
    assert rc == 0 and json.loads(out)["battery"]["passed"]
    rc, out, _ = run_cli(capsys, "transforms", "--builtin", "sec10", "--seed", "2", "--n", "20000")
    names = [t["transform"] for t in json.loads(out)["transforms"]]
    assert rc == 0
    assert names == ["contract", "marginalize[0]", "condition", "characteristic", "shuffle[2n]", "shuffle[primes]"]


@pytest.mark.parametrize(
    "argv",
    [
        ["distribution", "--builtin", "nope"],
        ["distribution"],
        ["run", "--builtin", "sec9", "--n", "0"],
        ["run", "--builtin", "sec9", "--seed", "-1"],
        ["bb84", "--p", "1.5"],
        ["battery", "--builtin", "sec9", "--format", "csv"],
        ["distribution", "--builtin", "sec11", "--psi", "[1, 0]"],
        ["distribution", "--builtin", "sec9", "--psi", "[0, 0]"],
        ["distribution", "--scenario", "/nonexistent.json"],
        ["frobnicate"],
    ],
)
def test_config_errors_exit_2(capsys, argv):
    rc, out, err = run_cli(capsys, *argv)
    assert rc == 2 and out == "" and err


def test_cap_exceeded_exit_2(capsys, monkeypatch):
    monkeypatch.setenv("TYPICAL_WORLDS_CAP", "8")
    rc, _, err = run_cli(capsys, "distribution", "--builtin", "bb84")
    assert rc == 2 and "cap" in err


def test_invariant_exit_1(tmp_path, capsys):
    bad = {
        "factors": [2],
        "initial": [1, 0],
        "stages": [{"targets": [0], "family": {"operators": {"0": {"rows": 2, "cols": 2, "re": [1, 0, 0, 0], "im": [0, 0, 0, 0]}}}}],
    }
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(bad))
    rc, _, err = run_cli(capsys, "distribution", "--scenario", str(path))
    assert rc == 1 and "invariant" in err


def test_parse_psi():
    assert parse_psi("[3, 4]") == pytest.approx([0.6, 0.8], abs=1e-15)
    assert parse_psi("[[0, 1], [1, 0]]") == pytest.approx([1j / 2**0.5, 1 / 2**0.5], abs=1e-15)
    with pytest.raises(ConfigError):
        parse_psi("[a, b]")


def test_to_json_text_floats():
    assert to_json_text(0.1) == "0.10000000000000001"
    assert to_json_text(float("nan")) == '"NaN"'
    assert json.loads(to_json_text({"x": [1, 2.5], "y": None}))["x"] == [1, 2.5]


def test_module_entry_point():
    res = subprocess.run(
        [sys.executable, "-m", "typical_worlds", "distribution", "--builtin", "sec9"],
        capture_output=True,
        text=True,
        check=False,
    )
    assert res.returncode == 0 and json.loads(res.stdout)["config"]["builtin"] == "sec9"


def test_battery_from_scenario_file(capsys):
    from pathlib import Path

    path = Path(__file__).parent / "data" / "sec10_x.json"
    rc, out, _ = run_cli(capsys, "battery", "--scenario", str(path), "--n", "100000")
    rep = json.loads(out)
    assert rc == 0
    assert {t["name"] for t in rep["battery"]["tests"]} == {"frequency", "block_frequency", "runs", "serial"}
    assert rep["config"]["seed"] == 5 and rep["config"]["n"] == 100000
    assert rep["version"] and rep["generator"]


def test_bb84_key_rate_example(capsys):
    rc, out, _ = run_cli(capsys, "bb84", "--p", "0.5", "--n", "100000", "--seed", "7")
    rep = json.loads(out)
    assert rc == 0
    assert abs(rep["kept_key_rate"] - 0.25) <= 5 * (0.25 * 0.75 / 1e5) ** 0.5
    assert rep["config"] == {**rep["config"], "p": 0.5, "eve": False, "seed": 7, "n": 100000}
