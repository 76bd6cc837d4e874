import json, math, os

import h5py
import numba as nb
import numpy as np
import pytest

import lpmink
import lpmink.global_ as lpmink_

from lpmink.constant import EXIT_NUMERICAL, EXIT_SUCCESS, EXIT_VALIDATION, SCHEMA_VERSION
from lpmink.main import NEUTRAL_SETTINGS, dumps, main, result_config, write_csv


def quiet(tmp_path, *args):
    return list(args) + ["--out", str(tmp_path), "--no-hdf5", "--no-progress_bar"]


def load(path):
    with open(path) as f:
        return json.load(f)


# =============================================================================
# Command line
# =============================================================================


def test_no_subcommand():
    assert main([]) == EXIT_VALIDATION


def test_eigen(tmp_path):
    assert main(quiet(tmp_path, "eigen", "--n", "2")) == EXIT_SUCCESS
    data = load(tmp_path / "eigen.json")
    assert data["lambda1"] == 12
    assert data["mu1"] == 3
    assert data["status"] == EXIT_SUCCESS
    assert data["schema_version"] == SCHEMA_VERSION
    assert data["config"]["grid"]["n"] == 2
    assert data["config"]["grid"]["resolution"] == 32
    for key in NEUTRAL_SETTINGS:
        assert key not in data["config"]["setting"]


def test_output_name(tmp_path):
    assert main(quiet(tmp_path, "eigen", "--output", "planar")) == EXIT_SUCCESS
    assert load(tmp_path / "planar.json")["lambda1"] == 9


def test_config_file(tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"subcommand": "eigen", "grid": {"n": 1}, "symmetry": {"mode": "full"}}))
    assert main(quiet(tmp_path, "--config", str(config))) == EXIT_SUCCESS
    data = load(tmp_path / "eigen.json")
    assert data["lambda1"] == 9
    assert data["group_order"] == 6


def test_flags_override_config(tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"subcommand": "eigen", "grid": {"n": 1}}))
    assert main(quiet(tmp_path, "--config", str(config), "--n", "2")) == EXIT_SUCCESS
    assert load(tmp_path / "eigen.json")["lambda1"] == 12


def test_output_independent_of_workers(tmp_path):
    texts = []
    for workers in ("1", "2", "5"):
        out = tmp_path / workers
        args = ["verify-pohozaev", "--resolution", "48", "--p", "-4", "--workers", workers]
        assert main(quiet(out, *args)) == EXIT_SUCCESS
        texts.append((out / "verify-pohozaev.json").read_text())
        texts.append((out / "verify-pohozaev_refinement.csv").read_text())
    assert texts[0] == texts[2] == texts[4]
    assert texts[1] == texts[3] == texts[5]


def test_bifurcation_csv(tmp_path):
    args = ["bifurcation", "--p-low", "-7.5", "--p-high", "-6.5"]
    assert main(quiet(tmp_path, *args)) == EXIT_SUCCESS
    with open(tmp_path / "bifurcation_bifurcation.csv") as f:
        assert f.readline().strip() == "p,period_small,period_max,onset"
    assert abs(load(tmp_path / "bifurcation.json")["threshold"] + 7.0) <= 1e-3


def test_hdf5_output(tmp_path):
    args = ["eigen", "--n", "1", "--out", str(tmp_path), "--no-progress_bar"]
    assert main(args) == EXIT_SUCCESS
    with h5py.File(tmp_path / "eigen.h5", "r") as f:
        assert f["input_deck/grid/n"][()] == 1
        assert f["input_deck/setting/subcommand"][()].decode() == "eigen"
        assert "runtime/total" in f


# =============================================================================
# Exit codes
# =============================================================================


def test_validation_error_exits(tmp_path):
    # The shooting oracle is planar
    with pytest.raises(SystemExit) as error:
        main(quiet(tmp_path, "oracle", "--n", "2"))
    assert error.value.code == EXIT_VALIDATION
    with pytest.raises(SystemExit) as error:
        main(quiet(tmp_path, "minimize", "--p", "-0.5"))
    assert error.value.code == EXIT_VALIDATION
    with pytest.raises(SystemExit) as error:
        main(quiet(tmp_path, "eigen", "--resolution", "9"))
    assert error.value.code == EXIT_VALIDATION
    # The basis degree belongs to the minimizer
    with pytest.raises(SystemExit) as error:
        main(quiet(tmp_path, "eigen", "--L", "6"))
    assert error.value.code == EXIT_VALIDATION


def test_numerical_error_exit(tmp_path):
    # No onset inside the bracket
    args = ["bifurcation", "--p-low", "-6.5", "--p-high", "-6.0"]
    assert main(quiet(tmp_path, *args)) == EXIT_NUMERICAL
    assert not os.path.exists(tmp_path / "bifurcation.json")


# =============================================================================
# Output formatting
# =============================================================================


def test_dumps():
    text = dumps({"b": 1.0, "a": [float("nan"), np.bool_(True), None], "c": np.float64(0.1)})
    assert text == (
        '{\n  "a": [\n    null,\n    true,\n    null\n  ],\n'
        '  "b": 1.0,\n  "c": 0.1\n}\n'
    )
    assert json.loads(text)["c"] == 0.1


def test_dumps_round_trips_floats():
    values = [math.pi, 1e-300, -2.5e17, 1.0 / 3.0]
    assert json.loads(dumps({"x": np.array(values)}))["x"] == values
    assert dumps({}) == "{}\n"
    assert dumps({1: {"k": []}}) == '{\n  "1": {\n    "k": []\n  }\n}\n'


def test_dumps_escapes_strings():
    text = dumps({"name": 'a"b\n', "path": "\\", "tab": "tab\there"})
    assert json.loads(text) == {"name": 'a"b\n', "path": "\\", "tab": "tab\there"}
    assert '"a\\"b\\n"' in text


def test_write_csv(tmp_path):
    rows = np.zeros(2, dtype=[("resolution", np.int64), ("integral", np.float64), ("onset", np.bool_)])
    rows["resolution"] = [8, 16]
    rows["integral"] = [0.5, 0.25]
    rows["onset"] = [True, False]
    path = tmp_path / "rows.csv"
    write_csv(str(path), rows)
    assert path.read_text().splitlines() == ["resolution,integral,onset", "8,0.5,1", "16,0.25,0"]


def test_result_config():
    lpmink.reset_cards()
    config = result_config(lpmink_.input_deck)
    assert set(config) == {
        "setting",
        "grid",
        "problem",
        "symmetry",
        "pohozaev",
        "counterexample",
        "optimizer",
        "oracle",
    }
    assert set(config["setting"]) == {"tag", "subcommand", "seed"}
    assert config["problem"]["p"] == -8.0


def test_kernel_mode(tmp_path, kernel):
    assert nb.config.DISABLE_JIT == (kernel == "python")
    assert main(quiet(tmp_path, "eigen", "--kernel", kernel)) == EXIT_SUCCESS
    assert load(tmp_path / "eigen.json")["lambda1"] == 9
