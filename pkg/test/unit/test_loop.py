import math

import numpy as np
import pytest

import lpmink
import lpmink.global_ as lpmink_

from lpmink.constant import EXIT_SUCCESS, MODE_SPECIAL, SUBCOMMANDS
from lpmink.loop import (
    LOOPS,
    distribute,
    eigen_summary,
    ellipse_matrix,
    history_rows,
    loop_build_counterexample,
    loop_eigen,
    loop_second_variation,
    loop_verify_pohozaev,
    refinement_levels,
    run_check,
)
from lpmink.print_ import NumericalError


@pytest.fixture
def deck():
    lpmink.reset_cards()
    yield lpmink_.input_deck
    lpmink.reset_cards()


# =============================================================================
# Work distribution
# =============================================================================


@pytest.mark.parametrize("workers", [1, 3, 7, 100, None])
def test_distribute_keeps_item_order(workers):
    assert distribute(lambda x: x * x, range(10), workers) == [x * x for x in range(10)]


def test_distribute_empty():
    assert distribute(lambda x: x, [], 4) == []


def test_distribute_reraises_first_failure():
    def func(x):
        if x == 2:
            raise ValueError("two")
        if x == 5:
            raise NumericalError("five")
        return x

    with pytest.raises(ValueError, match="two"):
        distribute(func, range(8), 3)


def test_distribute_does_not_catch_other_errors():
    with pytest.raises(ZeroDivisionError):
        distribute(lambda x: 1 / x, [1, 0], 2)


# =============================================================================
# Helpers
# =============================================================================


def test_ellipse_matrix():
    for n in (1, 2):
        M = ellipse_matrix(n, 1.3)
        assert M.shape == (n + 1, n + 1)
        assert math.isclose(np.linalg.det(M), 1.0)
        assert M[0, 0] == 1.3


def test_refinement_levels():
    assert refinement_levels(192) == [48, 96, 192]
    assert refinement_levels(32) == [8, 16, 32]
    assert refinement_levels(24) == [12, 24]


def test_history_rows():
    history = np.arange(16, dtype=np.float64).reshape(2, 8)
    rows = history_rows(history)
    assert rows["iteration"].tolist() == [0, 8]
    assert rows["eig_min"].tolist() == [7.0, 15.0]


def test_run_check_records_failure():
    def check_broken():
        raise NumericalError("no convergence")

    entries = run_check(check_broken)
    assert len(entries) == 1
    assert not entries[0]["passed"]
    assert entries[0]["name"] == "check_broken"
    assert entries[0]["error"] == "no convergence"


def test_loops_cover_subcommands():
    assert set(LOOPS) == set(SUBCOMMANDS)


# =============================================================================
# Drivers
# =============================================================================


def test_eigen_summary():
    s = eigen_summary(2, MODE_SPECIAL, 6, resolution=32)
    assert s["group_order"] == 12
    assert s["group_closed"]
    assert s["mu1"] == 3
    assert s["lambda1"] == 12.0
    assert s["dims_by_degree"]["1"] == 0
    assert s["dims_by_degree"]["2"] == 0
    assert s["degree_two_rank"] == 3
    assert np.allclose(s["degree_two_null_vector"], [1.0, 1.0, 1.0, -1.0])
    witness = s["witness"]
    assert witness["harmonic"]
    assert witness["invariance_error"] <= 1e-12
    assert math.isclose(witness["rayleigh_quotient"], 12.0, rel_tol=1e-8)


def test_loop_eigen(deck):
    lpmink.setting(subcommand="eigen")
    lpmink.grid(n=1, resolution=128)
    result = loop_eigen(deck)
    assert result.status == EXIT_SUCCESS
    assert result.summary["lambda1"] == 9.0
    assert result.tables == {}


def test_loop_verify_pohozaev(deck):
    lpmink.setting(subcommand="verify-pohozaev", workers=2)
    lpmink.grid(n=1, resolution=128)
    lpmink.problem(p=-4.0)
    lpmink.identity(N_field=4)
    result = loop_verify_pohozaev(deck)
    s = result.summary
    assert len(s["integral"]) == 4
    assert len(s["pf"]) == 4
    assert s["grid_resolution"] == 128
    assert s["max_abs_integral"] <= 1e-10
    assert s["max_abs_beta_integral"] <= 1e-10
    assert result.tables["refinement"]["resolution"].tolist() == [32, 64, 128]
    assert result.arrays["h/values"].size == 128


def test_loop_build_counterexample_critical(deck):
    lpmink.setting(subcommand="build-counterexample")
    lpmink.grid(n=1, resolution=192)
    lpmink.problem(p=-2.0)
    lpmink.weight(kind="critical")
    result = loop_build_counterexample(deck)
    assert result.status == EXIT_SUCCESS
    assert result.summary["identity_error"] <= 1e-9
    assert result.summary["certificate"]["certified"]
    assert result.tables["certificate"].size == 192


def test_loop_build_counterexample_radial(deck):
    lpmink.setting(subcommand="build-counterexample")
    lpmink.grid(n=1, resolution=192)
    lpmink.problem(p=-4.0)
    result = loop_build_counterexample(deck)
    s = result.summary
    assert result.status == EXIT_SUCCESS
    assert s["kind"] == "radial"
    assert s["ode_residual"] <= 1e-8
    assert abs(s["limit"] - s["expected_limit"]) <= 1e-4
    assert "radial" in result.tables


def test_loop_second_variation(deck):
    lpmink.setting(subcommand="second-variation")
    lpmink.grid(n=1, resolution=128)
    lpmink.problem(p=-8.0)
    s = loop_second_variation(deck).summary
    assert s["threshold"] == -7.0
    assert s["eigenfunction_degree"] == 3
    assert s["second_variation"] < 0.0
    assert not s["stable"]
    assert s["below_threshold"] < 0.0 < s["above_threshold"]
    assert s["relative_gap"] <= 1e-3
