import csv
import io
import json
from types import SimpleNamespace

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal
import pytest

from fmbs.errors import DomainError, NumericalError
from fmbs.mixture import MixtureParams
from fmbs.study import (SCENARIO_1, SCENARIO_2, Scenario, cell_seed, match_by_beta,
                        reports_to_csv, reports_to_json, run_cell, run_grid)


def truth_fitter(scenario):
    return lambda y, g, config: SimpleNamespace(params=scenario.truth, iterations=0)


def test_match_by_beta():
    truth = SCENARIO_2.truth
    swapped = MixtureParams([0.2, 0.8], [0.3, 0.2], [4.0, 1.1])
    m = match_by_beta(swapped, truth)
    assert_array_equal(m.betas, [1.1, 4.0])
    assert_array_equal(m.weights, [0.8, 0.2])
    # both fitted betas closest to the same true beta: still a permutation
    m = match_by_beta(MixtureParams([0.5, 0.5], [0.2, 0.2], [0.9, 1.2]), truth)
    assert sorted(m.betas) == [0.9, 1.2]
    with pytest.raises(DomainError):
        match_by_beta(MixtureParams.single(0.2, 1.0), truth)


def test_truth_fitter_gives_zero_error():
    rep = run_cell(SCENARIO_2, 200, 20, fitter=truth_fitter(SCENARIO_2))
    assert_array_equal(rep.bias, 0.0)
    assert_array_equal(rep.rmse, 0.0)
    assert_allclose(rep.mc_sd, 0.0, atol=1e-15)
    assert_array_equal(rep.cov, 1.0)
    assert_allclose(rep.mean, SCENARIO_2.truth.theta())
    assert rep.n_failed == 0 and not rep.unreliable


def test_rmse_decomposition():
    rep = run_cell(SCENARIO_2, 150, 30, seed=3)
    m = rep.estimates.shape[0]
    assert_allclose(rep.rmse ** 2, rep.bias ** 2 + rep.mc_sd ** 2 * (m - 1) / m, atol=1e-10)
    assert np.all((rep.cov >= 0) & (rep.cov <= 1))


def test_unreliable_flag():
    calls = {"k": 0}

    def flaky(y, g, config):
        calls["k"] += 1
        if calls["k"] % 5 == 0:
            raise NumericalError("forced")
        return SimpleNamespace(params=SCENARIO_1.truth, iterations=1)

    rep = run_cell(SCENARIO_1, 100, 20, fitter=flaky)
    assert rep.n_failed == 4 and rep.unreliable
    assert rep.estimates.shape == (16, 5)
    calls["k"] = 1   # fails on call 4, 9, ...: 2 of 10
    assert run_cell(SCENARIO_1, 100, 10, fitter=flaky).unreliable
    ok = run_cell(SCENARIO_1, 100, 10, fitter=truth_fitter(SCENARIO_1))
    assert not ok.unreliable


def test_minimum_replicates():
    with pytest.raises(DomainError):
        run_cell(SCENARIO_1, 100, 5)


def test_seed_determinism_and_grid_independence():
    a = run_cell(SCENARIO_1, 80, 10, "kmeans", seed=9)
    b = run_cell(SCENARIO_1, 80, 10, "kmeans", seed=9)
    assert_array_equal(a.estimates, b.estimates)
    assert run_cell(SCENARIO_1, 80, 10, "kmeans", seed=10).seed != a.seed
    grid = run_grid([SCENARIO_1], [80], ["kbumps", "kmeans"], 10, seed=9)
    flipped = run_grid([SCENARIO_1], [80], ["kmeans", "kbumps"], 10, seed=9)
    assert_array_equal(grid[1].estimates, a.estimates)
    assert_array_equal(flipped[0].estimates, a.estimates)
    assert_array_equal(grid[0].estimates, flipped[1].estimates)


def test_cell_seed_depends_on_key_only():
    s = cell_seed(1, SCENARIO_1, 100, "kbumps")
    assert s == cell_seed(1, SCENARIO_1, 100, "kbumps")
    others = {cell_seed(1, SCENARIO_2, 100, "kbumps"), cell_seed(1, SCENARIO_1, 101, "kbumps"),
              cell_seed(1, SCENARIO_1, 100, "kmeans"), cell_seed(2, SCENARIO_1, 100, "kbumps")}
    assert s not in others and len(others) == 4


def test_exports():
    reps = [run_cell(SCENARIO_2, 100, 10, fitter=truth_fitter(SCENARIO_2)),
            run_cell(SCENARIO_1, 100, 10, fitter=truth_fitter(SCENARIO_1))]
    text = reports_to_csv(reps)
    assert text.count("\r\n") == 1 + 10
    rows = list(csv.DictReader(io.StringIO(text)))
    assert rows[0]["parameter"] == "p1" and float(rows[0]["truth"]) == 0.8
    assert rows[-1]["scenario"] == "scenario1" and rows[-1]["unreliable"] == "false"
    doc = json.loads(reports_to_json(reps))
    assert doc["schema"] == 1 and len(doc["cells"]) == 2
    assert doc["cells"][0]["parameters"]["beta2"]["truth"] == 5.0


def test_scenario_validation():
    with pytest.raises(DomainError):
        Scenario(SCENARIO_1.truth, "x", "neither")


def test_rmse_decreases_with_n():
    reps = run_grid([SCENARIO_1], [100, 500, 1000], ["kbumps"], 100, seed=1)
    rmse = np.array([r.rmse for r in reps])
    assert np.all(np.diff(rmse, axis=0) < 0)


@pytest.fixture(scope="module")
def small_n_grid():
    return run_grid([SCENARIO_1], [75], ["kbumps", "kmeans", "kmedoids"], 400, seed=0)


def test_kbumps_bias_competitive_at_small_n(small_n_grid):
    bias = [abs(r.bias[1]) for r in small_n_grid]
    assert bias[0] <= 1.5 * min(bias[1:])


def test_kbumps_beats_kmeans_at_small_n(small_n_grid):
    kb, km, _ = small_n_grid
    assert np.all(kb.rmse <= km.rmse)
    assert abs(kb.bias[1]) < abs(km.bias[1])
