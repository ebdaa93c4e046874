import math

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal
import pytest

from fmbs.em import EmConfig, fit
from fmbs.errors import DomainError, SingularInformationError
from fmbs.inference import (aic_bic, bootstrap_lrt, bootstrap_p_value, bootstrap_se,
                            info_matrix, parameter_names, replicate_rng, score_vector,
                            score_vectors, standard_errors, wald_ci)
from fmbs.mixture import MixtureParams, mix_sample

from oracles import fd_score, random_interior_point, score_rel_error

SCEN2 = MixtureParams.from_theta([0.8, 0.25, 0.25, 1.0, 5.0])


def test_parameter_names():
    assert parameter_names(1) == ["alpha1", "beta1"]
    assert parameter_names(2) == ["p1", "alpha1", "alpha2", "beta1", "beta2"]


def test_score_against_finite_differences():
    rng = np.random.default_rng(0)
    for _ in range(200):
        y, theta, g = random_interior_point(rng)
        s = score_vector(y, MixtureParams.from_theta(theta))
        assert s.shape == (3 * g - 1,)
        assert np.all(score_rel_error(s, fd_score(y, theta, g)) <= 1e-6)


def test_score_against_mpmath():
    mp = pytest.importorskip("mpmath")
    mp.mp.dps = 50

    def logf(y, th, g):
        p = list(th[:g - 1]) + [1 - sum(th[:g - 1])]
        a, b = th[g - 1:2 * g - 1], th[2 * g - 1:]
        tot = 0
        for j in range(g):
            aj = (mp.sqrt(y / b[j]) - mp.sqrt(b[j] / y)) / a[j]
            big_a = y ** mp.mpf(-1.5) * (y + b[j]) / (2 * a[j] * mp.sqrt(b[j]))
            tot += p[j] * mp.npdf(aj) * big_a
        return mp.log(tot)

    rng = np.random.default_rng(1)
    for _ in range(5):
        p = MixtureParams([0.3, 0.5, 0.2], rng.uniform(0.1, 2, 3), rng.uniform(0.1, 10, 3))
        y = float(rng.uniform(0.1, 12))
        th = [mp.mpf(float(v)) for v in p.theta()]
        ref = np.array([float(mp.diff(lambda x, i=i: logf(mp.mpf(y), th[:i] + [x] + th[i + 1:], 3), th[i]))
                        for i in range(len(th))])
        s = score_vector(y, p)
        assert np.all(np.abs(ref - s) <= 1e-12 * np.maximum(np.abs(ref), 1e-3 * np.abs(ref).max()))


def test_score_identical_components():
    p = MixtureParams([0.3, 0.7], [0.5, 0.5], [2.0, 2.0])
    s = score_vectors(np.geomspace(0.1, 20, 40), p)
    assert_array_equal(s[:, 0], 0.0)


def test_score_sums_to_zero_at_mle():
    y = mix_sample(800, SCEN2, np.random.default_rng(2))
    res = fit(y, 2, EmConfig(tol=1e-12))
    total = score_vectors(y, res.params).sum(axis=0)
    assert np.all(np.abs(total) < 1e-5 * y.size)


def test_info_matrix_properties():
    y = mix_sample(800, SCEN2, np.random.default_rng(3))
    res = fit(y, 2)
    info = info_matrix(y, res.params)
    assert_array_equal(info, info.T)
    assert np.all(np.linalg.eigvalsh(info) > 0)
    one = info_matrix(y[:1], res.params, centered=False)
    assert np.linalg.matrix_rank(one) == 1
    g1 = info_matrix(y, MixtureParams.single(0.5, 2.0))
    assert g1.shape == (2, 2) and g1[0, 1] == g1[1, 0]


def test_info_matrix_centering():
    y = mix_sample(300, SCEN2, np.random.default_rng(4))
    off = MixtureParams.from_theta([0.6, 0.4, 0.2, 1.3, 4.0])
    s = score_vectors(y, off)
    total = s.sum(axis=0)
    assert_allclose(info_matrix(y, off), s.T @ s - np.outer(total, total) / y.size, rtol=1e-12)
    assert_allclose(info_matrix(y, off, centered=False), s.T @ s, rtol=1e-12)


def test_standard_errors():
    assert_allclose(standard_errors(np.diag([4.0, 25.0])), [0.5, 0.2], rtol=1e-15)
    with pytest.raises(SingularInformationError) as err:
        standard_errors(np.array([[1.0, 1.0], [1.0, 1.0]]))
    assert "min_eigenvalue" in err.value.diagnostics


def test_wald_ci():
    ci = wald_ci([1.0, 2.0], [0.1, 0.5], 0.95)
    assert_allclose(ci[:, 1] - [1.0, 2.0], 1.959964 * np.array([0.1, 0.5]), rtol=1e-6)
    assert_allclose(ci[:, 0] + ci[:, 1], [2.0, 4.0])
    with pytest.raises(DomainError):
        wald_ci([1.0], [0.1], 1.0)


def test_aic_bic():
    aic, bic = aic_bic(-54.2027, 5, 245)
    assert round(aic, 4) == 118.4054
    assert round(bic, 4) == 135.9117
    assert aic_bic(-10.0, 0, 50) == (20.0, 20.0)
    aic, bic = aic_bic(-3.0, 4, math.exp(2))
    assert_allclose(bic - aic, 0.0, atol=1e-12)


def test_im_se_matches_monte_carlo_sd():
    truth = MixtureParams.single(0.25, 1.0)
    betas = []
    for r in range(500):
        y = mix_sample(5000, truth, replicate_rng(99, r))
        betas.append(fit(y, 1).params.betas[0])
    y = mix_sample(5000, truth, replicate_rng(100, 0))
    se = standard_errors(info_matrix(y, fit(y, 1).params))
    assert abs(se[1] / np.std(betas, ddof=1) - 1) < 0.15


def test_replicate_rng_independent_of_order():
    a = [replicate_rng(7, b).random() for b in range(5)]
    b = [replicate_rng(7, b).random() for b in reversed(range(5))]
    assert a == b[::-1]
    assert len(set(a)) == 5


def test_bootstrap_se_deterministic_and_concentrated():
    y = mix_sample(100, MixtureParams.single(0.3, 2.0), np.random.default_rng(5))
    res = fit(y, 1)
    a = bootstrap_se(y, res, 50, seed=3)
    b = bootstrap_se(y, res, 50, seed=3)
    assert_array_equal(a.ses, b.ses)
    assert_array_equal(a.cis, b.cis)
    assert np.all(a.cis[:, 0] < res.params.theta()) and np.all(res.params.theta() < a.cis[:, 1])
    tight = mix_sample(20000, MixtureParams.single(1e-3, 2.0), np.random.default_rng(6))
    ses = bootstrap_se(tight, fit(tight, 1), 50, seed=1).ses
    assert np.all(ses < 1e-4)
    with pytest.raises(DomainError):
        bootstrap_se(y, res, 10)


def test_bootstrap_se_scenario2():
    y = mix_sample(500, SCEN2, np.random.default_rng(7))
    res = fit(y, 2)
    boot = bootstrap_se(y, res, 200, seed=11)
    assert abs(boot.ses[0] / 0.0179 - 1) < 0.30
    assert boot.n_failed == 0


def test_p_value_convention():
    assert bootstrap_p_value(10.0, np.arange(9.0)) == 0.1
    assert bootstrap_p_value(0.0, np.abs(np.random.default_rng(0).normal(size=19))) == 1.0
    assert bootstrap_p_value(3.0, [3.0, 1.0, 5.0]) == 0.75


def test_bootstrap_lrt_contract():
    y = mix_sample(60, MixtureParams.single(0.4, 1.0), np.random.default_rng(8))
    res = bootstrap_lrt(y, 1, 2, 19, seed=4)
    assert res.B == 19 and res.stats_boot.size + res.n_failed == 19
    assert 1 / 20 <= res.p_value <= 1
    assert np.all(res.stats_boot >= 0) and res.stat_obs >= 0
    again = bootstrap_lrt(y, 1, 2, 19, seed=4)
    assert_array_equal(res.stats_boot, again.stats_boot)
    assert res.to_dict()["p_value"] == res.p_value
    with pytest.raises(DomainError):
        bootstrap_lrt(y, 2, 2, 19)
    with pytest.raises(DomainError):
        bootstrap_lrt(y, 1, 2, 10)


def test_bootstrap_lrt_workers_match_serial():
    y = mix_sample(45, MixtureParams.single(0.4, 1.0), np.random.default_rng(9))
    serial = bootstrap_lrt(y, 1, 2, 19, seed=2)
    pooled = bootstrap_lrt(y, 1, 2, 19, seed=2, workers=2)
    assert_array_equal(serial.stats_boot, pooled.stats_boot)
    assert serial.p_value == pooled.p_value
