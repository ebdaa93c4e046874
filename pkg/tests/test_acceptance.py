"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v -s``; the summary is also
printed at the end of any pytest session that collects these tests.
"""
import time
import warnings

import numpy as np
from scipy import stats

from fmbs.bs import BsParams, bs_moment, bs_sample
from fmbs.em import fit
from fmbs.errors import InitializationWarning
from fmbs.inference import aic_bic, bootstrap_lrt, score_vector
from fmbs.initialization import kbumps_partition
from fmbs.mixture import (MixtureParams, hazard_limit, mix_cdf, mix_hazard, mix_median, mix_modes,
                          mix_moment, mix_pdf, mix_sample, mix_stationary_points, mix_survival,
                          stress_strength)
from fmbs.study import SCENARIO_1, SCENARIO_2, run_cell

from oracles import fd_score, random_interior_point, score_rel_error

REFERENCE_MODES = [
    ((0.2, 0.5, 0.75, 3, 7), [2.8649], 5.7670),
    ((0.3, 0.5, 0.75, 3, 7), [2.6698], 5.1786),
    ((0.4, 0.5, 0.75, 3, 7), [2.5521], 4.6549),
    ((0.2, 0.25, 0.35, 3, 7), [2.9756, 3.9871], 6.2635),
    ((0.3, 0.25, 0.35, 3, 7), [2.8938, 4.5233], 5.7541),
    ((0.4, 0.25, 0.35, 3, 7), [2.8625, 4.9819], 5.0735),
]


def random_g2(rng):
    w = rng.uniform(0.1, 0.9)
    return w, rng.uniform(0.1, 2.0, 2), rng.uniform(0.1, 10.0, 2)


def test_c01_modes_and_medians(criterion):
    t0 = time.perf_counter()
    bad = []
    for theta, modes, median in REFERENCE_MODES:
        p = MixtureParams.from_theta(theta)
        got = np.asarray(mix_modes(p))
        ok = len(got) == len(modes) and np.all(np.abs(got - modes) <= 1e-3)
        ok &= abs(mix_median(p) - median) <= 1e-3
        if not ok:
            bad.append(f"{theta}: modes {np.round(got, 4).tolist()} vs {modes}")
    dt = time.perf_counter() - t0
    criterion(1, not bad and dt < 5, f"{6 - len(bad)}/6 rows match; " + "; ".join(bad))


def test_reference_modes_are_stationary_points():
    # second values of the bimodal rows are the density's interior minimum
    for theta, modes, median in REFERENCE_MODES:
        p = MixtureParams.from_theta(theta)
        pts = mix_stationary_points(p)
        for k, m in enumerate(modes):
            y, kind = min(pts, key=lambda s: abs(s[0] - m))
            assert abs(y - m) <= 1e-3
            assert kind == ("max" if k == 0 else "min")


def test_c02_aic_bic(criterion):
    aic, bic = aic_bic(-54.2027, 5, 245)
    criterion(2, f"{aic:.4f}" == "118.4054" and f"{bic:.4f}" == "135.9117",
              f"AIC={aic:.4f} BIC={bic:.4f}")


def test_c03_ecm_ascent(criterion):
    t0 = time.perf_counter()
    converged = 0
    worst = 0.0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        g = int(rng.integers(1, 4))
        n = int(rng.integers(50, 501))
        w = np.maximum(rng.dirichlet(np.full(g, 3.0)), 0.1)
        w /= w.sum()
        a = rng.uniform(0.1, 0.6, g)
        b = np.cumprod(np.r_[rng.uniform(0.5, 2.0), rng.uniform(2.5, 5.0, g - 1)])
        y = mix_sample(n, MixtureParams(w, a, b), rng)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", InitializationWarning)
            res = fit(y, g)
        steps = np.diff(res.loglik_trace)
        worst = min(worst, steps.min(initial=0.0))
        converged += res.converged
    dt = time.perf_counter() - t0
    criterion(3, worst >= -1e-10 and converged >= 95 and dt < 120,
              f"worst step {worst:.2e}, {converged}/100 converged, {dt:.0f}s")


def test_c04_score(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(50):
        y, theta, g = random_interior_point(rng)
        s = score_vector(y, MixtureParams.from_theta(theta))
        worst = max(worst, score_rel_error(s, fd_score(y, theta, g)).max())
    dt = time.perf_counter() - t0
    criterion(4, worst <= 1e-6 and dt < 5, f"max rel. error {worst:.2e}, {dt:.1f}s")


def test_c05_moments(criterion):
    t0 = time.perf_counter()
    cases = [MixtureParams.single(0.5, 2.0), SCENARIO_1.truth, SCENARIO_2.truth]
    closed, mc = 0.0, 0.0
    for k, p in enumerate(cases):
        w, a, b = p.weights, p.alphas, p.betas
        m1 = np.sum(w * b * (1 + a ** 2 / 2))
        m2 = np.sum(w * b ** 2 * (1 + 2 * a ** 2 + 1.5 * a ** 4))
        closed = max(closed, abs(mix_moment(1, p) / m1 - 1), abs(mix_moment(2, p) / m2 - 1))
        y = mix_sample(10_000_000, p, np.random.default_rng(500 + k))
        mc = max(mc, abs(y.mean() / m1 - 1), abs(np.mean(y * y) / m2 - 1))
    bs = BsParams(0.5, 2.0)
    closed = max(closed, abs(bs_moment(1, bs) / 2.25 - 1),
                 abs(bs_moment(2, bs) / (4 * (1 + 0.5 + 1.5 * 0.0625)) - 1))
    x = bs_sample(10_000_000, bs, np.random.default_rng(499))
    mc = max(mc, abs(x.mean() / 2.25 - 1))
    dt = time.perf_counter() - t0
    criterion(5, closed <= 1e-10 and mc <= 3e-3 and dt < 30,
              f"closed-form rel. {closed:.1e}, Monte Carlo rel. {mc:.2e}, {dt:.0f}s")


def test_c06_scenario2_recovery(criterion):
    t0 = time.perf_counter()
    rep = run_cell(SCENARIO_2, 1000, 200, "kbumps", seed=0)
    dt = time.perf_counter() - t0
    within = np.abs(rep.mean - rep.truth) <= 2 * rep.mc_sd
    se_ratio = rep.mean_im_se / rep.mc_sd
    ok = (within.all() and np.all(np.abs(se_ratio - 1) <= 0.25)
          and np.all((rep.cov >= 0.90) & (rep.cov <= 0.98)) and dt < 600)
    criterion(6, ok, f"IM SE / MC sd {np.round(se_ratio, 3).tolist()}, "
                     f"COV {np.round(rep.cov, 3).tolist()}, failed {rep.n_failed}, {dt:.0f}s")


def test_c07_hazard_limits(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(77)
    worst = 0.0
    for case in ("lt", "eq", "gt"):
        done = 0
        while done < 10:
            w, a, b = random_g2(rng)
            k = a * a * b
            if case == "eq":
                a[1] = a[0] * np.sqrt(b[0] / b[1])
                if not 0.1 <= a[1] <= 2.0:
                    continue
            elif (case == "lt") != (k[0] < k[1]):
                continue
            p = MixtureParams([w, 1 - w], a, b)
            worst = max(worst, abs(mix_hazard(1e8, p) / hazard_limit(p) - 1))
            done += 1
    dt = time.perf_counter() - t0
    criterion(7, worst <= 0.01 and dt < 10, f"max rel. gap {worst:.2e} over 30 mixtures")


def test_c08_kbumps_determinism(criterion):
    t0 = time.perf_counter()
    y = mix_sample(300, SCENARIO_1.truth, np.random.default_rng(8))
    part0 = kbumps_partition(y, 2)
    fit0 = fit(y, 2)
    same = 0
    for _ in range(100):
        part = kbumps_partition(y.copy(), 2)
        res = fit(y.copy(), 2)
        same += (np.array_equal(part.labels, part0.labels) and res.params == fit0.params
                 and np.array_equal(res.loglik_trace, fit0.loglik_trace))
    dt = time.perf_counter() - t0
    criterion(8, same == 100 and dt < 60, f"{same}/100 identical, {dt:.0f}s")


def test_c09_lrt_size(criterion):
    t0 = time.perf_counter()
    truth = MixtureParams.single(0.5, 1.0)
    rejected = 0
    for trial in range(20):
        y = mix_sample(200, truth, np.random.default_rng(9000 + trial))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", InitializationWarning)
            res = bootstrap_lrt(y, 1, 2, 99, seed=trial)
        rejected += res.p_value <= 0.05
    dt = time.perf_counter() - t0
    criterion(9, rejected <= 3 and dt < 900, f"{rejected}/20 rejected at 0.05, {dt:.0f}s")


def test_c10_stress_strength(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(10)
    worst = 0.0
    for _ in range(10):
        g = int(rng.integers(1, 4))
        w = np.maximum(rng.dirichlet(np.full(g, 2.0)), 0.05)
        p = MixtureParams(w / w.sum(), rng.uniform(0.1, 1.5, g), rng.uniform(0.2, 10, g))
        worst = max(worst, abs(stress_strength(p, p) - 0.5))
    px, py = BsParams(0.5, 2.0), BsParams(0.5, 1.0)
    r = stress_strength(MixtureParams.single(0.5, 2.0), MixtureParams.single(0.5, 1.0))
    mc_rng = np.random.default_rng(1010)
    hits = bs_sample(10_000_000, py, mc_rng) < bs_sample(10_000_000, px, mc_rng)
    r_mc = hits.mean()
    z = abs(r - r_mc) / np.sqrt(r_mc * (1 - r_mc) / hits.size)
    dt = time.perf_counter() - t0
    criterion(10, worst <= 1e-6 and z <= 3 and dt < 120,
              f"symmetry gap {worst:.1e}, R={r:.6f} vs MC {r_mc:.6f} ({z:.2f} SE)")


def test_c11_transform_invariants(criterion):
    rng = np.random.default_rng(11)
    scale_err = recip_err = 0.0
    for _ in range(20):
        g = int(rng.integers(1, 4))
        w = np.maximum(rng.dirichlet(np.full(g, 2.0)), 0.05)
        p = MixtureParams(w / w.sum(), rng.uniform(0.1, 1.5, g), rng.uniform(0.2, 10, g))
        y = rng.uniform(0.05, 20, 10)
        c = rng.uniform(0.1, 10)
        lhs = mix_pdf(y, p)
        rhs = c * mix_pdf(c * y, MixtureParams(p.weights, p.alphas, c * p.betas))
        scale_err = max(scale_err, np.max(np.abs(lhs / rhs - 1)))
        inv = MixtureParams(p.weights, p.alphas, 1 / p.betas)
        cdf = mix_cdf(y, p)
        recip_err = max(recip_err, np.max(np.abs(mix_survival(1 / y, inv) / cdf - 1)))
    b = 2.5
    same_beta = MixtureParams([0.3, 0.7], [0.3, 0.9], [b, b])
    y1 = mix_sample(1_000_000, same_beta, np.random.default_rng(111))
    y2 = mix_sample(1_000_000, same_beta, np.random.default_rng(112))
    ks = stats.ks_2samp(b / y1, y2 / b).pvalue
    criterion(11, scale_err <= 1e-12 and recip_err <= 1e-10 and ks > 0.01,
              f"scaling {scale_err:.1e}, reciprocal {recip_err:.1e}, KS p={ks:.3f}")
