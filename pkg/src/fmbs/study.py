"""
Monte Carlo studies: simulate from a known mixture, refit, and summarise
bias, RMSE, Monte Carlo sd, mean information-based SE and Wald coverage.

Every cell (scenario, n, strategy) draws from its own seed, derived from the
master seed and the cell key, and every replicate inside a cell from its own
stream.  Reordering or subsetting a grid therefore leaves each cell unchanged.
"""

import csv
from dataclasses import dataclass, field, replace
import io
import json
import warnings
import zlib

import numpy as np

from .em import EmConfig, fit
from .errors import DomainError, InitializationWarning, NumericalError
from .inference import info_matrix, parameter_names, standard_errors, wald_ci
from .initialization import InitStrategy
from .mixture import MixtureParams, mix_sample

__all__ = [
    "Scenario",
    "SCENARIO_1",
    "SCENARIO_2",
    "SimulationReport",
    "match_by_beta",
    "cell_seed",
    "run_cell",
    "run_grid",
    "reports_to_csv",
    "reports_to_json",
]

UNRELIABLE_FRACTION = 0.10


@dataclass(frozen=True)
class Scenario:
    truth: MixtureParams
    label: str
    separation: str = "WS"

    def __post_init__(self):
        if self.separation not in ("PS", "WS"):
            raise DomainError("separation must be 'PS' or 'WS'")


SCENARIO_1 = Scenario(MixtureParams.from_theta([0.6, 0.25, 0.5, 0.5, 1.5]), "scenario1", "PS")
SCENARIO_2 = Scenario(MixtureParams.from_theta([0.8, 0.25, 0.25, 1.0, 5.0]), "scenario2", "WS")


@dataclass
class SimulationReport:
    """Aggregates of one simulation cell; arrays are indexed like ``names``."""

    scenario: str
    n: int
    replicates: int
    strategy: str
    seed: int
    names: list
    truth: np.ndarray
    mean: np.ndarray
    bias: np.ndarray
    rmse: np.ndarray
    mc_sd: np.ndarray
    mean_im_se: np.ndarray
    cov: np.ndarray
    n_failed: int = 0
    n_se_failed: int = 0
    unreliable: bool = False
    mean_iterations: float = float("nan")
    estimates: np.ndarray = field(default=None, repr=False)

    def rows(self):
        for k, name in enumerate(self.names):
            yield {
                "scenario": self.scenario, "n": self.n, "strategy": self.strategy,
                "replicates": self.replicates, "parameter": name,
                "truth": self.truth[k], "mean": self.mean[k], "bias": self.bias[k],
                "rmse": self.rmse[k], "mc_sd": self.mc_sd[k],
                "mean_im_se": self.mean_im_se[k], "cov": self.cov[k],
                "failed": self.n_failed, "unreliable": self.unreliable,
            }

    def to_dict(self):
        return {
            "scenario": self.scenario, "n": self.n, "replicates": self.replicates,
            "strategy": self.strategy, "seed": self.seed, "n_failed": self.n_failed,
            "n_se_failed": self.n_se_failed, "unreliable": self.unreliable,
            "mean_iterations": self.mean_iterations,
            "parameters": {name: {key: float(getattr(self, key)[k]) for key in
                                  ("truth", "mean", "bias", "rmse", "mc_sd", "mean_im_se", "cov")}
                           for k, name in enumerate(self.names)},
        }


def match_by_beta(fitted, truth):
    """Reorder ``fitted`` so component j is the one whose beta is closest to truth's beta_j.

    Pairs are taken greedily by increasing |beta difference|, so the result
    is always a permutation.
    """
    g = truth.n_components
    if fitted.n_components != g:
        raise DomainError("fitted and true mixtures differ in G")
    dist = np.abs(fitted.betas[:, None] - truth.betas[None, :])
    order = np.empty(g, dtype=np.intp)
    used_f, used_t = set(), set()
    for flat in np.argsort(dist, axis=None, kind="stable"):
        i, j = divmod(int(flat), g)
        if i in used_f or j in used_t:
            continue
        order[j] = i
        used_f.add(i)
        used_t.add(j)
    return fitted.permuted(order)


def cell_seed(seed, scenario, n, strategy):
    """Seed of one cell, a function of the master seed and the cell key only."""
    key = f"{scenario.label}|{int(n)}|{InitStrategy(strategy).value}".encode()
    return int(np.random.SeedSequence([int(seed), zlib.crc32(key)]).generate_state(1, np.uint64)[0] >> 1)


def _default_fitter(y, g, config):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", InitializationWarning)
        return fit(y, g, config)


def run_cell(scenario, n, replicates, strategy=InitStrategy.KBUMPS, config=None, seed=0,
             fitter=None, level=0.95):
    """Simulate, refit and aggregate one (scenario, n, strategy) cell.

    ``fitter(y, G, config)`` must return an object with a ``params`` attribute
    (defaults to :func:`fit`).  Failed fits are excluded and counted; more than
    10% failures flags the cell ``unreliable``.  Coverage uses the Wald
    intervals of :func:`wald_ci` built from the information-based SEs.
    """
    if replicates < 10:
        raise DomainError("replicates must be at least 10")
    strategy = InitStrategy(strategy)
    config = replace(config or EmConfig(), init=strategy)
    fitter = fitter or _default_fitter
    truth = scenario.truth
    g = truth.n_components
    theta0 = truth.theta()
    cseed = cell_seed(seed, scenario, n, strategy)
    estimates, ses, covered, iters = [], [], [], []
    failed = se_failed = 0
    for r in range(replicates):
        ss = np.random.SeedSequence(cseed, spawn_key=(r,))
        data_ss, fit_ss = ss.spawn(2)
        y = mix_sample(n, truth, np.random.default_rng(data_ss))
        rep_config = replace(config, seed=int(fit_ss.generate_state(1)[0]))
        try:
            result = fitter(y, g, rep_config)
        except (NumericalError, DomainError):
            failed += 1
            continue
        est = match_by_beta(result.params, truth)
        theta = est.theta()
        estimates.append(theta)
        iters.append(getattr(result, "iterations", np.nan))
        try:
            se = standard_errors(info_matrix(y, est))
        except NumericalError:
            se_failed += 1
            continue
        ses.append(se)
        ci = wald_ci(theta, se, level)
        covered.append((ci[:, 0] <= theta0) & (theta0 <= ci[:, 1]))
    est = np.array(estimates).reshape(-1, theta0.size)
    m = est.shape[0]
    nan = np.full(theta0.size, np.nan)
    if m:
        err = est - theta0
        mean = est.mean(axis=0)
        bias = err.mean(axis=0)
        rmse = np.sqrt(np.mean(err * err, axis=0))
        mc_sd = est.std(axis=0, ddof=1) if m > 1 else nan
    else:
        mean = bias = rmse = mc_sd = nan
    return SimulationReport(
        scenario=scenario.label, n=int(n), replicates=int(replicates), strategy=strategy.value,
        seed=cseed, names=parameter_names(g), truth=theta0, mean=mean, bias=bias, rmse=rmse,
        mc_sd=mc_sd,
        mean_im_se=np.mean(ses, axis=0) if ses else nan,
        cov=np.mean(covered, axis=0) if covered else nan,
        n_failed=failed, n_se_failed=se_failed,
        unreliable=failed > UNRELIABLE_FRACTION * replicates,
        mean_iterations=float(np.mean(iters)) if iters else float("nan"),
        estimates=est,
    )


def run_grid(scenarios, ns, strategies, replicates, config=None, seed=0, fitter=None):
    """All cells of scenarios x ns x strategies, in that nesting order."""
    return [run_cell(sc, n, replicates, st, config, seed, fitter)
            for sc in scenarios for n in ns for st in strategies]


_CSV_FIELDS = ["scenario", "n", "strategy", "replicates", "parameter", "truth", "mean", "bias",
               "rmse", "mc_sd", "mean_im_se", "cov", "failed", "unreliable"]


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".10g")
    return str(v)


def reports_to_csv(reports, fh=None):
    """Write one CSV row per cell and parameter; returns the text when ``fh`` is None."""
    out = io.StringIO() if fh is None else fh
    writer = csv.writer(out, lineterminator="\r\n")
    writer.writerow(_CSV_FIELDS)
    for rep in reports:
        for row in rep.rows():
            writer.writerow([_fmt(row[k]) for k in _CSV_FIELDS])
    return out.getvalue() if fh is None else None


def reports_to_json(reports):
    return json.dumps({"schema": 1, "cells": [r.to_dict() for r in reports]}, indent=2)
