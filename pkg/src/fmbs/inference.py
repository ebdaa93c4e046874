"""
Standard errors, information criteria and parametric bootstrap for FM-BS fits.

Free parameters are ordered (p_1..p_{G-1}, alpha_1..alpha_G, beta_1..beta_G);
p_G = 1 - sum of the others is not a coordinate.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
import math
from typing import NamedTuple
import warnings

import numpy as np
from scipy import special

from .em import EmConfig, FitResult, _log_joint, _validate_data, fit
from .errors import DomainError, InitializationWarning, NumericalError, SingularInformationError
from .mixture import mix_sample

__all__ = [
    "parameter_names",
    "score_vectors",
    "score_vector",
    "info_matrix",
    "standard_errors",
    "wald_ci",
    "aic_bic",
    "replicate_rng",
    "BootstrapSE",
    "bootstrap_se",
    "BootstrapTestResult",
    "bootstrap_p_value",
    "bootstrap_lrt",
]

MAX_FAILURE_FRACTION = 0.10


def parameter_names(G):
    """Labels of the free coordinates, e.g. ``['p1', 'alpha1', 'alpha2', 'beta1', 'beta2']``."""
    return ([f"p{j + 1}" for j in range(G - 1)] + [f"alpha{j + 1}" for j in range(G)]
            + [f"beta{j + 1}" for j in range(G)])


def score_vectors(data, params):
    """Per-observation gradients of log f(y_i) with respect to the free parameters.

    Returns an (n, 3G-1) array.  With f_j the component densities and
    a = a_y(alpha_j, beta_j):

        d/dp_j     = (f_j - f_G) / f
        d/dalpha_j = z_j (a^2 - 1) / alpha_j
        d/dbeta_j  = z_j [1/(y + beta_j) - 1/(2 beta_j) + a (sqrt(y/beta_j) + sqrt(beta_j/y)) / (2 alpha_j beta_j)]

    where z_j = p_j f_j / f.
    """
    y = _validate_data(data)
    w, a, b = params.weights, params.alphas, params.betas
    g = w.size
    with np.errstate(divide="ignore"):
        log_comp = _log_joint(y, np.ones(g), a, b)        # log f_j
        log_mix = special.logsumexp(log_comp + np.log(w), axis=1, keepdims=True)
    ratio = np.exp(log_comp - log_mix)                    # f_j / f
    resp = ratio * w
    yy = y[:, None]
    r = np.sqrt(yy / b)
    a_y = (r - 1.0 / r) / a
    s_alpha = resp * (a_y * a_y - 1.0) / a
    s_beta = resp * (1.0 / (yy + b) - 0.5 / b + a_y * (r + 1.0 / r) / (2.0 * a * b))
    s_p = ratio[:, :-1] - ratio[:, -1:]
    return np.concatenate([s_p, s_alpha, s_beta], axis=1)


def score_vector(y, params):
    """Score of a single observation ``y`` (length 3G-1)."""
    return score_vectors(np.array([float(y)]), params)[0]


def info_matrix(data, params, centered="auto"):
    """Empirical information sum_i s_i s_i^T.

    With ``centered=True`` the term n^-1 S S^T (S = sum_i s_i) is subtracted, which
    matters away from the MLE.  ``"auto"`` centres only when ||S|| > 1e-4 n.
    """
    s = score_vectors(data, params)
    info = s.T @ s
    n = s.shape[0]
    total = s.sum(axis=0)
    if centered == "auto":
        centered = np.linalg.norm(total) > 1e-4 * n
    if centered:
        info = info - np.outer(total, total) / n
    return 0.5 * (info + info.T)


def standard_errors(info, rcond=1e-13):
    """sqrt(diag(info^-1)).

    Raises :class:`SingularInformationError` (with the smallest eigenvalue and
    condition number) when ``info`` is not numerically positive definite.
    """
    info = np.atleast_2d(np.asarray(info, dtype=float))
    if info.shape[0] != info.shape[1]:
        raise DomainError("information matrix must be square")
    if not np.all(np.isfinite(info)):
        raise SingularInformationError("information matrix has non-finite entries")
    eig = np.linalg.eigvalsh(0.5 * (info + info.T))
    lo, hi = float(eig[0]), float(eig[-1])
    if hi <= 0 or lo <= rcond * hi:
        cond = math.inf if lo <= 0 else hi / lo
        raise SingularInformationError(
            f"information matrix is singular (smallest eigenvalue {lo:.3e})",
            min_eigenvalue=lo, max_eigenvalue=hi, condition=cond)
    cov = np.linalg.inv(info)
    return np.sqrt(np.diag(cov))


def wald_ci(estimates, ses, level=0.95):
    """Rows (lower, upper) = estimate -/+ z_{(1+level)/2} se."""
    if not 0 < level < 1:
        raise DomainError("level must lie in (0, 1)")
    est = np.asarray(estimates, dtype=float)
    half = special.ndtri(0.5 * (1.0 + level)) * np.asarray(ses, dtype=float)
    return np.stack([est - half, est + half], axis=-1)


def aic_bic(loglik, n_params, n_obs):
    """(AIC, BIC) = (-2 l + 2 rho, -2 l + rho log n)."""
    if n_obs < 1:
        raise DomainError("n_obs must be at least 1")
    dev = -2.0 * loglik
    return dev + 2.0 * n_params, dev + n_params * math.log(n_obs)


def replicate_rng(seed, b):
    """Independent generator for bootstrap replicate ``b`` of master ``seed``.

    Depends only on (seed, b), so results do not depend on execution order.
    """
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(b,)))


def _quiet_fit(y, g, config):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", InitializationWarning)
        warnings.simplefilter("ignore", RuntimeWarning)
        return fit(y, g, config)


def _se_replicate(args):
    b, seed, params, n, config = args
    y = mix_sample(n, params, replicate_rng(seed, b))
    try:
        return _quiet_fit(y, params.n_components, config).params.theta()
    except (NumericalError, DomainError):
        return None


def _lrt_replicate(args):
    b, seed, params, n, g_null, g_alt, config = args
    y = mix_sample(n, params, replicate_rng(seed, b))
    try:
        l0 = _quiet_fit(y, g_null, config).loglik
        l1 = _quiet_fit(y, g_alt, config).loglik
    except (NumericalError, DomainError):
        return None
    return -2.0 * (l0 - l1)


def _map(func, tasks, workers):
    if workers is None or workers <= 1:
        return [func(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def _check_failures(failed, B):
    if failed > MAX_FAILURE_FRACTION * B:
        raise NumericalError(f"{failed} of {B} bootstrap refits failed", failed=failed, B=B)


class BootstrapSE(NamedTuple):
    ses: np.ndarray
    cis: np.ndarray          # (3G-1, 2) percentile intervals
    draws: np.ndarray        # successful replicate estimates, one row each
    n_failed: int


def bootstrap_se(data, fitted, B, seed=0, config=None, level=0.95, workers=None):
    """Parametric bootstrap standard errors and percentile intervals.

    B samples of size n are drawn from ``fitted.params`` and refitted with
    ``config`` (default: the fit's own config).  Components of each refit are
    sorted by beta.  Up to 10% failed refits are skipped.
    """
    if B < 50:
        raise DomainError("B must be at least 50")
    y = _validate_data(data)
    config = config or fitted.config
    params = fitted.params
    tasks = [(b, seed, params, y.size, config) for b in range(B)]
    out = _map(_se_replicate, tasks, workers)
    draws = np.array([t for t in out if t is not None])
    failed = B - draws.shape[0]
    _check_failures(failed, B)
    tail = 50.0 * (1.0 - level)
    cis = np.percentile(draws, [tail, 100.0 - tail], axis=0).T
    return BootstrapSE(draws.std(axis=0, ddof=1), cis, draws, failed)


@dataclass
class BootstrapTestResult:
    stat_obs: float
    stats_boot: np.ndarray
    p_value: float
    B: int
    seed: int
    n_floored: int = 0
    n_failed: int = 0
    g_null: int = 1
    g_alt: int = 2
    null_fit: FitResult | None = None
    alt_fit: FitResult | None = None

    def to_dict(self):
        return {"stat_obs": self.stat_obs, "p_value": self.p_value, "B": self.B,
                "seed": self.seed, "g_null": self.g_null, "g_alt": self.g_alt,
                "n_floored": self.n_floored, "n_failed": self.n_failed,
                "stats_boot": self.stats_boot.tolist()}


def bootstrap_p_value(stat_obs, stats_boot):
    """(1 + #{stats_boot >= stat_obs}) / (B + 1)."""
    stats_boot = np.asarray(stats_boot, dtype=float)
    return (1.0 + np.count_nonzero(stats_boot >= stat_obs)) / (stats_boot.size + 1.0)


def bootstrap_lrt(data, g_null, g_alt, B, config=None, seed=0, workers=None):
    """Parametric bootstrap likelihood-ratio test of g_null against g_alt components.

    Replicates are simulated from the fitted null model.  Negative statistics
    (alternative fit worse than the null fit) are floored at 0 and counted in
    ``n_floored``; failed refits are dropped (at most 10% of B).
    """
    g_null, g_alt = int(g_null), int(g_alt)
    if not g_alt > g_null >= 1:
        raise DomainError("need g_alt > g_null >= 1")
    if B < 19:
        raise DomainError("B must be at least 19")
    config = config or EmConfig()
    y = _validate_data(data)
    null_fit = _quiet_fit(y, g_null, config)
    alt_fit = _quiet_fit(y, g_alt, config)
    stat_obs = max(-2.0 * (null_fit.loglik - alt_fit.loglik), 0.0)
    tasks = [(b, seed, null_fit.params, y.size, g_null, g_alt, config) for b in range(B)]
    out = _map(_lrt_replicate, tasks, workers)
    stats = np.array([s for s in out if s is not None])
    failed = B - stats.size
    _check_failures(failed, B)
    floored = int(np.count_nonzero(stats < 0))
    stats = np.maximum(stats, 0.0)
    return BootstrapTestResult(
        stat_obs=float(stat_obs), stats_boot=stats, p_value=float(bootstrap_p_value(stat_obs, stats)),
        B=B, seed=seed, n_floored=floored, n_failed=failed, g_null=g_null, g_alt=g_alt,
        null_fit=null_fit, alt_fit=alt_fit)
