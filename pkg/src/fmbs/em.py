"""
ECM maximum-likelihood fitting of FM-BS mixtures.

One ECM cycle is

1. E-step: responsibilities z_ij = p_j f_j(y_i) / f(y_i).
2. CM-step 1 (beta fixed): p_j = sum_i z_ij / n and
   alpha_j^2 = sum_i z_ij a_{y_i}(1, beta_j)^2 / sum_i z_ij.
3. CM-step 2 (p, alpha fixed): each beta_j maximizes
   sum_i z_ij [-log(beta)/2 + log(y_i + beta) - a_{y_i}(alpha_j, beta)^2 / 2]
   with a bounded Brent search.

Iteration stops with Aitken's accelerated criterion |l_{k+1} - l_inf| < tol.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy import special

from .errors import DegenerateComponentError, DomainError, NumericalError
from .initialization import InitStrategy, Partition, make_partition, moment_init, quantile_partition
from .mixture import MixtureParams

__all__ = [
    "EmConfig",
    "FitResult",
    "loglik",
    "e_step",
    "cm_step1",
    "cm_step2",
    "beta_objective",
    "aitken_stop",
    "convergence_rate",
    "ecm_cycle",
    "fit",
    "fit_from_params",
]

ALPHA_FLOOR = 1e-6
DEGENERATE_MASS = 1e-10
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_GOLDEN = 0.5 * (3.0 - math.sqrt(5.0))


@dataclass(frozen=True)
class EmConfig:
    """Settings for :func:`fit`.

    ``alpha_from_bump_mode`` makes the k-bumps start recover each alpha from
    the bump maximum through the mode relation instead of modified moments.
    """

    tol: float = 1e-6
    max_iter: int = 2000
    init: InitStrategy = InitStrategy.KBUMPS
    seed: int = 0
    beta_bracket_factor: float = 4.0
    alpha_from_bump_mode: bool = False

    def __post_init__(self):
        if not self.tol > 0:
            raise DomainError("tol must be positive")
        if int(self.max_iter) < 1:
            raise DomainError("max_iter must be at least 1")
        if not self.beta_bracket_factor > 1:
            raise DomainError("beta_bracket_factor must exceed 1")
        object.__setattr__(self, "init", InitStrategy(self.init))
        object.__setattr__(self, "max_iter", int(self.max_iter))


@dataclass
class FitResult:
    """Outcome of an ECM run.

    ``loglik_trace[k]`` and ``theta_trace[k]`` are the log-likelihood and the
    free parameter vector after k cycles (index 0 is the starting point).  The
    last entry belongs to a closing E-step + CM-step 1 at the final betas, so
    both traces have ``iterations + 2`` rows.  Components of ``params`` are sorted by beta; trace columns follow the
    same order.
    """

    params: MixtureParams
    loglik: float
    loglik_trace: np.ndarray
    theta_trace: np.ndarray
    iterations: int
    converged: bool
    rate_r: float | None
    n_obs: int
    init_params: MixtureParams
    partition: Partition | None = None
    restarted: bool = False
    config: EmConfig = field(default_factory=EmConfig)

    @property
    def n_components(self):
        return self.params.n_components

    @property
    def n_params(self):
        return 3 * self.params.n_components - 1


def _validate_data(data):
    y = np.asarray(data, dtype=float).reshape(-1)
    if y.size == 0:
        raise DomainError("data is empty")
    if np.any(~np.isfinite(y)) or np.any(y <= 0):
        raise DomainError("data must contain positive finite values only")
    return y


def _log_joint(y, w, a, b):
    # log p_j + log f_j(y_i), shape (n, G)
    yy = y[:, None]
    r = np.sqrt(yy / b)
    a2 = ((r - 1.0 / r) / a) ** 2
    with np.errstate(divide="ignore"):
        logw = np.log(w)
    return (logw - np.log(2.0 * a * np.sqrt(b)) - _LOG_SQRT_2PI
            + np.log(yy + b) - 1.5 * np.log(yy) - 0.5 * a2)


def _responsibilities(log_joint):
    peak = log_joint.max(axis=1, keepdims=True)
    peak[~np.isfinite(peak)] = 0.0
    resp = np.exp(log_joint - peak)
    total = resp.sum(axis=1, keepdims=True)
    resp /= total
    return resp, float(np.sum(np.log(total) + peak))


def loglik(data, params):
    """Observed-data log-likelihood sum_i log f(y_i), via log-sum-exp."""
    y = _validate_data(data)
    lj = _log_joint(y, params.weights, params.alphas, params.betas)
    return float(special.logsumexp(lj, axis=1).sum())


def e_step(data, params):
    """Posterior membership probabilities, an (n, G) array whose rows sum to one."""
    y = _validate_data(data)
    return _responsibilities(_log_joint(y, params.weights, params.alphas, params.betas))[0]


def _check_mass(mass):
    for j, m in enumerate(mass):
        if not m >= DEGENERATE_MASS:
            raise DegenerateComponentError(j, float(m))


def cm_step1(data, resp, betas):
    """Closed-form updates of (alphas, weights) with the betas held fixed.

    Raises :class:`DegenerateComponentError` when a component's posterior mass
    falls below 1e-10.  Shapes are floored at 1e-6.
    """
    y = _validate_data(data)
    resp = np.asarray(resp, dtype=float)
    betas = np.asarray(betas, dtype=float)
    mass = resp.sum(axis=0)
    _check_mass(mass)
    alpha2 = _alpha2(y, 1.0 / y, resp, betas, mass)
    alphas = np.sqrt(np.maximum(alpha2, ALPHA_FLOOR ** 2))
    weights = mass / y.size
    return alphas, weights / weights.sum()


def beta_objective(beta, data, resp_j, alpha_j):
    """The beta-dependent part of the Q-function for one component."""
    y = np.asarray(data, dtype=float)
    z = np.asarray(resp_j, dtype=float)
    r = np.sqrt(y / beta)
    return float(-0.5 * z.sum() * math.log(beta) + z @ np.log(y + beta)
                 - z @ (r - 1.0 / r) ** 2 / (2.0 * alpha_j ** 2))


def _brent_max(f, lo, hi, x0, rtol=1e-10, max_iter=200):
    """Maximize a univariate function on [lo, hi] by golden-section search with
    parabolic interpolation (Brent), starting from the interior point x0."""
    a, b = lo, hi
    x = w = v = x0
    fx = fw = fv = -f(x0)
    d = e = 0.0
    for _ in range(max_iter):
        m = 0.5 * (a + b)
        tol1 = rtol * abs(x) + 1e-300
        tol2 = 2.0 * tol1
        if abs(x - m) <= tol2 - 0.5 * (b - a):
            break
        use_golden = True
        if abs(e) > tol1:
            r = (x - w) * (fx - fv)
            q = (x - v) * (fx - fw)
            p = (x - v) * q - (x - w) * r
            q = 2.0 * (q - r)
            if q > 0:
                p = -p
            q = abs(q)
            if abs(p) < abs(0.5 * q * e) and q * (a - x) < p < q * (b - x):
                e, d = d, p / q
                u = x + d
                if u - a < tol2 or b - u < tol2:
                    d = tol1 if x < m else -tol1
                use_golden = False
        if use_golden:
            e = (b - x) if x < m else (a - x)
            d = _GOLDEN * e
        u = x + d if abs(d) >= tol1 else x + (tol1 if d > 0 else -tol1)
        fu = -f(u)
        if fu <= fx:
            if u < x:
                b = x
            else:
                a = x
            v, fv, w, fw, x, fx = w, fw, x, fx, u, fu
        else:
            if u < x:
                a = u
            else:
                b = u
            if fu <= fw or w == x:
                v, fv, w, fw = w, fw, u, fu
            elif fu <= fv or v == x or v == w:
                v, fv = u, fu
    return x, -fx


def _maximize_beta(y, z, alpha, beta_prev, factor, bounds, rtol=1e-10):
    mass = z.sum()
    s1 = z @ y
    s_inv = z @ (1.0 / y)
    inv2a2 = 1.0 / (2.0 * alpha * alpha)

    if alpha >= 1e-2:
        def q(beta):
            return (-0.5 * mass * math.log(beta) + z @ np.log(y + beta)
                    - (s1 / beta + beta * s_inv - 2.0 * mass) * inv2a2)
    else:
        # y/beta + beta/y - 2 cancels badly when alpha is tiny and y ~ beta
        def q(beta):
            r = np.sqrt(y / beta)
            return (-0.5 * mass * math.log(beta) + z @ np.log(y + beta)
                    - z @ (r - 1.0 / r) ** 2 * inv2a2)

    lo_bound, hi_bound = bounds
    q_prev = q(beta_prev)
    width = factor
    for _ in range(5):
        lo = max(beta_prev / width, lo_bound)
        hi = min(beta_prev * width, hi_bound)
        x0 = beta_prev if lo < beta_prev < hi else lo + _GOLDEN * (hi - lo)
        x, fx = _brent_max(q, lo, hi, x0, rtol)
        at_lo = x - lo <= 4 * rtol * x and lo > lo_bound
        at_hi = hi - x <= 4 * rtol * x and hi < hi_bound
        if not (at_lo or at_hi):
            break
        width *= factor
    else:
        raise NumericalError("beta search kept hitting the bracket edge",
                             beta_prev=beta_prev, last=x, bracket=(lo, hi))
    if fx < q_prev:
        return beta_prev
    return x


def _beta_bounds(y):
    return float(y.min()) / 10.0, float(y.max()) * 10.0


def cm_step2(data, resp, alphas, weights, betas_prev, bracket_factor=4.0, bounds=None):
    """Maximize the Q-function over each beta_j with p and alpha held fixed.

    The search runs on [beta_prev / f, beta_prev * f] (clipped to ``bounds``,
    by default [min(y)/10, 10 max(y)]) and widens geometrically up to f^5 when
    the optimum sits on the bracket edge.  A component whose posterior mass is
    below 1e-10 keeps its previous beta.  ``weights`` do not enter the beta
    objective; the argument is kept for a uniform CM-step signature.
    """
    y = _validate_data(data)
    resp = np.asarray(resp, dtype=float)
    alphas = np.asarray(alphas, dtype=float)
    betas_prev = np.asarray(betas_prev, dtype=float)
    bounds = _beta_bounds(y) if bounds is None else bounds
    new = betas_prev.copy()
    for j in range(betas_prev.size):
        z = resp[:, j]
        if z.sum() < DEGENERATE_MASS:
            continue
        start = min(max(betas_prev[j], bounds[0]), bounds[1])
        new[j] = _maximize_beta(y, z, alphas[j], start, bracket_factor, bounds)
    return new


def aitken_stop(l_prev2, l_prev, l_curr, tol):
    """Aitken-accelerated stopping rule.

    c = (l_curr - l_prev) / (l_prev - l_prev2), l_inf = l_prev + (l_curr - l_prev) / (1 - c),
    stop when |l_curr - l_inf| < tol.  When c is undefined or c >= 1 the plain
    rule |l_curr - l_prev| < tol is used and ``l_inf`` is returned as ``l_curr``.
    """
    num = l_curr - l_prev
    den = l_prev - l_prev2
    if den != 0 and math.isfinite(den) and abs(den) > 1e-300:
        c = num / den
        if c < 1 and math.isfinite(c):
            l_inf = l_prev + num / (1.0 - c)
            return abs(l_curr - l_inf) < tol, l_inf
    return abs(num) < tol, l_curr


def convergence_rate(trace, window=3):
    """Mean of ||theta_{t+1} - theta_t|| / ||theta_t - theta_{t-1}|| over the last ``window`` ratios.

    Returns None for fewer than three parameter vectors; a ratio whose
    denominator vanishes counts as 0.
    """
    trace = np.asarray(trace, dtype=float)
    if trace.ndim != 2 or trace.shape[0] < 3:
        return None
    steps = np.linalg.norm(np.diff(trace, axis=0), axis=1)
    ratios = []
    for t in range(max(1, steps.size - window), steps.size):
        den = steps[t - 1]
        scale = 1e-300 + 1e-15 * np.linalg.norm(trace[t])
        ratios.append(0.0 if den <= scale else steps[t] / den)
    return float(np.mean(ratios))


def _theta(w, a, b):
    return np.concatenate([w[:-1], a, b])


def ecm_cycle(data, params, config=None):
    """One E-step + CM-step 1 + CM-step 2 from ``params``; returns the new params."""
    config = config or EmConfig()
    y = _validate_data(data)
    resp = e_step(y, params)
    alphas, weights = cm_step1(y, resp, params.betas)
    betas = cm_step2(y, resp, alphas, weights, params.betas, config.beta_bracket_factor)
    return MixtureParams(weights, alphas, betas)


def _alpha2(y, inv_y, resp, b, mass):
    alpha2 = (y @ resp / b + b * (inv_y @ resp) - 2.0 * mass) / mass
    small = alpha2 < 1e-4
    if np.any(small):
        # exact sum of squares where the expanded form loses its digits
        r = np.sqrt(y[:, None] / b[small])
        alpha2[small] = np.sum(resp[:, small] * (r - 1.0 / r) ** 2, axis=0) / mass[small]
    return alpha2


def _cm1(y, inv_y, resp, b):
    mass = resp.sum(axis=0)
    _check_mass(mass)
    alpha2 = _alpha2(y, inv_y, resp, b, mass)
    w = mass / y.size
    return w / w.sum(), np.sqrt(np.maximum(alpha2, ALPHA_FLOOR ** 2))


def _run(y, start, config):
    bounds = _beta_bounds(y)
    w = start.weights.copy()
    a = np.maximum(start.alphas, ALPHA_FLOOR)
    b = np.clip(start.betas, *bounds)
    inv_y = 1.0 / y
    resp, ll = _responsibilities(_log_joint(y, w, a, b))
    lls = [ll]
    thetas = [_theta(w, a, b)]
    converged = False
    for _ in range(config.max_iter):
        w, a = _cm1(y, inv_y, resp, b)
        b = np.array([_maximize_beta(y, resp[:, j], a[j], b[j],
                                     config.beta_bracket_factor, bounds)
                      for j in range(b.size)])
        resp, ll = _responsibilities(_log_joint(y, w, a, b))
        if not math.isfinite(ll):
            raise NumericalError("log-likelihood is not finite", iteration=len(lls))
        lls.append(ll)
        thetas.append(_theta(w, a, b))
        if len(lls) >= 3 and aitken_stop(lls[-3], lls[-2], lls[-1], config.tol)[0]:
            converged = True
            break
    cycles = len(lls) - 1
    # closing E-step + CM-step 1 so that (p, alpha) are optimal at the returned betas
    w, a = _cm1(y, inv_y, resp, b)
    resp, ll = _responsibilities(_log_joint(y, w, a, b))
    lls.append(ll)
    thetas.append(_theta(w, a, b))
    return MixtureParams(w, a, b), np.array(lls), np.array(thetas), converged, cycles


def _canonical_start(params):
    return params.sorted_by_beta()


def _finish(y, start, config, partition, restarted):
    params, lls, thetas, converged, cycles = _run(y, start, config)
    g = params.n_components
    order = np.argsort(params.betas, kind="stable")
    params = params.permuted(order)
    if g > 1:
        w_full = np.concatenate([thetas[:, :g - 1], 1.0 - thetas[:, :g - 1].sum(axis=1, keepdims=True)],
                                axis=1)
        a_cols = thetas[:, g - 1:2 * g - 1]
        b_cols = thetas[:, 2 * g - 1:]
        thetas = np.concatenate([w_full[:, order][:, :g - 1], a_cols[:, order], b_cols[:, order]], axis=1)
    return FitResult(
        params=params,
        loglik=float(lls[-1]),
        loglik_trace=lls,
        theta_trace=thetas,
        iterations=cycles,
        converged=converged,
        rate_r=convergence_rate(thetas[:-1]),
        n_obs=y.size,
        init_params=start,
        partition=partition,
        restarted=restarted,
        config=config,
    )


def fit_from_params(data, start, config=None):
    """Run ECM from explicit starting parameters (no restart on degeneracy)."""
    config = config or EmConfig()
    y = _validate_data(data)
    return _finish(y, _canonical_start(start), config, None, False)


def fit(data, G, config=None, partition=None):
    """Fit a G-component FM-BS by ECM.

    The start comes from ``partition`` if given, otherwise from the strategy in
    ``config.init`` (seeded by ``config.seed`` for k-means/k-medoids).  If a
    component degenerates the fit is restarted once from the quantile split;
    a second degeneracy is raised with diagnostics.  Requires n >= 3G.
    """
    config = config or EmConfig()
    y = _validate_data(data)
    g = int(G)
    if g < 1:
        raise DomainError("G must be at least 1")
    if y.size < 3 * g:
        raise DomainError(f"need at least 3G = {3 * g} observations, got {y.size}")
    if partition is None:
        rng = np.random.default_rng(config.seed)
        partition = make_partition(y, g, config.init, rng)
    elif partition.n_components != g or partition.labels.size != y.size:
        raise DomainError("partition does not match the data and G")
    modes = None
    if config.alpha_from_bump_mode and partition.strategy == InitStrategy.KBUMPS.value \
            and not partition.fallback:
        modes = partition.centers
    try:
        start = _canonical_start(moment_init(y, partition, modes))
        return _finish(y, start, config, partition, False)
    except DegenerateComponentError as first:
        fallback = quantile_partition(y, g)
        if fallback == partition:
            raise
        start = _canonical_start(moment_init(y, fallback))
        try:
            return _finish(y, start, config, fallback, True)
        except DegenerateComponentError as second:
            raise DegenerateComponentError(
                second.component, second.mass, first_component=first.component,
                first_mass=first.mass, n=y.size, G=g) from second
