"""
Finite mixtures of Birnbaum-Saunders distributions (FM-BS).

    f(y) = sum_j p_j f_BS(y; alpha_j, beta_j),   y > 0.

Parameters live in :class:`MixtureParams`, which stores the weights, shapes
and scales as read-only arrays.  Densities are assembled in log space so that
far-tail evaluations (hazard limits, responsibilities) do not underflow.
"""

from dataclasses import dataclass
import math
import warnings

import numpy as np
from scipy import integrate, optimize, special

from .bs import BsParams, bs_mode, bs_moment
from .errors import (DomainError, HazardUnderflowWarning, NumericalError,
                     UnsupportedConfigurationError)

__all__ = [
    "MixtureParams",
    "component_logpdf",
    "mix_logpdf",
    "mix_pdf",
    "mix_cdf",
    "mix_survival",
    "mix_log_survival",
    "mix_hazard",
    "hazard_limit",
    "mix_dlogpdf",
    "mix_stationary_points",
    "mix_modes",
    "mix_median",
    "mix_moment",
    "mix_sample",
    "stress_strength",
]

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def _readonly(x):
    x = np.array(x, dtype=float).reshape(-1)
    x.setflags(write=False)
    return x


@dataclass(frozen=True, eq=False)
class MixtureParams:
    """Weights ``p``, shapes ``alpha`` and scales ``beta`` of a G-component FM-BS.

    Weights must be non-negative and sum to one (within 1e-12).  Zero weights
    are accepted so that degenerate mixtures can be expressed; fitting never
    produces them.
    """

    weights: np.ndarray
    alphas: np.ndarray
    betas: np.ndarray

    def __post_init__(self):
        w, a, b = _readonly(self.weights), _readonly(self.alphas), _readonly(self.betas)
        if not (w.size == a.size == b.size) or w.size == 0:
            raise DomainError("weights, alphas and betas must have the same non-zero length")
        if np.any(~np.isfinite(w)) or np.any(w < 0):
            raise DomainError("weights must be finite and non-negative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise DomainError(f"weights must sum to 1 (sum is {w.sum()!r})")
        for x, name in ((a, "alpha"), (b, "beta")):
            if np.any(~np.isfinite(x)) or np.any(x <= 0):
                raise DomainError(f"every {name} must be positive and finite")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "alphas", a)
        object.__setattr__(self, "betas", b)

    @classmethod
    def from_components(cls, weights, components):
        components = list(components)
        return cls(weights, [c.alpha for c in components], [c.beta for c in components])

    @classmethod
    def from_theta(cls, theta):
        """Build from the free vector (p_1..p_{G-1}, alpha_1..alpha_G, beta_1..beta_G).

        For G = 2 this is the (p1, alpha1, alpha2, beta1, beta2) ordering used
        in the tables of the FM-BS literature.
        """
        theta = np.asarray(theta, dtype=float)
        if (theta.size + 1) % 3:
            raise DomainError("theta must have length 3G - 1")
        g = (theta.size + 1) // 3
        p = theta[:g - 1]
        return cls(np.append(p, 1.0 - p.sum()), theta[g - 1:2 * g - 1], theta[2 * g - 1:])

    @classmethod
    def single(cls, alpha, beta):
        return cls([1.0], [alpha], [beta])

    @property
    def n_components(self):
        return self.weights.size

    @property
    def components(self):
        return tuple(BsParams(a, b) for a, b in zip(self.alphas, self.betas))

    def theta(self):
        """Free parameter vector (p_1..p_{G-1}, alpha_1..alpha_G, beta_1..beta_G)."""
        return np.concatenate([self.weights[:-1], self.alphas, self.betas])

    def sorted_by_beta(self):
        order = np.argsort(self.betas, kind="stable")
        return self.permuted(order)

    def permuted(self, order):
        order = np.asarray(order)
        return MixtureParams(self.weights[order], self.alphas[order], self.betas[order])

    def __eq__(self, other):
        if not isinstance(other, MixtureParams):
            return NotImplemented
        return (np.array_equal(self.weights, other.weights)
                and np.array_equal(self.alphas, other.alphas)
                and np.array_equal(self.betas, other.betas))

    def __repr__(self):
        fmt = lambda v: "[" + ", ".join(f"{x:.6g}" for x in v) + "]"
        return (f"MixtureParams(weights={fmt(self.weights)}, alphas={fmt(self.alphas)}, "
                f"betas={fmt(self.betas)})")

    def to_dict(self):
        return {"weights": self.weights.tolist(), "alphas": self.alphas.tolist(),
                "betas": self.betas.tolist()}


def _positive(y):
    y = np.asarray(y, dtype=float)
    if np.any(~(y > 0)):
        raise DomainError("y must be strictly positive")
    return y


def _out(x):
    return x[()] if isinstance(x, np.ndarray) and x.ndim == 0 else x


def _a_components(y, params):
    # a_y(alpha_j, beta_j) with shape y.shape + (G,)
    r = np.sqrt(y[..., None] / params.betas)
    return (r - 1.0 / r) / params.alphas


def component_logpdf(y, params):
    """log f_j(y) for every component, shape ``y.shape + (G,)``."""
    y = _positive(y)
    a = _a_components(y, params)
    log_big_a = (np.log(y[..., None] + params.betas) - 1.5 * np.log(y)[..., None]
                 - np.log(2.0 * params.alphas * np.sqrt(params.betas)))
    with np.errstate(over="ignore"):   # a^2 -> inf is log density -inf
        return -0.5 * a * a - _LOG_SQRT_2PI + log_big_a


def _log_weights(params):
    with np.errstate(divide="ignore"):
        return np.log(params.weights)


def mix_logpdf(y, params):
    return _out(special.logsumexp(component_logpdf(y, params) + _log_weights(params), axis=-1))


def mix_pdf(y, params):
    return _out(np.exp(mix_logpdf(y, params)))


def mix_cdf(y, params):
    y = _positive(y)
    return _out(special.ndtr(_a_components(y, params)) @ params.weights)


def mix_log_survival(y, params):
    y = _positive(y)
    log_sf = special.log_ndtr(-_a_components(y, params))
    return _out(special.logsumexp(log_sf + _log_weights(params), axis=-1))


def mix_survival(y, params):
    y = _positive(y)
    return _out(special.ndtr(-_a_components(y, params)) @ params.weights)


def mix_hazard(y, params):
    """h(y) = f(y) / S(y), evaluated as exp(log f - log S).

    If the survival function underflows even in log space the hazard is
    reported as +inf and a :class:`HazardUnderflowWarning` is emitted.
    """
    log_f = np.asarray(mix_logpdf(y, params))
    log_s = np.asarray(mix_log_survival(y, params))
    with np.errstate(invalid="ignore", over="ignore"):
        h = np.exp(log_f - log_s)
    bad = np.isneginf(log_s)
    if np.any(bad):
        warnings.warn("survival function underflowed; hazard set to +inf",
                      HazardUnderflowWarning, stacklevel=2)
        h = np.where(bad, np.inf, h)
    return _out(h)


def hazard_limit(params):
    """lim_{y -> inf} h(y) for a two-component mixture."""
    if params.n_components != 2:
        raise UnsupportedConfigurationError("the hazard limit is only available for G = 2")
    p = params.weights[0]
    a1, a2 = params.alphas
    b1, b2 = params.betas
    k1, k2 = a1 * a1 * b1, a2 * a2 * b2
    if k2 < k1:
        return 1.0 / (2.0 * k1)
    if k2 > k1:
        return 1.0 / (2.0 * k2)
    log_ratio = 1.0 / a2 ** 2 - 1.0 / a1 ** 2 + math.log(a1 * math.sqrt(b1) / (a2 * math.sqrt(b2)))
    # d = p / (p + (1 - p) * ratio), without overflowing exp for small alphas
    d = special.expit(math.log(p) - math.log1p(-p) - log_ratio) if 0.0 < p < 1.0 else p
    return d / (2.0 * k1) + (1.0 - d) / (2.0 * k2)


def mix_dlogpdf(y, params):
    """d/dy log f(y), computed as the responsibility-weighted component slopes.

    For one component, d/dy log f_j = -a_y A_y - (y + 3 beta_j) / (2 y (y + beta_j)).
    Its sign is the sign of f'(y), which is what the mode search needs.
    """
    y = _positive(y)
    yy = y[..., None]
    b = params.betas
    r = np.sqrt(yy / b)
    a = (r - 1.0 / r) / params.alphas
    big_a = (yy + b) / (2.0 * params.alphas * np.sqrt(b) * yy ** 1.5)
    slope = -a * big_a - (yy + 3.0 * b) / (2.0 * yy * (yy + b))
    log_joint = component_logpdf(y, params) + _log_weights(params)
    resp = np.exp(log_joint - special.logsumexp(log_joint, axis=-1, keepdims=True))
    return _out(np.sum(resp * slope, axis=-1))


def _refine_sign_change(params, left, right, rising, rtol):
    while right - left > rtol * right:
        mid = 0.5 * (left + right)
        if (mix_dlogpdf(mid, params) > 0) == rising:
            left = mid
        else:
            right = mid
    return 0.5 * (left + right)


def mix_stationary_points(params, grid_size=4096, rtol=1e-10):
    """Roots of f'(y) = 0 as ``(location, kind)`` pairs, kind in {"max", "min"}.

    The grid spans (min component mode / 10, 10 max beta), log-spaced; each
    sign change of d/dy log f is refined by bisection to ``rtol`` relative width.
    """
    lo = min(bs_mode(c) for c in params.components) / 10.0
    hi = float(params.betas.max()) * 10.0
    grid = np.geomspace(lo, hi, grid_size)
    slope = mix_dlogpdf(grid, params)
    points = []
    for i in np.nonzero(np.sign(slope[:-1]) != np.sign(slope[1:]))[0]:
        if slope[i] == 0:
            continue
        rising = slope[i] > 0
        if slope[i + 1] == 0:
            y = float(grid[i + 1])
        else:
            y = _refine_sign_change(params, grid[i], grid[i + 1], rising, rtol)
        points.append((y, "max" if rising else "min"))
    return points


def mix_modes(params, grid_size=4096, rtol=1e-10):
    """All local maxima of the mixture density, ascending."""
    return [y for y, kind in mix_stationary_points(params, grid_size, rtol) if kind == "max"]


def mix_median(params):
    """Unique root of F(y) = 1/2; it lies between the smallest and largest beta."""
    lo, hi = float(params.betas.min()), float(params.betas.max())
    if lo == hi:
        return lo
    return optimize.brentq(lambda y: mix_cdf(y, params) - 0.5, lo, hi,
                           xtol=1e-15 * hi, rtol=4 * np.finfo(float).eps, maxiter=500)


def mix_moment(s, params):
    """E(Y^s) as the weighted sum of component moments."""
    return float(sum(w * bs_moment(s, c) for w, c in zip(params.weights, params.components)))


def mix_sample(n, params, rng, return_labels=False):
    """Draw ``n`` values: Z ~ Multinomial(1; p), then Y | Z = j ~ BS(alpha_j, beta_j).

    Labels are zero-based component indices.  All normal variates are drawn in
    one call, so a mixture with a single non-zero weight reproduces
    ``bs_sample`` for that component given the same generator state.
    """
    n = int(n)
    if n < 0:
        raise DomainError("n must be non-negative")
    g = params.n_components
    if g == 1 or np.count_nonzero(params.weights) == 1:
        labels = np.full(n, int(np.argmax(params.weights)))
    else:
        labels = rng.choice(g, size=n, p=params.weights)
    x = rng.normal(0.0, 1.0, size=n) * (0.5 * params.alphas[labels])
    root = np.sqrt(1.0 + x * x)
    w = np.where(x >= 0, x + root, 1.0 / (root - x))
    y = params.betas[labels] * (w * w)
    if return_labels:
        return y, labels
    return y


def _component_reliability(alpha_x, beta_x, alpha_y, beta_y, z_max, tol):
    # R_jl = int phi(a_x) Phi(a_x(alpha_y, beta_y)) A_x dx, after substituting z = a_x(alpha_x, beta_x)
    def integrand(z):
        az = alpha_x * z
        root = math.sqrt(az * az + 4.0)
        w = az + root if az >= 0 else 4.0 / (root - az)
        x = 0.25 * beta_x * w * w
        r = math.sqrt(x / beta_y)
        return math.exp(-0.5 * z * z - _LOG_SQRT_2PI) * special.ndtr((r - 1.0 / r) / alpha_y)

    # split at the point where the stress cdf is one half, which is where it varies fastest
    z_half = None
    r0 = math.sqrt(beta_y / beta_x)
    candidate = (r0 - 1.0 / r0) / alpha_x
    if -z_max < candidate < z_max:
        z_half = candidate
    points = [0.0] + ([z_half] if z_half is not None else [])
    value, abserr, info = integrate.quad(integrand, -z_max, z_max, points=sorted(set(points)),
                                         epsabs=tol, epsrel=1e-10, limit=500, full_output=True)[:3]
    if abserr > 10 * tol:
        raise NumericalError("stress-strength quadrature did not converge",
                             value=value, abserr=abserr, evaluations=info.get("neval"))
    return value


def stress_strength(params_x, params_y, tol=1e-9):
    """R = P(Y < X) for independent strength X and stress Y, both FM-BS.

    Each R_jl is integrated on the normal scale of the strength component,
    where the integrand is phi(z) times the stress cdf.  Tails beyond
    |z| = 7.5 carry less than 1e-13 of mass and are dropped.
    """
    z_max = 7.5
    total = 0.0
    for p, cx in zip(params_x.weights, params_x.components):
        for q, cy in zip(params_y.weights, params_y.components):
            if p == 0 or q == 0:
                continue
            total += p * q * _component_reliability(cx.alpha, cx.beta, cy.alpha, cy.beta, z_max, tol)
    return float(min(max(total, 0.0), 1.0))
