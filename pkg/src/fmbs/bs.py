"""
Single-component Birnbaum-Saunders (fatigue-life) distribution.

A positive random variable T ~ BS(alpha, beta) has cdf

    F(t) = Phi(a_t),   a_t = (sqrt(t/beta) - sqrt(beta/t)) / alpha,

and density phi(a_t) * A_t, where A_t = da_t/dt.  ``beta`` is the median and
``alpha`` the shape.  Every function accepts scalars or numpy arrays for the
evaluation point and returns the same shape.

The standard normal cdf, log-cdf and quantile come from ``scipy.special``
(``ndtr``, ``log_ndtr``, ``ndtri``).
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy import special

from .errors import DomainError

__all__ = [
    "BsParams",
    "a_fn",
    "capital_a_fn",
    "bs_pdf",
    "bs_logpdf",
    "bs_cdf",
    "bs_sf",
    "bs_logsf",
    "bs_quantile",
    "bs_sample",
    "bs_mode",
    "alpha_from_mode",
    "bs_pdf_mode_param",
    "bs_moment",
    "bs_mean",
    "bs_var",
    "bessel_k_ratio",
    "log_bs_pdf",
]

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class BsParams:
    """Shape ``alpha`` and scale ``beta`` (the median) of one BS law."""

    alpha: float
    beta: float

    def __post_init__(self):
        a, b = float(self.alpha), float(self.beta)
        if not (math.isfinite(a) and a > 0):
            raise DomainError(f"alpha must be positive and finite, got {self.alpha!r}")
        if not (math.isfinite(b) and b > 0):
            raise DomainError(f"beta must be positive and finite, got {self.beta!r}")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", b)


def _positive(t, name="t"):
    t = np.asarray(t, dtype=float)
    if np.any(~(t > 0)):
        raise DomainError(f"{name} must be strictly positive")
    return t


def _out(x):
    return x[()] if isinstance(x, np.ndarray) and x.ndim == 0 else x


def a_fn(t, params):
    """a_t(alpha, beta) = (sqrt(t/beta) - sqrt(beta/t)) / alpha."""
    t = _positive(t)
    r = np.sqrt(t / params.beta)
    return _out((r - 1.0 / r) / params.alpha)


def capital_a_fn(t, params):
    """A_t(alpha, beta) = t^(-3/2) (t + beta) / (2 alpha sqrt(beta)), the t-derivative of a_t."""
    t = _positive(t)
    return _out((t + params.beta) / (2.0 * params.alpha * np.sqrt(params.beta) * t ** 1.5))


def bs_logpdf(t, params):
    t = _positive(t)
    alpha, beta = params.alpha, params.beta
    r = np.sqrt(t / beta)
    a = (r - 1.0 / r) / alpha
    log_big_a = np.log(t + beta) - 1.5 * np.log(t) - math.log(2.0 * alpha * math.sqrt(beta))
    return _out(-0.5 * a * a - _LOG_SQRT_2PI + log_big_a)


def bs_pdf(t, params):
    """Density phi(a_t) A_t of BS(alpha, beta)."""
    return _out(np.exp(bs_logpdf(t, params)))


def bs_cdf(t, params):
    return _out(special.ndtr(np.asarray(a_fn(t, params))))


def bs_sf(t, params):
    return _out(special.ndtr(-np.asarray(a_fn(t, params))))


def bs_logsf(t, params):
    return _out(special.log_ndtr(-np.asarray(a_fn(t, params))))


def bs_quantile(p, params):
    """Inverse cdf.

    Uses t_p = (beta/4) (alpha z_p + sqrt(alpha^2 z_p^2 + 4))^2 followed by one
    Newton step on F(t) - p.
    """
    p = np.asarray(p, dtype=float)
    if np.any(~((p > 0) & (p < 1))):
        raise DomainError("p must lie in the open interval (0, 1)")
    alpha, beta = params.alpha, params.beta
    z = special.ndtri(p)
    az = alpha * z
    # (az + sqrt(az^2 + 4))^2 without cancellation for very negative z
    root = np.sqrt(az * az + 4.0)
    w = np.where(az >= 0, az + root, 4.0 / (root - az))
    t = 0.25 * beta * w * w
    # Newton polish in the a-scale: a(t) should equal z.
    r = np.sqrt(t / beta)
    a = (r - 1.0 / r) / alpha
    big_a = (t + beta) / (2.0 * alpha * np.sqrt(beta) * t ** 1.5)
    t_new = t - (a - z) / big_a
    t = np.where(t_new > 0, t_new, t)
    return _out(t)


def bs_sample(n, params, rng):
    """Draw ``n`` variates through T = beta (X + sqrt(1 + X^2))^2, X ~ N(0, alpha^2/4).

    ``rng`` is a ``numpy.random.Generator``; the output is a float array.
    """
    n = int(n)
    if n < 0:
        raise DomainError("n must be non-negative")
    if n == 0:
        return np.empty(0)
    x = rng.normal(0.0, 0.5 * params.alpha, size=n)
    root = np.sqrt(1.0 + x * x)
    w = np.where(x >= 0, x + root, 1.0 / (root - x))
    return params.beta * (w * w)


def _mode_residual(u, alpha):
    # (beta - m)(m + beta)^2 - alpha^2 beta m (m + 3 beta), divided by beta^3, with u = m / beta
    return (1.0 - u) * (1.0 + u) ** 2 - alpha * alpha * u * (u + 3.0)


def bs_mode(params, eps=1e-12):
    """Mode m < beta: the root of (beta - m)(m + beta)^2 = alpha^2 beta m (m + 3 beta).

    Solved by bisection on the scaled variable m / beta over (eps, 1 - eps).
    """
    alpha = params.alpha
    lo, hi = eps, 1.0 - eps
    f_lo = _mode_residual(lo, alpha)
    f_hi = _mode_residual(hi, alpha)
    if f_hi > 0:
        # root closer to beta than the bracket resolves (alpha below ~1e-6)
        return params.beta * hi
    if f_lo < 0:
        return params.beta * lo
    while hi - lo > eps:
        mid = 0.5 * (lo + hi)
        if _mode_residual(mid, alpha) > 0:
            lo = mid
        else:
            hi = mid
    return params.beta * 0.5 * (lo + hi)


def alpha_from_mode(m, beta):
    """Shape implied by a mode ``m`` and median ``beta`` (requires 0 < m < beta)."""
    m = np.asarray(m, dtype=float)
    beta = float(beta)
    if np.any(~((m > 0) & (m < beta))):
        raise DomainError("the mode must satisfy 0 < m < beta")
    return _out(np.sqrt((beta - m) * (m + beta) ** 2 / (beta * m * (m + 3.0 * beta))))


def bs_pdf_mode_param(t, m, beta):
    """BS density parameterized by its mode ``m`` and median ``beta``.

    Closed form in (m, beta); the shape never appears explicitly.
    """
    t = _positive(t)
    m = float(m)
    beta = float(beta)
    if not (0 < m < beta):
        raise DomainError("the mode must satisfy 0 < m < beta")
    r = np.sqrt(t / beta)
    a1 = r - 1.0 / r
    kappa = beta * m * (m + 3.0 * beta) / (beta - m)
    expo = -0.5 * kappa * (a1 / (m + beta)) ** 2
    norm = math.sqrt(m * (m + 3.0 * beta) / (beta - m)) / (m + beta)
    return _out(np.exp(expo - _LOG_SQRT_2PI) * t ** -1.5 * (t + beta) * 0.5 * norm)


def _half_integer_k_ratio(n, x):
    # K_{n+1/2}(x) / K_{1/2}(x) = sum_k (n+k)! / (k! (n-k)!) (2x)^-k
    total = 0.0
    term_x = 1.0
    for k in range(n + 1):
        coef = math.factorial(n + k) / (math.factorial(k) * math.factorial(n - k))
        total += coef * term_x
        term_x /= 2.0 * x
    return total


def bessel_k_ratio(nu, x):
    """K_nu(x) / K_{1/2}(x) without overflow for large x.

    Exact finite sum when |nu| is a half-integer, otherwise a ratio of
    exponentially scaled ``scipy.special.kve`` values.
    """
    nu = abs(float(nu))
    x = float(x)
    n = nu - 0.5
    if n >= 0 and n == int(n) and n <= 60:
        return _half_integer_k_ratio(int(n), x)
    return float(special.kve(nu, x) / special.kve(0.5, x))


def bs_moment(s, params):
    """E(T^s) = beta^s [K_{(2s+1)/2}(1/alpha^2) + K_{(2s-1)/2}(1/alpha^2)] / (2 K_{1/2}(1/alpha^2))."""
    s = float(s)
    x = params.alpha ** -2
    ratio = bessel_k_ratio(s + 0.5, x) + bessel_k_ratio(s - 0.5, x)
    return math.exp(s * math.log(params.beta)) * 0.5 * ratio


def bs_mean(params):
    return params.beta * (1.0 + 0.5 * params.alpha ** 2)


def bs_var(params):
    return (params.alpha * params.beta) ** 2 * (1.0 + 1.25 * params.alpha ** 2)


def log_bs_pdf(w, alpha, gamma):
    """Density of W = log(T) for T ~ BS(alpha, exp(gamma)) (sinh-normal law).

    (1/2) phi(xi2) xi1 with xi2 = (2/alpha) sinh((w - gamma)/2) and
    xi1 = (2/alpha) cosh((w - gamma)/2).  Support is the whole real line.
    """
    alpha = float(alpha)
    if not (alpha > 0 and math.isfinite(alpha)):
        raise DomainError("alpha must be positive and finite")
    h = 0.5 * (np.asarray(w, dtype=float) - gamma)
    # log(xi1 / 2) without overflowing cosh in the far tails
    ah = np.abs(h)
    log_half_xi1 = ah + np.log1p(np.exp(-2.0 * ah)) - math.log(2.0 * alpha)
    with np.errstate(over="ignore"):   # xi2^2 -> inf just gives density 0
        xi2 = (2.0 / alpha) * np.sinh(h)
        return _out(np.exp(log_half_xi1 - 0.5 * xi2 * xi2 - _LOG_SQRT_2PI))
