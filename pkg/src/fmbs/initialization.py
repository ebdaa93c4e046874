"""
Starting partitions and starting values for the ECM fit.

Three partitioners are available:

* ``kbumps``   - deterministic: bumps of a Gaussian kernel density estimate,
  each observation assigned to the nearest bump maximum.
* ``kmeans``   - Lloyd iterations from k-means++ seeds (seeded, hence
  reproducible per seed only).
* ``kmedoids`` - alternating k-medoids (Voronoi iteration) from random medoids.

Cluster labels are zero-based and ordered by cluster location, so cluster 0
is always the leftmost one.
"""

from dataclasses import dataclass, field
from enum import Enum
import warnings

import numpy as np

from .bs import alpha_from_mode
from .errors import DomainError, InitializationWarning
from .mixture import MixtureParams

__all__ = [
    "InitStrategy",
    "Partition",
    "silverman_bandwidth",
    "kde_bumps",
    "kbumps_partition",
    "kmeans_partition",
    "kmedoids_partition",
    "quantile_partition",
    "make_partition",
    "modified_moment_estimates",
    "moment_init",
]

ALPHA_INIT_FLOOR = 1e-3


class InitStrategy(str, Enum):
    KBUMPS = "kbumps"
    KMEANS = "kmeans"
    KMEDOIDS = "kmedoids"


@dataclass(frozen=True, eq=False)
class Partition:
    """Hard cluster assignment of n observations into ``n_components`` groups.

    ``centers`` holds the bump maxima, centroids or medoids, one per cluster.
    ``fallback`` is set when the quantile split replaced the requested method.
    """

    labels: np.ndarray
    n_components: int
    centers: np.ndarray = field(default=None)
    strategy: str = "quantile"
    fallback: bool = False

    def __post_init__(self):
        labels = np.array(self.labels, dtype=np.intp).reshape(-1)
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        if labels.size and (labels.min() < 0 or labels.max() >= self.n_components):
            raise DomainError("labels must lie in 0..G-1")

    @property
    def sizes(self):
        return np.bincount(self.labels, minlength=self.n_components)

    def is_valid(self):
        return bool(np.all(self.sizes > 0))

    def __eq__(self, other):
        if not isinstance(other, Partition):
            return NotImplemented
        return self.n_components == other.n_components and np.array_equal(self.labels, other.labels)


def _as_data(data, g):
    y = np.asarray(data, dtype=float).reshape(-1)
    if y.size == 0 or np.any(~np.isfinite(y)) or np.any(y <= 0):
        raise DomainError("data must be a non-empty vector of positive finite values")
    g = int(g)
    if g < 1 or y.size < g:
        raise DomainError(f"need 1 <= G <= n (G={g}, n={y.size})")
    return y, g


def silverman_bandwidth(y):
    """0.9 min(sd, IQR/1.34) n^(-1/5); falls back to sd or a range fraction if either is zero."""
    y = np.asarray(y, dtype=float)
    sd = y.std(ddof=1) if y.size > 1 else 0.0
    q75, q25 = np.percentile(y, [75, 25])
    spread = min(sd, (q75 - q25) / 1.34)
    if spread <= 0:
        spread = sd if sd > 0 else max(abs(y.mean()) * 0.1, 1e-12)
    return 0.9 * spread * y.size ** -0.2


def kde_bumps(y, grid_size=1024, bandwidth=None):
    """Local maxima of a Gaussian KDE on a ``grid_size`` grid spanning [min, max].

    Returns ``(locations, heights)`` ranked by height (descending), ties broken
    by the smaller location.
    """
    y = np.asarray(y, dtype=float)
    h = silverman_bandwidth(y) if bandwidth is None else float(bandwidth)
    lo, hi = y.min(), y.max()
    if hi == lo:
        return np.array([lo]), np.array([np.inf])
    grid = np.linspace(lo, hi, grid_size)
    dens = np.zeros(grid_size)
    for start in range(0, y.size, 2048):
        chunk = y[start:start + 2048]
        u = (grid[:, None] - chunk[None, :]) / h
        dens += np.exp(-0.5 * u * u).sum(axis=1)
    dens /= y.size * h * np.sqrt(2.0 * np.pi)
    left = np.concatenate([[-np.inf], dens[:-1]])
    right = np.concatenate([dens[1:], [-np.inf]])
    peak = np.nonzero((dens > left) & (dens >= right))[0]
    order = np.lexsort((grid[peak], -dens[peak]))
    peak = peak[order]
    return grid[peak], dens[peak]


def quantile_partition(data, G):
    """Split the sorted data into G consecutive blocks of (almost) equal size."""
    y, g = _as_data(data, G)
    n = y.size
    order = np.argsort(y, kind="stable")
    labels = np.empty(n, dtype=np.intp)
    labels[order] = (np.arange(n) * g) // n
    centers = np.array([np.median(y[labels == j]) for j in range(g)])
    return Partition(labels, g, centers, strategy="quantile")


def _nearest(y, centers):
    # ties go to the lower index
    return np.argmin(np.abs(y[:, None] - centers[None, :]), axis=1)


def kbumps_partition(data, G, grid_size=1024):
    """Deterministic k-bumps partition.

    The G highest KDE bump maxima are kept and each observation goes to the
    closest one.  With fewer than G bumps (or an empty cluster) the quantile
    split is returned with ``fallback=True`` and an :class:`InitializationWarning`.
    """
    y, g = _as_data(data, G)
    if g == 1:
        return Partition(np.zeros(y.size, dtype=np.intp), 1, np.array([kde_bumps(y, grid_size)[0][0]]),
                         strategy="kbumps")
    locations, _ = kde_bumps(y, grid_size)
    if locations.size >= g:
        centers = np.sort(locations[:g])
        part = Partition(_nearest(y, centers), g, centers, strategy="kbumps")
        if part.is_valid():
            return part
    warnings.warn(f"k-bumps found {locations.size} bump(s) for G={g}; using the quantile split",
                  InitializationWarning, stacklevel=2)
    q = quantile_partition(y, g)
    return Partition(q.labels, g, q.centers, strategy="kbumps", fallback=True)


def _relabel_by_center(labels, centers):
    order = np.argsort(centers, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    return rank[labels], centers[order]


def _reseed_empty(y, labels, centers):
    # move each empty cluster's center to the point farthest from its current center
    g = centers.size
    for j in range(g):
        if np.any(labels == j):
            continue
        dist = np.abs(y - centers[labels])
        i = int(np.argmax(dist))
        centers[j] = y[i]
        labels[i] = j
    return labels, centers


def kmeans_partition(data, G, rng, max_iter=50):
    """1-D k-means: k-means++ seeding then Lloyd iterations until labels stop changing."""
    y, g = _as_data(data, G)
    n = y.size
    centers = np.empty(g)
    centers[0] = y[rng.integers(n)]
    for j in range(1, g):
        d2 = np.min((y[:, None] - centers[None, :j]) ** 2, axis=1)
        total = d2.sum()
        centers[j] = y[rng.integers(n)] if total == 0 else y[rng.choice(n, p=d2 / total)]
    labels = None
    for _ in range(max_iter):
        new = _nearest(y, centers)
        new, centers = _reseed_empty(y, new, centers)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        centers = np.array([y[labels == j].mean() if np.any(labels == j) else centers[j]
                            for j in range(g)])
    labels, centers = _relabel_by_center(labels, centers)
    return Partition(labels, g, centers, strategy="kmeans")


def kmedoids_partition(data, G, rng, max_iter=50):
    """1-D k-medoids by alternating assignment and medoid update.

    The medoid of a cluster (the member minimising the sum of absolute
    distances) is its lower median.
    """
    y, g = _as_data(data, G)
    n = y.size
    medoids = y[rng.choice(n, size=g, replace=False)].copy()
    labels = None
    for _ in range(max_iter):
        new = _nearest(y, medoids)
        new, medoids = _reseed_empty(y, new, medoids)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for j in range(g):
            members = np.sort(y[labels == j])
            if members.size:
                medoids[j] = members[(members.size - 1) // 2]
    labels, medoids = _relabel_by_center(labels, medoids)
    return Partition(labels, g, medoids, strategy="kmedoids")


def make_partition(data, G, strategy=InitStrategy.KBUMPS, rng=None):
    strategy = InitStrategy(strategy)
    if strategy is InitStrategy.KBUMPS:
        return kbumps_partition(data, G)
    if rng is None:
        raise DomainError(f"{strategy.value} initialization needs a random generator")
    if strategy is InitStrategy.KMEANS:
        return kmeans_partition(data, G, rng)
    return kmedoids_partition(data, G, rng)


def modified_moment_estimates(x):
    """Modified moment estimates (alpha, beta) of one BS sample.

    With s the arithmetic and r the harmonic mean: beta = sqrt(s r) and
    alpha = sqrt(2 (sqrt(s / r) - 1)), floored at 1e-3.
    """
    x = np.asarray(x, dtype=float)
    s = x.mean()
    r = 1.0 / np.mean(1.0 / x)
    beta = float(np.sqrt(s * r))
    beta = min(max(beta, x.min()), x.max())
    excess = np.sqrt(s / r) - 1.0
    alpha = float(np.sqrt(2.0 * excess)) if excess > 0 else 0.0
    return max(alpha, ALPHA_INIT_FLOOR), beta


def moment_init(data, partition, modes=None):
    """Initial FM-BS parameters from a hard partition.

    Weights are cluster fractions and (alpha, beta) come from the modified
    moment estimates of each cluster.  If ``modes`` (one per cluster) is
    given, alpha is instead recovered from the mode relation
    (beta - m)(m + beta)^2 = alpha^2 beta m (m + 3 beta) whenever 0 < m < beta.
    """
    y = np.asarray(data, dtype=float).reshape(-1)
    if y.size != partition.labels.size:
        raise DomainError("data and partition sizes differ")
    if not partition.is_valid():
        raise DomainError("every cluster of the partition must be non-empty")
    g = partition.n_components
    weights = partition.sizes / y.size
    weights = weights / weights.sum()
    alphas = np.empty(g)
    betas = np.empty(g)
    for j in range(g):
        alphas[j], betas[j] = modified_moment_estimates(y[partition.labels == j])
        if modes is not None and 0 < modes[j] < betas[j]:
            alphas[j] = max(float(alpha_from_mode(modes[j], betas[j])), ALPHA_INIT_FLOOR)
    return MixtureParams(weights, alphas, betas)
