"""Gaussian-mixture compression of depth scans.

A scan is fit with a small mixture whose parameters are cheap to
broadcast; receivers rebuild an obstacle point set by resampling.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyCloud

COV_FLOOR = 1e-6  # m^2, minimum covariance eigenvalue
EM_TOL = 1e-6     # nats, log-likelihood improvement threshold
EM_MAX_ITERS = 100
POINTS_PER_COMPONENT = 100
MAX_COMPONENTS = 50


@dataclass
class PointCloud:
    points: np.ndarray       # (N,3) float64, meters
    sensor_origin: np.ndarray  # (3,)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        self.sensor_origin = np.asarray(self.sensor_origin, dtype=np.float64).reshape(3)

    def __len__(self):
        return self.points.shape[0]


@dataclass
class GmmModel:
    weights: np.ndarray      # (K,) sums to 1 (K=0 allowed)
    means: np.ndarray        # (K,3) meters
    covariances: np.ndarray  # (K,3,3) symmetric, eigenvalues >= COV_FLOOR
    source_pose: np.ndarray  # (3,) sensing agent position

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        k = self.weights.shape[0]
        self.means = np.asarray(self.means, dtype=np.float64).reshape(k, 3)
        self.covariances = np.asarray(self.covariances, dtype=np.float64).reshape(k, 3, 3)
        self.source_pose = np.asarray(self.source_pose, dtype=np.float64).reshape(3)

    @property
    def n_components(self):
        return self.weights.shape[0]

    def logpdf(self, points):
        """Mixture log density at each point, (N,)."""
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        logp = _log_component_densities(points, self.means, self.covariances)
        logp = logp + np.log(self.weights)[None, :]
        m = logp.max(axis=1, keepdims=True)
        return (m + np.log(np.sum(np.exp(logp - m), axis=1, keepdims=True)))[:, 0]


@dataclass
class EmState:
    """Per-iteration EM bookkeeping, kept for inspection and tests."""
    responsibilities: np.ndarray  # (N,K), rows sum to 1
    effective_counts: np.ndarray  # (K,) column sums
    log_likelihood: float
    log_likelihood_trace: list = field(default_factory=list)


def choose_component_count(num_points, points_per_component=POINTS_PER_COMPONENT,
                           max_components=MAX_COMPONENTS):
    """Component count grows with scan size; zero only for an empty scan."""
    if num_points < 0:
        raise ValueError("num_points must be >= 0")
    if num_points == 0:
        return 0
    k = -(-num_points // points_per_component)  # ceiling division
    return int(min(max(k, 1), max_components))


def _log_component_densities(x, means, covs):
    """log N(x | mu_k, Sigma_k) for all points and components, (N,K)."""
    n, k = x.shape[0], means.shape[0]
    out = np.empty((n, k))
    for j in range(k):
        chol = np.linalg.cholesky(covs[j])
        diff = x - means[j]
        sol = np.linalg.solve(chol, diff.T)
        quad = np.sum(sol * sol, axis=0)
        logdet = 2.0 * np.sum(np.log(np.diag(chol)))
        out[:, j] = -0.5 * (3 * np.log(2 * np.pi) + logdet + quad)
    return out


def _floor_covariance(cov):
    """Symmetrize and clamp eigenvalues at COV_FLOOR."""
    cov = 0.5 * (cov + cov.T)
    w, v = np.linalg.eigh(cov)
    w = np.maximum(w, COV_FLOOR)
    return (v * w) @ v.T


def _kmeanspp_centers(points, k, rng):
    """k-means++ style center seeding."""
    n = points.shape[0]
    centers = np.empty((k, 3))
    centers[0] = points[rng.integers(n)]
    d2 = np.sum((points - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            centers[j] = points[rng.integers(n)]
        else:
            centers[j] = points[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, np.sum((points - centers[j]) ** 2, axis=1))
    return centers


def fit_gmm(cloud, k, rng_seed, max_iters=EM_MAX_ITERS, tol=EM_TOL,
            return_state=False):
    """Fit a k-component mixture to the cloud with EM.

    Initialization is k-means++ seeded from rng_seed; iteration stops when
    the log-likelihood improves by less than `tol` nats.
    """
    pts = cloud.points
    n = pts.shape[0]
    if n == 0:
        raise EmptyCloud("cannot fit a mixture to an empty cloud")
    if k < 1 or k > n:
        raise ValueError("need 1 <= k <= point count")
    rng = np.random.default_rng(rng_seed)

    means = _kmeanspp_centers(pts, k, rng)
    # hard-assign to nearest seed for the initial moments
    d2 = np.sum((pts[:, None, :] - means[None, :, :]) ** 2, axis=2)
    assign = np.argmin(d2, axis=1)
    weights = np.empty(k)
    covs = np.empty((k, 3, 3))
    for j in range(k):
        sel = pts[assign == j]
        if sel.shape[0] == 0:
            sel = pts
        weights[j] = max(sel.shape[0], 1)
        means[j] = sel.mean(axis=0)
        diff = sel - means[j]
        covs[j] = _floor_covariance(diff.T @ diff / sel.shape[0])
    weights /= weights.sum()

    trace = []
    gamma = np.full((n, k), 1.0 / k)
    ll = -np.inf
    for _ in range(max_iters):
        logp = _log_component_densities(pts, means, covs) + np.log(weights)[None, :]
        m = logp.max(axis=1, keepdims=True)
        p = np.exp(logp - m)
        denom = p.sum(axis=1, keepdims=True)
        gamma = p / denom
        new_ll = float(np.sum(m + np.log(denom)))
        trace.append(new_ll)
        converged = new_ll - ll < tol and np.isfinite(ll)
        ll = new_ll
        if converged:
            break
        nk = gamma.sum(axis=0)
        nk = np.maximum(nk, 1e-300)
        weights = nk / n
        means = (gamma.T @ pts) / nk[:, None]
        for j in range(k):
            diff = pts - means[j]
            covs[j] = _floor_covariance((diff.T * gamma[:, j]) @ diff / nk[j])

    model = GmmModel(weights, means, covs, cloud.sensor_origin)
    if return_state:
        state = EmState(gamma, gamma.sum(axis=0), ll, trace)
        return model, state
    return model


def resample(model, count, rng_seed):
    """Draw `count` points from the mixture (empty model -> empty cloud)."""
    if count < 0:
        raise ValueError("count must be >= 0")
    if model.n_components == 0 or count == 0:
        return PointCloud(np.empty((0, 3)), model.source_pose)
    rng = np.random.default_rng(rng_seed)
    # decoded f32 weights may be off unit sum by a few ulps
    p = np.asarray(model.weights, dtype=np.float64)
    comp = rng.choice(model.n_components, size=count, p=p / p.sum())
    pts = np.empty((count, 3))
    for j in range(model.n_components):
        sel = comp == j
        m = int(sel.sum())
        if m:
            pts[sel] = rng.multivariate_normal(model.means[j], model.covariances[j],
                                               size=m, method="cholesky")
    return PointCloud(pts, model.source_pose)
