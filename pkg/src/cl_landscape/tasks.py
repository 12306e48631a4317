"""Baselines and evaluation metrics for decoded models.

Lloyd's k-means provides the SSE baseline that relative SSE is measured
against; GMM quality is measured by log-likelihood relative to the
generating model. Success thresholds are ``RSSE <= 1.3`` for k-means and
a likelihood ratio of at least ``1/1.3`` for GMMs.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import logsumexp

from ._rng import derive_seed, make_rng
from .errors import ParameterError
from .model import MixtureModel, ModelKind, as_points

log = logging.getLogger(__name__)

SUCCESS_RATIO = 1.3
LLOYD_MAX_ITER = 300
LLOYD_RESTARTS = 10

_CHUNK = 1 << 20


def _sq_dists(points, centroids):
    """Exact squared distances ``(n, K)``, chunked to bound memory."""
    n, d = points.shape
    K = centroids.shape[0]
    rows = max(1, _CHUNK // max(K * d, 1))
    out = np.empty((n, K))
    for s in range(0, n, rows):
        diff = points[s:s + rows, None, :] - centroids[None, :, :]
        out[s:s + rows] = np.einsum("nkd,nkd->nk", diff, diff)
    return out


def sse(X, centroids) -> float:
    """Sum over points of the squared distance to the nearest centroid."""
    points = as_points(X)
    centroids = np.atleast_2d(np.asarray(centroids, dtype=np.float64))
    if centroids.size == 0:
        raise ParameterError("sse needs at least one centroid")
    if centroids.shape[1] != points.shape[1]:
        raise ParameterError(f"centroids have d={centroids.shape[1]}, data has d={points.shape[1]}")
    return float(_sq_dists(points, centroids).min(axis=1).sum())


def relative_sse(X, decoded_centroids, baseline_sse: float) -> float:
    """``sse(X, decoded) / baseline_sse``.

    A zero baseline (perfectly clustered data) is replaced by machine
    epsilon and logged.
    """
    if baseline_sse < 0:
        raise ParameterError("baseline SSE must be nonnegative")
    if baseline_sse == 0:
        log.warning("baseline SSE is zero; reporting the ratio against machine epsilon")
        baseline_sse = np.finfo(float).eps
    return sse(X, decoded_centroids) / baseline_sse


@dataclass
class KMeansResult:
    centroids: np.ndarray
    sse: float
    n_iter: int
    sse_history: list


def _kmeans_pp(points, K, rng):
    n = points.shape[0]
    centroids = np.empty((K, points.shape[1]))
    centroids[0] = points[rng.integers(n)]
    closest = _sq_dists(points, centroids[:1])[:, 0]
    for k in range(1, K):
        total = closest.sum()
        if total <= 0:
            idx = rng.integers(n)
        else:
            idx = int(np.searchsorted(np.cumsum(closest), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        centroids[k] = points[idx]
        closest = np.minimum(closest, _sq_dists(points, centroids[k:k + 1])[:, 0])
    return centroids


def _lloyd_run(points, K, rng, max_iter):
    centroids = _kmeans_pp(points, K, rng)
    labels = None
    history = []
    it = 0
    for it in range(1, max_iter + 1):
        dist = _sq_dists(points, centroids)
        new_labels = dist.argmin(axis=1)
        point_cost = dist[np.arange(len(points)), new_labels]
        history.append(float(point_cost.sum()))
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        counts = np.bincount(labels, minlength=K)
        sums = np.zeros_like(centroids)
        np.add.at(sums, labels, points)
        empty = counts == 0
        centroids = np.where(empty[:, None], centroids, sums / np.maximum(counts, 1)[:, None])
        if empty.any():
            # re-seed each empty centroid at the point worst served by its own centroid
            far = point_cost.copy()
            for k in np.flatnonzero(empty):
                j = int(np.argmax(far))
                centroids[k] = points[j]
                far[j] = -1.0
    final = _sq_dists(points, centroids).min(axis=1).sum()
    return centroids, float(final), it, history


def lloyd_kmeans(X, K: int, restarts: int = LLOYD_RESTARTS, seed: int = 0,
                 max_iter: int = LLOYD_MAX_ITER) -> KMeansResult:
    """Best-of-``restarts`` Lloyd's algorithm with k-means++ seeding."""
    points = as_points(X)
    if K < 1 or K > points.shape[0]:
        raise ParameterError(f"K must lie in [1, n={points.shape[0]}], got {K}")
    if restarts < 1:
        raise ParameterError("restarts must be >= 1")
    best = None
    for r in range(restarts):
        rng = make_rng(derive_seed(seed, r), "lloyd")
        centroids, value, n_iter, history = _lloyd_run(points, K, rng, max_iter)
        if best is None or value < best.sse:
            best = KMeansResult(centroids, value, n_iter, history)
    return best


def gmm_loglik(X, theta: MixtureModel) -> float:
    """Total log-likelihood of the points under a diagonal GMM.

    Weights are normalized to sum to one before evaluation.
    """
    if theta.kind is not ModelKind.GAUSSIAN:
        raise ParameterError("gmm_loglik needs a Gaussian mixture")
    points = as_points(X)
    if points.shape[1] != theta.d:
        raise ParameterError(f"model has d={theta.d}, data has d={points.shape[1]}")
    theta = theta.normalized()
    var = theta.variances
    with np.errstate(divide="ignore"):
        log_w = np.log(theta.weights)
    # (n, K) log N(x; mu_k, diag var_k)
    log_norm = -0.5 * (points.shape[1] * np.log(2 * np.pi) + np.log(var).sum(axis=1))
    maha = np.empty((points.shape[0], theta.K))
    for k in range(theta.K):
        maha[:, k] = (((points - theta.centers[k]) ** 2) / var[k]).sum(axis=1)
    log_comp = log_w[None, :] + log_norm[None, :] - 0.5 * maha
    return float(logsumexp(log_comp, axis=1).sum())


def loglik_ratio(X, theta_decoded: MixtureModel, theta_truth: MixtureModel) -> float:
    """Per-sample (geometric-mean) likelihood ratio of decoded vs truth."""
    n = as_points(X).shape[0]
    return float(np.exp((gmm_loglik(X, theta_decoded) - gmm_loglik(X, theta_truth)) / n))


def kmeans_success(rsse: float) -> bool:
    return bool(rsse <= SUCCESS_RATIO)


def gmm_success(ratio: float) -> bool:
    return bool(ratio >= 1.0 / SUCCESS_RATIO)


def detect_failure(cost_decoded: float, cost_truth: float) -> bool:
    """True iff the decoder's cost strictly exceeds the ground truth's."""
    return bool(cost_decoded > cost_truth)


@dataclass
class EvaluationReport:
    """Metrics for one decode. Fields that do not apply to the task are None."""

    rsse: float | None = None
    loglik_ratio: float | None = None
    kmeans_success: bool | None = None
    gmm_success: bool | None = None
    failure_detected: bool | None = None
    cost_decoded: float | None = None
    cost_ground_truth: float | None = None

    @classmethod
    def build(cls, rsse=None, loglik_ratio=None, cost_decoded=None, cost_ground_truth=None):
        failure = None
        if cost_decoded is not None and cost_ground_truth is not None:
            failure = detect_failure(cost_decoded, cost_ground_truth)
        return cls(
            rsse=None if rsse is None else float(rsse),
            loglik_ratio=None if loglik_ratio is None else float(loglik_ratio),
            kmeans_success=None if rsse is None else kmeans_success(rsse),
            gmm_success=None if loglik_ratio is None else gmm_success(loglik_ratio),
            failure_detected=failure,
            cost_decoded=None if cost_decoded is None else float(cost_decoded),
            cost_ground_truth=None if cost_ground_truth is None else float(cost_ground_truth),
        )

    def to_dict(self) -> dict:
        return asdict(self)


def evaluate(X, theta: MixtureModel, *, baseline_sse=None, truth: MixtureModel | None = None,
             z=None, freqs=None) -> EvaluationReport:
    """Build an :class:`EvaluationReport` for a decoded model.

    RSSE needs ``baseline_sse``; the likelihood ratio needs a Gaussian
    ``theta`` and ``truth``; the failure detector needs ``truth``, ``z`` and
    ``freqs``. Whatever cannot be computed is left as None.
    """
    from .sketch import cost

    rsse = None if baseline_sse is None else relative_sse(X, theta.centers, baseline_sse)
    ratio = None
    if truth is not None and theta.kind is ModelKind.GAUSSIAN and truth.kind is ModelKind.GAUSSIAN:
        ratio = loglik_ratio(X, theta, truth)
    c_dec = c_true = None
    if truth is not None and z is not None and freqs is not None:
        c_dec = cost(theta, z, freqs)
        truth_same_kind = truth if truth.kind is theta.kind else dirac_truth(truth)
        c_true = cost(truth_same_kind, z, freqs)
    return EvaluationReport.build(rsse, ratio, c_dec, c_true)


def dirac_truth(truth: MixtureModel) -> MixtureModel:
    """Ground-truth centroids: the generating means with uniform weights."""
    K = truth.K
    return MixtureModel(ModelKind.DIRAC, np.full(K, 1.0 / K), truth.centers)
