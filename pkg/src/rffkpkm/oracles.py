"""Exact-kernel references and small-scale baselines.

These paths build the full n x n kernel matrix and are guarded to small n.
They share :mod:`rffkpkm.powermeans` with the RFF solvers, so any
disagreement between the two isolates the feature approximation.
"""

from collections import deque
from dataclasses import dataclass

import numpy as np

from ._common import DIST_FLOOR, DeadClusterEvent, TraceEntry, farthest_points
from ._validation import check_features, check_n_clusters
from .exceptions import InvalidInput
from .features import KernelSpec
from .kpkm import KpkmResult, _anneal_loop, init_centroids, lloyd
from .powermeans import PowerSchedule, gradient_weights, power_mean

MAX_EXACT_N = 2000


def _guard(n, limit=MAX_EXACT_N):
    if n > limit:
        raise InvalidInput(f"exact kernel path limited to n <= {limit}, got n={n}")


def kernel_matrix(X, spec=KernelSpec(), max_n=MAX_EXACT_N):
    X = check_features(X)
    _guard(X.shape[0], max_n)
    sq = np.sum(X ** 2, axis=1)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * X @ X.T, 0.0)
    np.fill_diagonal(d2, 0.0)
    K = np.exp(-d2 / (2.0 * spec.bandwidth ** 2))
    return (K + K.T) / 2.0


def _kernel_sq_distances(K, W):
    # ||phi_i - Phi W_j||^2 = K_ii + W_j' K W_j - 2 (K W)_ij
    KW = K @ W
    quad = np.einsum("ij,ij->j", W, KW)
    return np.diag(K)[:, None] + quad[None, :] - 2.0 * KW


def _one_hot_columns(labels, k):
    W = np.zeros((labels.shape[0], k))
    W[np.arange(labels.shape[0]), labels] = 1.0
    counts = W.sum(axis=0)
    if np.any(counts == 0):
        raise InvalidInput("initial labels leave a cluster empty")
    return W / counts


def _kernel_kmeanspp(K, k, rng, n_lloyd=10):
    """D^2 seeding and Lloyd steps in kernel space; returns hard labels."""
    n = K.shape[0]
    diag = np.diag(K)
    centers = [int(rng.integers(n))]
    closest = np.maximum(diag + diag[centers[0]] - 2.0 * K[:, centers[0]], 0.0)
    for _ in range(1, k):
        total = closest.sum()
        if total > 0:
            c = int(rng.choice(n, p=closest / total))
        else:
            c = int(rng.choice(np.setdiff1d(np.arange(n), centers)))
        centers.append(c)
        closest = np.minimum(closest, np.maximum(diag + diag[c] - 2.0 * K[:, c], 0.0))
    labels = np.argmin(diag[:, None] + diag[centers][None, :] - 2.0 * K[:, centers], axis=1)
    for _ in range(n_lloyd):
        present = np.unique(labels)
        if present.size < k:
            break
        new = _kernel_sq_distances(K, _one_hot_columns(labels, k)).argmin(axis=1)
        if np.array_equal(new, labels):
            break
        labels = new
    if np.unique(labels).size < k:
        # fall back to the seeds themselves
        labels = np.argmin(diag[:, None] + diag[centers][None, :] - 2.0 * K[:, centers], axis=1)
        labels[centers] = np.arange(k)
    return labels


def exact_kpkm(X, k, spec=KernelSpec(), schedule=PowerSchedule(), seed=0, tol=1e-6,
               max_iter=300, init_labels=None):
    """Kernel power k-means with the exact Gaussian kernel matrix.

    Same iteration and stopping rule as :func:`rffkpkm.kpkm.fit_kpkm`, but
    every distance comes from the kernel trick.  ``centroids`` in the
    returned result is None; the membership matrix W carries the solution.
    """
    X = check_features(X)
    n = X.shape[0]
    _guard(n)
    k = check_n_clusters(k, n)
    K = kernel_matrix(X, spec)
    if init_labels is None:
        init_labels = _kernel_kmeanspp(K, k, np.random.default_rng(seed))
    W = _one_hot_columns(np.asarray(init_labels), k)

    s = schedule.initial()
    D2 = _kernel_sq_distances(K, W)
    f_prev = float(power_mean(np.maximum(D2, DIST_FLOOR), s).sum())
    f0, s_prev = f_prev, s
    trace, events = [], []
    shifts = deque(maxlen=schedule.cadence + 1)
    converged = False
    t = 0
    for t in range(1, max_iter + 1):
        w = gradient_weights(np.maximum(D2, DIST_FLOOR), s)
        colsum = w.sum(axis=0)
        dead = np.flatnonzero(~(colsum > 0))
        ev = []
        for j, i in zip(dead, farthest_points(D2.min(axis=1), dead.size)):
            w[:, j] = 0.0
            w[i, j] = 1.0
            colsum[j] = 1.0
            ev.append(DeadClusterEvent(t, int(j), i))
        events.extend(ev)
        W_new = w / colsum
        D2 = _kernel_sq_distances(K, W_new)
        f = float(power_mean(np.maximum(D2, DIST_FLOOR), s).sum())
        trace.append(TraceEntry(t, s, f))
        dW = W_new - W
        shifts.append(float(np.einsum("ij,ij->", dW, K @ dW)))
        W = W_new
        rel = abs(f - f_prev) / max(f, 1e-12)
        if s == s_prev and rel < tol and not ev:
            if schedule.exhausted(s):
                converged = True
            elif len(shifts) == shifts.maxlen and max(shifts) <= tol * max(f / n, 1e-12):
                converged = True
        f_prev, s_prev = f, s
        if converged:
            break
        s = schedule.advance(s, t)
    return KpkmResult(W=W, centroids=None, assignments=D2.argmin(axis=1),
                      objective_trace=trace, iterations_run=t, converged=converged,
                      initial_objective=f0, s_final=s_prev, events=events)


def kkm_cost(data, assignments, spec=None):
    """Kernel k-means cost of a hard partition.

    With ``spec`` given, ``data`` is the raw feature matrix and the exact
    kernel is used; otherwise ``data`` is treated as explicit (e.g. mapped)
    features and the cost is the Euclidean within-cluster sum of squares.
    """
    data = check_features(data)
    labels = np.asarray(assignments)
    if labels.shape[0] != data.shape[0]:
        raise InvalidInput("assignments length does not match data")
    total = 0.0
    if spec is not None:
        K = kernel_matrix(data, spec)
        for c in np.unique(labels):
            idx = np.flatnonzero(labels == c)
            sub = K[np.ix_(idx, idx)]
            total += float(np.trace(sub) - sub.sum() / idx.size)
    else:
        for c in np.unique(labels):
            pts = data[labels == c]
            total += float(np.sum((pts - pts.mean(axis=0)) ** 2))
    return max(total, 0.0)


def make_blobs(n, k, dim=2, separation=10.0, noise_fraction=0.0, outlier_scale=20.0,
               seed=0, cluster_std=1.0):
    """Isotropic Gaussian blobs with optional gross outliers.

    Centers are drawn uniformly in a box and rejected until every pair is at
    least ``separation * cluster_std`` apart.  ``round(noise_fraction * n)``
    outliers are drawn uniformly from the cube of half-width
    ``outlier_scale * cluster_std`` around the mean of the centers and
    appended after the inliers; each outlier is labelled with its nearest
    center.  Inliers are split as evenly as possible across the k blobs.
    """
    if n < 1 or k < 1 or dim < 1:
        raise InvalidInput("n, k and dim must be positive")
    if not 0 <= noise_fraction < 1:
        raise InvalidInput("noise_fraction must be in [0, 1)")
    rng = np.random.default_rng(seed)
    min_gap = separation * cluster_std
    half = max(min_gap, 1e-12) * max(1.0, k ** (1.0 / dim))
    centers = np.empty((k, dim))
    placed = 0
    attempts = 0
    while placed < k:
        cand = rng.uniform(-half, half, size=dim)
        if placed == 0 or np.min(np.linalg.norm(centers[:placed] - cand, axis=1)) >= min_gap:
            centers[placed] = cand
            placed += 1
        attempts += 1
        if attempts % 1000 == 0:
            half *= 1.5
    n_out = int(round(noise_fraction * n))
    n_in = n - n_out
    sizes = np.full(k, n_in // k)
    sizes[: n_in % k] += 1
    labels = np.repeat(np.arange(k), sizes)
    X = centers[labels] + cluster_std * rng.standard_normal((n_in, dim))
    if n_out:
        box = outlier_scale * cluster_std
        out = centers.mean(axis=0) + rng.uniform(-box, box, size=(n_out, dim))
        out_labels = np.argmin(((out[:, None, :] - centers[None]) ** 2).sum(-1), axis=1)
        X = np.vstack([X, out])
        labels = np.concatenate([labels, out_labels])
    return X, labels


@dataclass
class KMeansResult:
    centroids: np.ndarray
    assignments: np.ndarray
    inertia: float
    n_iter: int


def lloyd_kmeans(X, k, seed=0, max_iter=300):
    """Euclidean k-means: k-means++ seeding then Lloyd to a fixed point."""
    X = check_features(X)
    k = check_n_clusters(k, X.shape[0])
    centers = init_centroids(X, k, seed, n_lloyd=0)
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        new = lloyd(X, centers, max_iter=1)
        if np.array_equal(new, centers):
            break
        centers = new
    labels = ((X[:, None, :] - centers[None]) ** 2).sum(-1).argmin(axis=1)
    inertia = float(((X - centers[labels]) ** 2).sum())
    return KMeansResult(centers, labels, inertia, n_iter)


def power_kmeans(X, k, schedule=PowerSchedule(), seed=0, tol=1e-6, max_iter=300):
    """Euclidean power k-means: the RFF solver's loop on the raw features."""
    X = check_features(X)
    k = check_n_clusters(k, X.shape[0])
    return _anneal_loop(X, init_centroids(X, k, seed), schedule, tol, max_iter)
