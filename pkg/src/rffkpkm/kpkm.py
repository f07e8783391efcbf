"""Single-view kernel power k-means on random Fourier features.

Each iteration computes power-mean gradient weights from the point/centroid
squared distances, normalizes every column of the weight matrix to sum to one
and moves each centroid to the resulting convex combination of mapped points.
At a fixed exponent s this is a majorization-minimization step, so the
power-mean objective never increases; s is annealed towards -inf on a fixed
cadence so the objective approaches the kernel k-means cost.
"""

from collections import deque
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.cluster import kmeans_plusplus
from sklearn.utils.validation import check_is_fitted

from ._common import (DIST_FLOOR, DeadClusterEvent, TraceEntry,
                      farthest_points, sq_distances)
from ._validation import check_features, check_n_clusters, check_positive
from .exceptions import InvalidInput
from .features import (DEFAULT_BANDWIDTH, KernelSpec, map_features,
                       recommended_dim, sample_rff)
from .powermeans import PowerSchedule, gradient_weights, power_mean


@dataclass
class KpkmResult:
    W: np.ndarray
    centroids: np.ndarray
    assignments: np.ndarray
    objective_trace: list
    iterations_run: int
    converged: bool
    initial_objective: float
    s_final: float
    events: list = field(default_factory=list)
    rff: object = None


def lloyd(X, centers, max_iter=10):
    """Plain Lloyd iterations from ``centers``; empty clusters keep their center."""
    centers = np.array(centers, dtype=np.float64, copy=True)
    k = centers.shape[0]
    labels = None
    for _ in range(max_iter):
        new_labels = sq_distances(X, centers).argmin(axis=1)
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(k):
            members = labels == j
            if members.any():
                centers[j] = X[members].mean(axis=0)
    return centers


def init_centroids(Phi, k, seed=0, n_lloyd=10):
    """k-means++ seeding on the mapped rows followed by up to ``n_lloyd`` Lloyd steps."""
    Phi = check_features(Phi, name="Phi")
    k = check_n_clusters(k, Phi.shape[0])
    centers, _ = kmeans_plusplus(Phi, k, random_state=np.random.RandomState(seed))
    return lloyd(Phi, centers, max_iter=n_lloyd)


def _column_normalize(w, Phi, sqd, iteration):
    """Normalize columns of ``w``; dead columns are re-seeded as one-hot
    columns at the points farthest from every centroid."""
    colsum = w.sum(axis=0)
    dead = np.flatnonzero(~(colsum > 0))
    events = []
    if dead.size:
        targets = farthest_points(sqd.min(axis=1), dead.size)
        for j, i in zip(dead, targets):
            w[:, j] = 0.0
            w[i, j] = 1.0
            colsum[j] = 1.0
            events.append(DeadClusterEvent(iteration, int(j), i))
    return w / colsum, events


def kpkm_step(Phi, centroids, s, iteration=0, sqd=None):
    """One iteration: returns (W, new_centroids, dead_cluster_events)."""
    if s >= 0:
        raise InvalidInput(f"s must be negative, got {s}")
    if sqd is None:
        sqd = sq_distances(Phi, centroids)
    w = gradient_weights(np.maximum(sqd, DIST_FLOOR), s)
    W, events = _column_normalize(w, Phi, sqd, iteration)
    return W, W.T @ Phi, events


def _objective_from_sqd(sqd, s):
    return float(power_mean(np.maximum(sqd, DIST_FLOOR), s).sum())


def objective(Phi, W, s):
    """sum_i M_s(||phi_i - theta_1||^2, ..., ||phi_i - theta_k||^2) with theta = Phi^T W."""
    Phi = np.asarray(Phi, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    return _objective_from_sqd(sq_distances(Phi, W.T @ Phi), s)


def _anneal_loop(Phi, centroids, schedule, tol, max_iter):
    """Shared iteration driver for the RFF solver and the Euclidean baseline.

    Converged means: the relative objective change at a fixed s dropped below
    ``tol`` and either the schedule is exhausted or the last cadence+1
    iterations (which straddle an s update) moved the centroids by less than
    tol times the mean per-point objective.
    """
    n = Phi.shape[0]
    s = schedule.initial()
    sqd = sq_distances(Phi, centroids)
    f_prev = _objective_from_sqd(sqd, s)
    f0 = f_prev
    s_prev = s
    trace, events = [], []
    shifts = deque(maxlen=schedule.cadence + 1)
    converged = False
    W = None
    t = 0
    for t in range(1, max_iter + 1):
        W, new_centroids, ev = kpkm_step(Phi, centroids, s, iteration=t, sqd=sqd)
        events.extend(ev)
        sqd = sq_distances(Phi, new_centroids)
        f = _objective_from_sqd(sqd, s)
        trace.append(TraceEntry(t, s, f))
        shifts.append(float(np.sum((new_centroids - centroids) ** 2)))
        centroids = new_centroids
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
    if W is None:
        W = np.full((n, centroids.shape[0]), np.nan)
    assignments = sqd.argmin(axis=1)
    return KpkmResult(W=W, centroids=centroids, assignments=assignments,
                      objective_trace=trace, iterations_run=t, converged=converged,
                      initial_objective=f0, s_final=s_prev, events=events)


def fit_kpkm(X, k, spec=KernelSpec(), D=None, schedule=PowerSchedule(), seed=0,
             tol=1e-6, max_iter=300, init=None):
    """Fit RFF kernel power k-means.

    Parameters
    ----------
    X : array-like of shape (n_samples, n_features)
    k : int
        Number of clusters.
    spec : KernelSpec
        Gaussian kernel bandwidth.
    D : int, optional
        Number of random frequencies; defaults to ``recommended_dim(k)``.
    schedule : PowerSchedule
        Initial exponent, annealing factor and cadence.
    seed : int
        Seeds both the frequency draw and the k-means++ initialization.
    tol : float
        Relative objective tolerance.
    max_iter : int
    init : ndarray of shape (k, 2*D), optional
        Initial centroids in mapped space; overrides k-means++.

    Returns
    -------
    KpkmResult
    """
    X = check_features(X)
    k = check_n_clusters(k, X.shape[0])
    check_positive(tol, "tol")
    if max_iter < 1:
        raise InvalidInput(f"max_iter must be >= 1, got {max_iter}")
    D = recommended_dim(k) if D is None else int(D)
    rff = sample_rff(X.shape[1], D, spec, seed)
    Phi = map_features(X, rff)
    if init is None:
        centroids = init_centroids(Phi, k, seed)
    else:
        centroids = np.array(init, dtype=np.float64)
        if centroids.shape != (k, Phi.shape[1]):
            raise InvalidInput(f"init must have shape {(k, Phi.shape[1])}")
    result = _anneal_loop(Phi, centroids, schedule, tol, max_iter)
    result.rff = rff
    return result


class KernelPowerKMeans(ClusterMixin, BaseEstimator):
    """Kernel power k-means with a random Fourier feature approximation.

    Parameters
    ----------
    n_clusters : int, default=8
    n_components : int or None, default=None
        Number of random frequencies D (mapped dimension 2*D).  ``None`` uses
        ceil(4 ln(2 k)^3).
    bandwidth : float, default=1e3
    s0 : float, default=-15
        Initial power exponent.  Only its magnitude matters: the solver
        starts from -|s0|.
    gamma : float, default=1.04
    cadence : int, default=3
        Iterations between annealing updates s <- gamma * s.
    s_floor : float, default=-1e6
    tol : float, default=1e-6
    max_iter : int, default=300
    random_state : int, default=0

    Attributes
    ----------
    labels_ : ndarray of shape (n_samples,)
    cluster_centers_ : ndarray of shape (n_clusters, 2 * n_components)
        Centroids in the mapped space.
    membership_ : ndarray of shape (n_samples, n_clusters)
        Column-stochastic weights expressing each centroid as a convex
        combination of mapped samples.
    objective_trace_ : list of TraceEntry
    n_iter_ : int
    converged_ : bool
    rff_ : RffMap
    """

    def __init__(self, n_clusters=8, n_components=None, bandwidth=DEFAULT_BANDWIDTH,
                 s0=-15.0, gamma=1.04, cadence=3, s_floor=-1e6, tol=1e-6,
                 max_iter=300, random_state=0):
        self.n_clusters = n_clusters
        self.n_components = n_components
        self.bandwidth = bandwidth
        self.s0 = s0
        self.gamma = gamma
        self.cadence = cadence
        self.s_floor = s_floor
        self.tol = tol
        self.max_iter = max_iter
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_features(X)
        schedule = PowerSchedule(-abs(self.s0), self.gamma, self.cadence, self.s_floor)
        res = fit_kpkm(X, self.n_clusters, KernelSpec(self.bandwidth),
                       self.n_components, schedule, self.random_state,
                       self.tol, self.max_iter)
        self.result_ = res
        self.rff_ = res.rff
        self.labels_ = res.assignments
        self.cluster_centers_ = res.centroids
        self.membership_ = res.W
        self.objective_trace_ = res.objective_trace
        self.n_iter_ = res.iterations_run
        self.converged_ = res.converged
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "rff_")
        Phi = map_features(X, self.rff_)
        return sq_distances(Phi, self.cluster_centers_).argmin(axis=1)
