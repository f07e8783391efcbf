"""Improved possibilistic multiple-kernel power k-means on random Fourier features.

Every view l gets its own feature map and its own centroids theta_{j,l}.  The
per-view squared distance is replaced by the possibilistic distance::

    dt_{ij,l} = u_ij^m ||phi_l(x_i) - theta_{j,l}||^2 + (1 - u_ij)^m eta_{j,l}

and the objective is

    f_s = sum_i M_s(sum_l alpha_l dt_{i1,l}, ..., sum_l alpha_l dt_{ik,l})
          + lam * sum_l alpha_l log alpha_l

Concavity of M_s gives a linear majorizer at the current point whose weights
w_ij are the gradient of M_s.  One sweep minimizes that majorizer exactly in
U, then the centroids, then alpha, so f_s is non-increasing at fixed s.
Final labels are argmax_j of w_ij * u_ij^m.
"""

from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import expit, softmax, xlogy
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_is_fitted

from ._common import (DIST_FLOOR, DeadClusterEvent, TraceEntry,
                      farthest_points, sq_distances)
from ._validation import check_n_clusters, check_positive, check_views
from .exceptions import InvalidInput
from .features import (DEFAULT_BANDWIDTH, KernelSpec, map_features,
                       recommended_dim, sample_rff)
from .kpkm import init_centroids
from .powermeans import PowerSchedule, gradient_weights, power_mean

_DEAD_MASS = 1e-30


@dataclass
class MkpkmConfig:
    """Hyper-parameters of the multi-view solver.

    ``eta`` is a (k, L) array of regularizers; ``None`` sets
    eta_{j,l} = mean_i ||phi_l(x_i) - theta_{j,l}||^2 from the initial
    centroids.  ``possibilistic=False`` freezes U at one, which turns the
    solver into plain multiple-kernel power k-means (the ablation).
    """

    m: float = 2.0
    lam: float = 1.0
    eta: Optional[np.ndarray] = None
    schedule: PowerSchedule = field(default_factory=lambda: PowerSchedule(cadence=2))
    tol: float = 1e-6
    max_iter: int = 300
    seed: int = 0
    D: Optional[object] = None
    possibilistic: bool = True
    update_eta: bool = False

    def __post_init__(self):
        if not self.m > 1:
            raise InvalidInput(f"m must be > 1, got {self.m}")
        check_positive(self.lam, "lam")
        check_positive(self.tol, "tol")
        if self.max_iter < 1:
            raise InvalidInput(f"max_iter must be >= 1, got {self.max_iter}")
        if self.eta is not None:
            self.eta = np.asarray(self.eta, dtype=np.float64)
            if not np.all(self.eta > 0):
                raise InvalidInput("eta entries must be positive")


@dataclass
class MkpkmState:
    centroids: list
    U: np.ndarray
    alpha: np.ndarray
    eta: np.ndarray
    s: float
    W: Optional[np.ndarray] = None


@dataclass
class MkpkmResult:
    state: MkpkmState
    assignments: np.ndarray
    objective_trace: list
    iterations_run: int
    converged: bool
    initial_objective: float
    events: list = field(default_factory=list)
    rffs: list = field(default_factory=list)

    @property
    def alpha(self):
        return self.state.alpha


def weighted_distance(u, sq_dist, eta, m=2.0):
    """u^m * sq_dist + (1 - u)^m * eta; broadcasts over arrays."""
    u = np.asarray(u, dtype=np.float64)
    return u ** m * sq_dist + (1.0 - u) ** m * eta


def view_sq_distances(views, centroids):
    """(L, n, k) squared distances of every mapped row to every view centroid."""
    return np.stack([sq_distances(P, C) for P, C in zip(views, centroids)])


def possibilistic_distances(sqd, U, eta, m):
    """(L, n, k) array of dt_{ij,l} for sqd of shape (L, n, k) and eta (k, L)."""
    return weighted_distance(U[None], sqd, eta.T[:, None, :], m)


def aggregate_distances(sqd, U, alpha, eta, m):
    """sum_l alpha_l dt_{ij,l}, clamped below, shape (n, k)."""
    dt = possibilistic_distances(sqd, U, eta, m)
    return np.maximum(np.tensordot(alpha, dt, axes=1), DIST_FLOOR)


def compute_fuzzy_weights(agg, s):
    """Gradient of M_s at each row of the aggregated distances (not normalized)."""
    return gradient_weights(agg, s)


def update_u(sqd, alpha, eta, m):
    """Closed-form typicalities u_ij = 1 / (1 + (A_ij / B_j)^(1/(m-1)))
    with A_ij = sum_l alpha_l sqd_{ij,l} and B_j = sum_l alpha_l eta_{j,l}."""
    A = np.maximum(np.tensordot(alpha, sqd, axes=1), DIST_FLOOR)
    B = eta @ alpha
    return expit(-np.log(A / B) / (m - 1.0))


def update_centroids(views, W, U, m, iteration=0, agg=None):
    """Per-view centroids as means weighted by w_ij * u_ij^m.

    Returns ``(centroids, events)``.  A cluster whose total weight is
    below 1e-30 is re-seeded at the row farthest from its nearest centroid
    (by ``agg`` when given).
    """
    G = W * U ** m
    colsum = G.sum(axis=0)
    dead = np.flatnonzero(~(colsum > _DEAD_MASS))
    events = []
    if dead.size:
        G = G.copy()
        far = agg.min(axis=1) if agg is not None else np.zeros(G.shape[0])
        for j, i in zip(dead, farthest_points(far, dead.size)):
            G[:, j] = 0.0
            G[i, j] = 1.0
            colsum[j] = 1.0
            events.append(DeadClusterEvent(iteration, int(j), i))
    G = G / colsum
    return [G.T @ P for P in views], events


def view_costs(W, dt):
    """C_l = sum_ij w_ij dt_{ij,l}."""
    return np.einsum("nk,lnk->l", W, dt)


def update_alpha(costs, lam):
    """alpha = softmax(-C / lam); scipy's softmax subtracts the max first."""
    return softmax(-np.asarray(costs, dtype=np.float64) / lam)


def _entropy_term(alpha, lam):
    return float(lam * np.sum(xlogy(alpha, alpha)))


def mkpkm_objective(sqd, U, alpha, eta, m, s, lam):
    agg = aggregate_distances(sqd, U, alpha, eta, m)
    return float(power_mean(agg, s).sum()) + _entropy_term(alpha, lam)


def mkpkm_surrogate(expansion, sqd, U, alpha, eta, m, s, lam):
    """Linear majorizer of :func:`mkpkm_objective` built at ``expansion``.

    ``expansion`` is a tuple ``(sqd_t, U_t, alpha_t)``; the surrogate is
    evaluated at ``(sqd, U, alpha)`` where ``sqd`` comes from the candidate
    centroids.  It equals the objective at the expansion point and is never
    below it elsewhere.
    """
    sqd_t, U_t, alpha_t = expansion
    agg_t = aggregate_distances(sqd_t, U_t, alpha_t, eta, m)
    f_t = float(power_mean(agg_t, s).sum()) + _entropy_term(alpha_t, lam)
    w_t = gradient_weights(agg_t, s)
    agg = aggregate_distances(sqd, U, alpha, eta, m)
    return (f_t - float(np.sum(w_t * agg_t)) - _entropy_term(alpha_t, lam)
            + float(np.sum(w_t * agg)) + _entropy_term(alpha, lam))


def _resolve_per_view(value, L, default, name):
    if value is None:
        return [default] * L
    if np.isscalar(value) or isinstance(value, KernelSpec):
        return [value] * L
    value = list(value)
    if len(value) != L:
        raise InvalidInput(f"{name} needs {L} entries, got {len(value)}")
    return value


def joint_init(views, k, seed=0, alpha=None):
    """Initial per-view centroids sharing one cluster indexing.

    k-means++ and a few Lloyd steps run on the alpha-weighted concatenation
    sqrt(alpha_l) * phi_l; the result is split back per view and rescaled.
    """
    L = len(views)
    alpha = np.full(L, 1.0 / L) if alpha is None else np.asarray(alpha)
    Z = np.hstack([np.sqrt(a) * P for a, P in zip(alpha, views)])
    C = init_centroids(Z, k, seed)
    bounds = np.cumsum([0] + [P.shape[1] for P in views])
    return [C[:, bounds[l]:bounds[l + 1]] / np.sqrt(alpha[l]) for l in range(L)]


def eta_heuristic(sqd):
    """eta_{j,l} = mean_i sqd_{ij,l}, shape (k, L)."""
    return np.maximum(sqd.mean(axis=1).T, DIST_FLOOR)


def assign(W, U, m):
    """argmax_j w_ij u_ij^m, ties to the lowest index."""
    return np.argmax(W * U ** m, axis=1)


def fit_mkpkm(views, k, specs=None, config=None, init=None):
    """Fit the possibilistic multiple-kernel solver.

    Parameters
    ----------
    views : list of array-like, each of shape (n_samples, n_features_l)
    k : int
    specs : KernelSpec or list of KernelSpec, optional
        One bandwidth per view; defaults to ``KernelSpec()`` for all.
    config : MkpkmConfig, optional
    init : list of ndarray, optional
        Initial per-view centroids in mapped space.

    Returns
    -------
    MkpkmResult
    """
    config = MkpkmConfig() if config is None else config
    Xs = check_views(views)
    L = len(Xs)
    n = Xs[0].shape[0]
    k = check_n_clusters(k, n)
    specs = _resolve_per_view(specs, L, KernelSpec(), "specs")
    dims = _resolve_per_view(config.D, L, recommended_dim(k), "D")
    # every view uses the same seed so identical views get identical maps
    rffs = [sample_rff(X.shape[1], int(D), spec, config.seed)
            for X, D, spec in zip(Xs, dims, specs)]
    Phis = [map_features(X, r) for X, r in zip(Xs, rffs)]

    m, lam, schedule = config.m, config.lam, config.schedule
    alpha = np.full(L, 1.0 / L)
    centroids = joint_init(Phis, k, config.seed, alpha) if init is None else [
        np.array(c, dtype=np.float64) for c in init]
    sqd = view_sq_distances(Phis, centroids)
    if config.eta is None:
        eta = eta_heuristic(sqd)
    else:
        eta = np.broadcast_to(config.eta, (k, L)).astype(np.float64)
    U = np.full((n, k), 0.5 if config.possibilistic else 1.0)

    s = schedule.initial()
    f_prev = mkpkm_objective(sqd, U, alpha, eta, m, s, lam)
    f0, s_prev = f_prev, s
    trace, events = [], []
    shifts = deque(maxlen=schedule.cadence + 1)
    converged = False
    t = 0
    for t in range(1, config.max_iter + 1):
        agg = aggregate_distances(sqd, U, alpha, eta, m)
        W = compute_fuzzy_weights(agg, s)
        if config.possibilistic:
            U = update_u(sqd, alpha, eta, m)
        new_centroids, ev = update_centroids(Phis, W, U, m, t, agg)
        events.extend(ev)
        sqd = view_sq_distances(Phis, new_centroids)
        if config.update_eta:
            eta = eta_heuristic(sqd)
        alpha = update_alpha(view_costs(W, possibilistic_distances(sqd, U, eta, m)), lam)
        f = mkpkm_objective(sqd, U, alpha, eta, m, s, lam)
        trace.append(TraceEntry(t, s, f, tuple(float(a) for a in alpha)))
        shifts.append(float(sum(np.sum((a - b) ** 2)
                                for a, b in zip(new_centroids, centroids))))
        centroids = new_centroids
        rel = abs(f - f_prev) / max(abs(f), 1e-12)
        if s == s_prev and rel < config.tol and not ev:
            if schedule.exhausted(s):
                converged = True
            elif len(shifts) == shifts.maxlen and max(shifts) <= config.tol * max(abs(f) / n, 1e-12):
                converged = True
        f_prev, s_prev = f, s
        if converged:
            break
        s = schedule.advance(s, t)

    W = compute_fuzzy_weights(aggregate_distances(sqd, U, alpha, eta, m), s_prev)
    state = MkpkmState(centroids=centroids, U=U, alpha=alpha, eta=eta, s=s_prev, W=W)
    return MkpkmResult(state=state, assignments=assign(W, U, m), objective_trace=trace,
                       iterations_run=t, converged=converged, initial_objective=f0,
                       events=events, rffs=rffs)


class MultiKernelPowerKMeans(ClusterMixin, BaseEstimator):
    """Possibilistic multiple-kernel power k-means over several views.

    ``fit`` takes a list of arrays, one per view, all with the same rows.

    Parameters
    ----------
    n_clusters : int, default=8
    n_components : int, list of int or None, default=None
        Random frequencies per view; ``None`` uses ceil(4 ln(2 k)^3).
    bandwidth : float or list of float, default=1e3
    s0 : float, default=-15
        Initial exponent; the solver starts from -|s0|.
    gamma : float, default=1.04
    cadence : int, default=2
    m : float, default=2
        Fuzzifier of the possibilistic term.
    lam : float, default=1
        Entropy regularization on the view weights.
    possibilistic : bool, default=True
        If False, typicalities are frozen at one.
    update_eta : bool, default=False
        Recompute eta from the current centroids after every sweep.  This
        breaks the monotone-descent guarantee.
    tol : float, default=1e-6
    max_iter : int, default=300
    random_state : int, default=0

    Attributes
    ----------
    labels_ : ndarray of shape (n_samples,)
    view_weights_ : ndarray of shape (n_views,)
    cluster_centers_ : list of ndarray
    possibilistic_membership_ : ndarray of shape (n_samples, n_clusters)
    fuzzy_weights_ : ndarray of shape (n_samples, n_clusters)
    eta_ : ndarray of shape (n_clusters, n_views)
    objective_trace_ : list of TraceEntry
    n_iter_ : int
    converged_ : bool
    rffs_ : list of RffMap
    """

    def __init__(self, n_clusters=8, n_components=None, bandwidth=DEFAULT_BANDWIDTH,
                 s0=-15.0, gamma=1.04, cadence=2, m=2.0, lam=1.0,
                 possibilistic=True, update_eta=False, tol=1e-6, max_iter=300,
                 random_state=0):
        self.n_clusters = n_clusters
        self.n_components = n_components
        self.bandwidth = bandwidth
        self.s0 = s0
        self.gamma = gamma
        self.cadence = cadence
        self.m = m
        self.lam = lam
        self.possibilistic = possibilistic
        self.update_eta = update_eta
        self.tol = tol
        self.max_iter = max_iter
        self.random_state = random_state

    def fit(self, Xs, y=None):
        Xs = check_views(Xs)
        L = len(Xs)
        specs = [KernelSpec(b) for b in _resolve_per_view(self.bandwidth, L, None, "bandwidth")]
        config = MkpkmConfig(
            m=self.m, lam=self.lam,
            schedule=PowerSchedule(-abs(self.s0), self.gamma, self.cadence),
            tol=self.tol, max_iter=self.max_iter, seed=self.random_state,
            D=self.n_components, possibilistic=self.possibilistic,
            update_eta=self.update_eta)
        res = fit_mkpkm(Xs, self.n_clusters, specs, config)
        self.result_ = res
        self.rffs_ = res.rffs
        self.labels_ = res.assignments
        self.view_weights_ = res.state.alpha
        self.cluster_centers_ = res.state.centroids
        self.possibilistic_membership_ = res.state.U
        self.fuzzy_weights_ = res.state.W
        self.eta_ = res.state.eta
        self.objective_trace_ = res.objective_trace
        self.n_iter_ = res.iterations_run
        self.converged_ = res.converged
        return self

    def predict(self, Xs):
        check_is_fitted(self, "rffs_")
        Xs = check_views(Xs)
        if len(Xs) != len(self.rffs_):
            raise InvalidInput(f"expected {len(self.rffs_)} views, got {len(Xs)}")
        Phis = [map_features(X, r) for X, r in zip(Xs, self.rffs_)]
        sqd = view_sq_distances(Phis, self.cluster_centers_)
        alpha, eta, m = self.view_weights_, self.eta_, self.m
        if self.possibilistic:
            U = update_u(sqd, alpha, eta, m)
        else:
            U = np.ones(sqd.shape[1:])
        W = compute_fuzzy_weights(aggregate_distances(sqd, U, alpha, eta, m),
                                  self.result_.state.s)
        return assign(W, U, m)
