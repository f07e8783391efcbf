import numpy as np
import pytest

from rffkpkm import InvalidInput, KernelSpec, accuracy, fit_kpkm, map_features, sample_rff
from rffkpkm._common import sq_distances
from rffkpkm.kpkm import init_centroids
from rffkpkm.oracles import (MAX_EXACT_N, _kernel_sq_distances, exact_kpkm, kernel_matrix,
                             kkm_cost, lloyd_kmeans, make_blobs, power_kmeans)


def test_kernel_matrix_is_a_gram_matrix(rng):
    X = rng.standard_normal((30, 3))
    K = kernel_matrix(X, KernelSpec(1.5))
    np.testing.assert_array_equal(K, K.T)
    np.testing.assert_allclose(np.diag(K), 1.0)
    assert np.linalg.eigvalsh(K).min() > -1e-10
    d2 = ((X[3] - X[7]) ** 2).sum()
    assert np.isclose(K[3, 7], np.exp(-d2 / (2 * 1.5 ** 2)))


def test_exact_path_is_guarded():
    with pytest.raises(InvalidInput):
        kernel_matrix(np.zeros((MAX_EXACT_N + 1, 1)))


def test_kernel_trick_distances_agree_with_explicit_features(rng):
    # for an explicit feature map K = Phi Phi^T, so both routes must agree
    Phi = map_features(rng.standard_normal((25, 2)), sample_rff(2, 16, KernelSpec(1.0), 0))
    W = rng.dirichlet(np.ones(25), size=4).T
    np.testing.assert_allclose(_kernel_sq_distances(Phi @ Phi.T, W),
                               sq_distances(Phi, W.T @ Phi), atol=1e-12)


def test_kkm_cost_against_pairwise_formula(rng):
    X = rng.standard_normal((20, 2))
    labels = rng.integers(0, 3, size=20)
    spec = KernelSpec(0.8)
    want = 0.0
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        sub = X[idx]
        d2 = ((sub[:, None] - sub[None]) ** 2).sum(-1)
        # within-cluster scatter in feature space: (1/2|c|) sum_ij ||phi_i - phi_j||^2
        want += np.sum(2 - 2 * np.exp(-d2 / (2 * 0.8 ** 2))) / (2 * idx.size)
    assert np.isclose(kkm_cost(X, labels, spec), want, rtol=1e-10)
    Phi = X
    explicit = sum(((Phi[labels == c] - Phi[labels == c].mean(0)) ** 2).sum()
                   for c in np.unique(labels))
    assert np.isclose(kkm_cost(Phi, labels), explicit)
    with pytest.raises(InvalidInput):
        kkm_cost(X, labels[:5])


def test_make_blobs_structure():
    X, y = make_blobs(103, 4, dim=3, separation=6.0, noise_fraction=0.1, seed=2)
    assert X.shape == (103, 3)
    n_out = 10
    sizes = np.bincount(y[:-n_out], minlength=4)
    assert sizes.max() - sizes.min() <= 1 and sizes.sum() == 93
    means = np.stack([X[:-n_out][y[:-n_out] == c].mean(0) for c in range(4)])
    gaps = np.linalg.norm(means[:, None] - means[None], axis=-1)[np.triu_indices(4, 1)]
    assert gaps.min() > 6.0 - 1.5
    centre = means.mean(0)
    assert np.all(np.abs(X[-n_out:] - centre) <= 20.0 + 1.0)
    X2, y2 = make_blobs(103, 4, dim=3, separation=6.0, noise_fraction=0.1, seed=2)
    np.testing.assert_array_equal(X, X2)
    with pytest.raises(InvalidInput):
        make_blobs(10, 2, noise_fraction=1.0)


def test_exact_kpkm_descends_and_clusters(blobs3):
    X, y = blobs3
    res = exact_kpkm(X[::3], 3, seed=0)
    assert accuracy(res.assignments, y[::3]) == 1.0
    prev_f, prev_s = res.initial_objective, res.objective_trace[0].s
    for e in res.objective_trace:
        if e.s == prev_s:
            assert e.objective <= prev_f * (1 + 1e-9)
        prev_f, prev_s = e.objective, e.s
    np.testing.assert_allclose(res.W.sum(axis=0), 1.0)


def test_exact_kpkm_shared_init_matches_rff_at_large_dimension():
    X, _ = make_blobs(40, 3, dim=2, separation=3.0, seed=4)
    spec = KernelSpec(4.0)
    rff = sample_rff(2, 4096, spec, 4)
    Phi = map_features(X, rff)
    C = init_centroids(Phi, 3, 4)
    a = fit_kpkm(X, 3, spec, D=4096, seed=4, init=C)
    b = exact_kpkm(X, 3, spec, init_labels=sq_distances(Phi, C).argmin(1))
    assert accuracy(a.assignments, b.assignments) >= 0.95


def test_exact_kpkm_rejects_empty_initial_cluster():
    with pytest.raises(InvalidInput):
        exact_kpkm(np.random.default_rng(0).standard_normal((10, 2)), 3,
                   init_labels=np.zeros(10, dtype=int))


def test_lloyd_kmeans_and_power_kmeans_on_blobs(blobs3):
    X, y = blobs3
    km = lloyd_kmeans(X, 3, seed=0)
    assert accuracy(km.assignments, y) == 1.0
    assert np.isclose(km.inertia, kkm_cost(X, km.assignments))
    pk = power_kmeans(X, 3, seed=0)
    assert accuracy(pk.assignments, y) == 1.0
