"""Gaussian kernel and random Fourier features.

The feature map sends ``x`` in R^d to R^(2D)::

    sqrt(1/D) * (sin(w_1.x), cos(w_1.x), ..., sin(w_D.x), cos(w_D.x))

with frequencies ``w_i`` drawn i.i.d. from N(0, sigma^-2 I_d).  Inner products
of mapped points are unbiased estimates of exp(-||x - y||^2 / (2 sigma^2)) and
every mapped row has unit norm.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_features, check_positive
from .exceptions import InvalidInput

DEFAULT_BANDWIDTH = 1e3


@dataclass(frozen=True)
class KernelSpec:
    """Gaussian kernel exp(-||x - y||^2 / (2 bandwidth^2))."""

    bandwidth: float = DEFAULT_BANDWIDTH

    def __post_init__(self):
        check_positive(self.bandwidth, "bandwidth")


def gaussian_kernel(x, y, spec=KernelSpec()):
    """k(x, y) over the last axis; 2-D inputs give one value per row pair."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise InvalidInput(f"dimension mismatch: {x.shape} vs {y.shape}")
    sq = np.sum((x - y) ** 2, axis=-1)
    out = np.exp(-sq / (2.0 * spec.bandwidth ** 2))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class RffMap:
    """Sampled frequencies of a random Fourier feature map.

    ``frequencies`` has shape (D, d).  Maps are immutable; the same
    (seed, D, d, bandwidth) always regenerates the same frequencies.
    """

    frequencies: np.ndarray = field(repr=False)
    kernel: KernelSpec
    seed: int

    @property
    def n_components(self):
        return self.frequencies.shape[0]

    @property
    def n_features_in(self):
        return self.frequencies.shape[1]

    @property
    def n_features_out(self):
        return 2 * self.frequencies.shape[0]

    def transform(self, X):
        return map_features(X, self)


def sample_rff(d, D, spec=KernelSpec(), seed=0):
    """Draw D frequency vectors for a d-dimensional Gaussian kernel.

    Sampling uses numpy's PCG64 generator seeded with ``seed``.
    """
    if int(d) < 1 or int(D) < 1:
        raise InvalidInput(f"d and D must be >= 1, got d={d}, D={D}")
    rng = np.random.Generator(np.random.PCG64(seed))
    omega = rng.standard_normal((int(D), int(d))) / spec.bandwidth
    omega.setflags(write=False)
    return RffMap(frequencies=omega, kernel=spec, seed=int(seed))


def map_features(X, rff):
    X = check_features(X)
    if X.shape[1] != rff.n_features_in:
        raise InvalidInput(
            f"X has {X.shape[1]} columns but the map expects {rff.n_features_in}")
    proj = X @ rff.frequencies.T
    out = np.empty((X.shape[0], 2 * rff.n_components))
    np.sin(proj, out=out[:, 0::2])
    np.cos(proj, out=out[:, 1::2])
    out *= math.sqrt(1.0 / rff.n_components)
    return out


def recommended_dim(k):
    """Default number of frequencies, ceil(4 ln(2k)^3)."""
    if int(k) < 1:
        raise InvalidInput(f"k must be >= 1, got {k}")
    return int(math.ceil(4.0 * math.log(2.0 * k) ** 3))


class RandomFourierFeatures(TransformerMixin, BaseEstimator):
    """Scikit-learn transformer wrapping :func:`sample_rff` / :func:`map_features`.

    Parameters
    ----------
    n_components : int, default=100
        Number of frequencies D; the output has 2*D columns.
    bandwidth : float, default=1e3
        Gaussian kernel bandwidth sigma.
    random_state : int, default=0
        Seed for the frequency draw.

    Attributes
    ----------
    rff_ : RffMap
    n_features_in_ : int
    """

    def __init__(self, n_components=100, bandwidth=DEFAULT_BANDWIDTH, random_state=0):
        self.n_components = n_components
        self.bandwidth = bandwidth
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_features(X)
        self.rff_ = sample_rff(X.shape[1], self.n_components,
                               KernelSpec(self.bandwidth), self.random_state)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "rff_")
        return map_features(X, self.rff_)
