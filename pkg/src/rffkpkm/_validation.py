import numbers

import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import InvalidInput


def check_features(X, name="X", min_samples=1):
    """Return ``X`` as a finite 2-D float64 array or raise InvalidInput."""
    try:
        X = check_array(X, dtype=np.float64, ensure_2d=True,
                        ensure_all_finite=True, ensure_min_samples=min_samples)
    except ValueError as exc:
        raise InvalidInput(f"{name}: {exc}") from exc
    return X


def check_n_clusters(k, n_samples):
    if not isinstance(k, numbers.Integral) or k < 1:
        raise InvalidInput(f"n_clusters must be a positive integer, got {k!r}")
    if k > n_samples:
        raise InvalidInput(f"n_clusters={k} exceeds the number of samples ({n_samples})")
    return int(k)


def check_positive(value, name):
    if not np.isfinite(value) or value <= 0:
        raise InvalidInput(f"{name} must be a positive finite number, got {value!r}")
    return float(value)


def check_views(Xs):
    """Validate a list of views sharing the same number of rows."""
    if isinstance(Xs, np.ndarray) and Xs.ndim == 2:
        Xs = [Xs]
    Xs = list(Xs)
    if not Xs:
        raise InvalidInput("at least one view is required")
    Xs = [check_features(X, name=f"view {l}") for l, X in enumerate(Xs)]
    n = Xs[0].shape[0]
    for l, X in enumerate(Xs[1:], start=1):
        if X.shape[0] != n:
            raise InvalidInput(
                f"view 0 has {n} rows but view {l} has {X.shape[0]}")
    return Xs
