from typing import NamedTuple

import numpy as np

# squared distances are clamped here before raising to negative powers
DIST_FLOOR = 1e-12


class TraceEntry(NamedTuple):
    iteration: int
    s: float
    objective: float
    alpha: tuple = ()


class DeadClusterEvent(NamedTuple):
    iteration: int
    cluster: int
    reseeded_at: int


def sq_distances(Phi, centers, out=None, block=2048):
    """(n, k) squared Euclidean distances, computed directly without the
    ||a||^2 + ||b||^2 - 2ab expansion so small distances keep full precision.
    Rows are processed in blocks so the difference buffer stays in cache."""
    n = Phi.shape[0]
    k = centers.shape[0]
    if out is None:
        out = np.empty((n, k))
    buf = np.empty((min(block, n), Phi.shape[1]))
    for start in range(0, n, block):
        rows = Phi[start:start + block]
        b = buf[:rows.shape[0]]
        for j in range(k):
            np.subtract(rows, centers[j], out=b)
            out[start:start + rows.shape[0], j] = np.einsum("ij,ij->i", b, b)
    return out


def farthest_points(min_dist, count, exclude=()):
    """Indices of the ``count`` rows with the largest distance to their
    nearest centroid, skipping ``exclude``."""
    order = np.argsort(-min_dist, kind="stable")
    taken = set(exclude)
    picked = []
    for i in order:
        if i not in taken:
            picked.append(int(i))
            taken.add(int(i))
            if len(picked) == count:
                break
    return picked
