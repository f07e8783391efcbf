"""Scalable kernel power k-means with random Fourier features."""

from .exceptions import InvalidInput, ParseError, ValidationError
from .features import (KernelSpec, RandomFourierFeatures, RffMap, gaussian_kernel,
                       map_features, recommended_dim, sample_rff)
from .kpkm import KernelPowerKMeans, KpkmResult, fit_kpkm, init_centroids, kpkm_step, objective
from .metrics import accuracy, nmi, purity
from .mkpkm import MkpkmConfig, MkpkmResult, MultiKernelPowerKMeans, fit_mkpkm
from .powermeans import PowerSchedule, advance, gradient_weights, power_mean

__version__ = "0.1.0"

__all__ = [
    "InvalidInput", "ParseError", "ValidationError",
    "KernelSpec", "RandomFourierFeatures", "RffMap", "gaussian_kernel",
    "map_features", "recommended_dim", "sample_rff",
    "KernelPowerKMeans", "KpkmResult", "fit_kpkm", "init_centroids", "kpkm_step", "objective",
    "accuracy", "nmi", "purity",
    "MkpkmConfig", "MkpkmResult", "MultiKernelPowerKMeans", "fit_mkpkm",
    "PowerSchedule", "advance", "gradient_weights", "power_mean",
]
