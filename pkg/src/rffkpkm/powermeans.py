"""Power means M_s(y) = ((1/k) sum y_i^s)^(1/s), their gradients, and annealing.

Everything is evaluated in log space after dividing by min(y) (s < 0) or
max(y) (s > 0), so s can be pushed to -1e6 without under- or overflow.
Functions act on the last axis, so a (n, k) array gives n means at once.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .exceptions import InvalidInput

_TINY = np.finfo(np.float64).tiny


def _check_positive_last_axis(y):
    y = np.asarray(y, dtype=np.float64)
    if y.ndim == 0 or y.shape[-1] == 0:
        raise InvalidInput("power means need at least one entry")
    if not np.all(np.isfinite(y)) or np.any(y <= 0):
        raise InvalidInput("power means need strictly positive finite entries")
    return y


def _log_ratios(y, s):
    # ratios to min(y) for s < 0 (so ratio**s <= 1), to max(y) for s > 0
    logy = np.log(y)
    ref = logy.min(axis=-1, keepdims=True) if s < 0 else logy.max(axis=-1, keepdims=True)
    return logy - ref, ref


def power_mean(y, s):
    y = _check_positive_last_axis(y)
    if s == 0:
        raise InvalidInput("s must be nonzero")
    k = y.shape[-1]
    logr, ref = _log_ratios(y, s)
    log_inner = logsumexp(s * logr, axis=-1) - np.log(k)
    out = np.exp(ref[..., 0] + log_inner / s)
    # rounding can push the result a hair outside [min, max]
    return np.clip(out, y.min(axis=-1), y.max(axis=-1))


def gradient_weights(y, s):
    """Partial derivatives of M_s with respect to each entry of ``y``.

    w_j = (1/k) y_j^(s-1) / ((1/k) sum_c y_c^s)^(1 - 1/s).  The gradient is
    homogeneous of degree zero, so the min-shift cancels exactly.  Values that
    underflow are flushed to 0.
    """
    y = _check_positive_last_axis(y)
    if s == 0:
        raise InvalidInput("s must be nonzero")
    k = y.shape[-1]
    logr, _ = _log_ratios(y, s)
    log_inner = logsumexp(s * logr, axis=-1, keepdims=True) - np.log(k)
    logw = -np.log(k) + (s - 1.0) * logr - (1.0 - 1.0 / s) * log_inner
    w = np.exp(logw)
    w[w < _TINY] = 0.0
    return w


@dataclass(frozen=True)
class PowerSchedule:
    """Annealing schedule s <- gamma * s every ``cadence`` iterations.

    ``s0`` is stored as given but callers should pass a negative value;
    :meth:`initial` returns ``-abs(s0)`` so magnitudes such as 15 work too.
    """

    s0: float = -15.0
    gamma: float = 1.04
    cadence: int = 3
    s_floor: float = -1e6

    def __post_init__(self):
        if self.s0 == 0 or not np.isfinite(self.s0):
            raise InvalidInput(f"s0 must be a nonzero finite number, got {self.s0}")
        if not self.gamma >= 1:
            raise InvalidInput(f"gamma must be >= 1, got {self.gamma}")
        if int(self.cadence) < 1:
            raise InvalidInput(f"cadence must be >= 1, got {self.cadence}")
        if not self.s_floor < 0:
            raise InvalidInput(f"s_floor must be negative, got {self.s_floor}")

    def initial(self):
        return max(-abs(self.s0), self.s_floor)

    def advance(self, s, iteration):
        return advance(self, s, iteration)

    def exhausted(self, s):
        """True when further calls to :meth:`advance` cannot change ``s``."""
        return self.gamma == 1 or s <= self.s_floor


def advance(schedule, s, iteration):
    if s >= 0:
        raise InvalidInput(f"s must be negative, got {s}")
    if iteration % schedule.cadence == 0:
        s = schedule.gamma * s
    return max(s, schedule.s_floor)
