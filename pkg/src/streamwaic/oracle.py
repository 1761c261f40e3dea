"""Offline WAIC from a stored ``M x S`` matrix of log predictive densities.

This is the store-everything computation the online engine replaces. It uses
a batch max-shifted logSumExp and a two-pass sample variance, so it shares no
arithmetic path with the streaming reducers it is used to check. Sums are
correctly rounded (``math.fsum``), so the result does not depend on sample
order at all.
"""

import math

import numpy as np

from .engine import WaicResult, WaicSummary
from .exceptions import InsufficientSamplesError, NumericalError


def batch_log_mean_exp(row):
    row = np.asarray(row, dtype=np.float64)
    top = row.max()
    if top == -np.inf:
        return -np.inf
    return float(top + np.log(math.fsum(np.exp(row - top))) - np.log(row.size))


def two_pass_variance(row):
    row = np.asarray(row, dtype=np.float64)
    mean = math.fsum(row) / row.size
    dev = row - mean
    return math.fsum(dev * dev) / (row.size - 1)


def offline_waic(h, mode="conditional", K=1, fractions=(1.0,)):
    """WAIC from ``h`` of shape ``(M, S)`` (or ``(F, M, S)`` for several fractions)."""
    h = np.asarray(h, dtype=np.float64)
    if h.ndim == 2:
        h = h[None]
    if h.ndim != 3:
        raise ValueError(f"h must be (M, S) or (F, M, S), got shape {h.shape}")
    F, M, S = h.shape
    if S < 2:
        raise InsufficientSamplesError(f"WAIC needs at least 2 samples, got {S}")
    if np.isnan(h).any() or (h == np.inf).any():
        raise NumericalError("h matrix contains NaN or +inf")
    if len(fractions) != F:
        fractions = tuple(range(F))
    summaries = []
    for f in range(F):
        lppd_m = np.array([batch_log_mean_exp(h[f, m]) for m in range(M)])
        pwaic_m = np.array([
            np.inf if np.any(h[f, m] == -np.inf) else two_pass_variance(h[f, m])
            for m in range(M)
        ])
        lppd = float(np.sum(lppd_m))
        p_waic = float(np.sum(pwaic_m))
        summaries.append(WaicSummary(fractions[f], -2.0 * (lppd - p_waic), lppd, p_waic, lppd_m, pwaic_m))
    return WaicResult(mode, K, M, S, tuple(summaries))


def naive_log_mean_exp(row):
    """Unshifted ``log(mean(exp(row)))``; underflows for very negative rows."""
    row = np.asarray(row, dtype=np.float64)
    with np.errstate(divide="ignore"):
        return float(np.log(np.sum(np.exp(row)) / row.size))
