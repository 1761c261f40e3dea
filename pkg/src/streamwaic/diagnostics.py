"""Effective sample size for scalar MCMC traces."""

import numpy as np


def autocorrelation(x):
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    x = x - x.mean()
    size = 1 << (2 * n - 1).bit_length()
    freq = np.fft.rfft(x, size)
    acov = np.fft.irfft(freq * np.conj(freq), size)[:n]
    if acov[0] <= 0:
        return np.ones(1)
    return acov / acov[0]


def effective_sample_size(x):
    """ESS with Geyer's initial monotone positive-sequence truncation.

    A constant trace has no information about mixing and returns ``nan``.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    if n < 4 or np.ptp(x) == 0:
        return float("nan")
    rho = autocorrelation(x)
    if rho.size == 1:
        return float("nan")
    pairs = []
    for k in range(0, n - 1, 2):
        p = rho[k] + rho[k + 1]
        if p <= 0:
            break
        pairs.append(p)
    pairs = np.minimum.accumulate(np.array(pairs)) if pairs else np.array([1.0])
    tau = -1.0 + 2.0 * pairs.sum()
    return float(n / max(tau, 1.0 / np.log10(max(n, 10))))
