"""Empirical characteristic functions and their agreement tests."""

import numpy as np


def empirical_chf(points, theta, chunk=256):
    """Sample mean of ``exp(i theta . X)`` and its standard error.

    ``points`` has shape ``(paths, d)``, ``theta`` shape ``(G, d)``.  The
    standard error is ``sqrt((1 - |mean|^2) / paths)``, the exact standard
    deviation of the real+imaginary parts combined.
    """
    x = np.asarray(points, dtype=float)
    th = np.asarray(theta, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if th.ndim == 1:
        th = th[:, None]
    paths = x.shape[0]
    vals = np.empty(th.shape[0], dtype=complex)
    for s in range(0, th.shape[0], chunk):
        phase = x @ th[s:s + chunk].T
        vals[s:s + chunk] = np.exp(1j * phase).mean(axis=0)
    var = np.clip(1.0 - np.abs(vals) ** 2, 0.0, None)
    return vals, np.sqrt(var / paths)


def agreement_fraction(a, b, stderr, k=4.0):
    """Fraction of grid points with ``|a - b| <= k * stderr``."""
    a, b, se = np.asarray(a), np.asarray(b), np.asarray(stderr)
    ok = np.abs(a - b) <= k * se + 1e-15
    return float(ok.mean())
