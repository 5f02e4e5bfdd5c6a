"""Haar wavelet-variance estimation.

Implements the overlapping (maximal-overlap) Haar transform at dyadic
scales tau_j = 2**j, the unbiased wavelet-variance estimator, its
chi-squared confidence intervals, and a moving-block bootstrap
estimator of the covariance of the wavelet-variance vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2

from .errors import ScaleError, SizeError, DataError

__all__ = [
    "WVEstimate",
    "default_depth",
    "haar_coefficients",
    "estimate_wv",
    "estimate_wv_cov",
]

MAX_DEPTH = 13


def default_depth(n_samples: int) -> int:
    """Deepest usable level: min(13, floor(log2 T) - 1)."""
    if n_samples < 4:
        raise SizeError(f"need at least 4 samples, got {n_samples}")
    return min(MAX_DEPTH, int(math.floor(math.log2(n_samples))) - 1)


def _check_signal(x) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    if x.size < 4:
        raise SizeError(f"need at least 4 samples, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise DataError("signal contains NaN or inf")
    return x


def haar_coefficients(x, level: int) -> np.ndarray:
    """Overlapping Haar detail coefficients at one level.

    For tau = 2**level the coefficient anchored at sample t (1-indexed,
    t = tau..T) is the mean of the most recent tau/2 samples minus the
    mean of the tau/2 samples before them, all divided by 2:

        W[t] = (sum(x[t-tau/2+1 .. t]) - sum(x[t-tau+1 .. t-tau/2])) / tau

    Parameters
    ----------
    x : array_like
        Signal of length T.
    level : int
        Dyadic level j >= 1 with 2**level <= T.

    Returns
    -------
    ndarray of shape (T - tau + 1,)
    """
    x = np.asarray(x, dtype=float).ravel()
    if level < 1:
        raise ScaleError(f"level must be >= 1, got {level}")
    tau = 1 << level
    n = x.size
    if tau > n:
        raise ScaleError(f"scale {tau} exceeds signal length {n}")
    half = tau // 2
    prefix = np.concatenate(([0.0], np.cumsum(x)))
    t = np.arange(tau, n + 1)
    recent = prefix[t] - prefix[t - half]
    older = prefix[t - half] - prefix[t - tau]
    return (recent - older) / tau


@dataclass
class WVEstimate:
    """Wavelet-variance estimate across levels 1..J."""

    levels: np.ndarray
    taus: np.ndarray
    nu: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    n_coeffs: np.ndarray
    edof: np.ndarray
    n_samples: int
    ci_level: float
    cov: np.ndarray | None = None

    @property
    def depth(self) -> int:
        return int(self.levels[-1])

    def to_dict(self) -> dict:
        out = {
            "levels": [int(v) for v in self.levels],
            "taus": [int(v) for v in self.taus],
            "nu": [float(v) for v in self.nu],
            "ci_low": [float(v) for v in self.ci_low],
            "ci_high": [float(v) for v in self.ci_high],
            "n_coeffs": [int(v) for v in self.n_coeffs],
            "edof": [float(v) for v in self.edof],
            "n_samples": int(self.n_samples),
            "ci_level": float(self.ci_level),
        }
        if self.cov is not None:
            out["cov"] = [[float(v) for v in row] for row in self.cov]
        return out


def estimate_wv(x, depth: int | None = None, ci_level: float = 0.95) -> WVEstimate:
    """Unbiased Haar wavelet variance with chi-squared intervals.

    nu_hat[j] is the mean of the squared overlapping Haar coefficients
    at level j; all T - tau_j + 1 of them are used, which keeps the
    estimator unbiased for stationary signals at every T.  Confidence
    intervals treat edof_j * nu_hat[j] / nu[j] as chi-squared with
    edof_j = max(m_j / 2**j, 1) degrees of freedom.

    Parameters
    ----------
    x : array_like
        Signal of length T >= 4.
    depth : int, optional
        Number of levels J. Defaults to min(13, floor(log2 T) - 1);
        values beyond floor(log2 T) - 1 raise ``ScaleError``.
    ci_level : float
        Two-sided confidence level in (0, 1).
    """
    x = _check_signal(x)
    n = x.size
    max_depth = int(math.floor(math.log2(n))) - 1
    if depth is None:
        depth = min(MAX_DEPTH, max_depth)
    if depth < 1 or depth > max_depth:
        raise ScaleError(f"depth must be in [1, {max_depth}] for T={n}, got {depth}")
    if not (0.0 < ci_level < 1.0):
        raise DataError(f"ci_level must be in (0, 1), got {ci_level}")

    levels = np.arange(1, depth + 1)
    taus = 1 << levels
    nu = np.empty(depth)
    counts = np.empty(depth, dtype=int)
    prefix = np.concatenate(([0.0], np.cumsum(x)))
    for j in levels:
        tau = 1 << int(j)
        half = tau // 2
        # prefix[t] - 2 prefix[t-half] + prefix[t-tau] for t = tau..n,
        # written with views to avoid index-array gathers.
        w = (prefix[tau:] - 2.0 * prefix[half : n + 1 - half] + prefix[: n + 1 - tau]) / tau
        counts[j - 1] = w.size
        nu[j - 1] = float(w @ w) / w.size
    edof = np.maximum(counts / taus, 1.0)
    alpha = 1.0 - ci_level
    ci_low = nu * edof / chi2.ppf(1.0 - alpha / 2.0, edof)
    ci_high = nu * edof / chi2.ppf(alpha / 2.0, edof)
    return WVEstimate(
        levels=levels,
        taus=taus.astype(int),
        nu=nu,
        ci_low=ci_low,
        ci_high=ci_high,
        n_coeffs=counts,
        edof=edof,
        n_samples=n,
        ci_level=ci_level,
    )


def _wv_rows(xs: np.ndarray, depth: int) -> np.ndarray:
    """Wavelet variances for each row of a 2-D array (bootstrap helper)."""
    n = xs.shape[1]
    prefix = np.concatenate((np.zeros((xs.shape[0], 1)), np.cumsum(xs, axis=1)), axis=1)
    out = np.empty((xs.shape[0], depth))
    for j in range(1, depth + 1):
        tau = 1 << j
        half = tau // 2
        w = (
            prefix[:, tau:] - 2.0 * prefix[:, half : n + 1 - half] + prefix[:, : n + 1 - tau]
        ) / tau
        out[:, j - 1] = np.einsum("ij,ij->i", w, w) / w.shape[1]
    return out


def estimate_wv_cov(
    x,
    depth: int,
    n_boot: int = 100,
    block_len: int | None = None,
    seed: int = 0,
) -> np.ndarray:
    """Moving-block bootstrap covariance of the wavelet-variance vector.

    Resamples ceil(T / L) blocks of length L (uniform starts, with
    replacement), truncates to length T, recomputes the wavelet
    variance, and returns the sample covariance over ``n_boot``
    resamples, symmetrized and eigenvalue-floored at zero so the result
    is positive semi-definite.

    Parameters
    ----------
    x : array_like
        Signal of length T.
    depth : int
        Number of levels J (same rule as :func:`estimate_wv`).
    n_boot : int
        Number of bootstrap resamples (>= 2).
    block_len : int, optional
        Block length L; defaults to ceil(T ** (1/3)).
    seed : int
        Seed for the resampling stream.
    """
    x = _check_signal(x)
    n = x.size
    max_depth = int(math.floor(math.log2(n))) - 1
    if depth < 1 or depth > max_depth:
        raise ScaleError(f"depth must be in [1, {max_depth}] for T={n}, got {depth}")
    if n_boot < 2:
        raise SizeError(f"n_boot must be >= 2, got {n_boot}")
    if block_len is None:
        block_len = int(math.ceil(n ** (1.0 / 3.0)))
    if not (1 <= block_len <= n):
        raise SizeError(f"block_len must be in [1, {n}], got {block_len}")

    from .rng import substream

    rng = substream(seed)
    n_blocks = int(math.ceil(n / block_len))
    offsets = np.arange(block_len)
    nus = np.empty((n_boot, depth))
    # Cap resample matrices at ~2e7 elements to bound memory.
    chunk = max(1, int(2e7 // n))
    done = 0
    while done < n_boot:
        m = min(chunk, n_boot - done)
        starts = rng.integers(0, n - block_len + 1, size=(m, n_blocks))
        idx = (starts[:, :, None] + offsets[None, None, :]).reshape(m, n_blocks * block_len)
        nus[done : done + m] = _wv_rows(x[idx[:, :n]], depth)
        done += m
    cov = np.cov(nus, rowvar=False, ddof=1).reshape(depth, depth)
    cov = 0.5 * (cov + cov.T)
    eigvals, eigvecs = np.linalg.eigh(cov)
    return (eigvecs * np.clip(eigvals, 0.0, None)) @ eigvecs.T
