"""Haar wavelet variance: hand values, exact Gaussian oracle, bootstrap."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from msical.errors import DataError, ScaleError, SizeError
from msical.rng import substream
from msical.wavelet import (
    default_depth,
    estimate_wv,
    estimate_wv_cov,
    haar_coefficients,
)


def _haar_filter(tau: int) -> np.ndarray:
    return np.concatenate((np.full(tau // 2, -1.0), np.full(tau // 2, 1.0))) / tau


def _exact_var_wn(sigma2: float, t: int, j: int) -> float:
    """Exact Var(nu_hat_j) for Gaussian white noise.

    The coefficients W_t are jointly Gaussian with autocovariance
    gamma(k) = sigma2 * rho(k), rho(k) the Haar filter autocorrelation,
    so by the Isserlis identity
    Var(nu_hat) = (2/m^2) * sum_{|k|<m} (m-|k|) gamma(k)^2.
    """
    tau = 2**j
    m = t - tau + 1
    h = _haar_filter(tau)
    gamma = sigma2 * np.correlate(h, h, "full")[len(h) - 1 :]
    ks = np.arange(len(gamma))
    ks = ks[ks < m]
    return 2.0 / m**2 * (m * gamma[0] ** 2 + 2.0 * np.sum((m - ks[1:]) * gamma[ks[1:]] ** 2))


# ---------------------------------------------------------------------------
# Hand-checked values


def test_hand_values_length_four():
    x = np.array([1.0, 2.0, 3.0, 4.0])
    wv = estimate_wv(x, depth=1)
    # scale 2 coefficients are (x_t - x_{t-1}) / 2 = 0.5 each, squared 0.25
    assert wv.nu[0] == pytest.approx(0.25)
    assert wv.n_coeffs[0] == 3
    np.testing.assert_array_equal(wv.taus, [2])
    w2 = haar_coefficients(x, 2)
    # recent half minus older half: ((3+4) - (1+2)) / 4 = +1
    np.testing.assert_allclose(w2, [1.0])


def test_level_one_is_half_increment():
    rng = substream(10, 0)
    x = rng.normal(size=200)
    np.testing.assert_allclose(haar_coefficients(x, 1), np.diff(x) / 2.0, atol=1e-14)


def test_sign_convention_on_step():
    """A step upward makes the coefficients positive (recent minus older)."""
    x = np.concatenate((np.zeros(8), np.ones(8)))
    w = haar_coefficients(x, 3)
    assert np.all(w >= 0.0)
    # centered window: (4 ones - 4 zeros) / tau with tau = 8
    assert w.max() == pytest.approx(0.5)


def test_estimate_matches_coefficient_route():
    rng = substream(11, 0)
    x = rng.normal(size=3000).cumsum()  # random walk, structure at every scale
    wv = estimate_wv(x, depth=8)
    for j in wv.levels:
        w = haar_coefficients(x, int(j))
        assert wv.nu[j - 1] == pytest.approx(np.mean(w**2), rel=1e-12)
        assert wv.n_coeffs[j - 1] == w.size == x.size - 2**int(j) + 1


def test_edof_rule():
    x = substream(12, 0).normal(size=1000)
    wv = estimate_wv(x, depth=8)
    np.testing.assert_allclose(wv.edof, np.maximum(wv.n_coeffs / wv.taus, 1.0))


# ---------------------------------------------------------------------------
# Invariances


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), scale=st.floats(0.01, 100.0), shift=st.floats(-50.0, 50.0))
def test_scale_and_shift_invariance(seed, scale, shift):
    x = substream(13, seed).normal(size=256)
    base = estimate_wv(x, depth=4).nu
    scaled = estimate_wv(scale * x + shift, depth=4).nu
    np.testing.assert_allclose(scaled, scale**2 * base, rtol=1e-9)


def test_constant_signal_has_zero_wv():
    wv = estimate_wv(np.full(64, 3.25), depth=4)
    np.testing.assert_array_equal(wv.nu, np.zeros(4))


# ---------------------------------------------------------------------------
# Exact Gaussian oracle


def test_variance_matches_exact_gaussian_formula():
    """Monte Carlo variance of nu_hat against the closed form, three levels."""
    t, s2, n_sig = 512, 1.7, 3000
    nus = np.empty((n_sig, 3))
    for i in range(n_sig):
        x = np.sqrt(s2) * substream(100, i).normal(size=t)
        nus[i] = estimate_wv(x, depth=3).nu
    emp = nus.var(axis=0, ddof=1)
    for j in (1, 2, 3):
        assert emp[j - 1] == pytest.approx(_exact_var_wn(s2, t, j), rel=0.15)
    # unbiasedness of the point estimate itself
    np.testing.assert_allclose(nus.mean(axis=0), s2 / np.array([2.0, 4.0, 8.0]), rtol=0.02)


def test_confidence_intervals_cover():
    """Chi-squared intervals are conservative for white noise: observed
    coverage stays at or above the nominal level."""
    t, s2, n_sig = 512, 1.7, 800
    hits = np.zeros(3)
    for i in range(n_sig):
        x = np.sqrt(s2) * substream(300, i).normal(size=t)
        wv = estimate_wv(x, depth=3)
        truth = s2 / wv.taus
        hits += (wv.ci_low <= truth) & (truth <= wv.ci_high)
    coverage = hits / n_sig
    assert np.all(coverage >= 0.94)
    assert np.all(coverage <= 1.0)


def test_interval_brackets_point_estimate():
    x = substream(14, 0).normal(size=512).cumsum()
    wv = estimate_wv(x)
    assert np.all(wv.ci_low <= wv.nu)
    assert np.all(wv.nu <= wv.ci_high)
    assert np.all(wv.ci_low > 0.0)


# ---------------------------------------------------------------------------
# Moving-block bootstrap covariance


def test_bootstrap_cov_tracks_exact_variance():
    """Average MBB diagonal over a few signals lands near the exact
    Gaussian variance (it is a noisy but unbiased-ish estimator)."""
    t, s2 = 4096, 1.7
    ratios = np.empty((5, 3))
    for i in range(5):
        x = np.sqrt(s2) * substream(200, i).normal(size=t)
        cov = estimate_wv_cov(x, depth=3, n_boot=200, seed=i)
        ratios[i] = [cov[j, j] / _exact_var_wn(s2, t, j + 1) for j in range(3)]
    mean_ratio = ratios.mean(axis=0)
    assert np.all(mean_ratio > 0.7)
    assert np.all(mean_ratio < 1.4)


def test_bootstrap_cov_is_psd_and_deterministic():
    x = substream(15, 0).normal(size=1024)
    a = estimate_wv_cov(x, depth=4, n_boot=60, seed=3)
    b = estimate_wv_cov(x, depth=4, n_boot=60, seed=3)
    np.testing.assert_array_equal(a, b)
    np.testing.assert_allclose(a, a.T)
    assert np.all(np.linalg.eigvalsh(a) >= -1e-18)


# ---------------------------------------------------------------------------
# Depth rules and rejection


def test_default_depth_rule():
    assert default_depth(4) == 1
    assert default_depth(100) == 5
    assert default_depth(1_000_000) == 13  # capped
    assert estimate_wv(substream(16, 0).normal(size=100)).depth == 5


@pytest.mark.parametrize(
    "call, err",
    [
        (lambda: estimate_wv(np.ones(3)), SizeError),
        (lambda: estimate_wv(np.array([1.0, np.nan, 2.0, 3.0])), DataError),
        (lambda: estimate_wv(np.arange(16.0), depth=4), ScaleError),
        (lambda: estimate_wv(np.arange(16.0), depth=0), ScaleError),
        (lambda: estimate_wv(np.arange(16.0), ci_level=1.0), DataError),
        (lambda: haar_coefficients(np.arange(8.0), 0), ScaleError),
        (lambda: haar_coefficients(np.arange(8.0), 4), ScaleError),
        (lambda: estimate_wv_cov(np.arange(64.0), depth=9), ScaleError),
        (lambda: estimate_wv_cov(np.arange(64.0), depth=2, n_boot=1), SizeError),
        (lambda: estimate_wv_cov(np.arange(64.0), depth=2, block_len=65), SizeError),
    ],
)
def test_rejection(call, err):
    with pytest.raises(err):
        call()
