"""Model-implied wavelet variance, its Jacobian, and the fast evaluator."""

import numpy as np
import pytest

from msical.errors import ScaleError
from msical.models import (
    Ar1,
    CompositeModel,
    Drift,
    QuantizationNoise,
    RandomWalk,
    WhiteNoise,
)
from msical.rng import substream
from msical.theory import (
    WVEvaluator,
    param_bounds,
    theoretical_wv,
    wv_jacobian,
    wv_oracle,
)

DEPTH = 9
TAUS = 2.0 ** np.arange(1, DEPTH + 1)


def random_model(rng) -> CompositeModel:
    """Random composite model over the supported block set."""
    blocks = [WhiteNoise(10.0 ** rng.uniform(-8, 0))]
    if rng.random() < 0.5:
        blocks.append(QuantizationNoise(10.0 ** rng.uniform(-8, 0)))
    n_ar1 = rng.integers(0, 3)
    phis = np.sort(rng.uniform(0.05, 0.9995, size=n_ar1))[::-1]
    while len(phis) == 2 and phis[0] - phis[1] < 2e-3:
        phis = np.sort(rng.uniform(0.05, 0.9995, size=2))[::-1]
    for phi in phis:
        blocks.append(Ar1(float(phi), 10.0 ** rng.uniform(-10, -2)))
    if rng.random() < 0.5:
        blocks.append(RandomWalk(10.0 ** rng.uniform(-12, -4)))
    if rng.random() < 0.5:
        blocks.append(Drift(10.0 ** rng.uniform(-10, -5)))
    return CompositeModel(tuple(blocks))


# ---------------------------------------------------------------------------
# Closed forms per block


def test_white_noise_closed_form():
    nu = theoretical_wv(CompositeModel((WhiteNoise(2.5),)), DEPTH).nu
    np.testing.assert_allclose(nu, 2.5 / TAUS, rtol=1e-13)


def test_random_walk_closed_form():
    nu = theoretical_wv(CompositeModel((RandomWalk(3e-4),)), DEPTH).nu
    np.testing.assert_allclose(nu, 3e-4 * (TAUS**2 + 2.0) / (12.0 * TAUS), rtol=1e-13)


def test_drift_closed_form():
    nu = theoretical_wv(CompositeModel((Drift(1e-3),)), DEPTH).nu
    np.testing.assert_allclose(nu, 1e-6 * TAUS**2 / 16.0, rtol=1e-13)


def test_quantization_closed_form():
    nu = theoretical_wv(CompositeModel((QuantizationNoise(0.7),)), DEPTH).nu
    np.testing.assert_allclose(nu, 3.0 * 0.7 / TAUS**2, rtol=1e-13)


def test_ar1_hand_value():
    # phi = 1/2, eta2 = 1, tau = 2: gamma(0) = 4/3, gamma(1) = 2/3,
    # Var((x_t - x_{t-1})/2) = (2*4/3 - 2*2/3)/4 = 1/3.
    nu = theoretical_wv(CompositeModel((Ar1(0.5, 1.0),)), 1).nu
    assert nu[0] == pytest.approx(1.0 / 3.0, rel=1e-13)


def test_blocks_add():
    m = CompositeModel((WhiteNoise(1.0), RandomWalk(1e-3)))
    total = theoretical_wv(m, DEPTH)
    wn = theoretical_wv(CompositeModel((WhiteNoise(1.0),)), DEPTH).nu
    rw = theoretical_wv(CompositeModel((RandomWalk(1e-3),)), DEPTH).nu
    np.testing.assert_allclose(total.nu, wn + rw, rtol=1e-13)
    assert total.per_block.shape == (DEPTH, 2)
    np.testing.assert_allclose(total.per_block.sum(axis=1), total.nu)


# ---------------------------------------------------------------------------
# Dual-route cross-checks


def test_theoretical_matches_analytic_oracle_on_random_models():
    rng = substream(21, 0)
    for _ in range(25):
        m = random_model(rng)
        nu = theoretical_wv(m, DEPTH).nu
        ora = wv_oracle(m, DEPTH, mode="analytic")
        np.testing.assert_allclose(nu, ora, rtol=1e-10)


def test_theoretical_matches_simulation():
    m = CompositeModel((WhiteNoise(1.0), Ar1(0.9, 0.2), RandomWalk(1e-3)))
    nu = theoretical_wv(m, 6).nu
    mc_mean, mc_se = wv_oracle(m, 6, mode="mc", n_sims=60, n_samples=4096, seed=5)
    z = np.abs(mc_mean - nu) / mc_se
    assert np.all(z < 4.0)


# ---------------------------------------------------------------------------
# Jacobian


def test_jacobian_analytic_vs_fd():
    m = CompositeModel((WhiteNoise(1e-4), Ar1(0.99, 1e-8), RandomWalk(1e-9)))
    jac_auto, methods_auto = wv_jacobian(m, DEPTH, mode="auto")
    jac_fd, methods_fd = wv_jacobian(m, DEPTH, mode="fd")
    assert jac_auto.shape == (DEPTH, m.p)
    assert set(methods_fd) == {"central-difference"}
    assert methods_auto[0] == "analytic"  # white noise column
    np.testing.assert_allclose(jac_auto, jac_fd, rtol=5e-5)


def test_jacobian_wn_column_is_inverse_tau():
    m = CompositeModel((WhiteNoise(3.0), Drift(1e-4)))
    jac, _ = wv_jacobian(m, DEPTH)
    np.testing.assert_allclose(jac[:, 0], 1.0 / TAUS, rtol=1e-12)
    np.testing.assert_allclose(jac[:, 1], 2.0 * 1e-4 * TAUS**2 / 16.0, rtol=1e-7)


def test_jacobian_rejects_unknown_mode():
    with pytest.raises(ScaleError):
        wv_jacobian(CompositeModel((WhiteNoise(1.0),)), 3, mode="exact")


# ---------------------------------------------------------------------------
# Fast evaluator


def test_evaluator_matches_theoretical_on_random_thetas():
    tpl = CompositeModel((WhiteNoise(1.0), Ar1(0.99, 1.0), RandomWalk(1.0)))
    ev = WVEvaluator(tpl, DEPTH)
    rng = substream(22, 0)
    for _ in range(20):
        theta = np.array(
            [
                10.0 ** rng.uniform(-8, 0),
                rng.uniform(0.1, 0.999),
                10.0 ** rng.uniform(-10, -2),
                10.0 ** rng.uniform(-12, -4),
            ]
        )
        np.testing.assert_allclose(
            ev(theta), theoretical_wv(tpl.unflatten(theta), DEPTH).nu, rtol=1e-9
        )


def test_evaluator_jacobian_matches_independent_route():
    """Evaluator jacobian (analytic + isolated-curve differences) against
    the theoretical_wv-based jacobian."""
    tpl = CompositeModel((WhiteNoise(1.0), Ar1(0.99, 1.0), RandomWalk(1.0)))
    ev = WVEvaluator(tpl, 10)
    for theta in ([5e-5, 0.9995, 7e-10, 2e-11], [0.3, 0.7, 0.05, 1e-4]):
        theta = np.asarray(theta)
        ja = ev.jacobian(theta)
        jb, _ = wv_jacobian(tpl.unflatten(theta), 10)
        np.testing.assert_allclose(ja, jb, rtol=5e-4)


def test_evaluator_near_unit_root():
    """phi extremely close to 1 stresses the geometric-sum route; the two
    routes still agree to a few parts per million."""
    tpl = CompositeModel((Ar1(0.9, 1.0),))
    ev = WVEvaluator(tpl, 13)
    theta = np.array([0.99999, 2e-9])
    ref = theoretical_wv(tpl.unflatten(theta), 13).nu
    np.testing.assert_allclose(ev(theta), ref, rtol=5e-6)


def test_param_bounds_box_ar1_between_neighbours():
    m = CompositeModel((WhiteNoise(1.0), Ar1(0.99, 1.0), Ar1(0.5, 1.0)))
    bounds = param_bounds(m)
    assert bounds[0] == (0.0, np.inf)
    lo1, hi1 = bounds[1]
    lo2, hi2 = bounds[3]
    assert hi1 == 1.0 and lo2 == 0.0
    assert 0.5 < lo1 < 0.99 < hi1
    assert lo2 < 0.5 < hi2 < 0.99


def test_oracle_rejects_unknown_mode():
    with pytest.raises(ScaleError):
        wv_oracle(CompositeModel((WhiteNoise(1.0),)), 3, mode="nope")
