"""Near-stationarity bootstrap test."""

import numpy as np
import pytest

import msical.inference
from msical.errors import ConvergenceError, SizeError, UnreliableTestError
from msical.inference import near_stationarity_test
from msical.models import CompositeModel, WhiteNoise, simulate_path
from msical.wavelet import estimate_wv

TPL = CompositeModel((WhiteNoise(1.0),))


def _replicates(variances, t, seed, depth):
    return [
        estimate_wv(np.sqrt(s2) * simulate_path(TPL, t, seed=seed, stream=(i,)), depth=depth)
        for i, s2 in enumerate(variances)
    ]


def test_strong_alternative_gets_smallest_possible_p():
    """A 100x variance spread puts the observed statistic above every
    bootstrap draw, so the smoothed p-value is exactly 1 / (n_ok + 1)."""
    wvs = _replicates((1.0, 100.0), 512, seed=0, depth=5)
    res = near_stationarity_test(wvs, TPL, n_boot=19, seed=0)
    assert res.statistic > res.bootstrap_statistics.max()
    assert res.p_value == pytest.approx(1.0 / 20.0)
    assert res.reject
    assert res.n_failed == 0


def test_null_data_is_not_rejected():
    wvs = [
        estimate_wv(simulate_path(TPL, 1024, seed=100, stream=(i,)), depth=6)
        for i in range(3)
    ]
    res = near_stationarity_test(wvs, TPL, n_boot=29, seed=0)
    assert res.p_value > 0.05
    assert not res.reject
    assert 0.0 < res.p_value <= 1.0
    assert res.bootstrap_statistics.size == 29


def test_reject_flag_follows_level():
    wvs = _replicates((1.0, 100.0), 512, seed=1, depth=5)
    strict = near_stationarity_test(wvs, TPL, n_boot=19, level=0.01, seed=1)
    loose = near_stationarity_test(wvs, TPL, n_boot=19, level=0.10, seed=1)
    assert strict.p_value == loose.p_value == pytest.approx(0.05)
    assert not strict.reject
    assert loose.reject


def test_deterministic_under_fixed_seed():
    wvs = _replicates((1.0, 4.0), 512, seed=2, depth=5)
    a = near_stationarity_test(wvs, TPL, n_boot=19, seed=7)
    b = near_stationarity_test(wvs, TPL, n_boot=19, seed=7)
    assert a.p_value == b.p_value
    np.testing.assert_array_equal(a.bootstrap_statistics, b.bootstrap_statistics)
    assert a.statistic == b.statistic


def test_statistic_invariant_to_replicate_order():
    wvs = _replicates((1.0, 2.0, 4.0), 512, seed=3, depth=5)
    fwd = near_stationarity_test(wvs, TPL, n_boot=19, seed=0)
    rev = near_stationarity_test(list(reversed(wvs)), TPL, n_boot=19, seed=0)
    assert fwd.statistic == pytest.approx(rev.statistic, rel=1e-9)


def test_result_carries_pooled_fit():
    wvs = _replicates((1.0, 1.5), 512, seed=4, depth=5)
    res = near_stationarity_test(wvs, TPL, n_boot=19, seed=0)
    assert res.fit.method == "AWV"
    assert res.fit.omega_mode == "identity"
    assert res.fit.theta.shape == (1,)
    d = res.to_dict()
    assert set(d) >= {"statistic", "p_value", "bootstrap_statistics", "fit", "reject"}


def test_unreliable_when_refits_fail(monkeypatch):
    wvs = _replicates((1.0, 1.2), 512, seed=5, depth=5)

    def boom(*args, **kwargs):
        raise ConvergenceError("forced failure")

    monkeypatch.setattr(msical.inference, "_minimize_wv_distance", boom)
    with pytest.raises(UnreliableTestError):
        near_stationarity_test(wvs, TPL, n_boot=19, seed=0)


def test_validation():
    wvs = _replicates((1.0,), 512, seed=6, depth=5)
    with pytest.raises(SizeError):
        near_stationarity_test(wvs, TPL)
    wvs2 = _replicates((1.0, 2.0), 512, seed=6, depth=5)
    with pytest.raises(SizeError):
        near_stationarity_test(wvs2, TPL, n_boot=18)
    with pytest.raises(SizeError):
        near_stationarity_test(wvs2, TPL, n_boot=19, level=0.0)
