"""Oracle targets, simulation studies, and filter-parameter mapping."""

import numpy as np
import pytest

import msical.experiments.study
from msical.errors import (
    ConvergenceError,
    DataError,
    SizeError,
    UnsupportedBlockError,
)
from msical.experiments import (
    StudyConfig,
    model_to_state_space,
    run_simulation_study,
    theta0_oracle,
)
from msical.models import (
    Ar1,
    BetaMarginal,
    CompositeModel,
    Drift,
    InternalSensorModel,
    QuantizationNoise,
    RandomWalk,
    WhiteNoise,
)

WN_AR1 = CompositeModel((WhiteNoise(5e-5), Ar1(0.9995, 7e-10)))
SPREAD_G = InternalSensorModel(
    WN_AR1,
    (
        BetaMarginal(4e-5, 7e-5, 8, 5),
        BetaMarginal(0.999, 0.9999, 7, 2),
        BetaMarginal(6e-10, 8e-10, 3, 5),
    ),
)


def dirac_g(template):
    theta = template.flatten()
    return InternalSensorModel(
        template, tuple(BetaMarginal(v, v, 1.0, 1.0) for v in theta)
    )


class TestOracle:
    def test_point_mass_population_has_equal_targets(self):
        """Under a degenerate G both targets are the single true vector.

        phi sits below the default search box, so the box is widened;
        with the default box the fit would pin phi at the boundary.
        """
        from msical.fit import FitOptions

        g = dirac_g(CompositeModel((WhiteNoise(2.0), Ar1(0.8, 0.5))))
        theta = g.template.flatten()
        opts = FitOptions(phi_box=(0.5, 0.99999))
        for mode in ("expected", "draws"):
            t = theta0_oracle(g, depth=8, mode=mode, n_draws=100, options=opts)
            np.testing.assert_allclose(t.theta_zero, theta, rtol=1e-6)
            np.testing.assert_allclose(t.theta_mean, theta, rtol=1e-12)

    def test_linear_template_targets_coincide_even_when_spread(self):
        """WN and RW enter the WV linearly, so averaging WV curves or
        averaging parameters gives the same target."""
        g = InternalSensorModel(
            CompositeModel((WhiteNoise(1.0), RandomWalk(1e-4))),
            (BetaMarginal(0.5, 2.0, 2, 5), BetaMarginal(5e-5, 4e-4, 3, 3)),
        )
        t = theta0_oracle(g, depth=9, mode="expected")
        np.testing.assert_allclose(t.theta_zero, t.theta_mean, rtol=1e-8)

    def test_ar1_nonlinearity_separates_the_targets(self):
        t = theta0_oracle(g=SPREAD_G, depth=13, mode="draws", n_draws=500, seed=11)
        gap = np.abs(t.theta_zero - t.theta_mean)
        sep = gap[1] / t.se_theta_zero[1]
        assert sep > 3.0
        assert t.theta_zero[1] != pytest.approx(t.theta_mean[1], rel=1e-7)

    def test_draws_mode_agrees_with_expected_mode(self):
        exact = theta0_oracle(g=SPREAD_G, depth=13, mode="expected")
        mc = theta0_oracle(g=SPREAD_G, depth=13, mode="draws", n_draws=500, seed=3)
        err = np.abs(mc.theta_zero - exact.theta_zero)
        assert np.all(err <= 4.0 * mc.se_theta_zero + 1e-12 * np.abs(exact.theta_zero))

    def test_independent_draw_seeds_agree_within_error(self):
        a = theta0_oracle(g=SPREAD_G, depth=13, mode="draws", n_draws=400, seed=101)
        b = theta0_oracle(g=SPREAD_G, depth=13, mode="draws", n_draws=400, seed=202)
        err = np.abs(a.theta_zero - b.theta_zero)
        assert np.all(err <= 4.0 * np.hypot(a.se_theta_zero, b.se_theta_zero))

    def test_target_stays_inside_population_box(self):
        t = theta0_oracle(g=SPREAD_G, depth=13, mode="expected")
        lo = np.array([m.lower for m in SPREAD_G.marginals])
        hi = np.array([m.upper for m in SPREAD_G.marginals])
        assert np.all(t.theta_zero >= lo * 0.9)
        assert np.all(t.theta_zero <= hi * 1.1)

    def test_to_dict_round_trips_the_arrays(self):
        t = theta0_oracle(g=SPREAD_G, depth=6, mode="expected")
        d = t.to_dict()
        assert d["mode"] == "expected"
        assert d["depth"] == 6
        assert d["omega_mode"] == "identity"
        np.testing.assert_allclose(d["theta_zero"], t.theta_zero)
        assert tuple(d["param_names"]) == SPREAD_G.template.param_names()

    def test_rejects_bad_settings(self):
        with pytest.raises(DataError):
            theta0_oracle(g=SPREAD_G, mode="exact")
        with pytest.raises(SizeError):
            theta0_oracle(g=SPREAD_G, mode="draws", n_draws=50)
        with pytest.raises(SizeError):
            theta0_oracle(g=SPREAD_G, depth=5, omega=np.eye(4))


class TestStudy:
    SMALL = StudyConfig(g=SPREAD_G, k=2, t=2048, b=2, oracle_draws=100, seed=9)

    def test_report_shapes_and_labels(self):
        rep = run_simulation_study(self.SMALL)
        p = SPREAD_G.template.p
        for method in ("AGMWM", "AWV"):
            assert rep.estimates[method].shape == (2, p)
            assert np.all(np.isfinite(rep.estimates[method]))
            assert rep.skipped[method] == []
        assert rep.param_names == SPREAD_G.template.param_names()
        assert rep.targets.depth == 10  # default depth at t=2048
        assert rep.config["t"] == 2048

    def test_rerun_is_byte_identical(self):
        a = run_simulation_study(self.SMALL)
        b = run_simulation_study(self.SMALL)
        for method in ("AGMWM", "AWV"):
            assert np.array_equal(a.estimates[method], b.estimates[method])
        np.testing.assert_array_equal(a.targets.theta_zero, b.targets.theta_zero)

    def test_failed_trials_are_skipped_per_method(self, monkeypatch):
        def boom(*args, **kwargs):
            raise ConvergenceError("forced failure")

        monkeypatch.setattr(msical.experiments.study, "awv_fit", boom)
        rep = run_simulation_study(self.SMALL)
        assert rep.skipped["AWV"] == [0, 1]
        assert np.all(np.isnan(rep.estimates["AWV"]))
        assert rep.skipped["AGMWM"] == []
        assert np.all(np.isfinite(rep.estimates["AGMWM"]))

    def test_median_ignores_skipped_trials(self, monkeypatch):
        calls = {"n": 0}
        real = msical.experiments.study.agmwm_fit

        def flaky(*args, **kwargs):
            calls["n"] += 1
            if calls["n"] == 1:
                raise ConvergenceError("first trial fails")
            return real(*args, **kwargs)

        monkeypatch.setattr(msical.experiments.study, "agmwm_fit", flaky)
        rep = run_simulation_study(self.SMALL)
        assert rep.skipped["AGMWM"] == [0]
        med = rep.median("AGMWM")
        np.testing.assert_allclose(med, rep.estimates["AGMWM"][1])

    def test_explicit_depth_narrows_the_fit(self):
        cfg = StudyConfig(g=SPREAD_G, k=2, t=2048, b=1, depth=7, oracle_draws=100)
        rep = run_simulation_study(cfg)
        assert rep.targets.depth == 7

    def test_rejects_degenerate_settings(self):
        with pytest.raises(SizeError):
            StudyConfig(g=SPREAD_G, k=0).validate()
        with pytest.raises(SizeError):
            StudyConfig(g=SPREAD_G, t=8).validate()
        with pytest.raises(SizeError):
            StudyConfig(g=SPREAD_G, b=0).validate()

    def test_report_to_dict_is_json_ready(self):
        import json

        rep = run_simulation_study(
            StudyConfig(g=SPREAD_G, k=2, t=2048, b=1, oracle_draws=100)
        )
        text = json.dumps(rep.to_dict())
        assert "AGMWM" in text and "theta_zero" in text


class TestStateSpace:
    def test_white_noise_sets_measurement_variance_only(self):
        spec = model_to_state_space(CompositeModel((WhiteNoise(3e-4),)))
        assert spec.wn_variance == 3e-4
        assert spec.n_states == 0
        assert spec.drift_rate == 0.0

    def test_ar1_becomes_gauss_markov_state(self):
        phi, eta2 = 0.999, 2e-8
        spec = model_to_state_space(
            CompositeModel((WhiteNoise(1e-6), Ar1(phi, eta2))), rate_hz=200.0
        )
        (b,) = spec.bias_states
        assert b.tag == "AR1"
        assert b.f == phi
        assert b.q == eta2
        assert b.init_var == pytest.approx(eta2 / (1.0 - phi**2))
        assert b.correlation_samples == pytest.approx(1000.0)
        assert spec.correlation_seconds() == (pytest.approx(5.0),)

    def test_random_walk_becomes_integrating_state(self):
        spec = model_to_state_space(CompositeModel((RandomWalk(4e-12),)))
        (b,) = spec.bias_states
        assert b.tag == "RW"
        assert b.f == 1.0
        assert b.q == 4e-12
        assert b.init_var == 0.0
        assert np.isinf(b.correlation_samples)

    def test_drift_is_deterministic_not_a_state(self):
        spec = model_to_state_space(CompositeModel((WhiteNoise(1.0), Drift(2e-7))))
        assert spec.drift_rate == 2e-7
        assert spec.n_states == 0

    def test_quantization_noise_is_rejected(self):
        with pytest.raises(UnsupportedBlockError):
            model_to_state_space(CompositeModel((QuantizationNoise(1e-5),)))

    def test_correlation_seconds_needs_a_rate(self):
        spec = model_to_state_space(CompositeModel((Ar1(0.9, 1.0),)))
        with pytest.raises(ValueError):
            spec.correlation_seconds()

    def test_to_dict_lists_states(self):
        spec = model_to_state_space(
            CompositeModel((WhiteNoise(1e-6), Ar1(0.99, 1e-8), RandomWalk(1e-12))),
            rate_hz=100.0,
        )
        d = spec.to_dict()
        assert d["n_states"] == 2
        assert [s["tag"] for s in d["bias_states"]] == ["AR1", "RW"]
        assert d["rate_hz"] == 100.0
