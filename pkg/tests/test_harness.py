import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isingmem import ConfigError, FitError, Variant
from isingmem.harness import (
    SWEEP_COLUMNS,
    ExperimentConfig,
    FiniteSizeExtrapolation,
    ThresholdFit,
    derive_config,
    dump_config,
    error_bound,
    estimate_lifetime,
    extrapolate_threshold,
    fit_threshold,
    full_measurement_failure,
    full_measurement_failure_exact,
    load_config,
    regime_check,
    run_trial,
    run_trials,
    summarize,
    sweep,
    threshold_curve,
)
from isingmem.harness.experiment import TrialResult


class TestConfig:
    def test_defaults_are_valid(self):
        cfg = ExperimentConfig()
        assert cfg.layout().n_patches == 8
        assert cfg.decoder_config().variant is Variant.ERF

    def test_round_trip(self, tmp_path):
        cfg = ExperimentConfig(L=28, variant="full_bayes", chi=2.0, tau_decay=None, n_trials=7)
        path = tmp_path / "cfg.yaml"
        dump_config(cfg, path)
        back = load_config(path)
        assert back == cfg
        assert back.variant is Variant.FULL_BAYES

    def test_auto_keywords(self, tmp_path):
        path = tmp_path / "cfg.yaml"
        path.write_text("chi: auto\ntau_decay: auto\nlambda: 5\nL: 40\n")
        cfg = load_config(path)
        assert cfg.chi is None and cfg.tau_decay is None and cfg.unit_cell == 5

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "cfg.yaml"
        path.write_text("L: 28\ntemprature: 0.1\n")
        with pytest.raises(ConfigError, match="temprature"):
            load_config(path)

    @pytest.mark.parametrize("kw", [{"n_trials": 0}, {"max_events": 0}, {"L": 30},
                                    {"patch_size": 4}, {"temperature": -0.1},
                                    {"variant": "nope"}, {"c_D": 0.0}])
    def test_invalid(self, kw):
        with pytest.raises(ConfigError):
            ExperimentConfig(**kw)

    def test_non_integer_size_in_file(self, tmp_path):
        path = tmp_path / "cfg.yaml"
        path.write_text("L: 28.5\n")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_bare_memory_needs_no_layout(self):
        cfg = ExperimentConfig(L=10, decoder_enabled=False)
        assert cfg.L == 10


FAST = ExperimentConfig(L=28, temperature=0.2, n_trials=40, master_seed=3)


class TestTrials:
    def test_deterministic(self):
        assert run_trial(FAST, 5) == run_trial(FAST, 5)
        assert run_trial(FAST, 5) != run_trial(FAST, 6)

    def test_failure_time_positive(self):
        for r in run_trials(FAST, 10):
            assert r.failure_time > 0 and not r.truncated

    def test_stable_regime_truncates(self):
        cfg = ExperimentConfig(L=21, unit_cell=3, patch_size=3, temperature=0.08,
                               max_time=1e3, n_trials=5)
        assert all(r.truncated for r in run_trials(cfg))

    def test_event_cap_truncates(self):
        cfg = FAST.replace(max_events=3)
        r = run_trial(cfg, 0)
        assert r.truncated and r.event_count == 3

    def test_parallel_matches_serial(self):
        cfg = FAST.replace(n_trials=6)
        assert run_trials(cfg.replace(n_jobs=2)) == run_trials(cfg)

    def test_tracker_runs(self):
        cfg = FAST.replace(tracker_enabled=True, n_trials=10)
        est = estimate_lifetime(cfg)
        assert est.completed == 10


class TestEstimate:
    def test_truncated_trials_counted_not_averaged(self):
        res = [TrialResult(0, 10.0, 1, 0, False), TrialResult(1, 30.0, 1, 0, False),
               TrialResult(2, 1e9, 1, 0, True)]
        est = summarize(res, 0.5)
        assert est.mean_lifetime == 20.0 and est.truncated == 1 and est.completed == 2
        assert est.enhancement == 10.0
        assert est.truncation_fraction == pytest.approx(1 / 3)

    def test_all_truncated_is_lower_bound(self):
        res = [TrialResult(i, 100.0 + i, 1, 0, True) for i in range(3)]
        est = summarize(res, 0.01)
        assert est.lower_bound_only and est.mean_lifetime == 100.0
        assert math.isnan(est.stderr)

    def test_needs_two_trials(self):
        with pytest.raises(ConfigError):
            estimate_lifetime(FAST.replace(n_trials=1))

    def test_bare_memory_enhancement_order_one(self):
        est = estimate_lifetime(ExperimentConfig(L=16, temperature=0.3, decoder_enabled=False,
                                                 n_trials=200))
        assert 0.2 < est.enhancement < 1.5

    def test_stderr_halves_with_four_times_the_trials(self):
        cfg = ExperimentConfig(L=16, temperature=0.3, decoder_enabled=False, master_seed=9)
        a = estimate_lifetime(cfg.replace(n_trials=400))
        b = estimate_lifetime(cfg.replace(n_trials=1600))
        assert b.stderr / a.stderr == pytest.approx(0.5, rel=0.2)

    def test_colder_lives_longer(self):
        cfg = ExperimentConfig(L=56, n_trials=60, master_seed=1)
        cold = estimate_lifetime(cfg.replace(temperature=0.13))
        hot = estimate_lifetime(cfg.replace(temperature=0.20))
        assert cold.enhancement > hot.enhancement


class TestSweep:
    def test_rows_echo_config(self):
        rows = sweep(FAST.replace(n_trials=5), "T", [0.2, 0.22])
        assert [r["axis_value"] for r in rows] == ["0.2", "0.22"]
        for r in rows:
            assert set(SWEEP_COLUMNS) <= set(r)
            assert r["chi"] == pytest.approx(10 * r["temperature"])

    def test_bad_value_becomes_error_row(self):
        rows = sweep(FAST.replace(n_trials=3), "L", [30, 35])
        assert "error" in rows[0] and rows[1]["L"] == 35 and rows[1]["trials"] == 3

    def test_m_axis_keeps_cells(self):
        cfg = derive_config(ExperimentConfig(L=224), "m", "3/5")
        assert (cfg.unit_cell, cfg.L, cfg.patch_size) == (5, 160, 3)
        cfg = derive_config(ExperimentConfig(L=224), "m", 1 / 3)
        assert (cfg.unit_cell, cfg.L) == (9, 288)

    def test_m_axis_rejects_fractional_cells(self):
        with pytest.raises(ConfigError):
            derive_config(ExperimentConfig(), "m", "2/7")

    def test_unknown_axis(self):
        with pytest.raises(ConfigError):
            sweep(FAST, "xi", [1.0])

    def test_empty_values(self):
        with pytest.raises(ConfigError):
            sweep(FAST, "T", [])


class TestThresholdFit:
    T = np.linspace(0.10, 0.22, 7)

    def test_exact_round_trip(self):
        y = threshold_curve(self.T, 50.0, 0.15)
        res = fit_threshold(self.T, y, n_bootstrap=20)
        assert abs(res.a - 50.0) < 1e-6 and abs(res.T_th - 0.15) < 1e-6
        assert res.residual < 1e-8 and res.n_points == 7

    def test_noisy_round_trip_inside_bootstrap_interval(self):
        rng = np.random.default_rng(4)
        y = threshold_curve(self.T, 50.0, 0.15) * np.exp(rng.normal(0, 0.05, self.T.size))
        res = fit_threshold(self.T, y)
        lo, hi = res.T_th_ci
        assert lo <= 0.15 <= hi
        assert res.T_th_err > 0

    def test_order_invariant(self):
        y = threshold_curve(self.T, 40.0, 0.16) * np.exp(np.sin(np.arange(7)) * 0.05)
        perm = np.random.default_rng(0).permutation(7)
        a = fit_threshold(self.T, y)
        b = fit_threshold(self.T[perm], y[perm])
        assert a == b

    def test_threshold_within_data_range(self):
        y = threshold_curve(self.T, 30.0, 0.30)
        res = fit_threshold(self.T, y, n_bootstrap=10)
        assert self.T[0] <= res.T_th <= self.T[-1]

    def test_too_few_points(self):
        with pytest.raises(ConfigError):
            fit_threshold([0.1, 0.2, 0.3], [5, 2, 1])

    def test_non_positive_enhancement(self):
        with pytest.raises(ConfigError):
            fit_threshold([0.1, 0.2, 0.3, 0.4], [5, 2, 0, 1])

    def test_non_convergence_reports_trace(self):
        y = threshold_curve(self.T, 50.0, 0.15)
        with pytest.raises(FitError) as exc:
            ThresholdFit(max_nfev=1, n_bootstrap=0).fit(self.T, y * 1.7)
        assert exc.value.trace

    def test_estimator_protocol(self):
        est = ThresholdFit(n_bootstrap=5)
        assert est.get_params()["n_bootstrap"] == 5
        y = threshold_curve(self.T, 50.0, 0.15)
        est.fit(self.T, y)
        assert np.allclose(est.predict(self.T), y)
        assert est.score(self.T, y) == pytest.approx(1.0)

    @settings(max_examples=25, deadline=None)
    @given(a=st.floats(20, 120), T_th=st.floats(0.13, 0.19))
    def test_recovers_any_clean_curve(self, a, T_th):
        res = fit_threshold(self.T, threshold_curve(self.T, a, T_th), n_bootstrap=0)
        assert res.T_th == pytest.approx(T_th, abs=1e-6)
        assert res.a == pytest.approx(a, rel=1e-5)


class TestExtrapolation:
    def test_exact_line(self):
        L = np.array([28, 56, 112])
        res = extrapolate_threshold(L, 0.155 + 1.2 / L)
        assert res.intercept == pytest.approx(0.155, abs=1e-12)
        assert res.slope == pytest.approx(1.2, rel=1e-10)
        assert res.intercept_err == pytest.approx(0.0, abs=1e-10)

    def test_weighted(self):
        L = np.array([28, 56, 112, 224])
        y = 0.15 + 1.0 / L + np.array([0.002, -0.002, 0.001, 0.0])
        res = extrapolate_threshold(L, y, sigma=[0.01, 0.01, 0.01, 0.001])
        assert abs(res.intercept - 0.15) < 0.01 and res.intercept_err > 0

    def test_two_sizes(self):
        with pytest.raises(ConfigError):
            extrapolate_threshold([28, 56], [0.2, 0.18])

    def test_repeated_sizes_are_degenerate(self):
        with pytest.raises(ConfigError):
            extrapolate_threshold([28, 28, 28, 56], [0.2, 0.2, 0.2, 0.18])

    def test_predict(self):
        est = FiniteSizeExtrapolation().fit([10, 20, 40], [0.3, 0.2, 0.15])
        assert est.predict([1e12])[0] == pytest.approx(est.intercept_)


class TestBound:
    def test_value(self):
        # 4 * 0.1**16, correctly rounded for the binary value of 0.1
        assert error_bound(28, 7, 0.1) == pytest.approx(4e-16, rel=2e-15)

    def test_single_cell(self):
        assert error_bound(7, 7, 0.3) == 0.3

    def test_small_ratio(self):
        assert error_bound(28, 7, 1e-30) == 0.0

    @pytest.mark.parametrize("ratio", [1.0, 1.5, 0.0, -0.1])
    def test_domain(self, ratio):
        with pytest.raises(ValueError):
            error_bound(28, 7, ratio)

    def test_cell_must_divide(self):
        with pytest.raises(ConfigError):
            error_bound(30, 7, 0.1)


class TestRegime:
    def test_default_regime_passes(self):
        rep = regime_check(ExperimentConfig(temperature=0.13))
        assert rep.all_pass
        c1, c2, _ = rep.conditions
        assert c1.small == 16 and c1.large == pytest.approx(math.exp(1 / 0.13))
        assert c2.small == pytest.approx(7 * math.exp(-1 / 0.13))

    def test_hot_dense_pairs_warn(self):
        rep = regime_check(ExperimentConfig(temperature=0.5))
        c2 = rep.conditions[1]
        assert c2.verdict == "warn" and c2.small == pytest.approx(0.947, abs=1e-3)

    def test_slow_measurement_warns(self):
        cfg = ExperimentConfig(temperature=0.13)
        cfg = cfg.replace(chi=0.5 * cfg.rates().gamma0)
        c3 = regime_check(cfg).conditions[2]
        assert c3.verdict == "warn" and "chi" in c3.note


class TestFullMeasurementModel:
    def test_matches_binomial_tail(self):
        rng = np.random.default_rng(0)
        p = full_measurement_failure(9, 0.2, 10, 200_000, rng)
        exact = full_measurement_failure_exact(9, 0.2, 10)
        assert p == pytest.approx(exact, abs=4 * math.sqrt(exact * (1 - exact) / 200_000))

    def test_rejects_even_sizes(self):
        with pytest.raises(ValueError):
            full_measurement_failure(8, 0.2, 10, 10, np.random.default_rng(0))
