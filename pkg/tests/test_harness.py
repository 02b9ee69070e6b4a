"""Harness module: baselines vs series oracle, aggregation, parallel determinism."""

import csv
import json
import math

import numpy as np
import pytest

from photonloop.belief import PriorDistribution
from photonloop.harness import (
    EnsembleConfig,
    PolicySpec,
    RunningMoments,
    optimal_click_variance,
    optimal_estimator_variance,
    optimal_mean_clicks,
    optimal_variance_large_n0,
    optimal_variance_small_n0,
    run_ensemble,
    summarize_cell,
    sweep,
    write_summary_json,
    write_trace_csv,
    write_trials_csv,
)
from photonloop.kernel import SystemParams
from photonloop.simulator import StopRule, run_trial


def series_mean_clicks(n0, eta, gamma):
    """Oracle: direct sum of per-bin detection probabilities gamma * eta^k.

    Photon k makes k loop passes before its detection window, k = 0..n0-1.
    """
    return math.fsum(gamma * eta**k for k in range(n0))


def series_click_variance(n0, eta, gamma):
    return math.fsum(gamma * eta**k * (1 - gamma * eta**k) for k in range(n0))


class TestOptimalBaselines:
    @pytest.mark.parametrize("eta", [0.5, 0.9, 0.99, 0.999])
    @pytest.mark.parametrize("gamma", [0.5, 0.9, 1.0])
    def test_mean_clicks_matches_series(self, eta, gamma):
        for n0 in [1, 2, 5, 20, 100, 200]:
            assert optimal_mean_clicks(n0, eta, gamma) == pytest.approx(
                series_mean_clicks(n0, eta, gamma), rel=1e-12
            )

    @pytest.mark.parametrize("eta", [0.5, 0.9, 0.99, 0.999])
    @pytest.mark.parametrize("gamma", [0.5, 0.9, 1.0])
    def test_click_variance_matches_series(self, eta, gamma):
        for n0 in [1, 2, 5, 20, 100, 200]:
            assert optimal_click_variance(n0, eta, gamma) == pytest.approx(
                series_click_variance(n0, eta, gamma), rel=1e-12
            )

    def test_unit_efficiency_limits(self):
        assert optimal_mean_clicks(10, 1.0, 0.9) == pytest.approx(9.0)
        assert optimal_click_variance(10, 1.0, 0.9) == pytest.approx(10 * 0.9 * 0.1)
        assert optimal_estimator_variance(10, 1.0, 0.9) == pytest.approx(
            10 * (1 / 0.9 - 1)
        )

    def test_estimator_variance_reference_value(self):
        # n0=100, eta=0.99, gamma=0.9: N0^2 (1-eta)/(1-eta^N0) *
        # (1/gamma - (1+eta^N0)/(1+eta))
        val = optimal_estimator_variance(100, 0.99, 0.9)
        e = 0.99**100
        expected = 100**2 * 0.01 / (1 - e) * (1 / 0.9 - (1 + e) / 1.99)
        assert val == pytest.approx(expected, rel=1e-14)
        assert 50 < val < 100

    def test_small_n0_asymptote(self):
        # n0 * (1 - eta) << 1: variance -> n0 * (1/gamma - 1)
        eta, gamma, n0 = 0.9999, 0.9, 5
        assert optimal_estimator_variance(n0, eta, gamma) == pytest.approx(
            optimal_variance_small_n0(n0, eta, gamma), rel=0.02
        )

    def test_large_n0_asymptote(self):
        # n0 * (1 - eta) >> 1: variance -> n0^2 (1-eta)(1/gamma - 1/(1+eta))
        eta, gamma, n0 = 0.9, 0.95, 200
        assert optimal_estimator_variance(n0, eta, gamma) == pytest.approx(
            optimal_variance_large_n0(n0, eta, gamma), rel=0.05
        )

    def test_rejects_bad_args(self):
        with pytest.raises(ValueError):
            optimal_mean_clicks(-1, 0.9, 0.9)
        with pytest.raises(ValueError):
            optimal_mean_clicks(5, 0.0, 0.9)
        with pytest.raises(ValueError):
            optimal_estimator_variance(0, 0.9, 0.9)


class TestRunningMoments:
    def test_against_numpy(self):
        rng = np.random.default_rng(0)
        xs = rng.normal(3.0, 2.0, size=500)
        acc = RunningMoments()
        for x in xs:
            acc.push(float(x))
        assert acc.mean == pytest.approx(xs.mean(), rel=1e-12)
        assert acc.variance == pytest.approx(xs.var(), rel=1e-12)
        assert acc.se_mean == pytest.approx(np.sqrt(xs.var() / 500), rel=1e-12)

    def test_empty(self):
        acc = RunningMoments()
        assert acc.variance == 0.0 and acc.se_mean == 0.0


class TestEnsembleConfig:
    def _config(self, **overrides):
        params = SystemParams(eta=0.9, gamma=0.9, nu=1e-6, n_max=15)
        defaults = dict(
            params=params,
            prior=PriorDistribution.uniform(15),
            policy=PolicySpec(kind="passive", epsilon=0.1),
            n0_values=(5,),
            n_trials=10,
            master_seed=7,
        )
        defaults.update(overrides)
        return EnsembleConfig(**defaults)

    def test_validation(self):
        with pytest.raises(ValueError):
            self._config(n_trials=0)
        with pytest.raises(ValueError):
            self._config(n0_values=())
        with pytest.raises(ValueError):
            self._config(n0_values=(16,))
        with pytest.raises(ValueError):
            PolicySpec(kind="passive")
        with pytest.raises(ValueError):
            PolicySpec(kind="bogus")

    def test_policy_labels(self):
        assert PolicySpec(kind="passive", epsilon=0.02).label == "passive_eps0.02"
        assert PolicySpec(kind="adaptive").label == "adaptive"

    def test_mse_identity(self):
        config = self._config(n_trials=40)
        summaries, _ = run_ensemble(config)
        s = summaries[0]
        assert s.mse == pytest.approx(s.bias**2 + s.var_of_est, abs=1e-9)
        assert s.n_trials == 40

    def test_worker_count_does_not_change_results(self):
        config = self._config(n0_values=(3, 8), n_trials=12)
        serial, rec_serial = run_ensemble(config, n_workers=1)
        parallel, rec_parallel = run_ensemble(config, n_workers=2)
        assert serial == parallel
        assert rec_serial == rec_parallel

    def test_records_match_direct_run(self):
        config = self._config(n_trials=3)
        _, records = run_ensemble(config)
        from photonloop.simulator import derive_trial_seed
        from photonloop.strategy import PassivePolicy

        seed = derive_trial_seed(7, 0, 1)
        direct = run_trial(
            5,
            PassivePolicy(0.1),
            config.params,
            config.prior,
            config.resolved_stop(),
            seed,
        )
        assert records[1][2] == direct

    def test_n0_zero_cell(self):
        config = self._config(n0_values=(0,), n_trials=5)
        summaries, _ = run_ensemble(config)
        s = summaries[0]
        assert s.n0 == 0
        assert s.mse >= 0.0


class TestSweep:
    def test_row_cardinality_and_reference_columns(self):
        params_a = SystemParams(eta=0.9, gamma=0.9, nu=1e-6, n_max=12)
        params_b = SystemParams(eta=0.95, gamma=0.9, nu=1e-6, n_max=12)
        prior = PriorDistribution.uniform(12)
        configs = [
            EnsembleConfig(
                params=p,
                prior=prior,
                policy=PolicySpec(kind="passive", epsilon=0.1),
                n0_values=(4, 9),
                n_trials=5,
                master_seed=11,
            )
            for p in (params_a, params_b)
        ]
        rows = sweep(configs)
        assert len(rows) == 4
        for row in rows:
            assert row["shot_noise_mse"] == float(row["n0"])
            assert row["optimal_var"] == pytest.approx(
                optimal_estimator_variance(row["n0"], row["eta"], row["gamma"])
            )


class TestPersistence:
    def test_csv_and_json_round_trip(self, tmp_path):
        params = SystemParams(eta=0.9, gamma=0.9, nu=1e-6, n_max=10)
        config = EnsembleConfig(
            params=params,
            prior=PriorDistribution.uniform(10),
            policy=PolicySpec(kind="passive", epsilon=0.15),
            n0_values=(4,),
            n_trials=6,
            master_seed=3,
            trace=True,
        )
        summaries, records = run_ensemble(config)
        trials_path = tmp_path / "trials.csv"
        trace_path = tmp_path / "trace.csv"
        json_path = tmp_path / "summary.json"
        write_trials_csv(trials_path, records)
        write_trace_csv(trace_path, records)
        write_summary_json(json_path, {"seed": 3}, [s.as_row() for s in summaries])

        with open(trials_path) as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 6
        rec = records[2][2]
        assert float(rows[2]["n_est"]) == rec.n_est  # repr round-trips exactly
        assert int(rows[2]["rounds"]) == rec.rounds

        with open(trace_path) as fh:
            trace_rows = list(csv.DictReader(fh))
        # one row per round plus a round-0 row per trial
        assert len(trace_rows) == sum(r.rounds + 1 for _, _, r in records)
        first = records[0][2].info_trace[0]
        assert int(trace_rows[0]["round"]) == 0
        assert float(trace_rows[0]["info_gained_bits"]) == first[2]

        payload = json.loads(json_path.read_text())
        assert payload["config"] == {"seed": 3}
        assert payload["cells"][0]["mse"] == summaries[0].mse
