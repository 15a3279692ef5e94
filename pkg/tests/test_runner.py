# SPDX-License-Identifier: Apache-2.0
"""End-to-end runs of every task on short horizons."""

import json

import numpy as np
import pytest

from rgpssm.bench.runner import build_hyperparameters
from rgpssm.bench.runner import run_experiment
from rgpssm.bench.runner import run_task
from rgpssm.bench.validation import validate_experiment
from rgpssm.bench.verify import check_timing
from rgpssm.bench.verify import check_wingrock
from rgpssm.utils.configuration import ExperimentConfig
from rgpssm.utils.configuration import FilterConfig
from rgpssm.utils.configuration import HyperOptConfig
from rgpssm.utils.configuration import KernelConfig
from rgpssm.utils.errors import ConfigurationError


@pytest.fixture
def sysid_file(tmp_path):
    rng = np.random.default_rng(3)
    u = rng.uniform(-1.0, 1.0, 160)
    y = np.zeros(160)
    for k in range(159):
        y[k + 1] = 0.8 * y[k] + 0.5 * u[k]
    y += 0.01 * rng.standard_normal(160)
    path = tmp_path / "plant.dat"
    path.write_text("\n".join(f"{a:.6f} {b:.6f}" for a, b in zip(u, y)))
    return path


class TestGPRCheck:
    def test_online_filter_matches_batch_regression(self):
        result = run_task(ExperimentConfig(task="gprcheck", train_steps=30, forecast_steps=0), 0)
        assert result.summary.n_u == 30
        assert result.summary.metrics["max_mean_error"] < 1e-6
        assert result.summary.metrics["max_variance_error"] < 1e-6

    def test_repetitions_and_artifacts(self, tmp_path):
        config = ExperimentConfig(task="gprcheck", train_steps=12, forecast_steps=0, runs=2, seed=5,
                                  out_dir=str(tmp_path))
        report = run_experiment(config)
        assert [r.seed for r in report.runs] == [5, 6]
        assert report.aggregate["max_mean_error"]["mean"] < 1e-6
        assert len(report.records) == 12
        saved = json.loads((tmp_path / "report.json").read_text())
        assert saved["config"]["trainSteps"] == 12
        assert (tmp_path / "inducing.csv").exists()

    def test_write_can_be_disabled(self, tmp_path):
        config = ExperimentConfig(task="gprcheck", train_steps=5, forecast_steps=0, out_dir=str(tmp_path / "out"))
        run_experiment(config, write=False)
        assert not (tmp_path / "out").exists()


class TestWingRock:
    def test_short_run(self):
        config = ExperimentConfig(task="wingrock", duration=2.0, forecast_steps=10, filter=FilterConfig(budget=10))
        result = run_task(config, 0)
        summary = result.summary
        assert summary.steps == 99
        assert summary.n_u <= 10
        assert len(result.error_grid) == 41 * 41
        assert set(summary.metrics) == {"delta_rmse_final_quarter", "delta_rmse_first_quarter", "grid_rmse"}
        assert np.isfinite(summary.forecast_rmse)
        assert result.extras["z"].shape == (99, 2)


class TestLimitCycle:
    def test_short_run(self):
        config = ExperimentConfig(task="lincycle", train_steps=60, forecast_steps=20, filter=FilterConfig(budget=8))
        summary = run_task(config, 1).summary
        assert summary.steps == 59
        assert summary.n_u <= 8
        assert {"filter_rmse_first_quarter", "filter_rmse_last_quarter", "hold_baseline_rmse"} <= set(summary.metrics)
        assert np.isfinite(summary.filter_rmse)


class TestSysId:
    def test_synthetic_file(self, sysid_file):
        config = ExperimentConfig(
            task="sysid", data_path=str(sysid_file), n_lat=2, forecast_steps=20,
            filter=FilterConfig(budget=8, hyperopt=HyperOptConfig(enabled=False)),
        )
        summary = run_task(config, 0).summary
        assert summary.steps == 79
        assert summary.n_u <= 8
        assert np.isfinite(summary.metrics["forecast_rmse_original_units"])


class TestValidation:
    def test_unknown_task(self):
        with pytest.raises(ConfigurationError):
            run_experiment(ExperimentConfig(task="pendulum"))

    def test_problems_are_reported_together(self):
        config = ExperimentConfig(task="sysid", runs=0, filter=FilterConfig(novelty_threshold=2.0))
        with pytest.raises(ConfigurationError) as info:
            run_experiment(config)
        for fragment in ("runs", "noveltyThreshold", "dataPath"):
            assert fragment in info.value.message

    def test_kernel_values_must_broadcast(self):
        config = ExperimentConfig(kernel=KernelConfig(length_scales=[1.0, 2.0, 3.0]))
        with pytest.raises(ValueError):
            build_hyperparameters(config, 2, 1)

    def test_task_names_are_normalized(self):
        assert validate_experiment(ExperimentConfig(task=" WingRock ")).task == "wingrock"
        config = ExperimentConfig(task="GPRCheck", train_steps=5, forecast_steps=0)
        assert run_task(config, 0).summary.n_u == 5
        assert run_experiment(config, write=False).config["task"] == "gprcheck"


class TestAcceptance:
    def test_step_time_is_a_blocking_criterion(self):
        result = check_timing(np.random.default_rng(0), steps=20)
        assert result.number == 10
        assert result.blocking

    @pytest.mark.slow
    @pytest.mark.parametrize("seed", [0, 1])
    def test_wingrock_adaptation_improves_the_delta_prediction(self, seed):
        result = check_wingrock(seed)
        assert result.value >= 0.10, result.detail
        assert result.status == "pass", result.detail
