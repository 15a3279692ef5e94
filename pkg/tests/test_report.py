# SPDX-License-Identifier: Apache-2.0
"""Report models and artifact files."""

import json

import numpy as np
import pandas as pd
import pytest

from rgpssm.bench.report import ExperimentReport
from rgpssm.bench.report import ExperimentSummary
from rgpssm.bench.report import aggregate_runs
from rgpssm.bench.report import trace_frame
from rgpssm.bench.report import write_report
from rgpssm.filter.recursion import StepReport


def _summary(seed: int, rmse: float) -> ExperimentSummary:
    return ExperimentSummary(
        task="lincycle", seed=seed, steps=2, filter_rmse=rmse, forecast_rmse=2.0 * rmse, ms_per_step=1.0,
        n_u=1, log_hyperparameters=[0.0, 0.0], metrics={"hold_baseline_rmse": 3.0},
    )


def _records():
    return [
        StepReport(step=0, gamma0=1.0, added=0, n_u=1, log_hyperparameters=[0.0, 0.1], state_mean=[1.0, 2.0],
                   state_var=[0.5, 0.5], innovation=[0.2], gp_mean=[0.3], gp_var=[1.0], elapsed_ms=0.4),
        StepReport(step=1, gamma0=1e-6, discarded=[0], n_u=1, log_hyperparameters=[0.0, 0.1],
                   state_mean=[1.1, 2.1], state_var=[0.4, 0.4], loss=-3.0),
    ]


class TestAggregate:
    def test_mean_and_population_std(self):
        stats = aggregate_runs([_summary(0, 1.0), _summary(1, 3.0)])
        assert stats["filter_rmse"] == {"mean": 2.0, "std": 1.0}
        assert stats["forecast_rmse"]["mean"] == pytest.approx(4.0)
        assert stats["hold_baseline_rmse"]["std"] == 0.0


class TestTrace:
    def test_columns_and_missing_values(self):
        frame = trace_frame(_records())
        for column in ("step", "gamma0", "added", "n_discarded", "mean_x1", "var_x2", "innovation1", "theta2"):
            assert column in frame.columns
        assert frame["added"].tolist() == [0, -1]
        assert frame["n_discarded"].tolist() == [0, 1]
        assert np.isnan(frame.loc[0, "loss"])
        assert np.isnan(frame.loc[1, "innovation1"])


class TestWriteReport:
    def test_writes_every_artifact(self, tmp_path):
        report = ExperimentReport(config={"task": "lincycle"}, summary=_summary(0, 1.0), runs=[_summary(0, 1.0)],
                                  records=_records())
        grid = pd.DataFrame({"theta": [0.0], "error": [0.1]})
        written = write_report(report, str(tmp_path / "out"), np.zeros((3, 2)), grid)
        names = sorted(p.rsplit("/", 1)[-1] for p in written)
        assert names == ["error_grid.csv", "inducing.csv", "report.json", "steps.jsonl", "trace.csv"]

        saved = json.loads((tmp_path / "out" / "report.json").read_text())
        assert "records" not in saved
        assert saved["summary"]["filter_rmse"] == 1.0
        lines = (tmp_path / "out" / "steps.jsonl").read_text().splitlines()
        assert [StepReport.model_validate_json(line) for line in lines] == report.records
        assert list(pd.read_csv(tmp_path / "out" / "inducing.csv").columns) == ["z1", "z2"]

    def test_optional_artifacts_are_skipped(self, tmp_path):
        report = ExperimentReport(config={}, summary=_summary(0, 1.0))
        written = write_report(report, str(tmp_path))
        assert len(written) == 3
        assert (tmp_path / "trace.csv").exists()
