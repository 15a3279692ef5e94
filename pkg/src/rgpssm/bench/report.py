# SPDX-License-Identifier: Apache-2.0
"""Experiment report models and their on-disk artifacts.

An output directory receives report.json (config echo and summaries), trace.csv (one row per
step), steps.jsonl (the raw StepReport records), and, when available, inducing.csv and
error_grid.csv.
"""

import logging
import os
from typing import Any
from typing import Dict
from typing import List
from typing import Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel
from pydantic import Field

from rgpssm.filter.recursion import StepReport

logger = logging.getLogger(__name__)


class ExperimentSummary(BaseModel):
    """Summary metrics of one seeded run."""

    task: str = Field(description="Experiment task")
    seed: int = Field(description="Seed of the run")
    steps: int = Field(description="Filter steps taken", ge=0)
    filter_rmse: float = Field(description="RMSE of the filtered estimate against the truth or measurement")
    forecast_rmse: float = Field(description="RMSE of the free-running forecast")
    ms_per_step: float = Field(description="Mean wall-clock time per filter step")
    median_ms_per_step: float = Field(default=0.0, description="Median wall-clock time per filter step")
    n_u: int = Field(description="Inducing points held at the end of training", ge=0)
    log_hyperparameters: List[float] = Field(description="Final log-hyperparameters")
    metrics: Dict[str, float] = Field(default_factory=dict, description="Task-specific metrics")


class ExperimentReport(BaseModel):
    """Resolved configuration, per-run summaries and the step trace of the first run."""

    config: Dict[str, Any] = Field(description="Fully resolved configuration")
    summary: ExperimentSummary = Field(description="Summary of the first run")
    runs: List[ExperimentSummary] = Field(default_factory=list, description="Summaries of every run")
    aggregate: Dict[str, Dict[str, float]] = Field(
        default_factory=dict, description="Mean and standard deviation of each metric over the runs"
    )
    records: List[StepReport] = Field(default_factory=list, description="Step records of the first run")


def aggregate_runs(runs: List[ExperimentSummary]) -> Dict[str, Dict[str, float]]:
    """Mean and std of every scalar metric across runs."""
    frame = pd.DataFrame([
        {"filter_rmse": r.filter_rmse, "forecast_rmse": r.forecast_rmse, "ms_per_step": r.ms_per_step, **r.metrics}
        for r in runs
    ])
    return {
        column: {"mean": float(frame[column].mean()), "std": float(frame[column].std(ddof=0))}
        for column in frame.columns
    }


def trace_frame(records: List[StepReport]) -> pd.DataFrame:
    """One row per step, vector fields spread over numbered columns."""
    rows = []
    for r in records:
        row = {
            "step": r.step,
            "gamma0": r.gamma0,
            "added": -1 if r.added is None else r.added,
            "n_discarded": len(r.discarded),
            "n_u": r.n_u,
            "loss": np.nan if r.loss is None else r.loss,
            "elapsed_ms": np.nan if r.elapsed_ms is None else r.elapsed_ms,
        }
        row.update({f"mean_x{i + 1}": v for i, v in enumerate(r.state_mean)})
        row.update({f"var_x{i + 1}": v for i, v in enumerate(r.state_var)})
        row.update({f"innovation{i + 1}": v for i, v in enumerate(r.innovation or [])})
        row.update({f"gp_mean{i + 1}": v for i, v in enumerate(r.gp_mean)})
        row.update({f"gp_var{i + 1}": v for i, v in enumerate(r.gp_var)})
        row.update({f"theta{i + 1}": v for i, v in enumerate(r.log_hyperparameters)})
        rows.append(row)
    return pd.DataFrame(rows)


def write_report(report: ExperimentReport, out_dir: str, inducing_inputs: Optional[np.ndarray] = None,
                 error_grid: Optional[pd.DataFrame] = None) -> List[str]:
    """Write the artifacts of `report` to `out_dir` and return the written paths."""
    os.makedirs(out_dir, exist_ok=True)
    written = []
    path = os.path.join(out_dir, "report.json")
    with open(path, "w", encoding="utf-8") as stream:
        stream.write(report.model_dump_json(indent=2, exclude={"records"}))
    written.append(path)
    path = os.path.join(out_dir, "trace.csv")
    trace_frame(report.records).to_csv(path, index=False)
    written.append(path)
    path = os.path.join(out_dir, "steps.jsonl")
    with open(path, "w", encoding="utf-8") as stream:
        for record in report.records:
            stream.write(record.model_dump_json() + "\n")
    written.append(path)
    if inducing_inputs is not None:
        path = os.path.join(out_dir, "inducing.csv")
        pd.DataFrame(inducing_inputs, columns=[f"z{i + 1}" for i in range(inducing_inputs.shape[1])]).to_csv(path, index=False)
        written.append(path)
    if error_grid is not None:
        path = os.path.join(out_dir, "error_grid.csv")
        error_grid.to_csv(path, index=False)
        written.append(path)
    for path in written:
        logger.info("Wrote %s", path)
    return written
