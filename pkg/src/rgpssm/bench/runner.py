# SPDX-License-Identifier: Apache-2.0
"""Experiment runner: simulate or load data, filter online, forecast, summarize.
1. run_experiment: Run every Monte-Carlo repetition of a configured task and build the report.
2. run_task: One seeded run of wingrock, lincycle, sysid or gprcheck.
3. build_hyperparameters: Initial kernel hyperparameters from the configuration.
4. wingrock_error_grid: GP prediction error of the wing rock uncertainty over the state plane.
"""

import logging
import time
from dataclasses import dataclass
from dataclasses import field
from dataclasses import replace
from typing import Callable
from typing import Dict
from typing import Optional

import numpy as np
import pandas as pd

from rgpssm.bench.data import load_daisy
from rgpssm.bench.data import resolve_preset
from rgpssm.bench.data import rmse
from rgpssm.bench.data import split_halves
from rgpssm.bench.data import standardize
from rgpssm.bench.report import ExperimentReport
from rgpssm.bench.report import ExperimentSummary
from rgpssm.bench.report import aggregate_runs
from rgpssm.bench.report import write_report
from rgpssm.bench.validation import validate_broadcast
from rgpssm.bench.validation import validate_experiment
from rgpssm.bench.validation import validate_task
from rgpssm.filter.belief import AugmentedBelief
from rgpssm.filter.belief import init_belief
from rgpssm.filter.kernel import Hyperparameters
from rgpssm.filter.recursion import FilterSession
from rgpssm.filter.recursion import gp_posterior
from rgpssm.models.base import ModelSpec
from rgpssm.models.lincycle import LimitCycleParams
from rgpssm.models.lincycle import lincycle_modelspec
from rgpssm.models.lincycle import switching_lds_simulate
from rgpssm.models.regression import gpr_reduction_modelspec
from rgpssm.models.sysid import sysid_modelspec
from rgpssm.models.sysid import sysid_seed_belief
from rgpssm.models.wingrock import WingRockParams
from rgpssm.models.wingrock import wingrock_delta
from rgpssm.models.wingrock import wingrock_modelspec
from rgpssm.models.wingrock import wingrock_simulate
from rgpssm.oracle import exact_gpr
from rgpssm.utils.configuration import ExperimentConfig
from rgpssm.utils.errors import ExperimentError
from rgpssm.utils.errors import RGPSSMError

logger = logging.getLogger(__name__)


@dataclass
class TaskResult:
    summary: ExperimentSummary
    session: FilterSession
    error_grid: Optional[pd.DataFrame] = None
    extras: Dict[str, np.ndarray] = field(default_factory=dict)


def build_hyperparameters(config: ExperimentConfig, n_in: int, n_f: int) -> Hyperparameters:
    lengths = validate_broadcast(config.kernel.length_scales, n_in, "kernel.lengthScales")
    variances = validate_broadcast(config.kernel.signal_variances, n_f, "kernel.signalVariances")
    return Hyperparameters.create(lengths, variances, n_in, n_f)


def _process_noise(config: ExperimentConfig, default: float = 1e-4) -> float:
    return default if config.process_noise is None else config.process_noise


def _metrics(config: ExperimentConfig, task: str):
    if not config.telemetry.enabled:
        return None
    from rgpssm.observability.otel_metrics import filter_metrics
    return filter_metrics(config.telemetry, task)


def _session(belief: AugmentedBelief, model: ModelSpec, config: ExperimentConfig, filter_config=None) -> FilterSession:
    return FilterSession(belief, model, filter_config or config.filter, _metrics(config, model.name))


def _train(session: FilterSession, controls, measurements, first_step: int = 0):
    """Step through the stream; a failing step is re-raised with its index."""
    for k, (control, y) in enumerate(zip(controls, measurements)):
        try:
            session.step(control, y)
        except RGPSSMError as e:
            raise ExperimentError(e.message, step=first_step + k) from e


def _summary(task: str, seed: int, session: FilterSession, filter_rmse: float, forecast_rmse: float,
             metrics: Dict[str, float]) -> ExperimentSummary:
    elapsed = np.array([r.elapsed_ms for r in session.history if r.elapsed_ms is not None])
    return ExperimentSummary(
        task=task,
        seed=seed,
        steps=len(session.history),
        filter_rmse=filter_rmse,
        forecast_rmse=forecast_rmse,
        ms_per_step=float(elapsed.mean()) if elapsed.size else 0.0,
        median_ms_per_step=float(np.median(elapsed)) if elapsed.size else 0.0,
        n_u=session.belief.n_u,
        log_hyperparameters=session.belief.hyperparameters.as_vector().tolist(),
        metrics=metrics,
    )


def wingrock_error_grid(belief: AugmentedBelief, params: WingRockParams, jitter: float,
                        theta_range=(-1.0, 1.0), p_range=(-1.5, 1.5), points: int = 41) -> pd.DataFrame:
    thetas, rates = np.meshgrid(np.linspace(*theta_range, points), np.linspace(*p_range, points))
    grid = np.column_stack([thetas.ravel(), rates.ravel()])
    rows = []
    for z in grid:
        mean, cov, _ = gp_posterior(belief, z, jitter)
        truth = wingrock_delta(z[0], z[1], params)
        rows.append({"theta": z[0], "p": z[1], "delta": truth, "gp_mean": mean[0], "gp_var": cov[0, 0],
                     "error": mean[0] - truth})
    return pd.DataFrame(rows)


def run_wingrock(config: ExperimentConfig, seed: int) -> TaskResult:
    params = WingRockParams(dt=config.dt)
    n_train = int(round(config.duration / config.dt))
    data = wingrock_simulate(params, duration=(n_train + config.forecast_steps + 1) * config.dt, seed=seed)
    model = wingrock_modelspec(params, config.process_noise, config.measurement_noise)
    h = build_hyperparameters(config, model.n_in, model.n_f)
    belief = init_belief(np.zeros(2), config.initial_state_variance * np.eye(2), h, jitter=config.filter.jitter)
    session = _session(belief, model, config)
    _train(session, data.control[:n_train - 1], data.y[1:n_train])
    estimates = np.array([r.state_mean for r in session.history])
    gp_mean = np.array([r.gp_mean[0] for r in session.history])
    quarter = len(session.history) // 4
    delta_final = rmse(gp_mean[-quarter:], data.delta[n_train - 1 - quarter:n_train - 1])
    predictions = session.forecast(data.control[n_train - 1:n_train - 1 + config.forecast_steps], config.forecast_steps)
    forecast = np.array([m for m, _ in predictions]).reshape(-1, 2)
    truth = data.x[n_train:n_train + config.forecast_steps]
    grid = wingrock_error_grid(session.belief, params, config.filter.jitter)
    summary = _summary(
        "wingrock", seed, session,
        rmse(estimates, data.x[1:n_train]),
        rmse(forecast, truth) if config.forecast_steps else 0.0,
        {
            "delta_rmse_final_quarter": delta_final,
            "delta_rmse_first_quarter": rmse(gp_mean[:quarter], data.delta[:quarter]),
            "grid_rmse": float(np.sqrt(np.mean(grid["error"] ** 2))),
        },
    )
    extras = {"z": np.column_stack([data.x[:n_train - 1, 0], data.x[:n_train - 1, 1]]), "delta": data.delta[:n_train - 1]}
    return TaskResult(summary, session, grid, extras)


def run_lincycle(config: ExperimentConfig, seed: int) -> TaskResult:
    params = LimitCycleParams() if config.measurement_noise is None else LimitCycleParams(noise_std=float(np.sqrt(config.measurement_noise)))
    n_train = config.train_steps
    data = switching_lds_simulate(params, seed, n_train + config.forecast_steps)
    model = lincycle_modelspec(data.emission, params, _process_noise(config))
    h = build_hyperparameters(config, model.n_in, model.n_f)
    x0 = np.linalg.lstsq(data.emission, data.y[0], rcond=None)[0]
    belief = init_belief(x0, config.initial_state_variance * np.eye(2), h, jitter=config.filter.jitter)
    session = _session(belief, model, config)
    _train(session, [None] * (n_train - 1), data.y[1:n_train])
    estimates = np.array([r.state_mean for r in session.history])
    truth = data.x[1:n_train]
    quarter = len(estimates) // 4
    predictions = session.forecast(None, config.forecast_steps)
    future = data.x[n_train:n_train + config.forecast_steps]
    forecast = np.array([m for m, _ in predictions]).reshape(-1, 2)
    hold = np.repeat(session.belief.mean[None, :2], len(future), axis=0)
    summary = _summary(
        "lincycle", seed, session,
        rmse(estimates, truth),
        rmse(forecast, future) if config.forecast_steps else 0.0,
        {
            "filter_rmse_first_quarter": rmse(estimates[:quarter], truth[:quarter]),
            "filter_rmse_last_quarter": rmse(estimates[-quarter:], truth[-quarter:]),
            "hold_baseline_rmse": rmse(hold, future) if config.forecast_steps else 0.0,
        },
    )
    return TaskResult(summary, session)


def run_sysid(config: ExperimentConfig, seed: int, data_dir: Optional[str] = None) -> TaskResult:
    path, input_cols, output_col = config.data_path, list(config.input_cols), config.output_col
    if config.dataset_name:
        preset_path, preset_inputs, preset_output = resolve_preset(config.dataset_name, data_dir)
        path = path or preset_path
        input_cols = input_cols or preset_inputs
        output_col = preset_output if output_col < 0 else output_col
    elif output_col < 0:
        output_col = 1
    input_cols = input_cols or [0]
    train, test, scalers = standardize(*split_halves(load_daisy(path, input_cols, output_col)))
    noise = 1e-2 if config.measurement_noise is None else config.measurement_noise
    model = sysid_modelspec(config.n_lat, _process_noise(config), noise)
    h = build_hyperparameters(config, model.n_in, model.n_f)
    rng = np.random.default_rng(seed)
    belief = sysid_seed_belief(model, h, rng, x0_variance=config.initial_state_variance, jitter=config.filter.jitter)
    session = _session(belief, model, config)
    _train(session, train.u[1:, 0], train.y[1:])
    filtered = np.array([r.state_mean[0] for r in session.history])
    steps = len(test) if config.forecast_steps <= 0 else min(config.forecast_steps, len(test))
    predictions = session.forecast_measurements(test.u[:steps, 0], steps)
    forecast = np.array([m[0] for m, _ in predictions])
    original = scalers["y"].inverse(forecast)
    summary = _summary(
        "sysid", seed, session,
        rmse(filtered, train.y[1:]),
        rmse(forecast, test.y[:steps]),
        {"forecast_rmse_original_units": rmse(original, scalers["y"].inverse(test.y[:steps]))},
    )
    return TaskResult(summary, session)


def run_gprcheck(config: ExperimentConfig, seed: int) -> TaskResult:
    """Online filter against batch GP regression on a spread-out one-dimensional input stream."""
    rng = np.random.default_rng(seed)
    n = config.train_steps
    noise = 0.01 if config.measurement_noise is None else config.measurement_noise
    inputs = rng.permutation(0.75 * np.arange(n) - 0.375 * n)
    targets = np.sin(inputs) + np.sqrt(noise) * rng.standard_normal(n)
    model = gpr_reduction_modelspec(1, 1, noise)
    h = build_hyperparameters(config, 1, 1)
    filter_config = replace(config.filter, budget=n, hyperopt=replace(config.filter.hyperopt, enabled=False))
    belief = init_belief(np.zeros(1), np.eye(1), h, jitter=config.filter.jitter)
    session = _session(belief, model, config, filter_config)
    _train(session, inputs, targets)
    b = session.belief
    mean, cov = exact_gpr(inputs, targets, noise, b.hyperparameters, b.inducing_inputs, filter_config.jitter)
    s_uu = b.covariance[b.n_x:, b.n_x:]
    metrics = {
        "max_mean_error": float(np.max(np.abs(b.mean[b.n_x:] - mean))),
        "max_variance_error": float(np.max(np.abs(np.diag(s_uu) - np.diag(cov)))),
    }
    estimates = np.array([r.state_mean[0] for r in session.history])
    summary = _summary("gprcheck", seed, session, rmse(estimates, targets), 0.0, metrics)
    return TaskResult(summary, session)


TASK_RUNNERS: Dict[str, Callable[..., TaskResult]] = {
    "wingrock": run_wingrock,
    "lincycle": run_lincycle,
    "sysid": run_sysid,
    "gprcheck": run_gprcheck,
}


def run_task(config: ExperimentConfig, seed: int) -> TaskResult:
    return TASK_RUNNERS[validate_task(config.task)](config, seed)


def run_experiment(config: ExperimentConfig, write: bool = True) -> ExperimentReport:
    """Run `config.runs` repetitions (seeds seed, seed + 1, ...) and write the artifacts to `out_dir`."""
    config = validate_experiment(config)
    logger.info("Starting %s with %d run(s) from seed %d", config.task, config.runs, config.seed)
    start = time.perf_counter()
    results = [run_task(config, config.seed + r) for r in range(config.runs)]
    first = results[0]
    report = ExperimentReport(
        config=config.to_dict(),
        summary=first.summary,
        runs=[r.summary for r in results],
        aggregate=aggregate_runs([r.summary for r in results]),
        records=first.session.history,
    )
    logger.info("Finished %s in %.1f s: filter RMSE %.4f, forecast RMSE %.4f", config.task,
                time.perf_counter() - start, first.summary.filter_rmse, first.summary.forecast_rmse)
    if write and config.out_dir:
        write_report(report, config.out_dir, first.session.belief.inducing_inputs, first.error_grid)
    return report
