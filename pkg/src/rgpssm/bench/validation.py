# SPDX-License-Identifier: Apache-2.0
"""Validation of resolved experiment configurations before a run starts."""

import math
from dataclasses import replace
from typing import Any
from typing import List

from rgpssm.bench.data import DAISY_PRESETS
from rgpssm.utils.configuration import ExperimentConfig
from rgpssm.utils.errors import ConfigurationError

TASKS = ("wingrock", "lincycle", "sysid", "gprcheck")


def sanitize_positive(value: Any, field_name: str, allow_zero: bool = False) -> float:
    """Convert a value to a finite positive float.

    Args:
        value: The value to convert
        field_name: Name of the field being validated
        allow_zero: Whether zero is accepted

    Returns:
        float: The validated value

    Raises:
        ValueError: If the value is not a number or out of range
    """
    try:
        number = float(value)
    except (TypeError, ValueError) as e:
        raise ValueError(f"{field_name} must be a valid number") from e
    if math.isnan(number) or number < 0 or (number == 0 and not allow_zero):
        raise ValueError(f"{field_name} must be {'non-negative' if allow_zero else 'positive'}, got {value}")
    return number


def validate_task(value: Any) -> str:
    """Direct validator for the task field."""
    task = str(value).strip().lower()
    if task not in TASKS:
        raise ValueError(f"task must be one of {', '.join(TASKS)}, got '{value}'")
    return task


def validate_threshold(value: Any) -> float:
    """Novelty threshold on the base-kernel scale; inf freezes the inducing set."""
    threshold = sanitize_positive(value, "filter.noveltyThreshold", allow_zero=True)
    if not math.isinf(threshold) and threshold >= 1.0:
        raise ValueError("filter.noveltyThreshold must lie below 1 (or be inf)")
    return threshold


def validate_broadcast(values: List[float], expected: int, field_name: str) -> List[float]:
    """A list with one value or exactly `expected` positive values."""
    if len(values) not in (1, expected):
        raise ValueError(f"{field_name} needs 1 or {expected} values, got {len(values)}")
    return [sanitize_positive(v, field_name) for v in values]


def validate_experiment(config: ExperimentConfig) -> ExperimentConfig:
    """Check every field a run depends on and return the config with its task name normalized.

    All problems are reported together in one ConfigurationError.
    """
    problems = []

    def check(fn, *args):
        try:
            fn(*args)
        except ValueError as e:
            problems.append(str(e))

    task = config.task
    try:
        task = validate_task(config.task)
    except ValueError as e:
        problems.append(str(e))
    check(validate_threshold, config.filter.novelty_threshold)
    check(sanitize_positive, config.filter.budget, "filter.budget", True)
    check(sanitize_positive, config.filter.jitter, "filter.jitter")
    check(sanitize_positive, config.filter.hyperopt.learning_rate, "filter.hyperopt.learningRate")
    check(sanitize_positive, config.filter.hyperopt.max_log_step, "filter.hyperopt.maxLogStep", True)
    check(sanitize_positive, config.dt, "dt")
    check(sanitize_positive, config.duration, "duration")
    check(sanitize_positive, config.initial_state_variance, "initialStateVariance")
    check(sanitize_positive, config.runs, "runs")
    if config.process_noise is not None:
        check(sanitize_positive, config.process_noise, "processNoise", True)
    if config.measurement_noise is not None:
        check(sanitize_positive, config.measurement_noise, "measurementNoise")
    if config.train_steps < 2:
        problems.append("trainSteps must be at least 2")
    if config.forecast_steps < 0:
        problems.append("forecastSteps must be non-negative")
    if task == "sysid":
        if not config.data_path and not config.dataset_name:
            problems.append("sysid needs dataPath or datasetName")
        if config.dataset_name and config.dataset_name not in DAISY_PRESETS:
            problems.append(f"datasetName must be one of {', '.join(DAISY_PRESETS)}")
        if config.n_lat < 1:
            problems.append("nLat must be at least 1")
    if problems:
        raise ConfigurationError("; ".join(problems))
    return replace(config, task=task)
