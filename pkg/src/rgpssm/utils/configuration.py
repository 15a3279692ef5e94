# SPDX-License-Identifier: Apache-2.0
"""The definition of the filter and experiment configuration."""

import math
from typing import List
from typing import Optional

from rgpssm.utils.configuration_wizard import ConfigWizard
from rgpssm.utils.configuration_wizard import configclass
from rgpssm.utils.configuration_wizard import configfield


@configclass
class HyperOptConfig(ConfigWizard):
    """Online hyperparameter optimization settings.

    :cvar enabled: Run one optimizer iteration per filter step
    :cvar learning_rate: Adam learning rate on log-hyperparameters
    """

    enabled: bool = configfield(
        "enabled",
        default=True,
        help_txt="Run one Adam iteration on the recovered-likelihood loss per filter step",
    )
    learning_rate: float = configfield(
        "learning_rate",
        default=0.01,
        help_txt="Adam learning rate (log-hyperparameter units)",
    )
    beta1: float = configfield("beta1", default=0.9, help_txt="Adam first-moment decay")
    beta2: float = configfield("beta2", default=0.999, help_txt="Adam second-moment decay")
    eps: float = configfield("eps", default=1e-8, help_txt="Adam denominator offset")
    max_log_step: float = configfield(
        "max_log_step",
        default=0.1,
        help_txt="Per-step clip on |delta theta| in log space, 0 disables the clip",
    )
    min_inducing: int = configfield(
        "min_inducing",
        default=2,
        help_txt="Skip optimization while fewer inducing points than this are held",
    )


@configclass
class FilterConfig(ConfigWizard):
    """Recursive GPSSM filter settings.

    :cvar budget: Maximum number of inducing points M
    :cvar novelty_threshold: Novelty gate on the base-kernel scale, inf freezes the set
    """

    budget: int = configfield(
        "budget",
        default=20,
        help_txt="Maximum number of retained inducing points",
    )
    novelty_threshold: float = configfield(
        "novelty_threshold",
        default=1e-4,
        help_txt="Add a point only if its prior conditional variance (base kernel scale) exceeds this",
    )
    jitter: float = configfield(
        "jitter",
        default=1e-10,
        help_txt="Relative diagonal jitter for kernel matrices and process noise",
    )
    jitter_max_tries: int = configfield(
        "jitter_max_tries",
        default=6,
        help_txt="Tenfold jitter escalations before a factorization is declared failed",
    )
    fd_relative_step: Optional[float] = configfield(
        "fd_relative_step",
        default=None,
        help_txt="Finite-difference step scale, defaults to sqrt(machine epsilon)",
    )
    hyperopt: HyperOptConfig = configfield(
        "hyperopt",
        env=False,
        default_factory=HyperOptConfig,
        help_txt="Online hyperparameter optimization",
    )

    @property
    def adds_points(self) -> bool:
        """Whether the novelty gate can ever open."""
        return not math.isinf(self.novelty_threshold)


@configclass
class KernelConfig(ConfigWizard):
    """Initial SE-ARD hyperparameters; scalars broadcast to every dimension."""

    length_scales: List[float] = configfield(
        "length_scales",
        default_factory=lambda: [1.0],
        help_txt="Initial length scales l_i (one value broadcasts)",
    )
    signal_variances: List[float] = configfield(
        "signal_variances",
        default_factory=lambda: [1.0],
        help_txt="Initial signal variances sigma_i^2 (one value broadcasts)",
    )


@configclass
class TelemetryConfig(ConfigWizard):
    """OpenTelemetry metric export."""

    enabled: bool = configfield(
        "enabled",
        default=False,
        help_txt="Record per-step filter metrics with OpenTelemetry",
    )
    service_name: str = configfield(
        "service_name",
        default="rgpssm",
        help_txt="Meter name used for the filter metrics",
    )
    otlp_grpc_endpoint: str = configfield(
        "otlp_grpc_endpoint",
        default="",
        help_txt="OTLP gRPC collector endpoint, metrics go to stderr through the console exporter when empty",
    )
    export_interval_ms: int = configfield(
        "export_interval_ms",
        default=60000,
        help_txt="Interval between periodic metric exports in milliseconds",
    )


@configclass
class ExperimentConfig(ConfigWizard):
    """Configuration of one benchmark run.

    :cvar task: One of wingrock, lincycle, sysid, gprcheck
    :cvar seed: Seed for every random draw of the run
    """

    task: str = configfield(
        "task",
        default="wingrock",
        help_txt="Experiment task: wingrock, lincycle, sysid or gprcheck",
    )
    seed: int = configfield("seed", default=0, help_txt="Random seed")
    runs: int = configfield(
        "runs",
        default=1,
        help_txt="Monte-Carlo repetitions; run r uses seed + r",
    )
    dt: float = configfield("dt", default=0.02, help_txt="Integration step in seconds (wingrock)")
    duration: float = configfield(
        "duration",
        default=50.0,
        help_txt="Simulated training duration in seconds (wingrock)",
    )
    train_steps: int = configfield(
        "train_steps",
        default=500,
        help_txt="Training steps for lincycle and gprcheck",
    )
    forecast_steps: int = configfield(
        "forecast_steps",
        default=500,
        help_txt="Free-running forecast horizon after training",
    )
    process_noise: Optional[float] = configfield(
        "process_noise",
        default=None,
        help_txt="Diagonal process noise Sigma_f used by the filter, defaults to the task's own value "
                 "(1e-4 for lincycle and sysid, diag(1e-8, 1e-6) for wingrock)",
    )
    measurement_noise: Optional[float] = configfield(
        "measurement_noise",
        default=None,
        help_txt="Diagonal measurement noise Sigma_g, defaults to the task's own value",
    )
    initial_state_variance: float = configfield(
        "initial_state_variance",
        default=1.0,
        help_txt="Diagonal of the initial state covariance",
    )
    data_path: str = configfield("data_path", default="", help_txt="DAISY data file (sysid)")
    dataset_name: str = configfield(
        "dataset_name",
        default="",
        help_txt="DAISY preset name (actuator, ballbeam, drive, dryer, gasfurnace)",
    )
    input_cols: List[int] = configfield(
        "input_cols",
        default_factory=list,
        help_txt="Input column indices, overriding the preset",
    )
    output_col: int = configfield("output_col", default=-1, help_txt="Output column index, overriding the preset")
    n_lat: int = configfield("n_lat", default=4, help_txt="Latent state dimension (sysid)")
    out_dir: str = configfield("out_dir", default="", help_txt="Directory for report.json and trace.csv")
    filter: FilterConfig = configfield(
        "filter",
        env=False,
        default_factory=FilterConfig,
        help_txt="Filter settings",
    )
    kernel: KernelConfig = configfield(
        "kernel",
        env=False,
        default_factory=KernelConfig,
        help_txt="Initial kernel hyperparameters",
    )
    telemetry: TelemetryConfig = configfield(
        "telemetry",
        env=False,
        default_factory=TelemetryConfig,
        help_txt="Telemetry settings",
    )
