# SPDX-License-Identifier: Apache-2.0
"""Wing rock roll dynamics: θ' = p, p' = L δ + Δ(θ, p), measured through θ only.

1. wingrock_delta: the uncertainty model Δ(θ, p).
2. WingRockController: PD tracking of a sine roll reference, the default excitation.
3. wingrock_simulate: Euler simulation with noisy roll-angle measurements.
4. wingrock_modelspec: the filter's model with Δ replaced by a GP.
"""

import logging
from dataclasses import dataclass
from typing import Callable
from typing import Optional
from typing import Tuple

import numpy as np
import pandas as pd

from rgpssm.models.base import ModelSpec

logger = logging.getLogger(__name__)

DEFAULT_WEIGHTS = (0.8, 0.2314, 0.6918, -0.6245, 0.0095, 0.0214)
# the simulator is noise-free; Σ_f only absorbs the GP residual on the roll rate
DEFAULT_PROCESS_NOISE = (1e-8, 1e-6)


@dataclass(frozen=True)
class WingRockParams:
    l_delta: float = 3.0
    weights: Tuple[float, ...] = DEFAULT_WEIGHTS
    dt: float = 0.02
    noise_std_deg: float = 0.2

    @property
    def noise_std(self) -> float:
        """Roll-angle measurement noise in radians."""
        return float(np.deg2rad(self.noise_std_deg))


def wingrock_delta(theta: float, p: float, params: WingRockParams = WingRockParams()) -> float:
    w0, w1, w2, w3, w4, w5 = params.weights
    return w0 + w1 * theta + w2 * p + w3 * abs(theta) * p + w4 * abs(p) * p + w5 * theta**2


@dataclass(frozen=True)
class WingRockController:
    """δ = (-k_p (θ - θ_ref(t)) - k_d p) / L with θ_ref(t) = amplitude · sin(2πt / period)."""

    kp: float = 9.0
    kd: float = 6.0
    amplitude: float = 0.6
    period: float = 10.0
    l_delta: float = 3.0

    def reference(self, t: float) -> float:
        return self.amplitude * np.sin(2.0 * np.pi * t / self.period)

    def __call__(self, t: float, x: np.ndarray) -> float:
        return (-self.kp * (x[0] - self.reference(t)) - self.kd * x[1]) / self.l_delta


@dataclass
class WingRockDataset:
    t: np.ndarray
    x: np.ndarray
    delta: np.ndarray
    control: np.ndarray
    y: np.ndarray

    def __len__(self) -> int:
        return self.t.size

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "t": self.t,
            "x1": self.x[:, 0],
            "x2": self.x[:, 1],
            "y1": self.y[:, 0],
            "u1": self.control,
            "delta": self.delta,
        })


def wingrock_simulate(params: WingRockParams = WingRockParams(),
                      control_law: Optional[Callable[[float, np.ndarray], float]] = None,
                      duration: float = 50.0, dt: Optional[float] = None, seed: int = 0,
                      x0=(0.0, 0.0)) -> WingRockDataset:
    """Euler simulation; sample k holds the state, Δ, control and measurement at t_k = k·dt."""
    dt = params.dt if dt is None else dt
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    control_law = control_law or WingRockController(l_delta=params.l_delta)
    rng = np.random.default_rng(seed)
    n = int(round(duration / dt))
    t = np.arange(n) * dt
    x = np.empty((n, 2))
    delta = np.empty(n)
    control = np.empty(n)
    state = np.asarray(x0, dtype=float).copy()
    for k in range(n):
        x[k] = state
        delta[k] = wingrock_delta(state[0], state[1], params)
        control[k] = control_law(t[k], state)
        state = state + np.array([state[1], params.l_delta * control[k] + delta[k]]) * dt
    y = x[:, :1] + params.noise_std * rng.standard_normal((n, 1))
    logger.debug("Simulated %d wing rock steps, max |theta| %.3f", n, np.max(np.abs(x[:, 0])))
    return WingRockDataset(t, x, delta, control, y)


def wingrock_modelspec(params: WingRockParams = WingRockParams(), process_noise: Optional[float] = None,
                       measurement_noise: Optional[float] = None) -> ModelSpec:
    """n_x=2, n_f=1, GP input z = (θ, p), F(x, f, δ) = x + (p, L δ + f)·dt, y = θ.

    A scalar `process_noise` is used as σ² I; None keeps diag(DEFAULT_PROCESS_NOISE).
    """
    dt = params.dt
    sigma_g = params.noise_std**2 if measurement_noise is None else measurement_noise
    sigma_f = np.diag(DEFAULT_PROCESS_NOISE) if process_noise is None else process_noise * np.eye(2)

    def transition(x, f, control):
        control = 0.0 if control is None else float(control)
        return x + np.array([x[1], params.l_delta * control + f[0]]) * dt

    return ModelSpec(
        n_x=2,
        n_y=1,
        n_f=1,
        n_in=2,
        transition=transition,
        measurement=lambda x: x[:1],
        gp_input=lambda x, control: x,
        process_noise=sigma_f,
        measurement_noise=np.array([[sigma_g]]),
        transition_jac_x=lambda x, f, control: np.array([[1.0, dt], [0.0, 1.0]]),
        transition_jac_f=lambda x, f, control: np.array([[0.0], [dt]]),
        measurement_jac=lambda x: np.array([[1.0, 0.0]]),
        gp_input_jac=lambda x, control: np.eye(2),
        name="wingrock",
    )
