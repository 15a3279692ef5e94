# SPDX-License-Identifier: Apache-2.0
"""Planar limit cycle from a switching affine system, observed through a random 4×2 map.

The orbit is a clockwise oval: straights along x2 = ±r joined by half-circle turns of radius r
around (±a, 0). The regime switches with hysteresis: a turn starts when x1 passes ±a at the end
of its inbound straight and lasts until x1 is back within ±a on the other side of the oval.
On the straights the lateral coordinate contracts toward ±r.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd

from rgpssm.models.base import ModelSpec

logger = logging.getLogger(__name__)

STRAIGHT, RIGHT_TURN, LEFT_TURN = 0, 1, 2


@dataclass(frozen=True)
class LimitCycleParams:
    half_length: float = 2.0
    radius: float = 1.0
    speed: float = 0.1
    contraction: float = 0.05
    noise_std: float = 0.1
    process_noise_std: float = 0.0
    n_y: int = 4

    @property
    def bound(self) -> float:
        """Upper bound of |x| on the cycle and any trajectory started on it."""
        return self.half_length + 2.0 * self.radius


def _rotate(x: np.ndarray, center: np.ndarray, angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return center + np.array([[c, -s], [s, c]]) @ (x - center)


def initial_regime(x: np.ndarray, params: LimitCycleParams) -> int:
    """Regime of a state without history: a turn iff x1 lies beyond the end of the straights."""
    if x[0] > params.half_length:
        return RIGHT_TURN
    if x[0] < -params.half_length:
        return LEFT_TURN
    return STRAIGHT


def next_regime(x: np.ndarray, previous: int, params: LimitCycleParams) -> int:
    """Hysteresis switching on the side of the oval.

    A turn is entered only past the end of its inbound straight (upper side for the right
    turn, lower side for the left) and left only once x1 is back within ±a on the outbound side.
    """
    a = params.half_length
    upper = x[1] >= 0
    if previous == RIGHT_TURN:
        return STRAIGHT if x[0] <= a and not upper else RIGHT_TURN
    if previous == LEFT_TURN:
        return STRAIGHT if x[0] >= -a and upper else LEFT_TURN
    if x[0] > a and upper:
        return RIGHT_TURN
    if x[0] < -a and not upper:
        return LEFT_TURN
    return STRAIGHT


def cycle_step(x: np.ndarray, params: LimitCycleParams, regime: Optional[int] = None) -> np.ndarray:
    """One noiseless step of the switching system in `regime` (classified from `x` when None)."""
    a, r, v = params.half_length, params.radius, params.speed
    regime = initial_regime(x, params) if regime is None else regime
    if regime == RIGHT_TURN:
        return _rotate(x, np.array([a, 0.0]), -v / r)
    if regime == LEFT_TURN:
        return _rotate(x, np.array([-a, 0.0]), -v / r)
    side = 1.0 if x[1] >= 0 else -1.0
    return np.array([x[0] + side * v, x[1] + params.contraction * (side * r - x[1])])


@dataclass
class LimitCycleDataset:
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    regime: np.ndarray
    emission: np.ndarray

    def __len__(self) -> int:
        return self.t.size

    def to_frame(self) -> pd.DataFrame:
        columns = {"t": self.t, "x1": self.x[:, 0], "x2": self.x[:, 1]}
        columns.update({f"y{i + 1}": self.y[:, i] for i in range(self.y.shape[1])})
        columns["regime"] = self.regime
        return pd.DataFrame(columns)


def emission_matrix(params: LimitCycleParams, seed: int) -> np.ndarray:
    return np.random.default_rng((seed, 1)).standard_normal((params.n_y, 2))


def switching_lds_simulate(params: LimitCycleParams = LimitCycleParams(), seed: int = 0, steps: int = 1000,
                           emission: Optional[np.ndarray] = None, x0=None) -> LimitCycleDataset:
    rng = np.random.default_rng(seed)
    emission = emission_matrix(params, seed) if emission is None else np.asarray(emission, dtype=float)
    x = np.empty((steps, 2))
    regime = np.empty(steps, dtype=int)
    state = np.array([0.0, params.radius]) if x0 is None else np.asarray(x0, dtype=float).copy()
    current = initial_regime(state, params)
    for k in range(steps):
        x[k] = state
        if k:
            current = next_regime(state, current, params)
        regime[k] = current
        state = cycle_step(state, params, current)
        if params.process_noise_std > 0:
            state = state + params.process_noise_std * rng.standard_normal(2)
    y = x @ emission.T + params.noise_std * rng.standard_normal((steps, emission.shape[0]))
    return LimitCycleDataset(np.arange(steps, dtype=float), x, y, regime, emission)


def lincycle_modelspec(emission: np.ndarray, params: LimitCycleParams = LimitCycleParams(),
                       process_noise: float = 1e-4) -> ModelSpec:
    """F(x, f) = x + f with z = x and a known linear emission y = C x."""
    emission = np.asarray(emission, dtype=float)
    n_y = emission.shape[0]
    return ModelSpec(
        n_x=2,
        n_y=n_y,
        n_f=2,
        n_in=2,
        transition=lambda x, f, control: x + f,
        measurement=lambda x: emission @ x,
        gp_input=lambda x, control: x,
        process_noise=process_noise * np.eye(2),
        measurement_noise=max(params.noise_std**2, 1e-12) * np.eye(n_y),
        transition_jac_x=lambda x, f, control: np.eye(2),
        transition_jac_f=lambda x, f, control: np.eye(2),
        measurement_jac=lambda x: emission,
        gp_input_jac=lambda x, control: np.eye(2),
        name="lincycle",
    )
