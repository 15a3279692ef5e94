# SPDX-License-Identifier: Apache-2.0
"""Model structure shared by the filter and the simulators.

1. numeric_jacobian: central-difference Jacobian.
2. ModelSpec: transition, measurement and GP-input maps with Jacobian providers and noise levels.
"""

import logging
from dataclasses import dataclass
from dataclasses import field
from typing import Any
from typing import Callable
from typing import Optional

import numpy as np

from rgpssm.utils.errors import DimensionError
from rgpssm.utils.errors import JacobianError

logger = logging.getLogger(__name__)

Transition = Callable[[np.ndarray, np.ndarray, Any], np.ndarray]
Measurement = Callable[[np.ndarray], np.ndarray]
GPInput = Callable[[np.ndarray, Any], np.ndarray]

DEFAULT_RELATIVE_STEP = float(np.sqrt(np.finfo(float).eps))


def numeric_jacobian(fn: Callable[[np.ndarray], np.ndarray], point, relative_step: Optional[float] = None) -> np.ndarray:
    """Central-difference Jacobian of `fn` at `point`.

    The step for coordinate i is relative_step * (1 + |point_i|), taken as the exactly
    representable difference between the two evaluation points.
    """
    point = np.atleast_1d(np.asarray(point, dtype=float))
    relative_step = DEFAULT_RELATIVE_STEP if relative_step is None else relative_step
    value = np.atleast_1d(np.asarray(fn(point), dtype=float))
    jac = np.empty((value.size, point.size))
    for i in range(point.size):
        step = relative_step * (1.0 + abs(point[i]))
        upper = point.copy()
        lower = point.copy()
        upper[i] += step
        lower[i] -= step
        f_upper = np.atleast_1d(np.asarray(fn(upper), dtype=float))
        f_lower = np.atleast_1d(np.asarray(fn(lower), dtype=float))
        if not (np.all(np.isfinite(f_upper)) and np.all(np.isfinite(f_lower))):
            raise JacobianError(f"non-finite evaluation while differencing coordinate {i}")
        jac[:, i] = (f_upper - f_lower) / (upper[i] - lower[i])
    return jac


@dataclass(frozen=True)
class ModelSpec:
    """Known structure of the state-space model around the unknown function f.

    x_{t+1} = F(x_t, f(z_t), c_t) + w,  z_t = h(x_t, c_t),  y_t = g(x_t) + v,
    with w ~ N(0, process_noise) and v ~ N(0, measurement_noise). Jacobian providers left as
    None are computed by central differences.
    """

    n_x: int
    n_y: int
    n_f: int
    n_in: int
    transition: Transition
    measurement: Measurement
    gp_input: GPInput
    process_noise: np.ndarray
    measurement_noise: np.ndarray
    transition_jac_x: Optional[Transition] = None
    transition_jac_f: Optional[Transition] = None
    measurement_jac: Optional[Measurement] = None
    gp_input_jac: Optional[GPInput] = None
    fd_relative_step: Optional[float] = None
    name: str = field(default="model")

    def __post_init__(self):
        sigma_f = np.atleast_2d(np.asarray(self.process_noise, dtype=float))
        sigma_g = np.atleast_2d(np.asarray(self.measurement_noise, dtype=float))
        if sigma_f.shape != (self.n_x, self.n_x):
            raise DimensionError(f"process noise must be {self.n_x}x{self.n_x}, got {sigma_f.shape}")
        if sigma_g.shape != (self.n_y, self.n_y):
            raise DimensionError(f"measurement noise must be {self.n_y}x{self.n_y}, got {sigma_g.shape}")
        if not np.allclose(sigma_f, sigma_f.T) or np.linalg.eigvalsh(sigma_f).min() < -1e-12:
            raise DimensionError("process noise must be symmetric positive semidefinite")
        if not np.allclose(sigma_g, sigma_g.T) or np.linalg.eigvalsh(sigma_g).min() <= 0:
            raise DimensionError("measurement noise must be symmetric positive definite")
        object.__setattr__(self, "process_noise", sigma_f)
        object.__setattr__(self, "measurement_noise", sigma_g)

    def _checked(self, jac: np.ndarray, shape, what: str) -> np.ndarray:
        jac = np.asarray(jac, dtype=float).reshape(shape)
        if not np.all(np.isfinite(jac)):
            raise JacobianError(f"{self.name}: {what} Jacobian is not finite")
        return jac

    def jac_x(self, x: np.ndarray, f: np.ndarray, control: Any = None) -> np.ndarray:
        """Partial ∂F/∂x with f held fixed."""
        if self.transition_jac_x is not None:
            jac = self.transition_jac_x(x, f, control)
        else:
            jac = numeric_jacobian(lambda v: self.transition(v, f, control), x, self.fd_relative_step)
        return self._checked(jac, (self.n_x, self.n_x), "transition state")

    def jac_f(self, x: np.ndarray, f: np.ndarray, control: Any = None) -> np.ndarray:
        """Partial ∂F/∂f."""
        if self.transition_jac_f is not None:
            jac = self.transition_jac_f(x, f, control)
        else:
            jac = numeric_jacobian(lambda v: self.transition(x, v, control), f, self.fd_relative_step)
        return self._checked(jac, (self.n_x, self.n_f), "transition function")

    def jac_g(self, x: np.ndarray) -> np.ndarray:
        if self.measurement_jac is not None:
            jac = self.measurement_jac(x)
        else:
            jac = numeric_jacobian(self.measurement, x, self.fd_relative_step)
        return self._checked(jac, (self.n_y, self.n_x), "measurement")

    def jac_h(self, x: np.ndarray, control: Any = None) -> np.ndarray:
        if self.gp_input_jac is not None:
            jac = self.gp_input_jac(x, control)
        else:
            jac = numeric_jacobian(lambda v: self.gp_input(v, control), x, self.fd_relative_step)
        return self._checked(jac, (self.n_in, self.n_x), "GP input")

    def step_mean(self, x: np.ndarray, f: np.ndarray, control: Any = None) -> np.ndarray:
        return np.asarray(self.transition(x, f, control), dtype=float).reshape(self.n_x)

    def observe(self, x: np.ndarray) -> np.ndarray:
        return np.atleast_1d(np.asarray(self.measurement(x), dtype=float)).reshape(self.n_y)

    def input_of(self, x: np.ndarray, control: Any = None) -> np.ndarray:
        return np.atleast_1d(np.asarray(self.gp_input(x, control), dtype=float)).reshape(self.n_in)
