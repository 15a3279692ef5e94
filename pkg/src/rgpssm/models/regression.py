# SPDX-License-Identifier: Apache-2.0
"""Model under which the filter reduces to online GP regression on (c_t, y_t) pairs."""

import numpy as np

from rgpssm.models.base import ModelSpec


def gpr_reduction_modelspec(n_in: int = 1, n_f: int = 1, measurement_noise: float = 0.01) -> ModelSpec:
    """x_t = f(c_t) with the exogenous input c_t passed as the control, y_t = x_t + noise."""

    def gp_input(x, control):
        return np.atleast_1d(np.asarray(control, dtype=float))

    return ModelSpec(
        n_x=n_f,
        n_y=n_f,
        n_f=n_f,
        n_in=n_in,
        transition=lambda x, f, control: np.array(f, dtype=float),
        measurement=lambda x: x,
        gp_input=gp_input,
        process_noise=np.zeros((n_f, n_f)),
        measurement_noise=measurement_noise * np.eye(n_f),
        transition_jac_x=lambda x, f, control: np.zeros((n_f, n_f)),
        transition_jac_f=lambda x, f, control: np.eye(n_f),
        measurement_jac=lambda x: np.eye(n_f),
        gp_input_jac=lambda x, control: np.zeros((n_in, n_f)),
        name="gpr",
    )
