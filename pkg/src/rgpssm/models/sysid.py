# SPDX-License-Identifier: Apache-2.0
"""Latent-state model for input/output system identification.

x_{t+1} = f(x_t, u_t) with the GP input (x_t, u_t) and y_t = x_t[0]. The latent coordinates
are unidentified, so learning starts from one inducing point seeded near the origin with a
perturbed mean; under the zero-mean prior A_x would otherwise vanish.
"""

import logging
import numpy as np

from rgpssm.filter.belief import AugmentedBelief
from rgpssm.filter.belief import init_belief
from rgpssm.filter.kernel import Hyperparameters
from rgpssm.models.base import ModelSpec

logger = logging.getLogger(__name__)


def sysid_modelspec(n_lat: int = 4, process_noise: float = 1e-4, measurement_noise: float = 1e-2) -> ModelSpec:
    n_in = n_lat + 1
    row = np.zeros((1, n_lat))
    row[0, 0] = 1.0
    input_jac = np.vstack([np.eye(n_lat), np.zeros((1, n_lat))])

    def gp_input(x, control):
        control = 0.0 if control is None else float(np.ravel(control)[0])
        return np.append(x, control)

    return ModelSpec(
        n_x=n_lat,
        n_y=1,
        n_f=n_lat,
        n_in=n_in,
        transition=lambda x, f, control: np.array(f, dtype=float),
        measurement=lambda x: x[:1],
        gp_input=gp_input,
        process_noise=process_noise * np.eye(n_lat),
        measurement_noise=np.array([[measurement_noise]]),
        transition_jac_x=lambda x, f, control: np.zeros((n_lat, n_lat)),
        transition_jac_f=lambda x, f, control: np.eye(n_lat),
        measurement_jac=lambda x: row,
        gp_input_jac=lambda x, control: input_jac,
        name="sysid",
    )


def sysid_seed_belief(model: ModelSpec, h: Hyperparameters, rng: np.random.Generator, x0_mean=None,
                      x0_variance: float = 1.0, scale: float = 0.1, jitter: float = 1e-10) -> AugmentedBelief:
    """Initial belief holding one inducing point z₀ ~ N(0, scale² I) with mean ~ N(0, scale² I).

    The seeded block keeps the prior covariance K(z₀, z₀); only its mean is perturbed.
    """
    x0_mean = np.zeros(model.n_x) if x0_mean is None else np.asarray(x0_mean, dtype=float)
    z0 = scale * rng.standard_normal((1, model.n_in))
    m0 = scale * rng.standard_normal(model.n_f)
    logger.debug("Seeded inducing point %s with mean %s", z0[0], m0)
    return init_belief(x0_mean, x0_variance * np.eye(model.n_x), h, inducing_inputs=z0, inducing_mean=m0, jitter=jitter)
