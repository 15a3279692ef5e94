# SPDX-License-Identifier: Apache-2.0
"""Seeded random problem instances shared by the acceptance suite and the tests.

1. random_hyperparameters / random_inducing_inputs: kernel settings and well-separated inputs.
2. random_belief: a joint belief whose inducing block is a genuine GP posterior.
3. random_model / simulate_model: a linear-Gaussian model around an unknown f and its data.
"""

from typing import Callable
from typing import Optional
from typing import Sequence
from typing import Tuple

import numpy as np

from rgpssm.filter.belief import AugmentedBelief
from rgpssm.filter.belief import safe_cholesky
from rgpssm.filter.kernel import Hyperparameters
from rgpssm.filter.kernel import gram
from rgpssm.models.base import ModelSpec


def random_hyperparameters(rng: np.random.Generator, n_in: int, n_f: int) -> Hyperparameters:
    return Hyperparameters.create(rng.uniform(0.8, 2.0, n_in), rng.uniform(0.5, 2.0, n_f))


def random_inducing_inputs(rng: np.random.Generator, n_u: int, h: Hyperparameters,
                           min_distance: float = 1.0, max_tries: int = 10000) -> np.ndarray:
    """Rejection-sampled inputs at least `min_distance` length scales apart."""
    # sampled in length-scale units, rescaled on return
    half_width = 1.5 * min_distance * max(n_u, 1) ** (1.0 / h.n_in)
    points = []
    for _ in range(max_tries):
        if len(points) == n_u:
            break
        candidate = rng.uniform(-half_width, half_width, h.n_in)
        if all(np.linalg.norm(candidate - p) >= min_distance for p in points):
            points.append(candidate)
    else:
        if len(points) < n_u:
            raise RuntimeError(f"placed only {len(points)} of {n_u} inducing inputs")
    return np.array(points).reshape(n_u, h.n_in) * h.length_scales


def random_belief(rng: np.random.Generator, n_x: int, n_f: int, n_u: int, n_in: Optional[int] = None,
                  h: Optional[Hyperparameters] = None, jitter: float = 1e-10) -> AugmentedBelief:
    """Belief with u | data the GP regression posterior and x = C u + e.

    The inducing block is (K⁻¹ + R⁻¹)⁻¹ for a random diagonal R, so every hyperparameter change
    and every discard the filter can make leaves a proper Gaussian.
    """
    n_in = n_in or n_x
    h = h or random_hyperparameters(rng, n_in, n_f)
    z = random_inducing_inputs(rng, n_u, h)
    n = n_u * n_f
    a = 0.3 * rng.standard_normal((n_x, n_x))
    e = a @ a.T + 0.1 * np.eye(n_x)
    if n == 0:
        cov = e
        m_u = np.zeros(0)
    else:
        k = gram(z, h, jitter)
        r = np.diag(rng.uniform(0.05, 1.0, n))
        g = np.linalg.solve(k + r, k)
        s = k - k @ g
        s = 0.5 * (s + s.T)
        targets = safe_cholesky(k + r) @ rng.standard_normal(n)
        m_u = g.T @ targets
        c = 0.3 * rng.standard_normal((n_x, n))
        cov = np.block([[c @ s @ c.T + e, c @ s], [s @ c.T, s]])
    mean = np.concatenate([rng.standard_normal(n_x), m_u])
    return AugmentedBelief(n_x, n_f, z, mean, safe_cholesky(cov, jitter), h)


def random_model(rng: np.random.Generator, n_x: int, n_f: int, n_y: Optional[int] = None,
                 process_noise: float = 1e-3, measurement_noise: float = 0.05) -> ModelSpec:
    """x' = A x + B f(z) with z = x + c, y = C x; A is a scaled rotation so the state stays bounded.

    The control c shifts the GP input, which lets callers steer where the function is queried.
    """
    n_y = n_y or n_x
    q, _ = np.linalg.qr(rng.standard_normal((n_x, n_x)))
    A = 0.9 * q
    B = 0.5 * rng.standard_normal((n_x, n_f))
    C = rng.standard_normal((n_y, n_x))

    def gp_input(x, control):
        return x if control is None else x + np.asarray(control, dtype=float).reshape(n_x)

    return ModelSpec(
        n_x=n_x,
        n_y=n_y,
        n_f=n_f,
        n_in=n_x,
        transition=lambda x, f, control: A @ x + B @ f,
        measurement=lambda x: C @ x,
        gp_input=gp_input,
        process_noise=process_noise * np.eye(n_x),
        measurement_noise=measurement_noise * np.eye(n_y),
        transition_jac_x=lambda x, f, control: A,
        transition_jac_f=lambda x, f, control: B,
        measurement_jac=lambda x: C,
        gp_input_jac=lambda x, control: np.eye(n_x),
        name="random",
    )


def simulate_model(model: ModelSpec, rng: np.random.Generator, steps: int, controls: Optional[Sequence] = None,
                   f_true: Optional[Callable[[np.ndarray], np.ndarray]] = None) -> Tuple[np.ndarray, np.ndarray]:
    """States x_1..x_steps and measurements y_1..y_steps; step k uses controls[k] from x_{k}."""
    if f_true is None:
        def f_true(z):
            return np.sin(np.sum(z) + np.arange(model.n_f))
    controls = [None] * steps if controls is None else list(controls)
    x = np.zeros(model.n_x)
    states = np.empty((steps, model.n_x))
    measurements = np.empty((steps, model.n_y))
    for k in range(steps):
        f = f_true(model.input_of(x, controls[k]))
        x = model.step_mean(x, f, controls[k]) + rng.multivariate_normal(np.zeros(model.n_x), model.process_noise)
        states[k] = x
        measurements[k] = model.observe(x) + rng.multivariate_normal(np.zeros(model.n_y), model.measurement_noise)
    return states, measurements
