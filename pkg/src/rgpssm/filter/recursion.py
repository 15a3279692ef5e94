# SPDX-License-Identifier: Apache-2.0
"""The RGPSSM recursion on a square-root augmented belief.

One step: linearize at the current state mean, gate on the novelty of the GP input, predict
with or without adding it as an inducing point, enforce the budget by discarding the
lowest-scoring block, correct with the measurement if there is one, then take one
hyperparameter step.

1. gp_posterior / novelty: GP posterior at query inputs and the novelty gate value.
2. linearize: linearization point with the total state Jacobian.
3. predict_add / predict_noadd / correct: moment updates.
4. score_all / discard: budget maintenance.
5. step / forecast / predict_measurement: public recursion API.
6. FilterSession: a belief with its optimizer state and step history.
"""

import logging
import time
from dataclasses import dataclass
from typing import Any
from typing import List
from typing import Optional
from typing import Sequence
from typing import Tuple

import numpy as np
from pydantic import BaseModel
from pydantic import Field
from scipy.linalg import LinAlgError
from scipy.linalg import cho_factor
from scipy.linalg import cho_solve
from scipy.linalg import cholesky
from scipy.linalg import solve_triangular

from rgpssm.filter.belief import AugmentedBelief
from rgpssm.filter.belief import chol_append
from rgpssm.filter.belief import chol_drop
from rgpssm.filter.belief import chol_rank_update
from rgpssm.filter.belief import psd_factor
from rgpssm.filter.belief import qr_propagate
from rgpssm.filter.belief import safe_cholesky
from rgpssm.filter.hypopt import HyperOptimizer
from rgpssm.filter.kernel import Hyperparameters
from rgpssm.filter.kernel import base_matrix
from rgpssm.filter.kernel import jittered_base
from rgpssm.filter.kernel import k_input_grad
from rgpssm.models.base import ModelSpec
from rgpssm.utils.configuration import FilterConfig
from rgpssm.utils.errors import DowndateError
from rgpssm.utils.errors import FactorizationError
from rgpssm.utils.errors import InnovationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LinearizationPoint:
    z_t: np.ndarray
    F_t: np.ndarray
    A_x: np.ndarray
    A_f: np.ndarray
    m_ft: np.ndarray
    # projection K_tu K_uu⁻¹ (n_f × n_f·n_u), posterior covariance at z_t and base novelty
    k_tu: np.ndarray
    s_ft: np.ndarray
    gamma0: float


@dataclass(frozen=True)
class DiscardScore:
    index: int
    delta1: float
    delta2: float
    delta3: float

    @property
    def total(self) -> float:
        return self.delta1 + self.delta2 + self.delta3


class StepReport(BaseModel):
    """Record of one filter step, written as one JSON line."""

    step: int = Field(default=0, description="Step index", ge=0)
    gamma0: float = Field(description="Novelty of the GP input on the base-kernel scale")
    added: Optional[int] = Field(default=None, description="Block index of the added inducing point")
    discarded: List[int] = Field(default_factory=list, description="Indices discarded, in order")
    innovation: Optional[List[float]] = Field(default=None, description="Measurement residual y - g(mu)")
    loss: Optional[float] = Field(default=None, description="Hyperparameter loss at the current values")
    n_u: int = Field(description="Inducing points held after the step", ge=0)
    log_hyperparameters: List[float] = Field(description="Log length scales then log signal variances")
    state_mean: List[float] = Field(description="Posterior state mean")
    state_var: List[float] = Field(description="Diagonal of the posterior state covariance")
    gp_mean: List[float] = Field(default_factory=list, description="GP posterior mean at the linearization input")
    gp_var: List[float] = Field(default_factory=list, description="GP posterior variance at the linearization input")
    elapsed_ms: Optional[float] = Field(default=None, description="Wall-clock time of the step")


def _projection(b: AugmentedBelief, queries: np.ndarray, jitter: float) -> np.ndarray:
    """Base-kernel projection K0(Q, Z) (K0(Z, Z) + jitter I)⁻¹."""
    k_qu = base_matrix(queries, b.inducing_inputs, b.hyperparameters)
    factor = cho_factor(jittered_base(b.inducing_inputs, b.hyperparameters, jitter), lower=True)
    return cho_solve(factor, k_qu.T).T


def gp_posterior(b: AugmentedBelief, queries, jitter: float = 1e-10) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Mean, covariance and state cross-covariance of f at the query inputs.

    Outputs are laid out input-major like the inducing block (n_f values per query).
    """
    h = b.hyperparameters
    queries = np.asarray(queries, dtype=float).reshape(-1, h.n_in)
    out_scale = np.diag(h.signal_variances)
    k_ff = np.kron(base_matrix(queries, queries, h), out_scale)
    n_q = queries.shape[0] * b.n_f
    if b.n_u == 0:
        return np.zeros(n_q), k_ff, np.zeros((b.n_x, n_q))
    k_fu = np.kron(_projection(b, queries, jitter), np.eye(b.n_f))
    cov = b.covariance
    k_uu = np.kron(jittered_base(b.inducing_inputs, h, jitter), out_scale)
    mean = k_fu @ b.mean[b.n_x:]
    s_ff = k_ff + k_fu @ (cov[b.n_x:, b.n_x:] - k_uu) @ k_fu.T
    return mean, 0.5 * (s_ff + s_ff.T), cov[:b.n_x, b.n_x:] @ k_fu.T


def novelty(b: AugmentedBelief, z_t, jitter: float = 1e-10) -> float:
    """Prior conditional variance of f(z_t) given the inducing inputs, base-kernel scale."""
    if b.n_u == 0:
        return 1.0
    z_t = np.asarray(z_t, dtype=float).reshape(1, b.n_in)
    k_tu = base_matrix(z_t, b.inducing_inputs, b.hyperparameters)[0]
    projection = _projection(b, z_t, jitter)[0]
    return float(np.clip(1.0 - projection @ k_tu, 0.0, 1.0))


def linearize(b: AugmentedBelief, control: Any, model: ModelSpec, jitter: float = 1e-10) -> LinearizationPoint:
    h = b.hyperparameters
    mu = b.mean[:b.n_x]
    z_t = model.input_of(mu, control)
    m_ft, s_ft, _ = gp_posterior(b, z_t, jitter)
    F_t = model.step_mean(mu, m_ft, control)
    A_f = model.jac_f(mu, m_ft, control)
    A_x = model.jac_x(mu, m_ft, control)
    if b.n_u == 0:
        k_tu = np.zeros((b.n_f, 0))
        gamma0 = 1.0
    else:
        projection = _projection(b, z_t[None, :], jitter)
        k_tu = np.kron(projection, np.eye(b.n_f))
        gamma0 = float(np.clip(1.0 - projection[0] @ base_matrix(z_t[None, :], b.inducing_inputs, h)[0], 0.0, 1.0))
        factor = cho_factor(jittered_base(b.inducing_inputs, h, jitter), lower=True)
        alpha = cho_solve(factor, b.mean[b.n_x:].reshape(b.n_u, b.n_f))
        dm_dz = alpha.T @ k_input_grad(z_t, b.inducing_inputs, h).T
        A_x = A_x + A_f @ dm_dz @ model.jac_h(mu, control)
    return LinearizationPoint(z_t, F_t, A_x, A_f, m_ft, k_tu, s_ft, gamma0)


def effective_process_noise(model: ModelSpec, h: Hyperparameters, jitter: float = 1e-10) -> np.ndarray:
    """Σ_f plus jitter·max(σ²)·I, so the propagated covariance stays nonsingular when Σ_f = 0."""
    return model.process_noise + jitter * float(np.max(h.signal_variances)) * np.eye(model.n_x)


def _propagate(b: AugmentedBelief, phi: np.ndarray, state_noise: np.ndarray, mean: np.ndarray) -> AugmentedBelief:
    d_f = np.zeros((b.dim, b.dim))
    d_f[:b.n_x, :b.n_x] = psd_factor(state_noise)
    return b.replace(mean=mean, chol=qr_propagate(b.chol, phi, d_f))


def predict_add(b: AugmentedBelief, lin: LinearizationPoint, sigma_f: np.ndarray, jitter: float = 1e-10) -> AugmentedBelief:
    """Prediction that adds f(z_t) as a new inducing block at the end of the set."""
    h = b.hyperparameters
    k_tt = np.diag(h.signal_variances)
    if b.n_u == 0:
        zeta = np.zeros((b.dim, b.n_f))
        s_tt = k_tt
    else:
        cov_u = b.chol @ b.chol[b.n_x:, :].T
        zeta = cov_u @ lin.k_tu.T
        k_uu = np.kron(jittered_base(b.inducing_inputs, h, jitter), k_tt)
        s_tt = k_tt + lin.k_tu @ (cov_u[b.n_x:] - k_uu) @ lin.k_tu.T
    augmented = chol_append(b, zeta, 0.5 * (s_tt + s_tt.T), lin.m_ft, lin.z_t)
    phi = np.eye(augmented.dim)
    phi[:b.n_x, :b.n_x] = lin.A_x
    phi[:b.n_x, b.dim:] = lin.A_f
    mean = np.concatenate([lin.F_t, augmented.mean[b.n_x:]])
    return _propagate(augmented, phi, sigma_f, mean)


def predict_noadd(b: AugmentedBelief, lin: LinearizationPoint, sigma_f: np.ndarray) -> AugmentedBelief:
    """Prediction that keeps the inducing set, folding the residual GP variance into the noise."""
    h = b.hyperparameters
    phi = np.eye(b.dim)
    phi[:b.n_x, :b.n_x] = lin.A_x
    phi[:b.n_x, b.n_x:] = lin.A_f @ lin.k_tu
    gamma = lin.gamma0 * np.diag(h.signal_variances)
    noise = lin.A_f @ gamma @ lin.A_f.T + sigma_f
    mean = np.concatenate([lin.F_t, b.mean[b.n_x:]])
    return _propagate(b, phi, noise, mean)


def _correct(b: AugmentedBelief, y, model: ModelSpec, jitter: float, max_tries: int) -> Tuple[AugmentedBelief, np.ndarray]:
    mu = b.mean[:b.n_x]
    y = np.atleast_1d(np.asarray(y, dtype=float)).reshape(model.n_y)
    C = model.jac_g(mu)
    residual = y - model.observe(mu)
    L_x = b.chol[:b.n_x]
    cross = b.chol @ (L_x.T @ C.T)
    psi = C @ (L_x @ L_x.T) @ C.T + model.measurement_noise
    try:
        rho = cholesky(0.5 * (psi + psi.T), lower=True)
    except LinAlgError as e:
        raise InnovationError("innovation covariance is not positive definite") from e
    eta = solve_triangular(rho, cross.T, lower=True).T
    mean = b.mean + eta @ solve_triangular(rho, residual, lower=True)
    try:
        chol = chol_rank_update(b.chol, eta, -1)
    except DowndateError as e:
        logger.warning("Correction downdate failed at column %d, re-factorizing the dense covariance", e.column)
        cov = b.covariance - eta @ eta.T
        chol = safe_cholesky(cov, jitter, max_tries)
    return b.replace(mean=mean, chol=chol), residual


def correct(b: AugmentedBelief, y, model: ModelSpec, jitter: float = 1e-10, max_tries: int = 6) -> AugmentedBelief:
    """Kalman correction of the joint belief with measurement `y`."""
    return _correct(b, y, model, jitter, max_tries)[0]


def score_all(b: AugmentedBelief, jitter: float = 1e-10) -> List[DiscardScore]:
    """Discard scores of every inducing block; the lowest score loses the least information."""
    if b.n_u == 0:
        return []
    h = b.hyperparameters
    sig2 = h.signal_variances
    try:
        factor = cho_factor(jittered_base(b.inducing_inputs, h, jitter), lower=True)
    except LinAlgError as e:
        raise FactorizationError("inducing Gram matrix is singular, duplicated inducing inputs") from e
    q0 = cho_solve(factor, np.eye(b.n_u))
    m = b.mean[b.n_x:].reshape(b.n_u, b.n_f)
    lower_u = b.chol[b.n_x:]
    s_uu = lower_u @ lower_u.T
    # columns n_x onward of L⁻¹ are zero above row n_x and equal the inverse of the trailing block below it
    trailing_inv = solve_triangular(lower_u[:, b.n_x:], np.eye(b.dim - b.n_x), lower=True)
    inv_scale = np.diag(1.0 / sig2)
    log_scale = float(np.sum(np.log(sig2)))
    scores = []
    for d in range(b.n_u):
        q_dd = q0[d, d]
        a = q0[d] @ m
        delta1 = float(np.sum(a**2 / sig2) / q_dd)
        q_du = np.kron(q0[d:d + 1], inv_scale)
        delta2 = float(np.sum(np.diag(q_du @ s_uu @ q_du.T) * sig2) / q_dd)
        block = b.block_slice(d)
        cols = trailing_inv[:, block.start - b.n_x:block.stop - b.n_x]
        sign, log_omega = np.linalg.slogdet(cols.T @ cols)
        if sign <= 0:
            raise FactorizationError("precision block is not positive definite", block=d)
        delta3 = float(log_omega - (b.n_f * np.log(q_dd) - log_scale))
        scores.append(DiscardScore(d, delta1, delta2, delta3))
    return scores


def discard(b: AugmentedBelief, block_index: int) -> AugmentedBelief:
    """Marginalize inducing block `block_index` out of the belief."""
    return chol_drop(b, block_index)


def step(b: AugmentedBelief, control: Any, y, model: ModelSpec, config: FilterConfig,
         optimizer: Optional[HyperOptimizer] = None, index: int = 0) -> Tuple[AugmentedBelief, StepReport]:
    """One filter iteration; `y=None` skips the correction."""
    jitter = config.jitter
    sigma_f = effective_process_noise(model, b.hyperparameters, jitter)
    lin = linearize(b, control, model, jitter)
    added = None
    if config.adds_points and lin.gamma0 > config.novelty_threshold:
        b = predict_add(b, lin, sigma_f, jitter)
        added = b.n_u - 1
    else:
        b = predict_noadd(b, lin, sigma_f)
    discarded = []
    while b.n_u > config.budget:
        scores = score_all(b, jitter)
        worst = int(np.argmin([s.total for s in scores]))
        b = discard(b, worst)
        discarded.append(worst)
    innovation = None
    if y is not None:
        b, residual = _correct(b, y, model, jitter, config.jitter_max_tries)
        innovation = residual.tolist()
    loss = None
    if optimizer is not None and config.hyperopt.enabled:
        b, loss = optimizer.step(b)
    logger.debug("step %d: gamma0=%.3e added=%s discarded=%s n_u=%d", index, lin.gamma0, added, discarded, b.n_u)
    p_diag = np.sum(b.chol[:b.n_x] ** 2, axis=1)
    return b, StepReport(
        step=index,
        gamma0=lin.gamma0,
        added=added,
        discarded=discarded,
        innovation=innovation,
        loss=loss,
        n_u=b.n_u,
        log_hyperparameters=b.hyperparameters.as_vector().tolist(),
        state_mean=b.mean[:b.n_x].tolist(),
        state_var=p_diag.tolist(),
        gp_mean=lin.m_ft.tolist(),
        gp_var=np.diag(lin.s_ft).tolist(),
    )


def predict_measurement(b: AugmentedBelief, model: ModelSpec) -> Tuple[np.ndarray, np.ndarray]:
    """Predicted measurement mean and covariance, linearized at the state mean."""
    mu = b.mean[:b.n_x]
    C = model.jac_g(mu)
    L_x = b.chol[:b.n_x]
    return model.observe(mu), C @ (L_x @ L_x.T) @ C.T + model.measurement_noise


def _controls(controls: Optional[Sequence[Any]], steps: int) -> List[Any]:
    if controls is None:
        return [None] * steps
    controls = list(controls)
    if len(controls) < steps:
        raise ValueError(f"{steps} forecast steps need as many controls, got {len(controls)}")
    return controls[:steps]


def _rollout(b: AugmentedBelief, controls, steps: int, model: ModelSpec, jitter: float):
    for control in _controls(controls, steps):
        sigma_f = effective_process_noise(model, b.hyperparameters, jitter)
        b = predict_noadd(b, linearize(b, control, model, jitter), sigma_f)
        yield b


def forecast(b: AugmentedBelief, controls: Optional[Sequence[Any]], steps: int, model: ModelSpec,
             jitter: float = 1e-10) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Free-running state predictions (mean, covariance) without corrections or set changes."""
    out = []
    for predicted in _rollout(b, controls, steps, model, jitter):
        L_x = predicted.chol[:b.n_x]
        out.append((predicted.mean[:b.n_x].copy(), L_x @ L_x.T))
    return out


def forecast_measurements(b: AugmentedBelief, controls: Optional[Sequence[Any]], steps: int, model: ModelSpec,
                          jitter: float = 1e-10) -> List[Tuple[np.ndarray, np.ndarray]]:
    """As `forecast`, mapped to measurement space."""
    return [predict_measurement(predicted, model) for predicted in _rollout(b, controls, steps, model, jitter)]


class FilterSession:
    """A belief plus the optimizer state of one online run.

    Sessions share nothing mutable, so independent runs may live in separate threads.
    """

    def __init__(self, belief: AugmentedBelief, model: ModelSpec, config: FilterConfig, metrics=None):
        self.belief = belief
        self.model = model
        self.config = config
        self.metrics = metrics
        self.history: List[StepReport] = []
        self.optimizer = None
        if config.hyperopt.enabled:
            self.optimizer = HyperOptimizer(
                config.hyperopt, belief.hyperparameters.n_params, config.jitter, config.jitter_max_tries
            )

    def step(self, control: Any = None, y=None) -> StepReport:
        start = time.perf_counter()
        self.belief, report = step(self.belief, control, y, self.model, self.config, self.optimizer, len(self.history))
        report.elapsed_ms = (time.perf_counter() - start) * 1000.0
        self.history.append(report)
        if self.metrics is not None:
            self.metrics.record(report)
        return report

    def forecast(self, controls: Optional[Sequence[Any]], steps: int) -> List[Tuple[np.ndarray, np.ndarray]]:
        return forecast(self.belief, controls, steps, self.model, self.config.jitter)

    def forecast_measurements(self, controls: Optional[Sequence[Any]], steps: int) -> List[Tuple[np.ndarray, np.ndarray]]:
        return forecast_measurements(self.belief, controls, steps, self.model, self.config.jitter)

    def predict_measurement(self) -> Tuple[np.ndarray, np.ndarray]:
        return predict_measurement(self.belief, self.model)
