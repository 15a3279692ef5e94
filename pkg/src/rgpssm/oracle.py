# SPDX-License-Identifier: Apache-2.0
"""Dense reference implementations used by the tests and by `rgpssm verify`.

Nothing here factorizes a covariance incrementally: every quantity is formed explicitly and
inverted with numpy, so these routines check the square-root filter rather than share its code
paths. They are O(n³) and meant for small problems.

1. DenseBelief / dense_step: the filter recursion on full covariance matrices.
2. gaussian_kl / kl_discard_loss: exact divergences for the discard ranking.
3. exact_gpr / offline_gpr_fit: batch GP regression and its marginal-likelihood fit.
4. natural_parameter_update / delta_k_loss: hyperparameter-change references.
5. DenseEKF: a plain extended Kalman filter.
6. fd_gradient: central differences.
"""

import logging
from dataclasses import dataclass
from dataclasses import replace
from typing import Any
from typing import Callable
from typing import Optional
from typing import Tuple

import numpy as np

from rgpssm.filter.belief import AugmentedBelief
from rgpssm.filter.hypopt import AdamState
from rgpssm.filter.hypopt import adam_step
from rgpssm.filter.kernel import Hyperparameters
from rgpssm.models.base import ModelSpec
from rgpssm.utils.configuration import FilterConfig
from rgpssm.utils.configuration import HyperOptConfig
from rgpssm.utils.errors import FactorizationError
from rgpssm.utils.errors import JacobianError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DenseBelief:
    n_x: int
    n_f: int
    inducing_inputs: np.ndarray
    mean: np.ndarray
    cov: np.ndarray
    hyperparameters: Hyperparameters

    @classmethod
    def from_belief(cls, b: AugmentedBelief) -> "DenseBelief":
        return cls(b.n_x, b.n_f, b.inducing_inputs.copy(), b.mean.copy(), b.chol @ b.chol.T, b.hyperparameters)

    @property
    def n_u(self) -> int:
        return self.inducing_inputs.shape[0]


def _se(a: np.ndarray, b: np.ndarray, length_scales: np.ndarray) -> np.ndarray:
    d = (a[:, None, :] - b[None, :, :]) / length_scales
    return np.exp(-0.5 * np.sum(d**2, axis=-1))


def _prior(h: Hyperparameters, a, b, jitter: float = 0.0) -> np.ndarray:
    a = np.asarray(a, dtype=float).reshape(-1, h.n_in)
    b = np.asarray(b, dtype=float).reshape(-1, h.n_in)
    base = _se(a, b, h.length_scales)
    if jitter:
        base = base + jitter * np.eye(base.shape[0])
    return np.kron(base, np.diag(h.signal_variances))


def _noise(model: ModelSpec, h: Hyperparameters, jitter: float) -> np.ndarray:
    return model.process_noise + jitter * np.max(h.signal_variances) * np.eye(model.n_x)


def dense_predict(db: DenseBelief, control: Any, model: ModelSpec, config: FilterConfig) -> Tuple[DenseBelief, float, bool]:
    """Prediction on the full covariance; returns the belief, the novelty and whether a point was added."""
    h, jitter, n_x, n_f = db.hyperparameters, config.jitter, db.n_x, db.n_f
    mu = db.mean[:n_x]
    z = model.input_of(mu, control)
    if db.n_u:
        k_inv = np.linalg.inv(_se(db.inducing_inputs, db.inducing_inputs, h.length_scales) + jitter * np.eye(db.n_u))
        k0 = _se(z[None, :], db.inducing_inputs, h.length_scales)
        gamma0 = float(np.clip(1.0 - (k0 @ k_inv @ k0.T)[0, 0], 0.0, 1.0))
        k_tu = np.kron(k0 @ k_inv, np.eye(n_f))
        m_u = db.mean[n_x:]
        m_f = k_tu @ m_u
        alpha = k_inv @ m_u.reshape(db.n_u, n_f)
        grad = np.zeros((n_f, h.n_in))
        for i in range(db.n_u):
            grad += np.outer(alpha[i], k0[0, i] * (db.inducing_inputs[i] - z) / h.length_scales**2)
    else:
        gamma0 = 1.0
        k_tu = np.zeros((n_f, 0))
        m_f = np.zeros(n_f)
        grad = np.zeros((n_f, h.n_in))
    F_t = model.step_mean(mu, m_f, control)
    A_f = model.jac_f(mu, m_f, control)
    A_x = model.jac_x(mu, m_f, control) + A_f @ grad @ model.jac_h(mu, control)
    sigma_f = _noise(model, h, jitter)
    k_tt = np.diag(h.signal_variances)
    dim = db.mean.size
    add = config.adds_points and gamma0 > config.novelty_threshold
    if add:
        k_uu = _prior(h, db.inducing_inputs, db.inducing_inputs, jitter)
        s_uu = db.cov[n_x:, n_x:]
        cross = db.cov[:, n_x:] @ k_tu.T
        s_tt = k_tt + k_tu @ (s_uu - k_uu) @ k_tu.T
        cov = np.block([[db.cov, cross], [cross.T, s_tt]])
        phi = np.eye(dim + n_f)
        phi[:n_x, :n_x] = A_x
        phi[:n_x, dim:] = A_f
        noise = np.zeros_like(cov)
        noise[:n_x, :n_x] = sigma_f
        mean = np.concatenate([F_t, db.mean[n_x:], m_f])
        z_set = np.vstack([db.inducing_inputs, z[None, :]])
    else:
        phi = np.eye(dim)
        phi[:n_x, :n_x] = A_x
        phi[:n_x, n_x:] = A_f @ k_tu
        noise = np.zeros((dim, dim))
        noise[:n_x, :n_x] = A_f @ (gamma0 * k_tt) @ A_f.T + sigma_f
        cov = db.cov
        mean = np.concatenate([F_t, db.mean[n_x:]])
        z_set = db.inducing_inputs
    cov = phi @ cov @ phi.T + noise
    return replace(db, inducing_inputs=z_set, mean=mean, cov=0.5 * (cov + cov.T)), gamma0, add


def dense_discard(db: DenseBelief, d: int) -> DenseBelief:
    rows = np.arange(db.n_x + d * db.n_f, db.n_x + (d + 1) * db.n_f)
    keep = np.setdiff1d(np.arange(db.mean.size), rows)
    return replace(
        db,
        inducing_inputs=np.delete(db.inducing_inputs, d, axis=0),
        mean=db.mean[keep],
        cov=db.cov[np.ix_(keep, keep)],
    )


def dense_scores(db: DenseBelief, jitter: float = 1e-10) -> np.ndarray:
    """Discard scores from explicitly inverted K_uu and Σ."""
    h, n_x, n_f = db.hyperparameters, db.n_x, db.n_f
    q = np.linalg.inv(_prior(h, db.inducing_inputs, db.inducing_inputs, jitter))
    omega = np.linalg.inv(db.cov)
    m_u = db.mean[n_x:]
    s_uu = db.cov[n_x:, n_x:]
    scores = np.empty(db.n_u)
    for d in range(db.n_u):
        rows = np.arange(d * n_f, (d + 1) * n_f)
        q_dd_inv = np.linalg.inv(q[np.ix_(rows, rows)])
        q_du = q[rows]
        v = q_du @ m_u
        scores[d] = (
            v @ q_dd_inv @ v
            + np.trace(q_du @ s_uu @ q_du.T @ q_dd_inv)
            + np.linalg.slogdet(omega[np.ix_(rows + n_x, rows + n_x)])[1]
            - np.linalg.slogdet(q[np.ix_(rows, rows)])[1]
        )
    return scores


def dense_correct(db: DenseBelief, y, model: ModelSpec) -> DenseBelief:
    n_x = db.n_x
    mu = db.mean[:n_x]
    C = model.jac_g(mu)
    H = np.hstack([C, np.zeros((model.n_y, db.mean.size - n_x))])
    psi = H @ db.cov @ H.T + model.measurement_noise
    gain = db.cov @ H.T @ np.linalg.inv(psi)
    mean = db.mean + gain @ (np.atleast_1d(y) - model.observe(mu))
    cov = db.cov - gain @ H @ db.cov
    return replace(db, mean=mean, cov=0.5 * (cov + cov.T))


def dense_step(db: DenseBelief, control: Any, y, model: ModelSpec, config: FilterConfig,
               theta_new: Optional[np.ndarray] = None) -> DenseBelief:
    """The filter recursion on dense matrices.

    `theta_new`, when given, is applied after the correction through `natural_parameter_update`.
    """
    db, _, _ = dense_predict(db, control, model, config)
    while db.n_u > config.budget:
        db = dense_discard(db, int(np.argmin(dense_scores(db, config.jitter))))
    if y is not None:
        db = dense_correct(db, y, model)
    if theta_new is not None:
        db = natural_parameter_update(db, theta_new, config.jitter)
    return db


def gaussian_kl(mean_p, cov_p, mean_q, cov_q) -> float:
    """KL(p || q) between two Gaussians."""
    mean_p, mean_q = np.atleast_1d(mean_p), np.atleast_1d(mean_q)
    cov_p, cov_q = np.atleast_2d(cov_p), np.atleast_2d(cov_q)
    sign_p, logdet_p = np.linalg.slogdet(cov_p)
    sign_q, logdet_q = np.linalg.slogdet(cov_q)
    if sign_p <= 0 or sign_q <= 0:
        raise FactorizationError("KL divergence needs positive definite covariances")
    q_inv = np.linalg.inv(cov_q)
    diff = mean_q - mean_p
    return float(0.5 * (np.trace(q_inv @ cov_p) + diff @ q_inv @ diff - mean_p.size + logdet_q - logdet_p))


def kl_discard_loss(db: DenseBelief, d: int, jitter: float = 1e-10) -> float:
    """Inclusive KL from the current belief to the one that forgets u_d and re-predicts it from the prior."""
    h, n_x, n_f = db.hyperparameters, db.n_x, db.n_f
    rows = np.arange(n_x + d * n_f, n_x + (d + 1) * n_f)
    keep = np.setdiff1d(np.arange(db.mean.size), rows)
    k_uu = _prior(h, db.inducing_inputs, db.inducing_inputs, jitter)
    local = rows - n_x
    others = np.setdiff1d(np.arange(k_uu.shape[0]), local)
    k_oo = k_uu[np.ix_(others, others)]
    proj = k_uu[np.ix_(local, others)] @ np.linalg.inv(k_oo) if others.size else np.zeros((n_f, 0))
    # p(u_d | u_rest) written as a linear map of the kept coordinates
    select = np.zeros((n_f, keep.size))
    select[:, n_x:] = proj
    resid = k_uu[np.ix_(local, local)] - proj @ k_uu[np.ix_(others, local)]
    kept_cov = db.cov[np.ix_(keep, keep)]
    mean = np.empty_like(db.mean)
    cov = np.empty_like(db.cov)
    mean[keep] = db.mean[keep]
    mean[rows] = select @ db.mean[keep]
    cov[np.ix_(keep, keep)] = kept_cov
    cov[np.ix_(rows, keep)] = select @ kept_cov
    cov[np.ix_(keep, rows)] = kept_cov @ select.T
    cov[np.ix_(rows, rows)] = select @ kept_cov @ select.T + resid
    return gaussian_kl(db.mean, db.cov, mean, cov)


def exact_gpr(inputs, targets, noise_cov, h: Hyperparameters, queries, jitter: float = 0.0) -> Tuple[np.ndarray, np.ndarray]:
    """Batch GP regression posterior mean and covariance at `queries`.

    Targets are n × n_f; `noise_cov` is a scalar or an n_f × n_f matrix shared by all samples.
    Outputs are laid out input-major.
    """
    inputs = np.asarray(inputs, dtype=float).reshape(-1, h.n_in)
    targets = np.asarray(targets, dtype=float).reshape(inputs.shape[0], h.n_f)
    noise = np.atleast_2d(noise_cov) * np.eye(h.n_f) if np.ndim(noise_cov) == 0 else np.asarray(noise_cov, dtype=float)
    k_xx = _prior(h, inputs, inputs, jitter) + np.kron(np.eye(inputs.shape[0]), noise)
    k_qx = _prior(h, queries, inputs)
    k_qq = _prior(h, queries, queries, jitter)
    try:
        weights = np.linalg.solve(k_xx, np.column_stack([targets.ravel(), k_qx.T]))
    except np.linalg.LinAlgError as e:
        raise FactorizationError("GP regression system is singular") from e
    mean = k_qx @ weights[:, 0]
    cov = k_qq - k_qx @ weights[:, 1:]
    return mean, 0.5 * (cov + cov.T)


def fd_gradient(fn: Callable[[np.ndarray], float], point, step: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of a scalar function."""
    point = np.atleast_1d(np.asarray(point, dtype=float))
    grad = np.empty(point.size)
    for i in range(point.size):
        up, down = point.copy(), point.copy()
        up[i] += step
        down[i] -= step
        f_up, f_down = fn(up), fn(down)
        if not (np.isfinite(f_up) and np.isfinite(f_down)):
            raise JacobianError(f"non-finite evaluation at coordinate {i}")
        grad[i] = (f_up - f_down) / (up[i] - down[i])
    return grad


def _gpr_nll(theta: np.ndarray, inputs: np.ndarray, targets: np.ndarray, n_in: int) -> Tuple[float, np.ndarray]:
    """Negative log marginal likelihood over [θ, log noise] and its gradient."""
    h = Hyperparameters.from_vector(theta[:-1], n_in)
    n = inputs.shape[0]
    base = _se(inputs, inputs, h.length_scales)
    scale = np.diag(h.signal_variances)
    noise = np.exp(theta[-1])
    k = np.kron(base, scale) + (noise + 1e-8) * np.eye(n * h.n_f)
    chol = np.linalg.cholesky(k)
    alpha = np.linalg.solve(chol.T, np.linalg.solve(chol, targets))
    k_inv = np.linalg.inv(k)
    nll = 0.5 * targets @ alpha + np.sum(np.log(np.diag(chol))) + 0.5 * targets.size * np.log(2 * np.pi)
    outer = np.outer(alpha, alpha) - k_inv
    grad = np.empty(theta.size)
    for j in range(n_in):
        d = inputs[:, j][:, None] - inputs[:, j][None, :]
        grad[j] = -0.5 * np.sum(outer * np.kron(base * d**2 / h.length_scales[j] ** 2, scale))
    for k_out in range(h.n_f):
        dscale = np.zeros(h.n_f)
        dscale[k_out] = h.signal_variances[k_out]
        grad[n_in + k_out] = -0.5 * np.sum(outer * np.kron(base, np.diag(dscale)))
    grad[-1] = -0.5 * noise * np.trace(outer)
    return float(nll), grad


def offline_gpr_fit(inputs, targets, h0: Hyperparameters, noise_variance: float = 0.01, iterations: int = 2000,
                    learning_rate: float = 0.01) -> Hyperparameters:
    """Maximum marginal likelihood hyperparameters by Adam over log-parameters; the noise is learned too."""
    inputs = np.asarray(inputs, dtype=float).reshape(-1, h0.n_in)
    targets = np.asarray(targets, dtype=float).ravel()
    if inputs.shape[0] < 10:
        raise ValueError(f"offline GP fit needs at least 10 samples, got {inputs.shape[0]}")
    theta = np.append(h0.as_vector(), np.log(noise_variance))
    state = AdamState.create(theta.size, HyperOptConfig(learning_rate=learning_rate))
    nll = np.nan
    for _ in range(iterations):
        nll, grad = _gpr_nll(theta, inputs, targets, h0.n_in)
        state, delta = adam_step(state, grad)
        theta = theta + delta
    logger.info("Offline GP fit: nll %.4f, noise variance %.3e", nll, np.exp(theta[-1]))
    return Hyperparameters.from_vector(theta[:-1], h0.n_in)


def _inducing_gram_inverse(db: DenseBelief, h: Hyperparameters, jitter: float) -> np.ndarray:
    return np.linalg.inv(_prior(h, db.inducing_inputs, db.inducing_inputs, jitter))


def natural_parameter_update(db: DenseBelief, theta_new, jitter: float = 1e-10) -> DenseBelief:
    """q_new ∝ q_old p(u; θ_new) / p(u; θ_old) by adding K_new⁻¹ - K_old⁻¹ to the u-block precision."""
    h_new = Hyperparameters.from_vector(theta_new, db.hyperparameters.n_in)
    if db.n_u == 0:
        return replace(db, hyperparameters=h_new)
    e = _inducing_gram_inverse(db, h_new, jitter) - _inducing_gram_inverse(db, db.hyperparameters, jitter)
    precision = np.linalg.inv(db.cov)
    shift = precision @ db.mean
    precision[db.n_x:, db.n_x:] += e
    cov = np.linalg.inv(precision)
    return replace(db, mean=cov @ shift, cov=0.5 * (cov + cov.T), hyperparameters=h_new)


def delta_k_loss(db: DenseBelief, theta_new, jitter: float = 1e-10) -> float:
    """Recovered-likelihood loss in its ΔK = (K_new⁻¹ - K_old⁻¹)⁻¹ form; needs ΔK invertible."""
    h_new = Hyperparameters.from_vector(theta_new, db.hyperparameters.n_in)
    k_new = _prior(h_new, db.inducing_inputs, db.inducing_inputs, jitter)
    delta_k = np.linalg.inv(np.linalg.inv(k_new) - _inducing_gram_inverse(db, db.hyperparameters, jitter))
    m_u = db.mean[db.n_x:]
    s_uu = db.cov[db.n_x:, db.n_x:]
    l1 = m_u @ np.linalg.solve(s_uu + delta_k, m_u)
    l2 = (np.linalg.slogdet(delta_k + s_uu)[1] - np.linalg.slogdet(delta_k)[1] + np.linalg.slogdet(k_new)[1])
    return float(l1 + l2)


class DenseEKF:
    """Extended Kalman filter on the state alone, for models whose transition ignores f."""

    def __init__(self, mean, cov):
        self.mean = np.atleast_1d(np.asarray(mean, dtype=float)).copy()
        self.cov = np.atleast_2d(np.asarray(cov, dtype=float)).copy()

    def predict(self, model: ModelSpec, control: Any = None, process_noise: Optional[np.ndarray] = None):
        f = np.zeros(model.n_f)
        jac = model.jac_x(self.mean, f, control)
        self.mean = model.step_mean(self.mean, f, control)
        noise = model.process_noise if process_noise is None else process_noise
        self.cov = jac @ self.cov @ jac.T + noise

    def update(self, model: ModelSpec, y):
        C = model.jac_g(self.mean)
        psi = C @ self.cov @ C.T + model.measurement_noise
        gain = self.cov @ C.T @ np.linalg.inv(psi)
        self.mean = self.mean + gain @ (np.atleast_1d(y) - model.observe(self.mean))
        self.cov = self.cov - gain @ C @ self.cov
        self.cov = 0.5 * (self.cov + self.cov.T)
