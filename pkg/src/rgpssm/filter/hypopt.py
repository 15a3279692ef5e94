# SPDX-License-Identifier: Apache-2.0
"""Online hyperparameter learning on the recovered likelihood of the inducing values.

With K_old, K_new the inducing Gram matrices under the current and candidate hyperparameters,
all algebra goes through E = K_new⁻¹ - K_old⁻¹, which is zero at θ_new = θ_old.

1. AdamState / adam_step: bias-corrected Adam on log-hyperparameters.
2. hyper_loss / hyper_loss_grad: loss of θ_new and its analytic gradient.
3. apply_hyperparams: move the posterior to the new prior.
4. HyperOptimizer: one clipped Adam iteration per filter step.
"""

import logging
from dataclasses import dataclass
from dataclasses import replace
from typing import NamedTuple
from typing import Optional
from typing import Tuple

import numpy as np
from scipy.linalg import cho_factor
from scipy.linalg import cho_solve
from scipy.linalg import lu_factor
from scipy.linalg import lu_solve

from rgpssm.filter.belief import AugmentedBelief
from rgpssm.filter.belief import safe_cholesky
from rgpssm.filter.kernel import Hyperparameters
from rgpssm.filter.kernel import gram
from rgpssm.filter.kernel import gram_grad
from rgpssm.utils.configuration import HyperOptConfig
from rgpssm.utils.errors import DimensionError
from rgpssm.utils.errors import FactorizationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AdamState:
    first_moment: np.ndarray
    second_moment: np.ndarray
    count: int = 0
    learning_rate: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def create(cls, n_params: int, config: Optional[HyperOptConfig] = None) -> "AdamState":
        config = config or HyperOptConfig()
        return cls(
            first_moment=np.zeros(n_params),
            second_moment=np.zeros(n_params),
            learning_rate=config.learning_rate,
            beta1=config.beta1,
            beta2=config.beta2,
            eps=config.eps,
        )


def adam_step(state: AdamState, grad) -> Tuple[AdamState, np.ndarray]:
    """Return the advanced state and the parameter increment (already negated)."""
    grad = np.asarray(grad, dtype=float)
    if grad.shape != state.first_moment.shape:
        raise DimensionError(f"gradient of shape {grad.shape} for {state.first_moment.size} parameters")
    count = state.count + 1
    m = state.beta1 * state.first_moment + (1.0 - state.beta1) * grad
    v = state.beta2 * state.second_moment + (1.0 - state.beta2) * grad**2
    m_hat = m / (1.0 - state.beta1**count)
    v_hat = v / (1.0 - state.beta2**count)
    update = -state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)
    return replace(state, first_moment=m, second_moment=v, count=count), update


class LossTerms(NamedTuple):
    k_new: np.ndarray
    k_new_inv: np.ndarray
    k_old_inv: np.ndarray
    e: np.ndarray
    a: np.ndarray
    b: np.ndarray
    m_u: np.ndarray
    s_uu: np.ndarray


def _inverse(matrix: np.ndarray, what: str) -> np.ndarray:
    try:
        factor = cho_factor(matrix, lower=True)
    except np.linalg.LinAlgError as e:
        raise FactorizationError(f"{what} inducing Gram matrix is not positive definite") from e
    return cho_solve(factor, np.eye(matrix.shape[0]))


def _terms(b: AugmentedBelief, theta_new, jitter: float, k_old_inv: Optional[np.ndarray] = None) -> LossTerms:
    h_new = Hyperparameters.from_vector(theta_new, b.n_in)
    if h_new.n_f != b.n_f:
        raise DimensionError(f"expected {b.n_in + b.n_f} hyperparameters, got {np.size(theta_new)}")
    if k_old_inv is None:
        k_old_inv = _inverse(gram(b.inducing_inputs, b.hyperparameters, jitter), "current")
    k_new = gram(b.inducing_inputs, h_new, jitter)
    if np.array_equal(h_new.as_vector(), b.hyperparameters.as_vector()):
        k_new_inv = k_old_inv
    else:
        k_new_inv = _inverse(k_new, "candidate")
    e = k_new_inv - k_old_inv
    lower_u = b.chol[b.n_x:]
    s_uu = lower_u @ lower_u.T
    eye = np.eye(k_new.shape[0])
    return LossTerms(
        k_new=k_new,
        k_new_inv=k_new_inv,
        k_old_inv=k_old_inv,
        e=e,
        a=e @ s_uu + eye,
        b=k_new + (eye - k_new @ k_old_inv) @ s_uu,
        m_u=b.mean[b.n_x:],
        s_uu=s_uu,
    )


def hyper_loss(b: AugmentedBelief, theta_new, jitter: float = 1e-10,
               terms: Optional[LossTerms] = None) -> Tuple[float, Optional[LossTerms]]:
    """Recovered-likelihood loss L1 + L2 of the candidate log-hyperparameters.

    L1 = m_uᵀ (E S_uu + I)⁻¹ E m_u and L2 = log|det(K_new + (I - K_new K_old⁻¹) S_uu)|.
    Precomputed `terms` for the same θ_new are reused.
    """
    if b.n_u == 0:
        return 0.0, None
    if terms is None:
        terms = _terms(b, theta_new, jitter)
    l1 = float(terms.m_u @ np.linalg.solve(terms.a, terms.e @ terms.m_u))
    lu, _ = lu_factor(terms.b)
    l2 = float(np.sum(np.log(np.abs(np.diag(lu)))))
    return l1 + l2, terms


def hyper_loss_grad(b: AugmentedBelief, theta_new, jitter: float = 1e-10,
                    terms: Optional[LossTerms] = None) -> np.ndarray:
    """Gradient of `hyper_loss` with respect to the log-hyperparameters θ_new."""
    theta_new = np.asarray(theta_new, dtype=float)
    if b.n_u == 0:
        return np.zeros(theta_new.size)
    if terms is None:
        terms = _terms(b, theta_new, jitter)
    h_new = Hyperparameters.from_vector(theta_new, b.n_in)
    w = np.linalg.solve(terms.a.T, terms.m_u)
    p = terms.k_new_inv @ w
    # dB = dK (I - K_old⁻¹ S), so d log|det B| = tr((I - K_old⁻¹ S) B⁻¹ dK)
    lu_piv = lu_factor(terms.b)
    eye = np.eye(terms.b.shape[0])
    g = (eye - terms.k_old_inv @ terms.s_uu) @ lu_solve(lu_piv, eye)
    grad = np.empty(h_new.n_params)
    for j in range(h_new.n_params):
        dk = gram_grad(b.inducing_inputs, h_new, j, jitter)
        grad[j] = -p @ dk @ p + np.sum(g.T * dk)
    return grad


def apply_hyperparams(b: AugmentedBelief, theta_new, jitter: float = 1e-10, max_tries: int = 6,
                      k_old_inv: Optional[np.ndarray] = None) -> AugmentedBelief:
    """Posterior under θ_new: q_new ∝ q_old · p(u; θ_new) / p(u; θ_old)."""
    theta_new = np.asarray(theta_new, dtype=float)
    h_new = Hyperparameters.from_vector(theta_new, b.n_in)
    if b.n_u == 0 or np.array_equal(theta_new, b.hyperparameters.as_vector()):
        return b.replace(hyperparameters=h_new)
    terms = _terms(b, theta_new, jitter, k_old_inv)
    cov = b.covariance
    cross = cov[:, b.n_x:]
    gain = cross @ np.linalg.solve(terms.a, terms.e)
    mean = b.mean - gain @ terms.m_u
    cov = cov - gain @ cross.T
    chol = safe_cholesky(0.5 * (cov + cov.T), jitter, max_tries)
    return b.replace(mean=mean, chol=chol, hyperparameters=h_new)


class HyperOptimizer:
    """Adam on the recovered-likelihood loss, one iteration per filter step."""

    def __init__(self, config: HyperOptConfig, n_params: int, jitter: float = 1e-10, max_tries: int = 6):
        self.config = config
        self.jitter = jitter
        self.max_tries = max_tries
        self.state = AdamState.create(n_params, config)

    def step(self, b: AugmentedBelief) -> Tuple[AugmentedBelief, Optional[float]]:
        """Return the adjusted belief and the loss at the current hyperparameters (None if skipped)."""
        if not self.config.enabled or b.n_u < self.config.min_inducing:
            return b, None
        theta = b.hyperparameters.as_vector()
        terms = _terms(b, theta, self.jitter)
        loss, _ = hyper_loss(b, theta, self.jitter, terms)
        grad = hyper_loss_grad(b, theta, self.jitter, terms)
        if not np.all(np.isfinite(grad)):
            logger.warning("Non-finite hyperparameter gradient with %d inducing points, step skipped", b.n_u)
            return b, loss
        self.state, delta = adam_step(self.state, grad)
        if self.config.max_log_step > 0:
            delta = np.clip(delta, -self.config.max_log_step, self.config.max_log_step)
        logger.debug("Hyperparameter step %s (loss %.6g)", delta, loss)
        return apply_hyperparams(b, theta + delta, self.jitter, self.max_tries, terms.k_old_inv), loss
