# SPDX-License-Identifier: Apache-2.0
"""Square-root storage of the joint Gaussian over [x_t; u] and its Cholesky-factor primitives.

1. AugmentedBelief: mean plus lower Cholesky factor, inducing inputs and hyperparameters.
2. init_belief: belief from the initial state distribution, optionally with seeded inducing points.
3. blocks: the (μ, P, V_xu, m_u, S_uu) partition.
4. chol_append / chol_drop: add or marginalize one inducing block on the factor.
5. chol_rank_update: batched rank-k update or downdate of a Cholesky factor.
6. qr_propagate: factor of Φ L Lᵀ Φᵀ + D Dᵀ through a QR decomposition.
7. safe_cholesky / psd_factor: factorization with escalating jitter.
8. BeliefSnapshot: JSON snapshot of a belief.
"""

import dataclasses
import logging
from dataclasses import dataclass
from typing import List
from typing import NamedTuple
from typing import Optional

import numpy as np
from pydantic import BaseModel
from pydantic import Field
from scipy.linalg import LinAlgError
from scipy.linalg import cholesky
from scipy.linalg import eigh
from scipy.linalg import qr
from scipy.linalg import solve_triangular

from rgpssm.filter.kernel import Hyperparameters
from rgpssm.filter.kernel import gram
from rgpssm.utils.errors import DimensionError
from rgpssm.utils.errors import DowndateError
from rgpssm.utils.errors import FactorizationError

logger = logging.getLogger(__name__)


@dataclass
class AugmentedBelief:
    """Joint Gaussian over the state and the inducing values, Σ = L Lᵀ.

    The mean is laid out as [μ (n_x) | m_u block 0 (n_f) | m_u block 1 (n_f) | ...] with the
    blocks in the order of `inducing_inputs`.
    """

    n_x: int
    n_f: int
    inducing_inputs: np.ndarray
    mean: np.ndarray
    chol: np.ndarray
    hyperparameters: Hyperparameters

    def __post_init__(self):
        self.inducing_inputs = np.asarray(self.inducing_inputs, dtype=float).reshape(-1, self.hyperparameters.n_in)
        self.mean = np.asarray(self.mean, dtype=float).ravel()
        self.chol = np.asarray(self.chol, dtype=float)
        if self.hyperparameters.n_f != self.n_f:
            raise DimensionError(f"hyperparameters carry {self.hyperparameters.n_f} outputs, belief has n_f={self.n_f}")
        dim = self.n_x + self.n_f * self.inducing_inputs.shape[0]
        if self.mean.shape != (dim,) or self.chol.shape != (dim, dim):
            raise DimensionError(
                f"belief of dimension {dim} got mean {self.mean.shape} and factor {self.chol.shape}"
            )

    @property
    def n_u(self) -> int:
        return self.inducing_inputs.shape[0]

    @property
    def n_in(self) -> int:
        return self.hyperparameters.n_in

    @property
    def dim(self) -> int:
        return self.mean.size

    @property
    def covariance(self) -> np.ndarray:
        return self.chol @ self.chol.T

    def block_slice(self, d: int) -> slice:
        """Rows of inducing block `d` in the mean and the factor."""
        if not 0 <= d < self.n_u:
            raise IndexError(f"inducing block {d} out of range 0..{self.n_u - 1}")
        start = self.n_x + d * self.n_f
        return slice(start, start + self.n_f)

    def replace(self, **changes) -> "AugmentedBelief":
        return dataclasses.replace(self, **changes)

    def copy(self) -> "AugmentedBelief":
        return self.replace(
            inducing_inputs=self.inducing_inputs.copy(),
            mean=self.mean.copy(),
            chol=self.chol.copy(),
        )


class BeliefBlocks(NamedTuple):
    mu: np.ndarray
    p: np.ndarray
    v_xu: np.ndarray
    m_u: np.ndarray
    s_uu: np.ndarray


def safe_cholesky(matrix: np.ndarray, jitter: float = 1e-10, max_tries: int = 6) -> np.ndarray:
    """Lower Cholesky factor of the symmetrized matrix, adding tenfold-growing jitter on failure."""
    matrix = 0.5 * (np.asarray(matrix, dtype=float) + np.asarray(matrix, dtype=float).T)
    if matrix.size == 0:
        return np.zeros_like(matrix)
    try:
        return cholesky(matrix, lower=True)
    except LinAlgError:
        pass
    scale = max(float(np.max(np.abs(np.diag(matrix)))), 1.0)
    eye = np.eye(matrix.shape[0])
    for attempt in range(max_tries):
        added = jitter * scale * 10.0**attempt
        try:
            factor = cholesky(matrix + added * eye, lower=True)
        except LinAlgError:
            continue
        logger.warning("Cholesky factorization needed jitter %.3e (attempt %d)", added, attempt + 1)
        return factor
    raise FactorizationError(f"matrix of order {matrix.shape[0]} is not positive definite after {max_tries} jitter escalations")


def psd_factor(matrix: np.ndarray) -> np.ndarray:
    """A square factor D with D Dᵀ equal to a symmetric PSD matrix (zero blocks allowed)."""
    matrix = 0.5 * (np.asarray(matrix, dtype=float) + np.asarray(matrix, dtype=float).T)
    if matrix.size == 0 or not np.any(matrix):
        return np.zeros_like(matrix)
    try:
        return cholesky(matrix, lower=True)
    except LinAlgError:
        values, vectors = eigh(matrix)
        if values.min() < -1e-10 * max(values.max(), 1.0):
            raise FactorizationError("noise covariance is not positive semidefinite")
        return vectors * np.sqrt(np.clip(values, 0.0, None))


def init_belief(x0_mean, x0_cov, h: Hyperparameters, inducing_inputs=None, inducing_mean=None,
                inducing_cov=None, jitter: float = 1e-10) -> AugmentedBelief:
    """Belief over [x_0; u].

    Without `inducing_inputs` the inducing set is empty. Seeded inputs default to the GP prior
    (zero mean, covariance K_uu) and are independent of the initial state.
    """
    x0_mean = np.atleast_1d(np.asarray(x0_mean, dtype=float))
    x0_cov = np.atleast_2d(np.asarray(x0_cov, dtype=float))
    n_x = x0_mean.size
    if x0_cov.shape != (n_x, n_x):
        raise DimensionError(f"initial covariance must be {n_x}x{n_x}, got {x0_cov.shape}")
    z = np.zeros((0, h.n_in)) if inducing_inputs is None else np.asarray(inducing_inputs, dtype=float).reshape(-1, h.n_in)
    n_uf = z.shape[0] * h.n_f
    m_u = np.zeros(n_uf) if inducing_mean is None else np.asarray(inducing_mean, dtype=float).ravel()
    s_uu = gram(z, h, jitter) if inducing_cov is None else np.asarray(inducing_cov, dtype=float)
    if m_u.size != n_uf or s_uu.shape != (n_uf, n_uf):
        raise DimensionError(f"inducing moments must have order {n_uf}")
    cov = np.zeros((n_x + n_uf, n_x + n_uf))
    cov[:n_x, :n_x] = x0_cov
    cov[n_x:, n_x:] = s_uu
    try:
        chol = cholesky(0.5 * (cov + cov.T), lower=True)
    except LinAlgError as e:
        raise FactorizationError("initial covariance is not positive definite") from e
    return AugmentedBelief(n_x, h.n_f, z, np.concatenate([x0_mean, m_u]), chol, h)


def blocks(b: AugmentedBelief) -> BeliefBlocks:
    n_x = b.n_x
    cov = b.covariance
    return BeliefBlocks(
        mu=b.mean[:n_x],
        p=cov[:n_x, :n_x],
        v_xu=cov[:n_x, n_x:],
        m_u=b.mean[n_x:],
        s_uu=cov[n_x:, n_x:],
    )


def chol_append(b: AugmentedBelief, zeta: np.ndarray, s_tt: np.ndarray, new_mean: np.ndarray,
                z_new: np.ndarray) -> AugmentedBelief:
    """Append one inducing block with cross-covariance `zeta` (dim × n_f) and self-covariance `s_tt`."""
    zeta = np.asarray(zeta, dtype=float).reshape(b.dim, b.n_f)
    s_tt = np.atleast_2d(np.asarray(s_tt, dtype=float))
    alpha = solve_triangular(b.chol, zeta, lower=True).T
    schur = s_tt - alpha @ alpha.T
    try:
        beta = cholesky(0.5 * (schur + schur.T), lower=True)
    except LinAlgError as e:
        raise FactorizationError("Schur complement of the appended block is not positive definite", block=b.n_u) from e
    dim = b.dim
    chol = np.zeros((dim + b.n_f, dim + b.n_f))
    chol[:dim, :dim] = b.chol
    chol[dim:, :dim] = alpha
    chol[dim:, dim:] = beta
    return b.replace(
        inducing_inputs=np.vstack([b.inducing_inputs, np.asarray(z_new, dtype=float).reshape(1, b.n_in)]),
        mean=np.concatenate([b.mean, np.asarray(new_mean, dtype=float).ravel()]),
        chol=chol,
    )


def chol_drop(b: AugmentedBelief, d: int) -> AugmentedBelief:
    """Marginalize inducing block `d` out of the belief."""
    if not 0 <= d < b.n_u:
        raise IndexError(f"inducing block {d} out of range 0..{b.n_u - 1}")
    rows = b.block_slice(d)
    start, stop = rows.start, rows.stop
    chol = b.chol
    lower = chol_rank_update(chol[stop:, stop:], chol[stop:, start:stop], +1)
    kept = np.zeros((b.dim - b.n_f, b.dim - b.n_f))
    kept[:start, :start] = chol[:start, :start]
    kept[start:, :start] = chol[stop:, :start]
    kept[start:, start:] = lower
    return b.replace(
        inducing_inputs=np.delete(b.inducing_inputs, d, axis=0),
        mean=np.delete(b.mean, np.arange(start, stop)),
        chol=kept,
    )


def _lower_from_r(r: np.ndarray, n: int) -> np.ndarray:
    r = r[:n, :n]
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return (signs[:, None] * r).T


def _first_indefinite(inner: np.ndarray) -> int:
    for j in range(inner.shape[0]):
        try:
            cholesky(inner[:j + 1, :j + 1], lower=True)
        except LinAlgError:
            return j
    return inner.shape[0] - 1


def chol_rank_update(L: np.ndarray, V: np.ndarray, sign: int) -> np.ndarray:
    """Factor of L Lᵀ + sign · V Vᵀ for all columns of V at once; the inputs are not modified.

    An update stacks [Lᵀ; Vᵀ] into one QR decomposition. A downdate writes
    L Lᵀ - V Vᵀ = L (I - W Wᵀ) Lᵀ with W = L⁻¹ V and is valid iff I - Wᵀ W is positive
    definite; otherwise DowndateError names the first column at which it stops being so.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    L = np.array(L, dtype=float)
    V = np.asarray(V, dtype=float)
    if V.ndim == 1:
        V = V[:, None]
    if L.shape[0] != L.shape[1] or V.shape[0] != L.shape[0]:
        raise DimensionError(f"update columns of length {V.shape[0]} do not match factor of order {L.shape[0]}")
    columns = np.flatnonzero(np.any(V, axis=0))
    if columns.size == 0:
        return L
    V = V[:, columns]
    n = L.shape[0]
    if sign > 0:
        (r,) = qr(np.vstack([L.T, V.T]), mode="r")
        return _lower_from_r(r, n)
    if np.any(np.diag(L) <= 0.0):
        raise DowndateError("Cholesky downdate of a singular factor", column=int(columns[0]))
    w = solve_triangular(L, V, lower=True)
    inner = np.eye(w.shape[1]) - w.T @ w
    try:
        cholesky(inner, lower=True)
        shrink = cholesky(np.eye(n) - w @ w.T, lower=True)
    except LinAlgError:
        raise DowndateError("Cholesky downdate lost positive definiteness",
                            column=int(columns[_first_indefinite(inner)])) from None
    return L @ shrink


def qr_propagate(L: np.ndarray, phi: np.ndarray, d_f: np.ndarray) -> np.ndarray:
    """Lower factor of Φ L Lᵀ Φᵀ + D_f D_fᵀ with a nonnegative diagonal."""
    n = phi.shape[0]
    stacked = np.vstack([(phi @ L).T, np.asarray(d_f, dtype=float).T])
    (r,) = qr(stacked, mode="r")
    return _lower_from_r(r, n)


class BeliefSnapshot(BaseModel):
    """Flat JSON record of a belief; matrices are stored dense and row-major."""

    n_x: int = Field(description="State dimension", ge=1)
    n_f: int = Field(description="GP output dimension", ge=1)
    n_in: int = Field(description="GP input dimension", ge=1)
    inducing_inputs: List[float] = Field(default_factory=list, description="Z, n_u x n_in, row-major")
    mean: List[float] = Field(description="Mean of [x; u]")
    chol: List[float] = Field(description="Lower Cholesky factor, row-major")
    log_length_scales: List[float] = Field(description="Log length scales")
    log_signal_variances: List[float] = Field(description="Log signal variances")
    label: Optional[str] = Field(default=None, description="Free-form tag")


def snapshot(b: AugmentedBelief, label: Optional[str] = None) -> BeliefSnapshot:
    return BeliefSnapshot(
        n_x=b.n_x,
        n_f=b.n_f,
        n_in=b.n_in,
        inducing_inputs=b.inducing_inputs.ravel().tolist(),
        mean=b.mean.tolist(),
        chol=b.chol.ravel().tolist(),
        log_length_scales=b.hyperparameters.log_length_scales.tolist(),
        log_signal_variances=b.hyperparameters.log_signal_variances.tolist(),
        label=label,
    )


def from_snapshot(record: BeliefSnapshot) -> AugmentedBelief:
    h = Hyperparameters(np.array(record.log_length_scales), np.array(record.log_signal_variances))
    if h.n_in != record.n_in:
        raise DimensionError(f"snapshot has n_in={record.n_in} but {h.n_in} length scales")
    dim = len(record.mean)
    return AugmentedBelief(
        n_x=record.n_x,
        n_f=record.n_f,
        inducing_inputs=np.array(record.inducing_inputs, dtype=float).reshape(-1, record.n_in),
        mean=np.array(record.mean, dtype=float),
        chol=np.array(record.chol, dtype=float).reshape(dim, dim),
        hyperparameters=h,
    )
