# SPDX-License-Identifier: Apache-2.0
"""SE-ARD kernel with a diagonal multi-output (Kronecker) structure.

The multi-output covariance between inputs A and B is K0(A, B) ⊗ diag(σ²), where K0 is the
unit-variance squared-exponential base kernel. Inducing values are laid out input-major:
the n_f outputs of input i occupy rows i*n_f ... i*n_f + n_f - 1.

1. Hyperparameters: log length scales and log signal variances.
2. k_base / base_matrix: base kernel values.
3. k_matrix: KernelBlock (base matrix plus output scale), assembled to full blocks on demand.
4. gram: jittered full self-covariance used by every posterior computation.
5. k_input_grad / k_theta_grad: analytic derivatives.
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from rgpssm.utils.errors import DimensionError
from rgpssm.utils.errors import HyperparameterError


@dataclass(frozen=True)
class Hyperparameters:
    """Log-space SE-ARD hyperparameters.

    The parameter vector θ is [log l_1 .. log l_{n_in}, log σ_1² .. log σ_{n_f}²].
    """

    log_length_scales: np.ndarray
    log_signal_variances: np.ndarray

    def __post_init__(self):
        log_l = np.atleast_1d(np.asarray(self.log_length_scales, dtype=float)).copy()
        log_s = np.atleast_1d(np.asarray(self.log_signal_variances, dtype=float)).copy()
        if log_l.ndim != 1 or log_s.ndim != 1:
            raise HyperparameterError("hyperparameters must be vectors")
        if not (np.all(np.isfinite(log_l)) and np.all(np.isfinite(log_s))):
            raise HyperparameterError("hyperparameters must be finite")
        log_l.setflags(write=False)
        log_s.setflags(write=False)
        object.__setattr__(self, "log_length_scales", log_l)
        object.__setattr__(self, "log_signal_variances", log_s)

    @classmethod
    def create(cls, length_scales: Sequence[float], signal_variances: Sequence[float],
               n_in: int = 0, n_f: int = 0) -> "Hyperparameters":
        """Build from natural-scale values; single values broadcast to `n_in` / `n_f`."""
        length_scales = np.atleast_1d(np.asarray(length_scales, dtype=float))
        signal_variances = np.atleast_1d(np.asarray(signal_variances, dtype=float))
        if n_in and length_scales.size == 1:
            length_scales = np.full(n_in, length_scales[0])
        if n_f and signal_variances.size == 1:
            signal_variances = np.full(n_f, signal_variances[0])
        if np.any(length_scales <= 0) or np.any(signal_variances <= 0):
            raise HyperparameterError("length scales and signal variances must be positive")
        return cls(np.log(length_scales), np.log(signal_variances))

    @classmethod
    def from_vector(cls, theta: np.ndarray, n_in: int) -> "Hyperparameters":
        theta = np.asarray(theta, dtype=float)
        return cls(theta[:n_in], theta[n_in:])

    @property
    def n_in(self) -> int:
        return self.log_length_scales.size

    @property
    def n_f(self) -> int:
        return self.log_signal_variances.size

    @property
    def n_params(self) -> int:
        return self.n_in + self.n_f

    @property
    def length_scales(self) -> np.ndarray:
        return np.exp(self.log_length_scales)

    @property
    def signal_variances(self) -> np.ndarray:
        return np.exp(self.log_signal_variances)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.log_length_scales, self.log_signal_variances])

    def is_length_index(self, j: int) -> bool:
        """Whether θ_j is a log length scale; raises for an out-of-range index."""
        if not 0 <= j < self.n_params:
            raise HyperparameterError(f"hyperparameter index {j} out of range 0..{self.n_params - 1}")
        return j < self.n_in


@dataclass(frozen=True)
class KernelBlock:
    """Kernel values between two input sets: base matrix plus diagonal output scale."""

    base: np.ndarray
    output_scale: np.ndarray

    def full(self) -> np.ndarray:
        """The multi-output block base ⊗ diag(output_scale)."""
        return np.kron(self.base, np.diag(self.output_scale))


def _as_inputs(points, n_in: int) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points.reshape(-1, n_in) if points.size else np.zeros((0, n_in))
    if points.ndim != 2 or points.shape[1] != n_in:
        raise DimensionError(f"inputs must have {n_in} columns, got shape {points.shape}")
    return points


def k_base(z, z_prime, h: Hyperparameters) -> float:
    """Unit-variance SE-ARD kernel exp(-½ Σ (z_i - z'_i)² / l_i²)."""
    z = np.asarray(z, dtype=float).ravel()
    z_prime = np.asarray(z_prime, dtype=float).ravel()
    if z.size != h.n_in or z_prime.size != h.n_in:
        raise DimensionError(f"inputs must have length {h.n_in}, got {z.size} and {z_prime.size}")
    scaled = (z - z_prime) / h.length_scales
    return float(np.exp(-0.5 * scaled @ scaled))


def base_matrix(a, b, h: Hyperparameters) -> np.ndarray:
    """Matrix of base kernel values K0(A_i, B_j)."""
    a = _as_inputs(a, h.n_in) / h.length_scales
    b = _as_inputs(b, h.n_in) / h.length_scales
    sq = np.sum(a**2, axis=1)[:, None] + np.sum(b**2, axis=1)[None, :] - 2.0 * a @ b.T
    return np.exp(-0.5 * np.maximum(sq, 0.0))


def k_matrix(a, b, h: Hyperparameters) -> KernelBlock:
    return KernelBlock(base_matrix(a, b, h), h.signal_variances)


def jittered_base(z, h: Hyperparameters, jitter: float) -> np.ndarray:
    """K0(Z, Z) + jitter·I, the base Gram matrix every inverse is taken of."""
    base = base_matrix(z, z, h)
    return base + jitter * np.eye(base.shape[0])


def gram(z, h: Hyperparameters, jitter: float) -> np.ndarray:
    """Full self-covariance (K0(Z, Z) + jitter·I) ⊗ diag(σ²)."""
    return np.kron(jittered_base(z, h, jitter), np.diag(h.signal_variances))


def k_input_grad(z, zs, h: Hyperparameters) -> np.ndarray:
    """Gradient of K0(z, Z_j) with respect to z, one column per Z_j (n_in × |Z|)."""
    z = np.asarray(z, dtype=float).ravel()
    if z.size != h.n_in:
        raise DimensionError(f"input must have length {h.n_in}, got {z.size}")
    zs = _as_inputs(zs, h.n_in)
    values = base_matrix(z[None, :], zs, h)[0]
    diff = (zs - z[None, :]) / h.length_scales**2
    return (diff * values[:, None]).T


def k_theta_grad(a, b, h: Hyperparameters, j: int) -> KernelBlock:
    """Derivative of the kernel block with respect to θ_j.

    For a log length scale the base matrix changes (K0 ∘ d_i² / l_i²) and the output scale is
    carried unchanged; for a log signal variance the base is unchanged and only output j
    scales (σ_j² e_j). In both cases `full()` of the result is the derivative of the full block.
    """
    if h.is_length_index(j):
        a_in = _as_inputs(a, h.n_in)
        b_in = _as_inputs(b, h.n_in)
        base = base_matrix(a_in, b_in, h)
        d = a_in[:, j][:, None] - b_in[:, j][None, :]
        return KernelBlock(base * d**2 / h.length_scales[j] ** 2, h.signal_variances)
    k = j - h.n_in
    scale = np.zeros(h.n_f)
    scale[k] = h.signal_variances[k]
    return KernelBlock(base_matrix(a, b, h), scale)


def gram_grad(z, h: Hyperparameters, j: int, jitter: float) -> np.ndarray:
    """Derivative of `gram(z, h, jitter)` with respect to θ_j."""
    block = k_theta_grad(z, z, h, j)
    base = block.base
    if not h.is_length_index(j):
        base = base + jitter * np.eye(base.shape[0])
    return np.kron(base, np.diag(block.output_scale))
