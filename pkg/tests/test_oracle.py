# SPDX-License-Identifier: Apache-2.0
"""Dense reference routines checked against closed forms."""

import numpy as np
import pytest

from rgpssm.bench.instances import random_belief
from rgpssm.filter.kernel import Hyperparameters
from rgpssm.oracle import DenseBelief
from rgpssm.oracle import dense_discard
from rgpssm.oracle import exact_gpr
from rgpssm.oracle import fd_gradient
from rgpssm.oracle import gaussian_kl
from rgpssm.oracle import kl_discard_loss
from rgpssm.oracle import natural_parameter_update
from rgpssm.oracle import offline_gpr_fit
from rgpssm.utils.errors import FactorizationError
from rgpssm.utils.errors import JacobianError


class TestGaussianKL:
    def test_identical_distributions(self):
        cov = np.array([[2.0, 0.3], [0.3, 1.0]])
        assert gaussian_kl(np.ones(2), cov, np.ones(2), cov) == pytest.approx(0.0, abs=1e-12)

    def test_scalar_closed_form(self):
        assert gaussian_kl(0.0, 1.0, 1.0, 2.0) == pytest.approx(0.5 * np.log(2.0))

    def test_rejects_singular_covariances(self):
        with pytest.raises(FactorizationError):
            gaussian_kl(np.zeros(2), np.zeros((2, 2)), np.zeros(2), np.eye(2))


class TestDiscardLoss:
    def test_non_negative(self, multi_belief):
        db = DenseBelief.from_belief(multi_belief)
        assert all(kl_discard_loss(db, d) >= -1e-10 for d in range(db.n_u))

    def test_dense_discard_marginalizes(self, multi_belief):
        db = DenseBelief.from_belief(multi_belief)
        dropped = dense_discard(db, 1)
        keep = np.r_[0:5, 7:db.mean.size]
        np.testing.assert_array_equal(dropped.mean, db.mean[keep])
        np.testing.assert_array_equal(dropped.cov, db.cov[np.ix_(keep, keep)])
        np.testing.assert_array_equal(dropped.inducing_inputs, db.inducing_inputs[[0, 2, 3]])


class TestExactGPR:
    def test_interpolates_noise_free_data(self):
        h = Hyperparameters.create([1.0], [1.0])
        inputs = np.arange(5.0)
        mean, cov = exact_gpr(inputs, np.sin(inputs), 1e-10, h, inputs)
        np.testing.assert_allclose(mean, np.sin(inputs), atol=1e-6)
        np.testing.assert_allclose(np.diag(cov), 0.0, atol=1e-6)

    def test_far_queries_fall_back_to_the_prior(self):
        h = Hyperparameters.create([1.0], [2.0])
        mean, cov = exact_gpr(np.arange(3.0), np.ones(3), 0.1, h, np.array([50.0]))
        assert mean[0] == pytest.approx(0.0, abs=1e-12)
        assert cov[0, 0] == pytest.approx(2.0)


class TestGradients:
    def test_fd_gradient_of_a_quadratic(self):
        a = np.array([[3.0, 1.0], [1.0, 2.0]])
        point = np.array([0.5, -1.5])
        np.testing.assert_allclose(fd_gradient(lambda x: 0.5 * x @ a @ x, point), a @ point,
                                   rtol=1e-6, atol=1e-8)

    def test_fd_gradient_rejects_non_finite_values(self):
        with pytest.raises(JacobianError):
            fd_gradient(lambda x: float(np.log(x[0])), np.zeros(1))


class TestHyperparameterReferences:
    def test_unchanged_values_are_the_identity(self, belief):
        db = DenseBelief.from_belief(belief)
        moved = natural_parameter_update(db, belief.hyperparameters.as_vector())
        np.testing.assert_allclose(moved.mean, db.mean, atol=1e-8)
        np.testing.assert_allclose(moved.cov, db.cov, atol=1e-8)

    def test_offline_fit_needs_enough_samples(self):
        h = Hyperparameters.create([1.0], [1.0])
        with pytest.raises(ValueError):
            offline_gpr_fit(np.arange(9.0), np.zeros(9), h)

    def test_offline_fit_shortens_an_overlong_length_scale(self):
        rng = np.random.default_rng(7)
        inputs = np.linspace(-3.0, 3.0, 40)
        targets = np.sin(2.0 * inputs) + 0.05 * rng.standard_normal(40)
        h0 = Hyperparameters.create([5.0], [1.0])
        fitted = offline_gpr_fit(inputs, targets, h0, iterations=300, learning_rate=0.02)
        assert fitted.length_scales[0] < 3.0
