# SPDX-License-Identifier: Apache-2.0
"""Hyperparameter adjustment: Adam, the recovered-likelihood loss and the prior swap."""

import numpy as np
import pytest

from rgpssm.bench.instances import random_belief
from rgpssm.filter.belief import init_belief
from rgpssm.filter.hypopt import AdamState
from rgpssm.filter.hypopt import HyperOptimizer
from rgpssm.filter.hypopt import adam_step
from rgpssm.filter.hypopt import apply_hyperparams
from rgpssm.filter.hypopt import hyper_loss
from rgpssm.filter.hypopt import hyper_loss_grad
from rgpssm.filter.kernel import Hyperparameters
from rgpssm.filter.kernel import gram
from rgpssm.oracle import DenseBelief
from rgpssm.oracle import delta_k_loss
from rgpssm.oracle import fd_gradient
from rgpssm.oracle import natural_parameter_update
from rgpssm.utils.configuration import HyperOptConfig
from rgpssm.utils.errors import DimensionError


@pytest.fixture
def scalar_belief():
    """One state and one inducing point at the origin with m_u = 1 and S = I under unit hyperparameters."""
    h = Hyperparameters.create([1.0], [1.0], 1, 1)
    return init_belief([0.0], [[1.0]], h, inducing_inputs=[[0.0]], inducing_mean=[1.0], inducing_cov=[[1.0]])


class TestAdam:
    def test_first_step_moves_by_the_learning_rate(self):
        state = AdamState.create(3, HyperOptConfig(learning_rate=0.05))
        state, update = adam_step(state, np.array([2.0, -0.3, 1e-3]))
        np.testing.assert_allclose(update, [-0.05, 0.05, -0.05], rtol=1e-4)
        assert state.count == 1

    def test_state_is_not_mutated(self):
        state = AdamState.create(2)
        adam_step(state, np.ones(2))
        assert state.count == 0
        np.testing.assert_array_equal(state.first_moment, 0.0)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            adam_step(AdamState.create(2), np.ones(3))


class TestLoss:
    def test_empty_set(self, hyper):
        b = init_belief(np.zeros(2), np.eye(2), hyper)
        loss, terms = hyper_loss(b, hyper.as_vector())
        assert loss == 0.0 and terms is None
        np.testing.assert_array_equal(hyper_loss_grad(b, hyper.as_vector()), 0.0)

    def test_loss_at_current_values_is_the_gram_logdet(self, belief):
        theta = belief.hyperparameters.as_vector()
        loss, _ = hyper_loss(belief, theta)
        _, logdet = np.linalg.slogdet(gram(belief.inducing_inputs, belief.hyperparameters, 1e-10))
        assert loss == pytest.approx(logdet, rel=1e-10, abs=1e-10)

    def test_matches_the_delta_k_form(self, multi_belief):
        theta_new = multi_belief.hyperparameters.as_vector() + np.array([0.3, -0.2, 0.25, 0.4, -0.3])
        loss, _ = hyper_loss(multi_belief, theta_new)
        reference = delta_k_loss(DenseBelief.from_belief(multi_belief), theta_new)
        assert loss == pytest.approx(reference, rel=1e-6)

    def test_scalar_loss(self, scalar_belief):
        loss, _ = hyper_loss(scalar_belief, np.log([1.0, 2.0]))
        assert loss == pytest.approx(-1.0, abs=1e-8)

    def test_gradient_ignores_a_constant_input_coordinate(self, rng):
        b = random_belief(rng, 2, 1, 4, n_in=2)
        z = b.inducing_inputs.copy()
        z[:, 1] = 0.3
        b = b.replace(inducing_inputs=z)
        theta = b.hyperparameters.as_vector() + np.array([0.1, -0.2, 0.05])
        assert abs(hyper_loss_grad(b, theta)[1]) < 1e-8

    def test_wrong_parameter_count(self, belief):
        with pytest.raises(DimensionError):
            hyper_loss(belief, np.zeros(4))

    @pytest.mark.parametrize("offset", [0.0, 0.15])
    def test_gradient_matches_finite_differences(self, rng, offset):
        for _ in range(5):
            b = random_belief(rng, 2, 2, int(rng.integers(2, 6)), n_in=2)
            theta = b.hyperparameters.as_vector() + offset * rng.standard_normal(4)
            analytic = hyper_loss_grad(b, theta)
            numeric = fd_gradient(lambda t: hyper_loss(b, t)[0], theta, step=1e-5)
            np.testing.assert_allclose(analytic, numeric, rtol=1e-4, atol=1e-6)


class TestApply:
    def test_matches_the_natural_parameter_update(self, rng):
        for _ in range(10):
            b = random_belief(rng, 2, 1, int(rng.integers(1, 6)), n_in=2)
            theta_new = b.hyperparameters.as_vector() + rng.uniform(-0.1, 0.1, 3)
            moved = apply_hyperparams(b, theta_new)
            reference = natural_parameter_update(DenseBelief.from_belief(b), theta_new)
            np.testing.assert_allclose(moved.mean, reference.mean, atol=1e-8)
            np.testing.assert_allclose(moved.covariance, reference.cov, atol=1e-8)
            np.testing.assert_allclose(moved.hyperparameters.as_vector(), theta_new)

    def test_scalar_update(self, scalar_belief):
        moved = apply_hyperparams(scalar_belief, np.log([1.0, 2.0]))
        np.testing.assert_allclose(moved.mean, [0.0, 2.0], atol=1e-8)
        np.testing.assert_allclose(moved.covariance, np.diag([1.0, 2.0]), atol=1e-8)

    def test_unchanged_values_are_a_no_op(self, belief):
        moved = apply_hyperparams(belief, belief.hyperparameters.as_vector())
        np.testing.assert_array_equal(moved.mean, belief.mean)
        np.testing.assert_array_equal(moved.chol, belief.chol)


class TestOptimizer:
    def test_skips_small_sets(self, rng):
        b = random_belief(rng, 2, 1, 1, n_in=2)
        optimizer = HyperOptimizer(HyperOptConfig(), b.hyperparameters.n_params)
        moved, loss = optimizer.step(b)
        assert moved is b and loss is None
        assert optimizer.state.count == 0

    def test_step_is_clipped(self, multi_belief):
        config = HyperOptConfig(learning_rate=1.0, max_log_step=0.05)
        optimizer = HyperOptimizer(config, multi_belief.hyperparameters.n_params)
        theta = multi_belief.hyperparameters.as_vector()
        moved, loss = optimizer.step(multi_belief)
        delta = moved.hyperparameters.as_vector() - theta
        assert loss is not None
        assert np.max(np.abs(delta)) <= 0.05 + 1e-12
        assert np.max(np.abs(delta)) == pytest.approx(0.05)

    def test_disabled_optimizer_returns_the_belief(self, multi_belief):
        optimizer = HyperOptimizer(HyperOptConfig(enabled=False), multi_belief.hyperparameters.n_params)
        moved, loss = optimizer.step(multi_belief)
        assert moved is multi_belief and loss is None
