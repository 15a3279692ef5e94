# SPDX-License-Identifier: Apache-2.0
"""Model structures and the simulators behind the benchmarks."""

from dataclasses import replace

import numpy as np
import pytest

from rgpssm.filter.kernel import Hyperparameters
from rgpssm.models.base import ModelSpec
from rgpssm.models.base import numeric_jacobian
from rgpssm.models.lincycle import LEFT_TURN
from rgpssm.models.lincycle import RIGHT_TURN
from rgpssm.models.lincycle import STRAIGHT
from rgpssm.models.lincycle import LimitCycleParams
from rgpssm.models.lincycle import cycle_step
from rgpssm.models.lincycle import emission_matrix
from rgpssm.models.lincycle import lincycle_modelspec
from rgpssm.models.lincycle import next_regime
from rgpssm.models.lincycle import switching_lds_simulate
from rgpssm.models.regression import gpr_reduction_modelspec
from rgpssm.models.sysid import sysid_modelspec
from rgpssm.models.sysid import sysid_seed_belief
from rgpssm.models.wingrock import WingRockParams
from rgpssm.models.wingrock import wingrock_delta
from rgpssm.models.wingrock import wingrock_modelspec
from rgpssm.models.wingrock import wingrock_simulate
from rgpssm.utils.errors import DimensionError
from rgpssm.utils.errors import JacobianError


def _numeric(model: ModelSpec) -> ModelSpec:
    return replace(model, transition_jac_x=None, transition_jac_f=None, measurement_jac=None, gp_input_jac=None)


class TestNumericJacobian:
    def test_linear_map(self):
        a = np.array([[1.0, -2.0, 0.5], [3.0, 0.0, 4.0]])
        np.testing.assert_allclose(numeric_jacobian(lambda x: a @ x, np.zeros(3)), a, atol=1e-7)

    def test_nonlinear_map(self):
        point = np.array([0.3, -1.2])
        jac = numeric_jacobian(lambda x: np.array([np.sin(x[0]) * x[1]]), point)
        np.testing.assert_allclose(jac, [[np.cos(0.3) * -1.2, np.sin(0.3)]], rtol=1e-6)

    def test_non_finite_evaluation(self):
        with pytest.raises(JacobianError):
            numeric_jacobian(lambda x: np.log(x), np.zeros(1))


class TestModelSpec:
    def test_noise_shapes_are_checked(self):
        with pytest.raises(DimensionError):
            replace(gpr_reduction_modelspec(), process_noise=np.eye(2))

    def test_measurement_noise_must_be_positive_definite(self):
        with pytest.raises(DimensionError):
            replace(gpr_reduction_modelspec(), measurement_noise=np.zeros((1, 1)))

    def test_scalar_noise_is_promoted(self):
        model = replace(gpr_reduction_modelspec(), measurement_noise=0.5)
        np.testing.assert_array_equal(model.measurement_noise, [[0.5]])

    def test_wrong_jacobian_shape(self):
        model = replace(gpr_reduction_modelspec(), transition_jac_f=lambda x, f, c: np.eye(2))
        with pytest.raises(ValueError):
            model.jac_f(np.zeros(1), np.zeros(1))

    def test_gpr_reduction_reads_the_control(self):
        model = gpr_reduction_modelspec(2, 1)
        np.testing.assert_array_equal(model.input_of(np.zeros(1), [0.5, -1.0]), [0.5, -1.0])
        np.testing.assert_array_equal(model.step_mean(np.array([4.0]), np.array([1.5]), [0.0, 0.0]), [1.5])


class TestWingRock:
    def test_delta_at_rest(self):
        assert wingrock_delta(0.0, 0.0) == pytest.approx(0.8)

    def test_delta_at_unit_state(self):
        assert wingrock_delta(1.0, 1.0) == pytest.approx(1.1296, abs=1e-12)

    def test_default_process_noise_is_per_state(self):
        np.testing.assert_array_equal(wingrock_modelspec().process_noise, np.diag([1e-8, 1e-6]))
        np.testing.assert_array_equal(wingrock_modelspec(process_noise=1e-4).process_noise, 1e-4 * np.eye(2))

    def test_analytic_jacobians_match_differences(self):
        model = wingrock_modelspec()
        numeric = _numeric(model)
        x, f = np.array([0.3, -0.4]), np.array([0.7])
        for name in ("jac_x", "jac_f"):
            np.testing.assert_allclose(getattr(model, name)(x, f, 0.2), getattr(numeric, name)(x, f, 0.2), atol=1e-7)
        np.testing.assert_allclose(model.jac_g(x), numeric.jac_g(x), atol=1e-7)
        np.testing.assert_allclose(model.jac_h(x, 0.2), numeric.jac_h(x, 0.2), atol=1e-7)

    def test_simulation_is_seeded(self):
        first = wingrock_simulate(duration=2.0, seed=3)
        second = wingrock_simulate(duration=2.0, seed=3)
        other = wingrock_simulate(duration=2.0, seed=4)
        assert len(first) == 100
        np.testing.assert_array_equal(first.y, second.y)
        np.testing.assert_array_equal(first.x, other.x)
        assert not np.array_equal(first.y, other.y)

    def test_simulation_follows_the_euler_step(self):
        params = WingRockParams()
        data = wingrock_simulate(params, duration=1.0)
        model = wingrock_modelspec(params)
        k = 20
        np.testing.assert_allclose(
            data.x[k + 1], model.step_mean(data.x[k], np.array([data.delta[k]]), data.control[k]), atol=1e-12
        )

    def test_frame_columns(self):
        frame = wingrock_simulate(duration=0.5).to_frame()
        assert list(frame.columns) == ["t", "x1", "x2", "y1", "u1", "delta"]

    def test_rejects_non_positive_dt(self):
        with pytest.raises(ValueError):
            wingrock_simulate(dt=0.0)


class TestLimitCycle:
    def test_straight_step_moves_along_the_side(self):
        params = LimitCycleParams()
        np.testing.assert_allclose(cycle_step(np.array([0.0, params.radius]), params), [params.speed, params.radius])

    def test_orbit_stays_bounded_and_visits_every_regime(self):
        params = LimitCycleParams()
        data = switching_lds_simulate(params, seed=0, steps=400)
        assert np.max(np.abs(data.x)) <= params.bound
        assert {STRAIGHT, RIGHT_TURN, LEFT_TURN} <= set(data.regime.tolist())

    def test_turns_switch_with_hysteresis(self):
        params = LimitCycleParams()
        a = params.half_length
        assert next_regime(np.array([a + 0.01, 0.99]), STRAIGHT, params) == RIGHT_TURN
        assert next_regime(np.array([a + 0.05, -0.99]), STRAIGHT, params) == STRAIGHT
        assert next_regime(np.array([a - 0.01, 0.3]), RIGHT_TURN, params) == RIGHT_TURN
        assert next_regime(np.array([a + 0.05, -0.3]), RIGHT_TURN, params) == RIGHT_TURN
        assert next_regime(np.array([a - 0.01, -0.99]), RIGHT_TURN, params) == STRAIGHT
        assert next_regime(np.array([-a - 0.01, -0.99]), STRAIGHT, params) == LEFT_TURN
        assert next_regime(np.array([-a + 0.01, 0.99]), LEFT_TURN, params) == STRAIGHT

    def test_noisy_orbit_completes_each_turn(self):
        params = LimitCycleParams(process_noise_std=0.02)
        data = switching_lds_simulate(params, seed=4, steps=600)
        changes = np.flatnonzero(np.diff(data.regime)) + 1
        for start, stop in zip(changes[:-1], changes[1:]):
            if data.regime[start] != STRAIGHT:
                assert np.sign(data.x[start, 1]) != np.sign(data.x[stop, 1])

    def test_emission_depends_on_the_seed(self):
        params = LimitCycleParams()
        np.testing.assert_array_equal(emission_matrix(params, 1), emission_matrix(params, 1))
        assert emission_matrix(params, 1).shape == (4, 2)
        assert not np.array_equal(emission_matrix(params, 1), emission_matrix(params, 2))

    def test_model_observes_through_the_emission(self):
        emission = emission_matrix(LimitCycleParams(), 0)
        model = lincycle_modelspec(emission)
        x = np.array([0.5, -1.0])
        np.testing.assert_allclose(model.observe(x), emission @ x)
        np.testing.assert_allclose(model.step_mean(x, np.array([0.1, 0.2])), [0.6, -0.8])


class TestSysId:
    def test_structure(self):
        model = sysid_modelspec(3)
        assert (model.n_x, model.n_f, model.n_in, model.n_y) == (3, 3, 4, 1)
        np.testing.assert_array_equal(model.input_of(np.arange(3.0), [2.5]), [0.0, 1.0, 2.0, 2.5])
        np.testing.assert_allclose(model.jac_h(np.zeros(3), 1.0), _numeric(model).jac_h(np.zeros(3), 1.0), atol=1e-7)

    def test_seed_belief_holds_one_point(self):
        model = sysid_modelspec(2)
        h = Hyperparameters.create([1.0], [1.0], model.n_in, model.n_f)
        b = sysid_seed_belief(model, h, np.random.default_rng(0))
        assert b.n_u == 1
        assert b.dim == model.n_x + model.n_f
        assert np.any(b.mean[model.n_x:] != 0.0)
        np.testing.assert_allclose(b.covariance[:2, 2:], 0.0)
