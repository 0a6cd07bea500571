"""Stable linear-map fitting and the blended pose policy.

The fitting oracle is a planted problem: targets generated by a known
negative-definite matrix must be recovered.  Policy behaviour is pinned with
hand-built single-component models where every output has a closed form.
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from conftest import planted_linear_map_data

from se3ds import manifold, mixture, policy
from se3ds.errors import DimensionMismatchError
from se3ds.manifold import UnitQuaternion

ATT = UnitQuaternion.from_axis_angle([0.0, 1.0, 0.0], 0.7)


def _single_component_policy(a_ori_scale=-0.5, a_pos=None) -> policy.Se3Policy:
    cov = 0.05 * np.eye(4)
    comps = [
        mixture.GaussianComponent(prior=1.0, mean_ori=ATT.array, covariance=cov),
        mixture.GaussianComponent(
            prior=1.0, mean_ori=-ATT.array, covariance=cov, mirrored=True
        ),
    ]
    mix = mixture.MixtureModel(mixture.MODE_ORIENTATION, ATT, comps)
    if a_pos is None:
        a_pos = -1.5 * np.eye(3)
    return policy.Se3Policy(
        mixture=mix,
        a_ori=(a_ori_scale * np.eye(4))[None],
        a_pos=np.asarray(a_pos)[None],
        attractor_pos=np.array([0.1, -0.2, 0.3]),
        dt=0.01,
    )


def test_planted_matrix_is_recovered():
    a_true, features, targets = planted_linear_map_data()
    a, residual, converged = policy.fit_stable_linear_maps(
        features, targets, np.ones((features.shape[0], 1))
    )
    assert converged
    assert np.linalg.norm(a[0] - a_true) <= 1e-3
    assert residual >= 0.0


def test_fit_only_descends_from_its_starting_point():
    # the solver starts at A = -I; whatever it returns must score at least
    # as well as that start, measured by independent arithmetic
    a_true, features, targets = planted_linear_map_data(n=200, seed=9)
    init_objective = float(((targets + features) ** 2).sum())
    _, residual, _ = policy.fit_stable_linear_maps(
        features, targets, np.ones((features.shape[0], 1))
    )
    assert residual <= init_objective


def test_fitted_maps_respect_the_definiteness_margin():
    rng = np.random.default_rng(12)
    features = rng.uniform(-1.0, 1.0, size=(300, 3))
    # adversarial targets that push away from the goal
    targets = features * 2.0
    weights = np.ones((300, 1))
    a, _, _ = policy.fit_stable_linear_maps(features, targets, weights)
    sym = 0.5 * (a[0] + a[0].T)
    assert np.linalg.eigvalsh(sym).max() <= -policy.DEFINITENESS_MARGIN + 1e-9


def test_fit_rejects_mismatched_shapes():
    with pytest.raises(DimensionMismatchError):
        policy.fit_stable_linear_maps(np.zeros((10, 3)), np.zeros((10, 4)), np.ones((10, 1)))
    with pytest.raises(DimensionMismatchError):
        policy.fit_stable_linear_maps(np.zeros((10, 3)), np.zeros((10, 3)), np.ones((9, 1)))


def test_orientation_step_is_zero_at_the_attractor():
    pol = _single_component_policy()
    step = pol.predict_orientation_step(None, ATT)
    assert step.norm == 0.0
    step = pol.predict_orientation_step(None, -ATT)
    assert step.norm == 0.0


def test_single_map_prediction_matches_matrix_arithmetic():
    pol = _single_component_policy(a_ori_scale=-0.5)
    q = UnitQuaternion.from_axis_angle([1.0, 0.0, 0.0], 0.8)
    feat = manifold.log_rows(ATT.array, manifold.fold_rows(ATT.array, q.array[None]))[0]
    expected = -0.5 * feat
    expected = expected - (expected @ ATT.array) * ATT.array
    got = pol.predict_orientation_step(None, q)
    assert np.max(np.abs(got.v - expected)) < 1e-15


def test_velocity_is_linear_and_vanishes_at_the_goal():
    a_pos = np.array([[-1.0, 0.2, 0.0], [-0.2, -0.8, 0.1], [0.0, -0.1, -1.2]])
    pol = _single_component_policy(a_pos=a_pos)
    q = UnitQuaternion.from_axis_angle([0.0, 0.0, 1.0], 0.4)
    assert np.array_equal(
        pol.predict_position_velocity(pol.attractor_pos, q), np.zeros(3)
    )
    rng = np.random.default_rng(3)
    for _ in range(50):
        p = pol.attractor_pos + rng.uniform(-1.0, 1.0, size=3)
        v = pol.predict_position_velocity(p, q)
        assert np.max(np.abs(v - a_pos @ (p - pol.attractor_pos))) < 1e-12


def test_velocity_always_points_inward():
    # negative-definite map: (p - goal) . v < 0 away from the goal
    a_pos = np.array([[-1.0, 0.2, 0.0], [-0.2, -0.8, 0.1], [0.0, -0.1, -1.2]])
    pol = _single_component_policy(a_pos=a_pos)
    q = UnitQuaternion.identity()
    rng = np.random.default_rng(21)
    offsets = rng.uniform(-1.0, 1.0, size=(1000, 3))
    offsets = offsets[np.linalg.norm(offsets, axis=1) > 1e-3]
    for off in offsets:
        v = pol.predict_position_velocity(pol.attractor_pos + off, q)
        assert off @ v < 0.0


def test_lyapunov_value_is_squared_folded_distance():
    pol = _single_component_policy()
    assert pol.lyapunov_value(ATT) == 0.0
    assert pol.lyapunov_value(-ATT) == 0.0
    rng = np.random.default_rng(6)
    for q_arr in manifold.random_unit_quaternions(rng, 100):
        d = manifold.rotation_distance(ATT, UnitQuaternion.from_array(q_arr))
        assert abs(pol.lyapunov_value(UnitQuaternion.from_array(q_arr)) - d * d) < 1e-12


def test_contraction_rate_of_a_scalar_map():
    # A = -0.5 I halves the geodesic distance per step, so V drops by 3/4
    pol = _single_component_policy(a_ori_scale=-0.5)
    rng = np.random.default_rng(14)
    for q_arr in manifold.random_unit_quaternions(rng, 100):
        q = UnitQuaternion.from_array(q_arr)
        v = pol.lyapunov_value(q)
        if v < 1e-8 or v > (math.pi / 2 - 0.05) ** 2:
            continue
        dv = pol.lyapunov_difference(None, q)
        assert abs(dv - (-0.75 * v)) < 1e-9 * max(1.0, v)


def test_sign_symmetry_of_all_outputs():
    pol = _single_component_policy()
    rng = np.random.default_rng(17)
    quats = manifold.random_unit_quaternions(rng, 100)
    positions = rng.uniform(-0.5, 0.5, size=(100, 3))
    for p, q_arr in zip(positions, quats):
        g1, y1, v1 = pol._predict_arrays(p, q_arr)
        g2, y2, v2 = pol._predict_arrays(p, -q_arr)
        assert np.array_equal(g1, g2)
        assert np.array_equal(y1, y2)
        assert np.array_equal(v1, v2)
        d1 = pol.desired_next_orientation(p, UnitQuaternion.from_array(q_arr))
        d2 = pol.desired_next_orientation(p, UnitQuaternion.from_array(-q_arr))
        assert np.array_equal(d1.array, -d2.array)


def test_stability_margins_report_the_worst_eigenvalue():
    a_pos = np.array([[-1.0, 0.2, 0.0], [-0.2, -0.8, 0.1], [0.0, -0.1, -1.2]])
    pol = _single_component_policy(a_ori_scale=-0.5, a_pos=a_pos)
    ori, pos = pol.stability_margins()
    assert abs(ori - (-0.5)) < 1e-12
    expected = float(np.linalg.eigvalsh(0.5 * (a_pos + a_pos.T)).max())
    assert abs(pos - expected) < 1e-12


def test_policy_shape_validation():
    pol = _single_component_policy()
    with pytest.raises(DimensionMismatchError):
        policy.Se3Policy(
            mixture=pol.mixture,
            a_ori=np.zeros((2, 4, 4)),
            a_pos=pol.a_pos,
            attractor_pos=pol.attractor_pos,
            dt=0.01,
        )
    with pytest.raises(DimensionMismatchError):
        policy.Se3Policy(
            mixture=pol.mixture,
            a_ori=pol.a_ori,
            a_pos=np.zeros((1, 4, 4)),
            attractor_pos=pol.attractor_pos,
            dt=0.01,
        )
    with pytest.raises(ValueError):
        policy.Se3Policy(
            mixture=pol.mixture,
            a_ori=pol.a_ori,
            a_pos=pol.a_pos,
            attractor_pos=pol.attractor_pos,
            dt=0.0,
        )


def test_learned_policy_reports_its_fit():
    # end to end on a tiny task: converged flags set, margins within bounds
    from se3ds import preprocess as _pp  # noqa: F401  (module import check)
    import se3ds
    from se3ds import synthetic

    task = synthetic.generate("arc-rotate", n_demos=2, n_samples=120, noise=0.002, seed=0)
    ds = se3ds.preprocess(task.demos, dt=task.dt)
    mix = mixture.fit(ds, mixture.MODE_ORIENTATION, k_range=[1], seed=0)
    pol = policy.learn(ds, mix, seed=0)
    assert pol.converged_ori and pol.converged_pos
    assert pol.residual_ori >= 0.0 and pol.residual_pos >= 0.0
    ori, pos = pol.stability_margins()
    assert ori <= -policy.DEFINITENESS_MARGIN + 1e-9
    assert pos <= -policy.DEFINITENESS_MARGIN + 1e-9
    assert pol.seed == 0
    assert pol.dt == task.dt
