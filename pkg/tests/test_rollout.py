"""Discrete simulation: stepping arithmetic, convergence, perturbations.

Hand-built single-map policies give closed-form step behaviour (a -0.5 I map
halves the geodesic distance every step), so each trace row can be checked
against manual arithmetic.
"""

from __future__ import annotations

import numpy as np
import pytest

from se3ds import manifold, mixture, policy, rollout
from se3ds.manifold import UnitQuaternion

ATT = UnitQuaternion.from_axis_angle([0.0, 1.0, 0.0], 0.7)
GOAL_P = np.array([0.1, -0.2, 0.3])


def _policy(ori_scale=-0.5, pos_scale=-0.5, n_components=1) -> policy.Se3Policy:
    cov = 0.05 * np.eye(4)
    if n_components == 1:
        means = [ATT.array]
    else:
        means = [
            ATT.array,
            UnitQuaternion.from_axis_angle([1.0, 0.0, 0.0], 0.9).array,
        ]
    src = [
        mixture.GaussianComponent(
            prior=1.0 / len(means), mean_ori=m, covariance=cov
        )
        for m in means
    ]
    twins = [
        mixture.GaussianComponent(
            prior=c.prior, mean_ori=-c.mean_ori, covariance=c.covariance, mirrored=True
        )
        for c in src
    ]
    mix = mixture.MixtureModel(mixture.MODE_ORIENTATION, ATT, src + twins)
    k = len(means)
    return policy.Se3Policy(
        mixture=mix,
        a_ori=np.repeat((ori_scale * np.eye(4))[None], k, axis=0),
        a_pos=np.repeat((pos_scale * np.eye(3))[None], k, axis=0),
        attractor_pos=GOAL_P,
        dt=0.01,
    )


def _start_quat(distance: float) -> UnitQuaternion:
    v = np.array([0.0, 1.0, 0.0, 0.0])
    v -= (v @ ATT.array) * ATT.array
    v /= np.linalg.norm(v)
    return manifold.exp_map(manifold.TangentVector(ATT, distance * v))


def test_start_at_the_goal_converges_immediately():
    pol = _policy()
    trace = rollout.run(pol, GOAL_P, ATT)
    assert trace.converged
    assert trace.status == rollout.STATUS_CONVERGED
    assert trace.n_steps == 0
    assert len(trace) == 1
    assert trace.lyapunov[0] == 0.0
    assert np.array_equal(trace.velocities[0], np.zeros(3))


def test_scalar_map_halves_the_distance_each_step():
    pol = _policy(ori_scale=-0.5)
    q0 = _start_quat(0.2)
    trace = rollout.run(pol, GOAL_P, q0, rollout.RolloutConfig(max_steps=10))
    d0 = manifold.rotation_distance(ATT, UnitQuaternion.from_array(trace.quaternions[0]))
    d1 = manifold.rotation_distance(ATT, UnitQuaternion.from_array(trace.quaternions[1]))
    assert abs(d0 - 0.2) < 1e-12
    assert abs(d1 - 0.1) < 1e-9


def test_each_advance_matches_the_policy_composition():
    pol = _policy(ori_scale=-0.35)
    trace = rollout.run(pol, GOAL_P + np.array([0.3, 0.0, -0.2]), _start_quat(0.5))
    assert trace.converged
    for i in range(min(len(trace) - 1, 40)):
        q_des = pol.desired_next_orientation(
            trace.positions[i], UnitQuaternion.from_array(trace.quaternions[i])
        )
        d = manifold.rotation_distance(
            q_des, UnitQuaternion.from_array(trace.quaternions[i + 1])
        )
        assert d < 1e-9
        assert np.array_equal(
            trace.positions[i + 1],
            trace.positions[i] + trace.velocities[i] * trace.dt,
        )


def test_long_runs_stay_on_the_unit_sphere():
    # a barely-contracting map keeps the rollout busy for its whole budget
    pol = _policy(ori_scale=-0.002, pos_scale=-0.002)
    config = rollout.RolloutConfig(max_steps=10_000, tol_pos=1e-12, tol_ori=1e-12)
    trace = rollout.run(pol, GOAL_P + np.array([0.5, 0.0, 0.0]), _start_quat(1.4), config)
    assert trace.status == rollout.STATUS_MAX_STEPS
    assert len(trace) == 10_001
    norms = np.linalg.norm(trace.quaternions, axis=1)
    assert np.max(np.abs(norms - 1.0)) < 1e-9


def test_lyapunov_is_monotone_along_the_trace():
    pol = _policy(ori_scale=-0.3)
    trace = rollout.run(pol, GOAL_P, _start_quat(1.0), rollout.RolloutConfig(tol_ori=1e-3))
    assert trace.converged
    drops = np.diff(trace.lyapunov)
    assert np.all(drops < 0.0)
    # the recorded per-step delta anticipates the actual next value
    assert np.max(np.abs(trace.lyapunov_delta[:-1] - drops)) < 1e-12


def test_traces_are_bit_identical():
    pol = _policy(ori_scale=-0.25, pos_scale=-0.4, n_components=2)
    start_p = GOAL_P + np.array([0.2, -0.1, 0.4])
    q0 = _start_quat(0.8)
    a = rollout.run(pol, start_p, q0)
    b = rollout.run(pol, start_p, q0)
    assert a.status == b.status and a.n_steps == b.n_steps
    for name in ("times", "positions", "quaternions", "velocities",
                 "omegas", "gammas", "lyapunov", "lyapunov_delta"):
        assert np.array_equal(getattr(a, name), getattr(b, name)), name


def test_mixing_rows_in_the_trace_sum_to_one():
    pol = _policy(n_components=2)
    trace = rollout.run(pol, GOAL_P + np.array([0.3, 0.1, 0.0]), _start_quat(1.2))
    assert trace.gammas.shape[1] == 2
    assert np.max(np.abs(trace.gammas.sum(axis=1) - 1.0)) < 1e-12


def test_perturbation_is_applied_before_its_step():
    pol = _policy(ori_scale=-0.05, pos_scale=-0.05)
    delta_p = np.array([0.07, -0.02, 0.01])
    delta_q = UnitQuaternion.from_axis_angle([0.0, 0.0, 1.0], 0.3)
    config = rollout.RolloutConfig(
        max_steps=400,
        perturbations=(rollout.Perturbation(step=50, delta_p=delta_p, delta_q=delta_q),),
    )
    trace = rollout.run(pol, GOAL_P + np.array([0.2, 0.0, 0.0]), _start_quat(0.6), config)
    jump = trace.positions[50] - (trace.positions[49] + trace.dt * trace.velocities[49])
    assert np.max(np.abs(jump - delta_p)) < 1e-12
    # all other steps follow plain Euler integration
    for i in range(60):
        if i == 49:
            continue
        residual = trace.positions[i + 1] - (
            trace.positions[i] + trace.dt * trace.velocities[i]
        )
        assert np.max(np.abs(residual)) < 1e-15
    # the recorded quaternion at the perturbed step is the kicked one
    expected = UnitQuaternion.from_array(trace.quaternions[49])
    stepped = pol.desired_next_orientation(trace.positions[49], expected)
    kicked = stepped * delta_q
    d = manifold.rotation_distance(
        kicked, UnitQuaternion.from_array(trace.quaternions[50])
    )
    assert d < 1e-9


def test_converged_trace_has_one_row_per_visited_state():
    pol = _policy()
    trace = rollout.run(pol, GOAL_P + np.array([0.1, 0.1, 0.0]), _start_quat(0.4))
    assert trace.converged
    assert len(trace) == trace.n_steps + 1
    assert trace.times[0] == 0.0
    assert abs(trace.times[-1] - trace.n_steps * trace.dt) < 1e-12


def test_budget_exhaustion_is_reported():
    pol = _policy(ori_scale=-0.001, pos_scale=-0.001)
    trace = rollout.run(
        pol, GOAL_P + np.array([1.0, 0.0, 0.0]), _start_quat(1.3),
        rollout.RolloutConfig(max_steps=3),
    )
    assert trace.status == rollout.STATUS_MAX_STEPS
    assert not trace.converged
    assert trace.n_steps == 3
    assert len(trace) == 4


def test_dt_override():
    pol = _policy()
    trace = rollout.run(
        pol, GOAL_P + np.array([0.2, 0.0, 0.0]), _start_quat(0.5),
        rollout.RolloutConfig(dt=0.05),
    )
    assert trace.dt == 0.05
    assert np.max(np.abs(np.diff(trace.times) - 0.05)) < 1e-12


def test_config_validation():
    with pytest.raises(ValueError):
        rollout.RolloutConfig(max_steps=0)
    with pytest.raises(ValueError):
        rollout.RolloutConfig(dt=-0.01)
    with pytest.raises(ValueError):
        rollout.RolloutConfig(tol_pos=0.0)
    with pytest.raises(ValueError):
        rollout.Perturbation(step=-1, delta_p=np.zeros(3))
    with pytest.raises(ValueError):
        rollout.Perturbation(step=0, delta_p=np.zeros(2))
    with pytest.raises(ValueError):
        rollout.RolloutConfig(
            max_steps=10,
            perturbations=(rollout.Perturbation(step=10, delta_p=np.zeros(3)),),
        )
