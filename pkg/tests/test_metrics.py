"""Trajectory comparison metrics: DTW position cost and quaternion error.

The DTW oracle below enumerates every monotone boundary-aligned alignment
path and takes the cheapest; the library's dynamic program must match it on
instances small enough to enumerate.
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from se3ds import manifold, metrics
from se3ds.errors import EmptySequenceError, InvalidPathError
from se3ds.manifold import TangentVector, UnitQuaternion


def _all_alignment_paths(n: int, m: int):
    """Every monotone path of index pairs from (0, 0) to (n-1, m-1)."""

    def rec(i, j):
        if i == n - 1 and j == m - 1:
            yield [(i, j)]
            return
        for di, dj in ((1, 0), (0, 1), (1, 1)):
            ii, jj = i + di, j + dj
            if ii < n and jj < m:
                for rest in rec(ii, jj):
                    yield [(i, j)] + rest

    yield from rec(0, 0)


def _brute_force_dtw(ref: np.ndarray, test: np.ndarray) -> float:
    best = math.inf
    for path in _all_alignment_paths(len(ref), len(test)):
        cost = sum(float(np.linalg.norm(ref[i] - test[j])) for i, j in path)
        best = min(best, cost)
    return best


# -- arc length ------------------------------------------------------------


def test_arc_length_polyline():
    pts = np.array([[0.0, 0.0, 0.0], [3.0, 0.0, 0.0], [3.0, 4.0, 0.0]])
    assert abs(metrics.arc_length(pts) - 7.0) < 1e-12


def test_arc_length_single_point_is_zero():
    assert metrics.arc_length(np.zeros((1, 3))) == 0.0


# -- DTW -------------------------------------------------------------------


def test_dtw_identical_sequences():
    rng = np.random.default_rng(30)
    seq = rng.normal(size=(40, 3))
    cost, path = metrics.dtw_position(seq, seq)
    assert cost == 0.0
    assert path == [(i, i) for i in range(40)]


def test_dtw_time_warp_invariance():
    rng = np.random.default_rng(31)
    seq = rng.normal(size=(15, 3))
    doubled = np.repeat(seq, 2, axis=0)
    cost, _ = metrics.dtw_position(seq, doubled)
    assert cost < 1e-12


def test_dtw_two_point_orthogonal_legs():
    # three boundary-aligned paths exist on the 2x2 grid; the diagonal one
    # costs 0 + ||(1,0,0) - (0,1,0)|| = sqrt(2) and both detours cost 1 more
    ref = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
    test = np.array([[0.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    cost, path = metrics.dtw_position(ref, test)
    assert abs(cost - math.sqrt(2.0)) < 1e-12
    assert abs(cost - _brute_force_dtw(ref, test)) < 1e-12
    assert path[0] == (0, 0) and path[-1] == (1, 1)


def test_dtw_matches_brute_force_on_random_instances():
    rng = np.random.default_rng(32)
    for _ in range(20):
        ref = rng.normal(size=(4, 3))
        test = rng.normal(size=(5, 3))
        cost, path = metrics.dtw_position(ref, test)
        assert abs(cost - _brute_force_dtw(ref, test)) < 1e-12
        # returned path is monotone, boundary-aligned, and prices to cost
        assert path[0] == (0, 0) and path[-1] == (3, 4)
        steps = set(
            (i2 - i1, j2 - j1) for (i1, j1), (i2, j2) in zip(path[:-1], path[1:])
        )
        assert steps <= {(1, 0), (0, 1), (1, 1)}
        priced = sum(float(np.linalg.norm(ref[i] - test[j])) for i, j in path)
        assert abs(priced - cost) < 1e-12


def test_dtw_is_symmetric():
    rng = np.random.default_rng(33)
    a = rng.normal(size=(12, 3))
    b = rng.normal(size=(17, 3))
    assert abs(metrics.dtw_position(a, b)[0] - metrics.dtw_position(b, a)[0]) < 1e-12


def test_dtw_zero_cost_iff_matched_pairs_coincide():
    a = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
    b = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
    cost, path = metrics.dtw_position(a, b)
    assert cost < 1e-12
    for i, j in path:
        assert np.allclose(a[i], b[j])


def test_dtw_rejects_empty_and_mismatched():
    with pytest.raises(EmptySequenceError):
        metrics.dtw_position(np.zeros((0, 3)), np.zeros((4, 3)))
    with pytest.raises(ValueError):
        metrics.dtw_position(np.zeros((4, 2)), np.zeros((4, 3)))


# -- quaternion error --------------------------------------------------------


def _diag_path(n: int):
    return [(i, i) for i in range(n)]


def test_quaternion_error_zero_for_identical():
    rng = np.random.default_rng(34)
    qs = manifold.random_unit_quaternions(rng, 10)
    assert metrics.quaternion_error(qs, qs, _diag_path(10)) < 1e-15


def test_quaternion_error_zero_across_double_cover():
    rng = np.random.default_rng(35)
    qs = manifold.random_unit_quaternions(rng, 10)
    assert metrics.quaternion_error(qs, -qs, _diag_path(10)) < 1e-12


def test_quaternion_error_constant_ten_degree_offset():
    # rotating every reference by 10 degrees about a fixed axis must read
    # back as exactly 10 degrees of mean rotation angle
    rng = np.random.default_rng(36)
    angle = math.radians(10.0)
    offset = UnitQuaternion.from_axis_angle([0.0, 1.0, 0.0], angle)
    ref = manifold.random_unit_quaternions(rng, 50)
    test = np.array(
        [(UnitQuaternion.from_array(q) * offset).array for q in ref]
    )
    err = metrics.quaternion_error(ref, test, _diag_path(50))
    assert abs(err - angle) < 1e-9


def test_quaternion_error_sign_flip_invariance():
    rng = np.random.default_rng(37)
    ref = manifold.random_unit_quaternions(rng, 20)
    test = manifold.random_unit_quaternions(rng, 20)
    base = metrics.quaternion_error(ref, test, _diag_path(20))
    flips = np.where(rng.random(20) < 0.5, -1.0, 1.0)[:, None]
    assert abs(metrics.quaternion_error(ref, flips * test, _diag_path(20)) - base) < 1e-12


def test_quaternion_error_range():
    rng = np.random.default_rng(38)
    ref = manifold.random_unit_quaternions(rng, 30)
    test = manifold.random_unit_quaternions(rng, 30)
    err = metrics.quaternion_error(ref, test, _diag_path(30))
    assert 0.0 <= err <= math.pi


def test_quaternion_error_rejects_bad_paths():
    rng = np.random.default_rng(39)
    qs = manifold.random_unit_quaternions(rng, 5)
    with pytest.raises(InvalidPathError):
        metrics.quaternion_error(qs, qs, [])
    with pytest.raises(InvalidPathError):
        metrics.quaternion_error(qs, qs, [(0, 7)])
