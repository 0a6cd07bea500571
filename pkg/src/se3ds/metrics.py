"""Trajectory similarity metrics.

``dtw_position`` is classic dynamic time warping over Euclidean distances
with the full window: boundary-aligned monotone alignment, cost = sum of the
matched pairwise distances, path returned for reuse.  ``quaternion_error``
averages the relative rotation angle over a given alignment path, so a
constant 10-degree offset scores 10 degrees regardless of which sheet of the
double cover either trajectory lives on.
"""

from __future__ import annotations

import numpy as np

from .errors import EmptySequenceError, InvalidPathError

Path = list[tuple[int, int]]


def arc_length(points: np.ndarray) -> float:
    """Total polyline length of an (N, d) point sequence."""
    points = np.asarray(points, dtype=float)
    if points.shape[0] < 2:
        return 0.0
    return float(np.linalg.norm(np.diff(points, axis=0), axis=1).sum())


def dtw_position(ref: np.ndarray, test: np.ndarray) -> tuple[float, Path]:
    """Dynamic time warping between two position sequences.

    Args:
        ref: (N, 3) reference positions.
        test: (M, 3) positions to align against the reference.

    Returns:
        (cost, path): cost is the sum of Euclidean distances over the optimal
        alignment; path is the list of (ref index, test index) pairs from
        (0, 0) to (N - 1, M - 1), monotone in both indices.
    """
    ref = np.asarray(ref, dtype=float)
    test = np.asarray(test, dtype=float)
    if ref.ndim != 2 or test.ndim != 2 or ref.shape[1] != test.shape[1]:
        raise ValueError(f"incompatible shapes {ref.shape} and {test.shape}")
    n, m = ref.shape[0], test.shape[0]
    if n == 0 or m == 0:
        raise EmptySequenceError("cannot align an empty trajectory")

    # explicit coordinate differences: the dot-product expansion of the same
    # quantity cancels catastrophically and reports ~1e-7 for identical points
    dist = np.linalg.norm(ref[:, None, :] - test[None, :, :], axis=2)

    cost = np.full((n + 1, m + 1), np.inf)
    cost[0, 0] = 0.0
    for i in range(1, n + 1):
        row = cost[i]
        prev = cost[i - 1]
        d = dist[i - 1]
        for j in range(1, m + 1):
            best = prev[j - 1]
            if prev[j] < best:
                best = prev[j]
            if row[j - 1] < best:
                best = row[j - 1]
            row[j] = d[j - 1] + best

    path: Path = []
    i, j = n, m
    while i > 1 or j > 1:
        path.append((i - 1, j - 1))
        if i == 1:
            j -= 1
        elif j == 1:
            i -= 1
        else:
            diag, up, left = cost[i - 1, j - 1], cost[i - 1, j], cost[i, j - 1]
            if diag <= up and diag <= left:
                i, j = i - 1, j - 1
            elif up <= left:
                i -= 1
            else:
                j -= 1
    path.append((0, 0))
    path.reverse()
    return float(cost[n, m]), path


def quaternion_error(ref_q: np.ndarray, test_q: np.ndarray, path: Path) -> float:
    """Mean rotation angle between aligned orientations, in [0, pi].

    The angle is 2 * arccos(|<ref_i, test_j>|) — the relative rotation with
    the sign ambiguity folded (minimum over q and -q) — but it is computed in
    the equivalent chord form 4 * arcsin(min(|r - t|, |r + t|) / 2), which is
    exact at zero where arccos of a dot product cannot resolve below ~1e-8.
    """
    ref_q = np.asarray(ref_q, dtype=float)
    test_q = np.asarray(test_q, dtype=float)
    if len(path) == 0:
        raise InvalidPathError("alignment path is empty")
    idx = np.asarray(path, dtype=int)
    if idx.ndim != 2 or idx.shape[1] != 2:
        raise InvalidPathError("path must be a list of (i, j) pairs")
    if (
        idx[:, 0].min() < 0
        or idx[:, 1].min() < 0
        or idx[:, 0].max() >= ref_q.shape[0]
        or idx[:, 1].max() >= test_q.shape[0]
    ):
        raise InvalidPathError("path indexes outside the given trajectories")
    r = ref_q[idx[:, 0]]
    t = test_q[idx[:, 1]]
    chord = np.minimum(
        np.linalg.norm(r - t, axis=1), np.linalg.norm(r + t, axis=1)
    )
    return float(np.mean(4.0 * np.arcsin(np.clip(0.5 * chord, 0.0, 1.0))))
