"""Riemannian geometry of the unit-quaternion sphere S^3.

Quaternions are stored w-first, ``(w, x, y, z)``, and treated as points on
the unit sphere in R^4.  Antipodal quaternions q and -q describe the same
rotation (double cover); functions that fold or compare across the cover say
so explicitly.  Tangent vectors are kept in ambient R^4 coordinates and are
orthogonal to their base point.

Conventions used throughout:

* geodesic distance  d(p, q) = arccos(<p, q>), in [0, pi]
* log map            log_p(q) = d(p, q) * (q - <p, q> p) / ||q - <p, q> p||
* exp map            exp_p(v) = cos(||v||) p + sin(||v||) v / ||v||
* parallel transport along the p->q geodesic
                     G(v) = v - <log_p(q), v> / d^2 * (log_p(q) + log_q(p))

Batch helpers operate on ``(N, 4)`` float arrays and are the fast paths the
rest of the package uses internally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    AntipodalError,
    EmptySequenceError,
    InsufficientDataError,
    NoConvergenceError,
)

# Pairs closer than this to antipodal are rejected by the log map.
ANTIPODAL_MARGIN = 1e-6
# Below this, angles/vector norms are treated as exactly zero.
TINY = 1e-12


def _clip_unit(x):
    return np.clip(x, -1.0, 1.0)


def _lex_sign(arr: np.ndarray) -> float:
    """Sign of the first nonzero entry (+1 for the zero vector)."""
    for value in arr:
        if value > 0.0:
            return 1.0
        if value < 0.0:
            return -1.0
    return 1.0


class UnitQuaternion:
    """Unit quaternion (w, x, y, z) on S^3.

    The stored array is renormalized at construction whenever its squared
    norm strays from 1 by more than 1e-14, so products and file round trips
    keep ``|1 - ||q||| < 1e-9`` without churning bits that are already unit.
    """

    __slots__ = ("_arr",)

    def __init__(self, w: float, x: float, y: float, z: float):
        arr = np.array([w, x, y, z], dtype=float)
        n2 = float(arr @ arr)
        if not math.isfinite(n2) or n2 <= 0.0:
            raise ValueError(f"cannot normalize quaternion with norm^2 {n2}")
        if abs(n2 - 1.0) > 1e-14:
            arr /= math.sqrt(n2)
        arr.flags.writeable = False
        self._arr = arr

    @classmethod
    def from_array(cls, arr) -> "UnitQuaternion":
        a = np.asarray(arr, dtype=float)
        if a.shape != (4,):
            raise ValueError(f"expected shape (4,), got {a.shape}")
        return cls(a[0], a[1], a[2], a[3])

    @classmethod
    def identity(cls) -> "UnitQuaternion":
        return cls(1.0, 0.0, 0.0, 0.0)

    @classmethod
    def from_axis_angle(cls, axis, angle: float) -> "UnitQuaternion":
        """Rotation of ``angle`` radians about ``axis`` (need not be unit)."""
        ax = np.asarray(axis, dtype=float)
        n = float(np.linalg.norm(ax))
        if n < TINY:
            raise ValueError("rotation axis has zero length")
        half = 0.5 * angle
        s = math.sin(half) / n
        return cls(math.cos(half), ax[0] * s, ax[1] * s, ax[2] * s)

    @property
    def array(self) -> np.ndarray:
        """Read-only (4,) view of (w, x, y, z)."""
        return self._arr

    @property
    def w(self) -> float:
        return float(self._arr[0])

    @property
    def x(self) -> float:
        return float(self._arr[1])

    @property
    def y(self) -> float:
        return float(self._arr[2])

    @property
    def z(self) -> float:
        return float(self._arr[3])

    def conjugate(self) -> "UnitQuaternion":
        w, x, y, z = self._arr
        return UnitQuaternion(w, -x, -y, -z)

    def __mul__(self, other: "UnitQuaternion") -> "UnitQuaternion":
        """Hamilton product self * other."""
        if not isinstance(other, UnitQuaternion):
            return NotImplemented
        w1, x1, y1, z1 = self._arr
        w2, x2, y2, z2 = other._arr
        return UnitQuaternion(
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        )

    def __neg__(self) -> "UnitQuaternion":
        w, x, y, z = self._arr
        return UnitQuaternion(-w, -x, -y, -z)

    def dot(self, other: "UnitQuaternion") -> float:
        return float(self._arr @ other._arr)

    def same_rotation(self, other: "UnitQuaternion", tol: float = 1e-9) -> bool:
        """True when the two quaternions encode the same rotation: |<p,q>| > 1 - tol."""
        return abs(self.dot(other)) > 1.0 - tol

    def __repr__(self) -> str:
        w, x, y, z = self._arr
        return f"UnitQuaternion({w:.9g}, {x:.9g}, {y:.9g}, {z:.9g})"


@dataclass(frozen=True, eq=False)
class TangentVector:
    """Tangent vector at ``base``, as an ambient (4,) array orthogonal to it."""

    base: UnitQuaternion
    v: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.v, dtype=float)
        if v.shape != (4,):
            raise ValueError(f"tangent vector must have shape (4,), got {v.shape}")
        n = float(np.linalg.norm(v))
        if abs(float(v @ self.base.array)) > 1e-9 * max(1.0, n):
            raise ValueError("tangent vector is not orthogonal to its base point")
        object.__setattr__(self, "v", v)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.v))


@dataclass(frozen=True)
class AngularVelocity:
    """Body-frame angular velocity in rad/s."""

    wx: float
    wy: float
    wz: float
    frame: str = field(default="body", init=False)

    @classmethod
    def from_array(cls, arr) -> "AngularVelocity":
        a = np.asarray(arr, dtype=float)
        return cls(float(a[0]), float(a[1]), float(a[2]))

    @property
    def array(self) -> np.ndarray:
        return np.array([self.wx, self.wy, self.wz])

    @property
    def norm(self) -> float:
        return math.sqrt(self.wx**2 + self.wy**2 + self.wz**2)


# ---------------------------------------------------------------------------
# scalar operations


def geodesic_distance(p: UnitQuaternion, q: UnitQuaternion) -> float:
    """Arc length between points of S^3: arccos(<p, q>), in [0, pi].

    This is a distance between quaternions, not rotations; q and -q are at
    distance pi from each other.
    """
    return float(np.arccos(_clip_unit(p.dot(q))))


def rotation_distance(p: UnitQuaternion, q: UnitQuaternion) -> float:
    """Distance with the double cover folded: arccos(|<p, q>|), in [0, pi/2]."""
    return float(np.arccos(_clip_unit(abs(p.dot(q)))))


def log_map(base: UnitQuaternion, q: UnitQuaternion) -> TangentVector:
    """Riemannian log of q at base; raises AntipodalError near d = pi."""
    v = log_rows(base.array, q.array[None, :])[0]
    return TangentVector(base, v)


def exp_map(tangent: TangentVector) -> UnitQuaternion:
    """Riemannian exp; returns the base point exactly when ||v|| < 1e-12."""
    v = tangent.v
    theta = float(np.linalg.norm(v))
    if theta < TINY:
        return tangent.base
    out = math.cos(theta) * tangent.base.array + (math.sin(theta) / theta) * v
    return UnitQuaternion.from_array(out)


def parallel_transport(tangent: TangentVector, dest: UnitQuaternion) -> TangentVector:
    """Transport ``tangent`` along the geodesic from its base to ``dest``.

    Norm-preserving; components orthogonal to the geodesic plane are left
    untouched.  Transporting to the base itself is the identity.
    """
    out = transport_rows(
        tangent.base.array[None, :], dest.array[None, :], tangent.v[None, :]
    )[0]
    return TangentVector(dest, out)


def displacement_to_angular_velocity(
    q1: UnitQuaternion, q2: UnitQuaternion, dt: float
) -> AngularVelocity:
    """Body-frame angular velocity that carries q1 to q2 over ``dt`` seconds.

    With dq = conj(q1) * q2 = (w, v), the rotation angle is 2*arccos(w) and
    omega = (2 / dt) * arccos(w) * v / ||v||.  A vector part below 1e-12
    yields zero angular velocity.
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    d = q1.conjugate() * q2
    vec = d.array[1:]
    n = float(np.linalg.norm(vec))
    if n < TINY:
        return AngularVelocity(0.0, 0.0, 0.0)
    scale = (2.0 / dt) * math.acos(float(_clip_unit(d.w))) / n
    return AngularVelocity(scale * vec[0], scale * vec[1], scale * vec[2])


def angular_velocity_to_increment(omega: AngularVelocity, dt: float) -> UnitQuaternion:
    """Quaternion increment for rotating at ``omega`` for ``dt`` seconds.

    Inverse of :func:`displacement_to_angular_velocity`; angular speeds below
    1e-12 give the identity.
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    speed = omega.norm
    if speed < TINY:
        return UnitQuaternion.identity()
    half = 0.5 * speed * dt
    s = math.sin(half) / speed
    return UnitQuaternion(
        math.cos(half), s * omega.wx, s * omega.wy, s * omega.wz
    )


def canonicalize_signs(quats: Sequence[UnitQuaternion]) -> list[UnitQuaternion]:
    """Fix the sign ambiguity along a trajectory.

    The first quaternion gets a non-negative leading component (w >= 0, ties
    broken by the next nonzero component); every later one is flipped if
    needed so consecutive dot products are >= 0.
    """
    arr = np.array([q.array for q in quats], dtype=float)
    out = canonicalize_sign_rows(arr)
    return [UnitQuaternion.from_array(row) for row in out]


def frechet_mean(
    quats: Sequence[UnitQuaternion], max_iter: int = 100, tol: float = 1e-10
) -> UnitQuaternion:
    """Frechet (Karcher) mean of unit quaternions.

    Signs are first folded into the hemisphere of the first element, the
    iteration starts from the renormalized Euclidean average, and stops when
    the mean tangent ||(1/N) sum log_mu(q_i)|| drops below ``tol``.
    Raises NoConvergenceError after ``max_iter`` iterations.
    """
    if len(quats) == 0:
        raise EmptySequenceError("cannot average zero quaternions")
    arr = np.array([q.array for q in quats], dtype=float)
    return UnitQuaternion.from_array(frechet_mean_rows(arr, max_iter=max_iter, tol=tol))


def tangent_covariance(
    quats: Sequence[UnitQuaternion], mean: UnitQuaternion
) -> np.ndarray:
    """Sample covariance of log_mean(q_i): (1/(N-1)) sum v_i v_i^T, shape (4, 4).

    Symmetric PSD with rank <= 3 (every v_i is orthogonal to ``mean``).
    Needs at least two samples.
    """
    if len(quats) < 2:
        raise InsufficientDataError(
            f"covariance needs at least 2 quaternions, got {len(quats)}"
        )
    arr = np.array([q.array for q in quats], dtype=float)
    v = log_rows(mean.array, arr)
    cov = v.T @ v / (len(quats) - 1)
    return 0.5 * (cov + cov.T)


# ---------------------------------------------------------------------------
# batch fast paths on (N, 4) arrays


def log_rows(base: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """Log map of each row of ``rows`` (N, 4) at a single base point (4,)."""
    dots = _clip_unit(rows @ base)
    d = np.arccos(dots)
    if np.any(d > math.pi - ANTIPODAL_MARGIN):
        raise AntipodalError("log map within 1e-6 of an antipodal pair")
    resid = rows - dots[:, None] * base[None, :]
    norms = np.linalg.norm(resid, axis=1)
    small = norms < TINY
    safe = np.where(small, 1.0, norms)
    out = (d / safe)[:, None] * resid
    out[small] = 0.0
    return out


def log_rows_pairwise(bases: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """Log map of rows[i] at bases[i], both (N, 4)."""
    dots = _clip_unit(np.einsum("nd,nd->n", bases, rows))
    d = np.arccos(dots)
    if np.any(d > math.pi - ANTIPODAL_MARGIN):
        raise AntipodalError("log map within 1e-6 of an antipodal pair")
    resid = rows - dots[:, None] * bases
    norms = np.linalg.norm(resid, axis=1)
    small = norms < TINY
    safe = np.where(small, 1.0, norms)
    out = (d / safe)[:, None] * resid
    out[small] = 0.0
    return out


def transport_rows(
    bases: np.ndarray, dests: np.ndarray, vecs: np.ndarray
) -> np.ndarray:
    """Parallel transport vecs[i] from bases[i] to dests[i], all (N, ...)."""
    bases = np.broadcast_to(bases, vecs.shape)
    dests = np.broadcast_to(dests, vecs.shape)
    lpq = log_rows_pairwise(bases, dests)
    lqp = log_rows_pairwise(dests, bases)
    d2 = np.einsum("nd,nd->n", lpq, lpq)
    small = d2 < TINY * TINY
    safe = np.where(small, 1.0, d2)
    coef = np.where(small, 0.0, np.einsum("nd,nd->n", lpq, vecs) / safe)
    out = vecs - coef[:, None] * (lpq + lqp)
    # re-pin orthogonality against accumulated rounding
    out -= np.einsum("nd,nd->n", out, dests)[:, None] * dests
    return out


def hamilton_rows(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Row-wise Hamilton product of (N, 4) arrays (w-first)."""
    w1, x1, y1, z1 = p[:, 0], p[:, 1], p[:, 2], p[:, 3]
    w2, x2, y2, z2 = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    return np.stack(
        [
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ],
        axis=1,
    )


def conjugate_rows(q: np.ndarray) -> np.ndarray:
    out = q.copy()
    out[:, 1:] = -out[:, 1:]
    return out


def normalize_rows(q: np.ndarray) -> np.ndarray:
    return q / np.linalg.norm(q, axis=1, keepdims=True)


def canonicalize_sign_rows(arr: np.ndarray) -> np.ndarray:
    """Array form of :func:`canonicalize_signs`; returns a new (N, 4) array."""
    if arr.shape[0] == 0:
        raise EmptySequenceError("cannot canonicalize an empty trajectory")
    out = arr.copy()
    out[0] *= _lex_sign(out[0])
    for i in range(1, out.shape[0]):
        if out[i] @ out[i - 1] < 0.0:
            out[i] = -out[i]
    return out


def frechet_mean_rows(
    arr: np.ndarray, max_iter: int = 100, tol: float = 1e-10
) -> np.ndarray:
    """Array form of :func:`frechet_mean` on an (N, 4) stack."""
    if arr.shape[0] == 0:
        raise EmptySequenceError("cannot average zero quaternions")
    signs = np.where(arr @ arr[0] < 0.0, -1.0, 1.0)
    pts = arr * signs[:, None]
    mu = pts.mean(axis=0)
    n = np.linalg.norm(mu)
    if n < TINY:
        raise AntipodalError("quaternions are too spread out to average")
    mu = mu / n
    for _ in range(max_iter):
        step = log_rows(mu, pts).mean(axis=0)
        theta = np.linalg.norm(step)
        if theta >= TINY:
            mu = math.cos(theta) * mu + (math.sin(theta) / theta) * step
            mu /= np.linalg.norm(mu)
        if theta < tol:
            return mu
    raise NoConvergenceError(f"Frechet mean did not converge in {max_iter} iterations")


def fold_rows(reference: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """Flip rows into the hemisphere of ``reference`` (ties keep lexicographic sign)."""
    dots = rows @ reference
    signs = np.where(dots < 0.0, -1.0, 1.0)
    ties = dots == 0.0
    if np.any(ties):
        signs = signs.copy()
        for i in np.nonzero(ties)[0]:
            signs[i] = _lex_sign(rows[i])
    return rows * signs[:, None]


def fold_sign(reference: np.ndarray, q: np.ndarray) -> float:
    """Sign that brings ``q`` into the hemisphere of ``reference``."""
    d = float(reference @ q)
    if d > 0.0:
        return 1.0
    if d < 0.0:
        return -1.0
    return _lex_sign(q)


def random_unit_quaternions(rng: np.random.Generator, n: int) -> np.ndarray:
    """(n, 4) array of quaternions uniform on S^3."""
    out = rng.normal(size=(n, 4))
    norms = np.linalg.norm(out, axis=1)
    while np.any(norms < 1e-6):
        bad = norms < 1e-6
        out[bad] = rng.normal(size=(int(bad.sum()), 4))
        norms = np.linalg.norm(out, axis=1)
    return out / norms[:, None]
