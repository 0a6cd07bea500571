"""Synthetic demonstration tasks with known attractors and segmentation.

Three task families, each producing a handful of smooth demos that end
exactly on a shared attractor pose:

* ``arc-rotate``: position sweeps along a planar arc while the orientation
  rotates about a single fixed axis.
* ``two-segment``: an L-shaped position path with a rounded corner; the
  orientation first unwinds a rotation about z, then (second leg) a rotation
  about x — two phases with orthogonal rotation axes and known per-sample
  labels.
* ``pour-like``: a bowed approach path with a large monotone tilt about y
  that unwinds into the pouring attitude in step with the approach (no
  orientation is visited twice).

Every demo follows a normalized exponential decay profile g(s) with
g(0) = 1, g(1) = 0, so per-demo jitter multiplied by g fades out and the
final sample lands on the attractor regardless of the jitter or the noise
level (noise is also faded near the end).  Generation is deterministic for a
fixed (task, n_demos, n_samples, noise, seed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import manifold
from .manifold import UnitQuaternion
from .preprocess import Demonstration

TASKS = ("arc-rotate", "two-segment", "pour-like")

DEFAULT_DT = 0.01
DEFAULT_DEMOS = 3
DEFAULT_SAMPLES = 500


@dataclass
class SyntheticTask:
    name: str
    demos: list[Demonstration]
    labels: list[np.ndarray]          # per-demo (N,) segment ids
    attractor_pos: np.ndarray
    attractor_ori: UnitQuaternion
    dt: float


def _decay(s: np.ndarray, rate: float = 7.0) -> np.ndarray:
    """Normalized exponential ease-out: 1 at s=0, exactly 0 at s=1."""
    return (np.exp(-rate * s) - math.exp(-rate)) / (1.0 - math.exp(-rate))


def _axis_rows(axis, half_angles: np.ndarray) -> np.ndarray:
    """(N, 4) rotations about a fixed unit axis with the given half-angles."""
    ax = np.asarray(axis, dtype=float)
    ax = ax / np.linalg.norm(ax)
    return np.concatenate(
        [np.cos(half_angles)[:, None], np.sin(half_angles)[:, None] * ax[None, :]],
        axis=1,
    )


def _smooth_field(rng: np.random.Generator, s: np.ndarray, n_channels: int) -> np.ndarray:
    """(N, n_channels) smooth zero-mean random curves with unit std-dev.

    A short random Fourier series keeps the jitter band-limited, so finite
    differences of the noisy samples still look like velocities instead of
    white noise scaled by 1/dt.
    """
    harmonics = np.arange(1, 5, dtype=float)
    phases = rng.uniform(0.0, 2.0 * math.pi, size=(4, n_channels))
    coeffs = rng.standard_normal((4, n_channels)) / np.sqrt(harmonics)[:, None]
    basis = np.sin(math.pi * s[:, None, None] * harmonics[None, :, None] + phases[None, :, :])
    field = np.einsum("nhc,hc->nc", basis, coeffs)
    return field / math.sqrt(0.5 * float(np.sum(1.0 / harmonics)))


def _apply_noise(
    rng: np.random.Generator,
    positions: np.ndarray,
    quats: np.ndarray,
    noise: float,
    s: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    if noise <= 0.0:
        return positions, quats
    fade = np.minimum(1.0, 5.0 * (1.0 - s))  # full noise early, zero at the end
    positions = positions + noise * _smooth_field(rng, s, 3) * fade[:, None]
    rotvec = noise * _smooth_field(rng, s, 3) * fade[:, None]
    angles = np.linalg.norm(rotvec, axis=1)
    axes = np.divide(rotvec, angles[:, None], out=np.zeros_like(rotvec), where=angles[:, None] > 0)
    half = 0.5 * angles
    wobble = np.concatenate([np.cos(half)[:, None], np.sin(half)[:, None] * axes], axis=1)
    quats = manifold.normalize_rows(manifold.hamilton_rows(wobble, quats))
    return positions, quats


def _arc_rotate(rng, n_demos, n_samples, noise, dt):
    p_att = np.array([0.42, 0.10, 0.20])
    q_att = UnitQuaternion.from_axis_angle([0.2, 1.0, 0.3], 0.5)
    center = np.array([0.10, 0.10, 0.20])
    radius = float(np.linalg.norm(p_att[:2] - center[:2]))
    phi_end = math.atan2(p_att[1] - center[1], p_att[0] - center[0])

    demos, labels = [], []
    s = np.linspace(0.0, 1.0, n_samples)
    for _ in range(n_demos):
        g = _decay(s)
        dphi = 1.1 * (1.0 + 0.08 * (rng.random() - 0.5))
        height = 0.15 * (1.0 + 0.10 * (rng.random() - 0.5))
        wobble = 0.015 * rng.standard_normal(3)
        phi = phi_end + dphi * g
        pos = np.stack(
            [
                center[0] + radius * np.cos(phi),
                center[1] + radius * np.sin(phi),
                p_att[2] + height * g,
            ],
            axis=1,
        )
        pos += wobble[None, :] * g[:, None]
        theta0 = 1.2 * (1.0 + 0.06 * (rng.random() - 0.5))
        rot = _axis_rows([0.0, 0.0, 1.0], 0.5 * theta0 * g)
        quats = manifold.hamilton_rows(rot, np.tile(q_att.array, (n_samples, 1)))
        pos, quats = _apply_noise(rng, pos, quats, noise, s)
        demos.append(Demonstration(np.arange(n_samples) * dt, pos, quats))
        labels.append(np.zeros(n_samples, dtype=int))
    return demos, labels, p_att, q_att


def _smoothstep(u: np.ndarray) -> np.ndarray:
    u = np.clip(u, 0.0, 1.0)
    return u * u * (3.0 - 2.0 * u)


def _two_segment(rng, n_demos, n_samples, noise, dt):
    """L-shaped approach: two constant-speed legs meeting at a rounded corner.

    Each phase occupies a compact neighbourhood in pose space and pairs the
    position leg with its own rotation axis: leg 1 unwinds a small z-twist
    while holding a constant x-tilt, leg 2 unwinds the x-tilt.  Both angles
    decline linearly in step with the position, so every sample of a phase
    shares one coherent pose regime and the two phases have orthogonal
    rotation axes and well-separated orientation signatures.
    """
    p_att = np.array([0.10, 0.06, 0.12])
    q_att = UnitQuaternion.from_axis_angle([1.0, 0.2, 0.0], 0.4)
    u1 = np.array([1.0, 0.2, 0.3])
    u1 /= np.linalg.norm(u1)
    u2 = np.array([0.15, 1.0, 0.2])
    u2 /= np.linalg.norm(u2)
    corner = p_att + 0.085 * u2
    start = corner + 0.085 * u1

    demos, labels = [], []
    s = np.linspace(0.0, 1.0, n_samples)
    first = s < 0.5
    for _ in range(n_demos):
        delta = 0.002 * rng.standard_normal(3)
        alpha0 = 0.14 * (1.0 + 0.03 * (rng.random() - 0.5))
        beta0 = 0.12 * (1.0 + 0.05 * (rng.random() - 0.5))

        h1 = 1.0 - s / 0.5                            # constant-speed approach
        h2 = 1.0 - (s - 0.5) / 0.5                    # constant-speed run to goal
        leg1 = corner + (start + delta - corner)[None, :] * h1[:, None]
        leg2 = p_att + (corner - p_att)[None, :] * h2[:, None]
        pos = np.where(first[:, None], leg1, leg2)
        # quadratic-Bezier blend rounds the corner; tangents match the legs
        # exactly at both ends of the blend window
        zone = (s >= 0.40) & (s <= 0.60)
        u = ((s[zone] - 0.40) / 0.20)[:, None]
        entry = corner + (start + delta - corner) * (1.0 - 0.40 / 0.5)
        exit_ = p_att + (corner - p_att) * (1.0 - (0.60 - 0.5) / 0.5)
        pos[zone] = (
            (1.0 - u) ** 2 * entry[None, :]
            + 2.0 * u * (1.0 - u) * corner[None, :]
            + u**2 * exit_[None, :]
        )

        # one rotation per leg: the z-twist unwinds across the approach, the
        # x-tilt across the run to the goal.  Both ease out exponentially,
        # which a linear map can realize without overshooting through zero,
        # and the tilt starts coming off a touch before the turn so that
        # neither regime pins a variable the other one has to move
        beta = beta0 * _decay(np.clip(s / 0.5, 0.0, 1.0))
        alpha = alpha0 * _decay(np.clip((s - 0.45) / 0.55, 0.0, 1.0), rate=3.0)
        rz = _axis_rows([0.0, 0.0, 1.0], 0.5 * beta)
        rx = _axis_rows([1.0, 0.0, 0.0], 0.5 * alpha)
        quats = manifold.hamilton_rows(
            manifold.hamilton_rows(rz, rx), np.tile(q_att.array, (n_samples, 1))
        )
        pos, quats = _apply_noise(rng, pos, quats, noise, s)
        demos.append(Demonstration(np.arange(n_samples) * dt, pos, quats))
        labels.append(np.where(first, 0, 1).astype(int))
    return demos, labels, p_att, q_att


def _pour_like(rng, n_demos, n_samples, noise, dt):
    p_att = np.array([0.30, -0.15, 0.25])
    q_att = UnitQuaternion.from_axis_angle([0.0, 0.3, 1.0], 0.6)
    start = np.array([0.05, 0.30, 0.45])
    bow = np.array([0.05, -0.10, 0.12])

    demos, labels = [], []
    s = np.linspace(0.0, 1.0, n_samples)
    first = s < 0.5
    for _ in range(n_demos):
        delta = 0.02 * rng.standard_normal(3)
        g = _decay(s)
        pos = p_att + (start - p_att + delta)[None, :] * g[:, None]
        pos += bow[None, :] * (4.0 * g * (1.0 - g))[:, None]

        # tilt rides the same decay as the position so the pose advances
        # as one coherent motion instead of position finishing first
        theta0 = 1.25 * (1.0 + 0.05 * (rng.random() - 0.5))
        theta = theta0 * g
        rot = _axis_rows([0.0, 1.0, 0.0], 0.5 * theta)
        quats = manifold.hamilton_rows(rot, np.tile(q_att.array, (n_samples, 1)))
        pos, quats = _apply_noise(rng, pos, quats, noise, s)
        demos.append(Demonstration(np.arange(n_samples) * dt, pos, quats))
        labels.append(np.where(first, 0, 1).astype(int))
    return demos, labels, p_att, q_att


_GENERATORS = {
    "arc-rotate": _arc_rotate,
    "two-segment": _two_segment,
    "pour-like": _pour_like,
}


def generate(
    task: str,
    n_demos: int = DEFAULT_DEMOS,
    n_samples: int = DEFAULT_SAMPLES,
    noise: float = 0.0,
    seed: int = 0,
    dt: float = DEFAULT_DT,
) -> SyntheticTask:
    """Generate one synthetic task.

    Args:
        task: one of ``TASKS``.
        n_demos: number of demonstrations (>= 1).
        n_samples: samples per demonstration (>= 3).
        noise: standard deviation of the positional jitter in meters and of
            the orientation wobble angle in radians (faded to zero near the
            attractor so final samples stay on it).
        seed: RNG seed; equal seeds give identical demos.
    """
    if task not in _GENERATORS:
        raise ValueError(f"unknown task {task!r}; choose from {TASKS}")
    if n_demos < 1:
        raise ValueError(f"n_demos must be >= 1, got {n_demos}")
    if n_samples < 3:
        raise ValueError(f"n_samples must be >= 3, got {n_samples}")
    if noise < 0.0:
        raise ValueError(f"noise must be >= 0, got {noise}")
    rng = np.random.default_rng(seed)
    demos, labels, p_att, q_att = _GENERATORS[task](rng, n_demos, n_samples, noise, dt)
    return SyntheticTask(
        name=task,
        demos=demos,
        labels=labels,
        attractor_pos=p_att,
        attractor_ori=q_att,
        dt=dt,
    )
