"""Demonstrations and their conversion into regression data.

A demonstration is a timestamped sequence of poses (position + unit
quaternion).  Preprocessing produces, per sample i:

* orientation feature   f_i = log_att(q_i)                 (tangent at the attractor)
* orientation target    y_i = transport_{q_i -> att}(log_{q_i}(q_i_next))
* position velocity     central finite differences on the recorded timestamps

where q_i_next is reconstructed through the body angular velocity
(dq = conj(q_i) q_{i+1}, omega = 2 arccos(w) v / (dt ||v||)) and the exact
quaternion increment, so the target construction round-trips the recorded
next sample.  The final sample of each demo gets zero feature and target:
the demo is treated as exactly at rest on the attractor there.

Attractors are the Euclidean mean of final positions and the Frechet mean of
final orientations.  Quaternion signs are canonicalized per trajectory, then
whole demos are flipped so every final quaternion shares the first demo's
hemisphere (without this the final-orientation average would mix sheets of
the double cover).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import manifold
from .errors import TooShortError
from .manifold import UnitQuaternion

MIN_DEMO_SAMPLES = 3


@dataclass
class Demonstration:
    """One recorded trajectory: times (N,), positions (N, 3), quaternions (N, 4)."""

    times: np.ndarray
    positions: np.ndarray
    quaternions: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.positions = np.asarray(self.positions, dtype=float)
        self.quaternions = np.asarray(self.quaternions, dtype=float)
        n = self.times.shape[0]
        if self.times.ndim != 1 or self.positions.shape != (n, 3) or self.quaternions.shape != (n, 4):
            raise ValueError(
                f"inconsistent shapes: times {self.times.shape}, "
                f"positions {self.positions.shape}, quaternions {self.quaternions.shape}"
            )
        if n >= 2 and np.any(np.diff(self.times) <= 0.0):
            raise ValueError("timestamps must be strictly increasing")
        norms = np.linalg.norm(self.quaternions, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-6):
            raise ValueError("quaternion rows deviate from unit norm by more than 1e-6")
        self.quaternions = self.quaternions / norms[:, None]

    def __len__(self) -> int:
        return self.times.shape[0]


@dataclass
class PreprocessedDataset:
    """Flattened training arrays for all demos, plus the shared attractors.

    ``quaternions`` are sign-canonicalized; ``features``/``ori_targets`` are
    tangent vectors at the attractor orientation (rows orthogonal to it);
    ``demo_index[i]`` says which demo sample i came from.
    """

    positions: np.ndarray      # (N, 3)
    quaternions: np.ndarray    # (N, 4)
    features: np.ndarray       # (N, 4)
    ori_targets: np.ndarray    # (N, 4)
    velocities: np.ndarray     # (N, 3)
    demo_index: np.ndarray     # (N,)
    attractor_pos: np.ndarray  # (3,)
    attractor_ori: UnitQuaternion
    dt: float
    demo_slices: list[slice] = field(default_factory=list)

    def __len__(self) -> int:
        return self.positions.shape[0]

    @property
    def n_demos(self) -> int:
        return len(self.demo_slices)

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        """(min, max) corners of the demo positions."""
        return self.positions.min(axis=0), self.positions.max(axis=0)


def _velocities(times: np.ndarray, positions: np.ndarray) -> np.ndarray:
    """Central differences on the recorded timestamps, one-sided at both ends."""
    v = np.empty_like(positions)
    v[0] = (positions[1] - positions[0]) / (times[1] - times[0])
    v[-1] = (positions[-1] - positions[-2]) / (times[-1] - times[-2])
    if len(times) > 2:
        span = (times[2:] - times[:-2])[:, None]
        v[1:-1] = (positions[2:] - positions[:-2]) / span
    return v


def _orientation_targets(
    quats: np.ndarray, times: np.ndarray, attractor: np.ndarray
) -> np.ndarray:
    """Transported next-step displacement for each sample; zeros for the last."""
    n = quats.shape[0]
    targets = np.zeros((n, 4))
    cur, nxt = quats[:-1], quats[1:]
    dts = (times[1:] - times[:-1])[:, None]

    # body-frame displacement over one recorded step, via the angular-velocity
    # round trip (omega from dq, then the exact increment back)
    dq = manifold.hamilton_rows(manifold.conjugate_rows(cur), nxt)
    vec = dq[:, 1:]
    vnorm = np.linalg.norm(vec, axis=1)
    angle = 2.0 * np.arccos(np.clip(dq[:, 0], -1.0, 1.0))
    still = vnorm < manifold.TINY
    axis = vec / np.where(still, 1.0, vnorm)[:, None]
    axis[still] = 0.0
    angle = np.where(still, 0.0, angle)
    half = 0.5 * angle
    inc = np.concatenate([np.cos(half)[:, None], np.sin(half)[:, None] * axis], axis=1)
    desired = manifold.hamilton_rows(cur, inc)  # equals quats[1:] by construction
    desired = manifold.normalize_rows(desired)

    body = manifold.log_rows_pairwise(cur, desired)
    att = np.broadcast_to(attractor, cur.shape)
    targets[:-1] = manifold.transport_rows(cur, att, body)
    return targets


def preprocess(
    demos: list[Demonstration],
    dt: float,
    attractor_pos: np.ndarray | None = None,
    attractor_ori: UnitQuaternion | None = None,
) -> PreprocessedDataset:
    """Build the regression dataset shared by the mixture and the policy fits.

    Args:
        demos: at least one demonstration, each with >= 3 samples.
        dt: nominal sampling period, carried through to the learned policy.
        attractor_pos: goal position override; defaults to the mean final
            demo position.
        attractor_ori: goal orientation override; defaults to the Frechet
            mean of the final demo orientations.

    Raises:
        TooShortError: a demo has fewer than 3 samples.
        AntipodalError: a sample is (numerically) antipodal to the attractor.
    """
    if not demos:
        raise TooShortError("need at least one demonstration")
    for i, demo in enumerate(demos):
        if len(demo) < MIN_DEMO_SAMPLES:
            raise TooShortError(
                f"demo {i} has {len(demo)} samples; need at least {MIN_DEMO_SAMPLES}"
            )
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")

    canonical = [manifold.canonicalize_sign_rows(d.quaternions) for d in demos]
    # keep every demo's final orientation in one hemisphere (the supplied
    # attractor's, else the first demo's) so the goal average and the tangent
    # charts do not straddle the double cover
    anchor = attractor_ori.array if attractor_ori is not None else canonical[0][-1]
    for i in range(len(canonical)):
        if canonical[i][-1] @ anchor < 0.0:
            canonical[i] = -canonical[i]

    derived_ori = attractor_ori is None
    if derived_ori:
        finals = np.array([q[-1] for q in canonical])
        attractor_ori = UnitQuaternion.from_array(manifold.frechet_mean_rows(finals))
    if attractor_pos is None:
        attractor_pos = np.mean([d.positions[-1] for d in demos], axis=0)
    else:
        attractor_pos = np.asarray(attractor_pos, dtype=float)
        if attractor_pos.shape != (3,):
            raise ValueError(
                f"attractor_pos must have shape (3,), got {attractor_pos.shape}"
            )
    att = attractor_ori.array

    feats, targets, vels, idx, slices = [], [], [], [], []
    offset = 0
    for i, demo in enumerate(demos):
        quats = canonical[i]
        f = manifold.log_rows(att, quats)
        if derived_ori:
            f[-1] = 0.0  # terminal sample defines the attractor, so it sits on it
        feats.append(f)
        targets.append(_orientation_targets(quats, demo.times, att))
        vels.append(_velocities(demo.times, demo.positions))
        idx.append(np.full(len(demo), i))
        slices.append(slice(offset, offset + len(demo)))
        offset += len(demo)

    return PreprocessedDataset(
        positions=np.concatenate([d.positions for d in demos]),
        quaternions=np.concatenate(canonical),
        features=np.concatenate(feats),
        ori_targets=np.concatenate(targets),
        velocities=np.concatenate(vels),
        demo_index=np.concatenate(idx),
        attractor_pos=attractor_pos,
        attractor_ori=attractor_ori,
        dt=dt,
        demo_slices=slices,
    )
