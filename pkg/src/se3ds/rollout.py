"""Discrete-time simulation of a learned pose policy.

Each step, from state (p, q):

1. the policy's tangent prediction (at the attractor) is transported to q
   and exp-mapped there, giving the desired next orientation q_des;
2. the body angular velocity is recovered as axis-angle(conj(q) q_des) / dt
   and q advances by the exact quaternion increment (which reproduces q_des
   up to rounding);
3. position advances by explicit Euler: p + v dt.

Perturbations are teleports applied to the state right before the configured
step index.  A trace records the visited state at every step together with
that step's computed quantities; convergence is declared when both the
position distance and the folded orientation distance to the attractors drop
under their tolerances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import manifold
from .errors import AntipodalError
from .manifold import UnitQuaternion
from .policy import Se3Policy

STATUS_CONVERGED = "converged"
STATUS_MAX_STEPS = "max_steps"
STATUS_ERROR = "error"

DEFAULT_TOL_POS = 1e-2
DEFAULT_TOL_ORI = 1e-2
DEFAULT_MAX_STEPS = 5000


@dataclass(frozen=True)
class Perturbation:
    """Teleport applied before computing the given step: p += delta_p, q = q * delta_q."""

    step: int
    delta_p: np.ndarray
    delta_q: UnitQuaternion | None = None

    def __post_init__(self):
        object.__setattr__(self, "delta_p", np.asarray(self.delta_p, dtype=float))
        if self.delta_p.shape != (3,):
            raise ValueError(f"delta_p must have shape (3,), got {self.delta_p.shape}")
        if self.step < 0:
            raise ValueError(f"perturbation step must be >= 0, got {self.step}")


@dataclass
class RolloutConfig:
    max_steps: int = DEFAULT_MAX_STEPS
    dt: float | None = None          # None: use the policy's training dt
    tol_pos: float = DEFAULT_TOL_POS
    tol_ori: float = DEFAULT_TOL_ORI
    perturbations: tuple[Perturbation, ...] = ()

    def __post_init__(self):
        if self.max_steps < 1:
            raise ValueError(f"max_steps must be >= 1, got {self.max_steps}")
        if self.dt is not None and self.dt <= 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.tol_pos <= 0.0 or self.tol_ori <= 0.0:
            raise ValueError("tolerances must be positive")
        self.perturbations = tuple(self.perturbations)
        for pert in self.perturbations:
            if pert.step >= self.max_steps:
                raise ValueError(
                    f"perturbation at step {pert.step} is beyond max_steps {self.max_steps}"
                )


@dataclass
class RolloutTrace:
    """Per-step arrays (one row per visited state, n_steps + 1 rows) plus outcome."""

    times: np.ndarray        # (T,)
    positions: np.ndarray    # (T, 3)
    quaternions: np.ndarray  # (T, 4)
    velocities: np.ndarray   # (T, 3)
    omegas: np.ndarray       # (T, 3)
    gammas: np.ndarray       # (T, K)
    lyapunov: np.ndarray     # (T,)
    lyapunov_delta: np.ndarray  # (T,)
    status: str
    n_steps: int
    dt: float
    message: str = ""

    @property
    def converged(self) -> bool:
        return self.status == STATUS_CONVERGED

    def __len__(self) -> int:
        return self.times.shape[0]


def _is_converged(policy: Se3Policy, p: np.ndarray, q: np.ndarray,
                  tol_pos: float, tol_ori: float) -> bool:
    d_pos = float(np.linalg.norm(p - policy.attractor_pos))
    c = abs(float(q @ policy.mixture.attractor_ori.array))
    d_ori = math.acos(min(1.0, c))
    return d_pos < tol_pos and d_ori < tol_ori


def run(
    policy: Se3Policy,
    start_pos: np.ndarray,
    start_ori: UnitQuaternion,
    config: RolloutConfig | None = None,
) -> RolloutTrace:
    """Simulate until convergence, the step budget, or a numerical failure.

    Deterministic: equal inputs give bit-identical traces.  An AntipodalError
    raised by the policy mid-run is recorded as terminal status ``error``
    rather than propagated.
    """
    config = config or RolloutConfig()
    dt = config.dt if config.dt is not None else policy.dt
    perturb = {}
    for pert in config.perturbations:
        perturb.setdefault(pert.step, []).append(pert)

    p = np.asarray(start_pos, dtype=float).copy()
    if p.shape != (3,):
        raise ValueError(f"start position must have shape (3,), got {p.shape}")
    q = start_ori.array.copy()

    rows: list[tuple] = []
    status = STATUS_MAX_STEPS
    message = ""
    n_steps = 0

    for step_index in range(config.max_steps + 1):
        for pert in perturb.get(step_index, ()):
            p = p + pert.delta_p
            if pert.delta_q is not None:
                moved = (UnitQuaternion.from_array(q) * pert.delta_q).array
                # keep the trace on the same sheet of the double cover
                q = moved if moved @ q >= 0.0 else -moved

        try:
            gamma, _, vel, q_des = policy._desired_next_arrays(p, q)
        except AntipodalError as exc:
            status = STATUS_ERROR
            message = str(exc)
            n_steps = step_index
            break

        omega = manifold.displacement_to_angular_velocity(
            UnitQuaternion.from_array(q), UnitQuaternion.from_array(q_des), dt
        )
        v_now = policy.lyapunov_value(q)
        dv = policy.lyapunov_value(q_des) - v_now
        rows.append((step_index * dt, p.copy(), q.copy(), vel.copy(),
                     omega.array, gamma.copy(), v_now, dv))

        if _is_converged(policy, p, q, config.tol_pos, config.tol_ori):
            status = STATUS_CONVERGED
            n_steps = step_index
            break
        if step_index == config.max_steps:
            n_steps = config.max_steps
            break

        inc = manifold.angular_velocity_to_increment(omega, dt)
        q_next = (UnitQuaternion.from_array(q) * inc).array
        q = q_next if q_next @ q >= 0.0 else -q_next
        p = p + vel * dt

    k = policy.n_components
    if rows:
        times, ps, qs, vels, oms, gams, lyap, dlyap = (np.array(x) for x in zip(*rows))
    else:  # numerical failure before the first state could be recorded
        times = lyap = dlyap = np.zeros(0)
        ps = vels = oms = np.zeros((0, 3))
        qs = np.zeros((0, 4))
        gams = np.zeros((0, k))
    return RolloutTrace(
        times=times,
        positions=ps,
        quaternions=qs,
        velocities=vels,
        omegas=oms,
        gammas=gams,
        lyapunov=lyap,
        lyapunov_delta=dlyap,
        status=status,
        n_steps=n_steps,
        dt=dt,
        message=message,
    )
