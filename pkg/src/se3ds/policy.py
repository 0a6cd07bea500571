"""Stable pose dynamics: mixtures of linear maps with built-in damping.

The policy blends K linear maps with the state-dependent mixing weights:

* orientation:  y(q)    = sum_k gamma_k * A_ori_k @ log_att(q)
                (a desired one-step tangent displacement, expressed at the
                attractor), re-projected onto the attractor tangent plane
* position:     v(p)    = sum_k gamma_k * A_pos_k @ (p - p_att)
                (equivalently A p + b with b = -A p_att)

Every A is kept negative definite by construction through the
parameterization  A = -(L L^T + eps I) + S  with L lower-triangular and S
skew-symmetric, so the symmetric part satisfies sym(A) <= -eps I for
eps = 1e-4.  Fitting minimizes the summed squared residual against the
preprocessed targets by gradient descent on (L, S) with a backtracking line
search (no external solver), stopping on relative objective change < 1e-8 or
after 5000 iterations.

The Lyapunov function is V(q) = d(q_att, q)^2 with the double cover folded;
``lyapunov_difference`` evaluates V after one discrete policy step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import manifold
from .errors import DimensionMismatchError
from .manifold import TangentVector, UnitQuaternion
from .mixture import MODE_COUPLED, MixtureModel
from .preprocess import PreprocessedDataset

DEFINITENESS_MARGIN = 1e-4
MAX_ITERATIONS = 20000
RELATIVE_TOLERANCE = 1e-7
WEIGHT_CUTOFF = 1e-3

_ARMIJO = 1e-4
_MAX_BACKTRACKS = 40


def _assemble(lower: np.ndarray, skew: np.ndarray, eps: float) -> np.ndarray:
    """A_k = -(L_k L_k^T + eps I) + S_k for stacked (K, d, d) parameters."""
    d = lower.shape[-1]
    return -(lower @ lower.transpose(0, 2, 1) + eps * np.eye(d)) + skew


def fit_stable_linear_maps(
    features: np.ndarray,
    targets: np.ndarray,
    weights: np.ndarray,
    eps: float = DEFINITENESS_MARGIN,
    max_iter: int = MAX_ITERATIONS,
    rel_tol: float = RELATIVE_TOLERANCE,
) -> tuple[np.ndarray, float, bool]:
    """Weighted least squares over negative-definite maps.

    Minimizes  sum_i || sum_k w_ik A_k f_i - y_i ||^2  over A_k constrained to
    sym(A_k) <= -eps I via the Cholesky-plus-skew parameterization, starting
    from A_k = -I.

    Args:
        features: (N, d) regressor rows f_i.
        targets: (N, d) target rows y_i.
        weights: (N, K) per-sample mixing weights.

    Returns:
        (A, residual, converged): A is (K, d, d); ``converged`` is False only
        when the iteration cap was hit while the objective was still moving.
    """
    f = np.asarray(features, dtype=float)
    y = np.asarray(targets, dtype=float)
    w = np.asarray(weights, dtype=float)
    if f.ndim != 2 or f.shape != y.shape or w.shape[0] != f.shape[0]:
        raise DimensionMismatchError(
            f"shapes disagree: features {f.shape}, targets {y.shape}, weights {w.shape}"
        )
    n, d = f.shape
    k = w.shape[1]

    # weighted regressors: prediction_i = sum_k A_k @ phi_ik
    phi = w[:, :, None] * f[:, None, :]  # (N, K, d)

    tril = np.tril(np.ones((d, d)))
    lower = np.repeat((math.sqrt(1.0 - eps) * np.eye(d))[None], k, axis=0)
    skew = np.zeros((k, d, d))

    def objective(lo, sk):
        a = _assemble(lo, sk, eps)
        resid = np.einsum("kij,nkj->ni", a, phi) - y
        return float((resid * resid).sum()), resid, a

    obj, resid, a = objective(lower, skew)
    step = 1.0
    converged = False
    for _ in range(max_iter):
        grad_a = 2.0 * np.einsum("ni,nkj->kij", resid, phi)  # dJ/dA_k
        grad_sym = grad_a + grad_a.transpose(0, 2, 1)
        grad_lower = -(grad_sym @ lower) * tril
        grad_skew = 0.5 * (grad_a - grad_a.transpose(0, 2, 1))
        g2 = float((grad_lower * grad_lower).sum() + (grad_skew * grad_skew).sum())
        if g2 == 0.0:
            converged = True
            break

        step *= 2.0
        accepted = False
        for _ in range(_MAX_BACKTRACKS):
            trial_lower = lower - step * grad_lower
            trial_skew = skew - step * grad_skew
            trial_obj, trial_resid, trial_a = objective(trial_lower, trial_skew)
            if trial_obj <= obj - _ARMIJO * step * g2:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            # no descent step representable: we are at a stationary point
            converged = True
            break

        lower, skew = trial_lower, trial_skew
        drop = obj - trial_obj
        obj, resid, a = trial_obj, trial_resid, trial_a
        if drop <= rel_tol * max(obj + drop, 1e-300):
            converged = True
            break

    return a, obj, converged


@dataclass(eq=False)
class Se3Policy:
    """Learned pose dynamics: mixture + stable linear maps + attractors."""

    mixture: MixtureModel
    a_ori: np.ndarray          # (K, 4, 4)
    a_pos: np.ndarray          # (K, 3, 3)
    attractor_pos: np.ndarray  # (3,)
    dt: float
    residual_ori: float = 0.0
    residual_pos: float = 0.0
    converged_ori: bool = True
    converged_pos: bool = True
    seed: int | None = None

    def __post_init__(self):
        k = self.mixture.n_components
        self.a_ori = np.asarray(self.a_ori, dtype=float)
        self.a_pos = np.asarray(self.a_pos, dtype=float)
        self.attractor_pos = np.asarray(self.attractor_pos, dtype=float)
        if self.a_ori.shape != (k, 4, 4):
            raise DimensionMismatchError(
                f"a_ori must have shape ({k}, 4, 4), got {self.a_ori.shape}"
            )
        if self.a_pos.shape != (k, 3, 3):
            raise DimensionMismatchError(
                f"a_pos must have shape ({k}, 3, 3), got {self.a_pos.shape}"
            )
        if self.attractor_pos.shape != (3,):
            raise DimensionMismatchError("attractor_pos must have shape (3,)")
        if self.dt <= 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")

    # -- convenience ---------------------------------------------------------

    @property
    def mode(self) -> str:
        return self.mixture.mode

    @property
    def n_components(self) -> int:
        return self.mixture.n_components

    @property
    def attractor_ori(self) -> UnitQuaternion:
        return self.mixture.attractor_ori

    def _att(self) -> np.ndarray:
        return self.mixture.attractor_ori.array

    def _fold(self, q: np.ndarray) -> np.ndarray:
        return manifold.fold_sign(self._att(), q) * q

    # -- array core ----------------------------------------------------------

    def _predict_arrays(
        self, p: np.ndarray | None, q: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(gamma, orientation step y, position velocity v) at one state.

        ``q`` is folded into the attractor hemisphere first, so q and -q
        produce identical outputs.
        """
        att = self._att()
        q_eff = self._fold(np.asarray(q, dtype=float))
        feat = manifold.log_rows(att, q_eff[None, :])[0]
        gamma = self.mixture.mixing_weights(p, q_eff)
        y = np.einsum("k,kij,j->i", gamma, self.a_ori, feat)
        y -= (y @ att) * att
        if p is None:
            vel = np.zeros(3)
        else:
            offset = np.asarray(p, dtype=float) - self.attractor_pos
            vel = np.einsum("k,kij,j->i", gamma, self.a_pos, offset)
        return gamma, y, vel

    def _desired_next_arrays(
        self, p: np.ndarray | None, q: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(gamma, y, v, desired next orientation) for one discrete step.

        The predicted tangent step (at the attractor) is parallel-transported
        to the current orientation and exp-mapped there.  Transport and exp
        act on the hemisphere-folded representative — the geodesic from the
        attractor to the raw q passes arbitrarily close to the antipode when
        q sits on the far sheet — and the result is flipped back to the
        caller's sheet, so the returned orientation is always a small
        increment from q and q / -q yield mirror-image outputs of the same
        rotation.
        """
        att = self._att()
        q_arr = np.asarray(q, dtype=float)
        sign = manifold.fold_sign(att, q_arr)
        q_eff = sign * q_arr
        gamma, y, vel = self._predict_arrays(p, q_eff)
        body = manifold.transport_rows(att[None, :], q_eff[None, :], y[None, :])[0]
        theta = float(np.linalg.norm(body))
        if theta < manifold.TINY:
            q_des = q_eff.copy()
        else:
            q_des = math.cos(theta) * q_eff + (math.sin(theta) / theta) * body
            q_des /= np.linalg.norm(q_des)
        return gamma, y, vel, sign * q_des

    # -- public API ----------------------------------------------------------

    def predict_orientation_step(
        self, p: np.ndarray | None, q: UnitQuaternion
    ) -> TangentVector:
        """Desired one-step tangent displacement, expressed at the attractor."""
        _, y, _ = self._predict_arrays(p, q.array)
        return TangentVector(self.mixture.attractor_ori, y)

    def predict_position_velocity(
        self, p: np.ndarray, q: UnitQuaternion
    ) -> np.ndarray:
        """Blended linear velocity at (p, q); zero exactly at the attractor."""
        _, _, vel = self._predict_arrays(np.asarray(p, dtype=float), q.array)
        return vel

    def desired_next_orientation(
        self, p: np.ndarray | None, q: UnitQuaternion
    ) -> UnitQuaternion:
        """Orientation after one discrete policy step from q."""
        _, _, _, q_des = self._desired_next_arrays(p, q.array)
        return UnitQuaternion.from_array(q_des)

    def lyapunov_value(self, q: UnitQuaternion | np.ndarray) -> float:
        """V(q) = d(q_att, q)^2 with the double cover folded; 0 iff q = +/-q_att."""
        q_arr = q.array if isinstance(q, UnitQuaternion) else np.asarray(q, dtype=float)
        c = abs(float(q_arr @ self._att()))
        d = math.acos(min(1.0, c))
        return d * d

    def lyapunov_difference(
        self, p: np.ndarray | None, q: UnitQuaternion
    ) -> float:
        """V(next q) - V(q) across one discrete policy step from (p, q)."""
        _, _, _, q_des = self._desired_next_arrays(p, q.array)
        return self.lyapunov_value(q_des) - self.lyapunov_value(q)

    def stability_margins(self) -> tuple[float, float]:
        """Largest eigenvalue of sym(A) over all k, for (orientation, position).

        Both are <= -1e-4 by construction; exposed so callers can re-check.
        """
        ori = max(
            float(np.linalg.eigvalsh(0.5 * (a + a.T)).max()) for a in self.a_ori
        )
        pos = max(
            float(np.linalg.eigvalsh(0.5 * (a + a.T)).max()) for a in self.a_pos
        )
        return ori, pos


def learn(
    dataset: PreprocessedDataset,
    mix: MixtureModel,
    eps: float = DEFINITENESS_MARGIN,
    max_iter: int = MAX_ITERATIONS,
    rel_tol: float = RELATIVE_TOLERANCE,
    seed: int | None = None,
) -> Se3Policy:
    """Fit both stable linear-map banks against the preprocessed targets.

    The mixing weights are evaluated once per sample from ``mix`` (position
    enters only in se3 mode) and held fixed; each bank is then a weighted
    least-squares problem over constrained matrices.
    """
    positions = dataset.positions if mix.mode == MODE_COUPLED else None
    gamma = mix.mixing_rows(positions, dataset.quaternions)
    # samples essentially outside a component's support must not steer its
    # map: the joint objective would otherwise recruit far-away components
    # (scaled by a tiny weight times a large matrix entry) as helper terms
    # for rows they should never influence
    gamma = np.where(gamma < WEIGHT_CUTOFF, 0.0, gamma)

    a_ori, res_ori, conv_ori = fit_stable_linear_maps(
        dataset.features, dataset.ori_targets, gamma, eps, max_iter, rel_tol
    )
    a_pos, res_pos, conv_pos = fit_stable_linear_maps(
        dataset.positions - dataset.attractor_pos,
        dataset.velocities,
        gamma,
        eps,
        max_iter,
        rel_tol,
    )
    return Se3Policy(
        mixture=mix,
        a_ori=a_ori,
        a_pos=a_pos,
        attractor_pos=dataset.attractor_pos,
        dt=dataset.dt,
        residual_ori=res_ori,
        residual_pos=res_pos,
        converged_ori=conv_ori,
        converged_pos=conv_pos,
        seed=seed,
    )
