"""State-dependent mixing weights from a Gaussian mixture on tangent features.

Two modes:

* ``quat-only``: components live on tangent features log_att(q) in R^4.
* ``se3``: components live on the stacked feature [p; log_att(q)] in R^7,
  with full covariance (cross terms included), so the mixing weights react
  to position as well as orientation.

EM runs in the flat feature space (scikit-learn, k-means++ init, BIC over a
K range).  The Riemannian part happens afterwards: each component's
orientation mean is recomputed as the Frechet mean of its hard-assigned
members, and its covariance as the sample covariance of log-mapped members
in the component's own tangent space (position offsets stacked on top in
se3 mode), plus a trace-scaled identity regularizer.

Every component gets a mirrored twin at the antipodal mean.  A twin is the
same distribution written in the chart at -mean: evaluating it at q is, by
construction, evaluating the source component at -q.  The mixing function
folds each query into each component's hemisphere, which makes
gamma(p, q) == gamma(p, -q) exact.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from sklearn.mixture import GaussianMixture

from . import manifold
from .errors import DegenerateClusterError, DimensionMismatchError
from .manifold import UnitQuaternion
from .preprocess import PreprocessedDataset

MODE_ORIENTATION = "quat-only"
MODE_COUPLED = "se3"
MODES = (MODE_ORIENTATION, MODE_COUPLED)

COVARIANCE_REG = 1e-6

# Variance floors handed to EM (per feature dimension).  Demonstration data
# at desk scale sits on thin, noise-faded sheets; without a floor the BIC
# search rewards carving ever-smaller-variance slivers off those sheets and
# over-selects K.  The floor sets the coarsest structure EM can resolve, so
# it must sit below the between-regime separation but above the within-regime
# sheet thickness: coupled features span several centimeters while tangent
# coordinates span a few hundredths of a radian, hence the per-mode values.
EM_FLOOR_COUPLED = 4e-4
EM_FLOOR_ORIENTATION = 2e-4
_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True, eq=False)
class GaussianComponent:
    """One mixture component; tangent block has zero mean in its own chart.

    ``mean_pos`` is None in quat-only mode.  ``mirrored`` marks the twin at
    the antipodal orientation mean; it shares prior, position mean, and
    covariance with its source.
    """

    prior: float
    mean_ori: np.ndarray            # (4,) unit, w-first
    covariance: np.ndarray          # (4, 4) or (7, 7)
    mean_pos: np.ndarray | None = None
    mirrored: bool = False

    @property
    def dim(self) -> int:
        return self.covariance.shape[0]


class MixtureModel:
    """Fitted mixture over pose features.

    ``components`` holds the K source components followed by their K mirrored
    twins (component K + k mirrors component k).  ``n_components`` is the
    logical K; mixing weights have that length.
    """

    def __init__(self, mode: str, attractor_ori: UnitQuaternion,
                 components: Sequence[GaussianComponent]):
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
        if len(components) == 0 or len(components) % 2 != 0:
            raise ValueError("components must be K sources followed by K twins")
        self.mode = mode
        self.attractor_ori = attractor_ori
        self.components = list(components)
        k = len(self.components) // 2
        priors = np.array([c.prior for c in self.components[:k]])
        if abs(priors.sum() - 1.0) > 1e-12:
            raise ValueError(f"priors sum to {priors.sum()}, expected 1")
        self._rebuild_caches()

    @property
    def n_components(self) -> int:
        return len(self.components) // 2

    def _rebuild_caches(self) -> None:
        k = self.n_components
        src = self.components[:k]
        dim = src[0].dim
        want_pos = self.mode == MODE_COUPLED
        for c in self.components:
            if c.dim != dim:
                raise DimensionMismatchError("components disagree on feature dimension")
            if want_pos and c.mean_pos is None:
                raise DimensionMismatchError("se3 components need a position mean")
        self._dim = dim
        self._means = np.array([c.mean_ori for c in src])              # (K, 4)
        self._mean_pos = (
            np.array([c.mean_pos for c in src]) if want_pos else None  # (K, 3)
        )
        # gating covariances: cross terms between position and orientation
        # are dropped so the gate scores each block on its own.  A full
        # covariance conditions one block on the other, which makes the gate
        # reject any pose that strays off the demonstrated correlation and
        # freezes the active regime there; the regime choice should instead
        # follow whichever neighbourhood the pose is actually in, with the
        # blocks jointly (but independently) steering the weights.
        gate_covs = []
        for c in src:
            cov = np.array(c.covariance, dtype=float)
            if want_pos:
                cov = cov.copy()
                cov[:3, 3:] = 0.0
                cov[3:, :3] = 0.0
            gate_covs.append(cov)
        chols = np.array([np.linalg.cholesky(cv) for cv in gate_covs])
        self._chol_inv = np.array([np.linalg.inv(c) for c in chols])   # (K, d, d)
        logdet = 2.0 * np.array([np.log(np.diag(c)).sum() for c in chols])
        self._log_norm = -0.5 * (dim * _LOG_2PI + logdet)              # (K,)
        self._log_prior = np.log([c.prior for c in src])               # (K,)

    # -- densities -----------------------------------------------------------

    def _tangent_rows(self, q: np.ndarray) -> np.ndarray:
        """log of q in each source component's chart, hemisphere-folded."""
        dots = self._means @ q
        signs = np.where(dots < 0.0, -1.0, 1.0)
        if np.any(dots == 0.0):
            lex = manifold._lex_sign(q)
            signs = np.where(dots == 0.0, lex, signs)
        qs = signs[:, None] * q[None, :]
        return manifold.log_rows_pairwise(self._means, qs)

    def _log_densities(self, p: np.ndarray | None, v: np.ndarray) -> np.ndarray:
        """Component log-densities from per-component tangent rows v (K, 4)."""
        if self.mode == MODE_COUPLED:
            if p is None:
                raise DimensionMismatchError("se3 mixing needs a position")
            z = np.concatenate([p[None, :] - self._mean_pos, v], axis=1)
        else:
            z = v
        y = np.einsum("kij,kj->ki", self._chol_inv, z)
        return self._log_norm - 0.5 * np.einsum("ki,ki->k", y, y)

    def component_density(self, k: int, p: np.ndarray | None, q: UnitQuaternion) -> float:
        """Density of component ``k`` (twins included, K + j mirrors j) at (p, q).

        A mirrored twin is evaluated in its own chart at the antipodal mean;
        by construction its density at (p, -q) equals the source's at (p, q).
        Raises AntipodalError when q is (numerically) antipodal to the
        component's orientation mean.
        """
        comp = self.components[k]
        v = manifold.log_rows(comp.mean_ori, q.array[None, :])[0]
        if comp.mirrored:
            # same distribution seen from the antipodal chart: fold the
            # tangent sign so cross terms line up with the source component
            v = -v
        if self.mode == MODE_COUPLED:
            if p is None:
                raise DimensionMismatchError("se3 density needs a position")
            z = np.concatenate([np.asarray(p, dtype=float) - comp.mean_pos, v])
        else:
            z = v
        chol = np.linalg.cholesky(comp.covariance)
        y = np.linalg.solve(chol, z)
        logdet = 2.0 * np.log(np.diag(chol)).sum()
        log_norm = -0.5 * (comp.dim * _LOG_2PI + logdet)
        return float(np.exp(log_norm - 0.5 * y @ y))

    def mixing_weights(self, p: np.ndarray | None, q: UnitQuaternion | np.ndarray) -> np.ndarray:
        """Normalized state-dependent weights gamma(p, q), shape (K,).

        Each query is evaluated against whichever of a component's two charts
        (source or mirrored twin) covers the query's hemisphere, so the
        result is exactly symmetric under q -> -q.  quat-only mode ignores
        ``p``.  In se3 mode the weights score the position and orientation
        blocks independently (no cross terms), so both blocks steer the gate
        without either one vetoing poses off the demonstrated correlation.
        """
        q_arr = q.array if isinstance(q, UnitQuaternion) else np.asarray(q, dtype=float)
        v = self._tangent_rows(q_arr)
        logits = self._log_prior + self._log_densities(
            p if self.mode == MODE_COUPLED else None, v
        )
        logits -= logits.max()
        w = np.exp(logits)
        return w / w.sum()

    def mixing_rows(self, positions: np.ndarray | None, quats: np.ndarray) -> np.ndarray:
        """Batch mixing weights for (N, 3) positions and (N, 4) quaternions -> (N, K)."""
        n = quats.shape[0]
        k = self.n_components
        logits = np.empty((n, k))
        for j in range(k):
            mu = self._means[j]
            qs = manifold.fold_rows(mu, quats)
            v = manifold.log_rows(mu, qs)
            if self.mode == MODE_COUPLED:
                if positions is None:
                    raise DimensionMismatchError("se3 mixing needs positions")
                z = np.concatenate([positions - self._mean_pos[j], v], axis=1)
            else:
                z = v
            y = z @ self._chol_inv[j].T
            logits[:, j] = self._log_prior[j] + self._log_norm[j] - 0.5 * (y * y).sum(axis=1)
        logits -= logits.max(axis=1, keepdims=True)
        w = np.exp(logits)
        return w / w.sum(axis=1, keepdims=True)


def _regularized(cov: np.ndarray) -> np.ndarray:
    d = cov.shape[0]
    cov = 0.5 * (cov + cov.T)
    scale = np.trace(cov) / d
    if scale <= 0.0:
        scale = 1.0
    return cov + (COVARIANCE_REG * scale) * np.eye(d)


def fit(
    dataset: PreprocessedDataset,
    mode: str,
    k_range: Iterable[int] = range(1, 7),
    seed: int = 0,
) -> MixtureModel:
    """Fit the mixture: EM + BIC over ``k_range``, then Riemannian recompute.

    Hard labels from the BIC-best EM fit define the clusters; each cluster's
    orientation mean is the Frechet mean of its members and its covariance is
    recomputed in the cluster's own tangent space.  Candidate K values whose
    EM fit fails or leaves a cluster with fewer than dim + 1 members are
    skipped; if none survive, DegenerateClusterError is raised.

    Deterministic for a fixed dataset, mode, k_range, and seed.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    ks = sorted(set(int(k) for k in k_range))
    if not ks or ks[0] < 1:
        raise ValueError(f"k_range must contain positive integers, got {ks}")

    if mode == MODE_COUPLED:
        x = np.concatenate([dataset.positions, dataset.features], axis=1)
        floor = EM_FLOOR_COUPLED
    else:
        x = dataset.features
        floor = EM_FLOOR_ORIENTATION
    n, dim = x.shape

    best = None
    for k in ks:
        if (dim + 1) * k > n:
            continue
        gm = GaussianMixture(
            n_components=k,
            covariance_type="full",
            init_params="k-means++",
            n_init=3,
            max_iter=300,
            reg_covar=floor,
            random_state=seed,
        )
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                gm.fit(x)
        except (ValueError, np.linalg.LinAlgError):
            continue
        labels = gm.predict(x)
        counts = np.bincount(labels, minlength=k)
        if counts.min() < dim + 1:
            continue
        bic = gm.bic(x)
        if best is None or bic < best[0]:
            best = (bic, k, labels)

    if best is None:
        raise DegenerateClusterError(
            f"no K in {ks} produced clusters with at least {dim + 1} members each"
        )
    _, k, labels = best

    components: list[GaussianComponent] = []
    for j in range(k):
        members = np.nonzero(labels == j)[0]
        quats = dataset.quaternions[members]
        mean_ori = manifold.frechet_mean_rows(quats)
        folded = manifold.fold_rows(mean_ori, quats)
        v = manifold.log_rows(mean_ori, folded)
        if mode == MODE_COUPLED:
            pos = dataset.positions[members]
            mean_pos = pos.mean(axis=0)
            z = np.concatenate([pos - mean_pos, v], axis=1)
        else:
            mean_pos = None
            z = v
        cov = _regularized(z.T @ z / (len(members) - 1))
        components.append(
            GaussianComponent(
                prior=len(members) / n,
                mean_ori=mean_ori,
                covariance=cov,
                mean_pos=mean_pos,
            )
        )
    components += [
        GaussianComponent(
            prior=c.prior,
            mean_ori=-c.mean_ori,
            covariance=c.covariance,
            mean_pos=c.mean_pos,
            mirrored=True,
        )
        for c in components
    ]
    return MixtureModel(mode, dataset.attractor_ori, components)
