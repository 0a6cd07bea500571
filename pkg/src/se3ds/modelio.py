"""On-disk formats: trajectory JSON, model JSON, trace CSV, report JSON.

All writers are atomic (write to a temp file in the destination directory,
then rename), so a failed run never leaves a partial file.  Floats are
serialized with repr-level precision, which both makes JSON round trips
bit-exact for float64 and keeps byte-identical output for identical inputs.

Trajectory files:
    {"dt": <seconds>, "demos": [[{"t": ..., "p": [x, y, z],
                                  "q": [w, x, y, z]}, ...], ...]}

Model files carry the mixture (source components only; mirrored twins are
reconstructed on load), both banks of linear maps (row-major), attractors,
dt, and training metadata.  Loading re-validates the stability invariants
(unit means, positive-definite covariances, priors summing to 1, symmetric
parts of every A below the definiteness margin).
"""

from __future__ import annotations

import json
import os
import tempfile
from typing import Iterable

import numpy as np

from .errors import ParseError
from .manifold import UnitQuaternion
from .mixture import MODES, GaussianComponent, MixtureModel
from .policy import DEFINITENESS_MARGIN, Se3Policy
from .preprocess import Demonstration
from .rollout import RolloutTrace

TOOL_VERSION = "0.1.0"
MODEL_FORMAT = "se3ds-model"
_EIGEN_SLACK = 1e-9


def atomic_write_text(path: str, text: str) -> None:
    """Write text to ``path`` via a same-directory temp file and rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _fmt(x: float) -> str:
    return repr(float(x))


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ParseError(msg)


def _floats(obj, msg: str) -> np.ndarray:
    try:
        arr = np.asarray(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{msg}: not numeric") from exc
    _require(bool(np.all(np.isfinite(arr))), f"{msg}: non-finite values")
    return arr


# ---------------------------------------------------------------------------
# trajectories


def save_trajectories(path: str, demos: Iterable[Demonstration], dt: float) -> None:
    payload = {
        "dt": dt,
        "demos": [
            [
                {
                    "t": float(demo.times[i]),
                    "p": [float(v) for v in demo.positions[i]],
                    "q": [float(v) for v in demo.quaternions[i]],
                }
                for i in range(len(demo))
            ]
            for demo in demos
        ],
    }
    atomic_write_text(path, json.dumps(payload, indent=2) + "\n")


def load_trajectories(path: str) -> tuple[list[Demonstration], float]:
    """Parse and validate a trajectory file; returns (demos, dt)."""
    with open(path, "r") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid JSON ({exc})") from exc
    _require(isinstance(raw, dict), f"{path}: top level must be an object")
    _require("dt" in raw and "demos" in raw, f"{path}: needs 'dt' and 'demos'")
    dt = raw["dt"]
    _require(isinstance(dt, (int, float)) and np.isfinite(dt) and dt > 0,
             f"{path}: dt must be a positive number")
    _require(isinstance(raw["demos"], list) and len(raw["demos"]) > 0,
             f"{path}: demos must be a non-empty list")

    demos = []
    for d, samples in enumerate(raw["demos"]):
        _require(isinstance(samples, list) and len(samples) > 0,
                 f"{path}: demo {d} is empty")
        times, positions, quats = [], [], []
        for i, sample in enumerate(samples):
            _require(
                isinstance(sample, dict) and {"t", "p", "q"} <= sample.keys(),
                f"{path}: demo {d} sample {i} needs keys t, p, q",
            )
            t = _floats(sample["t"], f"{path}: demo {d} sample {i} time")
            p = _floats(sample["p"], f"{path}: demo {d} sample {i} position")
            q = _floats(sample["q"], f"{path}: demo {d} sample {i} quaternion")
            _require(t.shape == (), f"{path}: demo {d} sample {i}: t must be scalar")
            _require(p.shape == (3,), f"{path}: demo {d} sample {i}: p must have 3 entries")
            _require(q.shape == (4,), f"{path}: demo {d} sample {i}: q must have 4 entries")
            _require(
                abs(float(np.linalg.norm(q)) - 1.0) <= 1e-6,
                f"{path}: demo {d} sample {i}: quaternion norm deviates from 1 by more than 1e-6",
            )
            times.append(float(t))
            positions.append(p)
            quats.append(q)
        times = np.array(times)
        _require(
            bool(np.all(np.diff(times) > 0)) if len(times) > 1 else True,
            f"{path}: demo {d}: timestamps must be strictly increasing",
        )
        demos.append(Demonstration(times, np.array(positions), np.array(quats)))
    return demos, float(dt)


# ---------------------------------------------------------------------------
# models


def save_model(path: str, policy: Se3Policy) -> None:
    k = policy.n_components
    src = policy.mixture.components[:k]
    payload = {
        "format": MODEL_FORMAT,
        "mode": policy.mode,
        "K": k,
        "dt": policy.dt,
        "attractor_pos": [float(v) for v in policy.attractor_pos],
        "attractor_ori": [float(v) for v in policy.mixture.attractor_ori.array],
        "priors": [float(c.prior) for c in src],
        "means_ori": [[float(v) for v in c.mean_ori] for c in src],
        "means_pos": (
            [[float(v) for v in c.mean_pos] for c in src]
            if policy.mode == "se3"
            else None
        ),
        "covariances": [[float(v) for v in c.covariance.ravel()] for c in src],
        "a_ori": [[float(v) for v in a.ravel()] for a in policy.a_ori],
        "a_pos": [[float(v) for v in a.ravel()] for a in policy.a_pos],
        "training": {
            "seed": policy.seed,
            "residual_ori": policy.residual_ori,
            "residual_pos": policy.residual_pos,
            "converged_ori": policy.converged_ori,
            "converged_pos": policy.converged_pos,
            "tool_version": TOOL_VERSION,
        },
    }
    atomic_write_text(path, json.dumps(payload, indent=2) + "\n")


def load_model(path: str) -> Se3Policy:
    """Load a model file, re-validating every stability invariant."""
    with open(path, "r") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid JSON ({exc})") from exc
    _require(isinstance(raw, dict), f"{path}: top level must be an object")
    _require(raw.get("format") == MODEL_FORMAT,
             f"{path}: not a {MODEL_FORMAT} file")
    mode = raw.get("mode")
    _require(mode in MODES, f"{path}: mode must be one of {MODES}")
    k = raw.get("K")
    _require(isinstance(k, int) and k >= 1, f"{path}: K must be a positive integer")
    dt = raw.get("dt")
    _require(isinstance(dt, (int, float)) and np.isfinite(dt) and dt > 0,
             f"{path}: dt must be positive")

    att_pos = _floats(raw.get("attractor_pos"), f"{path}: attractor_pos")
    att_ori = _floats(raw.get("attractor_ori"), f"{path}: attractor_ori")
    _require(att_pos.shape == (3,), f"{path}: attractor_pos must have 3 entries")
    _require(att_ori.shape == (4,), f"{path}: attractor_ori must have 4 entries")
    _require(abs(float(np.linalg.norm(att_ori)) - 1.0) <= 1e-9,
             f"{path}: attractor_ori is not unit")

    priors = _floats(raw.get("priors"), f"{path}: priors")
    _require(priors.shape == (k,), f"{path}: priors must have K entries")
    _require(abs(float(priors.sum()) - 1.0) <= 1e-9 and bool(np.all(priors > 0)),
             f"{path}: priors must be positive and sum to 1")

    means_ori = _floats(raw.get("means_ori"), f"{path}: means_ori")
    _require(means_ori.shape == (k, 4), f"{path}: means_ori must be K x 4")
    _require(
        bool(np.all(np.abs(np.linalg.norm(means_ori, axis=1) - 1.0) <= 1e-9)),
        f"{path}: orientation means are not unit",
    )
    dim = 7 if mode == "se3" else 4
    if mode == "se3":
        means_pos = _floats(raw.get("means_pos"), f"{path}: means_pos")
        _require(means_pos.shape == (k, 3), f"{path}: means_pos must be K x 3")
    else:
        means_pos = None

    covs = _floats(raw.get("covariances"), f"{path}: covariances")
    _require(covs.shape == (k, dim * dim),
             f"{path}: covariances must be K x {dim * dim} (row-major)")
    covs = covs.reshape(k, dim, dim)
    for j in range(k):
        _require(bool(np.allclose(covs[j], covs[j].T, atol=1e-12)),
                 f"{path}: covariance {j} is not symmetric")
        try:
            np.linalg.cholesky(covs[j])
        except np.linalg.LinAlgError:
            raise ParseError(f"{path}: covariance {j} is not positive definite")

    a_ori = _floats(raw.get("a_ori"), f"{path}: a_ori")
    a_pos = _floats(raw.get("a_pos"), f"{path}: a_pos")
    _require(a_ori.shape == (k, 16), f"{path}: a_ori must be K x 16 (row-major)")
    _require(a_pos.shape == (k, 9), f"{path}: a_pos must be K x 9 (row-major)")
    a_ori = a_ori.reshape(k, 4, 4)
    a_pos = a_pos.reshape(k, 3, 3)
    bound = -DEFINITENESS_MARGIN + _EIGEN_SLACK
    for name, bank in (("a_ori", a_ori), ("a_pos", a_pos)):
        for j, a in enumerate(bank):
            top = float(np.linalg.eigvalsh(0.5 * (a + a.T)).max())
            _require(
                top <= bound,
                f"{path}: {name}[{j}] violates the stability margin "
                f"(max sym eigenvalue {top:.3e} > {bound:.3e})",
            )

    components = [
        GaussianComponent(
            prior=float(priors[j]),
            mean_ori=means_ori[j],
            covariance=covs[j],
            mean_pos=means_pos[j] if means_pos is not None else None,
        )
        for j in range(k)
    ]
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
    mix = MixtureModel(mode, UnitQuaternion.from_array(att_ori), components)
    training = raw.get("training") or {}
    return Se3Policy(
        mixture=mix,
        a_ori=a_ori,
        a_pos=a_pos,
        attractor_pos=att_pos,
        dt=float(dt),
        residual_ori=float(training.get("residual_ori", 0.0)),
        residual_pos=float(training.get("residual_pos", 0.0)),
        converged_ori=bool(training.get("converged_ori", True)),
        converged_pos=bool(training.get("converged_pos", True)),
        seed=training.get("seed"),
    )


# ---------------------------------------------------------------------------
# traces and reports


def trace_header(k: int) -> str:
    gammas = ",".join(f"gamma_{i + 1}" for i in range(k))
    return f"t,px,py,pz,qw,qx,qy,qz,vx,vy,vz,wx,wy,wz,{gammas},V,dV"


def save_trace_csv(path: str, trace: RolloutTrace) -> None:
    k = trace.gammas.shape[1] if trace.gammas.ndim == 2 else 0
    lines = [trace_header(k)]
    for i in range(len(trace)):
        fields = (
            [trace.times[i]]
            + list(trace.positions[i])
            + list(trace.quaternions[i])
            + list(trace.velocities[i])
            + list(trace.omegas[i])
            + list(trace.gammas[i])
            + [trace.lyapunov[i], trace.lyapunov_delta[i]]
        )
        lines.append(",".join(_fmt(x) for x in fields))
    atomic_write_text(path, "\n".join(lines) + "\n")


def load_trace_csv(path: str) -> dict[str, np.ndarray]:
    """Read a trace CSV back into named column arrays (gammas under 'gamma')."""
    with open(path, "r") as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    data = np.array([[float(x) for x in row] for row in rows])
    if data.size == 0:
        data = data.reshape(0, len(header))
    _require(data.shape[1] == len(header), f"{path}: ragged CSV")
    cols = {name: data[:, i] for i, name in enumerate(header)}
    gamma_names = [h for h in header if h.startswith("gamma_")]
    out: dict[str, np.ndarray] = {
        "t": cols["t"],
        "p": np.stack([cols["px"], cols["py"], cols["pz"]], axis=1) if len(data) else np.zeros((0, 3)),
        "q": np.stack([cols["qw"], cols["qx"], cols["qy"], cols["qz"]], axis=1) if len(data) else np.zeros((0, 4)),
        "v": np.stack([cols["vx"], cols["vy"], cols["vz"]], axis=1) if len(data) else np.zeros((0, 3)),
        "w": np.stack([cols["wx"], cols["wy"], cols["wz"]], axis=1) if len(data) else np.zeros((0, 3)),
        "gamma": np.stack([cols[g] for g in gamma_names], axis=1) if len(data) else np.zeros((0, len(gamma_names))),
        "V": cols["V"],
        "dV": cols["dV"],
    }
    return out


def save_report(path: str, report: dict) -> None:
    atomic_write_text(path, json.dumps(report, indent=2) + "\n")
