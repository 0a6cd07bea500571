"""Batch evaluation of a learned policy against its demonstrations.

Three scenarios:

* ``from-demo-start``: rollouts from the recorded demo start poses (trials
  cycle through the demos).
* ``unmodeled-start``: positions sampled uniformly in the demo bounding box
  expanded to twice its size about its center; orientations uniform on S^3
  (resampled if within 1e-3 rad of antipodal to the attractor).
* ``perturbed``: demo starts with one position kick of the configured
  magnitude in a random direction, injected at a random step in the middle
  third of the nominal demo length.

Each trial reports convergence, step count, DTW cost against the nearest
demo (plus the per-matched-pair cost), and the mean rotation-angle error
along that DTW path.  Scenario summaries carry min/q25/median/q75/max.
"""

from __future__ import annotations

import numpy as np

from . import metrics
from .manifold import UnitQuaternion, random_unit_quaternions
from .policy import Se3Policy
from .preprocess import Demonstration
from .rollout import Perturbation, RolloutConfig, run

SCENARIOS = ("from-demo-start", "unmodeled-start", "perturbed")
DEFAULT_PERTURBATION_MAGNITUDE = 0.1


def _quartiles(values: list[float]) -> dict[str, float]:
    arr = np.asarray(values, dtype=float)
    qs = np.quantile(arr, [0.0, 0.25, 0.5, 0.75, 1.0])
    return {
        "min": float(qs[0]),
        "q25": float(qs[1]),
        "median": float(qs[2]),
        "q75": float(qs[3]),
        "max": float(qs[4]),
    }


def _against_nearest_demo(
    demos: list[Demonstration], trace_positions: np.ndarray, trace_quats: np.ndarray
) -> dict:
    best = None
    for d, demo in enumerate(demos):
        cost, path = metrics.dtw_position(demo.positions, trace_positions)
        if best is None or cost < best["dtw_pos"]:
            best = {
                "nearest_demo": d,
                "dtw_pos": cost,
                "dtw_per_pair": cost / len(path),
                "quat_err": metrics.quaternion_error(
                    demo.quaternions, trace_quats, path
                ),
            }
    return best


def _start_for(
    scenario: str,
    trial: int,
    demos: list[Demonstration],
    policy: Se3Policy,
    rng: np.random.Generator,
    perturb_magnitude: float,
) -> tuple[np.ndarray, UnitQuaternion, RolloutConfig]:
    demo = demos[trial % len(demos)]
    config = RolloutConfig()
    if scenario == "from-demo-start":
        return demo.positions[0], UnitQuaternion.from_array(demo.quaternions[0]), config

    if scenario == "unmodeled-start":
        lo = np.min([d.positions.min(axis=0) for d in demos], axis=0)
        hi = np.max([d.positions.max(axis=0) for d in demos], axis=0)
        center, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        p = center + (2.0 * rng.random(3) - 1.0) * 2.0 * half
        att = policy.mixture.attractor_ori.array
        while True:
            q = random_unit_quaternions(rng, 1)[0]
            if np.arccos(np.clip(q @ att, -1.0, 1.0)) <= np.pi - 1e-3:
                break
        return p, UnitQuaternion.from_array(q), config

    if scenario == "perturbed":
        n = len(demo)
        step = int(rng.integers(n // 3, max(2 * n // 3, n // 3 + 1)))
        direction = rng.standard_normal(3)
        direction /= np.linalg.norm(direction)
        config = RolloutConfig(
            perturbations=(Perturbation(step, perturb_magnitude * direction),)
        )
        return demo.positions[0], UnitQuaternion.from_array(demo.quaternions[0]), config

    raise ValueError(f"unknown scenario {scenario!r}; choose from {SCENARIOS}")


def evaluate(
    policy: Se3Policy,
    demos: list[Demonstration],
    scenarios: tuple[str, ...] = SCENARIOS,
    trials: int = 3,
    seed: int = 0,
    perturb_magnitude: float = DEFAULT_PERTURBATION_MAGNITUDE,
) -> dict:
    """Run rollouts per scenario and aggregate the metrics into a report dict."""
    for s in scenarios:
        if s not in SCENARIOS:
            raise ValueError(f"unknown scenario {s!r}; choose from {SCENARIOS}")
    rng = np.random.default_rng(seed)
    report: dict = {"seed": seed, "trials_per_scenario": trials, "scenarios": {}}
    records = []
    for scenario in scenarios:
        per_scenario = []
        for trial in range(trials):
            p0, q0, config = _start_for(
                scenario, trial, demos, policy, rng, perturb_magnitude
            )
            trace = run(policy, p0, q0, config)
            record = {
                "scenario": scenario,
                "trial": trial,
                "status": trace.status,
                "converged": trace.converged,
                "n_steps": trace.n_steps,
            }
            if len(trace) > 0:
                record.update(
                    _against_nearest_demo(demos, trace.positions, trace.quaternions)
                )
            per_scenario.append(record)
        records.extend(per_scenario)
        summary: dict = {
            "n_trials": trials,
            "n_converged": int(sum(r["converged"] for r in per_scenario)),
        }
        for key in ("dtw_pos", "dtw_per_pair", "quat_err"):
            values = [r[key] for r in per_scenario if key in r]
            if values:
                summary[key] = _quartiles(values)
        report["scenarios"][scenario] = summary
    report["trials"] = records
    return report
