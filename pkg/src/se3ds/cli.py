"""Command-line interface: generate | learn | rollout | eval.

Exit codes: 0 success, 2 argument/file validation failure, 3 numerical
failure (no convergence, degenerate clusters, antipodal geometry), 4 I/O
failure.  The default seed comes from the SEED environment variable when set;
--seed always wins.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

import numpy as np

from . import evaluation, metrics, mixture, modelio, policy, rollout, synthetic
from .errors import (
    AntipodalError,
    DegenerateClusterError,
    DimensionMismatchError,
    EmptySequenceError,
    InsufficientDataError,
    InvalidPathError,
    NoConvergenceError,
    ParseError,
    TooShortError,
)
from .manifold import UnitQuaternion
from .preprocess import preprocess

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERIC = 3
EXIT_IO = 4

_NUMERIC_ERRORS = (
    AntipodalError,
    NoConvergenceError,
    DegenerateClusterError,
    InsufficientDataError,
    DimensionMismatchError,
    EmptySequenceError,
    InvalidPathError,
    np.linalg.LinAlgError,
    FloatingPointError,
)
_VALIDATION_ERRORS = (ParseError, TooShortError, ValueError)


def _default_seed() -> int:
    env = os.environ.get("SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise ParseError(f"SEED environment variable is not an integer: {env!r}")


def _parse_k_range(text: str) -> range:
    """'4' -> {4};  '1..6' or '1:6' -> {1, ..., 6} (inclusive)."""
    text = text.strip()
    for sep in ("..", ":", "-"):
        if sep in text:
            lo_s, hi_s = text.split(sep, 1)
            try:
                lo, hi = int(lo_s), int(hi_s)
            except ValueError:
                raise ParseError(f"cannot parse K range {text!r}")
            if lo < 1 or hi < lo:
                raise ParseError(f"invalid K range {text!r}")
            return range(lo, hi + 1)
    try:
        k = int(text)
    except ValueError:
        raise ParseError(f"cannot parse K range {text!r}")
    if k < 1:
        raise ParseError(f"K must be >= 1, got {k}")
    return range(k, k + 1)


def _parse_perturbation(text: str) -> rollout.Perturbation:
    """'step:dx,dy,dz' or 'step:dx,dy,dz:ax,ay,az,angle'."""
    parts = text.split(":")
    if len(parts) not in (2, 3):
        raise ParseError(
            f"perturbation {text!r} must look like STEP:dx,dy,dz[:ax,ay,az,angle]"
        )
    try:
        step = int(parts[0])
        dp = [float(v) for v in parts[1].split(",")]
        if len(dp) != 3:
            raise ValueError
        dq = None
        if len(parts) == 3:
            vals = [float(v) for v in parts[2].split(",")]
            if len(vals) != 4:
                raise ValueError
            dq = UnitQuaternion.from_axis_angle(vals[:3], vals[3])
        return rollout.Perturbation(step, np.array(dp), dq)
    except (ValueError, IndexError):
        raise ParseError(
            f"perturbation {text!r} must look like STEP:dx,dy,dz[:ax,ay,az,angle]"
        )


def _parse_pose(text: str) -> tuple[np.ndarray, UnitQuaternion]:
    vals = [float(v) for v in text.split(",")]
    if len(vals) != 7:
        raise ParseError("start pose must be px,py,pz,qw,qx,qy,qz")
    q = np.array(vals[3:])
    if abs(float(np.linalg.norm(q)) - 1.0) > 1e-6:
        raise ParseError("start quaternion must be unit to within 1e-6")
    return np.array(vals[:3]), UnitQuaternion.from_array(q / np.linalg.norm(q))


# ---------------------------------------------------------------------------
# subcommands


def _cmd_generate(args: argparse.Namespace) -> int:
    task = synthetic.generate(
        args.task,
        n_demos=args.demos,
        n_samples=args.samples,
        noise=args.noise,
        seed=args.seed,
    )
    modelio.save_trajectories(args.out, task.demos, task.dt)
    n = sum(len(d) for d in task.demos)
    print(f"wrote {args.out}: task={task.name} demos={len(task.demos)} samples={n}")
    return EXIT_OK


def _cmd_learn(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    demos, dt = modelio.load_trajectories(args.data)
    att_pos = att_ori = None
    if args.attractor is not None:
        att_pos, att_ori = _parse_pose(args.attractor)
    dataset = preprocess(demos, dt, attractor_pos=att_pos, attractor_ori=att_ori)
    mix = mixture.fit(dataset, args.mode, _parse_k_range(args.k_range), seed=args.seed)
    learned = policy.learn(dataset, mix, seed=args.seed)
    modelio.save_model(args.out, learned)
    elapsed = time.perf_counter() - started
    flags = ""
    if not (learned.converged_ori and learned.converged_pos):
        flags = " (warning: optimizer hit its iteration cap)"
    print(
        f"wrote {args.out}: mode={learned.mode} K={learned.n_components} "
        f"residual_ori={learned.residual_ori:.6g} residual_pos={learned.residual_pos:.6g} "
        f"wall_time={elapsed:.2f}s{flags}"
    )
    return EXIT_OK


def _cmd_rollout(args: argparse.Namespace) -> int:
    learned = modelio.load_model(args.model)
    if (args.start is None) == (args.from_demo is None):
        raise ParseError("provide exactly one of --start or --from-demo")
    if args.from_demo is not None:
        if args.data is None:
            raise ParseError("--from-demo needs --data")
        demos, _ = modelio.load_trajectories(args.data)
        if not 0 <= args.from_demo < len(demos):
            raise ParseError(
                f"--from-demo {args.from_demo} out of range (file has {len(demos)} demos)"
            )
        p0 = demos[args.from_demo].positions[0]
        q0 = UnitQuaternion.from_array(demos[args.from_demo].quaternions[0])
    else:
        p0, q0 = _parse_pose(args.start)

    config = rollout.RolloutConfig(
        max_steps=args.steps,
        dt=args.dt,
        tol_pos=args.tol_pos,
        tol_ori=args.tol_ori,
        perturbations=tuple(_parse_perturbation(p) for p in args.perturb),
    )
    trace = rollout.run(learned, p0, q0, config)
    modelio.save_trace_csv(args.out, trace)
    print(
        f"wrote {args.out}: status={trace.status} steps={trace.n_steps} "
        f"rows={len(trace)}"
    )
    if trace.status == rollout.STATUS_ERROR:
        print(f"rollout failed: {trace.message}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def _cmd_eval(args: argparse.Namespace) -> int:
    learned = modelio.load_model(args.model)
    demos, _ = modelio.load_trajectories(args.data)
    scenarios = tuple(s.strip() for s in args.scenarios.split(",") if s.strip())
    try:
        report = evaluation.evaluate(
            learned,
            demos,
            scenarios=scenarios,
            trials=args.trials,
            seed=args.seed,
            perturb_magnitude=args.perturb_magnitude,
        )
    except ValueError as exc:
        raise ParseError(str(exc))
    report["model"] = args.model
    report["data"] = args.data
    modelio.save_report(args.out, report)
    print(f"wrote {args.out}")
    for name, summary in report["scenarios"].items():
        line = f"  {name}: {summary['n_converged']}/{summary['n_trials']} converged"
        if "quat_err" in summary:
            line += (
                f", median dtw={summary['dtw_pos']['median']:.4g}"
                f", median quat_err={summary['quat_err']['median']:.4g} rad"
            )
        print(line)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="se3ds",
        description="Learn and run stable pose motion policies from demonstrations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic demonstration file")
    p.add_argument("--task", choices=synthetic.TASKS, required=True)
    p.add_argument("--out", required=True, help="output trajectory JSON path")
    p.add_argument("--demos", type=int, default=synthetic.DEFAULT_DEMOS)
    p.add_argument("--samples", type=int, default=synthetic.DEFAULT_SAMPLES)
    p.add_argument("--noise", type=float, default=0.0,
                   help="jitter std-dev (meters / radians), faded near the attractor")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("learn", help="fit a policy from a trajectory file")
    p.add_argument("--data", required=True, help="trajectory JSON path")
    p.add_argument("--out", required=True, help="output model JSON path")
    p.add_argument("--mode", choices=mixture.MODES, default=mixture.MODE_COUPLED)
    p.add_argument("--attractor", default=None,
                   help="goal pose override px,py,pz,qw,qx,qy,qz "
                        "(default: derived from the final demo poses)")
    p.add_argument("--k-range", default="1..6",
                   help="mixture sizes to try, e.g. '2' or '1..6' (BIC picks)")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_learn)

    p = sub.add_parser("rollout", help="simulate a learned policy to convergence")
    p.add_argument("--model", required=True, help="model JSON path")
    p.add_argument("--out", required=True, help="output trace CSV path")
    p.add_argument("--start", default=None, help="start pose px,py,pz,qw,qx,qy,qz")
    p.add_argument("--from-demo", type=int, default=None,
                   help="start from this demo's first pose (needs --data)")
    p.add_argument("--data", default=None, help="trajectory JSON for --from-demo")
    p.add_argument("--steps", type=int, default=rollout.DEFAULT_MAX_STEPS)
    p.add_argument("--dt", type=float, default=None,
                   help="integration step (default: the model's training dt)")
    p.add_argument("--tol-pos", type=float, default=rollout.DEFAULT_TOL_POS)
    p.add_argument("--tol-ori", type=float, default=rollout.DEFAULT_TOL_ORI)
    p.add_argument("--perturb", action="append", default=[],
                   metavar="STEP:dx,dy,dz[:ax,ay,az,angle]",
                   help="teleport before the given step (repeatable)")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_rollout)

    p = sub.add_parser("eval", help="batch-evaluate a model against its demos")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="output report JSON path")
    p.add_argument("--scenarios", default=",".join(evaluation.SCENARIOS))
    p.add_argument("--trials", type=int, default=3)
    p.add_argument("--perturb-magnitude", type=float,
                   default=evaluation.DEFAULT_PERTURBATION_MAGNITUDE)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_eval)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_VALIDATION if exc.code not in (0, None) else EXIT_OK
    try:
        if getattr(args, "seed", None) is None:
            args.seed = _default_seed()
        return args.func(args)
    except _NUMERIC_ERRORS as exc:  # before ValueError: LinAlgError subclasses it
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except _VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
