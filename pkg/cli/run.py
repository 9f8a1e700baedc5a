"""
Command-line front door.

    python -m cli <subcommand> [flags]

Exit codes: 0 success, 1 invalid model or input, 2 a solver did not converge
(results are still written), 64 bad command line.
"""
import argparse
import dataclasses
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import pandas as pd
from pydantic import ValidationError

import config
from cli.model_io import load_marginals, load_model
from cli.outputs import RunManifest, write_csv
from inference.dynbp import dynbp_evolve
from inference.exact_oracle import exact_map, exact_marginal, exact_partition, exact_temporal_evolve
from inference.extended_gbp import extended_gbp_evolve
from inference.gbp_static import gbp_parent_to_child, region_free_energy, sum_product_bp
from inference.options import SolverOptions
from lab.frames_io import read_frame_file, write_pgm
from lab.ising_lab import KineticParams, build_random_ising, product_joint
from lab.ising_runs import FIELD_CONFIGS, TRACE_THETAS, run_belief_trace, run_error_histogram, run_free_energy_ratio
from lab.stmrf_vision import (
    BACKGROUNDS,
    FrameSequence,
    MotionModelParams,
    detect_motion,
    frame_difference,
    motion_metrics_frame,
    synth_random_patch_video,
)
from model.errors import InferenceError, StructuralError, UsageError, ValidationReport
from model.factor_graph import validate_factor_graph
from model.region_graph import build_bethe_regions, validate_region_graph
from model.tables import marginalize_to_axes
from model.temporal import TemporalModel, priors_from_marginals, validate_temporal_model

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NOT_CONVERGED = 2
EXIT_USAGE = 64


# ---------- Logging ----------
def setup_logging(level: str = None):
    level = (level or config.LOG_LEVEL).upper()
    handlers = [logging.StreamHandler()]
    if config.LOG_FILE:
        handlers.append(logging.FileHandler(config.LOG_FILE))
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format="%(asctime)s - %(levelname)s - %(message)s",
        handlers=handlers,
        force=True,
    )


# ---------- Parser ----------
class UsageParser(argparse.ArgumentParser):
    """Command-line mistakes exit with 64 and the usage text."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common() -> UsageParser:
    common = UsageParser(add_help=False)
    common.add_argument("--out-dir", default=config.OUTPUT_DIR, help="Directory for CSV, PGM and manifest files")
    common.add_argument("--log-level", default=config.LOG_LEVEL)
    common.add_argument("--jobs", type=int, default=config.MAX_WORKERS, help="Parallel seeds/trials")
    common.add_argument("--seed", type=int, default=0)
    return common


def _solver(tolerance: float = config.DEFAULT_TOLERANCE, degenerate: str = config.DEGENERATE_EXPONENT) -> UsageParser:
    solver = UsageParser(add_help=False)
    solver.add_argument("--damping", type=float, default=config.DEFAULT_DAMPING)
    solver.add_argument("--tol", type=float, default=tolerance)
    solver.add_argument("--max-iters", type=int, default=config.DEFAULT_MAX_ITERS)
    solver.add_argument("--degenerate-exponent", default=degenerate, help="'error' or 'fixed:<w>'")
    return solver


def _model() -> UsageParser:
    model = UsageParser(add_help=False)
    model.add_argument("--model", required=True, type=Path, help="Model JSON file")
    return model


def _ising(rows: int, cols: int) -> UsageParser:
    ising = UsageParser(add_help=False)
    ising.add_argument("--rows", type=int, default=rows)
    ising.add_argument("--cols", type=int, default=cols)
    ising.add_argument("--theta-dt", type=float, default=config.DEFAULT_THETA_DT)
    ising.add_argument("--steps", type=int, default=10)
    return ising


def build_parser() -> UsageParser:
    parser = UsageParser(prog="cli", description="Exact, loopy and path-probability inference on discrete models")
    sub = parser.add_subparsers(dest="command", required=True)
    common, solver, model = _common(), _solver(), _model()

    p = sub.add_parser("validate", parents=[common, model], help="Check a model file")
    p.set_defaults(handler=cmd_validate)

    p = sub.add_parser("exact", parents=[common, model], help="Enumerate log Z, marginals and the exact chain")
    p.add_argument("--map", action="store_true", help="Also report the most likely joint state")
    p.add_argument("--steps", type=int, default=0, help="Exact temporal evolution steps")
    p.add_argument("--init-marginals", type=Path)
    p.set_defaults(handler=cmd_exact)

    p = sub.add_parser("bp", parents=[common, solver, model], help="Loopy sum-product BP")
    p.set_defaults(handler=cmd_bp)

    p = sub.add_parser("gbp", parents=[common, solver, model], help="Parent-to-child GBP")
    p.set_defaults(handler=cmd_gbp)

    for name, handler in (("dynbp", cmd_dynbp), ("ext-gbp", cmd_ext_gbp)):
        p = sub.add_parser(name, parents=[common, solver, model], help=f"{name} over time")
        p.add_argument("--steps", type=int, default=10)
        p.add_argument("--init-marginals", type=Path, help="JSON map of variable id to distribution")
        p.set_defaults(handler=handler)

    p = sub.add_parser("ising-trace", parents=[common, solver, _ising(3, 4)], help="Belief traces at one node")
    p.add_argument("--thetas", type=float, nargs="+", default=list(TRACE_THETAS))
    p.add_argument("--topology", choices=["torus", "open"], default="torus")
    p.add_argument("--h", type=float, default=0.1, help="Field variance")
    p.add_argument("--j", type=float, default=0.1, help="Coupling variance")
    p.add_argument("--node", type=int, default=0)
    p.set_defaults(handler=cmd_ising_trace)

    p = sub.add_parser("ising-hist", parents=[common, solver, _ising(3, 4)], help="Relative-error histogram")
    p.add_argument("--h", type=float, help="Field variance (with --j: one config instead of all three)")
    p.add_argument("--j", type=float, help="Coupling variance")
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--node", type=int, default=0)
    p.add_argument("--out", type=Path, help="Samples CSV (default <out-dir>/ising_hist_samples.csv)")
    p.set_defaults(handler=cmd_ising_hist)

    p = sub.add_parser("fe-ratio", parents=[common, solver, _ising(3, 3)], help="DynBP / extended GBP free energy")
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--variance", type=float, default=config.ISING_VARIANCE)
    p.set_defaults(handler=cmd_fe_ratio, steps=1)

    p = sub.add_parser(
        "motion-demo", parents=[common, _solver(1e-4, "fixed:0.5")], help="Moving-object detection on a video"
    )
    p.add_argument("--frames", type=Path, help="Frame file to read instead of synthesizing a video")
    p.add_argument("--width", type=int, default=50)
    p.add_argument("--height", type=int, default=50)
    p.add_argument("--num-frames", type=int, default=60)
    p.add_argument("--patch", type=int, default=5)
    p.add_argument("--background", choices=BACKGROUNDS, default="static", help="Synthetic background noise: drawn once or every frame")
    p.add_argument("--theta-s", type=float, default=0.99)
    p.add_argument("--theta-t", type=float, default=0.6)
    p.add_argument("--bins", type=int, default=2, help="Pixel states C")
    p.add_argument("--quant-bins", type=int, default=8)
    p.add_argument("--diff-threshold", type=float, default=1.0 / 8.0)
    p.add_argument("--burn-in", type=int, default=10, help="Frames left out of the mean IoU")
    p.add_argument("--write-masks", action="store_true")
    p.set_defaults(handler=cmd_motion_demo)
    return parser


def solver_options(args) -> SolverOptions:
    return SolverOptions(
        max_iters=args.max_iters,
        tolerance=args.tol,
        damping=args.damping,
        degenerate_exponent=args.degenerate_exponent,
    )


# ---------- helpers ----------
def _out(args, name: str) -> Path:
    return Path(args.out_dir) / name


def _prefix(args) -> str:
    return args.command.replace("-", "_")


def _status(converged: bool) -> int:
    return EXIT_OK if converged else EXIT_NOT_CONVERGED


def _checked(report: ValidationReport, what: str):
    if not report.ok:
        raise StructuralError(f"invalid {what}:\n{report}")


def _factor_graph(model):
    fg = model.factor_graph()
    _checked(validate_factor_graph(fg), "factor graph")
    return fg


def _temporal_model(model):
    _checked(validate_temporal_model(model.temporal_model(with_regions=False)), "temporal model")
    tm = model.temporal_model()
    if model.regions is not None:
        _checked(validate_region_graph(tm.region_graph, tm.skeleton), "region graph")
    return tm


def _initial_marginals(args, tm: TemporalModel) -> Dict[int, np.ndarray]:
    given = load_marginals(args.init_marginals) if getattr(args, "init_marginals", None) else {}
    unknown = set(given) - set(tm.cardinalities)
    if unknown:
        raise InferenceError(f"initial marginals name undeclared variables {sorted(unknown)}")
    marginals = {}
    for v, card in tm.cardinalities.items():
        dist = np.asarray(given.get(v, np.full(card, 1.0 / card)), dtype=float)
        if dist.shape != (card,) or np.any(dist < 0) or not np.isclose(dist.sum(), 1.0):
            raise InferenceError(f"initial marginal of variable {v} is not a distribution over {card} states")
        marginals[v] = dist
    return marginals


def _marginal_rows(marginals: Dict[int, np.ndarray], **extra) -> List[dict]:
    return [
        {**extra, "variable": v, "state": s, "belief": float(p)}
        for v, dist in sorted(marginals.items())
        for s, p in enumerate(dist)
    ]


# ---------- subcommands ----------
def cmd_validate(args, opts, manifest) -> int:
    model = load_model(args.model)
    report = ValidationReport()
    structure = None
    if model.factors:
        structure = model.factor_graph()
        report.extend(validate_factor_graph(structure))
    if model.temporal_factors:
        temporal = validate_temporal_model(model.temporal_model(with_regions=False))
        report.extend(temporal)
        if structure is None and temporal.ok:
            structure = model.temporal_model(with_regions=False).skeleton
    if model.regions is not None and structure is not None and report.ok:
        report.extend(validate_region_graph(model.region_graph(), structure))

    if report.ok:
        print(f"{args.model}: valid")
        return EXIT_OK
    print(f"{args.model}: {len(report)} problem(s)")
    print(report)
    return EXIT_INVALID


def cmd_exact(args, opts, manifest) -> int:
    model = load_model(args.model)
    if model.factors:
        fg = _factor_graph(model)
        log_z = exact_partition(fg)
        print(f"log Z = {format(log_z, '.17g')}")
        marginals = {v: exact_marginal(fg, v) for v in sorted(fg.cardinalities)}
        write_csv(pd.DataFrame(_marginal_rows(marginals)), manifest.add_output(_out(args, "exact_marginals.csv")))
        if args.map:
            state, score = exact_map(fg)
            print(f"MAP state = {[int(s) for s in state]} (weight {format(score, '.17g')})")

    if args.steps > 0:
        tm = _temporal_model(model)
        ids = sorted(tm.cardinalities)
        trajectory = exact_temporal_evolve(tm, product_joint(_initial_marginals(args, tm)), args.steps)
        rows = []
        for t, b in enumerate(trajectory):
            table = b.reshape(tm.cards(ids))
            rows += _marginal_rows({v: marginalize_to_axes(table, ids, (v,)) for v in ids}, t=t)
        write_csv(pd.DataFrame(rows), manifest.add_output(_out(args, "exact_trajectory.csv")))
    return EXIT_OK


def cmd_bp(args, opts, manifest) -> int:
    fg = _factor_graph(load_model(args.model))
    result = sum_product_bp(fg, opts)
    write_csv(pd.DataFrame(_marginal_rows(result.beliefs.tables)), manifest.add_output(_out(args, "bp_beliefs.csv")))
    write_csv(result.history_frame(), manifest.add_output(_out(args, "bp_history.csv")))
    manifest.converged["bp"] = result.converged
    print(f"bp: converged={result.converged} after {result.iterations} iterations")
    return _status(result.converged)


def cmd_gbp(args, opts, manifest) -> int:
    model = load_model(args.model)
    fg = _factor_graph(model)
    rg = model.region_graph()
    if rg is None:
        rg = build_bethe_regions(fg)
    else:
        _checked(validate_region_graph(rg, fg), "region graph")
    result = gbp_parent_to_child(fg, rg, opts)
    rows = [
        {"region": r, "index": k, "belief": float(p)}
        for r in result.beliefs.keys()
        for k, p in enumerate(result.beliefs[r].ravel())
    ]
    write_csv(pd.DataFrame(rows, columns=["region", "index", "belief"]), manifest.add_output(_out(args, "gbp_beliefs.csv")))
    write_csv(result.history_frame(), manifest.add_output(_out(args, "gbp_history.csv")))
    manifest.converged["gbp"] = result.converged
    energy = region_free_energy(fg, rg, result.beliefs, opts.clamp_floor)
    print(f"gbp: converged={result.converged} after {result.iterations} iterations, free energy {format(energy, '.17g')}")
    return _status(result.converged)


def _evolve(args, opts, manifest, evolver) -> int:
    tm = _temporal_model(load_model(args.model))
    priors = priors_from_marginals(tm, _initial_marginals(args, tm))
    trajectory = evolver(tm, priors, args.steps, opts)
    prefix = _prefix(args)
    write_csv(trajectory.to_frame(), manifest.add_output(_out(args, f"{prefix}_trace.csv")))
    write_csv(trajectory.diagnostics_frame(), manifest.add_output(_out(args, f"{prefix}_diagnostics.csv")))
    energies = pd.DataFrame({"t": np.arange(1, args.steps + 1), "free_energy": trajectory.free_energies()})
    write_csv(energies, manifest.add_output(_out(args, f"{prefix}_free_energy.csv")))
    manifest.converged[args.command] = trajectory.converged
    print(f"{args.command}: {args.steps} steps, converged={trajectory.converged}")
    return _status(trajectory.converged)


def cmd_dynbp(args, opts, manifest) -> int:
    return _evolve(args, opts, manifest, dynbp_evolve)


def cmd_ext_gbp(args, opts, manifest) -> int:
    return _evolve(args, opts, manifest, extended_gbp_evolve)


def cmd_ising_trace(args, opts, manifest) -> int:
    p = build_random_ising(args.rows, args.cols, args.topology, args.seed, variance=args.j, field_variance=args.h)
    frames = []
    for theta in args.thetas:
        frame = run_belief_trace(p, KineticParams(theta), args.node, args.steps, opts)
        frame.insert(0, "theta_dt", theta)
        frames.append(frame)
    traces = pd.concat(frames, ignore_index=True)
    write_csv(traces, manifest.add_output(_out(args, "ising_trace.csv")))
    converged = bool(traces["converged"].all())
    manifest.converged["dynbp"] = converged
    return _status(converged)


def cmd_ising_hist(args, opts, manifest) -> int:
    if (args.h is None) != (args.j is None):
        raise ValueError("--h and --j go together")
    configs = FIELD_CONFIGS if args.h is None else [(args.h, args.j)]
    result = run_error_histogram(
        rows=args.rows,
        cols=args.cols,
        configs=configs,
        seeds=args.seeds,
        steps=args.steps,
        opts=opts,
        theta_dt=args.theta_dt,
        seed=args.seed,
        node=args.node,
        jobs=args.jobs,
    )
    write_csv(result.samples, manifest.add_output(args.out or _out(args, "ising_hist_samples.csv")))
    write_csv(result.histogram, manifest.add_output(_out(args, "ising_hist_bins.csv")))
    write_csv(result.residuals, manifest.add_output(_out(args, "ising_hist_residuals.csv")))
    write_csv(result.seed_errors, manifest.add_output(_out(args, "ising_hist_seed_errors.csv")))
    write_csv(result.seed_histogram, manifest.add_output(_out(args, "ising_hist_seed_bins.csv")))
    manifest.seeds["instances"] = sorted(set(int(s) for s in result.samples["seed"]))
    for label in result.samples["config"].unique():
        print(
            f"{label}: {result.fraction_within(0.1, label):.1%} of samples and "
            f"{result.fraction_within(0.1, label, averaged=True):.1%} of time-averaged seeds within 10%"
        )
    converged = bool(result.samples["converged"].all())
    manifest.converged["dynbp"] = converged
    return _status(converged)


def cmd_fe_ratio(args, opts, manifest) -> int:
    frame = run_free_energy_ratio(
        rows=args.rows,
        cols=args.cols,
        trials=args.trials,
        seed=args.seed,
        theta_dt=args.theta_dt,
        steps=args.steps,
        opts=opts,
        variance=args.variance,
        jobs=args.jobs,
    )
    write_csv(frame, manifest.add_output(_out(args, "fe_ratio.csv")))
    manifest.seeds["trials"] = [int(s) for s in frame["seed"]]
    done = frame[frame["converged"]]
    if len(done):
        inside = done["ratio"].between(0.9, 1.1).mean()
        print(f"{len(done)}/{len(frame)} trials converged; {inside:.1%} of ratios within [0.9, 1.1]")
    converged = bool(frame["converged"].all())
    manifest.converged["trials"] = converged
    return _status(converged)


def cmd_motion_demo(args, opts, manifest) -> int:
    params = MotionModelParams(
        theta_s=args.theta_s,
        theta_t=args.theta_t,
        states=args.bins,
        diff_threshold=args.diff_threshold,
        quant_bins=args.quant_bins,
    )
    if args.frames:
        fs = FrameSequence(read_frame_file(args.frames))
    else:
        fs = synth_random_patch_video(
            args.width, args.height, args.num_frames, args.patch, args.seed, background=args.background
        )
    d = frame_difference(fs, params.diff_threshold, params.quant_bins)
    result = detect_motion(fs, params, opts, d=d)

    if fs.masks is not None:
        metrics = motion_metrics_frame(fs, result, d)
        late = metrics[metrics["frame"] >= args.burn_in]
        for column in ("iou_dynbp", "iou_difference", "iou_dilated"):
            print(f"mean {column} over frames {args.burn_in}+: {late[column].mean():.4f}")
    else:
        metrics = pd.DataFrame({
            "frame": np.arange(fs.length),
            "moving_pixels": result.masks.sum(axis=(1, 2)),
            "converged": [True] + list(result.converged),
        })
    write_csv(metrics, manifest.add_output(_out(args, "motion_metrics.csv")))
    if args.write_masks:
        for k, mask in enumerate(result.masks):
            write_pgm(manifest.add_output(_out(args, f"masks/mask_{k:03d}.pgm")), mask)
    converged = all(result.converged)
    manifest.converged["dynbp"] = converged
    return _status(converged)


# ---------- main ----------
def _recorded_options(args, opts: Optional[SolverOptions]) -> dict:
    recorded = {
        k: (str(v) if isinstance(v, Path) else v)
        for k, v in vars(args).items()
        if k not in ("handler", "command") and v is not None
    }
    if opts is not None:
        recorded["solver"] = dataclasses.asdict(opts)
    return recorded


def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.log_level)

    opts = None
    if hasattr(args, "tol"):
        try:
            opts = solver_options(args)
        except ValueError as exc:
            parser.error(str(exc))

    manifest = RunManifest(args.command, argv, seeds={"seed": args.seed})
    try:
        code = args.handler(args, opts, manifest)
    except ValidationError as exc:
        logger.error(f"invalid model file: {exc}")
        code = EXIT_INVALID
    except UsageError as exc:
        logger.error(f"{args.command}: {exc}")
        code = EXIT_USAGE
    except (InferenceError, OSError) as exc:
        logger.error(f"{args.command} failed: {exc}")
        code = EXIT_INVALID
    except ValueError as exc:
        logger.error(f"{args.command}: {exc}")
        code = EXIT_USAGE

    manifest.options = _recorded_options(args, opts)
    manifest.exit_code = code
    manifest.write(args.out_dir)
    return code


if __name__ == "__main__":
    sys.exit(main())
