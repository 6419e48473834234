"""Command-line entry point.

Verbs:
  run       execute a configured experiment end to end
  validate  check a configuration and report every violation
  oracle    evaluate the matching ground truth standalone
  metrics   recompute metrics for a saved checkpoint
  profile   export figure data for a saved checkpoint

Exit codes: 0 success, 1 validation failure, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np
import yaml

from . import metrics as metrics_mod
from .ansatz import load_checkpoint
from .config import apply_overrides, load_config, parse_config
from .errors import CommittorError
from .experiments import build_truth, derive_seeds, run_experiment, _interior_batch, _write_profiles
from .metrics import AnsatzEvaluator


def _add_common(parser, checkpoint=False, out_required=False):
    parser.add_argument("--config", required=True, help="path to a YAML experiment configuration")
    parser.add_argument("--seed", type=int, default=None, help="override the master seed")
    parser.add_argument("--out", default=None, required=out_required, help="output directory")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="dotted-path configuration override (repeatable)",
    )
    if checkpoint:
        parser.add_argument("--checkpoint", required=True, help="saved model checkpoint")


def _load(args):
    with open(args.config) as fh:
        data = yaml.safe_load(fh)
    if args.overrides:
        data = apply_overrides(data, args.overrides)
    if args.seed is not None:
        data["seed"] = args.seed
    return parse_config(data)


def _out_dir(args, cfg):
    return args.out or os.path.join("out", cfg.name)


def cmd_run(args):
    cfg = _load(args)
    problems = cfg.validate()
    if problems:
        for p in problems:
            print(p, file=sys.stderr)
        return 1
    result = run_experiment(cfg, _out_dir(args, cfg), overrides=args.overrides)
    rep = result.metrics_report
    print(f"{cfg.name}: rel_l2_error={rep.rel_l2_error:.4g} "
          f"rel_rate_error={rep.rel_rate_error:.4g} "
          f"boundary_rms=({result.train_report.boundary_rms_a:.2e},"
          f"{result.train_report.boundary_rms_b:.2e}) "
          f"converged={result.train_report.converged}")
    print(f"artifacts written to {result.out_dir}")
    return 0


def cmd_validate(args):
    cfg = _load(args)
    problems = cfg.validate()
    for p in problems:
        print(p, file=sys.stderr)
    if not problems:
        print("configuration is valid")
    return 1 if problems else 0


def cmd_oracle(args):
    cfg = _load(args)
    problems = cfg.validate()
    if problems:
        for p in problems:
            print(p, file=sys.stderr)
        return 1
    potential = cfg.build_potential()
    region_a, region_b = cfg.build_region("a"), cfg.build_region("b")
    truth = build_truth(cfg, potential, region_a, region_b)
    if args.at:
        point = np.asarray([float(v) for v in args.at.split(",")], dtype=float)
        value = float(np.atleast_1d(truth.value(point[None, :]))[0])
        print(f"q({args.at}) = {value!r}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        seeds = derive_seeds(cfg.seed)
        _write_profiles(cfg, args.out, truth, truth, region_a, region_b, seeds)
        print(f"oracle profile written to {args.out}")
    return 0


def _model_from_checkpoint(args):
    ansatz, theta, _ = load_checkpoint(args.checkpoint)
    return ansatz, theta


def cmd_metrics(args):
    cfg = _load(args)
    problems = cfg.validate()
    if problems:
        for p in problems:
            print(p, file=sys.stderr)
        return 1
    ansatz, theta = _model_from_checkpoint(args)
    potential = cfg.build_potential()
    region_a, region_b = cfg.build_region("a"), cfg.build_region("b")
    truth = build_truth(cfg, potential, region_a, region_b)
    seeds = derive_seeds(cfg.seed)
    test_batch = _interior_batch(
        cfg, potential, region_a, region_b, cfg.metrics["n_test"], seeds["test"],
        scheme=cfg.metrics.get("scheme", "langevin"),
    )
    model = AnsatzEvaluator(ansatz, theta)
    report = metrics_mod.compute_report(
        model, truth, cfg.sampler["temperature"],
        test_batch.interior_points, test_batch.interior_weights,
        seed=seeds["test"], measure=cfg.metrics.get("scheme", "langevin"),
    )
    os.makedirs(args.out, exist_ok=True)
    metrics_mod.append_metrics_csv(os.path.join(args.out, "metrics.csv"), cfg.name, report)
    metrics_mod.write_report(os.path.join(args.out, "metrics_report.txt"), report)
    print(f"rel_l2_error={report.rel_l2_error:.4g} rel_rate_error={report.rel_rate_error:.4g}")
    return 0


def cmd_profile(args):
    cfg = _load(args)
    problems = cfg.validate()
    if problems:
        for p in problems:
            print(p, file=sys.stderr)
        return 1
    ansatz, theta = _model_from_checkpoint(args)
    potential = cfg.build_potential()
    region_a, region_b = cfg.build_region("a"), cfg.build_region("b")
    truth = build_truth(cfg, potential, region_a, region_b)
    os.makedirs(args.out, exist_ok=True)
    seeds = derive_seeds(cfg.seed)
    _write_profiles(cfg, args.out, AnsatzEvaluator(ansatz, theta), truth,
                    region_a, region_b, seeds)
    print(f"profiles written to {args.out}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="committor",
        description="Variational committor-function experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a configured experiment")
    _add_common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_val = sub.add_parser("validate", help="validate a configuration")
    _add_common(p_val)
    p_val.set_defaults(func=cmd_validate)

    p_orc = sub.add_parser("oracle", help="evaluate the ground truth standalone")
    _add_common(p_orc)
    p_orc.add_argument("--at", default=None, help="comma-separated point to evaluate")
    p_orc.set_defaults(func=cmd_oracle)

    p_met = sub.add_parser("metrics", help="recompute metrics from a checkpoint")
    _add_common(p_met, checkpoint=True, out_required=True)
    p_met.set_defaults(func=cmd_metrics)

    p_pro = sub.add_parser("profile", help="export figure data from a checkpoint")
    _add_common(p_pro, checkpoint=True, out_required=True)
    p_pro.set_defaults(func=cmd_profile)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except CommittorError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
