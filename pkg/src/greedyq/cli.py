"""Command line front end over the experiment drivers.

Exit codes: 0 success, 2 argument or input contract error, 3 file IO
error, 4 training failure.
"""

import argparse
import json
import sys

from . import harness
from .errors import GreedyQError, TrainingError
from .harness import ExperimentConfig, parse_config


def _add_common(sub):
    sub.add_argument("--config", help="experiment config file (key = value)")
    sub.add_argument("--seed", type=int, help="experiment seed override")
    sub.add_argument("--problem", choices=["mvc", "maxcut", "tsp", "scp"],
                     help="problem kind override")
    sub.add_argument("--family", choices=list(harness.FAMILIES),
                     help="instance family override")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="greedyq",
        description="Learned greedy construction heuristics for graph "
                    "optimization, with classical baselines and exact "
                    "references.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a deterministic instance set")
    _add_common(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--stream", choices=["train", "val", "test"],
                   default="test")
    p.add_argument("--count", type=int, help="number of instances")

    p = sub.add_parser("train", help="train a value network")
    _add_common(p)
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--log", help="training log CSV path")
    p.add_argument("--init", help="warm-start model file")
    p.add_argument("--episodes", type=int, help="episode budget override")

    p = sub.add_parser("eval", help="score methods on the test stream")
    _add_common(p)
    p.add_argument("--out", required=True, help="results CSV path")
    p.add_argument("--model", help="trained model file")
    p.add_argument("--timings", help="timings CSV path")
    p.add_argument("--methods", help="comma separated method names")
    p.add_argument("--count", type=int, help="number of instances")

    p = sub.add_parser("generalize",
                       help="evaluate one model across size ranges")
    _add_common(p)
    p.add_argument("--model", required=True, help="trained model file")
    p.add_argument("--sizes", required=True,
                   help="comma separated ranges, e.g. 15-20,40-50")
    p.add_argument("--out", required=True, help="grid CSV path")
    p.add_argument("--count", type=int, help="instances per range")

    p = sub.add_parser("timesweep",
                       help="record per-method solve times and ratios")
    _add_common(p)
    p.add_argument("--out", required=True, help="sweep CSV path")
    p.add_argument("--model", help="trained model file")
    p.add_argument("--methods", help="comma separated method names")
    p.add_argument("--count", type=int, help="number of instances")

    p = sub.add_parser("active-search",
                       help="learn on one instance and report the best "
                            "solution found")
    _add_common(p)
    p.add_argument("instance", help="instance file (.graph or TSPLIB .tsp)")
    p.add_argument("--episodes", type=int, help="episode budget override")
    p.add_argument("--out", help="write the report as JSON here too")
    return ap


def _load_config(args) -> ExperimentConfig:
    overrides = {}
    for key in ("seed", "problem", "family"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    if getattr(args, "episodes", None) is not None and \
            args.command == "train":
        overrides["episodes"] = args.episodes
    if getattr(args, "methods", None):
        overrides["methods"] = tuple(
            m.strip() for m in args.methods.split(",") if m.strip())
    if args.config:
        return parse_config(args.config, **overrides)
    return ExperimentConfig(**overrides)


def _run(args) -> int:
    cfg = _load_config(args)
    if args.command == "generate":
        manifest = harness.cmd_generate(cfg, args.out, stream=args.stream,
                                        count=args.count)
        print(f"wrote {manifest['count']} instances to {args.out} "
              f"(config {manifest['config_hash'][:12]})")
        return 0
    if args.command == "train":
        result = harness.cmd_train(cfg, args.out, log_out=args.log,
                                   init_model=args.init)
        line = (f"trained {cfg.problem.value} model: {result.updates} "
                f"updates over {result.episodes_played} episodes")
        if result.best_val is not None:
            line += f", best validation ratio {result.best_val:.4f}"
        print(line)
        print(f"model written to {args.out} "
              f"(sha256 {harness.file_sha256(args.out)[:12]})")
        return 0
    if args.command == "eval":
        rows = harness.cmd_eval(cfg, args.out, model_path=args.model,
                                timings_out=args.timings,
                                methods=cfg.methods, count=args.count)
        for row in rows:
            if row[0] == "mean":
                print(f"{row[2]}: mean ratio {row[4]}")
        print(f"results written to {args.out}")
        return 0
    if args.command == "generalize":
        ranges = [harness._parse_sizes(part)
                  for part in args.sizes.split(",") if part]
        rows = harness.cmd_generalize(cfg, args.model, ranges, args.out,
                                      count=args.count)
        for train_tag, test_tag, n, ratio, ref in rows:
            print(f"train {train_tag} -> test {test_tag}: mean ratio "
                  f"{ratio} over {n} instances ({ref})")
        return 0
    if args.command == "timesweep":
        rows = harness.cmd_timesweep(cfg, args.out, model_path=args.model,
                                     methods=cfg.methods, count=args.count)
        print(f"wrote {len(rows)} timing points to {args.out}")
        return 0
    if args.command == "active-search":
        report = harness.cmd_active_search(cfg, args.instance,
                                           episodes=args.episodes)
        print(f"{report['instance']} ({report['problem']}): best value "
              f"{report['best_value']} over {report['episodes']} episodes")
        if "ratio" in report:
            print(f"ratio {report['ratio']:.4f} against "
                  f"{report['reference_kind']} value {report['reference']}")
        if args.out:
            with open(args.out, "w", encoding="utf-8") as fh:
                json.dump(report, fh, indent=1, sort_keys=True)
                fh.write("\n")
        return 0
    raise GreedyQError(f"unhandled command {args.command!r}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except TrainingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except GreedyQError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
