"""Command-line entry point: ``run``, ``summarize`` and ``validate``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import harness
from .config import ConfigError, from_flat, load_flat
from .forest import PolicyKind

log = logging.getLogger("hybridswarm")


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    # every default is None so that only flags given on the command line
    # override values from --config
    p.add_argument("--config", type=Path, help="YAML file with the same keys as the flags")
    p.add_argument("--scenario", choices=harness.SCENARIOS)
    p.add_argument("--policy", choices=[k.value for k in PolicyKind])
    p.add_argument("--delta", type=int, help="hybrid root-formation threshold")
    p.add_argument("--rho", type=int, help="hierarchical root-formation threshold")
    p.add_argument("--agents", type=int)
    p.add_argument("--duration", type=float, help="seconds of simulated time")
    p.add_argument("--replicates", type=int)
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--no-active-recruitment", dest="active_recruitment", action="store_const",
                   const=False)
    p.add_argument("--no-dissolution", dest="dissolution", action="store_const", const=False)
    p.add_argument("--event-rate", type=float, help="events per second")
    p.add_argument("--comm-range", type=float)
    p.add_argument("--sensing-range", type=float)
    p.add_argument("--d-min", type=float)
    p.add_argument("--gamma-max", type=int)
    p.add_argument("--out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hybridswarm",
                                     description="Swarm coordination experiments.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario and write logs and a summary")
    _add_model_flags(run)
    run.add_argument("--workers", type=int, default=1, help="parallel replicate processes")

    summ = sub.add_parser("summarize", help="recompute summaries from logs")
    summ.add_argument("--in", dest="in_dir", required=True, type=Path)

    val = sub.add_parser("validate", help="check a config file")
    val.add_argument("--config", required=True, type=Path)
    return parser


def merged_settings(args: argparse.Namespace) -> dict:
    """Config-file values overlaid with any flags given explicitly."""
    flat = load_flat(args.config) if args.config else {}
    for key in ("scenario", "policy", "delta", "rho", "agents", "duration", "replicates",
                "seed", "active_recruitment", "dissolution", "event_rate", "comm_range",
                "sensing_range", "d_min", "gamma_max", "out"):
        v = getattr(args, key)
        if v is not None:
            flat[key] = v
    return flat


def cmd_run(args) -> int:
    flat = merged_settings(args)
    scenario = flat.pop("scenario", "custom")
    cfg = from_flat(flat)
    out = Path(flat.get("out", cfg.output_dir))
    sections = harness.run_experiment(scenario, cfg, out, workers=args.workers,
                                      progress=lambda m: print(m, flush=True))
    print(format_table(sections))
    print(f"wrote {out / 'summary.json'}")
    return 0


def cmd_summarize(args) -> int:
    sections = harness.summarize_dir(args.in_dir)
    print(format_table(sections))
    return 0


def cmd_validate(args) -> int:
    flat = load_flat(args.config)
    scenario = flat.pop("scenario", "custom")
    cfg = from_flat(flat)
    harness.expand(scenario, cfg)
    print(f"{args.config}: ok (scenario {scenario}, {cfg.label}, fingerprint {cfg.fingerprint()})")
    return 0


def format_table(sections: dict) -> str:
    rows = [f"{'config':24s} {'reps':>4s} {'wait med':>9s} {'iqr':>6s} {'op/s':>6s} {'intra/s':>8s} {'in trees':>8s}"]
    for name, s in sections.items():
        med = "-" if s["waiting_median"] is None else f"{s['waiting_median']:.1f}"
        iq = "-" if s["waiting_iqr"] is None else f"{s['waiting_iqr']:.1f}"
        trees = s.get("in_trees_plateau")
        rows.append(f"{name:24s} {s['replicates']:4d} {med:>9s} {iq:>6s} "
                    f"{s['operator_msgs_per_s']:6.2f} {s['intra_msgs_per_s']:8.1f} "
                    f"{'-' if trees is None else format(trees, '.1f'):>8s}")
    return "\n".join(rows)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handlers = {"run": cmd_run, "summarize": cmd_summarize, "validate": cmd_validate}
    try:
        return handlers[args.command](args)
    except (ConfigError, harness.ExperimentError, ValueError, OSError) as exc:
        print(f"hybridswarm {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
