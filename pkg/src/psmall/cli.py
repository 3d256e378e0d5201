"""Command-line entry point.

Two verbs: campaign runs (``--mode`` plus instance files or directories)
and instance generation (``--mode generate``).  A JSON config file given
via ``--config`` overrides any flag it names; the ``PSMALL_OUT`` variable
supplies the default output directory.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction

from .campaign import MODES, CampaignConfig, run
from .errors import PsmallError
from .generate import KINDS, generate_instances

ENV_OUT_DIR = "PSMALL_OUT"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="psmall",
        description=(
            "Certificate engine for p-small covers and delta-small "
            "large-supremum events of positive processes."
        ),
    )
    parser.add_argument(
        "--mode",
        required=True,
        choices=MODES + ("generate",),
        help="campaign mode, or 'generate' to emit instance files",
    )
    parser.add_argument(
        "instances",
        nargs="*",
        help="instance files or directories (campaign modes)",
    )
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--trials", type=int, default=100_000)
    parser.add_argument(
        "--out",
        default=None,
        help=f"output directory (default: ${ENV_OUT_DIR} or ./out)",
    )
    parser.add_argument("--L", default=None, help="threshold level multiplier")
    parser.add_argument("--K", default=None, help="amplification constant")
    parser.add_argument("--c", default=None, help="badness level in (0,1]")
    parser.add_argument("--C", default=None, help="split constant in [9,11]")
    parser.add_argument("--max-n", type=int, default=20, dest="max_n")
    parser.add_argument(
        "--exact-only",
        action="store_true",
        help="refuse any Monte Carlo fallback",
    )
    parser.add_argument(
        "--config",
        default=None,
        help="JSON file whose entries override the flags above",
    )
    # generation-only options
    parser.add_argument("--kind", choices=KINDS, help="instance kind to generate")
    parser.add_argument("--count", type=int, default=10)
    return parser


def _apply_config_file(args: argparse.Namespace):
    if not args.config:
        return
    with open(args.config, "r", encoding="utf-8") as fh:
        overrides = json.load(fh)
    allowed = {
        "mode", "seed", "trials", "out", "L", "K", "c", "C",
        "max_n", "exact_only", "kind", "count", "instances",
    }
    for key, value in overrides.items():
        if key not in allowed:
            raise ValueError(f"unknown config key {key!r}")
        setattr(args, key, value)


def _collect_instances(paths) -> tuple:
    collected = []
    for path in paths:
        if os.path.isdir(path):
            for entry in sorted(os.listdir(path)):
                if entry.endswith(".txt"):
                    collected.append(os.path.join(path, entry))
        else:
            collected.append(path)
    return tuple(collected)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config_file(args)
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    out_dir = args.out or os.environ.get(ENV_OUT_DIR) or "out"

    if args.mode == "generate":
        if not args.kind:
            print("error: --mode generate requires --kind", file=sys.stderr)
            return 2
        try:
            paths = generate_instances(
                args.kind, args.count, args.max_n, args.seed, out_dir
            )
        except (PsmallError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        for path in paths:
            print(path)
        return 0

    try:
        config = CampaignConfig(
            mode=args.mode,
            instances=_collect_instances(args.instances),
            seed=args.seed,
            trials=args.trials,
            out_dir=out_dir,
            level=Fraction(args.L) if args.L is not None else Fraction(221),
            K=Fraction(args.K) if args.K is not None else None,
            c=Fraction(args.c) if args.c is not None else Fraction(1, 2),
            C=Fraction(args.C) if args.C is not None else None,
            max_n=args.max_n,
            exact_only=args.exact_only,
        )
    except (ValueError, ZeroDivisionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    report = run(config)
    text_path, csv_path = report.write(out_dir)
    print(report.to_text(), end="")
    print(f"wrote {text_path}")
    print(f"wrote {csv_path}")
    return 0 if report.ok else 1


if __name__ == "__main__":
    sys.exit(main())
