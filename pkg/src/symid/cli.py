"""Command-line interface.

Subcommands map onto pipeline stages; each one reads and writes the
documented artifact formats in the output directory, so stages compose via
files. ``run`` executes a contiguous stage range (all stages by default).

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import pipeline, signal_io
from .errors import SchemaViolation, SymidError

OUT_DIR_ENV = "SYMID_OUT"


class _UsageError(Exception):
    def __init__(self, code, message):
        self.code = code
        super().__init__(message)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors must exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        raise _UsageError(1, f"{self.prog}: error: {message}")


def _add_common(parser):
    parser.add_argument("--config", metavar="PATH", help="YAML config file")
    parser.add_argument("--seed", type=int, metavar="N",
                        help="override (or supply) the config seed")
    parser.add_argument("--out", metavar="DIR",
                        help=f"output directory (default: ${OUT_DIR_ENV} or '.')")


def _add_input(parser):
    parser.add_argument("--input", metavar="PATH", help="input series CSV")
    parser.add_argument("--column", default="value", metavar="NAME",
                        help="series column name or 0-based index (default: value)")
    parser.add_argument("--generate", choices=["rossler"],
                        help="use the builtin generator instead of --input")


def build_parser():
    parser = _Parser(prog="symid",
                     description="Attractor symmetry mining and reduced-model identification.")
    sub = parser.add_subparsers(dest="command", required=True)

    specs = [
        ("generate", "generate the benchmark series", False),
        ("embed", "delay-embed the series into a trajectory", True),
        ("fragments", "place markers and enumerate candidate fragments", False),
        ("normalize", "normalize fragments into descriptors", False),
        ("distances", "spectral signatures and the pairwise distance matrix", False),
        ("select", "genetic selection of the best disjoint fragment set", False),
        ("identify", "fit the reduced discrete model", False),
        ("simulate", "simulate the fitted model", False),
        ("compare", "compare source and simulated dynamics", False),
    ]
    for name, help_text, takes_input in specs:
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        if takes_input:
            _add_input(p)

    p_run = sub.add_parser("run", help="run a contiguous stage range (default: all)")
    _add_common(p_run)
    _add_input(p_run)
    p_run.add_argument("--stages", default="acquire..compare", metavar="A..B",
                       help="stage range, e.g. normalize..select "
                            f"(stages: {', '.join(pipeline.STAGES)})")
    return parser


def _resolve_config(args):
    if args.config:
        cfg = signal_io.parse_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        return cfg, args.config
    if args.seed is None:
        raise SchemaViolation("seed", "required: pass --config with a seed, or --seed")
    return signal_io.config_from_dict({"seed": args.seed}), None


def _resolve_input(args):
    if getattr(args, "input", None):
        return pipeline.InputSpec(mode="file", path=args.input, column=_column(args.column))
    return pipeline.InputSpec(mode="generate")


def _column(text):
    return int(text) if isinstance(text, str) and text.lstrip("-").isdigit() else text


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return exc.code

    try:
        cfg, _ = _resolve_config(args)
        out_dir = args.out or os.environ.get(OUT_DIR_ENV) or "."

        if args.command == "run":
            stages = pipeline.parse_stage_range(args.stages)
        elif args.command == "generate":
            stages = ("acquire", "acquire")
        elif args.command == "embed":
            acquire_first = getattr(args, "input", None) or getattr(args, "generate", None)
            stages = ("acquire", "embed") if acquire_first else ("embed", "embed")
        else:
            stage = {"fragments": "fragments", "normalize": "normalize",
                     "distances": "distances", "select": "select",
                     "identify": "identify", "simulate": "simulate",
                     "compare": "compare"}[args.command]
            stages = (stage, stage)

        manifest = pipeline.run_pipeline(cfg, _resolve_input(args), out_dir, stages)
        ran = [s["name"] for s in manifest["stages"] if not s.get("cached")]
        print(f"completed stages: {', '.join(ran)} -> {out_dir}")
        return 0
    except SymidError as exc:
        stage = getattr(exc, "stage", None)
        where = f" [stage: {stage}]" if stage else ""
        print(f"error{where}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
