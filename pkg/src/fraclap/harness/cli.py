"""Command line entry point: ``fraclap <experiment> --config FILE --out DIR [--seed N]``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ..errors import ConfigError
from .config import KINDS, load_config
from .runner import run, summary_line


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fraclap", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        sp = sub.add_parser(kind, help=f"run the {kind} experiment")
        sp.add_argument("--config", required=True, help="YAML or JSON experiment file")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="override the config seed")
        sp.add_argument("--no-figures", action="store_true", help="skip PNG output")
        sp.add_argument("--jobs", type=int, default=None, help="concurrent independent solves")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    try:
        cfg = load_config(args.config, seed=args.seed, out=str(out))
        if cfg.experiment != args.command:
            raise ConfigError(f"config describes {cfg.experiment!r}, command was {args.command!r}")
        if args.jobs is not None:
            cfg.options["jobs"] = args.jobs
    except ConfigError as exc:
        out.mkdir(parents=True, exist_ok=True)
        (out / "error.json").write_text(json.dumps(exc.to_record(), indent=2, sort_keys=True) + "\n")
        print(f"status=error\tcode={exc.code}\tmessage={exc}")
        return 2
    status = run(cfg, out, figures=not args.no_figures)
    print(summary_line(out))
    return status


if __name__ == "__main__":
    sys.exit(main())
