"""Command line: s3crunch {flrw, geometry-verify, evolve, diagnose, validate, run}.

Exit codes: 0 ok, 1 runtime invariant violation, 2 configuration error,
3 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

from . import config as C
from . import io, pipeline
from .errors import ConfigError, CrunchError

OUT_ENV = "S3CRUNCH_OUT"

log = logging.getLogger("s3crunch")


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="TOML run configuration")
    common.add_argument("--out", metavar="DIR", help=f"output directory (the {OUT_ENV} environment variable wins)")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--mode", choices=("homogeneous", "grid"), help="override evolution.mode")
    common.add_argument("--quiet", action="store_true", help="only print errors")
    p = argparse.ArgumentParser(prog="s3crunch", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, text in [("flrw", "solve the Friedmann background and report the crunch time"),
                       ("geometry-verify", "run the frame oracle suite"),
                       ("evolve", "evolve perturbed data toward the crunch"),
                       ("diagnose", "limits, blowup rate and bounds from a stored trajectory"),
                       ("validate", "check a configuration file without running anything"),
                       ("run", "run the configured stages in order")]:
        sub.add_parser(name, parents=[common], help=text)
    return p


def _load(args) -> tuple[C.RunConfig, list]:
    if args.config:
        cfg, warnings = C.load_config(args.config)
    else:
        cfg, warnings = C.RunConfig(), []
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("--seed must be non-negative")
        cfg = dataclasses.replace(cfg, seed=args.seed)
    return cfg, warnings


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO, format="%(message)s")
    try:
        if args.command == "validate":
            if not args.config:
                raise ConfigError("validate needs --config")
            diags = C.validate(args.config)
            for d in diags:
                print(d, file=sys.stderr if d.level == "error" else sys.stdout)
            return 2 if any(d.level == "error" for d in diags) else 0
        cfg, warnings = _load(args)
        for w in warnings:
            log.warning("%s", w)
        out = io.output_dir(args.out, cfg.output.directory, OUT_ENV)
        stages = None if args.command == "run" else [args.command]
        results = pipeline.run_stages(cfg, out, stages, mode=args.mode)
        if not args.quiet:
            for name, res in results.items():
                print(f"{name}: wrote results to {out}")
        return 0
    except CrunchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
