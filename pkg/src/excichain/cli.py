"""Command-line interface.

Subcommands mirror the experiment kinds; each loads (or builds) a
config, runs the ensemble and writes plot-ready tables plus a manifest
into the output directory.  Exit status is nonzero on integration
errors or failed validation.
"""

from __future__ import annotations

import argparse
import json
import sys

from .dynamics import IntegrationError
from .experiments import (ExperimentConfig, default_config, emit,
                          run_experiment, run_validate)

_SUBCOMMANDS = {
    "spread": "spreading",
    "diffusion-scan": "diffusion-scan",
    "threshold-scan": "threshold-scan",
    "spectrum": "spectrum",
    "efficiency": "efficiency",
    "dephasing-efficiency": "dephasing-efficiency",
    "validate": "validate",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="excichain",
        description="Spreading, spectra and transport efficiency of a "
                    "quantum excitation on a thermal nonlinear chain.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _SUBCOMMANDS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", help="JSON config file (overrides profile defaults)")
        p.add_argument("--seed", type=int, default=None, help="master seed")
        p.add_argument("--profile", choices=("desk", "paper"), default="desk",
                       help="scale of the built-in defaults")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--workers", type=int, default=1,
                       help="trajectory worker processes")
    return parser


def load_config(args) -> ExperimentConfig:
    kind = _SUBCOMMANDS[args.command]
    if args.config:
        with open(args.config) as fh:
            config = ExperimentConfig.from_dict(json.load(fh))
        if config.kind != kind:
            raise SystemExit(
                f"config kind {config.kind!r} does not match subcommand {kind!r}")
    else:
        config = default_config(kind, profile=args.profile)
    if args.seed is not None:
        config.seed = args.seed
    config.workers = args.workers
    return config


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    config = load_config(args)
    if config.kind == "validate":
        report = run_validate(config)
        for check in report["checks"]:
            status = "PASS" if check["pass"] else "FAIL"
            print(f"{status}  {check['name']}: value={check['value']:.3e} "
                  f"tol={check['tolerance']:.3e}")
        print("validation:", "PASSED" if report["passed"] else "FAILED")
        return 0 if report["passed"] else 1
    try:
        result = run_experiment(config)
    except IntegrationError as err:
        print(f"integration error: {err}", file=sys.stderr)
        return 1
    manifest = emit(result, args.out)
    print(f"wrote {', '.join(manifest.outputs)} and manifest.json to {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
