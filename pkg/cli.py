#!/usr/bin/env python3
"""
Command-line entry point for the curvature laboratory.

    python cli.py check --model "fs(2)" --cones pic,pinch
    python cli.py evolve --model "const(3,1.0)" --t-end 0.2 --out run.yaml
"""

import os
import sys
import logging
import argparse
from typing import List, Optional

from dotenv import load_dotenv

# Load environment variables
load_dotenv()

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def _optional_int(name: str) -> Optional[int]:
    value = os.getenv(name)
    return int(value) if value else None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Curvature operator laboratory")
    parser.add_argument("command", choices=["check", "evolve", "invariance", "convergence", "boundary",
                                            "crosscheck", "emit-model"], help="What to run")
    parser.add_argument("--config", help="YAML file with config fields; flags override it")
    parser.add_argument("--model", help='Model spec, e.g. "const(4,1.0)" or "shift(rand(4,seed=3),pic,0.0)"')
    parser.add_argument("--input", help="Tensor file (sym-reduced YAML)")
    parser.add_argument("--cones", help="Comma-separated cones, e.g. pic,pic1,pinch(0.25)")
    parser.add_argument("--t-end", type=float, dest="t_end", help="Flow time for evolve")
    parser.add_argument("--samples", type=int, help="Number of samples")
    parser.add_argument("--horizon", type=float, help="Flow time cap for invariance and convergence")
    parser.add_argument("--dimension", "-n", type=int, help="Dimension of sampled random tensors")
    parser.add_argument("--seed", type=int, default=_optional_int("CURVLAB_SEED"), help="Root seed")
    parser.add_argument("--out", help="Report path (tensor path for emit-model)")
    parser.add_argument("--trajectory", help="Columnar trajectory export for evolve")
    parser.add_argument("--dump-every", type=int, dest="dump_every", help="Dump the state every k steps (evolve)")
    parser.add_argument("--rel-tol", type=float, dest="rel_tol", help="Integrator relative tolerance")
    parser.add_argument("--restarts", type=int, help="Frame optimizer restarts")
    parser.add_argument("--threads", type=int, default=_optional_int("CURVLAB_THREADS"), help="Worker processes")
    parser.add_argument("--lambda-range", choices=["01", "sym"], dest="lambda_range", help="Weight range for PIC1/PIC2")
    parser.add_argument("--method", choices=["rk4", "rk45"], help="Integrator")
    parser.add_argument("--normalize", type=float, help="Record diagnostics at this fixed scalar curvature")
    parser.add_argument("--settings", dest="settings_file", default=os.getenv("CURVLAB_CONFIG"),
                        help="Defaults file (config/defaults.yaml)")
    parser.add_argument("--verbose", "-v", action="count", default=0, help="More logging (-v info, -vv debug)")
    return parser


def configure_logging(verbose: int) -> None:
    if verbose >= 2:
        level = logging.DEBUG
    elif verbose == 1:
        level = logging.INFO
    else:
        level = getattr(logging, os.getenv("CURVLAB_LOG_LEVEL", "WARNING").upper(), logging.WARNING)
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)

    # Import after logging and environment are set up
    from app import human_summary, load_config, run
    from utils.errors import ConfigError, CurvatureLabError
    from utils.reports import load_yaml

    data = {}
    if args.config:
        try:
            with open(args.config, "r") as f:
                data = load_yaml(f.read()) or {}
        except OSError as e:
            print(f"Error: cannot read config {args.config}: {str(e)}", file=sys.stderr)
            return 1
    flags = {k: v for k, v in vars(args).items() if k != "config" and v is not None}
    if not args.verbose:
        flags.pop("verbose", None)
    data.update(flags)

    try:
        config = load_config(data)
        report = run(config)
    except (ConfigError, CurvatureLabError) as e:
        print(f"Error: {str(e)}", file=sys.stderr)
        return 1

    print(human_summary(report))
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
