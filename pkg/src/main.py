import argparse
import asyncio
import logging
import os
import sys
from typing import List, Optional

from dotenv import load_dotenv

from src.modules.errors import MeshError
from src.modules.run_config import known_formats
from src.orchestrator import COMMANDS, EXIT_INPUT, EXIT_OK, convert, run_batch
from utils.logging_config import setup_logging


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="physcompat",
        description="Rest-shape optimization, physical-compatibility metrics and dynamic simulation of tetrahedral meshes.",
    )
    parser.add_argument("--config", action="append", default=[], help="Run config (YAML or JSON); repeat for a batch.")
    parser.add_argument("--output", default=None, help="Output directory (overrides output_dir of the config).")
    parser.add_argument("--jobs", type=int, default=1, help="Configs processed concurrently in batch mode.")
    parser.add_argument("--log-level", default=os.getenv("PHYSCOMPAT_LOG_LEVEL", "INFO"))
    parser.add_argument("--log-file", default=os.getenv("PHYSCOMPAT_LOG_FILE"))

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("equilibrium", help="Static equilibrium at the identity plastic field.")
    sub.add_parser("optimize", help="Optimize the plastic field for the configured objective.")

    metrics = sub.add_parser("metrics", help="Physical-compatibility metrics.")
    metrics.add_argument("--plastic", default=None, help="Plastic field file (identity when omitted).")
    metrics.add_argument("--pair", default=None, help="Target mesh for the silhouette loss.")
    metrics.add_argument("--require-converged", action="store_true")
    metrics.add_argument("--volume-weighted", action="store_true")

    simulate = sub.add_parser("simulate", help="Backward-Euler dynamic simulation.")
    simulate.add_argument("--plastic", default=None, help="Plastic field file (identity when omitted).")

    conv = sub.add_parser("convert", help="Translate a mesh to .tet, Medit .mesh and/or a boundary OBJ.")
    conv.add_argument("--input", required=True)
    conv.add_argument("--input-format", choices=known_formats(), default=None)
    conv.add_argument("--to-tet", default=None)
    conv.add_argument("--to-obj", default=None)
    conv.add_argument("--to-mesh", default=None)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """
    Entry point of the physcompat command line.

    Returns:
        int: Process exit code (0 success, 2 input or configuration error, 3 numerical failure).
    """
    load_dotenv()
    args = build_parser().parse_args(argv)
    try:
        setup_logging(args.log_level, args.log_file)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT

    if args.command == "convert":
        try:
            written = convert(args.input, args.input_format, args.to_tet, args.to_obj, args.to_mesh)
        except (MeshError, FileNotFoundError, ValueError) as e:
            logging.error(f"Conversion failed: {e}")
            print(f"error: {e}", file=sys.stderr)
            return EXIT_INPUT
        logging.info(f"Converted {args.input}: {written}")
        return EXIT_OK

    if args.command not in COMMANDS:
        return EXIT_INPUT
    if not args.config:
        print("error: --config is required for this command", file=sys.stderr)
        return EXIT_INPUT
    if args.jobs < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_INPUT

    options = {}
    if args.command in ("metrics", "simulate"):
        options["plastic"] = args.plastic
    if args.command == "metrics":
        options.update(pair=args.pair, require_converged=args.require_converged, volume_weighted=args.volume_weighted)

    logging.info(f"Running {args.command} for {len(args.config)} config(s) with {args.jobs} job(s)")
    codes = asyncio.run(run_batch(args.command, args.config, args.jobs, args.output, **options))
    return max(codes)


if __name__ == "__main__":
    sys.exit(main())
