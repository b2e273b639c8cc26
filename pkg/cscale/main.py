#!/usr/bin/env python3
# Copyright 2025 The cscale Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""
Command-line entry point: generate, embed, detect, network, evaluate and sweep
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

# Add application directory to path
sys.path.insert(0, str(Path(__file__).parent))

from config.detection_config import PRESETS
from config.settings import settings
from core import commands
from core.errors import ContinuityScalingError, UsageError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


def configure_logging(verbose: bool = False, quiet: bool = False) -> None:
    level = settings.numeric_log_level
    if verbose:
        level = logging.DEBUG
    elif quiet:
        level = logging.WARNING
    logging.basicConfig(
        level=level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        force=True,
    )


def _add_input_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--input", help="CSV file with one column per series")
    parser.add_argument("--cols", help="Comma-separated columns to use (default: all but the index column)")
    parser.add_argument("--index-col", help="Column holding time stamps, excluded from the series")


def _add_detection_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("detection")
    group.add_argument("--preset", choices=sorted(PRESETS), help="Named flag preset")
    group.add_argument("--config", help="key=value file of flag defaults (flags win)")
    group.add_argument("--embed-dim", type=int, help="Embedding dimension for every series")
    group.add_argument("--embed-lag", type=int, help="Embedding lag (samples) for every series")
    group.add_argument("--max-lag", type=int, help="Largest lag scanned by mutual information (default 20)")
    group.add_argument("--max-dim", type=int, help="Largest dimension scanned by false nearest neighbours (default 10)")
    group.add_argument("--mi-bins", type=int, help="Bins for mutual information (default floor(sqrt(T/5)))")
    group.add_argument("--fnn-rtol", type=float, help="False-neighbour distance ratio threshold (default 10)")
    group.add_argument("--fnn-atol", type=float, help="False-neighbour attractor-size threshold (default 2)")
    group.add_argument("--seed", type=int, help="Master seed for surrogates (64-bit)")
    group.add_argument("--eps-count", type=int, help="Number of radii N_eps (default 33)")
    group.add_argument("--eps-shrink", type=float, help="Smallest radius as a fraction of the diameter (default 0.001)")
    group.add_argument("--theiler", type=int, help="Theiler window in samples (default: one embedding window)")
    group.add_argument("--segments", type=int, help="Surrogate segments N_G (default 25)")
    group.add_argument("--replicates", type=int, help="Surrogate replicates Q (default 20)")
    group.add_argument("--alpha", type=float, help="Significance level (default 0.05)")
    group.add_argument("--dd", action="store_true", default=None,
                       help="Require the predecessor state to be a neighbour too (direct variables)")
    group.add_argument("--threads", type=int, help="Worker threads (results do not depend on it)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cscale", description="Continuity-scaling causal detection")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    parser.add_argument("-q", "--quiet", action="store_true", help="Warnings and errors only")
    sub = parser.add_subparsers(dest="command", required=True)

    # generate
    gen = sub.add_parser("generate", help="Write a benchmark system to CSV")
    gen.add_argument("system", choices=["logistic-pair", "ring", "tree", "lorenz"])
    gen.add_argument("--out", required=True, help="Output CSV")
    gen.add_argument("--truth-out", help="Write the true links as an edge file")
    gen.add_argument("--mu21", type=float, default=0.0, help="Coupling of series 1 into series 2")
    gen.add_argument("--mu12", type=float, default=0.0, help="Coupling of series 2 into series 1")
    gen.add_argument("--coupling", type=float, default=0.2, help="Link strength for ring/tree")
    gen.add_argument("--nodes", type=int, default=5, help="Ring size")
    gen.add_argument("--length", type=int, default=5000, help="Samples kept (maps)")
    gen.add_argument("--transient", type=int, default=1000, help="Iterations discarded (maps)")
    gen.add_argument("--initial-seed", type=int, help="Draw initial states with this seed (maps)")
    gen.add_argument("--dt", type=float, default=1e-3, help="Integration step (Lorenz)")
    gen.add_argument("--omega", type=float, default=0.05, help="Sampling interval (Lorenz)")
    gen.add_argument("--shift", type=float, default=0.0, help="Sampling time shift (Lorenz)")
    gen.add_argument("--samples", type=int, default=10000, help="Samples kept (Lorenz)")
    gen.add_argument("--transient-time", type=float, default=100.0, help="Time discarded (Lorenz)")
    gen.add_argument("--noise", type=float, default=0.0, help="Observation noise std as a fraction of the series std")
    gen.add_argument("--noise-seed", type=int, help="Seed for observation noise")
    gen.set_defaults(handler=commands.run_generate)

    # embed
    emb = sub.add_parser("embed", help="Report embedding parameters")
    _add_input_flags(emb)
    _add_detection_flags(emb)
    emb.add_argument("--out", help="Write the report as JSON")
    emb.add_argument("--dump-points", help="Directory for embedded vectors as CSV")
    emb.set_defaults(handler=commands.run_embed)

    # detect / network
    for name, handler, text in (
        ("detect", commands.run_detect, "Test both directions between two series"),
        ("network", commands.run_network, "Test every ordered pair of a table"),
    ):
        p = sub.add_parser(name, help=text)
        _add_input_flags(p)
        _add_detection_flags(p)
        p.add_argument("--out", default="results.json", help="Results JSON (default results.json)")
        p.add_argument("--curves-dir", help="Directory for per-direction scaling-curve CSVs")
        p.add_argument("--from-manifest", help="Repeat the run recorded in a results JSON")
        if name == "network":
            p.add_argument("--truth", help="Edge file (src->dst per line) for ROC evaluation")
        p.set_defaults(handler=handler)

    # evaluate
    ev = sub.add_parser("evaluate", help="ROC of stored scores against truth edges")
    ev.add_argument("--scores", required=True, help="Results JSON or src,dst,score CSV")
    ev.add_argument("--truth", required=True, help="Edge file (src->dst per line)")
    ev.add_argument("--out", help="Write the ROC as JSON")
    ev.set_defaults(handler=commands.run_evaluate)

    # sweep
    sw = sub.add_parser("sweep", help="Coupling / sampling sweeps of the benchmark pairs")
    sw.add_argument("system", choices=["logistic", "lorenz"])
    _add_detection_flags(sw)
    sw.add_argument("--mu21", dest="mu21_values", default="0,0.1,0.2,0.3", help="Comma-separated couplings")
    sw.add_argument("--omega", dest="omega_values", help="Comma-separated sampling intervals (Lorenz)")
    sw.add_argument("--seeds", default="0-9", help="Seeds, e.g. 0-9 or 1,4,7")
    sw.add_argument("--length", type=int, default=5000, help="Samples per logistic run")
    sw.add_argument("--samples", type=int, default=10000, help="Samples per Lorenz run")
    sw.add_argument("--out", required=True, help="Output CSV")
    sw.set_defaults(handler=commands.run_sweep)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE

    configure_logging(args.verbose, args.quiet)

    try:
        return args.handler(args)
    except UsageError as e:
        logger.error(f"Usage error: {e}")
        return EXIT_USAGE
    except (ContinuityScalingError, ValueError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
