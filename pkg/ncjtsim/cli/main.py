"""
Command-line entry point

    python main.py --scheme nfncjt --users-per-trp 3 --seeds 1 2 3 --out results
    python main.py --suite paper --seeds 1 2 3 4 5 6 7 8 9 10 --workers 4

Exit codes: 0 success, 2 configuration or simulation error, 3 determinism failure.
"""

import argparse
import logging
import sys
from typing import Any, Dict, List, Optional

from ncjtsim import __version__
from ncjtsim.cli.experiment import run_experiment
from ncjtsim.core.config import SCHEMES, ConfigManager, parse_config
from ncjtsim.core.exceptions import ConfigurationError, DeterminismError, SimulationError

logger = logging.getLogger("ncjtsim.cli")

EXIT_OK = 0
EXIT_ERROR = 2
EXIT_NONDETERMINISTIC = 3

# flag dest -> dotted config key
FLAG_KEYS = {
    "scheme": "run.scheme",
    "users_per_trp": "run.users_per_trp",
    "max_coord": "run.max_coord",
    "seeds": "run.seeds",
    "ttis": "run.ttis",
    "out": "run.out",
    "workers": "run.workers",
    "log_level": "logging.level",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ncjtsim",
        description="System-level simulator for downlink multi-TRP coordination (DPS, F-NCJT, NF-NCJT)",
    )
    parser.add_argument("--config", metavar="PATH", help="YAML or JSON config file; missing file means defaults")
    parser.add_argument("--scheme", choices=SCHEMES)
    parser.add_argument("--users-per-trp", type=int)
    parser.add_argument("--max-coord", type=int)
    parser.add_argument("--seeds", type=int, nargs="+", metavar="SEED")
    parser.add_argument("--ttis", type=int)
    parser.add_argument("--out", metavar="DIR")
    parser.add_argument("--suite", choices=["paper"],
                        help="run every scheme at 3 and 5 users/TRP plus NF-NCJT over max_coord 2..4")
    parser.add_argument("--dump-grids", action="store_true", help="write per-TTI schedule grids")
    parser.add_argument("--dump-links", action="store_true", help="write per-TTI link gains")
    parser.add_argument("--dump-sinr", action="store_true", help="write per-layer SINR and SE")
    parser.add_argument("--workers", type=int, help="parallel runs (default 1)")
    parser.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    parser.add_argument("--set", dest="assignments", action="append", default=[], metavar="KEY=VALUE",
                        help="override any config key, e.g. --set channel.rho=0.95")
    parser.add_argument("--emit-config", action="store_true", help="print the resolved config as YAML and exit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return parser


def collect_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """Dotted-key overrides from flags; --set first so dedicated flags win"""
    overrides: Dict[str, Any] = {}
    for item in args.assignments:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ConfigurationError("override must look like KEY=VALUE", key="--set", value=item)
        overrides[key.strip()] = ConfigManager._convert_value(value.strip())
    for dest, key in FLAG_KEYS.items():
        value = getattr(args, dest, None)
        if value is not None:
            overrides[key] = value
    for flag in ("dump_grids", "dump_links", "dump_sinr"):
        if getattr(args, flag):
            overrides[f"debug.{flag}"] = True
    return overrides


def setup_logging(level: str, fmt: str) -> None:
    logging.basicConfig(level=getattr(logging, level), format=fmt, force=True)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)

    try:
        config = parse_config(args.config, collect_overrides(args))
    except ConfigurationError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR

    if args.emit_config:
        sys.stdout.write(config.to_yaml())
        return EXIT_OK

    setup_logging(config.logging.level, config.logging.format)
    logger.info(f"ncjtsim {__version__}: scheme={config.run.scheme} suite={args.suite or '-'} "
                f"seeds={config.run.seeds} ttis={config.run.ttis}")

    try:
        report = run_experiment(config, suite=args.suite)
    except DeterminismError as e:
        logger.error(f"Determinism self-check failed: {e} (expected {e.expected}, got {e.actual})")
        return EXIT_NONDETERMINISTIC
    except SimulationError as e:
        logger.error(str(e))
        return EXIT_ERROR

    misses = [c.name for c in report.checks if not c.passed]
    if misses:
        logger.warning(f"{len(misses)} directional check(s) missed: {', '.join(misses)}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
