import argparse
import logging
import multiprocessing
import sys
from typing import List, Optional

import config
from controllers.command_controller import CommandController
from utils.errors import SteinError
from utils.performance import PerformanceMonitor

EXIT_ERROR = 2
EXIT_UNEXPECTED = 1
EXIT_INTERRUPTED = 130


def setup_logging(level: Optional[str] = None, log_file: Optional[str] = None):
    """
    Set up logging on stderr, plus a log file when one is configured.
    """
    level = level or config.LOG_LEVEL
    numeric_level = getattr(logging, level.upper(), None)
    if not isinstance(numeric_level, int):
        numeric_level = logging.WARNING

    log_format = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    logging.basicConfig(level=numeric_level, format=log_format, stream=sys.stderr, force=True)

    log_file = log_file or config.LOG_FILE
    if log_file:
        try:
            file_handler = logging.FileHandler(log_file)
            file_handler.setFormatter(logging.Formatter(log_format))
            logging.getLogger().addHandler(file_handler)
        except OSError as e:
            logging.getLogger(__name__).warning(f"Could not set up file logging: {e}")

    logger = logging.getLogger(__name__)
    logger.info(f"Python version: {sys.version}")
    logger.info(f"CPU count: {multiprocessing.cpu_count()}")
    logger.info(f"Log level: {level}")


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {value}")
    return value


def _add_format(parser: argparse.ArgumentParser, choices: List[str], default: str = "text"):
    parser.add_argument('--format', choices=choices, default=default, help='Output format')


def _add_target(parser: argparse.ArgumentParser):
    parser.add_argument('--dist', type=str, help='Distribution, shorthand (prodnormal:1,2) or JSON')
    parser.add_argument('--op', type=str, help='Operator JSON, @file or - for stdin')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='stein', description='Exact Stein operators for products and sums')
    parser.add_argument('--show-config', action='store_true', help='Show configuration and exit')
    parser.add_argument('--log-level', type=str, help='Logging level (default from LOG_LEVEL)')
    parser.add_argument('--log-file', type=str, help='Also log to this file')
    parser.add_argument('--timings', action='store_true', help='Print stage timings to stderr')
    parser.add_argument('--seed', type=int, default=None, help='Monte Carlo seed (default STEIN_SEED)')
    parser.add_argument('--workers', type=_positive_int, default=None, help='Number of worker threads (>= 1)')
    sub = parser.add_subparsers(dest='command')

    p = sub.add_parser('construct', help='Build a Stein operator')
    p.add_argument('--dist', type=str, help='Distribution, shorthand or JSON')
    p.add_argument('--product-iid-linear', action='store_true', help='Product of n iid from alpha, beta, a, b')
    p.add_argument('--alpha', type=str, default='1')
    p.add_argument('--beta', type=str, default='1')
    p.add_argument('--a', type=str, default='inf')
    p.add_argument('--b', type=str, default='inf')
    p.add_argument('--product-iid', action='store_true', help='Product from polynomial coefficients')
    p.add_argument('--p', type=str, help='Comma separated coefficients of p, lowest first')
    p.add_argument('--q', type=str, help='Comma separated coefficients of q, lowest first')
    p.add_argument('--table-row', type=int, help='Row of the product-normal operator table')
    p.add_argument('--mu-x', type=str, default='0')
    p.add_argument('--mu-y', type=str, default='0')
    p.add_argument('--var-x', type=str, default='1')
    p.add_argument('--var-y', type=str, default='1')
    p.add_argument('--sum', type=int, help='Operator for the sum of N iid copies')
    p.add_argument('--rescale', type=str, help='Operator for c Z')
    p.add_argument('--primitive', action='store_true', help='Clear denominators and common content')
    _add_format(p, ['text', 'latex', 'json'])

    p = sub.add_parser('verify', help='Check an operator against a distribution')
    _add_target(p)
    p.add_argument('--max-k', type=int, default=None, help='Highest monomial tested (default EXACT_MAX_K)')
    p.add_argument('--mc', action='store_true', help='Monte Carlo check on test functions')
    p.add_argument('--samples', type=int, default=None, help='Monte Carlo sample count')
    p.add_argument('--z-threshold', type=float, default=None, help='Flag |z| above this value')
    p.add_argument('--demo', type=str, help='"mu_x,mu_y": exact check plus a perturbed sequence')
    _add_format(p, ['text', 'json'])

    p = sub.add_parser('moments', help='Exact moments')
    _add_target(p)
    p.add_argument('--count', type=int, default=10)
    p.add_argument('--initial', type=str, help='Initial moments for --op, comma separated')
    _add_format(p, ['text', 'json', 'csv'])

    p = sub.add_parser('minimality', help='Moment-matrix minimality analysis')
    p.add_argument('--dist', type=str, required=True)
    p.add_argument('--shape', type=str, help='Single shape ORDERxDEGREE')
    p.add_argument('--max-order', type=int, default=2)
    p.add_argument('--max-degree', type=int, default=2)
    p.add_argument('--rows', type=int, help='Moment-matrix rows')
    p.add_argument('--show-matrix', action='store_true')
    _add_format(p, ['json', 'text'], default='json')

    p = sub.add_parser('charfn', help='Characteristic-function ODE')
    _add_target(p)
    p.add_argument('--mu-x', type=str, default='0')
    p.add_argument('--mu-y', type=str, default='0')
    p.add_argument('--grid', type=str, help='start:stop:count; CSV of the closed form and its residual')
    _add_format(p, ['text', 'latex', 'json'])

    p = sub.add_parser('density', help='Product-normal density and density ODEs')
    _add_target(p)
    p.add_argument('--mu-x', type=str, default='0')
    p.add_argument('--mu-y', type=str, default='0')
    p.add_argument('--grid', type=str, default='0.5:4:8', help='start:stop:count')
    p.add_argument('--terms', type=int, default=None, help='Series blocks (default SERIES_TERMS)')
    p.add_argument('--ode', action='store_true', help='Print the density ODE dual to the operator')
    p.add_argument('--normalize', action='store_true', help='Primitive form of the density ODE')
    _add_format(p, ['text', 'latex', 'json'])

    p = sub.add_parser('reduce', help='Check operator reductions')
    p.add_argument('--r', type=str, default='2')
    p.add_argument('--sigma', type=str, default='1')
    p.add_argument('--n', type=int, default=3)
    p.add_argument('--mu', type=str, default='1')
    p.add_argument('--a', type=str, help='Custom reduction: operator A')
    p.add_argument('--l', type=str, help='Custom reduction: operator L')
    p.add_argument('--b', type=str, help='Custom reduction: operator B')
    p.add_argument('--orientation', choices=['factor', 'compose'], default='factor')
    _add_format(p, ['text', 'json'])
    return parser


def parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    """Parse command line arguments."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command and not args.show_config:
        parser.error('a subcommand is required')
    return args


def main(argv: Optional[List[str]] = None) -> int:
    args = parse_args(argv)

    if args.show_config:
        config.print_config()
        return 0

    if args.seed is not None:
        config.STEIN_SEED = args.seed
    if args.workers is not None:
        config.MAX_WORKERS = args.workers

    setup_logging(args.log_level, args.log_file)
    logger = logging.getLogger(__name__)

    perf_monitor = PerformanceMonitor()
    controller = CommandController(perf_monitor=perf_monitor)
    try:
        return controller.run(args)

    except SteinError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR

    except KeyboardInterrupt:
        logger.info("Interrupted by user")
        return EXIT_INTERRUPTED

    except Exception as e:
        logger.error(f"Unexpected error in {args.command}: {e}", exc_info=True)
        return EXIT_UNEXPECTED

    finally:
        if args.timings:
            print(perf_monitor.format_report(), file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
