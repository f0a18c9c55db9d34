from __future__ import annotations

import argparse
import json
import logging
import sys
from importlib import metadata
from pathlib import Path
from typing import NoReturn

from scipy import fft

from nlc_monitor.commands.counterexample import counterexample_command
from nlc_monitor.commands.monitor import monitor_command
from nlc_monitor.commands.norms import COMPONENTS, norms_command
from nlc_monitor.commands.simulate import simulate_command
from nlc_monitor.commands.verify import TARGETS, VerifyOptions, verify_command
from nlc_monitor.core.config import RunConfig, load_config, resolve_threads
from nlc_monitor.core.errors import NlcError, error_line, exit_code
from nlc_monitor.core.grid import parse_ball_family

# sysexits EX_USAGE: the command line itself could not be understood.
EXIT_USAGE = 64

_SPACES = ("campanato", "pointed", "morrey", "holder", "pointed_holder", "lip")


# Helper to get the installed package version
def _package_version() -> str:
    """Return the installed package version.

    We resolve the version from package metadata so `--version` stays in sync
    with the project version declared in `pyproject.toml`.

    Returns:
        Version string. Falls back to "0.0.0" when metadata is unavailable
        (e.g. running from source without installation).
    """
    try:
        # Keep this in sync with the distribution name (project.name).
        return metadata.version("nlc-monitor")
    except metadata.PackageNotFoundError:
        return "0.0.0"


VERSION = f"nlc-monitor {_package_version()}"


def _eprint(message: str) -> None:
    """Print a message to stderr."""
    print(message, file=sys.stderr)


class UsageError(Exception):
    """Raised instead of exiting when the command line cannot be parsed."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _real(text: str) -> float:
    """Parse a real number; `inf` is accepted."""
    try:
        return float(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from e


def _global_flags(*, suppress: bool) -> argparse.ArgumentParser:
    """Global flags, accepted before or after the subcommand."""
    default = argparse.SUPPRESS if suppress else None
    flags = argparse.ArgumentParser(add_help=False)
    flags.add_argument(
        "--threads",
        default=default,
        help="FFT and monitor workers: `auto` or a positive integer.",
    )
    flags.add_argument(
        "--config",
        type=Path,
        default=default,
        help="Run configuration TOML file; flags override its values.",
    )
    flags.add_argument(
        "--quiet",
        action="store_true",
        default=argparse.SUPPRESS if suppress else False,
        help="Only log warnings and errors.",
    )
    return flags


def build_parser() -> argparse.ArgumentParser:
    """Create the top-level argument parser.

    Returns:
        An `argparse.ArgumentParser` configured with subcommands.
    """
    parser = _Parser(
        prog="nlc-monitor",
        description=(
            "Monitor the no-local-collapsing blowup criterion on "
            "Navier-Stokes velocity snapshots."
        ),
        epilog=(
            "Run `nlc-monitor simulate` to produce a snapshot series, then "
            "`nlc-monitor monitor` to evaluate the criterion along it."
        ),
        parents=[_global_flags(suppress=False)],
    )
    common = [_global_flags(suppress=True)]

    subparsers = parser.add_subparsers(
        dest="command", required=False, parser_class=_Parser
    )

    simulate = subparsers.add_parser(
        "simulate",
        parents=common,
        help="Integrate initial data and write a snapshot series.",
        description=(
            "Run the pseudo-spectral solver on the periodic box and write "
            "snapshot files into the output directory."
        ),
    )
    simulate.add_argument("--init", help="beltrami, tg, random:<seed> or gaussian.")
    simulate.add_argument("--N", dest="n", type=int, help="Grid points per axis.")
    simulate.add_argument("--L", dest="half_width", type=_real,
                          help="Box half-width.")
    simulate.add_argument("--dt", type=_real, help="Time step.")
    simulate.add_argument("--T", dest="t_end", type=_real, help="Final time.")
    simulate.add_argument("--snapshot-every", dest="snapshot_every", type=_real,
                          help="Time between snapshots (`inf`: first and last).")
    simulate.add_argument("--nu", type=_real, help="Viscosity (default 1).")
    simulate.add_argument("--out", type=Path, required=True,
                          help="Output directory.")

    monitor = subparsers.add_parser(
        "monitor",
        parents=common,
        help="Evaluate the criterion along a snapshot series.",
        description=(
            "Find the maximum point, frame, decompose and compare the "
            "functional with the threshold for every snapshot."
        ),
    )
    monitor.add_argument("--series", type=Path, required=True,
                         help="Directory of snapshot files.")
    monitor.add_argument("--out", type=Path, help="CSV file (default stdout).")
    monitor.add_argument("--C", dest="c", type=_real, help="Threshold constant.")
    monitor.add_argument("--alpha", type=_real, help="Threshold exponent.")
    monitor.add_argument("--T-blowup", dest="t_blowup", type=_real,
                         help="Candidate blowup time.")
    monitor.add_argument("--p", type=_real, help="Exponent of the V space.")
    monitor.add_argument("--phi", help="Growth-function TOML file.")
    monitor.add_argument("--balls", help="exhaustive or dyadic:<stride>.")
    monitor.add_argument("--radii", type=_real, nargs="+",
                         help="Window radii for the decomposition infimum.")
    monitor.add_argument("--decay-radius", dest="decay_radius", type=_real,
                         help="R of the decay check (default L/2).")

    norms = subparsers.add_parser(
        "norms",
        parents=common,
        help="Compute one norm of one snapshot component.",
        description="Evaluate a sampled variable-growth norm of a snapshot.",
    )
    norms.add_argument("--input", type=Path, required=True, help="Snapshot file.")
    norms.add_argument("--component", choices=COMPONENTS, default="|u|")
    norms.add_argument("--space", choices=_SPACES, default="pointed")
    norms.add_argument("--p", type=_real, help="Norm exponent.")
    norms.add_argument("--phi", help="Growth-function TOML file.")
    norms.add_argument("--balls", help="exhaustive or dyadic:<stride>.")
    norms.add_argument("--out", type=Path, help="CSV file (default stdout).")

    verify = subparsers.add_parser(
        "verify",
        parents=common,
        help="Run a numerical verification table.",
        description="Check identities and report constants on synthetic fields.",
    )
    verify.add_argument("target", choices=tuple(TARGETS))
    verify.add_argument("--n", type=int, default=16, help="Grid points per axis.")
    verify.add_argument("--count", type=int, default=5,
                        help="Number of random fields.")
    verify.add_argument("--seed", type=int, default=0, help="First random seed.")
    verify.add_argument("--out", type=Path, help="CSV file (default stdout).")

    counterexample = subparsers.add_parser(
        "counterexample",
        parents=common,
        help="Write a symmetric flow with a large vorticity at the origin.",
        description=(
            "Build the twisted Gaussian flow, write it as a snapshot and "
            "print its vorticity, remainder and functional."
        ),
    )
    counterexample.add_argument("--lambda", dest="lam", type=_real, required=True,
                                help="Twist strength.")
    counterexample.add_argument("--bump-width", dest="width", type=_real,
                                help="Gaussian width (default L/6).")
    counterexample.add_argument("--N", dest="n", type=int,
                                help="Grid points per axis.")
    counterexample.add_argument("--L", dest="half_width", type=_real,
                                help="Box half-width.")
    counterexample.add_argument("--out", type=Path, required=True,
                                help="Snapshot file.")

    # Keep the version flag at the top level for discoverability.
    parser.add_argument(
        "--version",
        action="version",
        version=VERSION,
        help="Show version information and exit.",
    )
    return parser


def _configure_logging(quiet: bool) -> None:
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.WARNING if quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        force=True,
    )


def _effective_config(args: argparse.Namespace) -> RunConfig:
    config = load_config(args.config) if args.config is not None else RunConfig()
    return config.override(threads=args.threads)


def _dispatch(args: argparse.Namespace, config: RunConfig) -> int:
    if args.command == "simulate":
        config = config.override(
            init=args.init,
            n=args.n,
            half_width=args.half_width,
            dt=args.dt,
            t_end=args.t_end,
            snapshot_every=args.snapshot_every,
            nu=args.nu,
        )
        return simulate_command(config, args.out)

    if args.command == "monitor":
        config = config.override(
            c=args.c,
            alpha=args.alpha,
            t_blowup=args.t_blowup,
            p=args.p,
            phi=args.phi,
            balls=args.balls,
            radii=args.radii,
            decay_radius=args.decay_radius,
        )
        return monitor_command(config, args.series, args.out)

    if args.command == "norms":
        config = config.override(p=args.p, phi=args.phi, balls=args.balls)
        return norms_command(
            source=args.input,
            component=args.component,
            space=args.space,
            p=config.p,
            phi=config.growth(),
            family=parse_ball_family(config.balls),
            out=args.out,
        )

    if args.command == "verify":
        options = VerifyOptions(n=args.n, count=args.count, seed=args.seed)
        return verify_command(args.target, options, args.out)

    if args.command == "counterexample":
        config = config.override(n=args.n, half_width=args.half_width)
        return counterexample_command(
            lam=args.lam,
            width=args.width,
            n=config.n,
            half_width=config.half_width,
            out=args.out,
        )

    raise UsageError(f"nlc-monitor: error: unknown command {args.command!r}")


def run_cli(argv: list[str] | None = None) -> int:
    """Run the CLI.

    Args:
        argv: Optional argument list. If None, uses `sys.argv`.

    Returns:
        Process exit code: 0 on success, 2 on invalid input, 3 on a numerical
        failure, 64 on a command line that cannot be parsed, 130 on Ctrl+C.
    """
    parser = build_parser()

    try:
        args = parser.parse_args(argv)
        _configure_logging(args.quiet)

        if args.command is None:
            # No subcommand provided: show help and exit successfully.
            parser.print_help()
            return 0

        config = _effective_config(args)
        with fft.set_workers(resolve_threads(config.threads)):
            return _dispatch(args, config)

    except UsageError as exc:
        _eprint(str(exc))
        return EXIT_USAGE
    except NlcError as exc:
        _eprint(error_line(exc))
        return exit_code(exc)
    except OSError as exc:
        _eprint(json.dumps({"stage": "io", "message": str(exc)}))
        return 2
    except KeyboardInterrupt:
        # POSIX convention: 128 + SIGINT(2) = 130
        return 130


if __name__ == "__main__":
    raise SystemExit(run_cli())
