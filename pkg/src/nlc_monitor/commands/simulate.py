from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

from nlc_monitor.core.config import RunConfig, save_config
from nlc_monitor.core.errors import NlcError, StepError, error_line, exit_code
from nlc_monitor.solver import spectral

__all__ = ["RUN_CONFIG_NAME", "simulate_command"]

logger = logging.getLogger(__name__)

# Effective configuration written next to the snapshots.
RUN_CONFIG_NAME = "run.toml"


def _eprint(message: str) -> None:
    """Print a message to stderr."""
    print(message, file=sys.stderr)


def simulate_command(config: RunConfig, out_dir: Path) -> int:
    """Run the `nlc-monitor simulate` command.

    Integrates the configured initial data and writes the snapshot series
    into `out_dir`, together with the effective configuration as
    `run.toml`. A summary object {"snapshots", "t_final", "partial"} is
    printed to stdout.

    Args:
        config: Effective run configuration.
        out_dir: Directory receiving the snapshot files.

    Returns:
        Process exit code (0 on success, 3 when the run stopped early).
    """
    try:
        if config.phi is not None:
            config = config.override(phi=str(Path(config.phi).resolve()))
        recorded = save_config(out_dir / RUN_CONFIG_NAME, config)
        logger.info("wrote %s", recorded)
        result = spectral.run(
            config.initial_data(),
            config.grid(),
            config.dt,
            config.t_end,
            config.snapshot_every,
            out_dir,
            config.nu,
        )
    except NlcError as e:
        _eprint(error_line(e))
        return exit_code(e)

    print(json.dumps({
        "snapshots": len(result.paths),
        "t_final": result.times[-1],
        "partial": result.partial,
    }))
    if result.partial:
        # The written prefix of the series stays usable by `monitor`.
        _eprint(error_line(StepError(result.error or "run stopped early")))
        return 3
    logger.info("wrote %d snapshots to %s", len(result.paths), out_dir)
    return 0
