from __future__ import annotations

import csv
import logging
import math
import sys
from pathlib import Path
from typing import TextIO

import numpy as np

from nlc_monitor.core.errors import ConfigError, NlcError, error_line, exit_code
from nlc_monitor.core.grid import Ball, BallFamily, ScalarField, VectorField3
from nlc_monitor.core.growth import GrowthFunction
from nlc_monitor.core.norms import NormReport, NormSpace, compute_norm
from nlc_monitor.core.snapshot import read_snapshot

__all__ = ["COLUMNS", "COMPONENTS", "select_component", "norms_command"]

logger = logging.getLogger(__name__)

COLUMNS = ("space", "p", "value", "pointTerm", "argmax_center", "argmax_radius")

# `|u|` selects the speed; 1..3 select a velocity component.
COMPONENTS = ("1", "2", "3", "|u|")


def _eprint(message: str) -> None:
    """Print a message to stderr."""
    print(message, file=sys.stderr)


def select_component(v: VectorField3, component: str) -> ScalarField:
    if component == "|u|":
        return ScalarField(v.grid, v.speed())
    if component in ("1", "2", "3"):
        return v.component(int(component) - 1)
    raise ConfigError(f"component must be one of 1, 2, 3 or |u| (got {component!r}).")


def _fmt(value: float | None) -> str:
    return "" if value is None else format(value, ".17g")


def _argmax_cells(report: NormReport) -> tuple[str, str]:
    """Center and radius of the maximising ball; first point and distance of a pair."""
    argmax = report.argmax
    if argmax is None:
        return "", ""
    if isinstance(argmax, Ball):
        center = ";".join(_fmt(c) for c in argmax.center)
        return center, _fmt(argmax.radius)
    x, y = argmax
    return ";".join(_fmt(c) for c in x), _fmt(math.dist(x, y))


def write_norm(report: NormReport, space: str, p: float, stream: TextIO) -> None:
    center, radius = _argmax_cells(report)
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(COLUMNS)
    writer.writerow([space, _fmt(p), _fmt(report.value), _fmt(report.point_term),
                     center, radius])


def norms_command(*, source: Path, component: str, space: NormSpace, p: float,
                  phi: GrowthFunction, family: BallFamily, out: Path | None) -> int:
    """Run the `nlc-monitor norms` command on one snapshot.

    Returns:
        Process exit code (0 on success, 2 or 3 on error).
    """
    try:
        snapshot = read_snapshot(source)
        f = select_component(snapshot.field, component)
        report = compute_norm(f, space, p, phi, family)
    except NlcError as e:
        _eprint(error_line(e))
        return exit_code(e)

    if not np.isfinite(report.value):
        logger.warning("%s norm is not finite", space)
    if out is None:
        write_norm(report, space, p, sys.stdout)
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        with out.open("w", encoding="utf-8", newline="") as f_out:
            write_norm(report, space, p, f_out)
    return 0
