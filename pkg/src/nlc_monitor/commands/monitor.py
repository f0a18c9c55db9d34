from __future__ import annotations

import csv
import json
import sys
from pathlib import Path
from typing import TextIO

from nlc_monitor.core.config import RunConfig, resolve_threads
from nlc_monitor.core.errors import NlcError, error_line, exit_code
from nlc_monitor.core.nlc import MonitorResult, NlcReport, monitor_run
from nlc_monitor.core.snapshot import list_series

__all__ = ["COLUMNS", "monitor_command", "write_reports"]

COLUMNS = (
    "t",
    "functional",
    "threshold",
    "u3_origin",
    "via_full",
    "via_remainder",
    "symmetric_part",
    "u3_lap_u3",
    "bkm",
    "linf_speed",
    "decay_const",
    "verdict_flag",
)


def _eprint(message: str) -> None:
    """Print a message to stderr."""
    print(message, file=sys.stderr)


def _fmt(value: float) -> str:
    return format(value, ".17g")


def _row(report: NlcReport) -> list[str]:
    return [
        _fmt(report.t),
        _fmt(report.functional),
        _fmt(report.threshold),
        _fmt(report.u3_origin),
        _fmt(report.pressure.via_full),
        _fmt(report.pressure.via_remainder),
        _fmt(report.pressure.symmetric_part),
        _fmt(report.lemma.v_laplacian_v),
        _fmt(report.bkm),
        _fmt(report.linf_speed),
        _fmt(report.decay_constant),
        "1" if report.satisfied else "0",
    ]


def write_reports(result: MonitorResult, stream: TextIO) -> None:
    """Write one CSV row per monitored snapshot, in time order."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(COLUMNS)
    for report in result.reports:
        writer.writerow(_row(report))


def monitor_command(config: RunConfig, series: Path, out: Path | None) -> int:
    """Run the `nlc-monitor monitor` command.

    The CSV goes to `out` (stdout when None). A verdict object is printed
    to stdout after the file is written, or to stderr when the CSV itself
    goes to stdout.

    Returns:
        0 when at least one snapshot was monitored, whatever the verdict;
        the exit code of the first failure when every snapshot failed.
    """
    try:
        paths = list_series(series)
        result = monitor_run(paths, config.nlc_config(),
                             resolve_threads(config.threads))
    except NlcError as e:
        _eprint(error_line(e))
        return exit_code(e)

    if not result.reports:
        first = result.failures[0]
        _eprint(json.dumps({"stage": first.stage, "message": first.message}))
        return first.code

    if out is None:
        write_reports(result, sys.stdout)
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        with out.open("w", encoding="utf-8", newline="") as f:
            write_reports(result, f)

    summary = json.dumps({
        "verdict": "satisfied" if result.satisfied else "violated",
        "snapshots": len(result.reports),
        "failures": len(result.failures),
        "bkm_integral": result.bkm_integral,
        "l2linf_integral": result.l2linf_integral,
        "c_required": result.c_required,
    })
    if out is None:
        _eprint(summary)
    else:
        print(summary)
    return 0
