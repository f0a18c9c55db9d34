from __future__ import annotations

import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from nlc_monitor.core.errors import NlcError, error_line, exit_code
from nlc_monitor.core.frame import (
    AngularProfile,
    build_frame,
    counterexample_field,
    find_max_points,
    origin_curl,
    symmetrize,
    to_frame,
)
from nlc_monitor.core.grid import Grid3, VectorField3, curl
from nlc_monitor.core.nlc import bkm_integrand, nlc_functional
from nlc_monitor.core.norms import VSpace
from nlc_monitor.core.snapshot import write_snapshot

__all__ = ["CounterexampleSummary", "summarize", "counterexample_command"]


def _eprint(message: str) -> None:
    """Print a message to stderr."""
    print(message, file=sys.stderr)


@dataclass(frozen=True)
class CounterexampleSummary:
    """What the counterexample field shows.

    Attributes:
        lam: Twist strength d3 theta1(0).
        curl_origin: (d3u1 - d1u3)(0) of the profile, which equals
            lam |u(0)|.
        grid_curl_origin: The same quantity from the spectral curl of the
            sampled field. It lags curl_origin once the twist is narrower
            than a few grid spacings.
        bkm: max |curl u| over the grid.
        remainder: max |r| of the plain parity decomposition.
        functional: The collapsing functional of that decomposition.
    """

    lam: float
    curl_origin: float
    grid_curl_origin: float
    bkm: float
    remainder: float
    functional: float

    def as_dict(self) -> dict[str, float]:
        return {
            "lambda": self.lam,
            "curl_origin": self.curl_origin,
            "grid_curl_origin": self.grid_curl_origin,
            "bkm": self.bkm,
            "remainder": self.remainder,
            "functional": self.functional,
        }


def summarize(v: VectorField3, profile: AngularProfile,
              vspace: VSpace | None = None) -> CounterexampleSummary:
    """Frame, decompose and measure a counterexample field."""
    vspace = vspace or VSpace()
    point = find_max_points(v)[0]
    framed = to_frame(v, build_frame(v, point), point)
    dec = symmetrize(framed)
    omega = curl(framed.u)
    return CounterexampleSummary(
        lam=profile.lam,
        curl_origin=origin_curl(profile),
        grid_curl_origin=float(omega.at_origin()[1]),
        bkm=bkm_integrand(v),
        remainder=float(np.max(np.abs(dec.r.values))),
        functional=nlc_functional(dec, vspace),
    )


def counterexample_command(*, lam: float, width: float | None, n: int,
                           half_width: float, out: Path) -> int:
    """Run the `nlc-monitor counterexample` command.

    Writes the field as a snapshot at t = 0 and prints its summary as JSON.
    `width = None` uses L/6.

    Returns:
        Process exit code (0 on success, 2 or 3 on error).
    """
    try:
        grid = Grid3(n, half_width)
        width = width if width is not None else half_width / 6
        profile = AngularProfile.gaussian(lam, width)
        v = counterexample_field(profile, grid)
        summary = summarize(v, profile)
        write_snapshot(out, v, 0.0, 1.0)
    except NlcError as e:
        _eprint(error_line(e))
        return exit_code(e)

    print(json.dumps(summary.as_dict()))
    return 0
