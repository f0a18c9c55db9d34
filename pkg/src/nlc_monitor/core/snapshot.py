from __future__ import annotations

import logging
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from nlc_monitor.core.errors import ConfigError, FormatError, SeriesError
from nlc_monitor.core.grid import Grid3, VectorField3

__all__ = [
    "MAGIC",
    "VERSION",
    "SUFFIX",
    "Snapshot",
    "snapshot_name",
    "read_snapshot",
    "write_snapshot",
    "list_series",
    "check_times",
]

logger = logging.getLogger(__name__)

MAGIC = b"NSCV"
VERSION = 1
SUFFIX = ".nscv"

# magic, version, N, L, t, nu (little-endian, no padding)
_HEADER = struct.Struct("<4sIIddd")


@dataclass(frozen=True, eq=False)
class Snapshot:
    """One velocity snapshot: the field, its time stamp and viscosity."""

    field: VectorField3
    t: float
    nu: float

    @property
    def grid(self) -> Grid3:
        return self.field.grid


def snapshot_name(index: int) -> str:
    return f"snapshot_{index:05d}{SUFFIX}"


def write_snapshot(path: Path, field: VectorField3, t: float, nu: float) -> Path:
    """Write a snapshot file; the payload is the field in C order."""
    grid = field.grid
    header = _HEADER.pack(MAGIC, VERSION, grid.n, grid.half_width, t, nu)
    payload = np.ascontiguousarray(field.values, dtype="<f8").tobytes()
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(header + payload)
    logger.debug("wrote %s (t=%g)", path, t)
    return path


def read_snapshot(path: Path) -> Snapshot:
    """Read a snapshot file.

    Raises:
        FormatError: If the file is truncated, has the wrong magic or version,
            or its size does not match the declared N.
    """
    try:
        data = path.read_bytes()
    except OSError as e:
        raise FormatError(f"cannot read {path}: {e}", offset=0) from e

    if len(data) < _HEADER.size:
        raise FormatError(
            f"{path.name}: truncated header ({len(data)} of {_HEADER.size} bytes)",
            offset=len(data),
        )
    magic, version, n, half_width, t, nu = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(
            f"{path.name}: expected magic {MAGIC.decode()!r}, found {magic!r}",
            offset=0,
        )
    if version != VERSION:
        raise FormatError(
            f"{path.name}: unsupported version {version} (expected {VERSION})",
            offset=4,
        )
    try:
        grid = Grid3(n, half_width)
    except ConfigError as e:
        raise FormatError(f"{path.name}: {e}", offset=8) from e

    expected = _HEADER.size + 3 * n**3 * 8
    if len(data) != expected:
        raise FormatError(
            f"{path.name}: payload holds {len(data) - _HEADER.size} bytes, "
            f"N={n} needs {expected - _HEADER.size}",
            offset=min(len(data), expected),
        )
    values = np.frombuffer(data, dtype="<f8", offset=_HEADER.size)
    values = values.reshape((3, n, n, n)).astype(float)
    if not np.all(np.isfinite(values)):
        raise FormatError(
            f"{path.name}: non-finite velocity values", offset=_HEADER.size
        )
    return Snapshot(VectorField3(grid, values), float(t), float(nu))


def list_series(directory: Path) -> list[Path]:
    """Snapshot files of a series directory, sorted by name.

    Raises:
        SeriesError: If the directory is missing or holds no snapshot.
    """
    if not directory.is_dir():
        raise SeriesError(f"series directory not found: {directory}")
    paths = sorted(directory.glob(f"*{SUFFIX}"))
    if not paths:
        raise SeriesError(f"no {SUFFIX} snapshots in {directory}")
    return paths


def check_times(times: list[float]) -> None:
    """Raise SeriesError unless time stamps strictly increase."""
    for before, after in zip(times, times[1:]):
        if not after > before:
            raise SeriesError(
                f"time stamps must increase strictly (found {before} then {after})."
            )
