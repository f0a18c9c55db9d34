from __future__ import annotations

import struct

import numpy as np
import pytest

from nlc_monitor.core.errors import FormatError, SeriesError
from nlc_monitor.core.grid import VectorField3
from nlc_monitor.core.snapshot import (
    MAGIC,
    check_times,
    list_series,
    read_snapshot,
    snapshot_name,
    write_snapshot,
)

HEADER = 36


@pytest.fixture
def field(grid8):
    rng = np.random.default_rng(7)
    return VectorField3(grid8, rng.standard_normal((3,) + grid8.shape))


@pytest.fixture
def written(tmp_path, field):
    return write_snapshot(tmp_path / "series" / snapshot_name(3), field, 0.25, 0.5)


@pytest.mark.unit
def test_snapshot_name():
    assert snapshot_name(0) == "snapshot_00000.nscv"
    assert snapshot_name(123) == "snapshot_00123.nscv"


@pytest.mark.unit
def test_layout_is_header_then_c_order_payload(written, field):
    data = written.read_bytes()
    assert len(data) == HEADER + 3 * 8**3 * 8
    magic, version, n, half_width, t, nu = struct.unpack_from("<4sIIddd", data)
    assert (magic, version, n, t, nu) == (MAGIC, 1, 8, 0.25, 0.5)
    assert half_width == field.grid.half_width
    first = struct.unpack_from("<d", data, HEADER)[0]
    assert first == field.values[0, 0, 0, 0]


@pytest.mark.unit
def test_read_returns_what_was_written(written, field):
    snapshot = read_snapshot(written)
    assert snapshot.t == 0.25
    assert snapshot.nu == 0.5
    assert snapshot.grid == field.grid
    np.testing.assert_array_equal(snapshot.field.values, field.values)


def _corrupt(path, offset, payload):
    data = bytearray(path.read_bytes())
    data[offset : offset + len(payload)] = payload
    path.write_bytes(bytes(data))


@pytest.mark.unit
def test_bad_magic(written):
    _corrupt(written, 0, b"XXXX")
    with pytest.raises(FormatError) as info:
        read_snapshot(written)
    assert info.value.offset == 0


@pytest.mark.unit
def test_bad_version(written):
    _corrupt(written, 4, struct.pack("<I", 2))
    with pytest.raises(FormatError) as info:
        read_snapshot(written)
    assert info.value.offset == 4


@pytest.mark.unit
def test_bad_grid_size(written):
    _corrupt(written, 8, struct.pack("<I", 12))
    with pytest.raises(FormatError) as info:
        read_snapshot(written)
    assert info.value.offset == 8


@pytest.mark.unit
def test_truncated_header(written):
    written.write_bytes(written.read_bytes()[:20])
    with pytest.raises(FormatError) as info:
        read_snapshot(written)
    assert info.value.offset == 20


@pytest.mark.unit
def test_truncated_payload(written):
    data = written.read_bytes()
    written.write_bytes(data[:-8])
    with pytest.raises(FormatError) as info:
        read_snapshot(written)
    assert info.value.offset == len(data) - 8


@pytest.mark.unit
def test_non_finite_payload(written):
    _corrupt(written, HEADER + 16, struct.pack("<d", float("inf")))
    with pytest.raises(FormatError) as info:
        read_snapshot(written)
    assert info.value.offset == HEADER
    assert info.value.stage == "ingest"


@pytest.mark.unit
def test_missing_file(tmp_path):
    with pytest.raises(FormatError) as info:
        read_snapshot(tmp_path / "nothing.nscv")
    assert info.value.offset == 0


@pytest.mark.unit
def test_list_series_sorts_by_name(tmp_path, field):
    for index in (2, 0, 1):
        write_snapshot(tmp_path / snapshot_name(index), field, float(index), 1.0)
    (tmp_path / "notes.txt").write_text("ignored")
    names = [path.name for path in list_series(tmp_path)]
    assert names == [snapshot_name(i) for i in range(3)]


@pytest.mark.unit
def test_list_series_errors(tmp_path):
    with pytest.raises(SeriesError):
        list_series(tmp_path / "missing")
    with pytest.raises(SeriesError):
        list_series(tmp_path)


@pytest.mark.unit
def test_check_times():
    check_times([0.0, 0.1, 0.2])
    check_times([])
    with pytest.raises(SeriesError):
        check_times([0.0, 0.2, 0.2])
