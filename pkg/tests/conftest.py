from __future__ import annotations

import logging
import math

import numpy as np
import pytest

from nlc_monitor.core.grid import Grid3, ScalarField, VectorField3


@pytest.fixture(autouse=True)
def _drop_cli_log_handlers():
    """Undo the stderr handler `run_cli` installs on the root logger."""
    yield
    root = logging.getLogger()
    for handler in root.handlers[:]:
        if type(handler) is logging.StreamHandler:
            root.removeHandler(handler)
    root.setLevel(logging.WARNING)


@pytest.fixture
def grid8() -> Grid3:
    return Grid3(8, math.pi)


@pytest.fixture
def grid16() -> Grid3:
    return Grid3(16, math.pi)


def trig_scalar(grid: Grid3, a: int = 1, b: int = 1, c: int = 1) -> ScalarField:
    """sin(a x) cos(b y) sin(c z): smooth, periodic and odd in z."""
    x, y, z = grid.mesh()
    return ScalarField(grid, np.sin(a * x) * np.cos(b * y) * np.sin(c * z))


def swirl(grid: Grid3) -> VectorField3:
    """A smooth field whose speed peaks at a single node near the origin."""
    x, y, z = grid.mesh()
    bump = np.exp(-(x**2 + y**2 + z**2))
    return VectorField3(grid, np.stack([
        0.3 * y * bump,
        -0.3 * x * bump,
        bump,
    ]))
