from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy import fft

from nlc_monitor.core.errors import BallTooSmallError, ConfigError, DomainError

__all__ = [
    "DiffMethod",
    "FamilyKind",
    "MIN_BALL_NODES",
    "Grid3",
    "ScalarField",
    "VectorField3",
    "Ball",
    "BallFamily",
    "parse_ball_family",
    "ball_mask",
    "ball_measure",
    "ball_average",
    "ball_offsets",
    "family_centers",
    "family_radii",
    "sample_balls",
    "derivative",
    "gradient",
    "divergence",
    "curl",
    "laplacian",
    "reflect_y3",
]

logger = logging.getLogger(__name__)

DiffMethod = Literal["spectral", "fd"]
FamilyKind = Literal["exhaustive", "dyadic"]

# Averages over fewer nodes than this are rejected.
MIN_BALL_NODES = 8


@dataclass(frozen=True)
class Grid3:
    """Uniform periodic grid of N^3 nodes on the box [-L, L)^3.

    Attributes:
        n: Points per axis. A power of two, at least 8.
        half_width: Box half-width L.
    """

    n: int
    half_width: float = 2 * math.pi

    def __post_init__(self) -> None:
        if not isinstance(self.n, int) or self.n < 8 or self.n & (self.n - 1):
            raise ConfigError(f"n must be a power of two >= 8 (got n={self.n}).")
        if not (math.isfinite(self.half_width) and self.half_width > 0):
            raise ConfigError(
                f"half_width must be positive and finite (got {self.half_width})."
            )

    @property
    def h(self) -> float:
        return 2.0 * self.half_width / self.n

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n)

    @property
    def origin_index(self) -> int:
        """Index of the coordinate 0 along every axis."""
        return self.n // 2

    @property
    def cell_volume(self) -> float:
        return self.h**3

    def axis(self) -> np.ndarray:
        """Node coordinates -L + k*h along one axis.

        Computed as (k - N/2) * h so that mirrored nodes are exact negatives.
        """
        return self.h * (np.arange(self.n) - self.n // 2)

    def mesh(self) -> np.ndarray:
        """Node coordinates as an array of shape (3, N, N, N)."""
        axis = self.axis()
        return np.stack(np.meshgrid(axis, axis, axis, indexing="ij"))

    def point(self, index) -> np.ndarray:
        """Coordinates of node indices; the trailing axis holds the three indices."""
        return self.h * (np.asarray(index, dtype=float) - self.n // 2)

    def wavenumbers(self, *, odd: bool = False) -> np.ndarray:
        """Angular wavenumbers 2*pi*fftfreq(N, h).

        With `odd=True` the Nyquist mode is zeroed, which is the convention
        for symbols that are odd in the frequency (first derivatives, Riesz).
        """
        k = 2.0 * np.pi * fft.fftfreq(self.n, d=self.h)
        if odd:
            k[self.n // 2] = 0.0
        return k

    def wave_mesh(self, *, odd: bool = False) -> np.ndarray:
        k = self.wavenumbers(odd=odd)
        return np.stack(np.meshgrid(k, k, k, indexing="ij"))

    def torus_offset(self, coords: np.ndarray, center) -> np.ndarray:
        """Signed periodic displacement coords - center, folded into [-L, L)."""
        c = np.asarray(center, dtype=float).reshape((3,) + (1,) * (coords.ndim - 1))
        span = 2.0 * self.half_width
        return (coords - c + self.half_width) % span - self.half_width


def _frozen_values(values, shape: tuple[int, ...], label: str) -> np.ndarray:
    array = np.array(values, dtype=float, copy=True)
    if array.shape != shape:
        raise DomainError(f"{label} must have shape {shape} (got {array.shape}).")
    if not np.all(np.isfinite(array)):
        raise DomainError(f"{label} must contain finite values only.")
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class ScalarField:
    """A real scalar field sampled on a grid. Values are read-only."""

    grid: Grid3
    values: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "values", _frozen_values(self.values, self.grid.shape, "values")
        )

    def __add__(self, other: ScalarField | float) -> ScalarField:
        other_values = other.values if isinstance(other, ScalarField) else other
        return ScalarField(self.grid, self.values + other_values)

    def __mul__(self, other: ScalarField | float) -> ScalarField:
        other_values = other.values if isinstance(other, ScalarField) else other
        return ScalarField(self.grid, self.values * other_values)

    __rmul__ = __mul__

    def at_origin(self) -> float:
        o = self.grid.origin_index
        return float(self.values[o, o, o])

    def mean(self) -> float:
        return float(np.mean(self.values))


@dataclass(frozen=True, eq=False)
class VectorField3:
    """A real 3-vector field; `values` has shape (3, N, N, N)."""

    grid: Grid3
    values: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(
            self,
            "values",
            _frozen_values(self.values, (3,) + self.grid.shape, "values"),
        )

    @classmethod
    def from_components(cls, components: list[ScalarField]) -> VectorField3:
        if len(components) != 3:
            raise DomainError("a vector field needs exactly three components.")
        grid = components[0].grid
        if any(c.grid != grid for c in components):
            raise DomainError("components must share one grid.")
        return cls(grid, np.stack([c.values for c in components]))

    def component(self, k: int) -> ScalarField:
        """Component k, zero-based."""
        return ScalarField(self.grid, self.values[k])

    def speed(self) -> np.ndarray:
        return np.sqrt(np.sum(self.values**2, axis=0))

    def __add__(self, other: VectorField3) -> VectorField3:
        return VectorField3(self.grid, self.values + other.values)

    def __sub__(self, other: VectorField3) -> VectorField3:
        return VectorField3(self.grid, self.values - other.values)

    def __mul__(self, scale: float) -> VectorField3:
        return VectorField3(self.grid, self.values * scale)

    __rmul__ = __mul__

    def at_origin(self) -> np.ndarray:
        o = self.grid.origin_index
        return np.array(self.values[:, o, o, o])


@dataclass(frozen=True)
class Ball:
    """An open ball B(center, radius).

    `radius = inf` denotes the ball covering the whole box.
    """

    center: tuple[float, float, float]
    radius: float

    def __post_init__(self) -> None:
        if not self.radius > 0:
            raise DomainError(f"ball radius must be positive (got {self.radius}).")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @property
    def covering(self) -> bool:
        return math.isinf(self.radius)


def ball_mask(grid: Grid3, ball: Ball) -> np.ndarray:
    """Nodes strictly inside the ball, measured with the torus distance."""
    if ball.covering:
        return np.ones(grid.shape, dtype=bool)
    if ball.radius >= grid.half_width:
        raise DomainError(
            f"ball radius must be below the box half-width "
            f"(got {ball.radius}, L={grid.half_width})."
        )
    offset = grid.torus_offset(grid.mesh(), ball.center)
    return np.sum(offset**2, axis=0) < ball.radius**2


def ball_measure(grid: Grid3, ball: Ball) -> float:
    """Discrete measure |B| = (node count) * h^3."""
    return int(np.count_nonzero(ball_mask(grid, ball))) * grid.cell_volume


def ball_average(f: ScalarField, ball: Ball) -> float:
    """Mean of f over the grid nodes inside the ball.

    Raises:
        BallTooSmallError: If the ball holds fewer than eight nodes.
    """
    mask = ball_mask(f.grid, ball)
    count = int(np.count_nonzero(mask))
    if count < MIN_BALL_NODES:
        raise BallTooSmallError(
            f"ball {ball} holds {count} nodes; at least {MIN_BALL_NODES} are needed."
        )
    return float(np.mean(f.values[mask]))


def ball_offsets(grid: Grid3, radius: float) -> np.ndarray:
    """Integer node offsets (M, 3) of a ball of the given radius centred on a node."""
    if not 0 < radius < grid.half_width:
        raise DomainError(
            f"ball radius must lie in (0, L) (got {radius}, L={grid.half_width})."
        )
    reach = int(math.ceil(radius / grid.h))
    steps = np.arange(-reach, reach + 1)
    cube = np.stack(np.meshgrid(steps, steps, steps, indexing="ij"), axis=-1)
    cube = cube.reshape(-1, 3)
    inside = np.sum((cube * grid.h) ** 2, axis=1) < radius**2
    return cube[inside]


@dataclass(frozen=True)
class BallFamily:
    """Declared finite family of balls standing in for "all balls".

    Attributes:
        kind: `exhaustive` (every node a center) or `dyadic` (centers every
            `stride` nodes, always including the origin node).
        stride: Center spacing in nodes for `dyadic`.
        radii: Explicit physical radii. When empty, the radii h * 2^k below L
            that hold at least eight nodes are used.
        covering: Append one ball covering the whole box.
    """

    kind: FamilyKind = "dyadic"
    stride: int = 4
    radii: tuple[float, ...] = ()
    covering: bool = False

    def __post_init__(self) -> None:
        if self.kind not in ("exhaustive", "dyadic"):
            raise ConfigError(f"Unsupported ball family: {self.kind}")
        if not isinstance(self.stride, int) or self.stride < 1:
            raise ConfigError(f"stride must be a positive integer (got {self.stride}).")
        if any(not r > 0 for r in self.radii):
            raise ConfigError("family radii must be positive.")
        object.__setattr__(self, "radii", tuple(float(r) for r in self.radii))

    def describe(self) -> str:
        text = "exhaustive" if self.kind == "exhaustive" else f"dyadic:{self.stride}"
        if self.radii:
            text += "[" + ",".join(f"{r:g}" for r in self.radii) + "]"
        if self.covering:
            text += "+box"
        return text


def parse_ball_family(text: str) -> BallFamily:
    """Parse `exhaustive` or `dyadic:<stride>`."""
    text = text.strip()
    if text == "exhaustive":
        return BallFamily("exhaustive", 1)
    if text.startswith("dyadic:"):
        raw = text.split(":", 1)[1]
        try:
            stride = int(raw)
        except ValueError as e:
            raise ConfigError(f"dyadic stride must be an integer (got {raw!r}).") from e
        return BallFamily("dyadic", stride)
    if text == "dyadic":
        return BallFamily("dyadic")
    raise ConfigError(
        f"balls must be 'exhaustive' or 'dyadic:<stride>' (got {text!r})."
    )


def family_centers(grid: Grid3, family: BallFamily) -> np.ndarray:
    """Center node indices (M, 3) in row-major order."""
    stride = 1 if family.kind == "exhaustive" else family.stride
    if grid.n % stride:
        raise ConfigError(f"stride {stride} must divide n={grid.n}.")
    # Every multiple of the stride; the origin index n/2 is one of them.
    axis = np.arange(0, grid.n, stride)
    mesh = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1)
    return mesh.reshape(-1, 3)


def family_radii(grid: Grid3, family: BallFamily) -> list[float]:
    """Physical radii of the family, ascending."""
    if family.radii:
        return sorted(family.radii)
    radii = []
    radius = grid.h
    while radius < grid.half_width:
        if len(ball_offsets(grid, radius)) >= MIN_BALL_NODES:
            radii.append(radius)
        radius *= 2.0
    if not radii and not family.covering:
        raise ConfigError(f"grid n={grid.n} admits no dyadic ball radius.")
    return radii


def sample_balls(grid: Grid3, family: BallFamily) -> list[Ball]:
    """Deterministic ball list: center-major, radius-minor, covering ball last."""
    radii = family_radii(grid, family)
    balls = [
        Ball(tuple(grid.point(tuple(index))), radius)
        for index in family_centers(grid, family)
        for radius in radii
    ]
    if family.covering:
        balls.append(Ball((0.0, 0.0, 0.0), math.inf))
    return balls


def _spectral_apply(values: np.ndarray, symbol: np.ndarray) -> np.ndarray:
    transformed = fft.fftn(values, axes=(-3, -2, -1))
    return fft.ifftn(transformed * symbol, axes=(-3, -2, -1)).real


def _fd_derivative(values: np.ndarray, axis: int, h: float) -> np.ndarray:
    axis = axis - 3
    return (np.roll(values, -1, axis=axis) - np.roll(values, 1, axis=axis)) / (2 * h)


def _fd_laplacian(values: np.ndarray, h: float) -> np.ndarray:
    total = -6.0 * values
    for axis in (-3, -2, -1):
        total = total + np.roll(values, -1, axis=axis) + np.roll(values, 1, axis=axis)
    return total / h**2


def derivative(f: ScalarField, axis: int, *, method: DiffMethod = "spectral"
               ) -> ScalarField:
    """Partial derivative along a zero-based axis."""
    if axis not in (0, 1, 2):
        raise DomainError(f"axis must be 0, 1 or 2 (got {axis}).")
    if method == "fd":
        return ScalarField(f.grid, _fd_derivative(f.values, axis, f.grid.h))
    k = f.grid.wave_mesh(odd=True)[axis]
    return ScalarField(f.grid, _spectral_apply(f.values, 1j * k))


def gradient(f: ScalarField, *, method: DiffMethod = "spectral") -> VectorField3:
    return VectorField3.from_components(
        [derivative(f, axis, method=method) for axis in range(3)]
    )


def divergence(v: VectorField3, *, method: DiffMethod = "spectral") -> ScalarField:
    total = sum(
        derivative(v.component(k), k, method=method).values for k in range(3)
    )
    return ScalarField(v.grid, total)


def curl(v: VectorField3, *, method: DiffMethod = "spectral") -> VectorField3:
    def d(component: int, axis: int) -> np.ndarray:
        return derivative(v.component(component), axis, method=method).values

    return VectorField3(
        v.grid,
        np.stack([d(2, 1) - d(1, 2), d(0, 2) - d(2, 0), d(1, 0) - d(0, 1)]),
    )


def laplacian(f: ScalarField | VectorField3, *, method: DiffMethod = "spectral"):
    """Laplacian of a scalar or (component-wise) vector field."""
    grid = f.grid
    if method == "fd":
        values = _fd_laplacian(f.values, grid.h)
    else:
        k2 = np.sum(grid.wave_mesh() ** 2, axis=0)
        values = _spectral_apply(f.values, -k2)
    return type(f)(grid, values)


def reflect_y3(f: ScalarField | VectorField3):
    """f(y1, y2, -y3) through the index map k -> (N - k) mod N on the third axis.

    Vector components are not sign-flipped.
    """
    reflected = np.roll(np.flip(f.values, axis=-1), 1, axis=-1)
    return type(f)(f.grid, reflected)
