from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import fft

from nlc_monitor.core.errors import ConfigError
from nlc_monitor.core.grid import Grid3, VectorField3

# Public API of the initial-data catalogue.
__all__ = [
    "InitialData",
    "Beltrami",
    "TaylorGreen",
    "RandomBandLimited",
    "GaussianVortex",
    "parse_init",
    "base_wavenumber",
    "project_values",
]


def base_wavenumber(grid: Grid3) -> float:
    """k0 = pi/L: the lowest wavenumber whose modes fit the box twice."""
    return math.pi / grid.half_width


def project_values(values: np.ndarray, grid: Grid3) -> np.ndarray:
    """Leray-project a real (3, N, N, N) array in physical space."""
    from nlc_monitor.solver.spectral import project_div_free

    uhat = fft.fftn(values, axes=(1, 2, 3))
    return fft.ifftn(project_div_free(uhat, grid), axes=(1, 2, 3)).real


@dataclass(frozen=True)
class Beltrami:
    """ABC flow with curl u = k0 u; decays exactly as exp(-nu k0^2 t)."""

    a: float = 1.0
    b: float = 1.0
    c: float = 1.0

    def field(self, grid: Grid3) -> VectorField3:
        x, y, z = grid.mesh() * base_wavenumber(grid)
        return VectorField3(grid, np.stack([
            self.a * np.sin(z) + self.c * np.cos(y),
            self.b * np.sin(x) + self.a * np.cos(z),
            self.c * np.sin(y) + self.b * np.cos(x),
        ]))

    def exact(self, grid: Grid3, t: float, nu: float = 1.0) -> VectorField3:
        decay = math.exp(-nu * base_wavenumber(grid) ** 2 * t)
        return VectorField3(grid, decay * self.field(grid).values)


@dataclass(frozen=True)
class TaylorGreen:
    amplitude: float = 1.0

    def field(self, grid: Grid3) -> VectorField3:
        x, y, z = grid.mesh() * base_wavenumber(grid)
        return VectorField3(grid, self.amplitude * np.stack([
            np.sin(x) * np.cos(y) * np.cos(z),
            -np.cos(x) * np.sin(y) * np.cos(z),
            np.zeros_like(x),
        ]))


@dataclass(frozen=True)
class RandomBandLimited:
    """Seeded random divergence-free field with modes |m_i| <= kmax, max |u| = 1."""

    seed: int = 0
    kmax: int = 4

    def field(self, grid: Grid3) -> VectorField3:
        if not 1 <= self.kmax < grid.n // 3:
            raise ConfigError(
                f"kmax must satisfy 1 <= kmax < n/3 (got kmax={self.kmax}, n={grid.n})."
            )
        rng = np.random.default_rng(self.seed)
        noise = rng.standard_normal((3,) + grid.shape)
        modes = np.abs(fft.fftfreq(grid.n) * grid.n)
        band = (
            (modes[:, None, None] <= self.kmax)
            & (modes[None, :, None] <= self.kmax)
            & (modes[None, None, :] <= self.kmax)
        )
        uhat = fft.fftn(noise, axes=(1, 2, 3)) * band
        uhat[:, 0, 0, 0] = 0.0
        values = fft.ifftn(uhat, axes=(1, 2, 3)).real
        values = project_values(values, grid)
        top = float(np.max(np.sqrt(np.sum(values**2, axis=0))))
        return VectorField3(grid, values / top)


@dataclass(frozen=True)
class GaussianVortex:
    """u = grad g x a with g a Gaussian of the given width; decays at the box edge.

    `width = None` uses L/6, which puts the box edge 36 e-foldings out.
    """

    width: float | None = None
    axis: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def field(self, grid: Grid3) -> VectorField3:
        width = self.width if self.width is not None else grid.half_width / 6
        if not width > 0:
            raise ConfigError(f"width must be positive (got {width}).")
        a = np.asarray(self.axis, dtype=float)
        a = a / np.linalg.norm(a)
        x = grid.mesh()
        g = np.exp(-np.sum(x**2, axis=0) / width**2)
        grad = -2.0 * x / width**2 * g
        values = np.stack([
            grad[1] * a[2] - grad[2] * a[1],
            grad[2] * a[0] - grad[0] * a[2],
            grad[0] * a[1] - grad[1] * a[0],
        ])
        return VectorField3(grid, project_values(values, grid))


InitialData = Beltrami | TaylorGreen | RandomBandLimited | GaussianVortex


def parse_init(text: str) -> InitialData:
    """Parse `beltrami`, `tg`, `random:<seed>` or `gaussian`."""
    text = text.strip()
    if text == "beltrami":
        return Beltrami()
    if text == "tg":
        return TaylorGreen()
    if text == "gaussian":
        return GaussianVortex()
    if text.startswith("random"):
        _, _, raw = text.partition(":")
        try:
            seed = int(raw) if raw else 0
        except ValueError as e:
            raise ConfigError(f"random seed must be an integer (got {raw!r}).") from e
        return RandomBandLimited(seed)
    raise ConfigError(
        f"init must be beltrami, tg, random:<seed> or gaussian (got {text!r})."
    )
