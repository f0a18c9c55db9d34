from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy import fft, signal, special

from nlc_monitor.core.errors import ConfigError, DomainError, ResolutionError
from nlc_monitor.core.grid import (
    Ball,
    BallFamily,
    Grid3,
    ScalarField,
    ball_mask,
    gradient,
    reflect_y3,
)
from nlc_monitor.core.growth import GrowthFunction
from nlc_monitor.core.norms import BoundTable, pointed_campanato_norm

__all__ = [
    "C3",
    "Parity",
    "MultiplierOp",
    "KernelResult",
    "ParityReport",
    "KernelSamples",
    "KernelReport",
    "ConvergencePoint",
    "riesz_op",
    "riesz_pair_op",
    "riesz",
    "riesz_pair",
    "imag_residue",
    "riesz_truncated",
    "modified_riesz",
    "parity_of",
    "parity_check",
    "riesz_kernel",
    "kernel_samples",
    "check_kernel_conditions",
    "riesz_boundedness_table",
    "modified_convergence",
]

logger = logging.getLogger(__name__)

# Normalising constant Gamma((n+1)/2) pi^(-(n+1)/2) of the Riesz kernel, n = 3.
C3 = float(special.gamma(2.0) / math.pi**2)

Parity = Literal["even", "odd", "none"]

Kernel = Callable[[np.ndarray, np.ndarray], np.ndarray]

# Symbols below this magnitude count as the zero mode.
_ZERO_MODE = 1e-300


def _check_index(j: int) -> None:
    if j not in (1, 2, 3):
        raise DomainError(f"Riesz index must be 1, 2 or 3 (got {j}).")


@dataclass(frozen=True, eq=False)
class MultiplierOp:
    """A Fourier multiplier on periodic fields.

    `symbol` maps the odd wavenumber mesh (3, N, N, N), Nyquist zeroed, to
    complex symbol values. Real fields map to real fields when the symbol is
    Hermitian; the imaginary residue of the inverse transform is reported by
    `imag_residue`.
    """

    symbol: Callable[[np.ndarray], np.ndarray]
    zero_mode: complex = 0.0
    name: str = "multiplier"

    def _transform(self, f: ScalarField) -> np.ndarray:
        k = f.grid.wave_mesh(odd=True)
        m = np.asarray(self.symbol(k), dtype=complex)
        m[0, 0, 0] = self.zero_mode
        return fft.ifftn(fft.fftn(f.values) * m)

    def apply(self, f: ScalarField) -> ScalarField:
        return ScalarField(f.grid, self._transform(f).real)

    __call__ = apply


def _unit_frequency(k: np.ndarray) -> np.ndarray:
    norm = np.sqrt(np.sum(k**2, axis=0))
    safe = np.where(norm > _ZERO_MODE, norm, 1.0)
    return np.where(norm > _ZERO_MODE, k / safe, 0.0)


def riesz_op(j: int) -> MultiplierOp:
    """R_j with symbol -i xi_j / |xi| (1-based j)."""
    _check_index(j)
    return MultiplierOp(lambda k: -1j * _unit_frequency(k)[j - 1], name=f"R{j}")


def riesz_pair_op(i: int, j: int) -> MultiplierOp:
    """R_i R_j with symbol -xi_i xi_j / |xi|^2."""
    _check_index(i)
    _check_index(j)

    def symbol(k: np.ndarray) -> np.ndarray:
        unit = _unit_frequency(k)
        return -unit[i - 1] * unit[j - 1]

    return MultiplierOp(symbol, name=f"R{i}R{j}")


def riesz(f: ScalarField, j: int) -> ScalarField:
    """Spectral Riesz transform R_j f; the output is mean-zero."""
    return riesz_op(j).apply(f)


def riesz_pair(f: ScalarField, i: int, j: int) -> ScalarField:
    return riesz_pair_op(i, j).apply(f)


def imag_residue(op: MultiplierOp, f: ScalarField) -> float:
    """Largest imaginary part left by the inverse transform."""
    return float(np.max(np.abs(op._transform(f).imag)))


@dataclass(frozen=True, eq=False)
class KernelResult:
    """A kernel-quadrature field and its near-field error estimate."""

    field: ScalarField
    tail_estimate: float


def _offset_kernel(grid: Grid3, j: int, eps: float) -> np.ndarray:
    """c3 d_j / |d|^4 on all node offsets d with |d| >= eps, as a (2N-1)^3 array."""
    steps = grid.h * np.arange(-(grid.n - 1), grid.n)
    d = np.stack(np.meshgrid(steps, steps, steps, indexing="ij"))
    r2 = np.sum(d**2, axis=0)
    keep = r2 >= eps**2
    safe = np.where(keep, r2, 1.0)
    return np.where(keep, C3 * d[j - 1] / safe**2, 0.0)


def riesz_truncated(f: ScalarField, j: int, eps: float) -> KernelResult:
    """Midpoint-rule quadrature of c3 * int_{|x-y|>=eps} (x_j-y_j)/|x-y|^4 f(y) dy.

    The sum runs over the box nodes without periodic images. The reported
    tail estimate bounds the omitted near field, c3 (4 pi/3) eps max|grad f|.

    Raises:
        ResolutionError: If eps < 2h.
    """
    _check_index(j)
    grid = f.grid
    if eps < 2 * grid.h:
        raise ResolutionError(
            f"eps must be at least 2h (got eps={eps:g}, 2h={2 * grid.h:g})."
        )
    kernel = _offset_kernel(grid, j, eps)
    full = signal.fftconvolve(f.values, kernel, mode="full")
    n = grid.n
    values = full[n - 1 : 2 * n - 1, n - 1 : 2 * n - 1, n - 1 : 2 * n - 1]
    values = values * grid.cell_volume
    slope = float(np.max(np.abs(gradient(f).values)))
    tail = C3 * (4.0 * math.pi / 3.0) * eps * slope
    return KernelResult(ScalarField(grid, values), tail)


def modified_riesz(f: ScalarField, j: int, eps: float) -> KernelResult:
    """Truncated quadrature minus the x-independent subtraction term.

    The subtraction c3 * sum_{|y|>=1} (-y_j)/|y|^4 f(y) h^3 keeps the
    operator finite on non-decaying data and makes it vanish on constants.
    """
    truncated = riesz_truncated(f, j, eps)
    grid = f.grid
    y = grid.mesh()
    r2 = np.sum(y**2, axis=0)
    outside = r2 >= 1.0
    safe = np.where(outside, r2, 1.0)
    weight = np.where(outside, -y[j - 1] / safe**2, 0.0)
    shift = C3 * float(np.sum(weight * f.values)) * grid.cell_volume
    shifted = ScalarField(grid, truncated.field.values - shift)
    return KernelResult(shifted, truncated.tail_estimate)


def parity_of(f: ScalarField, tol: float = 1e-12) -> tuple[Parity, float, float]:
    """Parity of f in y3 with the even and odd defects max|f -+ Rf|."""
    mirrored = reflect_y3(f).values
    even = float(np.max(np.abs(f.values - mirrored)))
    odd = float(np.max(np.abs(f.values + mirrored)))
    scale = max(1.0, float(np.max(np.abs(f.values))))
    if even <= tol * scale:
        return "even", even, odd
    if odd <= tol * scale:
        return "odd", even, odd
    return "none", even, odd


@dataclass(frozen=True)
class ParityReport:
    """Parity of R1 f, R2 f, R3 f against the expected table.

    Attributes:
        input_parity: Parity of f in y3.
        expected: Expected parities of R1 f, R2 f, R3 f.
        defects: Parity defect of each R_j f against its expectation.
    """

    input_parity: Parity
    expected: tuple[Parity, Parity, Parity] | None
    defects: tuple[float, float, float] | None

    @property
    def max_defect(self) -> float:
        return max(self.defects) if self.defects else math.nan


def parity_check(f: ScalarField, tol: float = 1e-12) -> ParityReport:
    """Check that R1, R2 keep the y3-parity of f and R3 flips it."""
    parity, _, _ = parity_of(f, tol)
    if parity == "none":
        return ParityReport("none", None, None)
    flipped: Parity = "odd" if parity == "even" else "even"
    expected = (parity, parity, flipped)
    defects = []
    for j, want in zip((1, 2, 3), expected):
        _, even, odd = parity_of(riesz(f, j), tol)
        defects.append(even if want == "even" else odd)
    return ParityReport(parity, expected, tuple(defects))


def riesz_kernel(j: int) -> Kernel:
    """K(x, y) = c3 (x_j - y_j) / |x - y|^4."""
    _check_index(j)

    def kernel(x: np.ndarray, y: np.ndarray) -> np.ndarray:
        d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
        return C3 * d[..., j - 1] / np.sum(d**2, axis=-1) ** 2

    return kernel


@dataclass(frozen=True, eq=False)
class KernelSamples:
    """Sample triples with |x - y| >= 2|x - z| and annuli (r, R) for the
    cancellation integrals."""

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    annuli: tuple[tuple[float, float], ...] = ((0.5, 1.0), (1.0, 2.0), (0.25, 4.0))
    quadrature_points: int = 100_000
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("x", "y", "z"):
            object.__setattr__(self, name, np.atleast_2d(np.asarray(
                getattr(self, name), dtype=float)))
        if np.any(np.linalg.norm(self.x - self.y, axis=-1) == 0):
            raise DomainError("kernel samples need x != y.")
        far = np.linalg.norm(self.x - self.y, axis=-1)
        near = np.linalg.norm(self.x - self.z, axis=-1)
        if np.any(far < 2 * near):
            raise DomainError("kernel samples need |x - y| >= 2|x - z|.")
        for r, big in self.annuli:
            if not 0 < r < big:
                raise DomainError(f"annulus needs 0 < r < R (got {r}, {big}).")


def kernel_samples(count: int = 2000, seed: int = 0) -> KernelSamples:
    """Random triples in [-2, 2]^3 satisfying the smoothness geometry."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(-2.0, 2.0, size=(count, 3))
    direction = rng.normal(size=(count, 3))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    distance = rng.uniform(0.1, 2.0, size=(count, 1))
    y = x + distance * direction
    step = rng.normal(size=(count, 3))
    step /= np.linalg.norm(step, axis=1, keepdims=True)
    z = x + step * distance * rng.uniform(0.0, 0.45, size=(count, 1))
    return KernelSamples(x, y, z, seed=seed)


@dataclass(frozen=True)
class KernelReport:
    """Empirical constants of the size, smoothness and cancellation conditions."""

    size_constant: float
    smoothness_constant: float
    annulus_integrals: tuple[float, ...] = field(default=())


def _annulus_points(rng: np.random.Generator, r: float, big: float,
                    count: int) -> np.ndarray:
    u = rng.uniform(size=count)
    rho = (r**3 + u * (big**3 - r**3)) ** (1.0 / 3.0)
    direction = rng.normal(size=(count, 3))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    return rho[:, None] * direction


def check_kernel_conditions(kernel: Kernel, kappa: float,
                            samples: KernelSamples) -> KernelReport:
    """Spot-check a kernel against the size, kappa-smoothness and cancellation
    conditions of a singular integral operator.

    The annulus integrals use antithetic Monte Carlo (each point z paired
    with -z) around the first sample point, integrating in y and in x.
    """
    if not 0 < kappa <= 1:
        raise ConfigError(f"kappa must satisfy 0 < kappa <= 1 (got {kappa}).")
    x, y, z = samples.x, samples.y, samples.z
    far = np.linalg.norm(x - y, axis=-1)
    near = np.linalg.norm(x - z, axis=-1)

    size = float(np.max(np.abs(kernel(x, y)) * far**3))

    moved = near > 0
    smooth = 0.0
    if np.any(moved):
        xs, ys, zs = x[moved], y[moved], z[moved]
        jump = np.abs(kernel(xs, ys) - kernel(zs, ys)) + np.abs(
            kernel(ys, xs) - kernel(ys, zs)
        )
        ratio = jump * far[moved] ** (3 + kappa) / near[moved] ** kappa
        smooth = float(np.max(ratio))

    rng = np.random.default_rng(samples.seed)
    centre = x[0]
    integrals = []
    half = max(1, samples.quadrature_points // 2)
    for r, big in samples.annuli:
        offsets = _annulus_points(rng, r, big, half)
        offsets = np.concatenate([offsets, -offsets])
        volume = 4.0 * math.pi / 3.0 * (big**3 - r**3)
        in_y = volume * float(np.mean(kernel(centre, centre + offsets)))
        in_x = volume * float(np.mean(kernel(centre + offsets, centre)))
        integrals.append(max(abs(in_y), abs(in_x)))
    return KernelReport(size, smooth, tuple(integrals))


def riesz_boundedness_table(fields: Sequence[ScalarField], j: int, q: float,
                            psi: GrowthFunction, family: BallFamily) -> BoundTable:
    """||R_j f|| / ||f|| in the pointed Campanato norm of (q, psi)."""
    ratios = []
    for f in fields:
        bottom = pointed_campanato_norm(f, q, psi, family).value
        if bottom > 0:
            top = pointed_campanato_norm(riesz(f, j), q, psi, family).value
            ratios.append(top / bottom)
    if not ratios:
        raise ConfigError("boundedness table needs at least one non-zero field.")
    return BoundTable(tuple(ratios))


@dataclass(frozen=True)
class ConvergencePoint:
    eps: float
    distance: float


def modified_convergence(f: ScalarField, j: int, epsilons: Sequence[float],
                         ball: Ball, p: float = 2.0) -> list[ConvergencePoint]:
    """L^p(B) distance of the modified transform at each eps to the finest one.

    No rate is asserted; the sequence is reported as measured.
    """
    if not epsilons:
        raise ConfigError("modified_convergence needs at least one eps.")
    ordered = sorted(epsilons, reverse=True)
    mask = ball_mask(f.grid, ball)
    finest = modified_riesz(f, j, ordered[-1]).field.values[mask]
    points = []
    for eps in ordered:
        values = modified_riesz(f, j, eps).field.values[mask]
        gap = np.sum(np.abs(values - finest) ** p) * f.grid.cell_volume
        points.append(ConvergencePoint(eps, float(gap ** (1.0 / p))))
    return points
