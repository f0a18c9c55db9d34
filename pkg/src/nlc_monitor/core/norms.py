from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from nlc_monitor.core.errors import (
    BallTooSmallError,
    ConfigError,
    DomainError,
    PrerequisiteError,
)
from nlc_monitor.core.grid import (
    MIN_BALL_NODES,
    Ball,
    BallFamily,
    Grid3,
    ScalarField,
    ball_average,
    ball_mask,
    ball_offsets,
    family_centers,
    family_radii,
)
from nlc_monitor.core.growth import (
    ConditionReport,
    GrowthFunction,
    check_conditions,
    evaluate,
    growth_on_ball,
    make_phi,
    power_alpha,
)

__all__ = [
    "NormSpace",
    "SigmaMode",
    "VSpace",
    "NormReport",
    "SigmaReport",
    "EquivalenceRow",
    "EquivalenceTable",
    "BoundTable",
    "anchor_radius",
    "campanato_norm",
    "pointed_campanato_norm",
    "morrey_norm",
    "holder_norm",
    "pointed_holder_norm",
    "lip_norm_on_ball",
    "compute_norm",
    "sigma_limit",
    "equivalence_harness",
    "origin_constant",
    "local_lp_constant",
    "product_bound_table",
]

logger = logging.getLogger(__name__)

NormSpace = Literal["campanato", "pointed", "morrey", "holder", "pointed_holder", "lip"]
SigmaMode = Literal["torus", "extrapolate"]

# Upper bound on gathered values per chunk in the ball scans.
_CHUNK_VALUES = 1 << 22

# Pair scans use every node up to this many points per axis, strided beyond.
_PAIR_AXIS_NODES = 16

# Spread of the largest-radius averages below which the extrapolated limit
# is considered converged.
_SIGMA_SPREAD_TOL = 1e-3

Argmax = Ball | tuple[tuple[float, ...], tuple[float, ...]] | None


@dataclass(frozen=True)
class NormReport:
    """Result of one sampled supremum.

    Attributes:
        value: The reported norm (seminorm plus point term when pointed).
        argmax: Ball or point pair where the supremum was reached.
        family: Descriptor of the sampled family.
        point_term: |f_B(0,1)| or |f(0)| for pointed norms, else None.
    """

    value: float
    argmax: Argmax
    family: str
    point_term: float | None = None

    @property
    def seminorm(self) -> float:
        return self.value - (self.point_term or 0.0)


@dataclass(frozen=True)
class SigmaReport:
    """The torus surrogate of the limit of f_B(0,r) as r grows.

    Attributes:
        value: The selected limit: the global mean in `torus` mode, the
            largest-radius average in `extrapolate` mode.
        mean: Global mean of f.
        radii: The three largest admissible radii, descending.
        averages: f_B(0,r) for those radii.
        spread: max - min of the averages.
        converged: True when the spread is below 1e-3.
        mode: Which limit was selected.
    """

    value: float
    mean: float
    radii: tuple[float, ...]
    averages: tuple[float, ...]
    spread: float
    converged: bool
    mode: SigmaMode


@dataclass(frozen=True)
class EquivalenceRow:
    index: int
    exponent_ratio: float
    holder_ratio: float | None
    morrey_ratio: float | None


@dataclass(frozen=True)
class EquivalenceTable:
    """Ratios of equivalent norms over a field family, plus their range."""

    rows: tuple[EquivalenceRow, ...]
    conditions: ConditionReport
    skipped: int

    def column(self, name: str) -> list[float]:
        values = [getattr(row, name) for row in self.rows]
        return [v for v in values if v is not None]

    def span(self, name: str) -> tuple[float, float] | None:
        values = self.column(name)
        if not values:
            return None
        return min(values), max(values)


@dataclass(frozen=True)
class BoundTable:
    """Empirical constants of a ratio over a sampled family."""

    ratios: tuple[float, ...]

    @property
    def minimum(self) -> float:
        return min(self.ratios)

    @property
    def maximum(self) -> float:
        return max(self.ratios)


@dataclass(frozen=True)
class VSpace:
    """The space V of the collapsing criterion: a pointed Campanato space.

    Defaults instantiate n = 3, p = 4 and the piecewise phi with alpha = 1/2,
    alpha_tilde = beta = -3/4.
    """

    p: float = 4.0
    phi: GrowthFunction = field(default_factory=make_phi)
    balls: BallFamily = field(default_factory=BallFamily)

    def __post_init__(self) -> None:
        if not self.p >= 1:
            raise ConfigError(f"p must satisfy p >= 1 (got p={self.p}).")

    def norm(self, f: ScalarField) -> NormReport:
        return pointed_campanato_norm(f, self.p, self.phi, self.balls)


def anchor_radius(grid: Grid3) -> float:
    """Radius of the anchor ball of pointed norms: 1, or L/2 on boxes with L <= 2."""
    return min(1.0, grid.half_width / 2.0)


def _anchor_ball(grid: Grid3) -> Ball:
    return Ball((0.0, 0.0, 0.0), anchor_radius(grid))


def _weights(phi: GrowthFunction, coords: np.ndarray, radius: float,
             measure: float) -> np.ndarray:
    if phi.kind == "morrey":
        return np.full(len(coords), growth_on_ball(phi, coords[0], radius, measure))
    return np.broadcast_to(
        np.asarray(evaluate(phi, coords, radius), dtype=float), (len(coords),)
    )


def _local_power_means(flat: np.ndarray, n: int, centers: np.ndarray,
                       offsets: np.ndarray, p: float, oscillation: bool
                       ) -> np.ndarray:
    """(|B|^-1 sum_B |f - f_B|^p)^(1/p) (or without f_B) for each center."""
    out = np.empty(len(centers))
    chunk = max(1, _CHUNK_VALUES // len(offsets))
    for start in range(0, len(centers), chunk):
        block = centers[start : start + chunk]
        index = (block[:, None, :] + offsets[None, :, :]) % n
        linear = (index[..., 0] * n + index[..., 1]) * n + index[..., 2]
        values = flat[linear]
        if oscillation:
            values = values - values.mean(axis=1, keepdims=True)
        out[start : start + chunk] = np.mean(np.abs(values) ** p, axis=1) ** (1.0 / p)
    return out


def _ball_scan(f: ScalarField, p: float, phi: GrowthFunction, family: BallFamily,
               *, oscillation: bool) -> NormReport:
    if not p >= 1:
        raise ConfigError(f"p must satisfy p >= 1 (got p={p}).")
    grid = f.grid
    flat = f.values.ravel()
    centers = family_centers(grid, family)
    coords = grid.point(centers)
    radii = family_radii(grid, family)

    table = np.empty((len(centers), len(radii)))
    for k, radius in enumerate(radii):
        offsets = ball_offsets(grid, radius)
        if len(offsets) < MIN_BALL_NODES:
            raise BallTooSmallError(
                f"radius {radius:g} holds {len(offsets)} nodes; "
                f"at least {MIN_BALL_NODES} are needed."
            )
        measure = len(offsets) * grid.cell_volume
        local = _local_power_means(flat, grid.n, centers, offsets, p, oscillation)
        table[:, k] = local / _weights(phi, coords, radius, measure)
        logger.debug("radius %g: max %g", radius, table[:, k].max())

    best, argmax = -math.inf, None
    if table.size:
        # np.argmax keeps the first maximum: the lowest ball index wins ties.
        flat_index = int(np.argmax(table))
        c, k = divmod(flat_index, len(radii))
        best = float(table[c, k])
        argmax = Ball(tuple(coords[c]), radii[k])
    if family.covering:
        values = flat - flat.mean() if oscillation else flat
        local = float(np.mean(np.abs(values) ** p) ** (1.0 / p))
        measure = flat.size * grid.cell_volume
        covering = local / growth_on_ball(phi, np.zeros(3), math.inf, measure)
        if covering > best:
            best, argmax = covering, Ball((0.0, 0.0, 0.0), math.inf)
    return NormReport(best, argmax, family.describe())


def campanato_norm(f: ScalarField, p: float, phi: GrowthFunction,
                   family: BallFamily) -> NormReport:
    """Sampled Campanato seminorm: max over balls of phi(B)^-1 times the mean
    p-th oscillation of f on B.

    The result is a lower bound of the continuum supremum and exact over the
    exhaustive family at grid resolution.

    Raises:
        ConfigError: If p < 1 or the family is empty.
        BallTooSmallError: If an explicit radius holds fewer than eight nodes.
    """
    return _ball_scan(f, p, phi, family, oscillation=True)


def pointed_campanato_norm(f: ScalarField, p: float, phi: GrowthFunction,
                           family: BallFamily) -> NormReport:
    """Campanato seminorm plus |f_B(0,1)|."""
    report = campanato_norm(f, p, phi, family)
    point = abs(ball_average(f, _anchor_ball(f.grid)))
    return NormReport(report.value + point, report.argmax, report.family, point)


def morrey_norm(f: ScalarField, p: float, phi: GrowthFunction,
                family: BallFamily) -> NormReport:
    """Sampled Morrey norm: like the Campanato seminorm without subtracting f_B."""
    return _ball_scan(f, p, phi, family, oscillation=False)


def _pair_stride(grid: Grid3, pairs: int) -> int:
    if pairs < 1:
        raise ConfigError(f"pairs must be a positive node count (got {pairs}).")
    return max(1, grid.n // pairs)


def _pair_nodes(grid: Grid3, pairs: int) -> np.ndarray:
    stride = _pair_stride(grid, pairs)
    axis = np.arange(0, grid.n, stride)
    mesh = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1)
    return mesh.reshape(-1, 3)


def _pair_scan(points: np.ndarray, values: np.ndarray, denominator) -> tuple:
    """Max over i < j of |f_i - f_j| / denominator(i, tail points, distances)."""
    best, pair = -math.inf, None
    for i in range(len(points) - 1):
        tail = points[i + 1 :]
        distance = np.linalg.norm(tail - points[i], axis=1)
        ratio = np.abs(values[i + 1 :] - values[i]) / denominator(i, tail, distance)
        j = int(np.argmax(ratio))
        if ratio[j] > best:
            best = float(ratio[j])
            pair = (tuple(points[i]), tuple(tail[j]))
    return best, pair


def holder_norm(f: ScalarField, phi: GrowthFunction,
                pairs: int = _PAIR_AXIS_NODES) -> NormReport:
    """Max over node pairs of 2|f(x)-f(y)| / (phi(x,|x-y|) + phi(y,|x-y|)).

    All node pairs are used when N <= pairs; on finer grids the nodes are
    strided down to `pairs` per axis. Distances are Euclidean in the
    principal cell.

    Raises:
        ConfigError: If pairs < 1 or the sampled pair set is empty.
    """
    grid = f.grid
    nodes = _pair_nodes(grid, pairs)
    if len(nodes) < 2:
        raise ConfigError("the pair family is empty.")
    points = grid.point(nodes)
    values = f.values[nodes[:, 0], nodes[:, 1], nodes[:, 2]]

    def denominator(i: int, tail: np.ndarray, distance: np.ndarray) -> np.ndarray:
        near = np.asarray(evaluate(phi, points[i], distance), dtype=float)
        far = np.asarray(evaluate(phi, tail, distance), dtype=float)
        return (near + far) / 2.0

    best, pair = _pair_scan(points, values, denominator)
    return NormReport(best, pair, f"pairs:{_pair_stride(grid, pairs)}")


def pointed_holder_norm(f: ScalarField, phi: GrowthFunction,
                        pairs: int = _PAIR_AXIS_NODES) -> NormReport:
    report = holder_norm(f, phi, pairs)
    point = abs(f.at_origin())
    return NormReport(report.value + point, report.argmax, report.family, point)


def lip_norm_on_ball(f: ScalarField, alpha: float, ball: Ball) -> NormReport:
    """Max over node pairs in the ball of |f(x) - f(y)| / |x - y|^alpha."""
    grid = f.grid
    mask = ball_mask(grid, ball)
    nodes = np.argwhere(mask)
    if len(nodes) < 2:
        raise BallTooSmallError(f"ball {ball} holds fewer than two nodes.")
    # Unwrap node positions around the center so pairs never straddle the seam.
    offset = grid.torus_offset(grid.point(nodes).T, ball.center).T
    points = np.asarray(ball.center) + offset
    values = f.values[mask]

    def denominator(i: int, tail: np.ndarray, distance: np.ndarray) -> np.ndarray:
        return distance**alpha

    best, pair = _pair_scan(points, values, denominator)
    return NormReport(best, pair, f"ball:{ball.radius:g}")


def compute_norm(f: ScalarField, space: NormSpace, p: float, phi: GrowthFunction,
                 family: BallFamily) -> NormReport:
    """Dispatch on the norm space name used by the command line."""
    if space == "campanato":
        return campanato_norm(f, p, phi, family)
    if space == "pointed":
        return pointed_campanato_norm(f, p, phi, family)
    if space == "morrey":
        return morrey_norm(f, p, phi, family)
    if space == "holder":
        return holder_norm(f, phi)
    if space == "pointed_holder":
        return pointed_holder_norm(f, phi)
    if space == "lip":
        return lip_norm_on_ball(f, phi.alpha, _anchor_ball(f.grid))
    raise ConfigError(f"Unsupported norm space: {space}")


def sigma_limit(f: ScalarField, mode: SigmaMode = "torus") -> SigmaReport:
    """sigma(f): the global mean on the torus, with the largest-ball averages.

    In `extrapolate` mode the value is the average over the largest
    admissible ball B(0, L - h), meant for fields decayed at the box edge.
    """
    grid = f.grid
    radii = tuple(grid.half_width - k * grid.h for k in (1, 2, 3))
    averages = tuple(ball_average(f, Ball((0.0, 0.0, 0.0), r)) for r in radii)
    spread = max(averages) - min(averages)
    converged = spread <= _SIGMA_SPREAD_TOL
    mean = f.mean()
    if mode == "torus":
        value = mean
    elif mode == "extrapolate":
        value = averages[0]
        if not converged:
            logger.warning("sigma extrapolation spread %.3g exceeds %g",
                           spread, _SIGMA_SPREAD_TOL)
    else:
        raise ConfigError(f"Unsupported sigma mode: {mode}")
    return SigmaReport(value, mean, radii, averages, spread, converged, mode)


def _is_constant(f: ScalarField) -> bool:
    values = f.values
    return float(np.ptp(values)) <= 1e-14 * max(1.0, float(np.max(np.abs(values))))


def equivalence_harness(fields: Sequence[ScalarField], p1: float, p2: float,
                        phi: GrowthFunction, family: BallFamily,
                        conditions: ConditionReport | None = None
                        ) -> EquivalenceTable:
    """Ratio table of the norm equivalences of the Campanato-type spaces.

    For each non-constant field it records
    ||f||_(p1,phi) / ||f||_(p2,phi); ||f||_(p1,phi) / ||f||_Holder(phi) when
    the lower Dini condition holds; and ||f||_(p1,phi) /
    ||f - sigma(f)||_Morrey(p1,phi) when the upper Dini condition holds.

    Raises:
        PrerequisiteError: If phi fails doubling, nearness or almost-increase.
    """
    conditions = conditions if conditions is not None else check_conditions(phi)
    failed = conditions.failed()
    if failed:
        raise PrerequisiteError(
            f"growth function fails required conditions: {', '.join(failed)}"
        )

    rows = []
    skipped = 0
    for index, f in enumerate(fields):
        if _is_constant(f):
            skipped += 1
            continue
        first = campanato_norm(f, p1, phi, family).value
        second = campanato_norm(f, p2, phi, family).value
        holder = morrey = None
        if conditions.dini_lower_constant is not None:
            holder = first / holder_norm(f, phi).value
        if conditions.dini_upper_constant is not None:
            centred = f + (-sigma_limit(f).value)
            morrey = first / morrey_norm(centred, p1, phi, family).value
        rows.append(EquivalenceRow(index, first / second, holder, morrey))
    return EquivalenceTable(tuple(rows), conditions, skipped)


def origin_constant(f: ScalarField, p: float, alpha: float,
                    family: BallFamily) -> float:
    """|f(0) - f_B(0,1)| over the Campanato seminorm with phi = r^alpha."""
    gap = abs(f.at_origin() - ball_average(f, _anchor_ball(f.grid)))
    seminorm = campanato_norm(f, p, power_alpha(alpha), family).value
    if seminorm == 0.0:
        return 0.0 if gap == 0.0 else math.inf
    return gap / seminorm


def local_lp_constant(f: ScalarField, p: float, phi: GrowthFunction,
                      family: BallFamily, ball: Ball) -> float:
    """(int_B* |f|^p)^(1/p) over the pointed Campanato norm."""
    mask = ball_mask(f.grid, ball)
    if not mask.any():
        raise DomainError(f"ball {ball} holds no node.")
    local = float(np.sum(np.abs(f.values[mask]) ** p) * f.grid.cell_volume) ** (1 / p)
    pointed = pointed_campanato_norm(f, p, phi, family).value
    if pointed == 0.0:
        return 0.0 if local == 0.0 else math.inf
    return local / pointed


def product_bound_table(pairs: Sequence[tuple[ScalarField, ScalarField]],
                        phi: GrowthFunction, psi: GrowthFunction,
                        family: BallFamily, p1: float = 4.0, p2: float = 2.0,
                        p4: float = 4.0) -> BoundTable:
    """||fg||_(p2,psi) / (||f||_(p1,phi) ||g||_(p4,phi)) with pointed norms."""
    ratios = []
    for f, g in pairs:
        top = pointed_campanato_norm(f * g, p2, psi, family).value
        bottom = (pointed_campanato_norm(f, p1, phi, family).value
                  * pointed_campanato_norm(g, p4, phi, family).value)
        if bottom > 0:
            ratios.append(top / bottom)
    if not ratios:
        raise ConfigError("product bound needs at least one non-trivial pair.")
    return BoundTable(tuple(ratios))
