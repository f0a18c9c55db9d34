from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import integrate

from nlc_monitor.core.errors import (
    ConfigError,
    DomainError,
    FrameError,
    NlcError,
    exit_code,
)
from nlc_monitor.core.frame import (
    Decomposition,
    MaxPoint,
    ResampleMethod,
    build_frame,
    find_max_points,
    infimize_nlc,
    to_frame,
)
from nlc_monitor.core.grid import (
    ScalarField,
    VectorField3,
    curl,
    derivative,
    laplacian,
)
from nlc_monitor.core.harmonic import riesz_pair
from nlc_monitor.core.norms import NormReport, VSpace
from nlc_monitor.core.snapshot import Snapshot, check_times, read_snapshot

__all__ = [
    "NlcConfig",
    "FunctionalTerms",
    "PressureTerms",
    "LemmaChecks",
    "SigmaBook",
    "NlcReport",
    "SnapshotFailure",
    "MonitorResult",
    "functional_terms",
    "nlc_functional",
    "threshold",
    "required_constant",
    "pressure_derivative_origin",
    "lemma_checks",
    "sigma_book",
    "riesz_product_constant",
    "bkm_integrand",
    "accumulate",
    "bkm_accumulate",
    "l2linf_accumulate",
    "decay_check",
    "monitor_snapshot",
    "monitor_run",
]

logger = logging.getLogger(__name__)

# u3 * Delta_h u3 at a discrete maximum may exceed 0 by this much (times h |u|^2).
_LEMMA_SLACK = 1e-3

# sigma values above this multiple of the product scale are flagged.
_SIGMA_TOL = 1e-10


@dataclass(frozen=True)
class NlcConfig:
    """Parameters of the no-local-collapsing criterion.

    Attributes:
        vspace: The V space measuring U, r and their y3-derivatives.
        c: Threshold constant C > 0.
        alpha: Threshold exponent, alpha < 2.
        t_blowup: Candidate blowup time T; every monitored t must be below it.
        radii: Window radii tried in addition to the plain parity projection.
        decay_radius: R of the decay check; None uses L/2.
        tie_tol: Relative tie tolerance of maximum points.
        method: Resampling method of the frame change.
    """

    vspace: VSpace = field(default_factory=VSpace)
    c: float = 1.0
    alpha: float = 0.5
    t_blowup: float = 2.0
    radii: tuple[float, ...] = ()
    decay_radius: float | None = None
    tie_tol: float = 1e-9
    method: ResampleMethod = "spectral"

    def __post_init__(self) -> None:
        if not self.c > 0:
            raise ConfigError(f"c must be positive (got c={self.c}).")
        if not self.alpha < 2:
            raise ConfigError(
                f"alpha must satisfy alpha < 2 (got alpha={self.alpha})."
            )
        if not math.isfinite(self.t_blowup):
            raise ConfigError("t_blowup must be finite.")
        if any(not r > 0 for r in self.radii):
            raise ConfigError("window radii must be positive.")
        object.__setattr__(self, "radii", tuple(float(r) for r in self.radii))


@dataclass(frozen=True)
class FunctionalTerms:
    """The twelve norms behind the functional, per component i = 1..3.

    a = ||r_i||_V, b = ||d3 r_i||_V, c = ||U_i||_V, d = ||d3 U_i||_V.
    """

    a: tuple[NormReport, ...]
    b: tuple[NormReport, ...]
    c: tuple[NormReport, ...]
    d: tuple[NormReport, ...]

    def total(self) -> float:
        """sum_ij ||d3 r_i|| ||U_j|| + ||r_i|| ||d3 U_j|| + ||r_i|| ||d3 r_j||."""
        a, b, c, d = (
            sum(n.value for n in terms) for terms in (self.a, self.b, self.c, self.d)
        )
        return b * c + a * d + a * b


@dataclass(frozen=True)
class PressureTerms:
    """d3 of sum_ij R_i R_j (f_i g_j) at y = 0 for the three bilinear splits.

    Attributes:
        via_full: From u_i u_j.
        via_remainder: From r_i U_j + U_i r_j + r_i r_j.
        symmetric_part: From U_i U_j; vanishes for an exact symmetric flow.
        scale: max_ij ||U_i U_j||_inf / h, the natural size of symmetric_part.
    """

    via_full: float
    via_remainder: float
    symmetric_part: float
    scale: float

    @property
    def identity_defect(self) -> float:
        return abs(self.via_full - (self.via_remainder + self.symmetric_part))


@dataclass(frozen=True)
class LemmaChecks:
    """The two maximum-point inequalities.

    Attributes:
        v_grad_p: u3(0) d3 p(0), the surrogate of v . grad p at x_M.
        v_laplacian_v: v . Delta_h v at x_M (seven-point Laplacian).
        tolerance: Allowed positive slack 1e-3 h |v(x_M)|^2.
    """

    v_grad_p: float
    v_laplacian_v: float
    tolerance: float

    @property
    def laplacian_ok(self) -> bool:
        return self.v_laplacian_v <= self.tolerance


@dataclass(frozen=True)
class SigmaBook:
    """Largest |sigma| of the products d3r_i U_j, r_i d3U_j and r_i d3r_j."""

    d3r_u: float
    r_d3u: float
    r_d3r: float
    scale: float

    @property
    def flagged(self) -> bool:
        worst = max(self.d3r_u, self.r_d3u, self.r_d3r)
        return worst > _SIGMA_TOL * max(self.scale, 1.0)


@dataclass(frozen=True)
class NlcReport:
    t: float
    functional: float
    threshold: float
    u3_origin: float
    pressure: PressureTerms
    lemma: LemmaChecks
    bkm: float
    linf_speed: float
    decay_constant: float
    sigma: SigmaBook
    window: str

    @property
    def satisfied(self) -> bool:
        return self.functional <= self.threshold


@dataclass(frozen=True)
class SnapshotFailure:
    path: str
    stage: str
    message: str
    code: int = 2


@dataclass(frozen=True)
class MonitorResult:
    """Reports in time order plus the per-snapshot failures.

    `satisfied` is True when every monitored snapshot has
    functional <= threshold. Failed snapshots are counted, not judged.
    `c_required` is the smallest threshold constant C that the whole series
    satisfies.
    """

    reports: tuple[NlcReport, ...]
    failures: tuple[SnapshotFailure, ...]
    bkm_integral: float
    l2linf_integral: float
    c_required: float = 0.0

    @property
    def satisfied(self) -> bool:
        return bool(self.reports) and all(r.satisfied for r in self.reports)


def _d3(f: ScalarField) -> ScalarField:
    return derivative(f, 2)


def functional_terms(dec: Decomposition, vspace: VSpace) -> FunctionalTerms:
    rs = [dec.r.component(i) for i in range(3)]
    us = [dec.U.component(i) for i in range(3)]
    return FunctionalTerms(
        a=tuple(vspace.norm(r) for r in rs),
        b=tuple(vspace.norm(_d3(r)) for r in rs),
        c=tuple(vspace.norm(u) for u in us),
        d=tuple(vspace.norm(_d3(u)) for u in us),
    )


def nlc_functional(dec: Decomposition, vspace: VSpace) -> float:
    """The collapsing functional of a decomposition.

    Every term carries a factor of r, so r = 0 short-circuits to 0.
    """
    if not np.any(dec.r.values):
        return 0.0
    return functional_terms(dec, vspace).total()


def threshold(cfg: NlcConfig, t: float, u3_origin: float) -> float:
    """C (T - t)^(-alpha) / u3(0, t).

    Raises:
        DomainError: If t >= T or u3(0, t) <= 0.
    """
    if not t < cfg.t_blowup:
        raise DomainError(f"t must be below T (got t={t}, T={cfg.t_blowup}).")
    if not u3_origin > 0:
        raise DomainError(f"u3(0, t) must be positive (got {u3_origin}).")
    return cfg.c * (cfg.t_blowup - t) ** (-cfg.alpha) / u3_origin


def required_constant(cfg: NlcConfig, t: float, u3_origin: float,
                      functional: float) -> float:
    """Smallest C for which functional <= threshold at this snapshot.

    functional u3(0, t) (T - t)^alpha.
    """
    if not t < cfg.t_blowup:
        raise DomainError(f"t must be below T (got t={t}, T={cfg.t_blowup}).")
    return functional * u3_origin * (cfg.t_blowup - t) ** cfg.alpha


def _axial_pressure(f: np.ndarray, g: np.ndarray, grid) -> float:
    """d3 sum_ij R_i R_j (f_i g_j) at the origin node."""
    total = np.zeros(grid.shape)
    for i in range(3):
        for j in range(3):
            total += riesz_pair(ScalarField(grid, f[i] * g[j]), i + 1, j + 1).values
    return _d3(ScalarField(grid, total)).at_origin()


def pressure_derivative_origin(dec: Decomposition) -> PressureTerms:
    grid = dec.U.grid
    U, r = dec.U.values, dec.r.values
    u = U + r
    full = _axial_pressure(u, u, grid)
    remainder = (
        _axial_pressure(r, U, grid)
        + _axial_pressure(U, r, grid)
        + _axial_pressure(r, r, grid)
    )
    symmetric = _axial_pressure(U, U, grid)
    products = np.abs(U[:, None] * U[None, :])
    scale = float(np.max(products)) / grid.h
    return PressureTerms(full, remainder, symmetric, scale)


def lemma_checks(v: VectorField3, point: MaxPoint, pressure: PressureTerms,
                 tie_tol: float = 1e-9) -> LemmaChecks:
    """Evaluate v . grad p and v . Delta_h v at the maximum point.

    v . Delta_h v is taken on the original grid, where it is invariant under
    the frame rotation and non-positive at a discrete maximum of |v|.

    Raises:
        FrameError: If the point is not a maximum of |v| within tie_tol.
    """
    speed = v.speed()
    if speed[point.index] < (1.0 - tie_tol) * float(np.max(speed)):
        raise FrameError(f"{point.location} is not a maximum point of |v|.")
    lap = laplacian(v, method="fd").values[(slice(None),) + point.index]
    vec = v.values[(slice(None),) + point.index]
    tolerance = _LEMMA_SLACK * v.grid.h * point.speed**2
    return LemmaChecks(
        v_grad_p=point.speed * pressure.via_full,
        v_laplacian_v=float(np.dot(vec, lap)),
        tolerance=tolerance,
    )


def sigma_book(dec: Decomposition) -> SigmaBook:
    """Means (torus sigma) of the products entering the Riesz step."""
    U, r = dec.U.values, dec.r.values
    d3U = np.stack([_d3(dec.U.component(i)).values for i in range(3)])
    d3r = np.stack([_d3(dec.r.component(i)).values for i in range(3)])

    def worst(f: np.ndarray, g: np.ndarray) -> float:
        means = np.mean(f[:, None] * g[None, :], axis=(2, 3, 4))
        return float(np.max(np.abs(means)))

    size = float(np.max(np.abs(U)) + np.max(np.abs(r)))
    slope = float(np.max(np.abs(d3U)) + np.max(np.abs(d3r)))
    scale = size * slope
    return SigmaBook(worst(d3r, U), worst(r, d3U), worst(r, d3r), scale)


def riesz_product_constant(f: ScalarField, g: ScalarField, vspace: VSpace,
                           j: int = 3, k: int = 3) -> float:
    """|R_j R_k (fg)(0)| over ||f||_V ||g||_V."""
    value = abs(riesz_pair(f * g, j, k).at_origin())
    bottom = vspace.norm(f).value * vspace.norm(g).value
    if bottom == 0.0:
        return 0.0 if value == 0.0 else math.inf
    return value / bottom


def bkm_integrand(v: VectorField3) -> float:
    """max over nodes of |curl v| (spectral curl)."""
    return float(np.max(curl(v).speed()))


def accumulate(times: Sequence[float], values: Sequence[float]) -> float:
    """Trapezoidal integral of a sampled series.

    Raises:
        SeriesError: If the time stamps do not increase strictly.
    """
    check_times(list(times))
    if len(times) != len(values):
        raise ConfigError("times and values must have the same length.")
    if len(times) < 2:
        return 0.0
    return float(integrate.trapezoid(np.asarray(values), np.asarray(times)))


def bkm_accumulate(times: Sequence[float], bkm: Sequence[float]) -> float:
    """int ||curl v||_inf dt."""
    return accumulate(times, bkm)


def l2linf_accumulate(times: Sequence[float], speeds: Sequence[float]) -> float:
    """int ||v||_inf^2 dt."""
    return accumulate(times, [s**2 for s in speeds])


def decay_check(v: VectorField3, radius: float) -> float:
    """sup over nodes with |x| > R of |x| |v(x)|.

    Raises:
        DomainError: If R >= L, or no node lies beyond R.
    """
    grid = v.grid
    if not 0 <= radius < grid.half_width:
        raise DomainError(
            f"decay radius must lie in [0, L) (got {radius}, L={grid.half_width})."
        )
    distance = np.sqrt(np.sum(grid.mesh() ** 2, axis=0))
    outside = distance > radius
    if not outside.any():
        raise DomainError(f"no grid node lies beyond R={radius}.")
    return float(np.max(distance[outside] * v.speed()[outside]))


def monitor_snapshot(snapshot: Snapshot, cfg: NlcConfig) -> NlcReport:
    """Run the whole criterion pipeline on one snapshot."""
    v, t = snapshot.field, snapshot.t
    point = find_max_points(v, cfg.tie_tol, t)[0]
    framed = to_frame(v, build_frame(v, point), point, cfg.method)
    best = infimize_nlc(framed, cfg.vspace, cfg.radii)
    u3 = float(framed.u.at_origin()[2])
    pressure = pressure_derivative_origin(best.decomposition)
    radius = cfg.decay_radius
    if radius is None:
        radius = v.grid.half_width / 2
    report = NlcReport(
        t=t,
        functional=best.functional,
        threshold=threshold(cfg, t, u3),
        u3_origin=u3,
        pressure=pressure,
        lemma=lemma_checks(v, point, pressure, cfg.tie_tol),
        bkm=bkm_integrand(v),
        linf_speed=point.speed,
        decay_constant=decay_check(v, radius),
        sigma=sigma_book(best.decomposition),
        window=best.decomposition.label,
    )
    logger.info("t=%.6g functional=%.6g threshold=%.6g", t, report.functional,
                report.threshold)
    return report


def _monitor_path(path: Path, cfg: NlcConfig) -> NlcReport | SnapshotFailure:
    try:
        return monitor_snapshot(read_snapshot(path), cfg)
    except NlcError as e:
        logger.warning("%s: %s", path.name, e)
        return SnapshotFailure(str(path), e.stage, str(e), exit_code(e))


def monitor_run(paths: Sequence[Path], cfg: NlcConfig,
                workers: int = 1) -> MonitorResult:
    """Monitor every snapshot of a series.

    Snapshots are processed independently (in parallel when workers > 1) and
    reported in input order. A snapshot that fails is recorded and the run
    continues.

    Raises:
        SeriesError: If the surviving time stamps do not increase strictly.
    """
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        outcomes = list(pool.map(lambda path: _monitor_path(path, cfg), paths))
    reports = tuple(o for o in outcomes if isinstance(o, NlcReport))
    failures = tuple(o for o in outcomes if isinstance(o, SnapshotFailure))

    times = [r.t for r in reports]
    check_times(times)
    bkm = bkm_accumulate(times, [r.bkm for r in reports])
    l2 = l2linf_accumulate(times, [r.linf_speed for r in reports])
    needed = max((required_constant(cfg, r.t, r.u3_origin, r.functional)
                  for r in reports), default=0.0)
    return MonitorResult(reports, failures, bkm, l2, needed)
