from __future__ import annotations

import csv
import math
import sys
from collections.abc import Callable
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, TextIO

import numpy as np
from scipy import integrate

from nlc_monitor.core.errors import (
    ConfigError,
    NlcError,
    NumericalError,
    error_line,
    exit_code,
)
from nlc_monitor.core.frame import symmetrize
from nlc_monitor.core.grid import (
    BallFamily,
    Grid3,
    ScalarField,
    VectorField3,
    reflect_y3,
)
from nlc_monitor.core.growth import (
    DEFAULT_DOUBLING_BOUND,
    check_conditions,
    default_family,
    evaluate,
    make_phi,
    make_psi,
    morrey_critical,
    phi_star,
    phi_star_star,
)
from nlc_monitor.core.harmonic import (
    imag_residue,
    modified_riesz,
    parity_check,
    riesz,
    riesz_boundedness_table,
    riesz_op,
    riesz_truncated,
)
from nlc_monitor.core.nlc import nlc_functional, pressure_derivative_origin
from nlc_monitor.core.norms import (
    VSpace,
    campanato_norm,
    morrey_norm,
    product_bound_table,
)
from nlc_monitor.solver.initial import Beltrami, RandomBandLimited, TaylorGreen
from nlc_monitor.solver.spectral import (
    SpectralState,
    energy,
    max_divergence,
    step,
)

__all__ = [
    "Target",
    "TARGETS",
    "Check",
    "VerifyOptions",
    "random_scalars",
    "random_vectors",
    "trig_scalars",
    "verify_riesz",
    "verify_norms",
    "verify_decomposition",
    "verify_pressure",
    "verify_solver",
    "verify_growth",
    "verify_bounds",
    "run_target",
    "write_checks",
    "verify_command",
]

Target = Literal[
    "riesz", "norms", "decomposition", "pressure", "solver", "growth", "bounds"
]

COLUMNS = ("check", "value", "lower", "upper", "pass")

# Physical radii of the bound tables and the allowed change of their maxima
# when the grid is refined from N to 2N.
BOUND_RADII = (1.0, 2.0)
BOUND_DRIFT = 0.2


@dataclass(frozen=True)
class Check:
    """One row of a verification table.

    A check without bounds is reported, not judged; its pass cell is empty.
    """

    name: str
    value: float
    lower: float | None = None
    upper: float | None = None

    @property
    def judged(self) -> bool:
        return self.lower is not None or self.upper is not None

    @property
    def passed(self) -> bool:
        if math.isnan(self.value):
            return not self.judged
        if self.lower is not None and self.value < self.lower:
            return False
        if self.upper is not None and self.value > self.upper:
            return False
        return True


@dataclass(frozen=True)
class VerifyOptions:
    """Sizes of a verification run.

    Attributes:
        n: Grid points per axis of the main grid.
        count: Number of random fields or pairs.
        seed: First random seed; field k uses seed + k.
    """

    n: int = 16
    count: int = 5
    seed: int = 0


def _eprint(message: str) -> None:
    """Print a message to stderr."""
    print(message, file=sys.stderr)


def _kmax(grid: Grid3) -> int:
    return min(4, grid.n // 3 - 1)


def random_vectors(grid: Grid3, count: int, seed: int) -> list[VectorField3]:
    """Divergence-free band-limited fields with max |u| = 1."""
    return [
        RandomBandLimited(seed + k, _kmax(grid)).field(grid) for k in range(count)
    ]


def random_scalars(grid: Grid3, count: int, seed: int) -> list[ScalarField]:
    """Mean-zero band-limited scalars (first components of random_vectors)."""
    return [u.component(0) for u in random_vectors(grid, count, seed)]


def trig_scalars(grid: Grid3, count: int, seed: int, modes: int = 2
                 ) -> list[ScalarField]:
    """Seeded trigonometric sums; the same functions on every grid of one box."""
    k0 = math.pi / grid.half_width
    x = grid.mesh()
    fields = []
    for k in range(count):
        rng = np.random.default_rng(seed + k)
        values = np.zeros(grid.shape)
        for _ in range(6):
            m = rng.integers(-modes, modes + 1, size=3)
            phase = rng.uniform(0.0, 2.0 * math.pi)
            amplitude = rng.standard_normal()
            values += amplitude * np.cos(k0 * np.tensordot(m, x, axes=1) + phase)
        fields.append(ScalarField(grid, values))
    return fields


def _relative(diff: np.ndarray, reference: np.ndarray) -> float:
    scale = float(np.max(np.abs(reference)))
    return float(np.max(np.abs(diff))) / max(scale, 1e-300)


def verify_riesz(options: VerifyOptions) -> list[Check]:
    grid = Grid3(max(options.n, 32), math.pi)
    x = grid.mesh()
    checks = []

    worst = 0.0
    for f in random_scalars(grid, options.count, options.seed):
        total = sum(riesz(riesz(f, j), j).values for j in (1, 2, 3))
        worst = max(worst, _relative(total + f.values, f.values))
    checks.append(Check("sum_squares_identity", worst, upper=1e-12))

    sine = ScalarField(grid, np.sin(x[0]))
    checks.append(Check(
        "r1_sine", float(np.max(np.abs(riesz(sine, 1).values + np.cos(x[0])))),
        upper=1e-12,
    ))

    one = ScalarField(grid, np.ones(grid.shape))
    constant = modified_riesz(one, 1, 2 * grid.h).field.at_origin()
    checks.append(Check("modified_constant_origin", abs(constant), upper=1e-3))

    even = ScalarField(grid, np.cos(x[2]) * np.sin(x[0] + 2 * x[1]))
    odd = ScalarField(grid, np.sin(x[2]) * np.cos(x[0]))
    for label, f in (("even", even), ("odd", odd)):
        checks.append(Check(f"parity_{label}", parity_check(f).max_defect,
                            upper=1e-12))

    residue = max(
        imag_residue(riesz_op(j), sine) for j in (1, 2, 3)
    )
    checks.append(Check("imag_residue", residue, upper=1e-12))

    bump = ScalarField(grid, np.exp(-np.sum(x**2, axis=0) / 0.25))
    spectral = riesz(bump, 1).values
    for factor in (2, 4):
        truncated = riesz_truncated(bump, 1, factor * grid.h).field.values
        checks.append(Check(f"truncated_error_{factor}h",
                            _relative(truncated - spectral, spectral)))
    return checks


def verify_norms(options: VerifyOptions) -> list[Check]:
    grid = Grid3(options.n, math.pi)
    phi = make_phi()
    p = phi.p
    fields = random_scalars(grid, options.count, options.seed)
    exhaustive = BallFamily("exhaustive", 1)
    strided = BallFamily("dyadic", 2)
    unit = BallFamily("dyadic", 1)
    covering = BallFamily("dyadic", 4, covering=True)
    critical = morrey_critical(p)

    dyadic_ratio = 0.0
    stride_one_gap = 0.0
    campanato_ratio = 0.0
    lp_gap = 0.0
    for f in fields:
        full = campanato_norm(f, p, phi, exhaustive).value
        dyadic = campanato_norm(f, p, phi, strided).value
        dyadic_ratio = max(dyadic_ratio, dyadic / full)
        stride_one_gap = max(
            stride_one_gap, abs(campanato_norm(f, p, phi, unit).value - full)
        )
        campanato_ratio = max(
            campanato_ratio, full / morrey_norm(f, p, phi, exhaustive).value
        )
        lp = float(np.sum(np.abs(f.values) ** p) * grid.cell_volume) ** (1 / p)
        lp_gap = max(lp_gap, abs(morrey_norm(f, p, critical, covering).value / lp - 1))
    return [
        Check("dyadic_over_exhaustive", dyadic_ratio, upper=1.0 + 1e-12),
        Check("stride_one_gap", stride_one_gap, upper=0.0),
        Check("campanato_over_morrey", campanato_ratio, upper=2.0),
        Check("critical_morrey_vs_lp", lp_gap, upper=0.01),
    ]


def _parity_defect(U: VectorField3) -> float:
    """U1, U2 odd and U3 even in y3."""
    mirrored = reflect_y3(U).values
    odd = np.abs(U.values[0:2] + mirrored[0:2])
    even = np.abs(U.values[2] - mirrored[2])
    return float(max(np.max(odd), np.max(even)))


def verify_decomposition(options: VerifyOptions) -> list[Check]:
    grid = Grid3(options.n, math.pi)
    vspace = VSpace(balls=BallFamily("dyadic", 4))
    rebuild = parity = idempotent = functional = 0.0
    for u in random_vectors(grid, options.count, options.seed):
        dec = symmetrize(u)
        gap = dec.U.values + dec.r.values - u.values
        rebuild = max(rebuild, float(np.max(np.abs(gap))))
        parity = max(parity, _parity_defect(dec.U))
        again = symmetrize(dec.U)
        idempotent = max(
            idempotent,
            float(np.max(np.abs(again.r.values))),
            float(np.max(np.abs(again.U.values - dec.U.values))),
        )
        functional = max(functional, nlc_functional(again, vspace))
    # One rounding of the parity halves; random fields have max |u| = 1.
    ulp = 2.0 * float(np.finfo(float).eps)
    return [
        Check("reconstruction_defect", rebuild, upper=ulp),
        Check("symmetric_parity_defect", parity, upper=0.0),
        Check("idempotence_defect", idempotent, upper=0.0),
        Check("symmetric_functional", functional, upper=0.0),
    ]


def verify_pressure(options: VerifyOptions) -> list[Check]:
    grid = Grid3(options.n, math.pi)
    cancellation = identity = 0.0
    for u in random_vectors(grid, options.count, options.seed):
        symmetric = pressure_derivative_origin(symmetrize(symmetrize(u).U))
        cancellation = max(cancellation,
                           abs(symmetric.symmetric_part) / symmetric.scale)
        terms = pressure_derivative_origin(symmetrize(u))
        size = max(abs(terms.via_full), terms.scale * grid.h)
        identity = max(identity, terms.identity_defect / size)
    return [
        Check("symmetric_cancellation", cancellation, upper=1e-10),
        Check("remainder_identity", identity, upper=1e-11),
    ]


def _integrate(state: SpectralState, dt: float, steps: int,
               on_step: Callable[[SpectralState], None] | None = None
               ) -> SpectralState:
    for _ in range(steps):
        state = step(state, dt)
        if on_step is not None:
            on_step(state)
    return state


def verify_solver(options: VerifyOptions) -> list[Check]:
    grid = Grid3(32, math.pi)
    flow = Beltrami()
    state = SpectralState.from_field(flow.field(grid))
    energies = [energy(state)]
    divergence = [max_divergence(state)]

    def record(s: SpectralState) -> None:
        energies.append(energy(s))
        divergence.append(max_divergence(s))

    state = _integrate(state, 1e-3, 100, record)
    exact = flow.exact(grid, state.t)
    error = _relative(state.to_field().values - exact.values, exact.values)
    rise = max(np.diff(energies).max(), 0.0) / energies[0]

    # Taylor-Green has a live nonlinearity; compare dt and dt/2 to dt/8.
    small = Grid3(options.n, math.pi)
    start = SpectralState.from_field(TaylorGreen().field(small))
    reference = _integrate(start, 0.0125, 80).uhat
    coarse = _integrate(start, 0.1, 10).uhat
    fine = _integrate(start, 0.05, 20).uhat
    ratio = float(np.max(np.abs(coarse - reference))
                  / np.max(np.abs(fine - reference)))
    return [
        Check("beltrami_error", error, upper=1e-6),
        Check("max_divergence", max(divergence), upper=1e-11),
        Check("energy_rise", rise, upper=1e-14),
        Check("dt_halving_ratio", ratio, lower=14.0, upper=18.0),
    ]


def _phi_star_star_quad(x: np.ndarray, r: float) -> float:
    phi = make_phi()
    top = max(2.0, float(np.linalg.norm(x)), r)
    if top <= r:
        return 0.0
    breaks = [2.0] if r < 2.0 < top else None
    value, _ = integrate.quad(lambda t: float(evaluate(phi, x, t)) / t, r, top,
                              points=breaks, epsabs=0.0, epsrel=1e-13, limit=200)
    return float(value)


def verify_growth(options: VerifyOptions) -> list[Check]:
    family = default_family()
    checks = []
    for label, gf in (("phi", make_phi()), ("psi", make_psi())):
        report = check_conditions(gf, family)
        checks.append(Check(f"{label}_doubling", report.doubling.constant,
                            upper=DEFAULT_DOUBLING_BOUND + 1e-12))
        checks.append(Check(f"{label}_nearness", report.nearness.constant))
        checks.append(Check(f"{label}_almost_increasing",
                            report.almost_increasing.constant))

    phi = make_phi()
    stars = [phi_star(phi, x, float(r)) for x in family.centers for r in family.radii]
    checks.append(Check("phi_star_spread", max(stars) / min(stars), upper=3.0))

    gap = 0.0
    rng = np.random.default_rng(options.seed)
    for _ in range(options.count * 4):
        x = rng.uniform(-4.0, 4.0, size=3)
        r = float(2.0 ** rng.uniform(-4.0, 4.0))
        closed = phi_star_star(phi, x, r)
        gap = max(gap, abs(closed - _phi_star_star_quad(x, r)) / max(1.0, closed))
    checks.append(Check("phi_star_star_closed_form", gap, upper=1e-10))
    return checks


def _bound_family(grid: Grid3) -> BallFamily:
    # Centers every pi/2 and the same physical radii on every grid. Radius 1
    # holds at least 8 nodes from N = 16 up.
    stride = max(1, grid.n // 4)
    return BallFamily("dyadic", stride, radii=BOUND_RADII)


def _bounds_at(n: int, options: VerifyOptions) -> tuple[float, float]:
    grid = Grid3(n, math.pi)
    family = _bound_family(grid)
    phi, psi = make_phi(), make_psi()
    fields = trig_scalars(grid, 2 * options.count, options.seed)
    pairs = list(zip(fields[::2], fields[1::2]))
    product = product_bound_table(pairs, phi, psi, family).maximum
    centred = [ScalarField(grid, f.values - f.mean()) for f in fields]
    boundedness = riesz_boundedness_table(centred, 1, 4.0, psi, family).maximum
    return product, boundedness


def verify_bounds(options: VerifyOptions) -> list[Check]:
    coarse = _bounds_at(options.n, options)
    fine = _bounds_at(2 * options.n, options)
    return [
        Check("product_bound_max", fine[0]),
        Check("product_bound_drift", abs(fine[0] / coarse[0] - 1.0),
              upper=BOUND_DRIFT),
        Check("riesz_bound_max", fine[1]),
        Check("riesz_bound_drift", abs(fine[1] / coarse[1] - 1.0),
              upper=BOUND_DRIFT),
    ]


TARGETS: dict[str, Callable[[VerifyOptions], list[Check]]] = {
    "riesz": verify_riesz,
    "norms": verify_norms,
    "decomposition": verify_decomposition,
    "pressure": verify_pressure,
    "solver": verify_solver,
    "growth": verify_growth,
    "bounds": verify_bounds,
}


def run_target(target: str, options: VerifyOptions) -> list[Check]:
    if target not in TARGETS:
        raise ConfigError(f"Unsupported verify target: {target}")
    return TARGETS[target](options)


def _fmt(value: float | None) -> str:
    return "" if value is None else format(value, ".17g")


def write_checks(checks: list[Check], stream: TextIO) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(COLUMNS)
    for check in checks:
        verdict = ("1" if check.passed else "0") if check.judged else ""
        writer.writerow([check.name, _fmt(check.value), _fmt(check.lower),
                         _fmt(check.upper), verdict])


def verify_command(target: str, options: VerifyOptions, out: Path | None) -> int:
    """Run one `nlc-monitor verify` target and write its table as CSV.

    Returns:
        0 when every judged check passes, 3 when one fails, 2 on bad input.
    """
    try:
        checks = run_target(target, options)
    except NlcError as e:
        _eprint(error_line(e))
        return exit_code(e)

    if out is None:
        write_checks(checks, sys.stdout)
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        with out.open("w", encoding="utf-8", newline="") as f:
            write_checks(checks, f)

    failed = [c.name for c in checks if not c.passed]
    if failed:
        error = NumericalError(f"checks failed: {', '.join(failed)}", stage="verify")
        _eprint(error_line(error))
        return exit_code(error)
    return 0
