from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np
from scipy import integrate, special

from nlc_monitor.core.errors import ConfigError, DivergenceError, DomainError

__all__ = [
    "GrowthKind",
    "GrowthFunction",
    "SampleFamily",
    "ConditionConstant",
    "ConditionReport",
    "make_phi",
    "make_psi",
    "constant_one",
    "power_alpha",
    "morrey_critical",
    "custom_growth",
    "evaluate",
    "growth_on_ball",
    "default_family",
    "DEFAULT_DOUBLING_BOUND",
    "check_doubling",
    "check_nearness",
    "check_almost_increasing",
    "check_conditions",
    "dini_lower",
    "dini_upper",
    "kappa_condition",
    "phi_star",
    "phi_star_star",
    "psi_from_phi",
    "compare_growth",
    "growth_to_dict",
    "growth_from_dict",
    "load_growth",
    "save_growth",
]

logger = logging.getLogger(__name__)

# Kinds of variable growth functions.
# - phi / psi: the piecewise powers of the specific V and W spaces
# - one: phi = 1 (BMO)
# - power: phi = r^alpha (Lipschitz / Campanato of order alpha)
# - morrey: phi(B) = |B|^(-1/p), which turns the Morrey norm into the L^p norm
# - custom: any positive evaluator; integrals fall back to quadrature
GrowthKind = Literal["phi", "psi", "one", "power", "morrey", "custom"]

Evaluator = Callable[[np.ndarray, np.ndarray], np.ndarray]

# phi and psi switch branches at |x| = 2 and r = 2.
_BRANCH = 2.0

# Doubling constant of the default phi and psi. Inside one branch the ratio is
# at most 2^0.75; r just below the r = 2 switch paired with s = 2r gives
# 2^alpha / 4^beta = 2^(alpha - 2 beta) = 4.
DEFAULT_DOUBLING_BOUND = 4.0

# Relative tolerance of the Custom quadrature path.
_QUAD_EPSREL = 1e-10


@dataclass(frozen=True)
class GrowthFunction:
    """A variable growth function phi(x, r) on R^n.

    Instances are immutable and cheap to pass around; evaluate them through
    `evaluate` (or by calling the instance) so the domain checks apply.

    Attributes:
        kind: Which family the function belongs to.
        n: Dimension of the underlying space.
        p: Integrability exponent. Used by `phi`, `psi` and `morrey`.
        alpha: Exponent for small balls near the origin (`phi`, `psi`) or the
            single exponent of `power`.
        alpha_tilde: Exponent for small balls far from the origin.
        beta: Exponent for large balls.
        delta: Small-ball exponent far from the origin for `psi`
            (always 2 * alpha_tilde when built by `make_psi`).
        critical: True when built with the borderline beta = 2 * alpha_tilde
            = -2n/p reading.
        evaluator: Vectorised evaluator for `custom` kinds.
    """

    kind: GrowthKind
    n: int = 3
    p: float = 4.0
    alpha: float = 0.5
    alpha_tilde: float = -0.75
    beta: float = -0.75
    delta: float | None = None
    critical: bool = False
    evaluator: Evaluator | None = field(default=None, compare=False, repr=False)

    def __call__(self, x: np.ndarray | tuple[float, ...], r: float | np.ndarray):
        return evaluate(self, x, r)


@dataclass(frozen=True, eq=False)
class SampleFamily:
    """A finite family of centers and radii standing in for "all x, all r".

    Attributes:
        centers: Array of shape (M, n).
        radii: Array of shape (K,), strictly positive.
    """

    centers: np.ndarray
    radii: np.ndarray

    def __post_init__(self) -> None:
        centers = np.atleast_2d(np.asarray(self.centers, dtype=float))
        radii = np.atleast_1d(np.asarray(self.radii, dtype=float))
        if centers.size == 0 or radii.size == 0:
            raise ConfigError("sample family must contain centers and radii.")
        if np.any(~(radii > 0)):
            raise ConfigError("sample radii must be positive.")
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "radii", radii)

    @property
    def size(self) -> int:
        return self.centers.shape[0] * self.radii.shape[0]


@dataclass(frozen=True)
class ConditionConstant:
    """Empirical constant of one growth condition.

    Attributes:
        holds: True when the constant is finite over the whole family.
        constant: Maximum observed ratio (at least 1).
    """

    holds: bool
    constant: float


@dataclass(frozen=True)
class ConditionReport:
    """All structural conditions of a growth function over one sample family."""

    doubling: ConditionConstant
    nearness: ConditionConstant
    almost_increasing: ConditionConstant
    dini_lower_constant: float | None
    dini_upper_constant: float | None
    sample_count: int

    def failed(self) -> list[str]:
        """Names of the conditions that do not hold."""
        names = []
        if not self.doubling.holds:
            names.append("doubling")
        if not self.nearness.holds:
            names.append("nearness")
        if not self.almost_increasing.holds:
            names.append("almost_increasing")
        return names


def _check_piecewise(n: int, p: float, alpha: float, alpha_tilde: float,
                     beta: float, critical: bool) -> None:
    if not isinstance(n, int) or n <= 0:
        raise ConfigError("n must be a positive integer.")
    if not p > 2:
        raise ConfigError(f"p must satisfy p > 2 (got p={p}).")
    if not 0 < alpha < 1:
        raise ConfigError(f"alpha must satisfy 0 < alpha < 1 (got alpha={alpha}).")
    floor = -n / p
    if not floor <= alpha_tilde < 0:
        raise ConfigError(
            f"alpha_tilde must satisfy -n/p <= alpha_tilde < 0 "
            f"(got alpha_tilde={alpha_tilde}, -n/p={floor})."
        )
    if critical:
        if not (math.isclose(alpha_tilde, floor, rel_tol=1e-12)
                and math.isclose(beta, 2 * floor, rel_tol=1e-12)):
            raise ConfigError(
                "the critical variant requires beta = 2*alpha_tilde = -2n/p "
                f"(got alpha_tilde={alpha_tilde}, beta={beta}, -n/p={floor})."
            )
        return
    if not floor <= beta < 0:
        raise ConfigError(
            f"beta must satisfy -n/p <= beta < 0 (got beta={beta}, -n/p={floor})."
        )


def make_phi(n: int = 3, p: float = 4.0, alpha: float = 0.5,
             alpha_tilde: float = -0.75, beta: float = -0.75, *,
             critical: bool = False) -> GrowthFunction:
    """Build the piecewise-power phi of the specific V space.

    phi(x, r) is r^alpha for |x| <= 2, r <= 2; r^alpha_tilde for |x| > 2,
    r <= 2; and r^beta whenever r > 2.

    Raises:
        ConfigError: If a parameter leaves its admissible range. The message
            names the violated constraint.
    """
    _check_piecewise(n, p, alpha, alpha_tilde, beta, critical)
    return GrowthFunction("phi", n, float(p), float(alpha), float(alpha_tilde),
                          float(beta), None, critical)


def make_psi(n: int = 3, p: float = 4.0, alpha: float = 0.5,
             alpha_tilde: float = -0.75, beta: float = -0.75, *,
             critical: bool = False) -> GrowthFunction:
    """Build psi: identical to phi except r^(2 alpha_tilde) for |x| > 2, r <= 2."""
    _check_piecewise(n, p, alpha, alpha_tilde, beta, critical)
    return GrowthFunction("psi", n, float(p), float(alpha), float(alpha_tilde),
                          float(beta), 2.0 * alpha_tilde, critical)


def constant_one(n: int = 3) -> GrowthFunction:
    return GrowthFunction("one", n)


def power_alpha(alpha: float, n: int = 3) -> GrowthFunction:
    if not math.isfinite(alpha):
        raise ConfigError("alpha must be finite.")
    return GrowthFunction("power", n, alpha=float(alpha))


def morrey_critical(p: float, n: int = 3) -> GrowthFunction:
    if not p >= 1:
        raise ConfigError(f"p must satisfy p >= 1 (got p={p}).")
    return GrowthFunction("morrey", n, p=float(p))


def custom_growth(evaluator: Evaluator, n: int = 3) -> GrowthFunction:
    return GrowthFunction("custom", n, evaluator=evaluator)


def _unit_ball_volume(n: int) -> float:
    return math.pi ** (n / 2) / special.gamma(n / 2 + 1)


def _exponent_field(gf: GrowthFunction, radius: np.ndarray, r: np.ndarray):
    """Return (exponent, coefficient) arrays so that phi = coefficient * r**exponent."""
    if gf.kind in ("phi", "psi"):
        outer_small = gf.delta if gf.kind == "psi" else gf.alpha_tilde
        inner = radius <= _BRANCH
        small = r <= _BRANCH
        exponent = np.where(small, np.where(inner, gf.alpha, outer_small), gf.beta)
        return exponent, 1.0
    if gf.kind == "one":
        return np.zeros(np.broadcast_shapes(radius.shape, r.shape)), 1.0
    if gf.kind == "power":
        return np.full(np.broadcast_shapes(radius.shape, r.shape), gf.alpha), 1.0
    if gf.kind == "morrey":
        exponent = np.full(np.broadcast_shapes(radius.shape, r.shape), -gf.n / gf.p)
        return exponent, _unit_ball_volume(gf.n) ** (-1.0 / gf.p)
    raise ConfigError(f"Unsupported growth kind: {gf.kind}")


def evaluate(gf: GrowthFunction, x, r):
    """Evaluate phi(x, r).

    `x` has shape (..., n) and broadcasts against `r`. A scalar result is
    returned as a Python float.

    Raises:
        DomainError: If any r is not strictly positive, or x has the wrong
            trailing dimension.
    """
    r_arr = np.asarray(r, dtype=float)
    if np.any(~(r_arr > 0)):
        raise DomainError("growth functions are only defined for r > 0.")
    x_arr = np.asarray(x, dtype=float)
    if x_arr.shape[-1:] != (gf.n,):
        raise DomainError(f"points must have {gf.n} coordinates.")

    if gf.kind == "custom":
        if gf.evaluator is None:
            raise ConfigError("custom growth functions need an evaluator.")
        value = np.asarray(gf.evaluator(x_arr, r_arr), dtype=float)
    else:
        radius = np.linalg.norm(x_arr, axis=-1)
        exponent, coefficient = _exponent_field(gf, radius, r_arr)
        value = coefficient * np.power(r_arr, exponent)
    return float(value) if value.ndim == 0 else value


def growth_on_ball(
    gf: GrowthFunction, center, radius: float, measure: float
) -> float:
    """phi(B) for a ball with the given center, radius and measure |B|.

    Morrey-critical growth is defined through the ball's measure, so balls
    measured on a grid use the node measure rather than the Euclidean volume.
    """
    if gf.kind == "morrey":
        if not measure > 0:
            raise DomainError("ball measure must be positive.")
        return measure ** (-1.0 / gf.p)
    if not math.isfinite(radius):
        # A box-covering ball has no radius; use the radius of equal volume.
        radius = (measure / _unit_ball_volume(gf.n)) ** (1.0 / gf.n)
    return evaluate(gf, center, radius)


def default_family(n: int = 3) -> SampleFamily:
    """Centers on a 5^n lattice in [-4, 4]^n and 32 log-spaced radii in [2^-6, 2^6]."""
    axis = np.linspace(-4.0, 4.0, 5)
    grids = np.meshgrid(*([axis] * n), indexing="ij")
    centers = np.stack([g.ravel() for g in grids], axis=-1)
    radii = np.logspace(-6.0, 6.0, 32, base=2.0)
    return SampleFamily(centers, radii)


def _table(gf: GrowthFunction, family: SampleFamily) -> np.ndarray:
    """phi over the family as an (M, K) table."""
    return np.asarray(
        evaluate(gf, family.centers[:, None, :], family.radii[None, :]), dtype=float
    )


def _constant(ratios: np.ndarray) -> ConditionConstant:
    value = max(1.0, float(np.max(ratios))) if ratios.size else 1.0
    return ConditionConstant(holds=math.isfinite(value), constant=value)


def check_doubling(gf: GrowthFunction, family: SampleFamily) -> ConditionConstant:
    """A1 = max of phi(x,s)/phi(x,r) over sampled pairs with 1/2 <= s/r <= 2."""
    values = _table(gf, family)
    quotient = family.radii[None, :] / family.radii[:, None]
    pairs = (quotient >= 0.5) & (quotient <= 2.0)
    ratios = values[:, :, None] / values[:, None, :]
    return _constant(ratios[:, pairs])


def check_nearness(gf: GrowthFunction, family: SampleFamily) -> ConditionConstant:
    """A2 = max of phi(x,r)/phi(y,r) over sampled centers with |x - y| <= r."""
    values = _table(gf, family)
    centers = family.centers
    distance = np.linalg.norm(centers[:, None, :] - centers[None, :, :], axis=-1)
    near = distance[:, :, None] <= family.radii[None, None, :]
    ratios = values[:, None, :] / values[None, :, :]
    return _constant(ratios[near])


def check_almost_increasing(gf: GrowthFunction,
                            family: SampleFamily) -> ConditionConstant:
    """A3 = max of phi(x,r)/phi(x,s) over sampled radii 0 < r < s."""
    values = _table(gf, family)
    ordered = family.radii[:, None] < family.radii[None, :]
    ratios = values[:, :, None] / values[:, None, :]
    return _constant(ratios[:, ordered])


Segment = tuple[float, float, float, float]


def _segments(gf: GrowthFunction, radius: float) -> list[Segment]:
    """Profile t -> phi(x, t) as (start, stop, exponent, coefficient) pieces."""
    if gf.kind in ("phi", "psi"):
        if radius <= _BRANCH:
            small = gf.alpha
        else:
            small = gf.delta if gf.kind == "psi" else gf.alpha_tilde
        return [(0.0, _BRANCH, small, 1.0), (_BRANCH, math.inf, gf.beta, 1.0)]
    if gf.kind == "one":
        return [(0.0, math.inf, 0.0, 1.0)]
    if gf.kind == "power":
        return [(0.0, math.inf, gf.alpha, 1.0)]
    if gf.kind == "morrey":
        coefficient = _unit_ball_volume(gf.n) ** (-1.0 / gf.p)
        return [(0.0, math.inf, -gf.n / gf.p, coefficient)]
    raise ConfigError(f"Unsupported growth kind: {gf.kind}")


def _monomial(a: float, b: float, s: float) -> float:
    """Integral of t^(s-1) over [a, b], closed form."""
    if s == 0.0:
        if a == 0.0 or math.isinf(b):
            raise DivergenceError("integral of dt/t diverges.")
        return math.log(b / a)
    if a == 0.0 and s < 0:
        raise DivergenceError(f"integral of t^{s - 1:g} diverges at 0.")
    if math.isinf(b):
        if s > 0:
            raise DivergenceError(f"integral of t^{s - 1:g} diverges at infinity.")
        return -(a**s) / s
    return (b**s - a**s) / s


def _integrate(gf: GrowthFunction, x, lower: float, upper: float,
               weight: float = -1.0) -> float:
    """Integral of phi(x, t) * t^weight over [lower, upper]."""
    if upper <= lower:
        return 0.0
    x_arr = np.asarray(x, dtype=float)
    if gf.kind == "custom":
        return _quad(gf, x_arr, lower, upper, weight)

    radius = float(np.linalg.norm(x_arr))
    total = 0.0
    for start, stop, exponent, coefficient in _segments(gf, radius):
        a, b = max(lower, start), min(upper, stop)
        if b <= a:
            continue
        total += coefficient * _monomial(a, b, exponent + weight + 1.0)
    return total


def _quad(gf: GrowthFunction, x: np.ndarray, lower: float, upper: float,
          weight: float) -> float:
    def integrand(t: float) -> float:
        return evaluate(gf, x, t) * t**weight

    result = integrate.quad(
        integrand, lower, upper, epsrel=_QUAD_EPSREL, limit=200, full_output=1
    )
    # quad appends a message only when it could not reach the tolerance.
    if len(result) > 3:
        raise DivergenceError(f"quadrature did not converge: {result[3]}")
    value = float(result[0])
    if not math.isfinite(value):
        raise DivergenceError("quadrature returned a non-finite value.")
    return value


def dini_lower(gf: GrowthFunction, x, r: float) -> float:
    """Integral of phi(x, t)/t over (0, r].

    Raises:
        DomainError: If r <= 0.
        DivergenceError: If the integral diverges at 0 for this kind.
    """
    if not r > 0:
        raise DomainError("r must be positive.")
    return _integrate(gf, x, 0.0, r)


def dini_upper(gf: GrowthFunction, x, r: float) -> float:
    """Integral of phi(x, t)/t over [r, infinity)."""
    if not r > 0:
        raise DomainError("r must be positive.")
    return _integrate(gf, x, r, math.inf)


def phi_star(gf: GrowthFunction, x, r: float) -> float:
    """Integral of phi(0, t)/t from 1 to max(2, |x|, r)."""
    if not r > 0:
        raise DomainError("r must be positive.")
    top = max(_BRANCH, float(np.linalg.norm(x)), r)
    return _integrate(gf, np.zeros(gf.n), 1.0, top)


def phi_star_star(gf: GrowthFunction, x, r: float) -> float:
    """Integral of phi(x, t)/t from r to max(2, |x|, r); zero on an empty range."""
    if not r > 0:
        raise DomainError("r must be positive.")
    top = max(_BRANCH, float(np.linalg.norm(x)), r)
    return _integrate(gf, x, r, top)


def _pointwise(x, r, fn: Callable[[np.ndarray, float], float]) -> np.ndarray:
    x_arr = np.asarray(x, dtype=float)
    r_arr = np.asarray(r, dtype=float)
    shape = np.broadcast_shapes(x_arr.shape[:-1], r_arr.shape)
    points = np.broadcast_to(x_arr, shape + x_arr.shape[-1:]).reshape(
        -1, x_arr.shape[-1]
    )
    radii = np.broadcast_to(r_arr, shape).reshape(-1)
    values = [fn(point, float(radius)) for point, radius in zip(points, radii)]
    return np.asarray(values, dtype=float).reshape(shape)


def psi_from_phi(gf: GrowthFunction) -> GrowthFunction:
    """The product phi * (Phi* + Phi**) as a custom growth function."""
    if gf.kind != "phi":
        raise ConfigError("psi_from_phi needs a piecewise-power phi.")

    def product(x: np.ndarray, r: np.ndarray) -> np.ndarray:
        return _pointwise(
            x, r,
            lambda point, radius: evaluate(gf, point, radius)
            * (phi_star(gf, point, radius) + phi_star_star(gf, point, radius)),
        )

    return custom_growth(product, n=gf.n)


def compare_growth(a: GrowthFunction, b: GrowthFunction,
                   family: SampleFamily) -> tuple[float, float]:
    """Min and max of a/b over the family."""
    ratio = _table(a, family) / _table(b, family)
    return float(np.min(ratio)), float(np.max(ratio))


def _dini_constant(gf: GrowthFunction, family: SampleFamily,
                   integral: Callable[[GrowthFunction, np.ndarray, float], float]
                   ) -> float | None:
    values = _table(gf, family)
    worst = 0.0
    try:
        for m, center in enumerate(family.centers):
            for k, radius in enumerate(family.radii):
                worst = max(worst, integral(gf, center, float(radius)) / values[m, k])
    except DivergenceError:
        return None
    return worst


def kappa_condition(phi: GrowthFunction, psi: GrowthFunction, family: SampleFamily,
                    kappa: float = 1.0) -> float:
    """Empirical A in r^kappa * int_r^inf phi(x,t)/t^(1+kappa) dt <= A psi(x,r)."""
    if not 0 < kappa <= 1:
        raise ConfigError(f"kappa must satisfy 0 < kappa <= 1 (got {kappa}).")
    psi_values = _table(psi, family)
    worst = 0.0
    for m, center in enumerate(family.centers):
        for k, radius in enumerate(family.radii):
            tail = _integrate(phi, center, float(radius), math.inf, -1.0 - kappa)
            worst = max(worst, radius**kappa * tail / psi_values[m, k])
    return worst


def check_conditions(gf: GrowthFunction, family: SampleFamily | None = None
                     ) -> ConditionReport:
    """Run every structural check over one family and collect the constants."""
    family = family if family is not None else default_family(gf.n)
    report = ConditionReport(
        doubling=check_doubling(gf, family),
        nearness=check_nearness(gf, family),
        almost_increasing=check_almost_increasing(gf, family),
        dini_lower_constant=_dini_constant(gf, family, dini_lower),
        dini_upper_constant=_dini_constant(gf, family, dini_upper),
        sample_count=family.size,
    )
    logger.debug("conditions for %s: %s", gf.kind, report)
    return report


# Key order of the growth TOML file; kept fixed so files diff cleanly.
_KEYS = ("kind", "n", "p", "alpha", "alpha_tilde", "beta", "delta", "critical")


def growth_to_dict(gf: GrowthFunction) -> dict[str, object]:
    if gf.kind == "custom":
        raise ConfigError("custom growth functions cannot be serialized.")
    data: dict[str, object] = {
        "kind": gf.kind,
        "n": gf.n,
        "p": gf.p,
        "alpha": gf.alpha,
        "alpha_tilde": gf.alpha_tilde,
        "beta": gf.beta,
        "critical": gf.critical,
    }
    if gf.delta is not None:
        data["delta"] = gf.delta
    return data


def growth_from_dict(data: dict[str, object]) -> GrowthFunction:
    """Rebuild a growth function, re-running the constructor's validation."""
    unknown = set(data) - set(_KEYS)
    if unknown:
        raise ConfigError(f"Unknown growth keys: {', '.join(sorted(unknown))}")
    kind = data.get("kind")
    n = data.get("n", 3)
    if not isinstance(n, int):
        raise ConfigError("n must be an integer.")
    try:
        p = float(data.get("p", 4.0))
        alpha = float(data.get("alpha", 0.5))
        alpha_tilde = float(data.get("alpha_tilde", -0.75))
        beta = float(data.get("beta", -0.75))
    except (TypeError, ValueError) as e:
        raise ConfigError(f"growth parameters must be numbers: {e}") from e
    critical = bool(data.get("critical", False))

    if kind == "phi":
        return make_phi(n, p, alpha, alpha_tilde, beta, critical=critical)
    if kind == "psi":
        gf = make_psi(n, p, alpha, alpha_tilde, beta, critical=critical)
        delta = data.get("delta")
        if delta is not None and not math.isclose(float(delta), gf.delta):
            raise ConfigError("delta must equal 2 * alpha_tilde for psi.")
        return gf
    if kind == "one":
        return constant_one(n)
    if kind == "power":
        return power_alpha(alpha, n)
    if kind == "morrey":
        return morrey_critical(p, n)
    raise ConfigError(f"Unsupported growth kind: {kind}")


def load_growth(path: Path) -> GrowthFunction:
    """Load a growth function from a TOML file."""
    if not path.exists():
        raise ConfigError(f"growth file not found: {path}")

    try:
        import tomllib  # Python 3.11+
    except ModuleNotFoundError:  # Python 3.10
        import tomli as tomllib

    try:
        data = tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"invalid growth file {path}: {e}") from e
    return growth_from_dict(data)


def save_growth(path: Path, gf: GrowthFunction) -> Path:
    """Write a growth function as TOML in a fixed key order."""
    data = growth_to_dict(gf)
    lines = []
    for key in _KEYS:
        if key not in data:
            continue
        value = data[key]
        if isinstance(value, bool):
            lines.append(f"{key} = {'true' if value else 'false'}")
        elif isinstance(value, str):
            lines.append(f'{key} = "{value}"')
        else:
            lines.append(f"{key} = {value!r}")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
