from __future__ import annotations

import math
import os
from dataclasses import dataclass, fields, replace
from pathlib import Path

from nlc_monitor.core.errors import ConfigError
from nlc_monitor.core.grid import Grid3, parse_ball_family
from nlc_monitor.core.growth import GrowthFunction, load_growth, make_phi
from nlc_monitor.core.nlc import NlcConfig
from nlc_monitor.core.norms import VSpace
from nlc_monitor.solver.initial import InitialData, parse_init

# Explicit re-exports to make the public API of this module clear and stable.
__all__ = [
    "RunConfig",
    "load_config",
    "save_config",
    "resolve_threads",
]


# Immutable run configuration shared by every subcommand.
# Command-line flags are layered on top with `RunConfig.override`.
@dataclass(frozen=True)
class RunConfig:
    """Flat run configuration; keys and units match the TOML file.

    Attributes:
        n: Grid points per axis (power of two, at least 8).
        half_width: Box half-width L, in length units.
        dt: Solver time step, in time units.
        t_end: Final simulation time.
        snapshot_every: Time between snapshots; `inf` keeps the first and last.
        nu: Viscosity; 1 outside solver tests.
        init: Initial data, `beltrami`, `tg`, `random:<seed>` or `gaussian`.
        p: Exponent of the V space.
        c: Threshold constant C.
        alpha: Threshold exponent, below 2.
        t_blowup: Candidate blowup time T.
        radii: Window radii tried by the decomposition infimum.
        decay_radius: R of the decay check; unset means L/2.
        balls: Ball family, `exhaustive` or `dyadic:<stride>`.
        phi: Path of a growth-function TOML file; unset means the default phi.
        threads: FFT and monitor workers, `auto` or a positive integer.
    """

    n: int = 32
    half_width: float = math.pi
    dt: float = 1e-3
    t_end: float = 1.0
    snapshot_every: float = 0.1
    nu: float = 1.0
    init: str = "beltrami"
    p: float = 4.0
    c: float = 1.0
    alpha: float = 0.5
    t_blowup: float = 2.0
    radii: tuple[float, ...] = ()
    decay_radius: float | None = None
    balls: str = "dyadic:4"
    phi: str | None = None
    threads: str | int = "auto"

    def override(self, **values: object) -> RunConfig:
        """Return a copy with every non-None value replaced."""
        changes = {k: v for k, v in values.items() if v is not None}
        if "radii" in changes:
            changes["radii"] = tuple(float(r) for r in changes["radii"])
        return replace(self, **changes)

    def grid(self) -> Grid3:
        return Grid3(self.n, self.half_width)

    def initial_data(self) -> InitialData:
        return parse_init(self.init)

    def growth(self) -> GrowthFunction:
        if self.phi is None:
            return make_phi(p=self.p)
        return load_growth(Path(self.phi))

    def nlc_config(self) -> NlcConfig:
        vspace = VSpace(self.p, self.growth(), parse_ball_family(self.balls))
        return NlcConfig(
            vspace=vspace,
            c=self.c,
            alpha=self.alpha,
            t_blowup=self.t_blowup,
            radii=self.radii,
            decay_radius=self.decay_radius,
        )


def resolve_threads(value: str | int) -> int:
    """Number of workers for `auto` or an explicit positive integer."""
    if value == "auto":
        return os.cpu_count() or 1
    try:
        count = int(value)
    except (TypeError, ValueError) as e:
        raise ConfigError(
            f"threads must be 'auto' or an integer (got {value!r})."
        ) from e
    if count < 1:
        raise ConfigError(f"threads must be positive (got {count}).")
    return count


_INT_KEYS = ("n",)
_FLOAT_KEYS = (
    "half_width",
    "dt",
    "t_end",
    "snapshot_every",
    "nu",
    "p",
    "c",
    "alpha",
    "t_blowup",
    "decay_radius",
)
_STR_KEYS = ("init", "balls", "phi")


def _number(key: str, value: object) -> float:
    # bool is an int subclass; TOML true/false must not pass as numbers.
    if isinstance(value, bool) or not isinstance(value, int | float):
        raise ConfigError(f"{key} must be a number (got {value!r}).")
    return float(value)


def load_config(path: Path) -> RunConfig:
    """Load and validate a run configuration from a TOML file.

    Missing keys keep their defaults. A relative `phi` path is resolved
    against the directory of the configuration file.

    Raises:
        ConfigError: If the file is missing, is not TOML, or a key is unknown
            or has the wrong type.
    """
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")

    try:
        import tomllib  # Python 3.11+
    except ModuleNotFoundError:  # Python 3.10
        import tomli as tomllib

    try:
        data = tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: {e}") from e

    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"Unsupported config key: {unknown[0]}")

    values: dict[str, object] = {}
    for key, value in data.items():
        if key in _INT_KEYS:
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"{key} must be an integer (got {value!r}).")
            values[key] = value
        elif key in _FLOAT_KEYS:
            values[key] = _number(key, value)
        elif key in _STR_KEYS:
            if not isinstance(value, str) or not value.strip():
                raise ConfigError(f"{key} must be a non-empty string.")
            values[key] = value.strip()
        elif key == "radii":
            if not isinstance(value, list):
                raise ConfigError("radii must be a list of numbers.")
            values[key] = tuple(_number("radii", r) for r in value)
        elif key == "threads":
            resolve_threads(value)
            values[key] = value

    phi = values.get("phi")
    if isinstance(phi, str) and not Path(phi).is_absolute():
        values["phi"] = str(path.parent / phi)
    return RunConfig(**values)


def _toml_value(value: object) -> str:
    if isinstance(value, str):
        return f'"{value}"'
    if isinstance(value, tuple):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    # repr keeps every float digit and spells infinity as TOML's `inf`.
    return repr(value)


# Configuration is written in a fixed key order to keep diffs readable
# and reviews predictable when the file is checked into version control.
def save_config(path: Path, config: RunConfig) -> Path:
    """Write configuration to disk in a stable, human-editable TOML format.

    Unset optional keys are omitted, since TOML has no null.
    """
    path.parent.mkdir(parents=True, exist_ok=True)

    lines = []
    for f in fields(RunConfig):
        value = getattr(config, f.name)
        if value is None:
            continue
        lines.append(f"{f.name} = {_toml_value(value)}")
    lines.append("")
    path.write_text("\n".join(lines), encoding="utf-8")
    return path
