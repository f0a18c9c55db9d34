from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import fft

from nlc_monitor.core.errors import ConfigError, DivergenceError, NlcError, StepError
from nlc_monitor.core.grid import Grid3, ScalarField, VectorField3
from nlc_monitor.core.harmonic import riesz_pair
from nlc_monitor.core.snapshot import snapshot_name, write_snapshot
from nlc_monitor.solver.initial import InitialData

# Public API of the spectral engine.
# These symbols are used by the simulate command and the verify harnesses.
__all__ = [
    "SpectralState",
    "RunResult",
    "project_div_free",
    "dealias_mask",
    "nonlinear_term",
    "max_stable_dt",
    "step",
    "energy",
    "max_divergence",
    "pressure_from_velocity",
    "run",
]

logger = logging.getLogger(__name__)

_AXES = (1, 2, 3)

# Relative tolerance when checking that the snapshot interval is a multiple of dt.
_MULTIPLE_TOL = 1e-9

# CFL number: dt <= CFL * h / max|u|.
_CFL = 0.5


@dataclass(frozen=True, eq=False)
class SpectralState:
    """Fourier coefficients of a velocity field (full complex FFT).

    Attributes:
        grid: The periodic grid.
        uhat: Coefficients of shape (3, N, N, N).
        t: Time.
        nu: Viscosity (1 in the equations monitored here).
    """

    grid: Grid3
    uhat: np.ndarray
    t: float = 0.0
    nu: float = 1.0

    @classmethod
    def from_field(cls, u: VectorField3, t: float = 0.0, nu: float = 1.0
                   ) -> SpectralState:
        return cls(u.grid, fft.fftn(u.values, axes=_AXES), t, nu)

    def to_field(self) -> VectorField3:
        return VectorField3(self.grid, fft.ifftn(self.uhat, axes=_AXES).real)


@dataclass(frozen=True)
class RunResult:
    """Outcome of a simulation run.

    Attributes:
        paths: Written snapshot files in time order.
        times: Their time stamps.
        partial: True when a step failed and the series stops early.
        error: Message of the failure, when partial.
    """

    paths: tuple[Path, ...]
    times: tuple[float, ...]
    partial: bool = False
    error: str | None = field(default=None)


def project_div_free(uhat: np.ndarray, grid: Grid3) -> np.ndarray:
    """Apply I - k k^T / |k|^2 per mode; the zero mode is left unchanged.

    Uses the Nyquist-zeroed wavenumbers so the projected field is exactly
    divergence-free for the spectral divergence.
    """
    k = grid.wave_mesh(odd=True)
    k2 = np.sum(k**2, axis=0)
    safe = np.where(k2 > 0, k2, 1.0)
    kdotu = np.sum(k * uhat, axis=0)
    return uhat - k * np.where(k2 > 0, kdotu / safe, 0.0)


def dealias_mask(grid: Grid3) -> np.ndarray:
    """2/3-rule mask: keep integer modes |m_i| < N/3 on every axis."""
    modes = np.abs(fft.fftfreq(grid.n) * grid.n)
    keep = modes < grid.n / 3.0
    return keep[:, None, None] & keep[None, :, None] & keep[None, None, :]


def _curl_hat(uhat: np.ndarray, k: np.ndarray) -> np.ndarray:
    return 1j * np.stack([
        k[1] * uhat[2] - k[2] * uhat[1],
        k[2] * uhat[0] - k[0] * uhat[2],
        k[0] * uhat[1] - k[1] * uhat[0],
    ])


def nonlinear_term(uhat: np.ndarray, grid: Grid3) -> np.ndarray:
    """Projected, dealiased rotational nonlinearity P(u x omega) in Fourier space."""
    k = grid.wave_mesh(odd=True)
    u = fft.ifftn(uhat, axes=_AXES).real
    omega = fft.ifftn(_curl_hat(uhat, k), axes=_AXES).real
    cross = np.cross(u, omega, axis=0)
    product = fft.fftn(cross, axes=_AXES) * dealias_mask(grid)
    return project_div_free(product, grid)


def max_stable_dt(state: SpectralState) -> float:
    top = float(np.max(state.to_field().speed()))
    return math.inf if top == 0.0 else _CFL * state.grid.h / top


def step(state: SpectralState, dt: float) -> SpectralState:
    """One integrating-factor RK4 step; viscosity is integrated exactly.

    Raises:
        StepError: If dt violates dt <= 0.5 h / max|u|.
        DivergenceError: If the new state is not finite.
    """
    if not dt > 0:
        raise StepError(f"dt must be positive (got {dt}).")
    limit = max_stable_dt(state)
    if dt > limit:
        raise StepError(f"dt={dt:g} violates the CFL limit {limit:g}.")
    grid = state.grid
    k2 = np.sum(grid.wave_mesh() ** 2, axis=0)
    full = np.exp(-state.nu * k2 * dt)
    half = np.exp(-state.nu * k2 * dt / 2)
    u = state.uhat

    k1 = nonlinear_term(u, grid)
    k2_ = nonlinear_term(half * (u + dt / 2 * k1), grid)
    k3 = nonlinear_term(half * u + dt / 2 * k2_, grid)
    k4 = nonlinear_term(full * u + dt * half * k3, grid)
    new = full * u + dt / 6 * (full * k1 + 2 * half * (k2_ + k3) + k4)

    if not np.all(np.isfinite(new)):
        raise DivergenceError(f"solution stopped being finite at t={state.t + dt:g}.")
    return SpectralState(grid, new, state.t + dt, state.nu)


def energy(state: SpectralState) -> float:
    """(1/2) int |u|^2 over the box."""
    values = state.to_field().values
    return 0.5 * float(np.sum(values**2)) * state.grid.cell_volume


def max_divergence(state: SpectralState) -> float:
    """max |div u| computed spectrally."""
    k = state.grid.wave_mesh(odd=True)
    div = fft.ifftn(1j * np.sum(k * state.uhat, axis=0)).real
    return float(np.max(np.abs(div)))


def pressure_from_velocity(state: SpectralState) -> ScalarField:
    """p = sum_ij R_i R_j (u_i u_j), mean zero."""
    u = state.to_field().values
    grid = state.grid
    total = np.zeros(grid.shape)
    for i in range(3):
        for j in range(3):
            total += riesz_pair(ScalarField(grid, u[i] * u[j]), i + 1, j + 1).values
    return ScalarField(grid, total - total.mean())


def _steps_between(interval: float, dt: float, label: str) -> int:
    count = round(interval / dt)
    if count < 1 or abs(count * dt - interval) > _MULTIPLE_TOL * interval:
        raise ConfigError(
            f"{label} must be a positive multiple of dt (got {interval})."
        )
    return count


def run(init: InitialData, grid: Grid3, dt: float, t_end: float,
        snapshot_every: float, out_dir: Path, nu: float = 1.0) -> RunResult:
    """Integrate from t = 0 to t_end and write snapshots into out_dir.

    Snapshots are written at t = 0, every `snapshot_every` (a multiple of dt,
    or inf for the initial and final state only) and at t_end. Time stamps are
    computed as step * dt. A failing step ends the run with `partial=True`.
    """
    if not dt > 0:
        raise ConfigError(f"dt must be positive (got {dt}).")
    if not nu > 0:
        raise ConfigError(f"nu must be positive (got {nu}).")
    total = _steps_between(t_end, dt, "t_end")
    every = total if math.isinf(snapshot_every) else _steps_between(
        snapshot_every, dt, "snapshot_every"
    )

    state = SpectralState.from_field(init.field(grid), 0.0, nu)
    paths: list[Path] = []
    times: list[float] = []

    def emit(n: int) -> None:
        t = n * dt
        path = out_dir / snapshot_name(len(paths))
        write_snapshot(path, state.to_field(), t, nu)
        paths.append(path)
        times.append(t)
        logger.info("snapshot %s at t=%.6g", path.name, t)

    emit(0)
    for n in range(1, total + 1):
        try:
            state = step(state, dt)
        except NlcError as e:
            logger.warning("run stopped at step %d: %s", n, e)
            return RunResult(tuple(paths), tuple(times), partial=True, error=str(e))
        if n % every == 0 or n == total:
            emit(n)
    return RunResult(tuple(paths), tuple(times))
