from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy import fft, ndimage

from nlc_monitor.core.errors import (
    ConfigError,
    DegenerateFrameError,
    NoMaximumError,
    ProfileError,
    WindowError,
)
from nlc_monitor.core.grid import Grid3, VectorField3, reflect_y3
from nlc_monitor.core.norms import VSpace

__all__ = [
    "ResampleMethod",
    "MaxPoint",
    "Frame",
    "FramedField",
    "FrameDefects",
    "Decomposition",
    "InfimumResult",
    "AngularProfile",
    "find_max_points",
    "build_frame",
    "to_frame",
    "frame_defects",
    "symmetrize",
    "smooth_window",
    "windowed_symmetrize",
    "infimize_nlc",
    "profile_velocity",
    "origin_curl",
    "counterexample_field",
]

logger = logging.getLogger(__name__)

ResampleMethod = Literal["spectral", "trilinear"]

# Fourier coefficients below this fraction of the largest are dropped when
# resampling, which keeps band-limited fields cheap.
_COEFF_CUTOFF = 1e-15

# Allowed excess of sin^2(theta1) over sin^2(theta3) in an angular profile.
_PROFILE_TOL = 1e-12


@dataclass(frozen=True)
class MaxPoint:
    """A grid node where |v| reaches its maximum (within the tie tolerance)."""

    index: tuple[int, int, int]
    location: tuple[float, float, float]
    speed: float
    t: float = 0.0


@dataclass(frozen=True)
class Frame:
    """Orthonormal frame {n1, n2, tau} at a maximum point."""

    tau: tuple[float, float, float]
    n1: tuple[float, float, float]
    n2: tuple[float, float, float]

    @classmethod
    def identity(cls) -> Frame:
        return cls((0.0, 0.0, 1.0), (1.0, 0.0, 0.0), (0.0, 1.0, 0.0))

    def matrix(self) -> np.ndarray:
        """Rows n1, n2, tau: maps original components to frame components."""
        return np.array([self.n1, self.n2, self.tau], dtype=float)


@dataclass(frozen=True, eq=False)
class FramedField:
    """Velocity in frame coordinates y, with y = 0 at the maximum point."""

    u: VectorField3
    frame: Frame
    origin: MaxPoint


@dataclass(frozen=True)
class FrameDefects:
    orthonormality: float
    handedness: float
    origin_transverse: float
    origin_speed_gap: float


@dataclass(frozen=True, eq=False)
class Decomposition:
    """u = U + r with U a symmetric flow.

    Attributes:
        U: Symmetric part (U1, U2 odd and U3 even in y3).
        r: Remainder u - U.
        window: Window radius, or None for the plain parity projection.
    """

    U: VectorField3
    r: VectorField3
    window: float | None = None

    @property
    def label(self) -> str:
        return "unwindowed" if self.window is None else f"window:{self.window:g}"


@dataclass(frozen=True, eq=False)
class InfimumResult:
    """Best decomposition among the candidates.

    The functional is an upper bound of the infimum over all decompositions.
    """

    decomposition: Decomposition
    functional: float
    candidates: tuple[tuple[str, float], ...]
    upper_bound: bool = True


def find_max_points(v: VectorField3, tie_tol: float = 1e-9,
                    t: float = 0.0) -> list[MaxPoint]:
    """All nodes with |v| >= (1 - tie_tol) max|v|, sorted by flat index.

    The first entry is the canonical maximum point.

    Raises:
        NoMaximumError: If v vanishes identically.
    """
    speed = v.speed()
    top = float(np.max(speed))
    if top == 0.0:
        raise NoMaximumError("velocity vanishes identically; no maximum point.")
    points = []
    for flat in np.flatnonzero(speed.ravel() >= (1.0 - tie_tol) * top):
        index = tuple(int(i) for i in np.unravel_index(flat, speed.shape))
        location = tuple(float(c) for c in v.grid.point(index))
        points.append(MaxPoint(index, location, float(speed[index]), t))
    return points


def build_frame(v: VectorField3, point: MaxPoint) -> Frame:
    """tau along v(x_M); n1 from the basis vector least aligned with tau.

    Raises:
        DegenerateFrameError: If v(x_M) = 0.
    """
    vector = v.values[(slice(None),) + point.index]
    norm = float(np.linalg.norm(vector))
    if norm == 0.0:
        raise DegenerateFrameError(f"v vanishes at {point.location}; no frame.")
    tau = vector / norm
    e = np.zeros(3)
    # argmin keeps the first minimum: ties go to the lowest basis index.
    e[int(np.argmin(np.abs(tau)))] = 1.0
    n1 = e - np.dot(e, tau) * tau
    n1 /= np.linalg.norm(n1)
    n2 = np.cross(tau, n1)
    return Frame(tuple(tau), tuple(n1), tuple(n2))


def _signed_permutation(matrix: np.ndarray) -> bool:
    return bool(np.all(np.isin(matrix, (-1.0, 0.0, 1.0))))


def _permute(v: VectorField3, matrix: np.ndarray, origin: tuple[int, int, int]
             ) -> np.ndarray:
    """Exact resampling when the frame maps nodes onto nodes."""
    n = v.grid.n
    steps = np.arange(n) - n // 2
    y = np.stack(np.meshgrid(steps, steps, steps, indexing="ij"))
    rotation = matrix.astype(int)
    x = np.einsum("lm,l...->m...", rotation, y)
    index = [(origin[m] + x[m]) % n for m in range(3)]
    return v.values[:, index[0], index[1], index[2]]


def _spectral(v: VectorField3, matrix: np.ndarray, location: np.ndarray
              ) -> np.ndarray:
    """Evaluate the trigonometric interpolant of v at x_M + matrix^T y."""
    grid = v.grid
    n = grid.n
    coeffs = fft.fftn(v.values, axes=(1, 2, 3)) / n**3
    magnitude = np.max(np.abs(coeffs), axis=0)
    keep = magnitude > _COEFF_CUTOFF * max(float(magnitude.max()), 1e-300)
    k = grid.wave_mesh()[:, keep].T
    # Node 0 sits at -L: v(x) = sum c_k exp(i k . (x + L)).
    phase = np.exp(1j * (k @ (location + grid.half_width)))
    amplitude = coeffs[:, keep] * phase
    q = k @ matrix.T
    axis = grid.axis()
    waves = [np.exp(1j * q[:, l, None] * axis[None, :]) for l in range(3)]

    out = np.empty((3, n, n, n))
    first = amplitude[:, :, None] * waves[0][None]
    for a in range(n):
        block = first[:, :, a, None] * waves[1][None]
        out[:, a] = (np.swapaxes(block, 1, 2) @ waves[2]).real
    return out


def _trilinear(v: VectorField3, matrix: np.ndarray, location: np.ndarray
               ) -> np.ndarray:
    grid = v.grid
    y = grid.mesh()
    x = location.reshape(3, 1, 1, 1) + np.einsum("lm,l...->m...", matrix, y)
    coords = (x + grid.half_width) / grid.h
    return np.stack([
        ndimage.map_coordinates(v.values[c], coords, order=1, mode="grid-wrap")
        for c in range(3)
    ])


def to_frame(v: VectorField3, frame: Frame, point: MaxPoint,
             method: ResampleMethod = "spectral") -> FramedField:
    """Resample v into frame coordinates on the same grid.

    u_k(y) = v(x_M + n1 y1 + n2 y2 + tau y3) . (frame axis k). Frames that
    permute the axes up to sign are resampled exactly by index arithmetic.
    """
    matrix = frame.matrix()
    location = np.asarray(point.location, dtype=float)
    if _signed_permutation(matrix):
        sampled = _permute(v, matrix, point.index)
    elif method == "spectral":
        sampled = _spectral(v, matrix, location)
    elif method == "trilinear":
        sampled = _trilinear(v, matrix, location)
    else:
        raise ConfigError(f"Unsupported resampling method: {method}")
    rotated = np.einsum("km,m...->k...", matrix, sampled)
    return FramedField(VectorField3(v.grid, rotated), frame, point)


def frame_defects(framed: FramedField) -> FrameDefects:
    """Orthonormality, handedness and origin checks of a framed field."""
    m = framed.frame.matrix()
    ortho = float(np.max(np.abs(m @ m.T - np.eye(3))))
    hand = float(np.max(np.abs(np.cross(m[0], m[1]) - m[2])))
    u0 = framed.u.at_origin()
    return FrameDefects(
        ortho,
        hand,
        float(max(abs(u0[0]), abs(u0[1]))),
        float(abs(u0[2] - framed.origin.speed)),
    )


def _parity_parts(values: np.ndarray, mirrored: np.ndarray) -> np.ndarray:
    return np.stack([
        (values[0] - mirrored[0]) / 2,
        (values[1] - mirrored[1]) / 2,
        (values[2] + mirrored[2]) / 2,
    ])


def _as_field(u: VectorField3 | FramedField) -> VectorField3:
    return u.u if isinstance(u, FramedField) else u


def symmetrize(u: VectorField3 | FramedField) -> Decomposition:
    """Parity projection: U1, U2 odd parts and U3 even part in y3; r = u - U."""
    field = _as_field(u)
    symmetric = _parity_parts(field.values, reflect_y3(field).values)
    return Decomposition(
        VectorField3(field.grid, symmetric),
        VectorField3(field.grid, field.values - symmetric),
    )


def _smoothstep(t: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.clip(t, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


def smooth_window(grid: Grid3, radius: float) -> np.ndarray:
    """chi = 1 on B(0, radius), 0 outside B(0, 2 radius), smooth and radial.

    Raises:
        WindowError: If 2 * radius >= L.
    """
    if not 0 < 2 * radius < grid.half_width:
        raise WindowError(
            f"window needs 0 < 2*radius < L (got radius={radius:g}, "
            f"L={grid.half_width:g})."
        )
    distance = np.sqrt(np.sum(grid.mesh() ** 2, axis=0))
    return _smoothstep((2.0 * radius - distance) / radius)


def windowed_symmetrize(u: VectorField3 | FramedField, radius: float
                        ) -> Decomposition:
    """U = chi * (parity projection of u) with a smooth even cutoff chi."""
    field = _as_field(u)
    chi = smooth_window(field.grid, radius)
    symmetric = chi * _parity_parts(field.values, reflect_y3(field).values)
    return Decomposition(
        VectorField3(field.grid, symmetric),
        VectorField3(field.grid, field.values - symmetric),
        window=radius,
    )


def infimize_nlc(u: VectorField3 | FramedField, vspace: VSpace,
                 radii: Sequence[float] = ()) -> InfimumResult:
    """Smallest collapsing functional among the unwindowed projection and
    the windowed projections at each radius. Ties keep the earlier candidate.
    """
    from nlc_monitor.core.nlc import nlc_functional

    field = _as_field(u)
    candidates = [symmetrize(field)]
    candidates += [windowed_symmetrize(field, radius) for radius in radii]
    best, best_value, scores = None, math.inf, []
    for candidate in candidates:
        value = nlc_functional(candidate, vspace)
        scores.append((candidate.label, value))
        logger.debug("candidate %s: functional %.6g", candidate.label, value)
        if value < best_value:
            best, best_value = candidate, value
    return InfimumResult(best, best_value, tuple(scores))


Profile = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class AngularProfile:
    """Building blocks of u = |u| (sin theta1, sin theta2, cos theta3).

    theta1 and theta3 are odd in y3 and vanish at 0, so u1 is odd and u3 even;
    theta2 is derived from them so that |u| is matched exactly. `lam` is
    d3 theta1(0).
    """

    magnitude: Profile
    theta1: Profile
    theta3: Profile
    lam: float

    @classmethod
    def gaussian(cls, lam: float, width: float, amplitude: float = 1.0
                 ) -> AngularProfile:
        """Gaussian bump of width w with a twist of strength lam along y3.

        |u| = A exp(-|y|^2/w^2) and theta1 = lam y3 exp(-|y|^2/s^2), where the
        twist width s = min(w, 1/|lam|) keeps |theta1| below 1/sqrt(2e).
        theta3 = 2 theta1, so sin^2 theta3 > sin^2 theta1 off the plane y3 = 0
        and u2 does not vanish.
        """
        if not width > 0:
            raise ProfileError(f"bump width must be positive (got {width}).")
        twist = width if lam == 0 else min(width, 1.0 / abs(lam))

        def bump(y: np.ndarray, w: float) -> np.ndarray:
            return np.exp(-np.sum(y**2, axis=0) / w**2)

        return cls(
            magnitude=lambda y: amplitude * bump(y, width),
            theta1=lambda y: lam * y[2] * bump(y, twist),
            theta3=lambda y: 2.0 * lam * y[2] * bump(y, twist),
            lam=lam,
        )


def profile_velocity(profile: AngularProfile, y: np.ndarray) -> np.ndarray:
    """Evaluate the profile's velocity at points y of shape (3, ...).

    u2 = |u| sgn(y3) sqrt(max(0, sin^2 theta3 - sin^2 theta1)) closes the
    identity |u|^2 = u1^2 + u2^2 + u3^2.

    Raises:
        ProfileError: If sin^2 theta1 exceeds sin^2 theta3 anywhere.
    """
    magnitude = profile.magnitude(y)
    theta1 = profile.theta1(y)
    theta3 = profile.theta3(y)
    s1 = np.sin(theta1) ** 2
    s3 = np.sin(theta3) ** 2
    excess = float(np.max(s1 - s3))
    if excess > _PROFILE_TOL:
        raise ProfileError(
            f"inconsistent angular profile: sin^2 theta1 exceeds sin^2 theta3 "
            f"by {excess:.3g}."
        )
    return np.stack([
        magnitude * np.sin(theta1),
        magnitude * np.sign(y[2]) * np.sqrt(np.maximum(0.0, s3 - s1)),
        magnitude * np.cos(theta3),
    ])


def origin_curl(profile: AngularProfile, step: float | None = None) -> float:
    """d3u1 - d1u3 at the origin, from the profile rather than a grid.

    Fourth-order central differences on the axes; the default step resolves
    a twist of width 1/|lam|.
    """
    if step is None:
        step = 1e-3 / max(1.0, abs(profile.lam))
    offsets = np.array([-2.0, -1.0, 1.0, 2.0]) * step
    weights = np.array([1.0, -8.0, 8.0, -1.0]) / (12.0 * step)
    along3 = np.zeros((3, 4))
    along3[2] = offsets
    along1 = np.zeros((3, 4))
    along1[0] = offsets
    d3u1 = weights @ profile_velocity(profile, along3)[0]
    d1u3 = weights @ profile_velocity(profile, along1)[2]
    return float(d3u1 - d1u3)


def counterexample_field(profile: AngularProfile, grid: Grid3) -> VectorField3:
    """Symmetric flow with d3u1 - d1u3 = |u(0)| lam at the origin.

    Odd components vanish on the seam plane y3 = -L, which is its own mirror
    image.

    Raises:
        ProfileError: If sin^2 theta1 exceeds sin^2 theta3 anywhere.
    """
    u = profile_velocity(profile, grid.mesh())
    u[0:2, :, :, 0] = 0.0
    return VectorField3(grid, u)
