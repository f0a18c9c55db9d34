from __future__ import annotations

import math

import numpy as np
import pytest
from conftest import swirl

from nlc_monitor.commands.counterexample import summarize
from nlc_monitor.core.errors import (
    DegenerateFrameError,
    NoMaximumError,
    ProfileError,
    WindowError,
)
from nlc_monitor.core.frame import (
    AngularProfile,
    Frame,
    MaxPoint,
    build_frame,
    counterexample_field,
    find_max_points,
    frame_defects,
    infimize_nlc,
    origin_curl,
    profile_velocity,
    smooth_window,
    symmetrize,
    to_frame,
    windowed_symmetrize,
)
from nlc_monitor.core.grid import Grid3, VectorField3, curl, reflect_y3
from nlc_monitor.core.nlc import nlc_functional
from nlc_monitor.core.norms import VSpace


def tilted_bump(grid: Grid3) -> VectorField3:
    """A Gaussian bump pointing along (1, 2, 2)/3; no axis-aligned frame fits."""
    direction = np.array([1.0, 2.0, 2.0]) / 3.0
    bump = np.exp(-np.sum(grid.mesh() ** 2, axis=0))
    return VectorField3(grid, direction[:, None, None, None] * bump)


@pytest.mark.unit
def test_find_max_points(grid16):
    points = find_max_points(swirl(grid16), t=0.5)
    assert points == [MaxPoint((8, 8, 8), (0.0, 0.0, 0.0), 1.0, 0.5)]


@pytest.mark.unit
def test_ties_are_sorted_by_flat_index(grid8):
    values = np.zeros((3,) + grid8.shape)
    values[0, 5, 1, 1] = 2.0
    values[1, 2, 7, 0] = -2.0
    points = find_max_points(VectorField3(grid8, values))
    assert [p.index for p in points] == [(2, 7, 0), (5, 1, 1)]


@pytest.mark.unit
def test_zero_field_has_no_maximum(grid8):
    with pytest.raises(NoMaximumError):
        find_max_points(VectorField3(grid8, np.zeros((3,) + grid8.shape)))


@pytest.mark.unit
def test_frame_of_an_axial_field_is_the_identity(grid16):
    v = swirl(grid16)
    point = find_max_points(v)[0]
    frame = build_frame(v, point)
    assert frame == Frame.identity()
    framed = to_frame(v, frame, point)
    np.testing.assert_array_equal(framed.u.values, v.values)


@pytest.mark.unit
def test_frame_at_a_zero_vector(grid8):
    values = np.zeros((3,) + grid8.shape)
    values[2, 0, 0, 0] = 1.0
    v = VectorField3(grid8, values)
    point = MaxPoint((4, 4, 4), (0.0, 0.0, 0.0), 0.0)
    with pytest.raises(DegenerateFrameError):
        build_frame(v, point)


@pytest.mark.unit
@pytest.mark.parametrize("method", ["spectral", "trilinear"])
def test_tilted_frame_puts_the_velocity_on_the_axis(grid16, method):
    v = tilted_bump(grid16)
    point = find_max_points(v)[0]
    frame = build_frame(v, point)
    np.testing.assert_allclose(frame.tau, [1 / 3, 2 / 3, 2 / 3])
    defects = frame_defects(to_frame(v, frame, point, method))
    assert defects.orthonormality < 1e-14
    assert defects.handedness < 1e-14
    assert defects.origin_transverse < 1e-10
    assert defects.origin_speed_gap < 1e-10


@pytest.mark.unit
def test_symmetrize_splits_u_exactly(grid16):
    rng = np.random.default_rng(11)
    u = VectorField3(grid16, rng.standard_normal((3,) + grid16.shape))
    dec = symmetrize(u)
    np.testing.assert_allclose((dec.U + dec.r).values, u.values, atol=1e-14)

    mirrored = reflect_y3(dec.U).values
    np.testing.assert_array_equal(mirrored[0], -dec.U.values[0])
    np.testing.assert_array_equal(mirrored[1], -dec.U.values[1])
    np.testing.assert_array_equal(mirrored[2], dec.U.values[2])

    again = symmetrize(dec.U)
    np.testing.assert_array_equal(again.U.values, dec.U.values)
    assert not np.any(again.r.values)
    assert nlc_functional(again, VSpace()) == 0.0
    assert dec.label == "unwindowed"


@pytest.mark.unit
def test_smooth_window(grid16):
    chi = smooth_window(grid16, 1.0)
    o = grid16.origin_index
    assert chi[o, o, o] == 1.0
    assert chi[0, 0, 0] == 0.0
    assert np.all((chi >= 0.0) & (chi <= 1.0))
    with pytest.raises(WindowError):
        smooth_window(grid16, math.pi / 2)


@pytest.mark.unit
def test_windowed_decomposition_still_sums_to_u(grid16):
    u = swirl(grid16)
    dec = windowed_symmetrize(u, 0.5)
    np.testing.assert_allclose((dec.U + dec.r).values, u.values, atol=1e-14)
    assert dec.label == "window:0.5"


@pytest.mark.unit
def test_infimum_keeps_the_smallest_candidate(grid16):
    u = swirl(grid16)
    result = infimize_nlc(u, VSpace(), radii=(0.5, 1.0))
    labels = [label for label, _ in result.candidates]
    assert labels == ["unwindowed", "window:0.5", "window:1"]
    assert result.functional == min(value for _, value in result.candidates)
    assert result.upper_bound


@pytest.mark.unit
def test_counterexample_field_is_symmetric_with_a_twist():
    grid = Grid3(32, math.pi)
    lam = 2.0
    v = counterexample_field(AngularProfile.gaussian(lam, 1.0), grid)
    np.testing.assert_allclose(v.speed(), np.exp(-np.sum(grid.mesh() ** 2, axis=0)),
                               atol=1e-10)
    dec = symmetrize(v)
    assert np.max(np.abs(dec.r.values)) < 1e-14
    omega = curl(v).at_origin()
    assert omega[1] == pytest.approx(lam, rel=1e-2)


@pytest.mark.unit
def test_profiles_are_validated(grid8):
    with pytest.raises(ProfileError):
        AngularProfile.gaussian(1.0, 0.0)
    inconsistent = AngularProfile(
        magnitude=lambda y: np.ones(y.shape[1:]),
        theta1=lambda y: np.full(y.shape[1:], 0.5),
        theta3=lambda y: np.zeros(y.shape[1:]),
        lam=0.0,
    )
    with pytest.raises(ProfileError):
        counterexample_field(inconsistent, grid8)


@pytest.mark.unit
@pytest.mark.parametrize("lam", [1.0, 10.0, 100.0])
def test_counterexample_curl_is_linear_in_the_twist(lam):
    grid = Grid3(32, math.pi)
    profile = AngularProfile.gaussian(lam, math.pi / 6)
    summary = summarize(counterexample_field(profile, grid), profile)
    assert summary.curl_origin == pytest.approx(lam, rel=1e-2)
    assert summary.remainder <= 1e-12
    assert summary.functional == 0.0


@pytest.mark.unit
def test_counterexample_curl_ratio_over_a_decade():
    curls = [origin_curl(AngularProfile.gaussian(lam, math.pi / 6))
             for lam in (1.0, 10.0, 100.0)]
    assert curls[1] / curls[0] == pytest.approx(10.0, rel=1e-2)
    assert curls[2] / curls[1] == pytest.approx(10.0, rel=1e-2)


@pytest.mark.unit
def test_resolved_twist_agrees_with_the_grid_curl():
    grid = Grid3(32, math.pi)
    profile = AngularProfile.gaussian(1.0, math.pi / 6)
    summary = summarize(counterexample_field(profile, grid), profile)
    assert summary.grid_curl_origin == pytest.approx(summary.curl_origin, rel=1e-2)


@pytest.mark.unit
def test_twisted_profile_has_a_second_component():
    grid = Grid3(32, math.pi)
    profile = AngularProfile.gaussian(1.0, math.pi / 6)
    u = profile_velocity(profile, grid.mesh())
    assert np.max(np.abs(u[1])) > 1e-2
    s1 = np.sin(profile.theta1(grid.mesh())) ** 2
    s3 = np.sin(profile.theta3(grid.mesh())) ** 2
    assert np.all(s3 >= s1)
    off_plane = grid.mesh()[2] != 0
    assert np.all(s3[off_plane] > s1[off_plane])
