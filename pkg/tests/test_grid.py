from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nlc_monitor.core.errors import BallTooSmallError, ConfigError, DomainError
from nlc_monitor.core.grid import (
    Ball,
    BallFamily,
    Grid3,
    ScalarField,
    VectorField3,
    ball_average,
    ball_mask,
    ball_measure,
    curl,
    derivative,
    divergence,
    family_centers,
    family_radii,
    gradient,
    laplacian,
    parse_ball_family,
    reflect_y3,
    sample_balls,
)


@pytest.mark.unit
@pytest.mark.parametrize("n", [4, 12, 0, 24])
def test_grid_needs_a_power_of_two_of_at_least_eight(n):
    with pytest.raises(ConfigError):
        Grid3(n)


@pytest.mark.unit
def test_grid_rejects_non_positive_half_width():
    with pytest.raises(ConfigError):
        Grid3(8, 0.0)
    with pytest.raises(ConfigError):
        Grid3(8, math.inf)


@pytest.mark.unit
def test_axis_is_symmetric_about_the_origin_node(grid16):
    axis = grid16.axis()
    assert axis[grid16.origin_index] == 0.0
    assert axis[0] == -math.pi
    np.testing.assert_array_equal(axis[1:], -axis[1:][::-1])
    assert grid16.h == pytest.approx(math.pi / 8)


@pytest.mark.unit
def test_fields_are_read_only(grid8):
    f = ScalarField(grid8, np.ones(grid8.shape))
    assert not f.values.flags.writeable
    with pytest.raises(ValueError):
        f.values[0, 0, 0] = 2.0


@pytest.mark.unit
def test_fields_reject_bad_shapes_and_values(grid8):
    with pytest.raises(DomainError):
        ScalarField(grid8, np.ones((8, 8)))
    bad = np.ones((3,) + grid8.shape)
    bad[1, 2, 3, 4] = math.nan
    with pytest.raises(DomainError):
        VectorField3(grid8, bad)


@pytest.mark.unit
def test_vector_field_arithmetic(grid8):
    ones = ScalarField(grid8, np.ones(grid8.shape))
    v = VectorField3.from_components([ones, ones * 2.0, ones * 2.0])
    np.testing.assert_allclose(v.speed(), 3.0)
    np.testing.assert_allclose((v - v * 0.5).values, (0.5 * v).values)
    np.testing.assert_array_equal(v.at_origin(), [1.0, 2.0, 2.0])
    assert v.component(2).mean() == 2.0


@pytest.mark.unit
def test_ball_counts_nodes_strictly_inside(grid16):
    ball = Ball((0.0, 0.0, 0.0), 1.5 * grid16.h)
    # Offsets with |d|^2 in {0, 1, 2}: 1 + 6 + 12 nodes.
    assert int(np.count_nonzero(ball_mask(grid16, ball))) == 19
    assert ball_measure(grid16, ball) == pytest.approx(19 * grid16.cell_volume)


@pytest.mark.unit
def test_ball_wraps_around_the_torus(grid16):
    corner = Ball((-math.pi, -math.pi, -math.pi), 1.5 * grid16.h)
    mask = ball_mask(grid16, corner)
    assert int(np.count_nonzero(mask)) == 19
    assert mask[-1, 0, 0]
    assert mask[-1, -1, 0]


@pytest.mark.unit
def test_ball_validation(grid16):
    with pytest.raises(DomainError):
        Ball((0.0, 0.0, 0.0), 0.0)
    with pytest.raises(DomainError):
        ball_mask(grid16, Ball((0.0, 0.0, 0.0), math.pi))
    assert ball_mask(grid16, Ball((0.0, 0.0, 0.0), math.inf)).all()


@pytest.mark.unit
def test_ball_average(grid16):
    f = ScalarField(grid16, np.full(grid16.shape, 3.0))
    assert ball_average(f, Ball((0.0, 0.0, 0.0), 1.0)) == pytest.approx(3.0)
    with pytest.raises(BallTooSmallError):
        ball_average(f, Ball((0.0, 0.0, 0.0), 0.5 * grid16.h))


@pytest.mark.unit
def test_parse_ball_family():
    assert parse_ball_family("exhaustive") == BallFamily("exhaustive", 1)
    assert parse_ball_family("dyadic:2") == BallFamily("dyadic", 2)
    assert parse_ball_family(" dyadic ") == BallFamily()
    for text in ("dyadic:x", "dyadic:0", "grid"):
        with pytest.raises(ConfigError):
            parse_ball_family(text)


@pytest.mark.unit
def test_family_description():
    assert BallFamily().describe() == "dyadic:4"
    family = BallFamily(radii=(0.5, 1.0), covering=True)
    assert family.describe() == "dyadic:4[0.5,1]+box"


@pytest.mark.unit
def test_dyadic_family(grid16):
    centers = family_centers(grid16, BallFamily())
    assert centers.shape == (64, 3)
    assert any((c == grid16.origin_index).all() for c in centers)
    # h holds one node and 8h = L is not below L.
    assert family_radii(grid16, BallFamily()) == pytest.approx(
        [2 * grid16.h, 4 * grid16.h]
    )
    with pytest.raises(ConfigError):
        family_centers(grid16, BallFamily(stride=3))


@pytest.mark.unit
def test_sample_balls_put_the_covering_ball_last(grid16):
    balls = sample_balls(grid16, BallFamily(covering=True))
    assert len(balls) == 64 * 2 + 1
    assert balls[-1].covering
    assert balls[0].radius < balls[1].radius
    assert balls[0].center == balls[1].center


@pytest.mark.unit
def test_spectral_derivatives_are_exact_on_low_modes(grid16):
    x, y, _ = grid16.mesh()
    f = ScalarField(grid16, np.sin(x))
    np.testing.assert_allclose(derivative(f, 0).values, np.cos(x), atol=1e-12)
    np.testing.assert_allclose(derivative(f, 1).values, 0.0, atol=1e-12)

    g = ScalarField(grid16, np.sin(x) * np.sin(y))
    np.testing.assert_allclose(laplacian(g).values, -2.0 * g.values, atol=1e-12)
    np.testing.assert_allclose(divergence(gradient(g)).values, laplacian(g).values,
                               atol=1e-12)


@pytest.mark.unit
def test_finite_differences_are_second_order(grid16):
    x = grid16.mesh()[0]
    f = ScalarField(grid16, np.sin(x))
    # Central differences scale cos(x) by sin(h)/h.
    expected = np.cos(x) * math.sin(grid16.h) / grid16.h
    np.testing.assert_allclose(derivative(f, 0, method="fd").values, expected,
                               atol=1e-12)
    np.testing.assert_allclose(derivative(f, 0, method="fd").values, np.cos(x),
                               atol=0.03)
    with pytest.raises(DomainError):
        derivative(f, 3)


@pytest.mark.unit
def test_curl(grid16):
    x = grid16.mesh()[0]
    zero = np.zeros(grid16.shape)
    v = VectorField3(grid16, np.stack([zero, zero, np.sin(x)]))
    omega = curl(v).values
    np.testing.assert_allclose(omega[0], 0.0, atol=1e-12)
    np.testing.assert_allclose(omega[1], -np.cos(x), atol=1e-12)
    np.testing.assert_allclose(omega[2], 0.0, atol=1e-12)


@pytest.mark.unit
def test_reflection_negates_the_third_coordinate(grid16):
    z = ScalarField(grid16, grid16.mesh()[2])
    mirrored = reflect_y3(z).values
    # The seam plane y3 = -L is its own mirror image.
    np.testing.assert_array_equal(mirrored[..., 1:], -z.values[..., 1:])
    np.testing.assert_array_equal(mirrored[..., 0], z.values[..., 0])


@pytest.mark.unit
@given(arrays(np.float64, (8, 8, 8), elements=st.floats(-1e6, 1e6)))
def test_reflection_is_an_involution(values):
    f = ScalarField(Grid3(8, math.pi), values)
    np.testing.assert_array_equal(reflect_y3(reflect_y3(f)).values, f.values)
