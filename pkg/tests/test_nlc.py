from __future__ import annotations

import math

import numpy as np
import pytest
from conftest import swirl

from nlc_monitor.core.errors import ConfigError, DomainError, FrameError, SeriesError
from nlc_monitor.core.frame import MaxPoint, find_max_points, symmetrize
from nlc_monitor.core.grid import ScalarField, VectorField3
from nlc_monitor.core.nlc import (
    NlcConfig,
    accumulate,
    bkm_accumulate,
    bkm_integrand,
    decay_check,
    functional_terms,
    l2linf_accumulate,
    lemma_checks,
    monitor_run,
    monitor_snapshot,
    nlc_functional,
    pressure_derivative_origin,
    riesz_product_constant,
    sigma_book,
    threshold,
)
from nlc_monitor.core.norms import VSpace
from nlc_monitor.core.snapshot import Snapshot, snapshot_name, write_snapshot
from nlc_monitor.solver.initial import Beltrami


@pytest.mark.unit
def test_threshold():
    cfg = NlcConfig(c=1.0, alpha=0.5, t_blowup=2.0)
    assert threshold(cfg, 1.0, 2.0) == pytest.approx(0.5)
    assert threshold(cfg, 1.75, 1.0) == pytest.approx(2.0)
    with pytest.raises(DomainError):
        threshold(cfg, 2.0, 1.0)
    with pytest.raises(DomainError):
        threshold(cfg, 1.0, 0.0)


@pytest.mark.unit
@pytest.mark.parametrize(
    "kwargs",
    [{"c": 0.0}, {"alpha": 2.0}, {"t_blowup": math.inf}, {"radii": (0.5, -1.0)}],
)
def test_config_validation(kwargs):
    with pytest.raises(ConfigError):
        NlcConfig(**kwargs)


@pytest.mark.unit
def test_functional_of_a_symmetric_flow_is_zero(grid16):
    dec = symmetrize(symmetrize(swirl(grid16)).U)
    assert nlc_functional(dec, VSpace()) == 0.0


@pytest.mark.unit
def test_functional_is_the_sum_of_products(grid16):
    dec = symmetrize(swirl(grid16))
    terms = functional_terms(dec, VSpace())
    a, b, c, d = (sum(n.value for n in group)
                  for group in (terms.a, terms.b, terms.c, terms.d))
    assert terms.total() == pytest.approx(b * c + a * d + a * b)
    assert nlc_functional(dec, VSpace()) == terms.total()
    assert terms.total() > 0


@pytest.mark.unit
def test_pressure_splits_bilinearly(grid16):
    dec = symmetrize(swirl(grid16))
    terms = pressure_derivative_origin(dec)
    assert terms.identity_defect <= 1e-11 * max(abs(terms.via_full), terms.scale)
    assert terms.scale > 0


@pytest.mark.unit
def test_symmetric_flow_has_no_axial_pressure_gradient(grid16):
    terms = pressure_derivative_origin(symmetrize(symmetrize(swirl(grid16)).U))
    assert abs(terms.symmetric_part) <= 1e-10 * terms.scale
    assert terms.via_remainder == 0.0


@pytest.mark.unit
def test_laplacian_is_non_positive_at_the_maximum(grid16):
    v = swirl(grid16)
    point = find_max_points(v)[0]
    pressure = pressure_derivative_origin(symmetrize(v))
    checks = lemma_checks(v, point, pressure)
    assert checks.v_laplacian_v <= 0.0
    assert checks.laplacian_ok
    assert checks.v_grad_p == pytest.approx(pressure.via_full)

    elsewhere = MaxPoint((0, 0, 0), (-math.pi,) * 3, 1.0)
    with pytest.raises(FrameError):
        lemma_checks(v, elsewhere, pressure)


@pytest.mark.unit
def test_sigma_book_of_a_symmetric_decomposition(grid16):
    book = sigma_book(symmetrize(symmetrize(swirl(grid16)).U))
    assert (book.d3r_u, book.r_d3u, book.r_d3r) == (0.0, 0.0, 0.0)
    assert not book.flagged


@pytest.mark.unit
def test_riesz_product_constant_of_zero(grid16):
    zero = ScalarField(grid16, np.zeros(grid16.shape))
    assert riesz_product_constant(zero, zero, VSpace()) == 0.0


@pytest.mark.unit
def test_bkm_of_a_beltrami_flow(grid16):
    # curl u = u with k0 = pi/L = 1.
    v = Beltrami().field(grid16)
    assert bkm_integrand(v) == pytest.approx(float(np.max(v.speed())), rel=1e-12)


@pytest.mark.unit
def test_time_integrals():
    assert accumulate([0.0, 1.0, 2.0], [1.0, 1.0, 1.0]) == pytest.approx(2.0)
    assert bkm_accumulate([0.0, 0.5], [2.0, 4.0]) == pytest.approx(1.5)
    assert l2linf_accumulate([0.0, 1.0], [1.0, 2.0]) == pytest.approx(2.5)
    assert accumulate([0.3], [7.0]) == 0.0
    with pytest.raises(SeriesError):
        accumulate([0.0, 0.0], [1.0, 1.0])
    with pytest.raises(ConfigError):
        accumulate([0.0, 1.0], [1.0])


@pytest.mark.unit
def test_decay_check(grid16):
    v = VectorField3(grid16, np.stack([np.ones(grid16.shape)] + [
        np.zeros(grid16.shape)] * 2))
    assert decay_check(v, 1.0) == pytest.approx(math.sqrt(3.0) * math.pi)
    with pytest.raises(DomainError):
        decay_check(v, math.pi)


@pytest.mark.unit
def test_monitor_snapshot(grid16):
    report = monitor_snapshot(Snapshot(swirl(grid16), 0.5, 1.0), NlcConfig())
    assert report.t == 0.5
    assert report.u3_origin == 1.0
    assert report.linf_speed == 1.0
    assert report.threshold == pytest.approx(1.5**-0.5)
    assert report.window == "unwindowed"
    assert report.satisfied == (report.functional <= report.threshold)
    assert report.lemma.laplacian_ok


@pytest.mark.unit
def test_monitor_run_keeps_going_past_bad_snapshots(tmp_path, grid16):
    v = swirl(grid16)
    write_snapshot(tmp_path / snapshot_name(0), v, 0.0, 1.0)
    write_snapshot(tmp_path / snapshot_name(1), v * 0.5, 0.1, 1.0)
    (tmp_path / snapshot_name(2)).write_bytes(b"NSCV")
    zero = VectorField3(grid16, np.zeros((3,) + grid16.shape))
    write_snapshot(tmp_path / snapshot_name(3), zero, 0.3, 1.0)

    paths = sorted(tmp_path.iterdir())
    result = monitor_run(paths, NlcConfig(), workers=2)

    assert [r.t for r in result.reports] == [0.0, 0.1]
    assert [(f.stage, f.code) for f in result.failures] == [("ingest", 2), ("frame", 3)]
    assert result.bkm_integral == pytest.approx(
        0.05 * (result.reports[0].bkm + result.reports[1].bkm)
    )
    assert result.l2linf_integral == pytest.approx(0.05 * (1.0 + 0.25))


@pytest.mark.unit
def test_monitor_run_needs_increasing_times(tmp_path, grid16):
    v = swirl(grid16)
    write_snapshot(tmp_path / snapshot_name(0), v, 0.2, 1.0)
    write_snapshot(tmp_path / snapshot_name(1), v, 0.1, 1.0)
    with pytest.raises(SeriesError):
        monitor_run(sorted(tmp_path.iterdir()), NlcConfig())


@pytest.mark.unit
def test_decay_radius_must_fit(grid16):
    cfg = NlcConfig(decay_radius=4.0)
    with pytest.raises(DomainError):
        monitor_snapshot(Snapshot(swirl(grid16), 0.0, 1.0), cfg)
