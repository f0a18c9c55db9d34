from __future__ import annotations

import math

import numpy as np
import pytest

from nlc_monitor.commands.verify import VerifyOptions, verify_solver
from nlc_monitor.core.errors import ConfigError, StepError
from nlc_monitor.core.grid import VectorField3
from nlc_monitor.core.snapshot import read_snapshot
from nlc_monitor.solver.initial import (
    Beltrami,
    GaussianVortex,
    RandomBandLimited,
    TaylorGreen,
    base_wavenumber,
    parse_init,
)
from nlc_monitor.solver.spectral import (
    SpectralState,
    dealias_mask,
    energy,
    max_divergence,
    max_stable_dt,
    nonlinear_term,
    pressure_from_velocity,
    project_div_free,
    run,
    step,
)


@pytest.mark.unit
def test_parse_init():
    assert parse_init("beltrami") == Beltrami()
    assert parse_init("tg") == TaylorGreen()
    assert parse_init("gaussian") == GaussianVortex()
    assert parse_init("random:3") == RandomBandLimited(3)
    assert parse_init("random") == RandomBandLimited(0)
    for text in ("random:x", "abc"):
        with pytest.raises(ConfigError):
            parse_init(text)


@pytest.mark.unit
def test_initial_fields_are_divergence_free(grid16):
    for init in (Beltrami(), TaylorGreen(), RandomBandLimited(5), GaussianVortex()):
        state = SpectralState.from_field(init.field(grid16))
        assert max_divergence(state) < 1e-10, init


@pytest.mark.unit
def test_random_field_is_normalised_and_band_limited(grid16):
    v = RandomBandLimited(1).field(grid16)
    assert float(np.max(v.speed())) == pytest.approx(1.0)
    assert np.array_equal(v.values, RandomBandLimited(1).field(grid16).values)
    with pytest.raises(ConfigError):
        RandomBandLimited(1, kmax=5).field(grid16)


@pytest.mark.unit
def test_projection_removes_divergence(grid16):
    rng = np.random.default_rng(0)
    values = rng.standard_normal((3,) + grid16.shape)
    state = SpectralState.from_field(VectorField3(grid16, values))
    assert max_divergence(state) > 1.0
    projected = SpectralState(grid16, project_div_free(state.uhat, grid16))
    assert max_divergence(projected) < 1e-10


@pytest.mark.unit
def test_dealias_mask_keeps_two_thirds(grid16):
    mask = dealias_mask(grid16)
    # |m| <= 5 on every axis.
    assert int(mask.sum()) == 11**3


@pytest.mark.unit
def test_beltrami_flow_has_no_nonlinearity(grid16):
    state = SpectralState.from_field(Beltrami().field(grid16))
    nonlinear = np.fft.ifftn(nonlinear_term(state.uhat, grid16), axes=(1, 2, 3))
    assert float(np.max(np.abs(nonlinear))) < 1e-12


@pytest.mark.unit
def test_beltrami_decays_exactly(grid16):
    init = Beltrami()
    state = SpectralState.from_field(init.field(grid16))
    for _ in range(10):
        state = step(state, 1e-3)
    exact = init.exact(grid16, 1e-2)
    assert state.t == pytest.approx(1e-2)
    np.testing.assert_allclose(state.to_field().values, exact.values, atol=1e-9)


@pytest.mark.unit
def test_beltrami_energy(grid16):
    state = SpectralState.from_field(Beltrami().field(grid16))
    # Each component is a sum of two unit modes: mean |u|^2 = 3.
    assert energy(state) == pytest.approx(1.5 * (2 * math.pi) ** 3)
    assert base_wavenumber(grid16) == 1.0


@pytest.mark.unit
def test_energy_does_not_grow(grid16):
    state = SpectralState.from_field(RandomBandLimited(2).field(grid16))
    before = energy(state)
    for _ in range(5):
        state = step(state, 0.01)
        after = energy(state)
        assert after <= before * (1 + 1e-14)
        before = after


@pytest.mark.unit
def test_step_rejects_unstable_time_steps(grid16):
    state = SpectralState.from_field(TaylorGreen().field(grid16))
    assert max_stable_dt(state) == pytest.approx(0.5 * grid16.h, rel=1e-12)
    with pytest.raises(StepError):
        step(state, 0.0)
    with pytest.raises(StepError):
        step(state, grid16.h)
    zero = SpectralState(grid16, np.zeros((3,) + grid16.shape, dtype=complex))
    assert max_stable_dt(zero) == math.inf


@pytest.mark.unit
def test_pressure_is_mean_zero(grid16):
    state = SpectralState.from_field(TaylorGreen().field(grid16))
    assert abs(pressure_from_velocity(state).mean()) < 1e-14


@pytest.mark.unit
def test_run_writes_the_requested_snapshots(tmp_path, grid16):
    result = run(TaylorGreen(), grid16, 0.01, 0.05, 0.02, tmp_path)
    assert not result.partial
    assert result.times == pytest.approx((0.0, 0.02, 0.04, 0.05))
    assert [p.name for p in result.paths] == [
        f"snapshot_{i:05d}.nscv" for i in range(4)
    ]
    last = read_snapshot(result.paths[-1])
    assert last.t == result.times[-1]
    assert last.nu == 1.0


@pytest.mark.unit
def test_infinite_interval_keeps_first_and_last(tmp_path, grid16):
    result = run(TaylorGreen(), grid16, 0.01, 0.03, math.inf, tmp_path)
    assert result.times == pytest.approx((0.0, 0.03))


@pytest.mark.unit
@pytest.mark.parametrize(
    ("dt", "t_end", "every"),
    [(0.01, 0.055, 0.02), (0.01, 0.05, 0.015), (0.0, 0.05, 0.01)],
)
def test_run_validates_the_schedule(tmp_path, grid16, dt, t_end, every):
    with pytest.raises(ConfigError):
        run(TaylorGreen(), grid16, dt, t_end, every, tmp_path)


@pytest.mark.unit
def test_failed_step_ends_a_partial_series(tmp_path, grid16):
    result = run(Beltrami(), grid16, 1.0, 2.0, math.inf, tmp_path)
    assert result.partial
    assert result.times == (0.0,)
    assert "CFL" in result.error


@pytest.mark.e2e
def test_solver_checks_at_default_options():
    checks = {c.name: c for c in verify_solver(VerifyOptions())}
    assert set(checks) == {"beltrami_error", "max_divergence", "energy_rise",
                           "dt_halving_ratio"}
    assert checks["beltrami_error"].value <= 1e-6
    assert checks["max_divergence"].value <= 1e-11
    assert 14.0 <= checks["dt_halving_ratio"].value <= 18.0
    assert all(c.judged and c.passed for c in checks.values())
