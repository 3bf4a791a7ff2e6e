import numpy as np
import pytest

from conftest import sawtooth_spec
from weaklink.circuit import CircuitSpec, JJLink
from weaklink.errors import VanishedWellError
from weaklink.sweep import ResonanceCurve, SweepPlan, hysteresis_pair, run_sweep


def test_identical_plans_give_identical_curves(jj_spec):
    plan = SweepPlan.ramp(jj_spec, 1.4, 1.7, 0.01, 0)
    a, b = run_sweep(plan), run_sweep(plan)
    assert np.array_equal(a.f_bare, b.f_bare)
    assert np.array_equal(a.jump_fluxes, b.jump_fluxes)
    assert np.array_equal(a.well_index, b.well_index)


def test_reversal_without_jump_retraces(jj_spec):
    fwd = run_sweep(SweepPlan.ramp(jj_spec, 0.0, 1.2, 0.02, 0))
    back = run_sweep(SweepPlan.ramp(jj_spec, 1.2, 0.0, 0.02, 0))
    assert not fwd.jumped.any() and not back.jumped.any()
    assert np.allclose(fwd.f_bare, back.f_bare[::-1], rtol=0, atol=1e-10)


def test_negligible_corrugation_gives_flat_curve():
    spec = CircuitSpec(0.0074, 0.97, 568.0, 452.0, JJLink(1e-6, 0.0))
    curve = run_sweep(SweepPlan.ramp(spec, -1.0, 1.0, 0.05))
    # the lone well is relabelled as its centre crosses w = pi; the frequency does not notice
    assert np.ptp(curve.f_bare) < 1e-8 * curve.f_bare.mean()


def test_missing_initial_well_raises(jj_spec):
    with pytest.raises(VanishedWellError):
        run_sweep(SweepPlan.ramp(jj_spec, 0.0, 0.1, 0.01, 4))


def test_plan_validation(jj_spec):
    with pytest.raises(ValueError):
        SweepPlan(np.array([0.0, 0.2, 0.1]), jj_spec)
    with pytest.raises(ValueError):
        SweepPlan(np.array([]), jj_spec)
    with pytest.raises(ValueError):
        SweepPlan(np.array([0.0, 0.1]), jj_spec, "lowest")


def test_curve_rejects_unflagged_well_change():
    with pytest.raises(ValueError):
        ResonanceCurve([0, 1], [1.0, 1.0], [0, 1], [False, False], "up")
    with pytest.raises(ValueError):
        ResonanceCurve([0, 1], [1.0, 1.0], [0, 2], [False, True], "up")


def test_jump_localised_and_lands_in_neighbour(jj_spec):
    curve = run_sweep(SweepPlan.ramp(jj_spec, 1.5, 1.6, 0.002, 0))
    assert curve.jump_fluxes.size == 1
    i = int(np.flatnonzero(curve.jumped)[0])
    assert curve.flux[i - 1] < curve.jump_fluxes[0] <= curve.flux[i]
    assert curve.well_index[i] == 1
    # the semiclassical estimate overshoots the measured switching flux
    assert curve.jump_fluxes[0] > 1.56


def test_downturn_before_jump(jj_spec):
    curve = run_sweep(SweepPlan.ramp(jj_spec, 0.0, 1.566, 0.002, 0))
    assert curve.f_bare[0] - curve.f_bare[-1] > 2e-3


def test_hysteresis_mirror_and_spacing():
    up, down = hysteresis_pair(sawtooth_spec(), -2.5, 2.5, 2501)
    assert np.allclose(np.sort(up.jump_fluxes), np.sort(-down.jump_fluxes), atol=1e-3)
    for c in (up, down):
        gaps = np.abs(np.diff(c.jump_fluxes))
        assert np.allclose(gaps, 1.0, atol=1e-3)


def test_first_jump_beyond_period(jj_spec):
    # starting from the well centred at zero flux, the first switch needs more than one period
    curve = run_sweep(SweepPlan.ramp(jj_spec, -1.5, 2.7, 0.002, 0))
    assert curve.jump_fluxes[0] - 0.0 > 1.0
    assert curve.jump_fluxes[1] - curve.jump_fluxes[0] == pytest.approx(1.0, abs=1e-3)


def test_sweep_rejects_phase_slip_model(qps_spec):
    with pytest.raises(ValueError):
        run_sweep(SweepPlan.ramp(qps_spec, 0.0, 0.1, 0.05, 0))


def test_segment_keeps_jumps_inside(jj_spec):
    curve = run_sweep(SweepPlan.ramp(jj_spec, 1.5, 1.6, 0.01, 0))
    seg = curve.segment(1.5, 1.55)
    assert seg.jump_fluxes.size == 0 and len(seg) == 6
