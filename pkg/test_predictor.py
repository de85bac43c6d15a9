"""
Tests for computed behaviour: calculate-path, the predict loops, tubes and the (lambda, epsilon, eta) checker
"""

import math

import numpy as np
import pytest

from app.core.exceptions import ParameterError, StepError
from app.core.geometry import StatePoint
from app.models.zones import interval
from app.services.oracle import OracleConfig, OracleSession
from app.services.plant import ControlPoint
from app.services.predictor import (
    EMPIRICAL_LABEL,
    DisjointPath,
    SimulatedClock,
    build_tube,
    calculate_path,
    check_lee_property,
    export_segments,
    gronwall_bound,
    measure_control_algorithm_predict,
    measure_control_predict,
    measure_predict,
)
from app.services.trace import TraceRecorder
from conftest import make_model

EPS = 0.01
LAM = 0.1


def _session(plant, seed=0, x0=1.0):
    return OracleSession(plant, OracleConfig(EPS, LAM, seed), [x0], [], fine_dt=0.01)


def _fixed(x=1.0):
    return ControlPoint(StatePoint.of([x]), ())


def test_calculate_path_on_a_static_model(static_plant):
    model = make_model(static_plant)
    seg = calculate_path(model, StatePoint.of([2.0]), _fixed(), 3, LAM)
    assert seg.start_time == pytest.approx(0.3)
    assert seg.end_time == pytest.approx(0.4)
    assert np.all(seg.samples == 2.0)
    assert seg.control.base == StatePoint.of([2.0])


def test_calculate_path_checks_the_integrator_step(static_plant):
    model = make_model(static_plant, step=0.2)
    with pytest.raises(ParameterError):
        calculate_path(model, StatePoint.of([0.0]), _fixed(), 0, LAM)


def test_segments_own_half_open_intervals(linear_plant):
    model = make_model(linear_plant)
    segs = tuple(calculate_path(model, StatePoint.of([float(k)]), _fixed(), k, LAM) for k in range(3))
    path = DisjointPath(segs, LAM)
    assert path.segment_for(0.1).start_index == 1
    assert path.segment_for(0.0999).start_index == 0
    assert path.segment_for(0.3).start_index == 2
    # neighbours need not agree at the shared end
    assert path.at(0.1)[0] == pytest.approx(1.0)
    with pytest.raises(ParameterError):
        DisjointPath((), LAM)


def test_measure_predict_rejects_zero_steps(static_plant):
    with pytest.raises(ParameterError):
        measure_predict(0, _session(static_plant), make_model(static_plant), _fixed())


def test_measure_predict_builds_one_segment_per_step(static_plant):
    session = _session(static_plant)
    path = measure_predict(5, session, make_model(static_plant), _fixed())
    assert len(path.segments) == 5
    assert path.start_time == 0.0
    assert path.end_time == pytest.approx(0.5)
    assert session.time == pytest.approx(0.5)


@pytest.mark.slow
@pytest.mark.parametrize("plant_fixture", ["static_plant", "linear_plant"])
def test_truth_stays_inside_the_tube(plant_fixture, request):
    plant = request.getfixturevalue(plant_fixture)
    lipschitz = plant.drift.lipschitz_hint
    eta = EPS * math.exp(lipschitz * LAM) + 10 * 0.01**4
    model = make_model(plant)
    for seed in range(200):
        session = _session(plant, seed)
        path = measure_predict(10, session, model, _fixed())
        tube = build_tube(path, eta)
        truth = session.truth()
        for t, x in zip(truth.times, truth.states):
            assert tube.contains(float(t), x, plant.metric), f"seed {seed} left the tube at t={t}"


def test_export_segments(static_plant):
    path = measure_predict(3, _session(static_plant), make_model(static_plant), _fixed())
    recorder = TraceRecorder()
    assert export_segments(path, recorder) == 3
    segments = recorder.of_kind("segment")
    assert [e.payload["start_index"] for e in segments] == [0, 1, 2]
    assert segments[1].sim_time == pytest.approx(0.1)


def test_chooser_must_control_the_measured_state(static_plant):
    session = _session(static_plant)
    with pytest.raises(StepError) as e:
        measure_control_predict(3, session, make_model(static_plant), lambda m: _fixed(99.0))
    assert e.value.step_index == 0


def test_measure_control_predict_records_every_step(static_plant):
    session = _session(static_plant)
    run = measure_control_predict(4, session, make_model(static_plant), lambda m: ControlPoint(m.value, ()))
    assert len(run.controls) == len(run.measurements) == len(run.path.segments) == 4
    assert all(b.base == m.value for b, m in zip(run.controls, run.measurements))


def test_timed_chooser_overruns_are_flagged(static_plant):
    session = _session(static_plant)

    def slow(m, clock):
        clock.sleep(0.05)
        return ControlPoint(m.value, ())

    run, timing = measure_control_algorithm_predict(
        3, session, make_model(static_plant), slow, budget=0.02, clock=SimulatedClock()
    )
    assert len(run.path.segments) == 3
    assert timing.overruns == (0, 1, 2)
    assert not timing.within_budget
    assert timing.clock == "SimulatedClock"

    with pytest.raises(ParameterError):
        measure_control_algorithm_predict(3, _session(static_plant), make_model(static_plant), slow, budget=0.2)


def test_lee_static_plant_holds_with_twice_epsilon(static_plant):
    report = check_lee_property(
        make_model(static_plant), static_plant, _fixed(), LAM, EPS, 2 * EPS, interval(0.5, 1.5), 200, seed=0
    )
    assert report.verdict
    assert report.eta_observed < EPS
    assert report.label == EMPIRICAL_LABEL
    assert report.analytic_bound == pytest.approx(EPS)


def test_lee_linear_plant_respects_gronwall(linear_plant):
    report = check_lee_property(
        make_model(linear_plant), linear_plant, _fixed(), LAM, EPS, EPS, interval(0.5, 1.5), 1000, seed=1
    )
    bound = gronwall_bound(EPS, 1.0, LAM)
    assert report.analytic_bound == pytest.approx(bound)
    assert 0.5 * EPS <= report.eta_observed <= bound + 1e-8
    assert not report.verdict


def test_lee_larger_sample_sets_contain_smaller(linear_plant):
    model = make_model(linear_plant)
    small = check_lee_property(model, linear_plant, _fixed(), LAM, EPS, 1.0, interval(0.5, 1.5), 20, seed=3)
    large = check_lee_property(model, linear_plant, _fixed(), LAM, EPS, 1.0, interval(0.5, 1.5), 100, seed=3)
    assert large.eta_observed >= small.eta_observed


def test_lee_argument_checks(static_plant):
    model = make_model(static_plant)
    with pytest.raises(ParameterError):
        check_lee_property(model, static_plant, _fixed(), LAM, EPS, 0.1, interval(0.5, 1.5), 0, seed=0)
    with pytest.raises(ParameterError):
        check_lee_property(model, static_plant, _fixed(), LAM, -1.0, 0.1, interval(0.5, 1.5), 10, seed=0)