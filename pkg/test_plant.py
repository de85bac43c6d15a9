"""
Tests for the truth plant: RK4, seeded evolution, control admissibility and built-in fields
"""

import math

import numpy as np
import pytest

from app.core.exceptions import InadmissibleControlError, LeftChartError, ParameterError, ScenarioConfigError
from app.core.geometry import MetricSpec, StatePoint
from app.models.zones import box
from app.services.fields import available_fields, build_field
from app.services.integrators import integrate, step_count
from app.services.plant import ControlPoint, Disturbance, TruthPlant, check_admissible, evolve
from conftest import make_plant


def _c(x, params=()):
    return ControlPoint(StatePoint.of(x), params)


def test_rk4_is_fourth_order():
    def f(x, t):
        return x

    errors = []
    for dt in (0.1, 0.05, 0.025, 0.0125):
        _, states = integrate(f, 0.0, np.array([1.0]), 1.0, dt)
        errors.append(abs(states[-1, 0] - math.e))
    ratios = [a / b for a, b in zip(errors, errors[1:])]
    assert all(r >= 14.0 for r in ratios)
    order = np.polyfit(np.log([0.1, 0.05, 0.025, 0.0125]), np.log(errors), 1)[0]
    assert order >= 3.8


def test_step_count():
    assert step_count(0.0, 1.0, 0.3) == 4
    assert step_count(1.0, 1.0, 0.1) == 0
    with pytest.raises(ParameterError):
        step_count(1.0, 0.0, 0.1)
    with pytest.raises(ParameterError):
        step_count(0.0, 1.0, 0.0)


def test_static_plant_stays_put(static_plant):
    traj = evolve(static_plant, _c([1.5]), 0.0, 1.0, 0.1, seed=0)
    assert np.all(traj.states == 1.5)
    assert traj.start_time == 0.0
    assert traj.end_time == 1.0


def test_linear_plant_matches_exponential(linear_plant):
    traj = evolve(linear_plant, _c([1.0]), 0.0, 1.0, 0.01, seed=0)
    assert traj.final[0] == pytest.approx(math.e, rel=1e-9)
    assert traj.at_time(0.5)[0] == pytest.approx(math.exp(0.5), rel=1e-9)


def test_evolution_is_seeded():
    drift, fibration = build_field("constant", 2, {"velocity": [1.0, 0.0]})
    chart = box([-100.0, -100.0], [100.0, 100.0])
    plant = TruthPlant(drift, fibration, chart, MetricSpec.uniform(2), Disturbance((0.01, 0.0)))
    a = evolve(plant, _c([0.0, 0.0]), 0.0, 1.0, 0.1, seed=7)
    b = evolve(plant, _c([0.0, 0.0]), 0.0, 1.0, 0.1, seed=7)
    c = evolve(plant, _c([0.0, 0.0]), 0.0, 1.0, 0.1, seed=8)
    assert np.array_equal(a.states, b.states)
    assert not np.array_equal(a.states, c.states)
    # zero amplitude leaves the axis exact
    assert np.all(a.states[:, 1] == 0.0)


def test_disturbance_rejects_negative_amplitude():
    with pytest.raises(ParameterError):
        Disturbance((-0.1,))


def test_leaving_the_chart_raises():
    plant = make_plant("constant", chart_half_width=1.0, velocity=[1.0])
    with pytest.raises(LeftChartError) as e:
        evolve(plant, _c([0.0]), 0.0, 2.0, 0.1, seed=0)
    assert e.value.time == pytest.approx(1.1)
    assert e.value.state[0] > 1.0


def test_trajectory_extend_and_exact_lookup(linear_plant):
    first = evolve(linear_plant, _c([1.0]), 0.0, 0.5, 0.05, seed=0)
    second = evolve(linear_plant, _c(first.final), 0.5, 1.0, 0.05, seed=0)
    whole = first.extend(second)
    assert len(whole.times) == 21
    assert whole.index_of(0.5) == 10
    assert np.array_equal(whole.at_time(0.5), first.final)


def test_racing_control_admissibility():
    drift, fibration = build_field("racing", 4, {"agents": ("car1", "car2")})
    x = np.zeros(4)
    assert check_admissible(fibration, x, [100, 20, 40, 0, 0, 0])
    assert not check_admissible(fibration, x, [200, 20, 40, 0, 0, 0])
    assert not check_admissible(fibration, x, [100, 20, 40, 0, 0])
    assert fibration.slice_for("car2") == slice(3, 6)

    chart = box([-50.0, -10.0, -50.0, -10.0], [2100.0, 140.0, 2100.0, 140.0])
    plant = TruthPlant(drift, fibration, chart, MetricSpec.uniform(4))
    with pytest.raises(InadmissibleControlError) as e:
        evolve(plant, ControlPoint(StatePoint.of(x), (100, -1, 40, 0, 0, 0)), 0.0, 0.5, 0.05, seed=0)
    assert "accel" in e.value.predicate


def test_racing_field_reaches_target_speed():
    drift, fibration = build_field("racing", 4, {"agents": ("car1", "car2")})
    chart = box([-50.0, -10.0, -50.0, -10.0], [2100.0, 140.0, 2100.0, 140.0])
    plant = TruthPlant(drift, fibration, chart, MetricSpec.uniform(4))
    traj = evolve(plant, _c([0, 0, 0, 0], (100, 20, 40, 0, 0, 40)), 0.0, 6.0, 0.05, seed=0)
    assert traj.final[1] == pytest.approx(100.0, abs=0.5)
    assert traj.at_time(2.5)[1] == pytest.approx(50.0, abs=0.5)
    assert traj.final[2] == 0.0


def test_probe_field_burns_fuel():
    drift, fibration = build_field("probe", 7, {})
    x = np.array([1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0])
    v = drift(x, 0.0) + fibration.control_field(x, np.array([0.0, 0.5, 0.0]), 0.0)
    assert v[6] == pytest.approx(-0.5)
    assert v[3] == pytest.approx(-1.0)
    assert v[4] == pytest.approx(0.5)


def test_unknown_field_is_a_config_error():
    assert {"static", "linear", "constant", "racing", "boat", "probe"} <= set(available_fields())
    with pytest.raises(ScenarioConfigError):
        build_field("warp", 1, {})
    with pytest.raises(ScenarioConfigError):
        build_field("linear", 1, {"b": 2.0})
    with pytest.raises(ScenarioConfigError):
        build_field("racing", 3, {})
