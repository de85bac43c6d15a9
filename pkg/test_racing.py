"""
Tests for the two-car racing scenario: derived constants, warnings and full runs
"""

import dataclasses

import pytest
from pydantic import ValidationError

from app.models.schemas import RacingParams, RacingScenario
from app.services.scenarios import racing
from app.services.scenarios.base import InitialConditions
from app.services.scenarios.engine import run_scenario
from app.services.scenarios.loader import build_spec
from app.services.trace import state_audit


def test_triples_and_modes(racing_spec):
    system = racing_spec.agent("car1").system
    assert len(system.triples) == 11
    assert set(system.modes) == {"Sta", "Str", "Ben", "Ch.rt", "Ch.gw", "End"}
    starts = [str(t) for t, tr in system.triples.items() if tr.is_start]
    ends = [str(t) for t, tr in system.triples.items() if tr.is_end]
    assert starts == ["Sta,1"]
    assert ends == ["End,1"]


def test_second_car_sees_itself_first(racing_spec):
    car2 = racing_spec.agent("car2").system
    mode = car2.modes["Str"]
    assert mode.to_mode_state.apply([10.0, 50.0, 20.0, 60.0]).tolist() == [20.0, 60.0, 10.0, 50.0]


def test_race_through_time():
    assert racing.race_through_time(0.0, 0.0, 100.0, 5.0) == 0.0
    # 100 km/h after a 5 s ramp from rest covers 250/3.6 m while ramping
    ramp = 0.5 * 100.0 / 3.6 * 5.0
    assert racing.race_through_time(ramp, 0.0, 100.0, 5.0) == pytest.approx(5.0)
    assert racing.race_through_time(ramp + 100.0 / 3.6, 0.0, 100.0, 5.0) == pytest.approx(6.0)
    assert racing.race_through_time(100.0, 0.0, 0.0, 5.0) == float("inf")


def test_chicane_wait_bound_fits_the_timelimit():
    p = RacingParams()
    bound = racing.chicane_wait_bound(p)
    assert bound == pytest.approx(22.4, abs=0.1)
    assert bound <= p.timelimit


def test_catch_check():
    p = RacingParams()
    assert racing.catch_check(p)
    assert racing.catch_check(p, other_speed=0.0)
    late = p.model_copy(update={"c1": 980.0})
    assert not racing.catch_check(late)


def test_ordering_chain_is_enforced():
    with pytest.raises(ValidationError) as e:
        RacingParams(k3=650.0)
    assert "ordering chain" in str(e.value)


def test_braking_rule_is_enforced():
    with pytest.raises(ValidationError) as e:
        RacingParams(max_brake=5.0)
    assert "braking rule" in str(e.value)


def test_short_timelimit_warns():
    spec = build_spec(RacingScenario(params=RacingParams(timelimit=10)))
    assert any("timelimit" in w for w in spec.warnings)
    assert not build_spec(RacingScenario()).warnings


def test_controller_turns_orders_into_limits():
    p = RacingParams()
    controller = racing.RacingController(p)
    assert controller.params(None, None, (1.0, 2.0, 3.0)) == (1.0, 2.0, 3.0)
    assert controller.halted([0.0, 1.5, 0.0, 0.0])
    assert not controller.halted([0.0, 2.5, 0.0, 0.0])


OWN = {"car1": (0, 1), "car2": (2, 3)}


def _bend_overspeeds(report, p):
    """Measured points in a bend above v_bend + 2 eps."""
    hits = []
    for e in report.events_of("measure"):
        ix, iv = OWN[e.agent]
        x, v = e.payload["value"][ix], e.payload["value"][iv]
        if any(a < x <= b for a, b in p.bends) and v >= p.v_bend + 2 * p.epsilon:
            hits.append((e.agent, e.sim_time, x, v))
    return hits


def _chicane_overlaps(report):
    return [e for e in report.events_of("violation") if e.payload.get("violation") == "chicane-co-occupancy"]


@pytest.mark.slow
def test_random_races_finish_cleanly(racing_spec):
    p = racing_spec.config.params
    timed_out = []
    for seed in range(100):
        report = run_scenario(racing_spec, seed=seed)
        assert not report.errors, (seed, report.errors)
        assert _bend_overspeeds(report, p) == [], seed
        assert _chicane_overlaps(report) == [], seed
        assert not report.truth_violations, (seed, report.truth_violations)
        assert all(a.reached_end for a in report.agents.values()), seed
        assert report.ok
        assert state_audit(report.events) == [], seed
        assert not report.events_of("timer", "car2")
        if report.events_of("timer", "car1"):
            timed_out.append(seed)
    # close releases lead to mutual give-way, which only car 1's timelimit breaks
    assert timed_out


def test_mutual_give_way_is_broken_by_the_timer(racing_spec):
    # car 2 leaves 5 s late and reaches the chicane while car 1 waits for it
    spec = dataclasses.replace(
        racing_spec,
        initial=lambda rng: InitialConditions((5.0, 0.0, 5.0, 0.0), (0.0,) * 6, {"car1": 0.0, "car2": 5.0}),
    )
    report = run_scenario(spec, seed=0)
    assert report.agents["car1"].timers >= 1
    assert report.agents["car2"].timers == 0
    assert report.events_of("timer", "car1")
    assert all(a.reached_end for a in report.agents.values())
    assert not report.truth_violations
    finish = {name: a.finish_time for name, a in report.agents.items()}
    assert finish["car1"] < finish["car2"]
