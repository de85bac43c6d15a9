"""
Tests for the boat scenario: warning zones, the motor controller and island strikes
"""

import numpy as np
import pytest

from app.core.exceptions import ParameterError
from app.core.geometry import MetricSpec
from app.models.schemas import BoatParams
from app.services.orders import Command, SetMotor, SetTargetSpeed
from app.services.scenarios.boat import BoatController, BoatZones
from app.services.scenarios.engine import run_scenario, verify_scenario

# starts inside the lethal wedge in front of the island
LETHAL_STARTS = [(88.0, 0.0), (89.0, 1.0), (88.0, -1.0), (87.0, 0.5), (89.0, -2.0)]


def test_zones_partition_the_chart():
    z = BoatZones(BoatParams())
    m = MetricSpec.uniform(2)
    xs, ys = np.meshgrid(np.arange(0.3, 200.0, 1.7), np.arange(-59.9, 60.0, 1.3), indexing="ij")
    points = np.stack([xs.ravel(), ys.ravel()], axis=1)
    zones = [z.lethal, z.rear, z.north, z.south, z.open, z.finish]
    hits = np.stack([zone.contains_many(points, m) for zone in zones], axis=1)
    assert np.all(hits.sum(axis=1) == 1)
    assert np.all(z.lethal_north.contains_many(points, m) | z.lethal_south.contains_many(points, m) == hits[:, 0])


def test_lethal_wedge_covers_the_lethal_starts():
    z = BoatZones(BoatParams())
    m = MetricSpec.uniform(2)
    for start in LETHAL_STARTS:
        assert z.lethal.contains(list(start), m), start
    assert not z.lethal.contains([40.0, 0.0], m)


def test_guard_radius_allows_for_measurement_error():
    p = BoatParams()
    assert p.guard_radius == pytest.approx(10.0 + 1.0 + np.sqrt(2.0))


def test_either_tosses_one_coin_per_order():
    controller = BoatController(seed=0)
    either = Command(SetMotor(setting="either"), (80.0, 0.0), 10.0)
    first = controller.params(either, None, (0.0,))
    assert first in ((1.0,), (-1.0,))
    assert controller.params(either, None, (0.0,)) == first
    # a running motor is kept
    assert controller.params(either, None, (-first[0],)) == (-first[0],)
    assert controller.params(Command(SetMotor(setting="off"), (0.0, 0.0), 0.0), None, first) == (0.0,)
    assert controller.params(None, None, first) == first


def test_either_coin_is_seeded():
    either = Command(SetMotor(setting="either"), (80.0, 0.0), 10.0)
    tosses = [BoatController(seed=s).params(either, None, (0.0,)) for s in range(20)]
    assert tosses == [BoatController(seed=s).params(either, None, (0.0,)) for s in range(20)]
    assert {(1.0,), (-1.0,)} == set(tosses)


def test_boat_rejects_speed_orders():
    controller = BoatController(seed=0)
    with pytest.raises(ParameterError):
        controller.params(Command(SetTargetSpeed(speed=10.0), (0.0, 0.0), 0.0), None, (0.0,))


def test_default_start_reaches_the_finish(boat_spec):
    report = run_scenario(boat_spec)
    assert report.ok
    boat = report.agents["boat"]
    assert boat.reached_end
    assert boat.finish_time == pytest.approx(140.0, abs=2.0)


@pytest.mark.parametrize("start", LETHAL_STARTS)
def test_lethal_starts_strike_the_island(boat_spec, start):
    for seed in range(3):
        report = run_scenario(boat_spec, seed=seed, x0=start)
        assert not report.ok
        assert {v["violation"] for v in report.truth_violations} == {"island-strike"}


@pytest.mark.slow
def test_western_starts_clear_the_island(boat_spec):
    starts = [(float(x), float(y)) for x in range(20, 61, 10) for y in range(-20, 21, 4)]
    assert len(starts) == 55
    for start in starts:
        report = run_scenario(boat_spec, seed=0, x0=start)
        assert not report.truth_violations, start
        assert report.agents["boat"].reached_end, start


def test_supervisor_is_complete_but_cyclic(boat_spec):
    outcome = verify_scenario(boat_spec, grid_density=1.0)
    assert all(r["complete"] for r in outcome.report.completeness)
    assert not outcome.result.verified
    assert outcome.result.kind == "cycle"
