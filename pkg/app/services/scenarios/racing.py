"""
Two cars on a track with two bends and a shared chicane.

State is (x1, v1, x2, v2) with positions in m and speeds in km/h. Both cars
use the same triples over their own mode coordinates (x_own, v_own, x_other,
v_other); car 2 gets there through a permutation of X.
"""

import logging
import math
from typing import List, Optional, Tuple

import numpy as np

from app.core.exceptions import ParameterError
from app.core.geometry import MetricSpec
from app.models.schemas import RacingParams, RacingScenario
from app.models.zones import BoxZone, box, union
from app.services.fields import KMH_TO_MS, build_field
from app.services.modes import IdentityMap, ModeSpec, PermutationMap, Triple, TripleId
from app.services.orders import BrakeToHalt, OrdersProgram, RepeatUntil, SetTargetSpeed, Wait
from app.services.plant import TruthPlant
from app.services.predictor import ModelSpec
from app.services.scenarios.base import AgentSpec, InitialConditions, ScenarioSpec, TruthCheck, build_system

logger = logging.getLogger(__name__)

AXES = ["x1", "v1", "x2", "v2"]
CARS = ("car1", "car2")
MODE_MAPS = {"car1": IdentityMap(), "car2": PermutationMap(order=(2, 3, 0, 1))}
INF = math.inf


def race_through_time(distance: float, v0_kmh: float, v_target_kmh: float, ramp_s: float) -> float:
    """Seconds to cover distance when ramping linearly from v0 to v_target in ramp_s, then cruising."""
    if distance <= 0:
        return 0.0
    v0, vt = v0_kmh * KMH_TO_MS, v_target_kmh * KMH_TO_MS
    if vt <= 0 and v0 <= 0:
        return math.inf
    if ramp_s <= 0 or vt <= v0:
        return distance / max(v0, vt)
    a = (vt - v0) / ramp_s
    ramp_distance = 0.5 * (v0 + vt) * ramp_s
    if distance <= ramp_distance:
        return (-v0 + math.sqrt(v0 * v0 + 2 * a * distance)) / a
    return ramp_s + (distance - ramp_distance) / vt


def chicane_wait_bound(p: RacingParams) -> float:
    """Time for a car starting from rest at g1-1 m to clear end_chicane+2 m on the exit profile."""
    return race_through_time((p.end_chicane + 2) - (p.g1 - 1), 0.0, p.exit_speed, p.ramp_s)


def catch_check(p: RacingParams, other_speed: Optional[float] = None) -> bool:
    """Whether the other car, at c1+2 m and full speed, stays short of begin_chicane-2 m
    until this car, from rest at d2-2 m, has cleared end_chicane+2 m."""
    v_other = p.v_max if other_speed is None else other_speed
    if v_other <= 0:
        return True
    t_own = race_through_time((p.end_chicane + 2) - (p.d2 - 2), 0.0, p.exit_speed, p.ramp_s)
    t_other = ((p.begin_chicane - 2) - (p.c1 + 2)) / (v_other * KMH_TO_MS)
    return t_other > t_own


class RacingController:
    """Turns speed orders into (target, acceleration limit, braking limit)."""

    def __init__(self, p: RacingParams):
        self.p = p

    def initial_params(self) -> Tuple[float, ...]:
        return (0.0, 0.0, 0.0)

    def params(self, command, state, current):
        if command is None:
            return current
        a = command.action
        if isinstance(a, SetTargetSpeed):
            v_set = command.issued_state[1]
            if a.ramp_s == 0 or a.speed <= v_set:
                rate = self.p.max_accel
            else:
                rate = min(self.p.max_accel, (a.speed - v_set) / a.ramp_s)
            return (min(a.speed, self.p.v_max), rate, self.p.max_brake)
        if isinstance(a, BrakeToHalt):
            return (0.0, 0.0, self.p.max_brake)
        raise ParameterError(f"a car cannot execute '{a.action}'")

    def halted(self, state) -> bool:
        return float(state[1]) <= 2 * self.p.epsilon


class _Zones:
    """Zone builders in mode coordinates (x_own, v_own, x_other, v_other)."""

    def __init__(self, p: RacingParams):
        self.p = p
        self.s = 2 * p.epsilon

    def speed(self):
        return (-self.s, self.p.v_max + self.s)

    def position(self):
        return (-self.s, self.p.L + self.s)

    def own(self, lo, hi, lo_open=False, hi_open=False, other=None) -> BoxZone:
        vlo, vhi = self.speed()
        olo, ohi = other if other is not None else self.position()
        return box(
            [lo, vlo, olo, vlo],
            [hi, vhi, ohi, vhi],
            [lo_open, False, False, False],
            [hi_open, False, False, False],
        )

    def other_at_least(self, x) -> BoxZone:
        return box([-INF, -INF, x, -INF], [INF, INF, INF, INF])

    def avoid(self):
        p = self.p
        parts = [
            box([a, p.v_bend, -INF, -INF], [b, INF, INF, INF], [False, True, False, False], None)
            for a, b in p.bends
        ]
        parts.append(box([p.begin_chicane, -INF, p.begin_chicane, -INF], [p.end_chicane, INF, p.end_chicane, INF]))
        return union(*parts)


def _orders(*steps) -> OrdersProgram:
    return OrdersProgram(steps=list(steps))


def build_agent_system(p: RacingParams, car: str, remove=()):
    z = _Zones(p)
    s = z.s
    (b1_lo, b1_hi), (b2_lo, b2_hi) = p.bends[0], p.bends[1]
    start_lo, start_hi = p.start_zone
    chicane_out = p.end_chicane + 2
    gw_timelimit = p.timelimit if car == "car1" else None

    def tid(text):
        return TripleId.parse(text)

    cruise = _orders(SetTargetSpeed(speed=p.v_max))
    bend = _orders(SetTargetSpeed(speed=p.bend_speed))
    exit_ramp = SetTargetSpeed(speed=p.exit_speed, ramp_s=p.ramp_s)
    give_way = _orders(
        BrakeToHalt(),
        RepeatUntil(until=z.other_at_least(chicane_out), body=[Wait(seconds=1.0)], timelimit=gw_timelimit),
        exit_ramp,
    )
    past = (chicane_out, p.L + s)
    short = (-s, p.begin_chicane - 2)
    ch_post_x = (chicane_out, p.end_chicane + 60)

    triples = [
        Triple(tid("Sta,1"), z.own(start_lo, start_hi), _orders(), z.own(start_lo, start_hi), is_start=True),
        Triple(tid("Str,1"), z.own(-s, b1_lo - 50), cruise, z.own(b1_lo - 100, b1_lo - 60, True, True)),
        Triple(tid("Ben,1"), z.own(b1_lo - 110, b1_hi + s), bend, z.own(b1_hi + s, b1_hi + 40)),
        Triple(tid("Str,2"), z.own(b1_hi, p.d2), _orders(exit_ramp), z.own(p.e1, p.e2, True, True)),
        Triple(tid("Ch.rt,1"), z.own(p.d1, p.d2, other=past), _orders(exit_ramp), z.own(*ch_post_x, other=past)),
        Triple(
            tid("Ch.gw,1"),
            z.own(p.d1, p.d2, other=(p.g1, p.g2)),
            give_way,
            union(z.own(*ch_post_x, other=short), z.own(*ch_post_x, other=past)),
        ),
        Triple(tid("Ch.rt,2"), z.own(p.d1, p.d2, other=(-s, p.c1)), _orders(exit_ramp), z.own(*ch_post_x, other=short)),
        Triple(tid("Str,3"), z.own(p.end_chicane, b2_lo - 90), cruise, z.own(b2_lo - 100, b2_lo - 60, True, True)),
        Triple(tid("Ben,2"), z.own(b2_lo - 110, b2_hi + s), bend, z.own(b2_hi + s, b2_hi + 40)),
        Triple(tid("Str,4"), z.own(b2_hi, p.finish + 65), cruise, z.own(p.finish + 5, p.finish + 45, True, True)),
        Triple(tid("End,1"), z.own(p.finish, p.L + s), _orders(BrakeToHalt()), z.own(p.finish, p.L + s), is_end=True),
    ]
    edges = [
        (tid("Sta,1"), tid("Str,1"), z.own(start_lo - s, start_hi + s)),
        (tid("Str,1"), tid("Ben,1"), z.own(b1_lo - 105, b1_lo - 55)),
        (tid("Ben,1"), tid("Str,2"), z.own(b1_hi + s, b1_hi + 45)),
        (tid("Str,2"), tid("Ch.rt,1"), z.own(p.h1, p.h2, other=(p.k3, p.L + s))),
        (tid("Str,2"), tid("Ch.gw,1"), z.own(p.h1, p.h2, other=(p.k1, p.k4))),
        (tid("Str,2"), tid("Ch.rt,2"), z.own(p.h1, p.h2, other=(-s, p.k2))),
        (tid("Ch.rt,1"), tid("Str,3"), z.own(chicane_out, p.end_chicane + 65)),
        (tid("Ch.gw,1"), tid("Str,3"), z.own(chicane_out, p.end_chicane + 65)),
        (tid("Ch.rt,2"), tid("Str,3"), z.own(chicane_out, p.end_chicane + 65)),
        (tid("Str,3"), tid("Ben,2"), z.own(b2_lo - 105, b2_lo - 55)),
        (tid("Ben,2"), tid("Str,4"), z.own(b2_hi + s, b2_hi + 45)),
        (tid("Str,4"), tid("End,1"), z.own(p.finish + 3, p.finish + 50)),
    ]

    metric = MODE_MAPS[car].metric_for(MetricSpec.uniform(4))
    avoid = z.avoid()
    wide = z.own(-s, p.L + s)
    modes = [
        ModeSpec("Sta", 4, z.own(start_lo - s, start_hi + s), MODE_MAPS[car], metric, avoid),
        ModeSpec("Str", 4, wide, MODE_MAPS[car], metric, avoid),
        ModeSpec("Ben", 4, wide, MODE_MAPS[car], metric, avoid),
        ModeSpec("Ch.rt", 4, z.own(p.d1, p.end_chicane + 100), MODE_MAPS[car], metric, avoid),
        ModeSpec("Ch.gw", 4, z.own(p.d1, p.end_chicane + 100), MODE_MAPS[car], metric, avoid),
        ModeSpec("End", 4, wide, MODE_MAPS[car], metric, avoid),
    ]
    return build_system(modes, triples, edges, remove=remove)


def build(cfg: RacingScenario) -> ScenarioSpec:
    p = cfg.params
    warnings: List[str] = []
    bound = chicane_wait_bound(p)
    if p.timelimit is not None and p.timelimit < bound:
        warnings.append(f"timelimit {p.timelimit} s is below the chicane wait bound {bound:.2f} s")
    if not catch_check(p):
        warnings.append(f"c1={p.c1} lets a full-speed car catch one leaving the give-way line")
    for w in warnings:
        logger.warning(w)

    metric = MetricSpec.uniform(4)
    field_params = {
        "agents": CARS,
        "gain": p.gain,
        "max_accel": p.max_accel,
        "max_brake": p.max_brake,
        "max_speed": p.v_max,
    }
    drift, fibration = build_field("racing", 4, field_params)
    chart = box([-50.0, -10.0, -50.0, -10.0], [p.L + 100, p.v_max + 20, p.L + 100, p.v_max + 20])
    plant = TruthPlant(drift, fibration, chart, metric)
    model = ModelSpec(drift, fibration, p.fine_dt, chart, metric)

    agents = [
        AgentSpec(car, build_agent_system(p, car, cfg.strategy_overrides.remove), lambda seed: RacingController(p), i)
        for i, car in enumerate(CARS)
    ]
    co_occupancy = box(
        [p.begin_chicane, -INF, p.begin_chicane, -INF], [p.end_chicane, INF, p.end_chicane, INF]
    )

    def initial(rng: np.random.Generator) -> InitialConditions:
        starts = rng.uniform(p.start_zone[0], p.start_zone[1], size=2)
        delays = rng.uniform(0.0, p.release_max, size=2)
        return InitialConditions(
            (float(starts[0]), 0.0, float(starts[1]), 0.0),
            (0.0,) * 6,
            {car: float(delay) for car, delay in zip(CARS, delays)},
        )

    return ScenarioSpec(
        name=cfg.name,
        kind=cfg.scenario,
        config=cfg,
        axes=list(AXES),
        metric=metric,
        plant=plant,
        model=model,
        epsilon=p.epsilon,
        lam=p.lam,
        fine_dt=p.fine_dt,
        agents=agents,
        initial=initial,
        truth_checks=[TruthCheck("chicane-co-occupancy", co_occupancy, CARS)],
        horizon=cfg.run.horizon,
        default_seed=cfg.run.seed,
        grid_density=cfg.verify.grid_density,
        dense_grid=cfg.verify.dense,
        warnings=warnings,
    )
