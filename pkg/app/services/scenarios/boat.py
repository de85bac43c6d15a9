"""
A boat carried east by a uniform flow past an island, steering with a
north/south motor.

The water west of the island is split into a lethal wedge, the approach
corridor behind it and two flanks; every other point of the chart is open
water or the finish.
"""

import logging
import math
from typing import Optional, Tuple

import numpy as np

from app.core.exceptions import ParameterError
from app.core.geometry import MetricSpec
from app.models.schemas import BoatParams, BoatScenario
from app.models.zones import ZoneBase, ball, box, halfspace
from app.services.fields import MOTOR_SETTINGS, build_field
from app.services.modes import IdentityMap, ModeSpec, Triple, TripleId
from app.services.orders import OrdersProgram, SetMotor
from app.services.plant import TruthPlant
from app.services.predictor import ModelSpec
from app.services.scenarios.base import (
    CONTROLLER_STREAM,
    AgentSpec,
    InitialConditions,
    ScenarioSpec,
    TruthCheck,
    build_system,
)

logger = logging.getLogger(__name__)

AGENT = "boat"
AXES = ["x", "y"]
INF = math.inf


class BoatController:
    """Motor value per setting; "either" keeps a running motor or tosses a coin once per order."""

    def __init__(self, seed: int):
        self.rng = np.random.default_rng([seed, CONTROLLER_STREAM])
        self._coin: Optional[Tuple[object, float]] = None

    def initial_params(self) -> Tuple[float, ...]:
        return (MOTOR_SETTINGS["off"],)

    def params(self, command, state, current):
        if command is None:
            return current
        a = command.action
        if not isinstance(a, SetMotor):
            raise ParameterError(f"the boat cannot execute '{a.action}'")
        if a.setting != "either":
            return (MOTOR_SETTINGS[a.setting],)
        if current and current[0] != 0:
            return current
        if self._coin is None or self._coin[0] is not command:
            self._coin = (command, MOTOR_SETTINGS["N"] if self.rng.random() < 0.5 else MOTOR_SETTINGS["S"])
        return (self._coin[1],)

    def halted(self, state) -> bool:
        return True


class BoatZones:
    def __init__(self, p: BoatParams):
        self.p = p
        cx, cy = p.island_center
        r = p.guard_radius
        self.r = r
        self.reach = math.sqrt(2) * r
        self.span = self.reach + p.look_ahead
        self.chart = box(p.chart_lower, p.chart_upper)
        self.island = ball(p.island_center, p.island_radius)

        west = halfspace([1.0, 0.0], cx)
        wedge = (
            west
            & halfspace([-1.0, 1.0], self.reach - cx + cy)
            & halfspace([-1.0, -1.0], self.reach - cx - cy)
            & box([-INF, cy - r], [INF, cy + r], [False, True], [False, True])
        )
        self.lethal = ball(p.island_center, r, open=True) | wedge
        north_half = halfspace([0.0, -1.0], -cy)
        self.lethal_north = self.lethal & north_half
        self.lethal_south = self.lethal - north_half

        corridor = (
            box([cx - self.span, cy - r], [cx, cy + r], [False, True], [False, True])
            & halfspace([1.0, 1.0], cx + cy - self.reach)
            & halfspace([1.0, -1.0], cx - cy - self.reach)
        )
        self.rear = corridor - self.lethal
        self.north = box([cx - self.span, cy], [cx, cy + r], None, [False, True]) - self.rear - self.lethal
        self.south = box([cx - self.span, cy - r], [cx, cy], [False, True], [False, True]) - self.rear - self.lethal
        self.finish = self.chart & halfspace([-1.0, 0.0], -p.finish_x)
        guarded = self.lethal | self.rear | self.north | self.south
        self.open = self.chart - guarded - self.finish


def _triple(text: str, zone: ZoneBase, chart: ZoneBase, setting: Optional[str], start=False, end=False) -> Triple:
    orders = OrdersProgram(steps=[SetMotor(setting=setting)] if setting else [])
    post = zone if (start or end) else chart - zone
    return Triple(TripleId.parse(text), zone, orders, post, start, end)


def build_agent_system(p: BoatParams, remove=()):
    z = BoatZones(p)
    metric = MetricSpec.uniform(2)
    triples = [
        _triple("Sta,1", z.chart, z.chart, None, start=True),
        _triple("Open,1", z.open, z.chart, "off"),
        _triple("Nth,1", z.north, z.chart, "N"),
        _triple("Sth,1", z.south, z.chart, "S"),
        _triple("Rear,1", z.rear, z.chart, "either"),
        _triple("Lethal,1", z.lethal_north, z.chart, "N"),
        _triple("Lethal,2", z.lethal_south, z.chart, "S"),
        _triple("End,1", z.finish, z.chart, "off", end=True),
    ]
    zones = {t.id: t.pre for t in triples}
    order = [TripleId.parse(s) for s in ("End,1", "Lethal,1", "Lethal,2", "Rear,1", "Nth,1", "Sth,1", "Open,1")]
    edges = []
    for t in triples:
        if t.is_end:
            continue
        for target in order:
            if target != t.id:
                edges.append((t.id, target, zones[target]))
    modes = [
        ModeSpec(m, 2, z.chart, IdentityMap(), metric, z.island)
        for m in ("Sta", "Open", "Nth", "Sth", "Rear", "Lethal", "End")
    ]
    return build_system(modes, triples, edges, remove=remove)


def build(cfg: BoatScenario) -> ScenarioSpec:
    p = cfg.params
    metric = MetricSpec.uniform(2)
    drift, fibration = build_field("boat", 2, {"flow": p.flow, "motor_speed": p.motor_speed})
    lo, hi = p.chart_lower, p.chart_upper
    margin = 2 * (p.motor_speed + max(abs(v) for v in p.flow)) * p.lam + 20.0
    chart = box([lo[0] - margin, lo[1] - margin], [hi[0] + margin, hi[1] + margin])
    plant = TruthPlant(drift, fibration, chart, metric)
    model = ModelSpec(drift, fibration, p.fine_dt, chart, metric)
    system = build_agent_system(p, cfg.strategy_overrides.remove)

    def initial(rng: np.random.Generator) -> InitialConditions:
        return InitialConditions(tuple(p.start), (MOTOR_SETTINGS["off"],), {AGENT: 0.0})

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
        agents=[AgentSpec(AGENT, system, BoatController)],
        initial=initial,
        truth_checks=[TruthCheck("island-strike", ball(p.island_center, p.island_radius), (AGENT,))],
        horizon=cfg.run.horizon,
        default_seed=cfg.run.seed,
        grid_density=cfg.verify.grid_density,
        dense_grid=cfg.verify.dense,
    )
