"""
A probe in a point-mass gravity field: one prograde burn, then coast out
past the escape radius without touching the planet or running dry.
"""

import logging
import math
from typing import Tuple

import numpy as np

from app.core.exceptions import ParameterError
from app.core.geometry import MetricSpec
from app.models.schemas import ProbeParams, ProbeScenario
from app.models.zones import ball, box, complement, halfspace
from app.services.fields import build_field
from app.services.modes import IdentityMap, ModeSpec, Triple, TripleId
from app.services.orders import OrdersProgram, SetThrust, Wait
from app.services.plant import TruthPlant
from app.services.predictor import ModelSpec
from app.services.scenarios.base import AgentSpec, InitialConditions, ScenarioSpec, TruthCheck, build_system

logger = logging.getLogger(__name__)

AGENT = "probe"
AXES = ["x1", "x2", "x3", "u1", "u2", "u3", "F"]
POSITION = (0, 1, 2)
COAST = (0.0, 0.0, 0.0)


class ProbeController:
    """Thrust vector straight from set_thrust orders."""

    def initial_params(self) -> Tuple[float, ...]:
        return COAST

    def params(self, command, state, current):
        if command is None:
            return current
        a = command.action
        if not isinstance(a, SetThrust):
            raise ParameterError(f"the probe cannot execute '{a.action}'")
        if len(a.vector) != 3:
            raise ParameterError("thrust vector has 3 components", vector=list(a.vector))
        return tuple(a.vector)

    def halted(self, state) -> bool:
        return True


def burn_fuel(p: ProbeParams) -> float:
    return p.k * math.sqrt(sum(c * c for c in p.burn)) * p.burn_s


def planet_zone(p: ProbeParams):
    return ball(p.bodies[0], p.planet_radius, axes=POSITION)


def fuel_exhausted_zone():
    return halfspace([0.0] * 6 + [1.0], 0.0, open=True)


def probe_chart(p: ProbeParams):
    w = p.chart_half_width
    fuel = p.start[6]
    return box([-w] * 6 + [-0.1], [w] * 6 + [fuel + 0.1])


def build_agent_system(p: ProbeParams, metric: MetricSpec, remove=()):
    chart = probe_chart(p)
    fuel_after_burn = p.start[6] - burn_fuel(p)
    burned = chart & halfspace([0.0] * 6 + [1.0], fuel_after_burn + 0.001)
    escaped = chart & complement(ball([0.0, 0.0, 0.0], p.escape_radius, axes=POSITION))
    coast = OrdersProgram(steps=[SetThrust(vector=COAST)])

    def tid(text):
        return TripleId.parse(text)

    triples = [
        Triple(tid("Sta,1"), chart, OrdersProgram(), chart, is_start=True),
        Triple(
            tid("Burn,1"),
            chart,
            OrdersProgram(steps=[SetThrust(vector=tuple(p.burn)), Wait(seconds=p.burn_s), SetThrust(vector=COAST)]),
            burned,
        ),
        Triple(tid("Coast,1"), chart, coast, escaped),
        Triple(tid("End,1"), escaped, coast, escaped, is_end=True),
    ]
    edges = [
        (tid("Sta,1"), tid("Burn,1"), chart),
        (tid("Burn,1"), tid("Coast,1"), chart),
        (tid("Coast,1"), tid("End,1"), escaped),
    ]
    avoid = planet_zone(p) | fuel_exhausted_zone()
    modes = [ModeSpec(m, 7, chart, IdentityMap(), metric, avoid) for m in ("Sta", "Burn", "Coast", "End")]
    return build_system(modes, triples, edges, remove=remove)


def build(cfg: ProbeScenario) -> ScenarioSpec:
    p = cfg.params
    metric = MetricSpec(tuple(p.weights))
    drift, fibration = build_field("probe", 7, {"mu": p.mu, "k": p.k, "bodies": p.bodies})
    w = 2 * p.chart_half_width
    truth_chart = box([-w] * 6 + [-1.0], [w] * 6 + [p.start[6] + 1.0])
    plant = TruthPlant(drift, fibration, truth_chart, metric)
    model = ModelSpec(drift, fibration, p.fine_dt, truth_chart, metric)
    system = build_agent_system(p, metric, cfg.strategy_overrides.remove)

    def initial(rng: np.random.Generator) -> InitialConditions:
        return InitialConditions(tuple(p.start), COAST, {AGENT: 0.0})

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
        agents=[AgentSpec(AGENT, system, lambda seed: ProbeController())],
        initial=initial,
        truth_checks=[
            TruthCheck("planet-impact", planet_zone(p), (AGENT,)),
            TruthCheck("fuel-exhausted", fuel_exhausted_zone(), (AGENT,)),
        ],
        horizon=cfg.run.horizon,
        default_seed=cfg.run.seed,
        grid_density=cfg.verify.grid_density,
        dense_grid=cfg.verify.dense,
    )
