"""
Scenarios declared entirely in the file: modes, triples, strategy and maps
"""

import logging

import numpy as np

from app.core.geometry import MetricSpec
from app.models.schemas import GenericScenario
from app.services.fields import build_field
from app.services.modes import HoldController, ModeSpec, TransitionMap, Triple, TripleId
from app.services.orders import OrdersProgram
from app.services.plant import Disturbance, TruthPlant
from app.services.predictor import ModelSpec
from app.services.scenarios.base import AgentSpec, InitialConditions, ScenarioSpec, TruthCheck, build_system

logger = logging.getLogger(__name__)

AGENT = "plant"


def build(cfg: GenericScenario) -> ScenarioSpec:
    d = len(cfg.state.axes)
    metric = MetricSpec(tuple(cfg.state.weights)) if cfg.state.weights else MetricSpec.uniform(d)
    drift, fibration = build_field(cfg.plant.field, d, cfg.plant.params)
    if cfg.plant.model_field is not None:
        model_drift, model_fibration = build_field(
            cfg.plant.model_field, d, cfg.plant.model_params if cfg.plant.model_params is not None else cfg.plant.params
        )
    else:
        model_drift, model_fibration = drift, fibration
    disturbance = Disturbance(tuple(cfg.plant.disturbance)) if cfg.plant.disturbance else None
    plant = TruthPlant(drift, fibration, cfg.state.chart, metric, disturbance)
    model = ModelSpec(model_drift, model_fibration, cfg.oracle.model_step, cfg.state.chart, metric)

    modes = []
    for m in cfg.modes:
        mode_metric = m.map.metric_for(metric)
        modes.append(ModeSpec(m.id, mode_metric.dimension, m.chart, m.map, mode_metric, m.avoid))
    triples = [
        Triple(TripleId.parse(t.id), t.pre, OrdersProgram(steps=t.orders), t.post, t.start, t.end) for t in cfg.triples
    ]
    edges = [(TripleId.parse(e.source), TripleId.parse(e.target), e.select) for e in cfg.strategy]
    transitions = []
    mode_charts = {m.id: m.chart for m in cfg.modes}
    for tr in cfg.transitions:
        domain = tr.domain if tr.domain is not None else mode_charts.get(tr.source)
        transitions.append(TransitionMap(tr.source, tr.target, tr.map, domain))
    system = build_system(
        modes, triples, edges, transitions, cfg.shared_coordinates, cfg.strategy_overrides.remove
    )

    params0 = tuple(cfg.plant.params0)
    x0 = tuple(cfg.state.x0)

    def initial(rng: np.random.Generator) -> InitialConditions:
        return InitialConditions(x0, params0, {AGENT: 0.0})

    return ScenarioSpec(
        name=cfg.name,
        kind=cfg.scenario,
        config=cfg,
        axes=list(cfg.state.axes),
        metric=metric,
        plant=plant,
        model=model,
        epsilon=cfg.oracle.epsilon,
        lam=cfg.oracle.lam,
        fine_dt=cfg.oracle.fine_dt,
        agents=[AgentSpec(AGENT, system, lambda seed: HoldController(params0))],
        initial=initial,
        truth_checks=[TruthCheck(c.name, c.zone, (AGENT,)) for c in cfg.truth_checks],
        horizon=cfg.run.horizon,
        default_seed=cfg.run.seed,
        grid_density=cfg.verify.grid_density,
        dense_grid=cfg.verify.dense,
        grid_pitch=cfg.oracle.grid_pitch,
    )
