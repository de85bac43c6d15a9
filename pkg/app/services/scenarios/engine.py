"""
Scenario engine: steps the truth, the oracle and every agent's mode runtime in lockstep
"""

import dataclasses
import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from app.core.exceptions import ADSError, DimensionMismatchError, ParameterError
from app.core.geometry import StatePoint
from app.models.zones import complement, empty
from app.services.modes import IdentityMap, ModeRuntime
from app.services.oracle import Measurement, OracleSession, replay_measurements
from app.services.plant import ControlPoint
from app.services.predictor import DisjointPath, LeeReport, check_lee_property, export_segments, measure_predict
from app.services.scenarios.base import SCENARIO_STREAM, ScenarioSpec
from app.services.trace import TraceEvent, TraceHeader, TraceRecorder
from app.services.verifier import (
    GridSampler,
    StrategyGraph,
    VerificationReport,
    VerificationResult,
    build_strategy_graph,
    verification_report,
    verify_strategy,
)

logger = logging.getLogger(__name__)


class AgentReport(BaseModel):
    model_config = ConfigDict(ser_json_inf_nan="constants")

    reached_end: bool
    finish_time: Optional[float] = None
    release_time: float = 0.0
    released: bool = False
    final_triple: str
    transfers: List[Tuple[float, str, str]] = Field(default_factory=list)
    violations: List[Dict[str, Any]] = Field(default_factory=list)
    errors: List[Dict[str, Any]] = Field(default_factory=list)
    timers: int = 0


class RunReport(BaseModel):
    model_config = ConfigDict(ser_json_inf_nan="constants")

    run_id: str
    scenario: str
    kind: str
    seed: int
    horizon: float
    ok: bool
    steps: int
    sim_time: float
    agents: Dict[str, AgentReport]
    truth_violations: List[Dict[str, Any]] = Field(default_factory=list)
    errors: List[Dict[str, Any]] = Field(default_factory=list)
    warnings: List[str] = Field(default_factory=list)
    header: TraceHeader
    events: List[TraceEvent] = Field(default_factory=list, exclude=True)

    @property
    def violation_count(self) -> int:
        return len(self.truth_violations) + sum(len(a.violations) for a in self.agents.values())

    def events_of(self, kind: str, agent: Optional[str] = None) -> List[TraceEvent]:
        return [e for e in self.events if e.kind == kind and (agent is None or e.agent == agent)]


@dataclass
class _Agent:
    runtime: ModeRuntime
    release: float
    released: bool = False
    failed: bool = False


def _initial(spec: ScenarioSpec, seed: int, x0: Optional[Sequence[float]]):
    init = spec.initial(np.random.default_rng([seed, SCENARIO_STREAM]))
    if x0 is not None:
        x0 = tuple(float(v) for v in x0)
        if len(x0) != spec.metric.dimension:
            raise DimensionMismatchError(spec.metric.dimension, len(x0), "x0")
        init = dataclasses.replace(init, x0=x0)
    return init


def run_scenario(
    spec: ScenarioSpec,
    seed: Optional[int] = None,
    horizon: Optional[float] = None,
    x0: Optional[Sequence[float]] = None,
) -> RunReport:
    """Run every agent's transfer loop against one shared truth until all reach an end or time runs out."""
    seed = spec.default_seed if seed is None else int(seed)
    horizon = spec.horizon if horizon is None else float(horizon)
    if not horizon > 0:
        raise ParameterError("horizon must be positive", horizon=horizon)
    init = _initial(spec, seed, x0)
    recorder = TraceRecorder()
    header = TraceHeader(
        run_id=recorder.run_id,
        scenario=spec.name,
        seed=seed,
        axes=list(spec.axes),
        x0=list(init.x0),
        params0=list(init.params0),
    )
    session = OracleSession(spec.plant, spec.oracle_config(seed), init.x0, init.params0, spec.fine_dt, sink=recorder)
    agents: Dict[str, _Agent] = {}
    for a in spec.agents:
        runtime = ModeRuntime(a.name, a.system, session.channel(a.name, a.stream), a.controller(seed), sink=recorder)
        agents[a.name] = _Agent(runtime, init.releases.get(a.name, 0.0))

    logger.info(f"Run {recorder.run_id}: {spec.name} seed={seed} horizon={horizon}")
    n_steps = int(math.ceil(horizon / spec.lam - 1e-9))
    errors: List[Dict[str, Any]] = []
    truth_hits: List[Dict[str, Any]] = []

    for n in range(n_steps + 1):
        for name, agent in agents.items():
            if agent.failed:
                continue
            if not agent.released:
                if session.time + 1e-9 < agent.release:
                    continue
                agent.released = True
                recorder.emit(session.time, name, "release", delay=agent.release)
            try:
                agent.runtime.step()
            except ADSError as e:
                agent.failed = True
                errors.append({"agent": name, "step": n, **e.to_dict()})
                recorder.emit(session.time, name, "error", **e.to_dict())
                logger.error(f"{name} failed at step {n}: {e.message}")
        if all(a.runtime.reached_end or a.failed for a in agents.values()) or n == n_steps:
            break
        try:
            piece = session.advance()
        except ADSError as e:
            errors.append({"agent": "plant", "step": n, **e.to_dict()})
            recorder.emit(session.time, "plant", "error", **e.to_dict())
            logger.error(f"Run {recorder.run_id} aborted at step {n}: {e.message}")
            break
        for check in spec.truth_checks:
            hit = check.zone.contains_many(piece.states, spec.metric)
            if hit.any():
                i = int(np.argmax(hit))
                record = {
                    "violation": check.name,
                    "source": "truth",
                    "agents": list(check.agents),
                    "time": float(piece.times[i]),
                    "value": [float(v) for v in piece.states[i]],
                }
                truth_hits.append(record)
                recorder.emit(piece.times[i], check.agents[0] if len(check.agents) == 1 else "plant", "violation", **record)

    reports = {}
    for name, agent in agents.items():
        rt = agent.runtime
        reports[name] = AgentReport(
            reached_end=rt.reached_end,
            finish_time=rt.finish_time,
            release_time=agent.release,
            released=agent.released,
            final_triple=str(rt.current),
            transfers=list(rt.transfers),
            violations=[{"time": v.time, "triple": v.triple, "kind": v.kind, **v.detail} for v in rt.violations]
            + [h for h in truth_hits if name in h["agents"]],
            errors=[e for e in errors if e["agent"] == name],
            timers=len(recorder.of_kind("timer", name)),
        )
    ok = (
        all(r.reached_end for r in reports.values())
        and not truth_hits
        and not errors
        and not any(a.runtime.violations for a in agents.values())
    )
    report = RunReport(
        run_id=recorder.run_id,
        scenario=spec.name,
        kind=spec.kind,
        seed=seed,
        horizon=horizon,
        ok=ok,
        steps=session.step_index,
        sim_time=session.time,
        agents=reports,
        truth_violations=truth_hits,
        errors=errors,
        warnings=list(spec.warnings),
        header=header,
        events=list(recorder.events),
    )
    logger.info(
        f"Run {report.run_id} finished at t={report.sim_time:.6g}: ok={ok}, "
        f"{report.violation_count} violations, {len(errors)} errors"
    )
    return report


def replay_actuations(
    spec: ScenarioSpec, events: Sequence[TraceEvent], seed: int, x0: Sequence[float], params0: Sequence[float]
) -> List[Measurement]:
    """Re-drive a fresh session with a trace's actuations and re-take its measurements."""
    recorded = [
        {"kind": e.kind, "agent": e.agent, **e.payload} for e in events if e.kind in ("measure", "actuate")
    ]
    return replay_measurements(spec.plant, spec.oracle_config(seed), x0, params0, spec.fine_dt, recorded, spec.slots)


def predict_scenario(
    spec: ScenarioSpec, n_max: int, seed: Optional[int] = None, recorder: Optional[TraceRecorder] = None
) -> Tuple[DisjointPath, TraceRecorder]:
    """measure-predict over a single-agent scenario, holding its initial parameters."""
    if len(spec.agents) != 1:
        raise ParameterError("prediction runs need a single-agent scenario", agents=[a.name for a in spec.agents])
    seed = spec.default_seed if seed is None else int(seed)
    init = _initial(spec, seed, None)
    recorder = recorder or TraceRecorder()
    session = OracleSession(spec.plant, spec.oracle_config(seed), init.x0, init.params0, spec.fine_dt, sink=recorder)
    agent = spec.agents[0].name
    control = ControlPoint(StatePoint.of(init.x0), init.params0)
    path = measure_predict(n_max, session, spec.model, control, agent)
    export_segments(path, recorder, agent)
    return path, recorder


def lee_for_scenario(
    spec: ScenarioSpec,
    mode: Optional[str] = None,
    lam: Optional[float] = None,
    epsilon: Optional[float] = None,
    eta: Optional[float] = None,
    samples: Optional[int] = None,
    seed: Optional[int] = None,
) -> LeeReport:
    """(lambda, epsilon, eta) check with arguments falling back to the scenario's lee section and oracle."""
    lee = getattr(spec.config, "lee", None)
    if lam is None:
        lam = lee.lam if lee and lee.lam is not None else spec.lam
    if epsilon is None:
        epsilon = lee.epsilon if lee and lee.epsilon is not None else spec.epsilon
    if eta is None:
        eta = lee.eta if lee else 2 * epsilon
    samples = samples if samples is not None else (lee.samples if lee else 200)
    if samples < 1:
        raise ParameterError("samples must be at least 1", samples=samples)
    if not lam > 0:
        raise ParameterError("lambda must be positive", lam=lam)
    if not eta > 0:
        raise ParameterError("eta must be positive", eta=eta)
    seed = spec.default_seed if seed is None else int(seed)

    mode = mode or (lee.mode if lee else None)
    region = lee.region if lee and lee.region is not None else None
    if region is None and mode is not None:
        ms = spec.agent().system.modes.get(mode)
        if ms is None:
            raise ParameterError(f"scenario {spec.name} has no mode '{mode}'")
        if not isinstance(ms.to_mode_state, IdentityMap):
            raise ParameterError(f"mode {mode} does not share coordinates with the plant; give a region")
        region = ms.chart
    region = region if region is not None else spec.plant.chart_box

    anywhere = complement(empty())
    truth = dataclasses.replace(spec.plant, chart_box=anywhere)
    model = dataclasses.replace(spec.model, chart=None, integrator_step=min(spec.model.integrator_step, lam))
    if lee and lee.params:
        params = tuple(lee.params)
    else:
        params = (0.0,) * spec.plant.fibration.param_dimension
    b = ControlPoint(StatePoint.of(np.zeros(spec.metric.dimension)), params)
    return check_lee_property(
        model, truth, b, lam, epsilon, eta, region, samples, seed, fine_dt=min(spec.fine_dt, lam / 10.0)
    )


@dataclass(frozen=True)
class VerificationOutcome:
    graph: StrategyGraph
    result: VerificationResult
    report: VerificationReport


def verify_scenario(
    spec: ScenarioSpec,
    agent: Optional[str] = None,
    grid_density: Optional[float] = None,
    dense: Optional[bool] = None,
) -> VerificationOutcome:
    a = spec.agent(agent)
    sampler = GridSampler(
        grid_density if grid_density is not None else spec.grid_density,
        dense=spec.dense_grid if dense is None else dense,
    )
    sg = build_strategy_graph(a.system, sampler)
    result = verify_strategy(sg)
    report = verification_report(spec.name, a.name, sg, result, sampler)
    logger.info(f"{spec.name}/{a.name}: verified={result.verified} ({result.kind or 'no counterexample'})")
    return VerificationOutcome(sg, result, report)
