"""
Wired scenario: plant, model, oracle constants, agents and their mode systems
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel

from app.core.exceptions import ParameterError, ScenarioConfigError
from app.core.geometry import MetricSpec
from app.models.zones import ZoneBase
from app.services.modes import (
    IdentityMap,
    ModeController,
    ModeSpec,
    ModeSystem,
    SelectionFunction,
    Strategy,
    TransitionMap,
    Triple,
    TripleId,
)
from app.services.oracle import OracleConfig
from app.services.plant import TruthPlant
from app.services.predictor import ModelSpec

logger = logging.getLogger(__name__)

SCENARIO_STREAM = 61
CONTROLLER_STREAM = 71


@dataclass(frozen=True)
class InitialConditions:
    x0: Tuple[float, ...]
    params0: Tuple[float, ...]
    releases: Dict[str, float] = field(default_factory=dict)


@dataclass
class AgentSpec:
    name: str
    system: ModeSystem
    controller: Callable[[int], ModeController]
    stream: int = 0


@dataclass(frozen=True)
class TruthCheck:
    """A zone of X the truth must never enter; checked on the fine samples."""

    name: str
    zone: ZoneBase
    agents: Tuple[str, ...]


@dataclass
class ScenarioSpec:
    name: str
    kind: str
    config: BaseModel
    axes: List[str]
    metric: MetricSpec
    plant: TruthPlant
    model: ModelSpec
    epsilon: float
    lam: float
    fine_dt: float
    agents: List[AgentSpec]
    initial: Callable[[np.random.Generator], InitialConditions]
    truth_checks: List[TruthCheck] = field(default_factory=list)
    horizon: float = 240.0
    default_seed: int = 0
    grid_density: float = 0.5
    dense_grid: bool = False
    grid_pitch: Optional[float] = None
    warnings: List[str] = field(default_factory=list)
    source: Optional[str] = None

    def oracle_config(self, seed: int) -> OracleConfig:
        return OracleConfig(self.epsilon, self.lam, seed, self.grid_pitch)

    def agent(self, name: Optional[str] = None) -> AgentSpec:
        if name is None:
            return self.agents[0]
        for a in self.agents:
            if a.name == name:
                return a
        raise ParameterError(f"scenario {self.name} has no agent '{name}'", agents=[a.name for a in self.agents])

    @property
    def slots(self) -> Dict[str, slice]:
        return {a.name: self.plant.fibration.slice_for(a.name) for a in self.agents}


def parse_ids(pairs: Sequence[Tuple[str, str]]) -> List[Tuple[TripleId, TripleId]]:
    try:
        return [(TripleId.parse(a), TripleId.parse(b)) for a, b in pairs]
    except (ParameterError, ValueError) as e:
        raise ScenarioConfigError([f"bad strategy override: {e}"])


def build_system(
    modes: Sequence[ModeSpec],
    triples: Sequence[Triple],
    edges: Sequence[Tuple[TripleId, TripleId, ZoneBase]],
    transitions: Sequence[TransitionMap] = (),
    shared_coordinates: bool = True,
    remove: Sequence[Tuple[str, str]] = (),
) -> ModeSystem:
    """Assemble a ModeSystem; with shared coordinates every edge between modes gets an identity map."""
    mode_table = {m.id: m for m in modes}
    triple_table = {t.id: t for t in triples}
    problems = []
    for t in triples:
        if t.id.mode not in mode_table:
            problems.append(f"triple {t.id} names undeclared mode {t.id.mode}")
    dropped = set(parse_ids(remove))
    choices: Dict[TripleId, List[SelectionFunction]] = {t.id: [] for t in triples}
    for source, target, zone in edges:
        if source not in triple_table or target not in triple_table:
            problems.append(f"strategy edge {source}->{target} names an unknown triple")
            continue
        if (source, target) in dropped:
            continue
        choices[source].append(SelectionFunction(target, zone))
    if problems:
        raise ScenarioConfigError(problems)
    maps = {(tm.source, tm.target): tm for tm in transitions}
    if shared_coordinates:
        for source, target, _ in edges:
            key = (source.mode, target.mode)
            if source.mode != target.mode and key not in maps and source.mode in mode_table:
                maps[key] = TransitionMap(source.mode, target.mode, IdentityMap(), mode_table[source.mode].chart)
    return ModeSystem(mode_table, triple_table, Strategy(choices), maps)
