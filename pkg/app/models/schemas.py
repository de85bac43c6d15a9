"""
Pydantic schemas for scenario files and API payloads
"""

import math
from typing import Annotated, Any, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.core.config import settings
from app.models.zones import Zone
from app.services.modes import IdentityMap, StateMap
from app.services.orders import Action


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", ser_json_inf_nan="constants")


# Shared sections

class OracleSection(_Section):
    epsilon: float = Field(gt=0)
    lam: float = Field(gt=0, alias="lambda")
    fine_dt: float = Field(gt=0)
    grid_pitch: Optional[float] = Field(default=None, gt=0)
    integrator_step: Optional[float] = Field(default=None, gt=0)

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    @model_validator(mode="after")
    def _check(self):
        if self.fine_dt > self.lam / 10.0 + 1e-12:
            raise ValueError(f"fine_dt {self.fine_dt} must be at most lambda/10 ({self.lam / 10.0})")
        if self.integrator_step is not None and self.integrator_step > self.lam:
            raise ValueError("integrator_step must not exceed lambda")
        return self

    @property
    def model_step(self) -> float:
        return self.integrator_step or self.lam / 10.0


class RunSection(_Section):
    horizon: float = Field(default_factory=lambda: settings.DEFAULT_HORIZON, gt=0)
    seed: int = Field(default_factory=lambda: settings.DEFAULT_SEED)


class VerifySection(_Section):
    grid_density: float = Field(default=0.5, gt=0)
    dense: bool = False


class LeeSection(_Section):
    mode: Optional[str] = None
    lam: Optional[float] = Field(default=None, gt=0, alias="lambda")
    epsilon: Optional[float] = Field(default=None, ge=0)
    eta: float = Field(gt=0)
    samples: int = Field(default=200, ge=1)
    region: Optional[Zone] = None
    params: List[float] = Field(default_factory=list)

    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class StrategyOverrides(_Section):
    remove: List[Tuple[str, str]] = Field(default_factory=list)


# Generic scenarios: everything declared in the file

class StateSection(_Section):
    axes: List[str]
    weights: Optional[List[float]] = None
    chart: Zone
    x0: List[float]

    @model_validator(mode="after")
    def _check(self):
        if self.weights is not None and len(self.weights) != len(self.axes):
            raise ValueError(f"{len(self.weights)} weights for {len(self.axes)} axes")
        if len(self.x0) != len(self.axes):
            raise ValueError(f"x0 has {len(self.x0)} coordinates for {len(self.axes)} axes")
        return self


class PlantSection(_Section):
    field: str
    params: Dict[str, Any] = Field(default_factory=dict)
    params0: List[float] = Field(default_factory=list)
    disturbance: Optional[List[float]] = None
    model_field: Optional[str] = None
    model_params: Optional[Dict[str, Any]] = None


class ModeSection(_Section):
    id: str
    chart: Zone
    map: StateMap = Field(default_factory=IdentityMap)
    avoid: Optional[Zone] = None


class TripleSection(_Section):
    id: str
    pre: Zone
    post: Zone
    orders: List[Action] = Field(default_factory=list)
    start: bool = False
    end: bool = False

    @field_validator("id")
    @classmethod
    def _id_form(cls, v: str) -> str:
        mode, _, index = v.rpartition(",")
        if not mode or not index.strip().lstrip("-").isdigit():
            raise ValueError(f"triple id '{v}' is not of the form Mode,index")
        return v


class EdgeSection(_Section):
    source: str
    target: str
    select: Zone


class TransitionSection(_Section):
    source: str
    target: str
    map: StateMap = Field(default_factory=IdentityMap)
    domain: Optional[Zone] = None


class AvoidCheck(_Section):
    name: str
    zone: Zone


class GenericScenario(_Section):
    scenario: Literal["generic"] = "generic"
    name: str
    description: str = ""
    state: StateSection
    oracle: OracleSection
    plant: PlantSection
    modes: List[ModeSection]
    triples: List[TripleSection]
    strategy: List[EdgeSection] = Field(default_factory=list)
    transitions: List[TransitionSection] = Field(default_factory=list)
    shared_coordinates: bool = True
    truth_checks: List[AvoidCheck] = Field(default_factory=list)
    run: RunSection = Field(default_factory=RunSection)
    verify: VerifySection = Field(default_factory=VerifySection)
    lee: Optional[LeeSection] = None
    strategy_overrides: StrategyOverrides = Field(default_factory=StrategyOverrides)

    @model_validator(mode="after")
    def _references(self):
        problems = []
        modes = {m.id for m in self.modes}
        triples = {t.id for t in self.triples}
        for t in self.triples:
            if t.id.rpartition(",")[0] not in modes:
                problems.append(f"triple {t.id} names undeclared mode")
        for e in self.strategy:
            for end in (e.source, e.target):
                if end not in triples:
                    problems.append(f"strategy edge {e.source}->{e.target} names unknown triple {end}")
        if not any(t.start for t in self.triples):
            problems.append("no start triple declared")
        if problems:
            raise ValueError("; ".join(problems))
        return self


# Case studies: parameters only, zones are built in code

class RacingParams(_Section):
    L: float = 2000.0
    v_max: float = 120.0
    v_bend: float = 80.0
    bend_speed: float = 70.0
    exit_speed: float = 100.0
    ramp_s: float = 5.0
    max_accel: float = 20.0
    max_brake: float = 40.0
    gain: float = 20.0
    bends: List[Tuple[float, float]] = Field(default_factory=lambda: [(200.0, 400.0), (1400.0, 1600.0)])
    begin_chicane: float = 1000.0
    end_chicane: float = 1100.0
    start_zone: Tuple[float, float] = (0.0, 10.0)
    finish: float = 1845.0
    d1: float = 900.0
    h1: float = 910.0
    e1: float = 920.0
    e2: float = 950.0
    h2: float = 955.0
    d2: float = 960.0
    g1: float = 550.0
    k1: float = 600.0
    k2: float = 650.0
    c1: float = 700.0
    k3: float = 1110.0
    k4: float = 1120.0
    g2: float = 1130.0
    epsilon: float = Field(default=1.0, gt=0)
    lam: float = Field(default=0.5, gt=0, alias="lambda")
    fine_dt: float = Field(default=0.05, gt=0)
    timelimit: Optional[int] = Field(default=30, ge=1)
    release_max: float = Field(default=40.0, ge=0)

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    def ordering_problems(self) -> List[str]:
        problems = []
        chains = [
            ("d1<h1<e1<e2<h2<d2<begin_chicane", [self.d1, self.h1, self.e1, self.e2, self.h2, self.d2, self.begin_chicane]),
            (
                "g1<k1<k2<c1<end_chicane+2<k3<k4<g2",
                [self.g1, self.k1, self.k2, self.c1, self.end_chicane + 2, self.k3, self.k4, self.g2],
            ),
        ]
        for name, values in chains:
            if not all(a < b for a, b in zip(values, values[1:])):
                problems.append(f"ordering chain {name} violated by {values}")
        if not self.begin_chicane < self.end_chicane < self.L:
            problems.append("begin_chicane < end_chicane < L violated")
        stop = self.stopping_distance(self.exit_speed + 2 * self.epsilon)
        if not self.d2 + 1 + stop < self.begin_chicane - 1:
            problems.append(
                f"braking rule d2+1+stop < begin_chicane-1 violated ({self.d2 + 1 + stop:.2f} >= {self.begin_chicane - 1})"
            )
        return problems

    def stopping_distance(self, speed_kmh: float) -> float:
        v = speed_kmh / 3.6
        return v * v / (2 * self.max_brake / 3.6)

    @model_validator(mode="after")
    def _check(self):
        problems = self.ordering_problems()
        if problems:
            raise ValueError("; ".join(problems))
        return self


class RacingScenario(_Section):
    scenario: Literal["racing"] = "racing"
    name: str = "racing"
    description: str = ""
    params: RacingParams = Field(default_factory=RacingParams)
    run: RunSection = Field(default_factory=lambda: RunSection(horizon=240.0))
    verify: VerifySection = Field(default_factory=VerifySection)
    strategy_overrides: StrategyOverrides = Field(default_factory=StrategyOverrides)


class BoatParams(_Section):
    flow: Tuple[float, float] = (1.0, 0.0)
    motor_speed: float = Field(default=1.0, gt=0)
    island_center: Tuple[float, float] = (100.0, 0.0)
    island_radius: float = Field(default=10.0, gt=0)
    look_ahead: float = Field(default=10.0, ge=0)
    chart_lower: Tuple[float, float] = (0.0, -60.0)
    chart_upper: Tuple[float, float] = (200.0, 60.0)
    finish_x: float = 180.0
    epsilon: float = Field(default=0.5, gt=0)
    lam: float = Field(default=1.0, gt=0, alias="lambda")
    fine_dt: float = Field(default=0.1, gt=0)
    start: Tuple[float, float] = (40.0, 0.0)

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    @property
    def guard_radius(self) -> float:
        return self.island_radius + 2 * self.epsilon + math.sqrt(2) * self.lam * self.motor_speed

    @model_validator(mode="after")
    def _check(self):
        cx, cy = self.island_center
        lo, hi = self.chart_lower, self.chart_upper
        if not (lo[0] < cx < hi[0] and lo[1] < cy < hi[1]):
            raise ValueError("island centre must lie inside the chart")
        if not cx < self.finish_x < hi[0]:
            raise ValueError("finish line must lie east of the island and inside the chart")
        return self


class BoatScenario(_Section):
    scenario: Literal["boat"] = "boat"
    name: str = "boat"
    description: str = ""
    params: BoatParams = Field(default_factory=BoatParams)
    run: RunSection = Field(default_factory=lambda: RunSection(horizon=200.0))
    verify: VerifySection = Field(default_factory=VerifySection)
    strategy_overrides: StrategyOverrides = Field(default_factory=StrategyOverrides)


class ProbeParams(_Section):
    mu: float = Field(default=1.0, gt=0)
    k: float = Field(default=1.0, ge=0)
    bodies: List[Tuple[float, float, float]] = Field(default_factory=lambda: [(0.0, 0.0, 0.0)])
    planet_radius: float = Field(default=0.5, gt=0)
    start: Tuple[float, ...] = (1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0)
    weights: Tuple[float, ...] = (1.0, 1.0, 1.0, 100.0, 100.0, 100.0, 1e4)
    burn: Tuple[float, float, float] = (0.0, 0.5, 0.0)
    burn_s: float = Field(default=0.4, gt=0)
    escape_radius: float = Field(default=1.8, gt=0)
    chart_half_width: float = Field(default=5.0, gt=0)
    epsilon: float = Field(default=1e-3, gt=0)
    lam: float = Field(default=0.1, gt=0, alias="lambda")
    fine_dt: float = Field(default=0.01, gt=0)

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    @model_validator(mode="after")
    def _check(self):
        if len(self.start) != 7 or len(self.weights) != 7:
            raise ValueError("probe state has 7 coordinates (x1,x2,x3,u1,u2,u3,F)")
        if self.start[6] < 0:
            raise ValueError("initial fuel must be non-negative")
        return self


class ProbeScenario(_Section):
    scenario: Literal["probe"] = "probe"
    name: str = "probe"
    description: str = ""
    params: ProbeParams = Field(default_factory=ProbeParams)
    run: RunSection = Field(default_factory=lambda: RunSection(horizon=20.0))
    verify: VerifySection = Field(default_factory=VerifySection)
    strategy_overrides: StrategyOverrides = Field(default_factory=StrategyOverrides)


ScenarioConfig = Annotated[
    Union[GenericScenario, RacingScenario, BoatScenario, ProbeScenario],
    Field(discriminator="scenario"),
]


# API payloads

class RunRequest(BaseModel):
    seed: Optional[int] = None
    horizon: Optional[float] = Field(default=None, gt=0)
    x0: Optional[List[float]] = None


class VerifyRequest(BaseModel):
    grid_density: Optional[float] = Field(default=None, gt=0)
    agent: Optional[str] = None


class LeeRequest(BaseModel):
    mode: Optional[str] = None
    lam: Optional[float] = Field(default=None, gt=0, alias="lambda")
    epsilon: Optional[float] = Field(default=None, ge=0)
    eta: Optional[float] = Field(default=None, gt=0)
    samples: Optional[int] = Field(default=None, ge=1)
    seed: Optional[int] = None

    model_config = ConfigDict(populate_by_name=True)


class ScenarioInfo(BaseModel):
    name: str
    kind: str
    description: str = ""
    path: str
