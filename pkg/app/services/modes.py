"""
Modes, triples and the per-agent runtime.

A ModeRuntime only learns about the world through its oracle channel:
state_alpha changes on a measurement or a transition map, and every change
is written to the trace as a "state" event.
"""

import logging
from dataclasses import dataclass, field
from typing import Annotated, Any, Callable, Dict, List, Literal, NamedTuple, Optional, Protocol, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.core.config import settings
from app.core.exceptions import MissingTransitionError, OutsideDomainError, ParameterError, PreconditionError
from app.core.geometry import MetricSpec, zone_contains
from app.models.zones import ZoneBase
from app.services.oracle import Measurement, OracleChannel, OracleSession
from app.services.orders import Command, OrdersExecutor, OrdersProgram
from app.services.plant import ControlPoint

logger = logging.getLogger(__name__)


# Coordinate maps

class _MapBase(BaseModel):
    model_config = ConfigDict(frozen=True)

    def apply(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def axis_source(self, axis: int) -> Optional[int]:
        """Input axis feeding output axis, when the map is a coordinate relabelling."""
        return None

    def metric_for(self, metric: MetricSpec) -> MetricSpec:
        return metric


class IdentityMap(_MapBase):
    kind: Literal["identity"] = "identity"

    def apply(self, x):
        return np.asarray(x, dtype=float)

    def axis_source(self, axis):
        return axis


class PermutationMap(_MapBase):
    """y[j] = x[order[j]]"""

    kind: Literal["permutation"] = "permutation"
    order: Tuple[int, ...]

    @model_validator(mode="after")
    def _check(self):
        if sorted(self.order) != list(range(len(self.order))):
            raise ValueError(f"order {list(self.order)} is not a permutation")
        return self

    def apply(self, x):
        return np.asarray(x, dtype=float)[..., list(self.order)]

    def axis_source(self, axis):
        return self.order[axis]

    def metric_for(self, metric):
        return MetricSpec(tuple(metric.weights[i] for i in self.order))


class AffineMap(_MapBase):
    """y = matrix @ x + offset"""

    kind: Literal["affine"] = "affine"
    matrix: Tuple[Tuple[float, ...], ...]
    offset: Tuple[float, ...]

    @model_validator(mode="after")
    def _check(self):
        if any(len(row) != len(self.matrix[0]) for row in self.matrix) or len(self.offset) != len(self.matrix):
            raise ValueError("affine matrix and offset shapes disagree")
        return self

    def apply(self, x):
        x = np.asarray(x, dtype=float)
        return x @ np.asarray(self.matrix, float).T + np.asarray(self.offset, float)

    def metric_for(self, metric):
        return MetricSpec.uniform(len(self.matrix))


StateMap = Annotated[Union[IdentityMap, PermutationMap, AffineMap], Field(discriminator="kind")]


@dataclass(frozen=True)
class ModeSpec:
    """A mode: its chart (in mode coordinates), coordinate map from X and avoidance zone."""

    id: str
    state_dimension: int
    chart: ZoneBase
    to_mode_state: _MapBase
    metric: MetricSpec
    avoid: Optional[ZoneBase] = None

    def __post_init__(self):
        if self.metric.dimension != self.state_dimension:
            raise ParameterError(
                f"mode {self.id} metric has {self.metric.dimension} axes, state has {self.state_dimension}"
            )

    def state_of(self, x: np.ndarray) -> np.ndarray:
        return self.to_mode_state.apply(x)


@dataclass(frozen=True)
class TransitionMap:
    source: str
    target: str
    map: _MapBase
    domain: ZoneBase


def mode_transition(tm: TransitionMap, x, metric: MetricSpec) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if not tm.domain.contains(x, metric):
        raise OutsideDomainError(tm.source, tm.target, tm.domain.model_dump(), x)
    return tm.map.apply(x)


class TripleId(NamedTuple):
    mode: str
    index: int

    @classmethod
    def parse(cls, text: str) -> "TripleId":
        mode, _, index = str(text).rpartition(",")
        if not mode:
            raise ParameterError(f"triple id '{text}' is not of the form Mode,index")
        return cls(mode.strip(), int(index))

    def __str__(self) -> str:
        return f"{self.mode},{self.index}"


@dataclass(frozen=True)
class Triple:
    id: TripleId
    pre: ZoneBase
    orders: OrdersProgram
    post: ZoneBase
    is_start: bool = False
    is_end: bool = False

    @property
    def mode(self) -> str:
        return self.id.mode


@dataclass(frozen=True)
class SelectionFunction:
    """Characteristic function of a zone in the source mode's coordinates."""

    target: TripleId
    zone: ZoneBase

    def evaluate(self, x, metric: MetricSpec) -> int:
        return int(self.zone.contains(x, metric))


def evaluate_selection(phi: SelectionFunction, x, metric: MetricSpec) -> int:
    return phi.evaluate(x, metric)


@dataclass
class Strategy:
    """Successor choices per triple, each with its selection function, in declaration order."""

    choices: Dict[TripleId, List[SelectionFunction]] = field(default_factory=dict)

    def targets(self, tid: TripleId) -> List[SelectionFunction]:
        return self.choices.get(tid, [])

    def edges(self) -> List[Tuple[TripleId, TripleId]]:
        return [(src, phi.target) for src, phis in self.choices.items() for phi in phis]

    def without_edge(self, source: TripleId, target: TripleId) -> "Strategy":
        choices = {k: [p for p in v if not (k == source and p.target == target)] for k, v in self.choices.items()}
        return Strategy(choices)

    def with_edge(self, source: TripleId, phi: SelectionFunction) -> "Strategy":
        choices = {k: list(v) for k, v in self.choices.items()}
        choices.setdefault(source, []).append(phi)
        return Strategy(choices)


@dataclass
class ModeSystem:
    """Everything one agent's supervisor needs: modes, triples, maps and the strategy."""

    modes: Dict[str, ModeSpec]
    triples: Dict[TripleId, Triple]
    strategy: Strategy
    transitions: Dict[Tuple[str, str], TransitionMap] = field(default_factory=dict)

    def transition(self, source: str, target: str) -> TransitionMap:
        tm = self.transitions.get((source, target))
        if tm is not None:
            return tm
        if source == target:
            mode = self.modes[source]
            return TransitionMap(source, target, IdentityMap(), mode.chart)
        raise MissingTransitionError(source, target)

    def mode_of(self, tid: TripleId) -> ModeSpec:
        return self.modes[tid.mode]

    def starts(self) -> List[TripleId]:
        return [t for t, triple in self.triples.items() if triple.is_start]

    def ends(self) -> List[TripleId]:
        return [t for t, triple in self.triples.items() if triple.is_end]

    def with_strategy(self, strategy: Strategy) -> "ModeSystem":
        return ModeSystem(self.modes, self.triples, strategy, self.transitions)


class ModeController(Protocol):
    def initial_params(self) -> Tuple[float, ...]: ...

    def params(self, command: Optional[Command], state: np.ndarray, current: Tuple[float, ...]) -> Tuple[float, ...]: ...

    def halted(self, state: np.ndarray) -> bool: ...


class HoldController:
    """Keeps whatever parameters are in force; for plants without actuation."""

    def __init__(self, params: Tuple[float, ...] = ()):
        self._params = tuple(params)

    def initial_params(self):
        return self._params

    def params(self, command, state, current):
        return current

    def halted(self, state):
        return True


@dataclass
class MonitorRecord:
    time: float
    triple: str
    kind: str
    detail: Dict[str, Any] = field(default_factory=dict)


EventSink = Callable[..., None]


class ModeRuntime:
    """Interface, control, orders, monitor and supervisor for one agent."""

    def __init__(
        self,
        agent: str,
        system: ModeSystem,
        channel: OracleChannel,
        controller: ModeController,
        start: Optional[TripleId] = None,
        sink: Optional[EventSink] = None,
    ):
        starts = system.starts()
        if start is None and not starts:
            raise ParameterError(f"agent {agent} has no start triple")
        self.agent = agent
        self.system = system
        self.channel = channel
        self.controller = controller
        self.sink = sink
        self.current: TripleId = start or starts[0]
        self.state_alpha: Optional[np.ndarray] = None
        self.last_measurement: Optional[Measurement] = None
        self.params: Tuple[float, ...] = tuple(controller.initial_params())
        self.executor = self._executor_for(self.current)
        self.monitor_log: List[MonitorRecord] = []
        self.violations: List[MonitorRecord] = []
        self.transfers: List[Tuple[float, str, str]] = []
        self.reached_end = self.triple.is_end
        self.finish_time: Optional[float] = None
        self._post_seen = False
        self.stats = {"steps": 0, "selections": 0, "transfers": 0, "violations": 0}

    @property
    def triple(self) -> Triple:
        return self.system.triples[self.current]

    @property
    def mode(self) -> ModeSpec:
        return self.system.mode_of(self.current)

    @property
    def epsilon(self) -> float:
        return self.channel.epsilon

    def _emit(self, kind: str, **payload):
        if self.sink is not None:
            self.sink(self.channel.time, self.agent, kind, triple=str(self.current), **payload)

    def _executor_for(self, tid: TripleId) -> OrdersExecutor:
        mode = self.system.mode_of(tid)
        return OrdersExecutor(
            self.system.triples[tid].orders, self.channel.lam, mode.metric, self.controller.halted, self._on_timer
        )

    def _on_timer(self, time: float, passes: int):
        self._emit("timer", passes=passes)

    def _set_state(self, value: np.ndarray, cause: str):
        self.state_alpha = np.asarray(value, dtype=float)
        self._emit("state", cause=cause, mode=self.current.mode, value=[float(v) for v in self.state_alpha])

    def in_post(self) -> bool:
        """Measured mode state in post, with no recorded violation on the run."""
        if self.violations or self.state_alpha is None:
            return False
        if self.triple.is_start:
            return True
        return self.triple.post.contains(self.state_alpha, self.mode.metric)

    def begin(self) -> bool:
        return self.observe()

    def observe(self, select: bool = True) -> bool:
        """Measure, update the mode state, run the monitor and maybe transfer. True on transfer."""
        m = self.channel.measure()
        self.last_measurement = m
        self._set_state(self.mode.state_of(m.array), "measure")
        self._monitor()
        if not select or self.reached_end or not self.in_post():
            return False
        return self._select()

    def _monitor(self):
        mode, x, t = self.mode, self.state_alpha, self.channel.time
        if not mode.chart.contains(x, mode.metric):
            self.monitor_log.append(MonitorRecord(t, str(self.current), "outside-chart", {"state": x.tolist()}))
        if mode.avoid is not None and zone_contains(mode.avoid, x, 2 * self.epsilon, mode.metric):
            record = MonitorRecord(t, str(self.current), "avoidance", {"state": x.tolist(), "source": "measured"})
            self.monitor_log.append(record)
            self.violations.append(record)
            self.stats["violations"] += 1
            self._emit("violation", violation="avoidance", source="measured", value=x.tolist())
            logger.warning(f"{self.agent} measured inside the avoidance zone at t={t:.6g} ({self.current})")
        if not self._post_seen and self.in_post():
            self._post_seen = True
            self.monitor_log.append(MonitorRecord(t, str(self.current), "post-reached"))
            self._emit("post-reached")

    def _select(self) -> bool:
        for phi in self.system.strategy.targets(self.current):
            value = phi.evaluate(self.state_alpha, self.mode.metric)
            self.stats["selections"] += 1
            self._emit("select", target=str(phi.target), value=value)
            if value:
                self._transfer(phi.target)
                return True
        return False

    def _transfer(self, target: TripleId):
        source = self.current
        tm = self.system.transition(source.mode, target.mode)
        mapped = mode_transition(tm, self.state_alpha, self.mode.metric)
        self._emit("transfer", target=str(target))
        self.transfers.append((self.channel.time, str(source), str(target)))
        self.stats["transfers"] += 1
        self.current = target
        self._set_state(mapped, "transfer")
        self.executor = self._executor_for(target)
        self._post_seen = False
        logger.debug(f"{self.agent} {source} -> {target} at t={self.channel.time:.6g}")
        if self.triple.is_end:
            self.reached_end = True
            self.finish_time = self.channel.time
            logger.info(f"{self.agent} reached {target} at t={self.finish_time:.6g}")

    def act(self):
        """Advance the orders one step and actuate over the latest measurement."""
        command = self.executor.advance(self.state_alpha, self.channel.time)
        params = tuple(self.controller.params(command, self.state_alpha, self.params))
        self.channel.actuate(ControlPoint(self.last_measurement.value, params))
        self.params = params
        self.stats["steps"] += 1

    def step(self) -> bool:
        transferred = self.observe()
        self.act()
        return transferred


@dataclass(frozen=True)
class OrdersOutcome:
    triple: str
    reached_post: bool
    steps: int
    violated: bool


def run_orders(runtime: ModeRuntime, session: OracleSession, n_max: int) -> OrdersOutcome:
    """Run the current triple's orders until the measured state reaches post (no selection).

    The first measurement must lie in the triple's pre, up to epsilon.
    """
    for n in range(n_max + 1):
        runtime.observe(select=False)
        if n == 0 and not zone_contains(runtime.triple.pre, runtime.state_alpha, -runtime.epsilon, runtime.mode.metric):
            raise PreconditionError(str(runtime.current), runtime.state_alpha)
        if runtime.in_post():
            return OrdersOutcome(str(runtime.current), True, n, bool(runtime.violations))
        if n == n_max:
            break
        runtime.act()
        session.advance()
    return OrdersOutcome(str(runtime.current), False, n_max, bool(runtime.violations))


@dataclass(frozen=True)
class TransferOutcome:
    source: str
    target: Optional[str]
    steps: int
    completeness: str
    failed: bool

    @property
    def exhausted(self) -> bool:
        return self.target is None


def transfer_control(
    runtime: ModeRuntime, session: OracleSession, n_max: int, completeness: str = "assumed"
) -> TransferOutcome:
    """Step the current triple until a selection function fires, for at most n_max steps."""
    source = str(runtime.current)
    for n in range(n_max):
        if runtime.observe():
            return TransferOutcome(source, str(runtime.current), n, completeness, False)
        runtime.act()
        session.advance()
    logger.info(f"{runtime.agent} exhausted {n_max} steps in {source}")
    return TransferOutcome(source, None, n_max, completeness, settings.TRANSFER_EXHAUSTION_FAILS)
