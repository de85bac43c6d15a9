"""
Physical oracle: timed measurement queries with error epsilon and actuation requests.

The simulator holds an OracleSession with the truth state; agents only ever
see an OracleChannel, which exposes measure() and actuate().
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.core.config import settings
from app.core.exceptions import OracleRangeError, ParameterError
from app.core.geometry import MetricSpec, StatePoint
from app.services.plant import ControlPoint, Trajectory, TruthPlant, evolve, require_admissible

logger = logging.getLogger(__name__)

MEASURE_STREAM = 21

EventSink = Callable[..., None]


@dataclass(frozen=True)
class OracleConfig:
    epsilon: float
    lam: float
    seed: int = 0
    grid_pitch: Optional[float] = None

    def __post_init__(self):
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise ParameterError("epsilon must be positive", epsilon=self.epsilon)
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise ParameterError("lambda must be positive", lam=self.lam)
        if self.grid_pitch is None:
            object.__setattr__(self, "grid_pitch", self.epsilon * settings.GRID_PITCH_FRACTION)
        if not 0 < self.grid_pitch < self.epsilon:
            raise ParameterError("grid pitch must lie in (0, epsilon)", grid_pitch=self.grid_pitch, epsilon=self.epsilon)

    def time_of(self, n: int) -> float:
        return n * self.lam


@dataclass(frozen=True)
class Measurement:
    step_index: int
    time: float
    value: StatePoint
    grid_indices: Tuple[int, ...] = ()

    @property
    def array(self) -> np.ndarray:
        return self.value.array


@dataclass(frozen=True)
class Ack:
    step_index: int
    time: float
    agent: str
    params: Tuple[float, ...]
    changed: bool


def grid_steps(cfg: OracleConfig, metric: MetricSpec) -> np.ndarray:
    """Per-axis snapping step; snapping moves a point by at most pitch/2 in the metric."""
    return cfg.grid_pitch / np.sqrt(metric.dimension * metric.w)


def perturb(cfg: OracleConfig, truth_value: np.ndarray, n: int, metric: MetricSpec, stream: int = 0) -> Measurement:
    d = metric.dimension
    rng = np.random.default_rng([cfg.seed, MEASURE_STREAM, stream, n])
    direction = rng.standard_normal(d)
    norm = float(np.linalg.norm(direction))
    direction = direction / norm if norm > 0 else np.eye(d)[0]
    radius = (cfg.epsilon - cfg.grid_pitch) * rng.random() ** (1.0 / d)
    noisy = truth_value + radius * direction / metric.sqrt_w
    steps = grid_steps(cfg, metric)
    indices = np.rint(noisy / steps).astype(np.int64)
    value = indices * steps
    return Measurement(n, cfg.time_of(n), StatePoint.of(value), tuple(int(i) for i in indices))


def measure(cfg: OracleConfig, truth: Trajectory, n: int, metric: MetricSpec, stream: int = 0) -> Measurement:
    """Measurement of the truth trajectory at time n*lambda."""
    j = truth.index_of(cfg.time_of(n)) if n >= 0 else None
    if j is None:
        raise OracleRangeError(n, (truth.start_time, truth.end_time))
    return perturb(cfg, truth.states[j], n, metric, stream)


class OracleSession:
    """Simulator side of the oracle protocol; owns the truth state and the clock."""

    def __init__(
        self,
        plant: TruthPlant,
        cfg: OracleConfig,
        x0: Sequence[float],
        params0: Sequence[float],
        fine_dt: float,
        sink: Optional[EventSink] = None,
    ):
        if fine_dt > cfg.lam / 10.0 + 1e-12:
            raise ParameterError("fine_dt must be at most lambda/10", fine_dt=fine_dt, lam=cfg.lam)
        self.plant = plant
        self.cfg = cfg
        self.metric = plant.metric
        self.fine_dt = fine_dt
        self.sink = sink
        self.step_index = 0
        self._state = np.asarray(x0, dtype=float)
        self._params = np.asarray(params0, dtype=float)
        require_admissible(plant.fibration, self._state, self._params)
        self.history: List[Trajectory] = []
        self.stats = {"measurements": 0, "actuations": 0, "rejected": 0, "steps": 0}

    @property
    def time(self) -> float:
        return self.cfg.time_of(self.step_index)

    @property
    def params(self) -> Tuple[float, ...]:
        return tuple(float(v) for v in self._params)

    def _emit(self, agent: str, kind: str, **payload):
        if self.sink is not None:
            self.sink(self.time, agent, kind, **payload)

    def measure(self, agent: str = "plant", stream: int = 0) -> Measurement:
        m = perturb(self.cfg, self._state, self.step_index, self.metric, stream)
        self.stats["measurements"] += 1
        self._emit(agent, "measure", step=m.step_index, stream=stream, value=list(m.value.coords))
        return m

    def actuate(self, b: ControlPoint, agent: str = "plant", slot: Optional[slice] = None) -> Ack:
        """Apply b's parameters from the next fine step.

        b's parameters fill the agent's slot of the parameter vector; the
        result is checked for admissibility at pi(b).
        """
        slot = slot if slot is not None else slice(0, len(self._params))
        params = self._params.copy()
        params[slot] = b.param_array
        try:
            require_admissible(self.plant.fibration, b.base.array, params)
        except Exception:
            self.stats["rejected"] += 1
            raise
        changed = not np.array_equal(params, self._params)
        self._params = params
        self.stats["actuations"] += 1
        self._emit(
            agent, "actuate", step=self.step_index, params=list(b.params), base=list(b.base.coords), changed=changed
        )
        return Ack(self.step_index, self.time, agent, b.params, changed)

    def advance(self) -> Trajectory:
        """Evolve the truth through one lambda with the held parameters."""
        t0 = self.time
        t1 = self.cfg.time_of(self.step_index + 1)
        c = ControlPoint(StatePoint.of(self._state), tuple(self._params))
        piece = evolve(self.plant, c, t0, t1, self.fine_dt, self.cfg.seed, check_control=False)
        self._state = piece.final.copy()
        self.step_index += 1
        self.stats["steps"] += 1
        self.history.append(piece)
        return piece

    def truth(self) -> Trajectory:
        """Fine-resolution truth so far (simulator side only)."""
        if not self.history:
            return Trajectory(np.array([self.time]), self._state[None, :].copy())
        out = self.history[0]
        for piece in self.history[1:]:
            out = out.extend(piece)
        return out

    def channel(self, agent: str, stream: int = 0, slot: Optional[slice] = None) -> "OracleChannel":
        if slot is None:
            slot = self.plant.fibration.slice_for(agent)
        return OracleChannel(self, agent, stream, slot)


@dataclass
class OracleChannel:
    """Agent side of the oracle: measurements and acknowledgements only."""

    _session: OracleSession = field(repr=False)
    agent: str
    stream: int
    slot: slice

    @property
    def epsilon(self) -> float:
        return self._session.cfg.epsilon

    @property
    def lam(self) -> float:
        return self._session.cfg.lam

    @property
    def time(self) -> float:
        return self._session.time

    def measure(self) -> Measurement:
        return self._session.measure(self.agent, self.stream)

    def actuate(self, b: ControlPoint) -> Ack:
        return self._session.actuate(b, self.agent, self.slot)


def replay_measurements(
    plant: TruthPlant,
    cfg: OracleConfig,
    x0: Sequence[float],
    params0: Sequence[float],
    fine_dt: float,
    events: Sequence[Dict],
    slots: Dict[str, slice],
) -> List[Measurement]:
    """Drive a fresh session with recorded actuations and re-take recorded measurements.

    events are trace payload dicts with kind, agent, step and either params
    (actuate) or stream (measure), in trace order.
    """
    session = OracleSession(plant, cfg, x0, params0, fine_dt)
    out: List[Measurement] = []
    for event in events:
        while session.step_index < event["step"]:
            session.advance()
        if event["kind"] == "measure":
            out.append(session.measure(event["agent"], event.get("stream", 0)))
        elif event["kind"] == "actuate":
            base = StatePoint.of(event["base"]) if event.get("base") is not None else StatePoint.of(session._state)
            session.actuate(ControlPoint(base, event["params"]), event["agent"], slots.get(event["agent"]))
    return out
