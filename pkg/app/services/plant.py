"""
Ground-truth plant: vector fields, the control fibration and seeded evolution
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from app.core.exceptions import InadmissibleControlError, LeftChartError, ParameterError
from app.core.geometry import MetricSpec, StatePoint, as_array
from app.models.zones import ZoneBase
from app.services.integrators import rk4_step, step_count

logger = logging.getLogger(__name__)

DISTURBANCE_STREAM = 11

Predicate = Tuple[str, Callable[[np.ndarray, np.ndarray], bool]]


@dataclass(frozen=True)
class VectorField:
    evaluator: Callable[[np.ndarray, float], np.ndarray]
    lipschitz_hint: Optional[float] = None
    name: str = "custom"

    def __call__(self, x: np.ndarray, t: float) -> np.ndarray:
        return self.evaluator(x, t)


@dataclass(frozen=True)
class ControlFibration:
    """The control set C over X: admissibility predicates plus the control field."""

    param_dimension: int
    control_field: Callable[[np.ndarray, np.ndarray, float], np.ndarray]
    predicates: Tuple[Predicate, ...] = ()
    layout: Dict[str, slice] = field(default_factory=dict)

    def failed_predicate(self, x: np.ndarray, p: np.ndarray) -> Optional[str]:
        if len(p) != self.param_dimension:
            return f"param_dimension=={self.param_dimension}"
        if not np.all(np.isfinite(p)):
            return "finite"
        for name, check in self.predicates:
            if not check(x, p):
                return name
        return None

    def admissible(self, x: np.ndarray, p: np.ndarray) -> bool:
        return self.failed_predicate(x, p) is None

    def slice_for(self, agent: str) -> slice:
        return self.layout.get(agent, slice(0, self.param_dimension))


@dataclass(frozen=True)
class ControlPoint:
    base: StatePoint
    params: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(float(v) for v in self.params))

    @property
    def pi(self) -> StatePoint:
        return self.base

    @property
    def param_array(self) -> np.ndarray:
        return np.asarray(self.params, dtype=float)

    def rebased(self, base) -> "ControlPoint":
        base = base if isinstance(base, StatePoint) else StatePoint.of(base)
        return ControlPoint(base, self.params)


@dataclass(frozen=True)
class Disturbance:
    """Per-fine-step uniform perturbation within amplitude per axis."""

    amplitude: Tuple[float, ...]

    def __post_init__(self):
        amplitude = tuple(float(a) for a in self.amplitude)
        if not all(math.isfinite(a) and a >= 0 for a in amplitude):
            raise ParameterError("disturbance amplitude must be finite and non-negative", amplitude=list(amplitude))
        object.__setattr__(self, "amplitude", amplitude)

    @property
    def active(self) -> bool:
        return any(self.amplitude)


@dataclass(frozen=True)
class TruthPlant:
    drift: VectorField
    fibration: ControlFibration
    chart_box: ZoneBase
    metric: MetricSpec
    disturbance: Optional[Disturbance] = None

    def velocity(self, x: np.ndarray, p: np.ndarray, t: float) -> np.ndarray:
        return self.drift(x, t) + self.fibration.control_field(x, p, t)

    def metadata(self) -> Dict[str, object]:
        return {
            "drift": self.drift.name,
            "param_dimension": self.fibration.param_dimension,
            "disturbance": list(self.disturbance.amplitude) if self.disturbance else None,
        }


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray

    @property
    def start_time(self) -> float:
        return float(self.times[0])

    @property
    def end_time(self) -> float:
        return float(self.times[-1])

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def index_of(self, t: float) -> Optional[int]:
        i = int(np.searchsorted(self.times, t))
        for j in (i - 1, i):
            if 0 <= j < len(self.times) and math.isclose(self.times[j], t, rel_tol=1e-9, abs_tol=1e-9):
                return j
        return None

    def at_time(self, t: float) -> np.ndarray:
        """State at t; exact on the sample grid, linearly interpolated between samples."""
        j = self.index_of(t)
        if j is not None:
            return self.states[j]
        return np.array([np.interp(t, self.times, self.states[:, k]) for k in range(self.states.shape[1])])

    def extend(self, other: "Trajectory") -> "Trajectory":
        """Concatenate a continuation that starts at this trajectory's end."""
        return Trajectory(np.concatenate([self.times, other.times[1:]]), np.vstack([self.states, other.states[1:]]))


def check_admissible(fib: ControlFibration, x, p: Sequence[float]) -> bool:
    return fib.admissible(as_array(x), np.asarray(p, dtype=float))


def require_admissible(fib: ControlFibration, x, p: Sequence[float]) -> None:
    x = as_array(x)
    p = np.asarray(p, dtype=float)
    failed = fib.failed_predicate(x, p)
    if failed is not None:
        raise InadmissibleControlError(failed, p, x)


def evolve(
    plant: TruthPlant,
    c0: ControlPoint,
    s: float,
    t1: float,
    fine_dt: float,
    seed: int,
    check_control: bool = True,
) -> Trajectory:
    """Integrate the plant from pi(c0) at time s to t1 holding c0's parameters.

    Deterministic for a given seed. Raises LeftChartError at the first fine
    sample outside the chart box.
    """
    x0 = c0.base.array
    p = c0.param_array
    if check_control:
        require_admissible(plant.fibration, x0, p)
    n = step_count(s, t1, fine_dt)
    h = (t1 - s) / n if n else 0.0
    times = s + h * np.arange(n + 1)
    if n:
        times[-1] = t1
    states = np.empty((n + 1, len(x0)))
    states[0] = x0

    noise = None
    if plant.disturbance is not None and plant.disturbance.active:
        amplitude = np.asarray(plant.disturbance.amplitude)
        rng = np.random.default_rng([seed, DISTURBANCE_STREAM, int(round(s / fine_dt))])
        noise = rng.uniform(-1.0, 1.0, size=(n, len(x0))) * amplitude

    def f(x, t):
        return plant.velocity(x, p, t)

    x = x0
    for k in range(n):
        x = rk4_step(f, times[k], x, h)
        if noise is not None:
            x = x + noise[k]
        if not np.all(np.isfinite(x)):
            raise LeftChartError(times[k + 1], states[k], "plant")
        states[k + 1] = x

    inside = plant.chart_box.contains_many(states, plant.metric)
    if not np.all(inside):
        first = int(np.argmin(inside))
        raise LeftChartError(times[first], states[first], "plant")
    return Trajectory(times, states)
