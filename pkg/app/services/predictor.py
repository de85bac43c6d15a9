"""
Computed behaviour: calculate-path, the measure/control/predict loops,
eta-tubes and the empirical (lambda, epsilon, eta) checker
"""

import logging
import math
import time as _time
from dataclasses import dataclass
from typing import Callable, List, Optional, Protocol, Tuple

import numpy as np

from app.core.exceptions import ADSError, LeftChartError, ParameterError, StepError
from app.core.geometry import MetricSpec, StatePoint, Tube
from app.models.zones import ZoneBase
from app.services.integrators import integrate
from app.services.oracle import Measurement, OracleChannel, OracleSession
from app.services.plant import ControlFibration, ControlPoint, TruthPlant, VectorField, evolve, require_admissible

logger = logging.getLogger(__name__)

LEE_STREAM = 31
EMPIRICAL_LABEL = "empirical (sampled), not a proof"


@dataclass(frozen=True)
class ModelSpec:
    """The mathematical model used for prediction; may differ from the truth drift."""

    drift: VectorField
    fibration: ControlFibration
    integrator_step: float
    chart: Optional[ZoneBase] = None
    metric: Optional[MetricSpec] = None
    method: str = "rk4"

    def __post_init__(self):
        if not self.integrator_step > 0:
            raise ParameterError("integrator_step must be positive", integrator_step=self.integrator_step)


@dataclass(frozen=True)
class PathSegment:
    start_index: int
    initial: StatePoint
    control: ControlPoint
    times: np.ndarray
    samples: np.ndarray

    @property
    def start_time(self) -> float:
        return float(self.times[0])

    @property
    def end_time(self) -> float:
        return float(self.times[-1])

    def at(self, t: float) -> np.ndarray:
        return np.array([np.interp(t, self.times, self.samples[:, k]) for k in range(self.samples.shape[1])])


@dataclass(frozen=True)
class DisjointPath:
    """Disjoint union of per-step segments; neighbours need not agree at shared ends."""

    segments: Tuple[PathSegment, ...]
    lam: float

    def __post_init__(self):
        if not self.segments:
            raise ParameterError("a path needs at least one segment")
        object.__setattr__(self, "segments", tuple(self.segments))

    @property
    def start_time(self) -> float:
        return self.segments[0].start_time

    @property
    def end_time(self) -> float:
        return self.segments[-1].end_time

    def segment_for(self, t: float) -> PathSegment:
        # Segment k owns [k*lam, (k+1)*lam); the last one also owns its end.
        k = int(math.floor((t - self.start_time) / self.lam + 1e-12))
        return self.segments[min(max(k, 0), len(self.segments) - 1)]

    def at(self, t: float) -> np.ndarray:
        return self.segment_for(t).at(t)

    def at_many(self, times: np.ndarray) -> np.ndarray:
        return np.vstack([self.at(float(t)) for t in times])

    def export(self) -> List[dict]:
        return [
            {"start_index": s.start_index, "times": s.times.tolist(), "samples": s.samples.tolist()}
            for s in self.segments
        ]


def calculate_path(model: ModelSpec, a: StatePoint, b: ControlPoint, n: int, lam: float) -> PathSegment:
    """Integrate the model over [n*lam, (n+1)*lam] from a with b's parameters."""
    if model.integrator_step > lam + 1e-12:
        raise ParameterError("integrator_step must not exceed lambda", integrator_step=model.integrator_step, lam=lam)
    b = b.rebased(a)
    p = b.param_array
    require_admissible(model.fibration, a.array, p)

    def f(x, t):
        return model.drift(x, t) + model.fibration.control_field(x, p, t)

    times, samples = integrate(f, n * lam, a.array, (n + 1) * lam, model.integrator_step)
    samples[0] = a.array
    if model.chart is not None:
        metric = model.metric or MetricSpec.uniform(samples.shape[1])
        inside = model.chart.contains_many(samples, metric)
        if not np.all(inside):
            first = int(np.argmin(inside))
            raise LeftChartError(times[first], samples[first], "model")
    elif not np.all(np.isfinite(samples)):
        first = int(np.argmin(np.all(np.isfinite(samples), axis=1)))
        raise LeftChartError(times[first], samples[max(first - 1, 0)], "model")
    return PathSegment(n, a, b, times, samples)


def build_tube(path: DisjointPath, eta: float) -> Tube:
    return Tube(path, eta)


def export_segments(path: DisjointPath, sink: Callable[..., None], agent: str = "plant") -> int:
    """Write each predicted segment to an event sink as a "segment" event."""
    for seg in path.export():
        sink(seg["times"][0], agent, "segment", **seg)
    return len(path.segments)


@dataclass(frozen=True)
class ControlRun:
    path: DisjointPath
    controls: Tuple[ControlPoint, ...]
    measurements: Tuple[Measurement, ...]


def measure_predict(n_max: int, session: OracleSession, model: ModelSpec, control_fixed: ControlPoint, agent: str = "plant") -> DisjointPath:
    if n_max < 1:
        raise ParameterError("n_max must be at least 1", n_max=n_max)
    channel = session.channel(agent)
    segments = []
    for n in range(n_max):
        try:
            m = channel.measure()
            b = control_fixed.rebased(m.value)
            if n == 0:
                channel.actuate(b)
            segments.append(calculate_path(model, m.value, b, n, channel.lam))
            session.advance()
        except ADSError as e:
            raise StepError(n, e)
    return DisjointPath(tuple(segments), session.cfg.lam)


Chooser = Callable[[Measurement], ControlPoint]


def _control_step(n, channel: OracleChannel, model: ModelSpec, choose: Chooser):
    m = channel.measure()
    b = choose(m)
    if b.base != m.value:
        raise ParameterError("chooser must return a control over the measured state", base=list(b.base.coords))
    channel.actuate(b)
    return m, b, calculate_path(model, m.value, b, n, channel.lam)


def measure_control_predict(
    n_max: int, session: OracleSession, model: ModelSpec, chooser: Chooser, agent: str = "plant"
) -> ControlRun:
    if n_max < 1:
        raise ParameterError("n_max must be at least 1", n_max=n_max)
    channel = session.channel(agent)
    segments, controls, measurements = [], [], []
    for n in range(n_max):
        try:
            m, b, segment = _control_step(n, channel, model, chooser)
            session.advance()
        except ADSError as e:
            raise StepError(n, e)
        measurements.append(m)
        controls.append(b)
        segments.append(segment)
    return ControlRun(DisjointPath(tuple(segments), channel.lam), tuple(controls), tuple(measurements))


class Clock(Protocol):
    def now(self) -> float: ...

    def sleep(self, seconds: float) -> None: ...


class SimulatedClock:
    """Deterministic clock: sleeping advances simulated seconds."""

    def __init__(self):
        self._t = 0.0

    def now(self) -> float:
        return self._t

    def sleep(self, seconds: float) -> None:
        self._t += max(0.0, seconds)


class WallClock:
    def now(self) -> float:
        return _time.perf_counter()

    def sleep(self, seconds: float) -> None:
        _time.sleep(max(0.0, seconds))


TimedChooser = Callable[[Measurement, Clock], ControlPoint]


@dataclass(frozen=True)
class TimingReport:
    budget: float
    elapsed: Tuple[float, ...]
    overruns: Tuple[int, ...]
    clock: str

    @property
    def within_budget(self) -> bool:
        return not self.overruns


def measure_control_algorithm_predict(
    n_max: int,
    session: OracleSession,
    model: ModelSpec,
    algorithm: TimedChooser,
    budget: float,
    clock: Optional[Clock] = None,
    agent: str = "plant",
) -> Tuple[ControlRun, TimingReport]:
    """measure_control_predict with a timed chooser; overruns are flagged, not fatal."""
    if n_max < 1:
        raise ParameterError("n_max must be at least 1", n_max=n_max)
    lam = session.cfg.lam
    if not 0 < budget <= lam:
        raise ParameterError("budget must lie in (0, lambda]", budget=budget, lam=lam)
    clock = clock or SimulatedClock()
    channel = session.channel(agent)
    elapsed: List[float] = []

    def timed(m: Measurement) -> ControlPoint:
        t0 = clock.now()
        b = algorithm(m, clock)
        elapsed.append(clock.now() - t0)
        return b

    segments, controls, measurements = [], [], []
    for n in range(n_max):
        try:
            m, b, segment = _control_step(n, channel, model, timed)
            session.advance()
        except ADSError as e:
            raise StepError(n, e)
        if elapsed[-1] > budget:
            logger.warning(f"chooser overran its budget at step {n}: {elapsed[-1]:.4g}s > {budget:.4g}s")
        measurements.append(m)
        controls.append(b)
        segments.append(segment)
    overruns = tuple(i for i, e in enumerate(elapsed) if e > budget)
    report = TimingReport(budget, tuple(elapsed), overruns, type(clock).__name__)
    return ControlRun(DisjointPath(tuple(segments), lam), tuple(controls), tuple(measurements)), report


def gronwall_bound(epsilon: float, lipschitz: float, lam: float) -> float:
    return epsilon * math.exp(lipschitz * lam)


@dataclass(frozen=True)
class LeeReport:
    lam: float
    epsilon: float
    eta: float
    eta_observed: float
    samples_used: int
    verdict: bool
    analytic_bound: Optional[float] = None
    worst_anchor: Optional[Tuple[float, ...]] = None
    label: str = EMPIRICAL_LABEL

    def as_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "epsilon": self.epsilon,
            "eta": self.eta,
            "eta_observed": self.eta_observed,
            "samples_used": self.samples_used,
            "verdict": self.verdict,
            "analytic_bound": self.analytic_bound,
            "worst_anchor": list(self.worst_anchor) if self.worst_anchor else None,
            "label": self.label,
        }


def _sample_anchor(rng, region: ZoneBase, lo, hi, metric, tries: int = 1000) -> np.ndarray:
    for _ in range(tries):
        a = rng.uniform(lo, hi)
        if region.contains(a, metric):
            return a
    raise ParameterError("could not sample an anchor inside the region")


def check_lee_property(
    model: ModelSpec,
    truth_plant: TruthPlant,
    b: ControlPoint,
    lam: float,
    epsilon: float,
    eta: float,
    region: ZoneBase,
    n_samples: int,
    seed: int,
    fine_dt: Optional[float] = None,
) -> LeeReport:
    """Monte-Carlo estimate of the worst one-step divergence between truth and model.

    Sample i draws from its own generator, so a larger sample set always
    contains the smaller one.
    """
    if n_samples < 1:
        raise ParameterError("n_samples must be at least 1", n_samples=n_samples)
    if epsilon < 0:
        raise ParameterError("epsilon must be non-negative", epsilon=epsilon)
    metric = truth_plant.metric
    lo, hi = region.bounds(metric)
    clo, chi = truth_plant.chart_box.bounds(metric)
    lo, hi = np.maximum(lo, clo), np.minimum(hi, chi)
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise ParameterError("region must be bounded for anchor sampling")
    h = min(model.integrator_step, lam)
    fine_dt = fine_dt or h / 10.0
    d = metric.dimension

    worst, worst_anchor = 0.0, None
    for i in range(n_samples):
        rng = np.random.default_rng([seed, LEE_STREAM, i])
        a = _sample_anchor(rng, region, lo, hi, metric)
        x0 = a.copy()
        if epsilon > 0:
            direction = rng.standard_normal(d)
            direction /= np.linalg.norm(direction) or 1.0
            x0 = a + epsilon * rng.random() ** (1.0 / d) * direction / metric.sqrt_w
        segment = calculate_path(model, StatePoint.of(a), b.rebased(a), 0, lam)
        truth = evolve(truth_plant, b.rebased(x0), 0.0, lam, fine_dt, seed + i)
        f_at = np.vstack([truth.at_time(float(t)) for t in segment.times])
        divergence = float(np.max(metric.distance_many(f_at, segment.samples)))
        if divergence > worst:
            worst, worst_anchor = divergence, tuple(float(v) for v in a)

    bound = None
    if truth_plant.drift.lipschitz_hint is not None:
        bound = gronwall_bound(epsilon, truth_plant.drift.lipschitz_hint, lam)
    logger.info(f"(lambda={lam}, epsilon={epsilon}) observed eta {worst:.6g} over {n_samples} samples")
    return LeeReport(lam, epsilon, eta, worst, n_samples, worst < eta, bound, worst_anchor)
