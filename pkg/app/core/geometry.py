"""
State-space geometry: points, weighted metrics and eta-tubes
"""

import logging
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Optional, Protocol, Sequence, Tuple, Union

import numpy as np

from app.core.config import settings
from app.core.exceptions import DimensionMismatchError, ParameterError, TubeCoverageError

if TYPE_CHECKING:
    from app.models.zones import Zone

logger = logging.getLogger(__name__)

ArrayLike = Union["StatePoint", Sequence[float], np.ndarray]


@dataclass(frozen=True)
class StatePoint:
    """A point of the state space X."""

    coords: Tuple[float, ...]

    def __post_init__(self):
        coords = tuple(float(c) for c in self.coords)
        if not all(math.isfinite(c) for c in coords):
            raise ParameterError("state coordinates must be finite", coords=list(coords))
        object.__setattr__(self, "coords", coords)

    @classmethod
    def of(cls, values: Iterable[float]) -> "StatePoint":
        return cls(tuple(np.asarray(values, dtype=float).ravel()))

    @property
    def dimension(self) -> int:
        return len(self.coords)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.coords, dtype=float)

    def __len__(self) -> int:
        return len(self.coords)

    def __getitem__(self, i):
        return self.coords[i]


def as_array(x: ArrayLike) -> np.ndarray:
    if isinstance(x, StatePoint):
        return x.array
    return np.asarray(x, dtype=float)


@dataclass(frozen=True)
class MetricSpec:
    """Constant diagonal weighted Euclidean metric."""

    weights: Tuple[float, ...]

    def __post_init__(self):
        weights = tuple(float(w) for w in self.weights)
        if not weights:
            raise ParameterError("metric needs at least one weight")
        if not all(math.isfinite(w) and w > 0 for w in weights):
            raise ParameterError("metric weights must be positive and finite", weights=list(weights))
        object.__setattr__(self, "weights", weights)

    @classmethod
    def uniform(cls, dimension: int) -> "MetricSpec":
        return cls((1.0,) * dimension)

    @property
    def dimension(self) -> int:
        return len(self.weights)

    @property
    def w(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=float)

    @property
    def sqrt_w(self) -> np.ndarray:
        return np.sqrt(self.w)

    def check(self, points: np.ndarray, what: str = "point") -> np.ndarray:
        """Return points as a float array, raising on a dimension mismatch."""
        points = np.asarray(points, dtype=float)
        actual = points.shape[-1] if points.ndim else 1
        if actual != self.dimension:
            raise DimensionMismatchError(self.dimension, actual, what)
        return points

    def distance(self, a: ArrayLike, b: ArrayLike) -> float:
        a = self.check(as_array(a), "first point")
        b = self.check(as_array(b), "second point")
        return float(np.sqrt(np.sum(self.w * (a - b) ** 2)))

    def distance_many(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        a = self.check(a)
        b = self.check(b)
        return np.sqrt(np.sum(self.w * (a - b) ** 2, axis=-1))


def distance(a: ArrayLike, b: ArrayLike, m: MetricSpec) -> float:
    return m.distance(a, b)


def zone_contains(z: "Zone", x: ArrayLike, margin: float = 0.0, metric: Optional[MetricSpec] = None) -> bool:
    """Membership of x in z shrunk (margin > 0) or grown (margin < 0)."""
    point = as_array(x)
    metric = metric or MetricSpec.uniform(point.shape[-1])
    return bool(z.contains_many(point[None, :], metric, margin)[0])


class PathLike(Protocol):
    start_time: float
    end_time: float

    def at(self, t: float) -> np.ndarray: ...

    def at_many(self, times: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class Tube:
    """The open eta-neighbourhood of a computed path."""

    path: PathLike
    radius: float

    def __post_init__(self):
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise ParameterError("tube radius must be positive", radius=self.radius)

    def covers(self, time: float) -> bool:
        return self.path.start_time <= time <= self.path.end_time

    def center(self, time: float) -> np.ndarray:
        if not self.covers(time):
            raise TubeCoverageError(time, self.path.start_time, self.path.end_time)
        return self.path.at(time)

    def contains(self, time: float, x: ArrayLike, m: MetricSpec) -> bool:
        return m.distance(x, self.center(time)) < self.radius


def tube_contains(t: Tube, time: float, x: ArrayLike, m: MetricSpec) -> bool:
    return t.contains(time, x, m)


@dataclass(frozen=True)
class ClearanceResult:
    clear: bool
    samples_checked: int
    witness_time: Optional[float] = None
    witness_point: Optional[Tuple[float, ...]] = None
    label: str = "sampled"

    def __bool__(self) -> bool:
        return self.clear


def sample_times(start: float, end: float, step: float) -> np.ndarray:
    if not step > 0:
        raise ParameterError("sample step must be positive", sample_step=step)
    n = int(math.floor((end - start) / step + 1e-9))
    times = start + step * np.arange(n + 1)
    if times[-1] < end:
        times = np.append(times, end)
    return times


def tube_clear_of_zone(
    t: Tube,
    a: "Zone",
    m: MetricSpec,
    sample_step: Optional[float] = None,
    margin: float = 0.0,
) -> ClearanceResult:
    """Sampled check that no centerline sample comes within eta + margin of a.

    The default step is SAMPLE_STEP_FRACTION of the path's time step when it has one. The
    result is a sampled check, not a proof.
    """
    if sample_step is None:
        lam = getattr(t.path, "lam", None) or (t.path.end_time - t.path.start_time)
        sample_step = lam * settings.SAMPLE_STEP_FRACTION
    times = sample_times(t.path.start_time, t.path.end_time, sample_step)
    centers = t.path.at_many(times)
    depths = a.depth_many(m.check(centers), m)
    offending = np.flatnonzero(depths > -(t.radius + margin))
    if offending.size == 0:
        return ClearanceResult(True, len(times))
    i = int(offending[0])
    logger.debug(f"tube meets zone at t={times[i]:.6g}")
    return ClearanceResult(False, len(times), float(times[i]), tuple(float(v) for v in centers[i]))
