"""
Zone algebra over the state space.

Zones are pydantic models so scenario files can declare them directly. Every
zone answers vectorised membership over an (N, d) array and a signed depth:
the distance to the boundary for inside points, minus the distance to the
zone for outside points. Depth is exact for boxes, balls and halfspaces and a
conservative bound for composites.
"""

import math
from typing import Annotated, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, model_validator

from app.core.geometry import MetricSpec

Bounds = Tuple[np.ndarray, np.ndarray]


class ZoneBase(BaseModel):
    model_config = ConfigDict(frozen=True, ser_json_inf_nan="constants")

    @property
    def dimension(self) -> Optional[int]:
        return None

    def member_many(self, points: np.ndarray, metric: MetricSpec) -> np.ndarray:
        raise NotImplementedError

    def depth_many(self, points: np.ndarray, metric: MetricSpec) -> np.ndarray:
        raise NotImplementedError

    def bounds(self, metric: MetricSpec) -> Bounds:
        d = metric.dimension
        return np.full(d, -np.inf), np.full(d, np.inf)

    def breakpoints(self, axis: int, metric: MetricSpec) -> Optional[List[float]]:
        """Finite coordinates along axis where membership can change; None if unknown."""
        return None

    def contains_many(self, points: np.ndarray, metric: MetricSpec, margin: float = 0.0) -> np.ndarray:
        points = np.atleast_2d(metric.check(points))
        if self.dimension is not None and self.dimension != points.shape[1]:
            from app.core.exceptions import DimensionMismatchError

            raise DimensionMismatchError(self.dimension, points.shape[1], f"{self.kind} zone")
        member = self.member_many(points, metric)
        if margin == 0:
            return member
        depth = self.depth_many(points, metric)
        if margin > 0:
            return member & (depth >= margin)
        return member | (depth >= margin)

    def contains(self, x, metric: MetricSpec, margin: float = 0.0) -> bool:
        from app.core.geometry import as_array

        return bool(self.contains_many(as_array(x)[None, :], metric, margin)[0])

    def depth(self, x, metric: MetricSpec) -> float:
        from app.core.geometry import as_array

        return float(self.depth_many(np.atleast_2d(as_array(x)), metric)[0])

    def __or__(self, other: "ZoneBase") -> "UnionZone":
        return UnionZone(children=[self, other])

    def __and__(self, other: "ZoneBase") -> "IntersectionZone":
        return IntersectionZone(children=[self, other])

    def __invert__(self) -> "ComplementZone":
        return ComplementZone(child=self)

    def __sub__(self, other: "ZoneBase") -> "IntersectionZone":
        return IntersectionZone(children=[self, ComplementZone(child=other)])


class EmptyZone(ZoneBase):
    kind: Literal["empty"] = "empty"

    def member_many(self, points, metric):
        return np.zeros(len(points), dtype=bool)

    def depth_many(self, points, metric):
        return np.full(len(points), -np.inf)

    def bounds(self, metric):
        d = metric.dimension
        return np.full(d, np.inf), np.full(d, -np.inf)

    def breakpoints(self, axis, metric):
        return []


class BoxZone(ZoneBase):
    kind: Literal["box"] = "box"
    lower: Tuple[float, ...]
    upper: Tuple[float, ...]
    lower_open: Optional[Tuple[bool, ...]] = None
    upper_open: Optional[Tuple[bool, ...]] = None

    @model_validator(mode="after")
    def _check(self):
        n = len(self.lower)
        if len(self.upper) != n:
            raise ValueError(f"box bounds differ in length ({n} vs {len(self.upper)})")
        for flags in (self.lower_open, self.upper_open):
            if flags is not None and len(flags) != n:
                raise ValueError("box open flags must match the bound length")
        if any(math.isnan(v) for v in self.lower + self.upper):
            raise ValueError("box bounds must not be NaN")
        bad = [i for i in range(n) if self.lower[i] > self.upper[i]]
        if bad:
            raise ValueError(f"box lower bound exceeds upper bound on axes {bad}")
        return self

    @property
    def dimension(self) -> int:
        return len(self.lower)

    def _arrays(self):
        n = len(self.lower)
        lo_open = np.asarray(self.lower_open or (False,) * n)
        hi_open = np.asarray(self.upper_open or (False,) * n)
        return np.asarray(self.lower, float), np.asarray(self.upper, float), lo_open, hi_open

    def member_many(self, points, metric):
        lo, hi, lo_open, hi_open = self._arrays()
        above = np.where(lo_open, points > lo, points >= lo)
        below = np.where(hi_open, points < hi, points <= hi)
        return np.all(above & below, axis=1)

    def depth_many(self, points, metric):
        lo, hi, _, _ = self._arrays()
        sw = metric.sqrt_w
        excess = np.maximum(np.maximum(lo - points, points - hi), 0.0)
        outside = np.sqrt(np.sum(metric.w * excess**2, axis=1))
        with np.errstate(invalid="ignore"):
            slack = np.minimum(points - lo, hi - points) * sw
        inside = np.min(slack, axis=1)
        return np.where(outside > 0, -outside, inside)

    def bounds(self, metric):
        return np.asarray(self.lower, float), np.asarray(self.upper, float)

    def breakpoints(self, axis, metric):
        return [v for v in (self.lower[axis], self.upper[axis]) if math.isfinite(v)]


class BallZone(ZoneBase):
    kind: Literal["ball"] = "ball"
    center: Tuple[float, ...]
    radius: float = Field(ge=0)
    axes: Optional[Tuple[int, ...]] = None
    open: bool = False

    @model_validator(mode="after")
    def _check(self):
        if self.axes is not None and len(self.axes) != len(self.center):
            raise ValueError("ball axes must match the centre length")
        return self

    @property
    def dimension(self) -> Optional[int]:
        return len(self.center) if self.axes is None else None

    def _axes(self):
        return list(self.axes) if self.axes is not None else list(range(len(self.center)))

    def _dist(self, points, metric):
        axes = self._axes()
        diff = points[:, axes] - np.asarray(self.center, float)
        return np.sqrt(np.sum(metric.w[axes] * diff**2, axis=1))

    def member_many(self, points, metric):
        dist = self._dist(points, metric)
        return dist < self.radius if self.open else dist <= self.radius

    def depth_many(self, points, metric):
        return self.radius - self._dist(points, metric)

    def bounds(self, metric):
        lo, hi = super().bounds(metric)
        for c, axis in zip(self.center, self._axes()):
            half = self.radius / math.sqrt(metric.weights[axis])
            lo[axis], hi[axis] = c - half, c + half
        return lo, hi

    def breakpoints(self, axis, metric):
        if axis not in self._axes():
            return []
        if len(self._axes()) > 1:
            return None
        c = self.center[0]
        half = self.radius / math.sqrt(metric.weights[axis])
        return [c - half, c + half]


class HalfspaceZone(ZoneBase):
    """The set normal . x <= offset (strict when open)."""

    kind: Literal["halfspace"] = "halfspace"
    normal: Tuple[float, ...]
    offset: float
    open: bool = False

    @model_validator(mode="after")
    def _check(self):
        if not any(self.normal):
            raise ValueError("halfspace normal must be non-zero")
        return self

    @property
    def dimension(self) -> int:
        return len(self.normal)

    def _lhs(self, points):
        return points @ np.asarray(self.normal, float)

    def member_many(self, points, metric):
        lhs = self._lhs(points)
        return lhs < self.offset if self.open else lhs <= self.offset

    def depth_many(self, points, metric):
        a = np.asarray(self.normal, float)
        scale = math.sqrt(float(np.sum(a**2 / metric.w)))
        return (self.offset - self._lhs(points)) / scale

    def _single_axis(self) -> Optional[int]:
        nonzero = [i for i, a in enumerate(self.normal) if a != 0]
        return nonzero[0] if len(nonzero) == 1 else None

    def bounds(self, metric):
        lo, hi = super().bounds(metric)
        axis = self._single_axis()
        if axis is not None:
            edge = self.offset / self.normal[axis]
            if self.normal[axis] > 0:
                hi[axis] = edge
            else:
                lo[axis] = edge
        return lo, hi

    def breakpoints(self, axis, metric):
        if self.normal[axis] == 0:
            return []
        if self._single_axis() == axis:
            return [self.offset / self.normal[axis]]
        return None


class UnionZone(ZoneBase):
    kind: Literal["union"] = "union"
    children: List["Zone"] = Field(default_factory=list)

    @property
    def dimension(self) -> Optional[int]:
        return next((c.dimension for c in self.children if c.dimension is not None), None)

    def member_many(self, points, metric):
        out = np.zeros(len(points), dtype=bool)
        for child in self.children:
            out |= child.member_many(points, metric)
        return out

    def depth_many(self, points, metric):
        out = np.full(len(points), -np.inf)
        for child in self.children:
            out = np.maximum(out, child.depth_many(points, metric))
        return out

    def bounds(self, metric):
        d = metric.dimension
        lo, hi = np.full(d, np.inf), np.full(d, -np.inf)
        for child in self.children:
            clo, chi = child.bounds(metric)
            lo, hi = np.minimum(lo, clo), np.maximum(hi, chi)
        return lo, hi

    def breakpoints(self, axis, metric):
        return _merge_breakpoints(self.children, axis, metric)


class IntersectionZone(ZoneBase):
    kind: Literal["intersection"] = "intersection"
    children: List["Zone"] = Field(default_factory=list)

    @property
    def dimension(self) -> Optional[int]:
        return next((c.dimension for c in self.children if c.dimension is not None), None)

    def member_many(self, points, metric):
        out = np.ones(len(points), dtype=bool)
        for child in self.children:
            out &= child.member_many(points, metric)
        return out

    def depth_many(self, points, metric):
        out = np.full(len(points), np.inf)
        for child in self.children:
            out = np.minimum(out, child.depth_many(points, metric))
        return out

    def bounds(self, metric):
        lo, hi = super().bounds(metric)
        for child in self.children:
            clo, chi = child.bounds(metric)
            lo, hi = np.maximum(lo, clo), np.minimum(hi, chi)
        return lo, hi

    def breakpoints(self, axis, metric):
        return _merge_breakpoints(self.children, axis, metric)


class ComplementZone(ZoneBase):
    """Complement of the child grown by margin."""

    kind: Literal["complement"] = "complement"
    child: "Zone"
    margin: float = Field(default=0.0, ge=0)

    @property
    def dimension(self) -> Optional[int]:
        return self.child.dimension

    def member_many(self, points, metric):
        if self.margin == 0:
            return ~self.child.member_many(points, metric)
        return self.child.depth_many(points, metric) < -self.margin

    def depth_many(self, points, metric):
        return -(self.child.depth_many(points, metric) + self.margin)

    def breakpoints(self, axis, metric):
        if self.margin == 0:
            return self.child.breakpoints(axis, metric)
        return None


def _merge_breakpoints(children, axis, metric) -> Optional[List[float]]:
    merged: List[float] = []
    for child in children:
        points = child.breakpoints(axis, metric)
        if points is None:
            return None
        merged.extend(points)
    return sorted(set(merged))


Zone = Annotated[
    Union[EmptyZone, BoxZone, BallZone, HalfspaceZone, UnionZone, IntersectionZone, ComplementZone],
    Field(discriminator="kind"),
]

UnionZone.model_rebuild()
IntersectionZone.model_rebuild()
ComplementZone.model_rebuild()

zone_adapter: TypeAdapter = TypeAdapter(Zone)


def parse_zone(data) -> ZoneBase:
    return zone_adapter.validate_python(data)


# Constructors used by scenario builders and tests

def box(lower: Sequence[float], upper: Sequence[float], lower_open=None, upper_open=None) -> BoxZone:
    return BoxZone(
        lower=tuple(float(v) for v in lower),
        upper=tuple(float(v) for v in upper),
        lower_open=None if lower_open is None else tuple(bool(v) for v in lower_open),
        upper_open=None if upper_open is None else tuple(bool(v) for v in upper_open),
    )


def interval(lo: float, hi: float, lo_open: bool = False, hi_open: bool = False) -> BoxZone:
    return box([lo], [hi], [lo_open], [hi_open])


def ball(center: Sequence[float], radius: float, axes: Optional[Sequence[int]] = None, open: bool = False) -> BallZone:
    return BallZone(
        center=tuple(float(v) for v in center),
        radius=float(radius),
        axes=None if axes is None else tuple(int(a) for a in axes),
        open=open,
    )


def halfspace(normal: Sequence[float], offset: float, open: bool = False) -> HalfspaceZone:
    return HalfspaceZone(normal=tuple(float(v) for v in normal), offset=float(offset), open=open)


def union(*zones: ZoneBase) -> UnionZone:
    return UnionZone(children=list(zones))


def intersection(*zones: ZoneBase) -> IntersectionZone:
    return IntersectionZone(children=list(zones))


def complement(zone: ZoneBase, margin: float = 0.0) -> ComplementZone:
    return ComplementZone(child=zone, margin=margin)


def empty() -> EmptyZone:
    return EmptyZone()
