"""
Strategy verification: sampled compatibility and completeness checks, the
strategy graph, the all-paths-reach-end search, bad sets and effective
avoidance zones.

Every set check here is sampled on a grid and is labelled as such.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np
from pydantic import BaseModel, Field

from app.core.config import settings
from app.core.exceptions import LeftChartError, NoStartVertexError, ParameterError
from app.core.geometry import MetricSpec, StatePoint
from app.models.zones import ZoneBase, box, empty, intersection, union
from app.services.modes import ModeSystem, TripleId, _MapBase
from app.services.plant import ControlPoint
from app.services.predictor import ModelSpec, calculate_path

logger = logging.getLogger(__name__)

BADSET_STREAM = 41
SAMPLED = "sampled"
CYCLE_POLICY = "a reachable cycle avoiding every end vertex is a counterexample"


class Pullback:
    """pre of a target triple seen from the source mode: x with tau(x) in zone."""

    def __init__(self, zone: ZoneBase, map: _MapBase, target_metric: MetricSpec, domain: Optional[ZoneBase] = None):
        self.zone = zone
        self.map = map
        self.target_metric = target_metric
        self.domain = domain

    def contains_many(self, points: np.ndarray, metric: MetricSpec, margin: float = 0.0) -> np.ndarray:
        inside = self.zone.contains_many(self.map.apply(points), self.target_metric)
        if self.domain is not None:
            inside &= self.domain.contains_many(points, metric)
        return inside

    def contains(self, x, metric: MetricSpec) -> bool:
        return bool(self.contains_many(np.atleast_2d(np.asarray(x, dtype=float)), metric)[0])

    def breakpoints(self, axis: int, metric: MetricSpec) -> Optional[List[float]]:
        sources = [j for j in range(self.target_metric.dimension) if self.map.axis_source(j) == axis]
        if len(sources) != 1:
            return None
        points = self.zone.breakpoints(sources[0], self.target_metric)
        if points is None or self.domain is None:
            return points
        extra = self.domain.breakpoints(axis, metric)
        return None if extra is None else sorted(set(points) | set(extra))


class GridSampler:
    """Product grid over the bounding box of a checked set.

    Along an axis where every participating zone reports its breakpoints the
    grid holds the box ends, the breakpoints and the midpoints between them,
    which fixes membership of axis-aligned zones exactly. Axes with unknown
    breakpoints, or every axis when dense is set, also get uniform points at
    the density spacing.
    """

    def __init__(
        self,
        density: Optional[float] = None,
        axis_steps: Optional[Sequence[Optional[float]]] = None,
        extent: Optional[Tuple[np.ndarray, np.ndarray]] = None,
        dense: bool = False,
        chunk: int = 200_000,
    ):
        self.density = density if density is not None else settings.DEFAULT_GRID_DENSITY
        if not self.density > 0:
            raise ParameterError("grid density must be positive", density=self.density)
        self.axis_steps = list(axis_steps) if axis_steps is not None else None
        self.extent = extent
        self.dense = dense
        self.chunk = chunk

    def _step(self, axis: int) -> float:
        if self.axis_steps is not None and self.axis_steps[axis] is not None:
            return float(self.axis_steps[axis])
        return self.density

    def axis_values(self, axis: int, lo: float, hi: float, breakpoints: Optional[List[float]]) -> np.ndarray:
        if lo == hi:
            return np.array([lo])
        values = {lo, hi, 0.5 * (lo + hi)}
        if breakpoints is not None:
            inner = sorted({b for b in breakpoints if lo <= b <= hi} | {lo, hi})
            values.update(inner)
            values.update(0.5 * (a + b) for a, b in zip(inner, inner[1:]))
        if breakpoints is None or self.dense:
            n = int(math.ceil((hi - lo) / self._step(axis) - 1e-9)) + 1
            values.update(np.linspace(lo, hi, n).tolist())
        return np.array(sorted(values))

    def axes_for(self, y, participants, metric: MetricSpec, extent=None) -> List[np.ndarray]:
        lo, hi = y.bounds(metric)
        extent = extent if extent is not None else self.extent
        if extent is not None:
            lo, hi = np.maximum(lo, extent[0]), np.minimum(hi, extent[1])
        lo, hi = np.asarray(lo, float), np.asarray(hi, float)
        if np.any(lo > hi):
            return [np.array([]) for _ in range(metric.dimension)]
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ParameterError("sampled set is unbounded; give the sampler an extent")
        axes = []
        for axis in range(metric.dimension):
            merged: Optional[List[float]] = []
            for zone in [y, *participants]:
                points = zone.breakpoints(axis, metric)
                if points is None:
                    merged = None
                    break
                merged.extend(points)
            axes.append(self.axis_values(axis, float(lo[axis]), float(hi[axis]), merged))
        return axes

    def points(self, y, participants, metric: MetricSpec, extent=None) -> Iterator[np.ndarray]:
        """Chunks of grid points that lie in y."""
        axes = self.axes_for(y, participants, metric, extent)
        shape = tuple(len(a) for a in axes)
        total = int(np.prod(shape)) if shape else 0
        for start in range(0, total, self.chunk):
            flat = np.arange(start, min(start + self.chunk, total))
            idx = np.unravel_index(flat, shape)
            pts = np.stack([axes[k][idx[k]] for k in range(len(axes))], axis=1)
            pts = pts[y.contains_many(pts, metric)]
            if len(pts):
                yield pts


@dataclass(frozen=True)
class CompatViolation:
    point: Tuple[float, ...]
    condition: str
    target: Optional[str] = None

    def as_dict(self) -> Dict[str, Any]:
        return {"point": list(self.point), "condition": self.condition, "target": self.target}


@dataclass(frozen=True)
class CompatResult:
    compatible: bool
    violations: Tuple[CompatViolation, ...]
    samples_checked: int
    label: str = SAMPLED

    def __bool__(self) -> bool:
        return self.compatible


def check_compat(
    y,
    targets: Sequence[Tuple[Any, Any]],
    sampler: GridSampler,
    metric: MetricSpec,
    extent=None,
    max_violations: int = 10,
) -> CompatResult:
    """Sampled check that y is covered by the Z_j, witnessed soundly by the phi_j.

    Soundness: phi_j(x) = 1 implies x in Z_j. Coverage: some phi_j fires at x.
    phi_j may be a SelectionFunction or a bare zone.
    """
    zones = [z for z, _ in targets]
    phis = [getattr(p, "zone", p) for _, p in targets]
    labels = [str(getattr(p, "target", j)) for j, (_, p) in enumerate(targets)]
    violations: List[CompatViolation] = []
    checked = 0
    for pts in sampler.points(y, zones + phis, metric, extent):
        checked += len(pts)
        fired = np.zeros((len(pts), len(targets)), dtype=bool)
        for j, (z, phi) in enumerate(zip(zones, phis)):
            fired[:, j] = phi.contains_many(pts, metric)
            unsound = np.flatnonzero(fired[:, j] & ~z.contains_many(pts, metric))
            for i in unsound[: max(0, max_violations - len(violations))]:
                violations.append(CompatViolation(tuple(float(v) for v in pts[i]), "soundness", labels[j]))
        uncovered = np.flatnonzero(~fired.any(axis=1))
        for i in uncovered[: max(0, max_violations - len(violations))]:
            violations.append(CompatViolation(tuple(float(v) for v in pts[i]), "coverage"))
        if len(violations) >= max_violations:
            break
    return CompatResult(not violations, tuple(violations), checked)


@dataclass(frozen=True)
class CompletenessResult:
    triple: TripleId
    complete: bool
    compat: Optional[CompatResult] = None
    reason: str = ""

    def as_dict(self) -> Dict[str, Any]:
        return {
            "triple": str(self.triple),
            "complete": self.complete,
            "reason": self.reason,
            "samples_checked": self.compat.samples_checked if self.compat else 0,
            "violations": [v.as_dict() for v in self.compat.violations] if self.compat else [],
        }


def completeness_at(system: ModeSystem, tid: TripleId, sampler: GridSampler) -> CompletenessResult:
    triple = system.triples[tid]
    if triple.is_end:
        return CompletenessResult(tid, True, reason="end triple")
    mode = system.mode_of(tid)
    targets = []
    for phi in system.strategy.targets(tid):
        if phi.target not in system.triples:
            raise ParameterError(f"strategy names unknown triple {phi.target}", source=str(tid))
        tm = system.transition(tid.mode, phi.target.mode)
        target_mode = system.mode_of(phi.target)
        targets.append((Pullback(system.triples[phi.target].pre, tm.map, target_mode.metric, tm.domain), phi))
    compat = check_compat(triple.post, targets, sampler, mode.metric, extent=mode.chart.bounds(mode.metric))
    if compat.compatible and compat.samples_checked == 0:
        reason = "empty post"
    else:
        reason = "compatible" if compat.compatible else compat.violations[0].condition
    return CompletenessResult(tid, compat.compatible, compat, reason)


@dataclass
class StrategyGraph:
    graph: nx.DiGraph
    completeness: Dict[str, CompletenessResult] = field(default_factory=dict)

    def starts(self) -> List[str]:
        return [n for n, d in self.graph.nodes(data=True) if d.get("start")]

    def is_end(self, node: str) -> bool:
        return bool(self.graph.nodes[node].get("end"))


def build_strategy_graph(system: ModeSystem, sampler: GridSampler) -> StrategyGraph:
    """Vertices are triples; arrows leave a vertex only where the strategy is complete."""
    g = nx.DiGraph()
    table: Dict[str, CompletenessResult] = {}
    for tid, triple in system.triples.items():
        g.add_node(str(tid), mode=tid.mode, start=triple.is_start, end=triple.is_end)
    for tid in system.triples:
        result = completeness_at(system, tid, sampler)
        table[str(tid)] = result
        g.nodes[str(tid)]["complete"] = result.complete
        if not result.complete:
            logger.info(f"strategy incomplete at {tid}: {result.reason}")
            continue
        for phi in system.strategy.targets(tid):
            g.add_edge(str(tid), str(phi.target))
    return StrategyGraph(g, table)


@dataclass(frozen=True)
class VerificationResult:
    verified: bool
    counterexample: Optional[Tuple[str, ...]]
    kind: Optional[str]
    vertices_visited: int
    cycle_policy: str = CYCLE_POLICY


def _terminal_graph(sg: StrategyGraph) -> nx.DiGraph:
    h = sg.graph.copy()
    h.remove_edges_from([e for e in list(h.edges) if sg.is_end(e[0])])
    return h


def verify_strategy(sg: StrategyGraph) -> VerificationResult:
    """Every maximal path from every start vertex must reach an end vertex."""
    starts = sg.starts()
    if not starts:
        raise NoStartVertexError()
    h = _terminal_graph(sg)
    reachable = set(starts)
    for s in starts:
        reachable |= nx.descendants(h, s)
    ordered = [n for n in h.nodes if n in reachable]

    def path_to(node: str) -> List[str]:
        for s in starts:
            if nx.has_path(h, s, node):
                return nx.shortest_path(h, s, node)
        return [node]

    for node in ordered:
        if not sg.is_end(node) and h.out_degree(node) == 0:
            witness = tuple(path_to(node))
            logger.info(f"strategy not verified: dead end at {node}")
            return VerificationResult(False, witness, "dead-end", len(reachable))

    inner = h.subgraph([n for n in ordered if not sg.is_end(n)])
    try:
        cycle = nx.find_cycle(inner)
    except nx.NetworkXNoCycle:
        logger.info(f"strategy verified over {len(reachable)} vertices")
        return VerificationResult(True, None, None, len(reachable))
    entry = cycle[0][0]
    witness = tuple(path_to(entry)[:-1] + [u for u, _ in cycle] + [entry])
    logger.info(f"strategy not verified: end-free cycle through {entry}")
    return VerificationResult(False, witness, "cycle", len(reachable))


class VerificationReport(BaseModel):
    scenario: str
    agent: str
    verified: bool
    kind: Optional[str] = None
    counterexample: Optional[List[str]] = None
    vertices_visited: int
    cycle_policy: str = CYCLE_POLICY
    grid_density: float
    label: str = SAMPLED
    completeness: List[Dict[str, Any]] = Field(default_factory=list)
    edges: List[Tuple[str, str]] = Field(default_factory=list)


def verification_report(
    scenario: str, agent: str, sg: StrategyGraph, result: VerificationResult, sampler: GridSampler
) -> VerificationReport:
    return VerificationReport(
        scenario=scenario,
        agent=agent,
        verified=result.verified,
        kind=result.kind,
        counterexample=list(result.counterexample) if result.counterexample else None,
        vertices_visited=result.vertices_visited,
        cycle_policy=result.cycle_policy,
        grid_density=sampler.density,
        completeness=[
            {**r.as_dict(), "start": sg.graph.nodes[n]["start"], "end": sg.graph.nodes[n]["end"]}
            for n, r in sg.completeness.items()
        ],
        edges=[(u, v) for u, v in sg.graph.edges],
    )


def export_graph(sg: StrategyGraph, path: Union[str, Path]) -> Path:
    """GraphML for .graphml targets, node-link JSON otherwise."""
    path = Path(path)
    if path.suffix.lower() == ".graphml":
        nx.write_graphml(sg.graph, path)
    else:
        path.write_text(json.dumps(nx.node_link_data(sg.graph), indent=2))
    return path


# Bad sets and effective avoidance

@dataclass(frozen=True)
class BadSetEstimate:
    points: np.ndarray
    flags: np.ndarray
    half_cell: np.ndarray
    lam: float
    epsilon: float
    eta: float
    seed: int

    @property
    def bad_points(self) -> np.ndarray:
        return self.points[self.flags]

    @property
    def empty(self) -> bool:
        return not bool(np.any(self.flags))

    def as_zone(self) -> ZoneBase:
        """Union of the grid cells around flagged points."""
        if self.empty:
            return empty()
        return union(*(box(p - self.half_cell, p + self.half_cell) for p in self.bad_points))


def chart_grid(chart: ZoneBase, spacing, metric: MetricSpec) -> Tuple[np.ndarray, np.ndarray]:
    """Cell-centred grid over the chart's bounding box, kept where the chart holds."""
    lo, hi = chart.bounds(metric)
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise ParameterError("chart must be bounded to grid it")
    spacing = np.broadcast_to(np.asarray(spacing, dtype=float), lo.shape)
    counts = np.maximum(1, np.ceil((hi - lo) / spacing - 1e-9).astype(int))
    steps = (hi - lo) / counts
    axes = [lo[k] + steps[k] * (np.arange(counts[k]) + 0.5) for k in range(len(lo))]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(lo))
    return mesh[chart.contains_many(mesh, metric)], steps / 2.0


def compute_bad_set(
    model: ModelSpec,
    chart: ZoneBase,
    lam: float,
    epsilon: float,
    eta: float,
    spacing,
    seed: int,
    metric: MetricSpec,
    params: Optional[Sequence[float]] = None,
    n_random: int = 4,
) -> BadSetEstimate:
    """Flag grid points from which an epsilon-start in the chart may leave it, or end within eta of its edge, in one step."""
    points, half_cell = chart_grid(chart, spacing, metric)
    if not len(points):
        raise ParameterError("bad-set grid is empty")
    free = ModelSpec(model.drift, model.fibration, model.integrator_step, None, metric, model.method)
    p = tuple(params) if params is not None else (0.0,) * model.fibration.param_dimension
    d = metric.dimension
    offsets = [np.zeros(d)]
    for k in range(d):
        e = np.zeros(d)
        e[k] = epsilon * (1 - 1e-9) / metric.sqrt_w[k]
        offsets.extend([e, -e])
    flags = np.zeros(len(points), dtype=bool)
    for i, a in enumerate(points):
        rng = np.random.default_rng([seed, BADSET_STREAM, i])
        starts = [a + o for o in offsets]
        for _ in range(n_random):
            direction = rng.standard_normal(d)
            direction /= np.linalg.norm(direction) or 1.0
            starts.append(a + epsilon * rng.random() ** (1.0 / d) * direction / metric.sqrt_w)
        starts = np.asarray(starts)
        # a true state outside the chart is not in this mode
        starts = starts[chart.contains_many(starts, metric)]
        for s in starts:
            try:
                segment = calculate_path(free, StatePoint.of(s), ControlPoint(StatePoint.of(s), p), 0, lam)
            except LeftChartError:
                flags[i] = True
                break
            reach = segment.samples[1:]
            if not np.all(chart.contains_many(reach, metric)) or chart.depth(reach[-1], metric) < eta:
                flags[i] = True
                break
    logger.info(f"bad set: {int(flags.sum())} of {len(points)} grid points flagged")
    return BadSetEstimate(points, flags, half_cell, lam, epsilon, eta, seed)


def effective_avoidance(a: ZoneBase, chart: ZoneBase, bad: BadSetEstimate, e: ZoneBase) -> ZoneBase:
    """(A and chart) or (bad minus E)"""
    base = intersection(a, chart)
    if bad.empty:
        return base
    return union(base, bad.as_zone() - e)


def check_preconditions_clear(
    system: ModeSystem, bad_sets: Dict[TripleId, BadSetEstimate]
) -> List[Tuple[str, Tuple[float, ...]]]:
    """Triples whose pre meets their bad set, with a witness point each."""
    clashes = []
    for tid, bad in bad_sets.items():
        if bad.empty:
            continue
        metric = system.mode_of(tid).metric
        pre = system.triples[tid].pre
        d = metric.dimension
        corners = np.array(np.meshgrid(*[[-1.0, 1.0]] * d, indexing="ij")).reshape(d, -1).T
        for p in bad.bad_points:
            candidates = np.vstack([p[None, :], p + corners * bad.half_cell])
            hit = np.flatnonzero(pre.contains_many(candidates, metric))
            if hit.size:
                clashes.append((str(tid), tuple(float(v) for v in candidates[hit[0]])))
                break
    return clashes
