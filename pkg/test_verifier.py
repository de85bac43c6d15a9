"""
Tests for strategy verification: sampled compatibility, the strategy graph and bad sets
"""

import json

import networkx as nx
import numpy as np
import pytest

from app.core.exceptions import NoStartVertexError, ParameterError
from app.models.schemas import StrategyOverrides
from app.models.zones import empty, interval
from app.services.modes import TripleId
from app.services.scenarios import racing
from app.services.scenarios.engine import verify_scenario
from app.services.scenarios.loader import build_spec
from app.services.verifier import (
    GridSampler,
    StrategyGraph,
    check_compat,
    check_preconditions_clear,
    completeness_at,
    compute_bad_set,
    effective_avoidance,
    export_graph,
    verify_strategy,
)
from conftest import make_model, make_plant


def _graph(n, edges, starts=(0,), ends=()):
    g = nx.DiGraph()
    for v in range(n):
        g.add_node(str(v), start=v in starts, end=v in ends)
    g.add_edges_from((str(u), str(v)) for u, v in edges)
    return StrategyGraph(g)


def _all_paths_end(sg: StrategyGraph) -> bool:
    """Walk every path from every start; a repeat or a non-end sink fails."""

    def walk(node, seen):
        if sg.is_end(node):
            return True
        if node in seen:
            return False
        successors = list(sg.graph.successors(node))
        if not successors:
            return False
        return all(walk(s, seen | {node}) for s in successors)

    return all(walk(s, frozenset()) for s in sg.starts())


def test_check_compat_accepts_a_cover(metric1):
    targets = [(interval(0.0, 0.6), interval(0.0, 0.5)), (interval(0.4, 1.0), interval(0.5, 1.0))]
    result = check_compat(interval(0.0, 1.0), targets, GridSampler(0.1), metric1)
    assert result
    assert result.samples_checked > 0
    assert result.label == "sampled"


def test_check_compat_finds_a_coverage_gap(metric1):
    targets = [(interval(0.0, 0.4), interval(0.0, 0.4)), (interval(0.6, 1.0), interval(0.6, 1.0))]
    result = check_compat(interval(0.0, 1.0), targets, GridSampler(0.1), metric1)
    assert not result
    gap = result.violations[0]
    assert gap.condition == "coverage"
    assert 0.4 < gap.point[0] < 0.6


def test_check_compat_finds_an_unsound_selection(metric1):
    targets = [(interval(0.0, 0.5), interval(0.0, 0.7)), (interval(0.5, 1.0), interval(0.7, 1.0))]
    result = check_compat(interval(0.0, 1.0), targets, GridSampler(0.1), metric1)
    assert not result
    assert {v.condition for v in result.violations} == {"soundness"}
    assert all(0.5 < v.point[0] <= 0.7 for v in result.violations)


def test_grid_density_must_be_positive():
    with pytest.raises(ParameterError):
        GridSampler(0.0)


def test_fig8_strategy_is_verified(fig8_spec):
    outcome = verify_scenario(fig8_spec)
    assert outcome.result.verified
    assert outcome.result.counterexample is None
    assert outcome.result.vertices_visited == 7
    assert len(outcome.report.completeness) == 7
    assert all(r["complete"] for r in outcome.report.completeness)
    assert ("Sta,1", "Beta,1") in outcome.report.edges


def test_removing_an_arrow_leaves_a_dead_end(fig8_spec):
    cfg = fig8_spec.config.model_copy(
        update={"strategy_overrides": StrategyOverrides(remove=[("Eps,1", "End,1")])}
    )
    outcome = verify_scenario(build_spec(cfg))
    assert not outcome.result.verified
    assert outcome.result.kind == "dead-end"
    witness = outcome.result.counterexample
    assert witness[0] == "Sta,1"
    assert witness[-1] == "Eps,1"
    incomplete = [r for r in outcome.report.completeness if not r["complete"]]
    assert [r["triple"] for r in incomplete] == ["Eps,1"]


def test_end_free_cycle_is_a_counterexample():
    sg = _graph(4, [(0, 1), (1, 2), (2, 1), (1, 3)], ends=(3,))
    result = verify_strategy(sg)
    assert not result.verified
    assert result.kind == "cycle"
    assert result.counterexample[0] == "0"
    assert result.counterexample[-1] in result.counterexample[1:-1]


def test_edges_out_of_an_end_are_ignored():
    sg = _graph(3, [(0, 1), (1, 2), (2, 1)], ends=(1,))
    assert verify_strategy(sg).verified


def test_no_start_vertex():
    with pytest.raises(NoStartVertexError):
        verify_strategy(_graph(2, [(0, 1)], starts=(), ends=(1,)))


def test_verify_agrees_with_path_enumeration():
    rng = np.random.default_rng(2024)
    for _ in range(100):
        n = int(rng.integers(2, 9))
        edges = [(u, v) for u in range(n) for v in range(n) if u != v and rng.random() < 0.25]
        ends = tuple(v for v in range(1, n) if rng.random() < 0.3)
        sg = _graph(n, edges, ends=ends)
        result = verify_strategy(sg)
        assert result.verified == _all_paths_end(sg), (edges, ends)
        if not result.verified:
            witness = result.counterexample
            assert sg.graph.nodes[witness[0]]["start"]
            assert all(sg.graph.has_edge(u, v) for u, v in zip(witness, witness[1:]))


def test_racing_strategy_is_verified(racing_spec):
    outcome = verify_scenario(racing_spec, agent="car1")
    assert outcome.result.verified, outcome.report.completeness
    assert outcome.result.vertices_visited == 11


def test_racing_without_the_second_bend_is_not_verified(racing_spec):
    cfg = racing_spec.config.model_copy(
        update={"strategy_overrides": StrategyOverrides(remove=[("Str,3", "Ben,2")])}
    )
    outcome = verify_scenario(build_spec(cfg), agent="car1")
    assert not outcome.result.verified
    assert outcome.result.kind == "dead-end"
    assert outcome.result.counterexample[-1] == "Str,3"


def test_racing_gap_between_give_way_and_right_of_way(racing_spec):
    params = racing_spec.config.params.model_copy(update={"k4": 1090.0})
    system = racing.build_agent_system(params, "car1")
    result = completeness_at(system, TripleId.parse("Str,2"), GridSampler(0.1))
    assert not result.complete
    assert result.reason == "coverage"
    other = result.compat.violations[0].point[2]
    assert 1090.0 < other < 1110.0


def test_bad_set_on_a_growing_line(linear_plant, metric1):
    model = make_model(linear_plant)
    bad = compute_bad_set(model, interval(0.0, 2.0), 0.1, 0.01, 0.02, 0.1, seed=0, metric=metric1)
    assert len(bad.points) == 20
    assert not bad.empty
    assert np.all(bad.bad_points[:, 0] > 1.5)
    # x' = x carries anything near the top across the edge within one step
    assert 1.95 in np.round(bad.bad_points[:, 0], 6)

    again = compute_bad_set(model, interval(0.0, 2.0), 0.1, 0.01, 0.02, 0.1, seed=0, metric=metric1)
    assert np.array_equal(again.flags, bad.flags)

    zone = effective_avoidance(empty(), interval(0.0, 2.0), bad, interval(1.9, 2.0))
    assert zone.contains([1.85], metric1)
    assert not zone.contains([1.95], metric1)
    assert not zone.contains([1.0], metric1)


def test_bad_set_under_constant_flow(metric1):
    model = make_model(make_plant("constant", velocity=[1.0]))
    chart = interval(0.0, 10.0)
    bad = compute_bad_set(model, chart, 1.0, 0.05, 0.1, 0.25, seed=0, metric=metric1)
    assert len(bad.points) == 40
    # only the outflow edge: one step carries a+eps to within eta of 10
    assert np.array_equal(bad.flags, bad.points[:, 0] > 9.0 - (0.05 + 0.1))
    assert not bad.flags[0]

    zone = effective_avoidance(empty(), chart, bad, interval(9.5, 10.0))
    assert zone.contains([9.0], metric1)
    assert zone.contains([8.8], metric1)
    assert not zone.contains([9.7], metric1)
    assert not zone.contains([8.5], metric1)


def test_static_bad_set_hugs_the_edges(static_plant, metric1):
    bad = compute_bad_set(make_model(static_plant), interval(0.0, 10.0), 1.0, 0.05, 0.1, 0.25, seed=0, metric=metric1)
    x = bad.points[:, 0]
    assert np.array_equal(bad.flags, (x < 0.15) | (x > 9.85))


def test_everything_is_bad_when_one_step_outruns_the_chart(metric1):
    model = make_model(make_plant("constant", velocity=[1.0]))
    bad = compute_bad_set(model, interval(0.0, 0.5), 1.0, 0.01, 0.01, 0.1, seed=0, metric=metric1)
    assert len(bad.points) == 5
    assert np.all(bad.flags)


def test_preconditions_must_clear_the_bad_set(linear_plant, linear_spec, metric1):
    bad = compute_bad_set(make_model(linear_plant), interval(0.0, 2.0), 0.1, 0.01, 0.02, 0.1, seed=0, metric=metric1)
    system = linear_spec.agent().system
    clashes = check_preconditions_clear(system, {TripleId.parse("Sta,1"): bad, TripleId.parse("End,1"): bad})
    assert [name for name, _ in clashes] == ["End,1"]
    assert clashes[0][1][0] >= 1.4


def test_export_graph(fig8_spec, tmp_path):
    sg = verify_scenario(fig8_spec).graph
    as_json = export_graph(sg, tmp_path / "fig8.json")
    data = json.loads(as_json.read_text())
    assert len(data["nodes"]) == 7
    as_graphml = export_graph(sg, tmp_path / "fig8.graphml")
    back = nx.read_graphml(as_graphml)
    assert set(back.nodes) == set(sg.graph.nodes)
    assert back.number_of_edges() == sg.graph.number_of_edges()
