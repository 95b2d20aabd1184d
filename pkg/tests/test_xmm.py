from __future__ import annotations

import pytest

from rmmlab.arc import ArcScenario, build_arc_program
from rmmlab.enumeration import check_litmus, enumerate_executions
from rmmlab.exec_graph import ExecutionGraph
from rmmlab.lang import parse_litmus
from rmmlab.relations import derive_hb
from rmmlab.xmm import (
    GroundingOrder,
    ReExecuteStep,
    check_grounded,
    check_weakly_grounded,
    committed_nondetermined_releases,
    xmm_reachable,
    ymm_reachable,
)

from conftest import read_litmus


def _witness(name: str):
    program = parse_litmus(read_litmus(name))
    verdict = check_litmus(program)
    assert verdict.observable
    return program, verdict.witness.graph


def test_lb_constructible_one_re_execution():
    program, g = _witness("lb.lit")
    r = ymm_reachable(program, g, max_re_exec=1)
    assert r.constructible
    assert r.trace.re_execute_count == 1


def test_lbf_constructible_one_re_execution():
    program, g = _witness("lbf.lit")
    r = ymm_reachable(program, g, max_re_exec=1)
    assert r.constructible
    assert r.trace.re_execute_count == 1


def test_lbd_not_constructible_within_three():
    program, g = _witness("lbd.lit")
    r = ymm_reachable(program, g, max_re_exec=3)
    assert r.verdict == "NotWithinBounds"
    assert not r.constructible


def test_lb_constructible_low_level():
    program, g = _witness("lb.lit")
    assert xmm_reachable(program, g, max_re_exec=1).constructible


def test_straightline_target_needs_no_re_execution():
    program = parse_litmus("thread { [X] := 1; let a = [X] in a }")
    (execution,) = enumerate_executions(program)
    r = ymm_reachable(program, execution.graph, max_re_exec=0)
    assert r.constructible
    assert r.trace.re_execute_count == 0


def test_inconsistent_target_rejected():
    program, g = _witness("lb.lit")
    broken = ExecutionGraph(
        events=g.events, lab=dict(g.lab), po=g.po, rf=frozenset(), mo=g.mo
    )
    assert not ymm_reachable(program, broken).constructible


@pytest.mark.parametrize("name", ["lb.lit", "lbf.lit"])
def test_validated_plans_commit_no_nondetermined_releases(name):
    program, g = _witness(name)
    r = ymm_reachable(program, g, max_re_exec=2)
    assert r.constructible
    plans = [s for s in r.trace.steps if isinstance(s, ReExecuteStep)]
    assert plans
    for step in plans:
        assert committed_nondetermined_releases(step.graph, step.plan) == []


def _hb_linearization(g: ExecutionGraph) -> GroundingOrder:
    hb = derive_hb(g)
    order, left = [], set(g.events)
    while left:
        e = min(x for x in left if not any((a, x) in hb for a in left if a != x))
        order.append(e)
        left.remove(e)
    return GroundingOrder(tuple(order))


@pytest.mark.parametrize("clones", [0, 1, 2])
def test_arc_executions_grounded(clones):
    program = build_arc_program(ArcScenario(clones=clones))
    spec_table = dict(program.specs)
    executions = enumerate_executions(program)
    assert executions
    for e in executions:
        assert check_grounded(e.graph, spec_table).grounded
        assert check_weakly_grounded(e.graph, _hb_linearization(e.graph), spec_table)


def test_disabled_counter_read_not_grounded():
    # an increment whose rf source leaves the counter at 0 is disabled
    program = build_arc_program(ArcScenario(clones=1))
    spec_table = dict(program.specs)
    (g0, *_) = [e.graph for e in enumerate_executions(program)]
    relabeled = {}
    for e in sorted(g0.events):
        lab = g0.lab[e]
        if lab.op.kind.is_rmw and lab.result == 1 and lab.op.update.apply(0) > 0:
            relabeled[e] = lab.__class__(
                lab.thread, lab.location, 0, lab.op, lab.pseudo, lab.spec_name
            )
        else:
            relabeled[e] = lab
    mutated = ExecutionGraph(
        events=g0.events, lab=relabeled, po=g0.po, rf=g0.rf, mo=g0.mo, rmw=g0.rmw
    )
    assert not check_grounded(mutated, spec_table).grounded
