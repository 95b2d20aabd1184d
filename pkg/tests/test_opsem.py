from __future__ import annotations

import pytest

from rmmlab.arc import ArcScenario, build_arc_program
from rmmlab.enumeration import BoundExceeded, enumerate_executions
from rmmlab.exec_graph import ExecutionGraph
from rmmlab.lang import parse_litmus
from rmmlab.opsem import (
    GraphGuided,
    check_four_state,
    config_corresponds,
    explore_safety,
    hb_prefix_closed,
    initial_configuration,
    replay_prefix,
)
from rmmlab.relations import derive_hb

from conftest import read_litmus


def _explore(text: str, **kw):
    return explore_safety(parse_litmus(text), **kw)


def test_alloc_write_read_free_safe():
    v = _explore("thread { let a = cons(3) in [a] := 4; let x = [a] in free(a) }")
    assert v.safe and v.explored > 1


def test_double_free_unsafe():
    v = _explore("thread { let a = cons(3) in free(a); free(a) }")
    assert not v.safe
    assert v.stuck_trace and v.stuck_trace[-1].rule == "stuck"


def test_use_after_free_unsafe():
    v = _explore("thread { let a = cons(3) in free(a); let x = [a] in x }")
    assert not v.safe


def test_racy_nonatomic_writes_unsafe():
    v = _explore("thread { [X] := 1 }\nthread { [X] := 2 }")
    assert not v.safe


def test_disjoint_nonatomic_writes_safe():
    v = _explore("thread { [X] := 1 }\nthread { [Y] := 2 }")
    assert v.safe


def test_rmw_without_atomic_mode_unsafe():
    v = _explore(
        "thread { FAA_rlx(X, 1) } "
        "spec c { v0=0; rG=nat; rL=nat; rho0=0; "
        "pre FAA_rlx(+1) = (0,0); post FAA_rlx(+1) @ z>=0 = (0,0); }"
    )
    assert not v.safe


def test_atomic_mode_conversion_and_rmw_safe():
    v = _explore(
        "thread { begin_atomic(X, c); FAA_rlx(X, 1); end_atomic(X) } "
        "spec c { v0=0; rG=nat; rL=nat; rho0=0; "
        "pre FAA_rlx(+1) = (0,0); post FAA_rlx(+1) @ z>=0 = (0,0); }"
    )
    assert v.safe


def test_initial_configuration_zeroes_named_globals():
    program = parse_litmus(read_litmus("lb.lit"))
    gamma = initial_configuration(program)
    assert set(gamma.heap.values()) == {0}
    assert len(gamma.threads) == 2


def test_bound_exceeded():
    program = build_arc_program(ArcScenario(clones=1))
    with pytest.raises(BoundExceeded):
        explore_safety(program, max_configs=5)


def test_arc_safe_under_witness_search():
    program = build_arc_program(ArcScenario(clones=1))
    v = explore_safety(program)
    assert v.safe
    assert v.blocked_count > 0  # fences block until every decrement ran


def test_arc_misuse_clone_in_child_unsafe():
    # cloning concurrently with the last drop: the decrement can fire first,
    # leaving the increment's tied precondition unsatisfiable
    spec = read_litmus("arc.spec").strip()
    program = parse_litmus(
        spec
        + """
        thread {
          let a = cons(1, 42) in
          begin_atomic(a, arc);
          fork {
            FAA_rlx(a, 1);
            let n = FAA_rel(a, -1) in
            if n == 1 then { fence_acq(a); free(a); free(a + 1) }
          };
          let n = FAA_rel(a, -1) in
          if n == 1 then { fence_acq(a); free(a); free(a + 1) }
        }
        """
    )
    assert not explore_safety(program).safe


@pytest.fixture(scope="module")
def arc1():
    program = build_arc_program(ArcScenario(clones=1))
    executions = enumerate_executions(program)
    assert len(executions) == 2
    return program, [e.graph for e in executions]


def test_arc_guided_exploration_safe(arc1):
    program, graphs = arc1
    for g in graphs:
        v = explore_safety(program, GraphGuided(g))
        assert v.safe


def _linearizations(g: ExecutionGraph, rng, count: int):
    hb = derive_hb(g)
    outs = []
    for _ in range(count):
        left, order = set(g.events), []
        while left:
            ready = [x for x in left if not any((a, x) in hb for a in left if a != x)]
            pick = rng.choice(sorted(ready))
            order.append(pick)
            left.remove(pick)
        outs.append(order)
    return outs


def test_replay_order_determinism(arc1, rng):
    """Any happens-before-consistent order replays to the same configuration."""
    program, graphs = arc1
    for g in graphs:
        orders = _linearizations(g, rng, 8)
        keys = {replay_prefix(program, g, order).key() for order in orders}
        assert len(keys) == 1


def test_replay_configs_satisfy_four_state_lemma(arc1):
    program, graphs = arc1
    for g in graphs:
        (order,) = _linearizations(g, __import__("random").Random(0), 1)
        for cut in range(len(order) + 1):
            prefix = order[:cut]
            if not hb_prefix_closed(g, frozenset(prefix)):
                continue
            gamma = replay_prefix(program, g, prefix)
            assert check_four_state(gamma)


def test_prefix_configurations_correspond(arc1):
    program, graphs = arc1
    for g in graphs:
        (order,) = _linearizations(g, __import__("random").Random(1), 1)
        for cut in range(len(order) + 1):
            prefix = frozenset(order[:cut])
            if not hb_prefix_closed(g, prefix):
                continue
            gamma = replay_prefix(program, g, order[:cut])
            assert config_corresponds(program, g, prefix, gamma)
