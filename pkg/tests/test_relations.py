from __future__ import annotations

import pytest

from rmmlab.exec_graph import EventId, ExecutionGraph
from rmmlab.relations import (
    check_consistent,
    derive_all,
    derive_eco,
    derive_fr,
    derive_hb,
    derive_sw,
    find_data_races,
    has_porf_cycle,
)
from rmmlab.enumeration import enumerate_executions
from rmmlab.lang import parse_litmus

from conftest import read_litmus, random_executions


def naive_closure(pairs) -> frozenset:
    """Transitive closure by repeated expansion; the independent oracle."""
    closure = set(pairs)
    while True:
        extra = {
            (a, d)
            for a, b in closure
            for c, d in closure
            if b == c and (a, d) not in closure
        }
        if not extra:
            return frozenset(closure)
        closure |= extra


@pytest.fixture
def lb_witness() -> ExecutionGraph:
    return ExecutionGraph.from_text(read_litmus("lb_witness.graph"))


def test_witness_hb_is_po_closure_sw_empty(lb_witness):
    g = lb_witness
    assert derive_sw(g) == frozenset()
    assert derive_hb(g) == naive_closure(g.po)


def test_witness_consistent_with_porf_cycle(lb_witness):
    assert check_consistent(lb_witness).consistent
    assert has_porf_cycle(lb_witness)


def test_witness_minus_rf_edge_inconsistent(lb_witness):
    g = lb_witness
    cut = ExecutionGraph(
        events=g.events,
        lab=dict(g.lab),
        po=g.po,
        rf=frozenset(list(g.rf)[:1]),
        mo=g.mo,
    )
    verdict = check_consistent(cut)
    assert not verdict.consistent
    assert any(reason[0] == "NotRfComplete" for reason in verdict.reasons)


def test_hb_eco_match_naive_oracles_on_random_executions(rng):
    graphs = random_executions(rng)
    assert len(graphs) >= 20
    for g in graphs:
        sw = derive_sw(g)
        assert derive_hb(g) == naive_closure(g.po | sw)
        fr = derive_fr(g)
        assert derive_eco(g) == naive_closure(g.rf | g.mo | fr)


def test_derive_all_is_consistent_with_parts(lb_witness):
    d = derive_all(lb_witness)
    assert d.hb == derive_hb(lb_witness)
    assert d.eco == derive_eco(lb_witness)
    assert d.sw == derive_sw(lb_witness)


def test_release_acquire_synchronizes():
    prog = parse_litmus(
        """
        thread { W_rel(X, 1) }
        thread { let a = R_acq(X) in a }
        exists: a = 1
        """
    )
    for e in enumerate_executions(prog):
        g = e.graph
        reads_one = [ev for ev in g.events if g.lab[ev].is_read_like and g.lab[ev].result == 1]
        if reads_one:
            w = [ev for ev in g.events if g.lab[ev].thread == "t1"][0]
            assert (w, reads_one[0]) in derive_sw(g)
            assert (w, reads_one[0]) in derive_hb(g)


def test_nonatomic_racy_writes_detected():
    prog = parse_litmus("thread { [X] := 1 }\nthread { [X] := 2 }")
    reports = [find_data_races(e.graph) for e in enumerate_executions(prog)]
    assert reports and all(not r.race_free for r in reports)
    for r in reports:
        (a, b, loc) = r.races[0]
        assert a.thread != b.thread


def test_synchronized_nonatomic_not_racy():
    prog = parse_litmus(
        """
        thread { [X] := 1; W_rel(F, 1) }
        thread { let f = R_acq(F) in if f == 1 then { let v = [X] in v } }
        """
    )
    for e in enumerate_executions(prog):
        assert find_data_races(e.graph).race_free


def test_free_races_with_unordered_read():
    prog = parse_litmus(
        """
        thread { let a = cons(7) in fork { let v = [a] in v }; free(a) }
        """
    )
    reports = [find_data_races(e.graph) for e in enumerate_executions(prog)]
    assert any(not r.race_free for r in reports)
