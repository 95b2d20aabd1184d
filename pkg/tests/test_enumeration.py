from __future__ import annotations

import pytest

from rmmlab.enumeration import (
    BoundExceeded,
    Bounds,
    check_litmus,
    count_races,
    enumerate_executions,
)
from rmmlab.exec_graph import check_well_formed
from rmmlab.lang import parse_litmus
from rmmlab.relations import check_consistent

from conftest import read_litmus


# Frozen counts for the bundled corpus: total consistent executions per test.
CORPUS_EXECUTIONS = {"lb.lit": 4, "lbf.lit": 4, "lbd.lit": 2}


@pytest.mark.parametrize("name,count", sorted(CORPUS_EXECUTIONS.items()))
def test_corpus_execution_counts(name, count):
    program = parse_litmus(read_litmus(name))
    verdict = check_litmus(program)
    assert verdict.executions == count
    assert verdict.observable


def test_every_enumerated_graph_well_formed_and_consistent():
    for name in CORPUS_EXECUTIONS:
        program = parse_litmus(read_litmus(name))
        for e in enumerate_executions(program):
            assert check_well_formed(e.graph).ok
            assert check_consistent(e.graph).consistent


def test_single_thread_no_choice_points():
    program = parse_litmus("thread { [X] := 1; let a = [X] in a }\nexists: a = 1")
    executions = enumerate_executions(program)
    assert len(executions) == 1
    assert executions[0].registers == {"a": 1}
    assert check_litmus(program).observable


def test_unwritten_value_not_observable():
    program = parse_litmus(read_litmus("lb.lit").replace("a = 1 /\\ b = 1", "a = 2"))
    verdict = check_litmus(program)
    assert not verdict.observable
    assert verdict.executions == 4  # executions unchanged, postcondition never met


def test_enumeration_deterministic():
    program = parse_litmus(read_litmus("lbf.lit"))
    keys1 = [e.graph.canonical_key() for e in enumerate_executions(program)]
    keys2 = [e.graph.canonical_key() for e in enumerate_executions(program)]
    assert keys1 == keys2
    assert len(set(keys1)) == len(keys1)


def test_lb_witness_among_enumerated():
    program = parse_litmus(read_litmus("lb.lit"))
    witness_text = read_litmus("lb_witness.graph")
    keys = {e.graph.canonical_key() for e in enumerate_executions(program)}
    assert witness_text in keys


def test_count_races_verdicts():
    racy = parse_litmus("thread { [X] := 1 }\nthread { [X] := 2 }")
    assert not count_races(racy).race_free
    quiet = parse_litmus("thread { [X] := 1 }\nthread { [Y] := 2 }")
    assert count_races(quiet).race_free
    empty = parse_litmus("thread { 0 }")
    assert count_races(empty).race_free


def test_bound_exceeded_on_tiny_event_budget():
    program = parse_litmus(read_litmus("lb.lit"))
    with pytest.raises(BoundExceeded):
        enumerate_executions(program, Bounds(max_events=2))
