from __future__ import annotations

import pytest

from rmmlab.arc import (
    ArcScenario,
    arc_source,
    build_arc_program,
    check_arc_sufficiency,
    check_execution,
    check_lemma_decrement,
    check_lemma_fence,
    counter_location,
    decrements_reading_one,
    frees_follow_payload_accesses,
    mutate_enable_increment_at_zero,
    mutate_relaxed_decrement,
    mutate_zero_decrement_pre,
    run_arc,
)
from rmmlab.enumeration import enumerate_executions
from rmmlab.lang import parse_litmus, print_program
from rmmlab.tied import arc_spec

from conftest import read_litmus


def test_scenario_validation():
    assert ArcScenario(clones=2).drops == 3
    with pytest.raises(ValueError):
        ArcScenario(clones=4)
    with pytest.raises(ValueError):
        ArcScenario(clones=-1)


def test_built_program_parses_and_matches_bundled_corpus():
    source = arc_source(ArcScenario(clones=1))
    assert source == read_litmus("arc1.lit")
    program = build_arc_program(ArcScenario(clones=1))
    assert print_program(program) == print_program(parse_litmus(source))
    assert "arc" in program.specs and program.specs["arc"] == arc_spec()


def test_lemma_decrement_holds():
    report = check_lemma_decrement(bound=6)
    assert report.holds
    assert report.counterexample is None and report.double_decrement is None


def test_lemma_decrement_vacuous_at_zero():
    assert check_lemma_decrement(bound=0).holds


def test_lemma_decrement_mutation_counterexample():
    report = check_lemma_decrement(bound=6, spec=mutate_enable_increment_at_zero(arc_spec()))
    assert not report.holds
    assert report.counterexample is not None
    assert report.double_decrement is not None


def test_lemma_fence_holds_with_counting_cross_check():
    report = check_lemma_fence(bound=8)
    assert report.holds
    assert report.counting_checked > 0 and report.counting_holds


def test_lemma_fence_vacuous_at_one():
    assert check_lemma_fence(bound=1).holds


def test_lemma_fence_fails_for_relaxed_decrements():
    report = check_lemma_fence(bound=8, spec=mutate_relaxed_decrement(arc_spec()))
    assert not report.holds
    assert report.counterexample is not None
    # the counterexample leaves surplus global resource at the fence
    assert report.counterexample.omega.glob > 0


def test_sufficiency_holds_and_exhibits_zero_read_failure():
    report = check_arc_sufficiency(range(-2, 6), 8)
    assert report.sufficient
    assert report.result.counterexample is None
    assert report.zero_read_attempts > 0
    assert report.zero_read_covering == 0
    assert report.needed_global == 1
    assert report.max_observed_global == 0  # the global resource is exhausted


def test_sufficiency_mutation_counterexample():
    report = check_arc_sufficiency(range(-2, 6), 6, spec=mutate_zero_decrement_pre(arc_spec()))
    assert not report.sufficient
    op, value, witness = report.result.counterexample
    assert value == 0  # the decrement fires at the disabled value


@pytest.mark.parametrize("clones,executions", [(0, 1), (1, 2), (2, 8)])
def test_scorecard(clones, executions):
    card = run_arc(ArcScenario(clones=clones))
    assert card.executions == executions
    assert card.ok
    for check in card.checks:
        assert check.race_free and check.grounded and check.weakly_grounded
        assert check.one_decrement_reads_one
        assert check.safe and check.frees_follow_accesses


def test_yc20_model_attaches_sufficiency():
    card = run_arc(ArcScenario(clones=0), model="yc20")
    assert card.ok
    assert card.sufficiency is not None and card.sufficiency.sufficient
    assert card.to_dict()["sufficiency"] is True


def test_execution_level_checks():
    program = build_arc_program(ArcScenario(clones=1))
    for i, e in enumerate(enumerate_executions(program)):
        g = e.graph
        assert len(decrements_reading_one(g)) == 1
        assert frees_follow_payload_accesses(g)
        loc = counter_location(g)
        payload = [ev for ev in g.events if g.lab[ev].location == loc + 1]
        assert payload  # the payload cell is touched in every execution
        assert check_execution(program, e, i).ok
