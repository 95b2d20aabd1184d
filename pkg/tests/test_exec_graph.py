from __future__ import annotations

import pytest

from rmmlab.exec_graph import (
    EventId,
    ExecutionGraph,
    Label,
    Operation,
    OpKind,
    ParseError,
    UpdateFn,
    add,
    check_well_formed,
    natural_update_fns,
    setv,
    to_high_level,
    to_low_level,
)

from conftest import read_litmus, random_executions


@pytest.fixture
def lb_witness() -> ExecutionGraph:
    return ExecutionGraph.from_text(read_litmus("lb_witness.graph"))


def test_event_id_encode_decode():
    e = EventId("t1/2", 7)
    assert EventId.decode(e.encode()) == e
    with pytest.raises(ParseError):
        EventId.decode("7")


def test_update_fn_add_set():
    assert add(3).apply(4) == 7
    assert add(-1).apply(0) == -1
    assert setv(9).apply(123) == 9
    assert UpdateFn.decode(add(5).encode()) == add(5)


def test_label_written_value():
    w = Label("t1", 1, 0, Operation(OpKind.WRITE_RLX, value=4))
    assert w.written_value == 4 and w.is_write_like and not w.is_read_like
    r = Label("t1", 1, 4, Operation(OpKind.READ_ACQ))
    assert r.written_value is None and r.is_read_like
    rmw = Label("t1", 1, 2, Operation(OpKind.RMW_REL, update=add(-1)))
    assert rmw.written_value == 1 and rmw.is_write_like and rmw.is_read_like
    # bookkeeping events other than alloc carry no value of their own; the
    # race check treats them as nonatomic writes separately
    free = Label("t1", 1, 0, Operation(OpKind.WRITE_NA, value=0), pseudo="free")
    assert free.written_value is None and not free.is_write_like


def test_write_result_must_be_zero():
    with pytest.raises(ValueError):
        Label("t1", 1, 5, Operation(OpKind.WRITE_RLX, value=5))


def test_witness_graph_well_formed(lb_witness):
    assert check_well_formed(lb_witness).ok


def test_removing_rf_edge_is_still_well_formed_but_incomplete(lb_witness):
    g = lb_witness
    cut = ExecutionGraph(
        events=g.events, lab=dict(g.lab), po=g.po, rf=frozenset(), mo=g.mo
    )
    assert check_well_formed(cut).ok  # rf-completeness is a consistency matter
    from rmmlab.relations import check_consistent

    assert not check_consistent(cut).consistent


def test_ill_formed_rf_value_mismatch(lb_witness):
    g = lb_witness
    # redirect a read of 1 to an init write of 0
    (r,) = [e for e in g.events if e == EventId("t1", 0)]
    bad_rf = frozenset({(EventId("init", 0), r)})
    bad = ExecutionGraph(events=g.events, lab=dict(g.lab), po=g.po, rf=bad_rf, mo=g.mo)
    report = check_well_formed(bad)
    assert not report.ok
    assert any(rule == "rf-match" for rule, _ in report.violations)


def test_restrict_identity_and_init(lb_witness):
    g = lb_witness
    assert g.restrict(g.events).to_text() == g.to_text()
    inits = {e for e in g.events if e.thread == "init"}
    sub = g.restrict(inits)
    assert sub.rf == frozenset() and sub.events == frozenset(inits)


def test_text_round_trip_bit_exact(lb_witness):
    text = lb_witness.to_text()
    assert ExecutionGraph.from_text(text).to_text() == text


def test_json_round_trip(lb_witness):
    text = lb_witness.to_text()
    assert ExecutionGraph.from_json(lb_witness.to_json()).to_text() == text


def test_low_high_round_trip_on_random_executions(rng):
    for g in random_executions(rng):
        low = to_low_level(g)
        assert low.is_low_level()
        back = to_high_level(low, natural_update_fns(low))
        assert back.canonical_key() == g.canonicalize().canonical_key()


def test_canonicalize_is_idempotent(lb_witness):
    c = lb_witness.canonicalize()
    assert c.canonicalize().to_text() == c.to_text()
