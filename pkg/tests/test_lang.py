from __future__ import annotations

import pytest

from rmmlab.exec_graph import OpKind
from rmmlab.lang import (
    ParseError,
    parse_cmd,
    parse_litmus,
    print_cmd,
    print_program,
    unroll_thread,
)

from conftest import GOLDENS, LITMUS, read_litmus


@pytest.mark.parametrize("name", ["lb.lit", "lbf.lit", "lbd.lit", "arc1.lit"])
def test_parse_print_round_trip(name):
    program = parse_litmus(read_litmus(name))
    canon = print_program(program)
    assert print_program(parse_litmus(canon)) == canon


@pytest.mark.parametrize(
    "text",
    [
        "let a = R_rlx(X) in W_rlx(Y, a + 1)",
        "[X] := 1; let v = [X] in v",
        "if a == 1 then { W_rel(Y, 2) }",
        "fork { FAA_rlx(X, 1) }",
        "let a = cons(1, 2, 3) in free(a)",
        "begin_atomic(X, arc); end_atomic(X)",
        "XCHG_rlx(X, 5)",
        "fence_acq(X); fence_rel(Y)",
    ],
)
def test_parse_print_cmd_round_trip(text):
    c = parse_cmd(text)
    assert parse_cmd(print_cmd(c)) == c


def test_parse_errors():
    with pytest.raises(ParseError):
        parse_litmus("thread { let = 1 in 2 }")
    with pytest.raises(ParseError):
        parse_litmus("thread { W_rlx(X) }")  # missing value
    with pytest.raises(ParseError):
        parse_litmus("threads { }")


def test_named_locations_interned_in_order():
    p = parse_litmus("thread { W_rlx(X, 1); W_rlx(Y, 1); W_rlx(X, 2) }")
    assert set(p.location_names) == {"X", "Y"}
    assert len(set(p.location_names.values())) == 2


def test_unroll_is_deterministic_in_oracle():
    p = parse_litmus("thread { let a = R_rlx(X) in if a == 1 then { W_rlx(Y, a) } }")
    t1 = unroll_thread(p.threads[0], "t1", [1])
    t2 = unroll_thread(p.threads[0], "t1", [1])
    assert t1.events == t2.events and t1.registers == t2.registers
    assert [e.op.kind for e in t1.events] == [OpKind.READ_RLX, OpKind.WRITE_RLX]
    assert t1.registers == {"a": 1}


def test_unroll_branch_not_taken():
    p = parse_litmus("thread { let a = R_rlx(X) in if a == 1 then { W_rlx(Y, a) } }")
    t = unroll_thread(p.threads[0], "t1", [0])
    assert [e.op.kind for e in t.events] == [OpKind.READ_RLX]


def test_unroll_pseudo_events_and_forks():
    p = parse_litmus(
        "thread { let a = cons(4, 5) in begin_atomic(a, arc); "
        "fork { FAA_rlx(a, 1) }; end_atomic(a); free(a) "
        "} spec arc { v0=4; rG=nat; rL=nat; rho0=0; "
        "pre FAA_rlx(+1) = (0,0); post FAA_rlx(+1) @ z>=0 = (0,0); }"
    )
    t = unroll_thread(p.threads[0], "t1", [100])
    pseudos = [e.pseudo for e in t.events]
    assert pseudos == ["alloc", "alloc", "begin_atomic", "end_atomic", "free"]
    assert [e.location for e in t.events] == [100, 101, 100, 100, 100]
    assert t.events[2].spec_name == "arc"
    assert len(t.forks) == 1
    fork_at, body = t.forks[0]
    assert fork_at == 3  # after both allocs and begin_atomic
    child = unroll_thread(body, "t1/1", [0])
    assert [e.op.kind for e in child.events] == [OpKind.RMW_RLX]


def test_goldens_are_canonical_fixpoints():
    goldens = sorted(GOLDENS.glob("*.golden"))
    assert goldens, "bundled goldens missing"
    for path in goldens:
        text = path.read_text(encoding="utf-8")
        assert print_program(parse_litmus(text)) == text


def test_goldens_match_corpus():
    for path in sorted(LITMUS.glob("*.lit")):
        golden = (GOLDENS / (path.name + ".golden")).read_text(encoding="utf-8")
        assert print_program(parse_litmus(path.read_text(encoding="utf-8"))) == golden
