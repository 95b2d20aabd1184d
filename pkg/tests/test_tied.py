from __future__ import annotations

import pytest

from rmmlab.exec_graph import OpKind
from rmmlab.tied import (
    FAA_DEC,
    FAA_INC,
    FENCE_ACQ_OP,
    NAT,
    ProductMonoid,
    TotalTied,
    UnsupportedSpec,
    arc_spec,
    check_consistent_resource,
    check_sufficiency,
    fence_reduction_applies,
    operation_from_token,
    parse_atomic_spec,
    print_atomic_spec,
    search_witnesses,
    total_compose,
    total_initial,
    total_subtract,
)

from conftest import LITMUS


def test_monoid_laws_randomized(rng):
    """Associativity, commutativity, unit, and cancellativity; >= 10^4 cases."""
    product = ProductMonoid(NAT, NAT)
    cases = 0
    for _ in range(5500):
        a, b, c = (rng.randint(0, 10**6) for _ in range(3))
        assert NAT.compose(NAT.compose(a, b), c) == NAT.compose(a, NAT.compose(b, c))
        assert NAT.compose(a, b) == NAT.compose(b, a)
        assert NAT.compose(a, NAT.unit) == a
        # cancellativity: (a . b) - b recovers a exactly
        assert NAT.subtract(NAT.compose(a, b), b) == a
        assert (NAT.subtract(a, b) is None) == (a < b)
        cases += 5
    for _ in range(1200):
        pa = (rng.randint(0, 1000), rng.randint(0, 1000))
        pb = (rng.randint(0, 1000), rng.randint(0, 1000))
        pc = (rng.randint(0, 1000), rng.randint(0, 1000))
        assert product.compose(product.compose(pa, pb), pc) == product.compose(
            pa, product.compose(pb, pc)
        )
        assert product.compose(pa, pb) == product.compose(pb, pa)
        assert product.subtract(product.compose(pa, pb), pb) == pa
        assert product.compose(pa, product.unit) == pa
        cases += 4
    assert cases >= 10_000


def test_total_tied_algebra():
    spec = arc_spec()
    one = TotalTied(1, ())
    tok = TotalTied(0, (("t1", 1),))
    assert total_initial(spec) == one
    assert total_compose(spec, one, tok) == TotalTied(1, (("t1", 1),))
    assert total_subtract(spec, total_compose(spec, one, tok), tok) == one
    assert total_subtract(spec, one, tok) is None  # no local token available


def test_arc_spec_contract_values():
    spec = arc_spec()
    assert spec.v0 == 1 and spec.rho0 == 1
    assert spec.pre[FAA_DEC] == (1, 0)
    assert spec.pre[FAA_INC] == (1, 0)
    assert spec.pre[FENCE_ACQ_OP] == (0, 1)
    assert spec.post_lookup(FAA_DEC, 2) == (0, 0)
    assert spec.post_lookup(FAA_DEC, 1) == (0, 1)
    assert spec.post_lookup(FAA_DEC, 0) is None  # decrement disabled at 0
    assert spec.post_lookup(FAA_INC, 1) == (2, 0)
    assert spec.post_lookup(FAA_INC, 0) is None
    assert spec.post_lookup(FENCE_ACQ_OP, 0) == (0, 1)


def test_spec_text_round_trip():
    text = (LITMUS / "arc.spec").read_text(encoding="utf-8")
    body = text.split("{", 1)[1].rsplit("}", 1)[0]
    spec = parse_atomic_spec("arc", body)
    assert spec == arc_spec()
    assert print_atomic_spec(spec) + "\n" == text


def test_operation_tokens():
    assert operation_from_token("FAA_rlx(+1)") == FAA_INC
    assert operation_from_token("FAA_rel(-1)") == FAA_DEC
    assert operation_from_token("fence_acq") == FENCE_ACQ_OP
    assert operation_from_token("W_rel(3)").kind == OpKind.WRITE_REL


@pytest.mark.parametrize(
    "value,verdict",
    [(1, "Consistent"), (2, "Consistent"), (6, "Consistent"), (7, "NotFoundWithinBound")],
)
def test_decrement_consistency_by_counter_value(value, verdict):
    # a decrement reading v needs v - 1 prior net increments; at bound 6 the
    # chain budget covers v <= 6 and no further
    result = check_consistent_resource(
        arc_spec(), "t1", value, FAA_DEC, TotalTied(value - 1, ()), 6
    )
    assert result.verdict == verdict


def test_no_local_token_before_the_final_decrement():
    # only a decrement reading 1 produces the local token, and a trace
    # contains at most one such decrement -- the pivot itself, which is not
    # part of the witness resource
    result = check_consistent_resource(
        arc_spec(), "t1", 1, FAA_DEC, TotalTied(0, (("t1", 1),)), 6
    )
    assert result.verdict == "NotFoundWithinBound"
    assert result.witness is None


def test_fence_requires_zero_global():
    spec = arc_spec()
    ok = check_consistent_resource(
        spec, "t1", 0, FENCE_ACQ_OP, TotalTied(0, (("t1", 1),)), 4
    )
    assert ok.verdict == "Consistent"
    bad = check_consistent_resource(
        spec, "t1", 0, FENCE_ACQ_OP, TotalTied(1, (("t1", 1),)), 4
    )
    assert bad.verdict == "NotFoundWithinBound"


def test_fence_reduction_applies_to_reference_counter():
    assert fence_reduction_applies(arc_spec())


def test_sufficiency_small_bound():
    result = check_sufficiency(arc_spec(), range(-1, 4), 5)
    assert result.sufficient
    assert result.counterexample is None


def test_search_respects_limit():
    found = search_witnesses(
        arc_spec(),
        FAA_DEC,
        1,
        5,
        grounding=False,
        omega_pred=lambda g, loc, t: True,
        limit=3,
    )
    assert len(found) == 3


def test_unsupported_spec_rejected():
    body = "v0=0; rG=nat; rL=nat; rho0=0; pre W_rel(1) = (0,0); post W_rel(1) @ z==0 = (0,0);"
    spec = parse_atomic_spec("w", body)
    with pytest.raises(UnsupportedSpec):
        search_witnesses(
            spec,
            operation_from_token("W_rel(1)"),
            0,
            2,
            grounding=False,
            omega_pred=lambda g, loc, t: True,
        )
