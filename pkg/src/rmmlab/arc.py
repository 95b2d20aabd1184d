"""The Core ARC case study: reference-counted shared ownership over a relaxed
atomic counter.

``build_arc_program`` produces the instrumented program for a scenario with a
given number of clones: one block holds the counter (initially 1) and the
payload; every owner reads the payload and then drops its reference with a
release decrement, and the decrement that reads 1 runs an acquire fence and
frees both cells.  Clones (relaxed increments) are performed by the original
thread before handing a reference to a forked thread — cloning concurrently
with dropping the last reference is a use-after-free and comes out unsafe.

The three lemma oracles confirm, by bounded witness search, the facts that
make the atomic specification work:

- decrement lemma: any total tied resource consistent with a decrement that
  reads 1 has an empty thread-bound part, so at most one thread ever obtains
  the local token (and, underlying it, no enabled single-location trace
  contains two decrements reading 1);
- fence lemma: any total tied resource consistent with an acquire fence has
  global part 0, so the freeing thread blocks until every decrement's global
  consumption has happened;
- sufficiency: the tied preconditions force every operation to read only
  enabled values; in particular a decrement can never read 0 because the
  global tied resource available to any witness has already reached 0, so
  the precondition's subtraction fails.

Mutation helpers produce broken variants of the specification (an increment
enabled at 0, a relaxed decrement, a zeroed decrement precondition) for which
the corresponding oracle must produce a counterexample.

``run_arc`` executes the whole pipeline for a scenario and returns a
scorecard: per consistent execution, race-freedom, groundedness, exactly one
decrement reading 1, safety of the guided operational exploration, and the
fact that every payload access happens-before every deallocation.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .enumeration import Bounds, Execution, enumerate_executions
from .exec_graph import EventId, ExecutionGraph, Operation, OpKind
from .lang import Program, parse_litmus
from .opsem import GraphGuided, SafetyVerdict, explore_safety
from .relations import derive_hb, find_data_races
from .tied import (
    FAA_DEC,
    FAA_INC,
    FENCE_ACQ_OP,
    AtomicSpec,
    PostClause,
    SufficiencyResult,
    TraceWitness,
    arc_spec,
    check_sufficiency,
    print_atomic_spec,
    search_witnesses,
)
from .xmm import GroundingOrder, check_grounded, check_weakly_grounded


# -- scenario construction ---------------------------------------------------------------


@dataclass(frozen=True)
class ArcScenario:
    """A Core ARC workload: ``clones`` extra owners are created (each one a
    relaxed increment followed by a fork of the new owner), and every owner —
    including the original — reads the payload and drops its reference.
    Drops always number clones + 1."""

    clones: int = 1
    payload: int = 42

    def __post_init__(self):
        if not 0 <= self.clones <= 3:
            raise ValueError("clones must be between 0 and 3")

    @property
    def drops(self) -> int:
        return self.clones + 1


_DROP = """let x = [a + 1] in
  let n = FAA_rel(a, -1) in
  if n == 1 then {
    let _ = fence_acq(a) in
    let _ = free(a) in
    free(a + 1)
  }"""


def arc_source(scenario: ArcScenario) -> str:
    """The litmus source text for a scenario."""
    body = [
        f"let a = cons(1, {scenario.payload}) in",
        "  let _ = begin_atomic(a, arc) in",
    ]
    for _ in range(scenario.clones):
        body.append("  let _ = FAA_rlx(a, 1) in")
        body.append("  let _ = fork {")
        body.append("    " + _DROP)
        body.append("  } in")
    body.append("  " + _DROP)
    spec_text = print_atomic_spec(arc_spec())
    return spec_text + "\nthread {\n" + "\n".join(body) + "\n}\n"


def build_arc_program(scenario: ArcScenario) -> Program:
    return parse_litmus(arc_source(scenario))


# -- mutated specifications (oracle counterexample fodder) ---------------------------------


def mutate_enable_increment_at_zero(spec: AtomicSpec) -> AtomicSpec:
    """Enable the increment at result 0 with an empty precondition.  This
    admits traces where the counter revives after reaching 0, so a second
    decrement can read 1 — the decrement lemma must fail."""
    pre = dict(spec.pre)
    post = {op: tuple(cl) for op, cl in spec.post.items()}
    pre[FAA_INC] = (0, 0)
    post[FAA_INC] = post[FAA_INC] + (PostClause("==", 0, (1, 0)),)
    return AtomicSpec(
        spec.name + "_inc0",
        spec.v0,
        spec.global_monoid,
        spec.local_monoid,
        spec.rho0,
        pre,
        post,
    )


def mutate_relaxed_decrement(spec: AtomicSpec) -> AtomicSpec:
    """Replace the release decrement by a relaxed one.  Decrements then no
    longer happen-before the acquire fence, so a witness with leftover global
    resource exists — the fence lemma must fail."""
    dec_rlx = Operation(OpKind.RMW_RLX, update=FAA_DEC.update)
    pre = {dec_rlx if op == FAA_DEC else op: v for op, v in spec.pre.items()}
    post = {
        dec_rlx if op == FAA_DEC else op: tuple(cl) for op, cl in spec.post.items()
    }
    return AtomicSpec(
        spec.name + "_rlxdec",
        spec.v0,
        spec.global_monoid,
        spec.local_monoid,
        spec.rho0,
        pre,
        post,
    )


def mutate_zero_decrement_pre(spec: AtomicSpec) -> AtomicSpec:
    """Zero the decrement's tied precondition.  Nothing stops a decrement
    from firing at a disabled result value — sufficiency must fail."""
    pre = dict(spec.pre)
    pre[FAA_DEC] = (0, 0)
    return AtomicSpec(
        spec.name + "_zerodec",
        spec.v0,
        spec.global_monoid,
        spec.local_monoid,
        spec.rho0,
        pre,
        {op: tuple(cl) for op, cl in spec.post.items()},
    )


# -- lemma oracles --------------------------------------------------------------------------


def _decrement_op(spec: AtomicSpec) -> Operation:
    for op in spec.pre:
        if op.kind.is_rmw and op.update is not None and op.update.apply(0) < 0:
            return op
    raise ValueError(f"spec {spec.name} has no decrement")


@dataclass(frozen=True)
class DecrementLemmaReport:
    """Result of the decrement-lemma oracle: no consistency witness for a
    decrement reading 1 carries a nonzero thread-bound part, and no enabled
    trace contains two decrements reading 1."""

    holds: bool
    counterexample: Optional[TraceWitness]
    double_decrement: Optional[TraceWitness]
    bound: int


def check_lemma_decrement(
    bound: int = 6, spec: Optional[AtomicSpec] = None
) -> DecrementLemmaReport:
    spec = spec if spec is not None else arc_spec()
    dec = _decrement_op(spec)
    found = search_witnesses(
        spec,
        dec,
        1,
        bound,
        grounding=False,
        omega_pred=lambda g, loc, t: g >= 1 and any(v != 0 for v in loc.values()),
        limit=1,
    )

    def has_two_dec_one(ops, values, pivot_pos):
        return sum(1 for o, v in zip(ops, values) if o == dec and v == 1) >= 2

    double = search_witnesses(
        spec,
        dec,
        1,
        bound,
        grounding=False,
        omega_pred=lambda g, loc, t: True,
        chain_filter=has_two_dec_one,
        limit=1,
    )
    return DecrementLemmaReport(
        holds=not found and not double,
        counterexample=found[0] if found else None,
        double_decrement=double[0] if double else None,
        bound=bound,
    )


@dataclass(frozen=True)
class FenceLemmaReport:
    """Result of the fence-lemma oracle: no consistency witness for an
    acquire fence leaves a nonzero global tied resource.  As a cross-check,
    every witness that *is* consistent exhibits the counting argument behind
    the lemma: its executed decrements outnumber its executed increments by
    exactly the initial count of 1."""

    holds: bool
    counterexample: Optional[TraceWitness]
    bound: int
    counting_checked: int
    counting_holds: bool


def check_lemma_fence(
    bound: int = 8, spec: Optional[AtomicSpec] = None
) -> FenceLemmaReport:
    spec = spec if spec is not None else arc_spec()
    dec = _decrement_op(spec)

    # A counterexample needs local resource at the pivot's thread.  With the
    # pivot as the only fence, locals come only from a decrement reading 1 on
    # that thread, so traces without one are pruned soundly.
    def chain_has_dec_one(ops, values, pivot_pos):
        return any(o == dec and v == 1 for o, v in zip(ops, values))

    def dec_one_on_pivot_thread(ops, values, threads, fence_slots, pivot_idx):
        pivot_thread = fence_slots[0][0]
        return any(
            o == dec and v == 1 and t == pivot_thread
            for o, v, t in zip(ops, values, threads)
        )

    found = search_witnesses(
        spec,
        FENCE_ACQ_OP,
        0,
        bound,
        grounding=False,
        omega_pred=lambda g, loc, t: g > 0 and loc.get(t, 0) >= 1,
        chain_filter=chain_has_dec_one,
        candidate_filter=dec_one_on_pivot_thread,
        max_fences=1,
        limit=1,
    )

    inc_ops = {
        op
        for op in spec.pre
        if op.kind.is_rmw and op.update is not None and op.update.apply(0) > 0
    }
    consistent = search_witnesses(
        spec,
        FENCE_ACQ_OP,
        0,
        bound,
        grounding=False,
        omega_pred=lambda g, loc, t: g == 0 and loc.get(t, 0) >= 1,
        chain_filter=chain_has_dec_one,
        candidate_filter=dec_one_on_pivot_thread,
        max_fences=1,
        limit=32,
    )
    counting_holds = True
    for w in consistent:
        incs = sum(1 for i in w.executed if w.chain_ops[i] in inc_ops)
        decs = sum(1 for i in w.executed if w.chain_ops[i] == dec)
        if decs != incs + spec.v0:
            counting_holds = False
            break
    return FenceLemmaReport(
        holds=not found and counting_holds,
        counterexample=found[0] if found else None,
        bound=bound,
        counting_checked=len(consistent),
        counting_holds=counting_holds,
    )


@dataclass(frozen=True)
class ArcSufficiencyReport:
    """Sufficiency of the tied preconditions, plus the explicit exhibition of
    why a decrement can never read 0: across every candidate witness for a
    decrement pivot at result 0, the global tied resource available never
    covers the precondition's global part."""

    sufficient: bool
    result: SufficiencyResult
    zero_read_attempts: int
    zero_read_covering: int
    needed_global: int
    max_observed_global: Optional[int]


def check_arc_sufficiency(
    value_domain: Iterable[int] = range(-2, 6),
    bound: int = 8,
    spec: Optional[AtomicSpec] = None,
) -> ArcSufficiencyReport:
    spec = spec if spec is not None else arc_spec()
    result = check_sufficiency(spec, value_domain, bound)
    dec = _decrement_op(spec)
    needed = spec.pre[dec][0]
    attempts = 0
    covering = 0
    max_g: Optional[int] = None

    def recorder(g, loc, t) -> bool:
        nonlocal attempts, covering, max_g
        attempts += 1
        max_g = g if max_g is None else max(max_g, g)
        if g >= needed and loc.get(t, 0) >= spec.pre[dec][1]:
            covering += 1
        return False  # record only; never accept

    search_witnesses(
        spec, dec, 0, min(bound, 6), grounding=True, omega_pred=recorder, limit=1
    )
    return ArcSufficiencyReport(
        sufficient=result.sufficient and covering == 0,
        result=result,
        zero_read_attempts=attempts,
        zero_read_covering=covering,
        needed_global=needed,
        max_observed_global=max_g,
    )


# -- per-execution checks and the scorecard ---------------------------------------------------


def counter_location(g: ExecutionGraph) -> int:
    for e in g.sorted_events():
        if g.lab[e].pseudo == "begin_atomic":
            return g.lab[e].location
    raise ValueError("no atomic-mode conversion event in graph")


def decrements_reading_one(g: ExecutionGraph) -> list[EventId]:
    return [
        e
        for e in g.sorted_events()
        if g.lab[e].pseudo is None and g.lab[e].op == FAA_DEC and g.lab[e].result == 1
    ]


def frees_follow_payload_accesses(g: ExecutionGraph) -> bool:
    """Every payload access happens-before every deallocation event."""
    hb = derive_hb(g)
    payload = counter_location(g) + 1
    accesses = [
        e
        for e in g.sorted_events()
        if g.lab[e].location == payload and g.lab[e].pseudo is None
    ]
    frees = [e for e in g.sorted_events() if g.lab[e].pseudo == "free"]
    return all((a, f) in hb for a in accesses for f in frees)


def _hb_order(g: ExecutionGraph) -> GroundingOrder:
    hb = derive_hb(g)
    order: list[EventId] = []
    left = set(g.events)
    while left:
        e = min(x for x in left if not any((a, x) in hb for a in left if a != x))
        order.append(e)
        left.remove(e)
    return GroundingOrder(tuple(order))


@dataclass(frozen=True)
class ExecutionCheck:
    index: int
    race_free: bool
    grounded: bool
    weakly_grounded: bool
    one_decrement_reads_one: bool
    safe: bool
    frees_follow_accesses: bool

    @property
    def ok(self) -> bool:
        return (
            self.race_free
            and self.grounded
            and self.weakly_grounded
            and self.one_decrement_reads_one
            and self.safe
            and self.frees_follow_accesses
        )


@dataclass
class ArcScorecard:
    scenario: ArcScenario
    model: str
    executions: int
    checks: list[ExecutionCheck]
    sufficiency: Optional[ArcSufficiencyReport]
    elapsed: float

    @property
    def ok(self) -> bool:
        checks_ok = all(c.ok for c in self.checks) and self.executions > 0
        if self.sufficiency is not None:
            checks_ok = checks_ok and self.sufficiency.sufficient
        return checks_ok

    def to_dict(self) -> dict:
        return {
            "clones": self.scenario.clones,
            "model": self.model,
            "executions": self.executions,
            "ok": self.ok,
            "elapsed": round(self.elapsed, 3),
            "sufficiency": None
            if self.sufficiency is None
            else self.sufficiency.sufficient,
            "checks": [
                {
                    "index": c.index,
                    "race_free": c.race_free,
                    "grounded": c.grounded,
                    "weakly_grounded": c.weakly_grounded,
                    "one_decrement_reads_one": c.one_decrement_reads_one,
                    "safe": c.safe,
                    "frees_follow_accesses": c.frees_follow_accesses,
                }
                for c in self.checks
            ],
        }

    def render(self) -> str:
        lines = [
            f"ARC scorecard: clones={self.scenario.clones} model={self.model} "
            f"executions={self.executions} elapsed={self.elapsed:.2f}s",
        ]
        for c in self.checks:
            flags = " ".join(
                f"{name}={'yes' if val else 'NO'}"
                for name, val in (
                    ("race_free", c.race_free),
                    ("grounded", c.grounded),
                    ("weakly_grounded", c.weakly_grounded),
                    ("one_dec_reads_1", c.one_decrement_reads_one),
                    ("safe", c.safe),
                    ("frees_last", c.frees_follow_accesses),
                )
            )
            lines.append(f"  execution {c.index}: {flags}")
        if self.sufficiency is not None:
            lines.append(
                f"  sufficiency: {'holds' if self.sufficiency.sufficient else 'FAILS'}"
                f" (bound {self.sufficiency.result.bound})"
            )
        lines.append(f"verdict: {'ok' if self.ok else 'VIOLATION'}")
        return "\n".join(lines)


def check_execution(program: Program, execution: Execution, index: int = 0) -> ExecutionCheck:
    g = execution.graph
    spec_table = dict(program.specs)
    return ExecutionCheck(
        index=index,
        race_free=find_data_races(g).race_free,
        grounded=check_grounded(g, spec_table).grounded,
        weakly_grounded=check_weakly_grounded(g, _hb_order(g), spec_table),
        one_decrement_reads_one=len(decrements_reading_one(g)) == 1,
        safe=explore_safety(program, GraphGuided(g)).safe,
        frees_follow_accesses=frees_follow_payload_accesses(g),
    )


def run_arc(
    scenario: ArcScenario,
    model: str = "c20",
    bounds: Optional[Bounds] = None,
) -> ArcScorecard:
    """Run the full pipeline: enumerate the scenario's consistent executions
    and check each one.  Under the yc20 model the enabledness of every
    counter access is additionally derived from sufficiency of the tied
    preconditions rather than assumed."""
    if model not in ("c20", "yc20"):
        raise ValueError(f"unknown model {model!r}")
    t0 = time.time()
    program = build_arc_program(scenario)
    executions = enumerate_executions(program, bounds or Bounds())
    checks = [check_execution(program, e, i) for i, e in enumerate(executions)]
    sufficiency = check_arc_sufficiency() if model == "yc20" else None
    return ArcScorecard(
        scenario=scenario,
        model=model,
        executions=len(executions),
        checks=checks,
        sufficiency=sufficiency,
        elapsed=time.time() - t0,
    )
