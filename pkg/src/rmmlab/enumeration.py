"""Exhaustive enumeration of the consistent executions of a program.

The enumerator works in three stages:

1. Per-location value domains are computed as a fixpoint of the values
   written by justified skeletons under the current domains.  Named (statically
   addressed) locations additionally branch over zero and the program's
   comparison/postcondition constants, which makes self-justifying reads-from
   cycles reachable; allocated cells branch generatively only, keeping the
   skeleton product small.  The fixpoint is capped; the cap is a completeness
   bound for the value range only, and is generous for loop-free programs
   whose writable values are bounded by the number of updates.

2. Program skeletons: every combination of per-thread control flow and read
   results drawn from the domains, with forked threads unrolled recursively.
   Allocation addresses are deterministic, so the same cell has the same
   address in every skeleton.  Skeletons where some read result is written by
   no event (and is not the location's initial value) are discarded, as are
   skeletons where an operation on an atomic location is outside its
   contract's post domain (when ``require_enabled`` is set).

3. Per-location modification orders and reads-from choices: modification
   order ranges over the linear extensions of program order on the location's
   writes; an RMW must read from its immediate modification-order predecessor
   (atomicity makes anything else inconsistent), plain reads from any
   value-matching write.  The assembled graphs are filtered through the full
   consistency check and deduplicated by canonical form.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Optional

from .exec_graph import (
    EventId,
    ExecutionGraph,
    GraphBuilder,
    Label,
    Operation,
    OpKind,
)
from .lang import (
    Add,
    AtomicCmd,
    BeginAtomic,
    Cmd,
    Cons,
    EndAtomic,
    Eq,
    Expr,
    ExprCmd,
    Free,
    Fork,
    If,
    Let,
    Program,
    ReadNA,
    ThreadTrace,
    Value,
    Var,
    WriteNA,
    unroll_thread,
)
from .relations import check_consistent, find_data_races
from .tied import AtomicSpec

ALLOC_BASE = 1000
ALLOC_STRIDE = 16


class EnumerationError(Exception):
    pass


class BoundExceeded(EnumerationError):
    pass


@dataclass(frozen=True)
class Bounds:
    """Caps for the enumeration; defaults are ample for litmus tests."""

    max_events: int = 64
    max_threads: int = 12
    max_domain: int = 48
    domain_iterations: Optional[int] = None  # default: #updates + 2
    require_enabled: bool = True


@dataclass
class Execution:
    graph: ExecutionGraph
    registers: dict[str, int]


@dataclass
class LitmusVerdict:
    observable: bool
    executions: int
    witness: Optional[Execution]

    def to_dict(self) -> dict:
        return {
            "observable": self.observable,
            "executions": self.executions,
            "witness": self.witness.graph.to_text() if self.witness else None,
        }


# -- skeleton generation ---------------------------------------------------------


class _NeedChoice(Exception):
    pass


class _Probe:
    """Replays a prefix of oracle choices, then reports what is demanded next."""

    def __init__(self, chosen: tuple[int, ...]):
        self.chosen = chosen
        self.used = 0
        self.alloc_count = 0
        self.demand: Optional[tuple[str, Optional[int]]] = None

    def take(self, purpose: str, location: Optional[int] = None) -> int:
        if self.used < len(self.chosen):
            v = self.chosen[self.used]
            self.used += 1
            if purpose.startswith("alloc"):
                self.alloc_count += 1
            return v
        self.demand = (purpose, location)
        raise _NeedChoice()


class _Allocator:
    """Deterministic allocation addresses keyed by (thread, ordinal)."""

    def __init__(self):
        self.table: dict[tuple[str, int], int] = {}

    def address(self, thread: str, ordinal: int) -> int:
        key = (thread, ordinal)
        if key not in self.table:
            self.table[key] = ALLOC_BASE + ALLOC_STRIDE * len(self.table)
        return self.table[key]


@dataclass
class DomainState:
    """Per-location read-result branch sets.

    ``written`` holds values some justified skeleton writes to the location.
    Named locations additionally branch over their initial value and the
    program's comparison/postcondition constants, which is what lets
    self-justifying reads-from cycles (out-of-thin-air shapes) be reached;
    allocated cells branch generatively only.
    """

    written: dict[int, set[int]] = field(default_factory=dict)
    seeds: set[int] = field(default_factory=set)
    named: set[int] = field(default_factory=set)
    static_pool: set[int] = field(default_factory=set)

    def branch(self, loc: int) -> list[int]:
        out = set(self.written.get(loc, ()))
        if loc in self.named:
            out.add(0)
            out |= self.seeds
        elif not out:
            # Bootstrap for allocated cells: before any skeleton completes,
            # no written values have been harvested, so branch over the
            # constant-valued writes visible in the program text.  The
            # justification filter discards mismatches and the fixpoint
            # replaces the pool with the location's actual written set.
            out = set(self.static_pool)
        return sorted(out)


def _thread_traces(
    cmd: Cmd, thread: str, domains: DomainState, allocator: _Allocator
) -> list[ThreadTrace]:
    out = []
    stack: list[tuple[int, ...]] = [()]
    while stack:
        chosen = stack.pop()
        probe = _Probe(chosen)
        try:
            out.append(unroll_thread(cmd, thread, probe))
            continue
        except _NeedChoice:
            purpose, location = probe.demand
        if purpose.startswith("alloc"):
            stack.append(chosen + (allocator.address(thread, probe.alloc_count),))
        else:
            for v in domains.branch(location):
                stack.append(chosen + (v,))
    return out


@dataclass
class Skeleton:
    """One full control-flow and read-result resolution of a program."""

    order: list[str]  # thread creation order
    traces: dict[str, ThreadTrace]
    registers: dict[str, int]

    def all_events(self) -> Iterator[Label]:
        for name in self.order:
            yield from self.traces[name].events


def _program_skeletons(
    program: Program,
    domains: DomainState,
    allocator: _Allocator,
    bounds: Bounds,
) -> Iterator[Skeleton]:
    roots = [(f"t{i + 1}", cmd) for i, cmd in enumerate(program.threads)]
    cache: dict[tuple[int, str], list[ThreadTrace]] = {}

    def traces_of(cmd, name):
        key = (id(cmd), name)
        if key not in cache:
            cache[key] = _thread_traces(cmd, name, domains, allocator)
        return cache[key]

    def rec(pending, order, traces):
        if not pending:
            regs: dict[str, int] = {}
            for name in order:
                regs.update(traces[name].registers)
            yield Skeleton(order=list(order), traces=dict(traces), registers=regs)
            return
        name, cmd = pending[0]
        for tr in traces_of(cmd, name):
            kids = [(f"{name}/{i + 1}", body) for i, (_, body) in enumerate(tr.forks)]
            if len(order) + len(pending) + len(kids) > bounds.max_threads:
                raise BoundExceeded(f"more than {bounds.max_threads} threads")
            order.append(name)
            traces[name] = tr
            yield from rec(pending[1:] + kids, order, traces)
            order.pop()
            del traces[name]

    yield from rec(roots, [], {})


# -- domains -----------------------------------------------------------------------


def _constants(program: Program) -> set[int]:
    out: set[int] = {0}

    def walk_expr(e: Expr):
        if isinstance(e, Value):
            out.add(e.n)
        elif isinstance(e, (Add, Eq)):
            walk_expr(e.left)
            walk_expr(e.right)

    def walk(c: Cmd):
        if isinstance(c, ExprCmd):
            walk_expr(c.expr)
        elif isinstance(c, Cons):
            for a in c.args:
                walk_expr(a)
        elif isinstance(c, (ReadNA, Free, EndAtomic, BeginAtomic)):
            walk_expr(c.loc)
        elif isinstance(c, WriteNA):
            walk_expr(c.loc)
            walk_expr(c.value)
        elif isinstance(c, AtomicCmd):
            walk_expr(c.loc)
            if c.value is not None:
                walk_expr(c.value)
        elif isinstance(c, If):
            walk_expr(c.cond)
            walk(c.body)
        elif isinstance(c, Let):
            walk(c.bound)
            walk(c.body)
        elif isinstance(c, Fork):
            walk(c.body)

    for t in program.threads:
        walk(t)
    for _, v in program.postcondition:
        out.add(v)
    return out


def _write_constants(program: Program) -> set[int]:
    """Constant values the program may store: allocation initialisers and
    literal write/exchange payloads."""
    out: set[int] = set()

    def walk(c: Cmd):
        if isinstance(c, Cons):
            for a in c.args:
                if isinstance(a, Value):
                    out.add(a.n)
        elif isinstance(c, WriteNA):
            if isinstance(c.value, Value):
                out.add(c.value.n)
        elif isinstance(c, AtomicCmd):
            if isinstance(c.value, Value):
                out.add(c.value.n)
        elif isinstance(c, If):
            walk(c.body)
        elif isinstance(c, Let):
            walk(c.bound)
            walk(c.body)
        elif isinstance(c, Fork):
            walk(c.body)

    for t in program.threads:
        walk(t)
    return out


def _count_updates(program: Program) -> int:
    count = 0

    def walk(c: Cmd):
        nonlocal count
        if isinstance(c, AtomicCmd) and c.kind.is_rmw:
            count += 1
        elif isinstance(c, If):
            walk(c.body)
        elif isinstance(c, Let):
            walk(c.bound)
            walk(c.body)
        elif isinstance(c, Fork):
            walk(c.body)

    for t in program.threads:
        walk(t)
    return count


def compute_domains(
    program: Program, bounds: Bounds, allocator: _Allocator
) -> DomainState:
    """Fixpoint of the per-location writable values under the current branch
    sets, keeping only values written by skeletons whose reads are all
    justified (and within the atomic contracts, when those are enforced)."""
    iterations = bounds.domain_iterations
    if iterations is None:
        iterations = _count_updates(program) + 2
    domains = DomainState(
        seeds=_constants(program),
        named=set(program.location_names.values()),
        static_pool=_write_constants(program),
    )
    for _ in range(iterations):
        changed = False
        for skel in _program_skeletons(program, domains, allocator, bounds):
            if not _reads_justified(program, skel):
                continue
            if bounds.require_enabled and not _contract_respected(program, skel):
                continue
            for lab in skel.all_events():
                if lab.is_write_like and lab.pseudo in (None, "alloc"):
                    d = domains.written.setdefault(lab.location, set())
                    v = lab.written_value
                    if v not in d and len(d) < bounds.max_domain:
                        d.add(v)
                        changed = True
        if not changed:
            break
    return domains


def _reads_justified(program: Program, skel: Skeleton) -> bool:
    """Every read result must be producible: written by some event of the
    skeleton or equal to the location's initial value (0 for globals)."""
    named = set(program.location_names.values())
    written: dict[int, set[int]] = {}
    for lab in skel.all_events():
        if lab.is_write_like and lab.pseudo in (None, "alloc"):
            written.setdefault(lab.location, set()).add(lab.written_value)
    for lab in skel.all_events():
        kind = lab.op.kind
        if lab.pseudo is None and (kind.is_read or kind.is_rmw):
            ok = lab.result in written.get(lab.location, set())
            if not ok and lab.location in named and lab.result == 0:
                ok = True
            if not ok:
                return False
    return True


def _atomic_contracts(program: Program, skel: Skeleton) -> dict[int, AtomicSpec]:
    contracts: dict[int, AtomicSpec] = {}
    for lab in skel.all_events():
        if lab.pseudo == "begin_atomic":
            spec = program.specs.get(lab.spec_name)
            if spec is None:
                raise EnumerationError(f"unknown atomic contract {lab.spec_name!r}")
            contracts[lab.location] = spec
    return contracts


def _contract_respected(program: Program, skel: Skeleton) -> bool:
    contracts = _atomic_contracts(program, skel)
    if not contracts:
        return True
    for lab in skel.all_events():
        spec = contracts.get(lab.location)
        if spec is not None and lab.pseudo is None:
            op = lab.op
            if op in spec.pre and not spec.enabled(op, lab.result):
                return False
    return True


# -- graph assembly ------------------------------------------------------------------


def _base_graph(program: Program, skel: Skeleton) -> tuple[ExecutionGraph, dict[str, list[EventId]]]:
    builder = GraphBuilder()
    init_events: dict[int, EventId] = {}
    used = {lab.location for lab in skel.all_events()}
    for name, addr in sorted(program.location_names.items(), key=lambda kv: kv[1]):
        if addr in used:
            init_events[addr] = builder.add_init_write(addr)

    ids: dict[str, list[EventId]] = {}
    anchor: dict[str, Optional[EventId]] = {}
    for name in skel.order:
        tr = skel.traces[name]
        ids[name] = [builder.add_event(name, lab) for lab in tr.events]
        if name not in anchor:
            anchor[name] = None
        for i, (pos, _) in enumerate(tr.forks):
            child = f"{name}/{i + 1}"
            parent_last = ids[name][pos - 1] if pos > 0 else anchor[name]
            anchor[child] = parent_last
            builder.fork(parent_last, child)
    return builder.build(), ids


def _linear_extensions(items: list[EventId], po: frozenset) -> Iterator[tuple[EventId, ...]]:
    if len(items) <= 1:
        yield tuple(items)
        return
    preds = {b: {a for a in items if (a, b) in po} for b in items}

    def rec(done: list[EventId], left: set[EventId]):
        if not left:
            yield tuple(done)
            return
        for e in sorted(left):
            if preds[e] <= set(done):
                done.append(e)
                left.remove(e)
                yield from rec(done, left)
                left.add(e)
                done.pop()

    yield from rec([], set(items))


def _graphs_for_skeleton(
    program: Program, skel: Skeleton, bounds: Bounds
) -> Iterator[ExecutionGraph]:
    base, _ = _base_graph(program, skel)
    if len(base.events) > bounds.max_events:
        raise BoundExceeded(f"more than {bounds.max_events} events")
    named = set(program.location_names.values())

    per_location: list[list[tuple[tuple, tuple]]] = []  # choices: (mo edges, rf edges)
    for loc in sorted(base.locations()):
        writes = [
            e
            for e in base.sorted_events()
            if base.lab[e].location == loc and base.lab[e].is_write_like
        ]
        readers = [
            e
            for e in base.sorted_events()
            if base.lab[e].location == loc
            and base.lab[e].pseudo is None
            and (base.lab[e].op.kind.is_read or base.lab[e].op.kind.is_rmw)
        ]
        choices = []
        for order in _linear_extensions(writes, base.po):
            mo = tuple(
                (a, b) for i, a in enumerate(order) for b in order[i + 1 :]
            )
            rmw_rf = []
            ok = True
            for r in readers:
                if not base.lab[r].op.kind.is_rmw:
                    continue
                idx = order.index(r)
                if idx == 0:
                    ok = False
                    break
                src = order[idx - 1]
                if base.lab[src].written_value != base.lab[r].result:
                    ok = False
                    break
                rmw_rf.append((src, r))
            if not ok:
                continue
            plain = [r for r in readers if not base.lab[r].op.kind.is_rmw]
            options: list[list[tuple[EventId, EventId]]] = []
            for r in plain:
                cand = [
                    (w, r)
                    for w in writes
                    if w != r
                    and base.lab[w].written_value == base.lab[r].result
                    and (w.thread != r.thread or (w, r) in base.po)
                ]
                options.append(cand)
            for combo in itertools.product(*options):
                choices.append((mo, tuple(rmw_rf) + combo))
        if not choices:
            return
        per_location.append(choices)

    for assignment in itertools.product(*per_location):
        mo = frozenset(p for mo_part, _ in assignment for p in mo_part)
        rf = frozenset(p for _, rf_part in assignment for p in rf_part)
        yield replace(base, rf=rf, mo=mo)


# -- public API ----------------------------------------------------------------------


def enumerate_executions(program: Program, bounds: Bounds = Bounds()) -> list[Execution]:
    """All consistent executions of the program, deduplicated."""
    allocator = _Allocator()
    domains = compute_domains(program, bounds, allocator)
    seen: set[str] = set()
    out: list[Execution] = []
    for skel in _program_skeletons(program, domains, allocator, bounds):
        if not _reads_justified(program, skel):
            continue
        if bounds.require_enabled and not _contract_respected(program, skel):
            continue
        for g in _graphs_for_skeleton(program, skel, bounds):
            if not check_consistent(g).consistent:
                continue
            key = g.to_text()
            if key in seen:
                continue
            seen.add(key)
            out.append(Execution(graph=g, registers=dict(skel.registers)))
    return out


def postcondition_holds(program: Program, registers: dict[str, int]) -> bool:
    return all(registers.get(r) == v for r, v in program.postcondition)


def check_litmus(program: Program, bounds: Bounds = Bounds()) -> LitmusVerdict:
    """Is the postcondition observable in some consistent execution?"""
    executions = enumerate_executions(program, bounds)
    witness = None
    for ex in executions:
        if postcondition_holds(program, ex.registers):
            witness = ex
            break
    return LitmusVerdict(
        observable=witness is not None, executions=len(executions), witness=witness
    )


@dataclass
class RaceSummary:
    total: int
    racy: int
    example: Optional[Execution]

    @property
    def race_free(self) -> bool:
        return self.racy == 0


def count_races(program: Program, bounds: Bounds = Bounds()) -> RaceSummary:
    """How many consistent executions contain a data race."""
    executions = enumerate_executions(program, bounds)
    racy = 0
    example = None
    for ex in executions:
        if not find_data_races(ex.graph).race_free:
            racy += 1
            if example is None:
                example = ex
    return RaceSummary(total=len(executions), racy=racy, example=example)
