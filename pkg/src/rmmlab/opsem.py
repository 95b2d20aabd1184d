"""Interleaving operational semantics over instrumented heaps.

A configuration holds a regular heap (nonatomic cells only), an atomic heap
mapping each atomic location to its specification and total tied resource,
and a thread pool of commands.  Nonatomic writes are two-phase (the cell is
reserved while a write is in progress, so racing accesses get stuck), and
atomic operations consume their tied precondition, nondeterministically
produce an enabled result with its postcondition, and may only fire when the
total tied resource is *consistent* with the operation — otherwise they
stutter, blocking the thread until enough other events have happened.

Each location is always in one of four states: not yet allocated (absent
from both heaps), nonatomic mode (a value or a reservation in the regular
heap), atomic mode (reserved in the regular heap, present in the atomic
heap), or deallocated (reserved in the regular heap, absent from the atomic
heap).  Deallocation keeps the cell reserved rather than returning it to the
unallocated state, so addresses are never reused and double frees get stuck;
freeing a location in atomic mode drops its atomic-heap entry instead.

The consistency oracle is pluggable: ``WitnessSearch`` decides the judgment
by bounded single-location trace search (self-contained, slower);
``GraphGuided`` follows one execution graph, resolving every nondeterministic
choice from its events and checking the judgment against the set of events
executed so far.  ``explore_safety`` walks all interleavings (collapsing
spurious stutters) and reports a stuck configuration if one is reachable;
``replay_prefix`` and ``config_corresponds`` implement the correspondence
between happens-before-prefixes of an execution graph and configurations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

from .enumeration import ALLOC_BASE, ALLOC_STRIDE, BoundExceeded
from .exec_graph import EventId, ExecutionGraph, Label, Operation, OpKind
from .lang import (
    AtomicCmd,
    BeginAtomic,
    Cmd,
    Cons,
    EndAtomic,
    Expr,
    ExprCmd,
    Free,
    Fork,
    If,
    LangError,
    Let,
    Program,
    ReadNA,
    Value,
    WriteNA,
    WriteNAInProgress,
    eval_expr,
    print_cmd,
    substitute,
)
from .relations import derive_hb, find_data_races
from .tied import (
    AtomicSpec,
    TotalTied,
    check_consistent_resource,
    net_resource,
    tb_normalize,
    total_compose,
    total_initial,
    total_subtract,
)


class OpsemError(Exception):
    pass


class ReplayStuck(OpsemError):
    def __init__(self, event, why: str):
        self.event = event
        super().__init__(f"replay stuck at {event}: {why}")


# -- cells and configurations ----------------------------------------------------------

RESERVED = None  # regular-heap marker for a reserved cell


@dataclass(frozen=True)
class CellState:
    """One of: unallocated, value, reserved (mid-write, atomic mode, freed)."""

    kind: str  # "unallocated" | "value" | "reserved"
    value: Optional[int] = None


@dataclass
class Configuration:
    """heap: location -> value | RESERVED; atomic: location -> (spec, total
    tied resource); threads: thread id -> command."""

    heap: dict[int, Optional[int]] = field(default_factory=dict)
    atomic: dict[int, tuple[AtomicSpec, TotalTied]] = field(default_factory=dict)
    threads: dict[str, Cmd] = field(default_factory=dict)

    def cell_state(self, loc: int) -> CellState:
        if loc not in self.heap:
            return CellState("unallocated")
        v = self.heap[loc]
        if v is RESERVED:
            return CellState("reserved")
        return CellState("value", v)

    def copy(self) -> "Configuration":
        out = Configuration(dict(self.heap), dict(self.atomic), dict(self.threads))
        out._specs = getattr(self, "_specs", {})
        return out

    def key(self) -> tuple:
        return (
            tuple(
                sorted(
                    self.heap.items(),
                    key=lambda kv: (kv[0], kv[1] is None, kv[1] or 0),
                )
            ),
            tuple(
                (loc, spec.name, omega)
                for loc, (spec, omega) in sorted(self.atomic.items())
            ),
            tuple(sorted((t, print_cmd(c)) for t, c in self.threads.items())),
        )

    def __eq__(self, other) -> bool:
        return isinstance(other, Configuration) and self.key() == other.key()


def check_four_state(gamma: Configuration) -> bool:
    """Every atomic-heap entry sits on a reserved regular-heap cell, so each
    location is in exactly one of the four legal states."""
    for loc in gamma.atomic:
        if loc not in gamma.heap or gamma.heap[loc] is not RESERVED:
            return False
    return True


def initial_configuration(program: Program) -> Configuration:
    heap: dict[int, Optional[int]] = {
        addr: 0 for addr in program.location_names.values()
    }
    threads = {f"t{i + 1}": cmd for i, cmd in enumerate(program.threads)}
    gamma = Configuration(heap=heap, atomic={}, threads=threads)
    gamma._specs = dict(program.specs)
    return gamma


# -- reduction contexts ----------------------------------------------------------------


def _closed_value(e: Expr) -> Optional[int]:
    try:
        return eval_expr(e, {})
    except LangError:
        return None


def decompose(cmd: Cmd) -> tuple[list[tuple[str, Cmd]], Cmd]:
    """Split a command into let-frames (outermost first) and the head redex."""
    frames: list[tuple[str, Cmd]] = []
    while isinstance(cmd, Let):
        bound = cmd.bound
        if isinstance(bound, ExprCmd) and _closed_value(bound.expr) is not None:
            return frames, cmd  # the let itself steps by substitution
        frames.append((cmd.name, cmd.body))
        cmd = bound
    return frames, cmd


def plug(frames: Sequence[tuple[str, Cmd]], cmd: Cmd) -> Cmd:
    for name, body in reversed(frames):
        cmd = Let(name, cmd, body)
    return cmd


def thread_finished(cmd: Cmd) -> Optional[int]:
    frames, redex = decompose(cmd)
    if not frames and isinstance(redex, ExprCmd):
        return _closed_value(redex.expr)
    return None


def _redex_location(redex: Cmd) -> Optional[int]:
    if isinstance(redex, WriteNAInProgress):
        return redex.loc
    loc = getattr(redex, "loc", None)
    return None if loc is None else _closed_value(loc)


# -- consistency oracles ---------------------------------------------------------------


@dataclass
class WitnessSearch:
    """Decide the atomic-operation consistency judgment by bounded
    single-location trace search, with results drawn from a finite range."""

    bound: int = 6
    value_domain: tuple[int, ...] = tuple(range(-8, 9))

    def result_candidates(self, spec: AtomicSpec, op: Operation) -> list[int]:
        return spec.enabled_results(op, self.value_domain)

    def consistent(
        self, spec: AtomicSpec, thread: str, value: int, op: Operation, omega: TotalTied
    ) -> bool:
        return check_consistent_resource(
            spec, thread, value, op, omega, self.bound
        ).consistent


@dataclass
class GraphGuided:
    """Follow one execution graph: results come from its events, and the
    consistency judgment is checked against the set of already-executed
    events — it must contain every enabled same-location operation that
    happens-before the pivot, nothing that happens after it, and every
    happens-before-consistent replay order of it must be defined."""

    graph: ExecutionGraph
    hb: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if not self.hb:
            self.hb = derive_hb(self.graph)

    def consistent_at(
        self, spec: AtomicSpec, pivot: EventId, executed: frozenset
    ) -> bool:
        g = self.graph
        loc = g.lab[pivot].location
        on_loc = [
            e
            for e in g.sorted_events()
            if g.lab[e].location == loc
            and g.lab[e].pseudo is None
            and g.lab[e].op in spec.pre
        ]
        if pivot in executed:
            return False
        for e in on_loc:
            if (e, pivot) in self.hb and e not in executed:
                return False
            if e in executed and (pivot, e) in self.hb:
                return False
        return self._all_orders_defined(spec, [e for e in on_loc if e in executed])

    def _all_orders_defined(self, spec: AtomicSpec, ex: list[EventId]) -> bool:
        g = self.graph
        events = [(e.thread, g.lab[e].op, g.lab[e].result) for e in ex]
        n = len(events)
        preds = [{j for j in range(n) if (ex[j], ex[i]) in self.hb} for i in range(n)]
        memo: dict[frozenset, bool] = {}

        def ok_from(done: frozenset, state: TotalTied) -> bool:
            if len(done) == n:
                return True
            if done in memo:
                return memo[done]
            result = True
            for i in range(n):
                if i in done or not preds[i] <= done:
                    continue
                thread, op, v = events[i]
                post = spec.post_lookup(op, v)
                if post is None:
                    result = False
                    break
                pg, pl = spec.pre[op]
                rest = total_subtract(
                    spec,
                    state,
                    TotalTied(pg, tb_normalize(spec.local_monoid, {thread: pl})),
                )
                if rest is None:
                    result = False
                    break
                qg, ql = post
                nxt = total_compose(
                    spec,
                    rest,
                    TotalTied(qg, tb_normalize(spec.local_monoid, {thread: ql})),
                )
                if not ok_from(done | {i}, nxt):
                    result = False
                    break
            memo[done] = result
            return result

        return ok_from(frozenset(), total_initial(spec))


# -- head steps -------------------------------------------------------------------------


@dataclass(frozen=True)
class StepLabel:
    thread: str
    rule: str
    event: Optional[Label] = None

    def to_dict(self) -> dict:
        event = None
        if self.event is not None:
            lab = self.event
            event = {
                "location": lab.location,
                "result": lab.result,
                "op": lab.op.kind.value,
                **({"value": lab.op.value} if lab.op.value is not None else {}),
                **({"pseudo": lab.pseudo} if lab.pseudo else {}),
            }
        return {"thread": self.thread, "rule": self.rule, "event": event}


def _fresh_block(gamma: Configuration, size: int) -> int:
    base = ALLOC_BASE
    while any(base + i in gamma.heap for i in range(size)):
        base += ALLOC_STRIDE
    return base


def _end_atomic_values(spec: AtomicSpec) -> list[int]:
    """Candidate values restored by a conversion back to nonatomic mode.

    The conversion rule leaves the restored value unconstrained; we bound the
    nondeterminism to the specification's guard constants and initial value.
    """
    out = {spec.v0, 0}
    for clauses in spec.post.values():
        for clause in clauses:
            out.add(clause.k)
    return sorted(out)


def _spec_by_name(gamma: Configuration, name: str) -> Optional[AtomicSpec]:
    return getattr(gamma, "_specs", {}).get(name)


def head_step(
    gamma: Configuration,
    t: str,
    oracle: Union[WitnessSearch, GraphGuided, None] = None,
    guided_result: Optional[int] = None,
    guided_base: Optional[int] = None,
    guided_written: Optional[int] = None,
    consistency_executed: frozenset = frozenset(),
    pivot: Optional[EventId] = None,
) -> list[tuple[Configuration, StepLabel]]:
    """All successors of thread ``t``'s head redex, excluding Fork (a
    full-step rule) and the stutter successor (which leaves the
    configuration unchanged).  In guided mode the caller pins the result
    value, allocation base and restored value, and supplies the
    executed-event set for the consistency judgment."""
    if oracle is None:
        oracle = WitnessSearch()
    cmd = gamma.threads[t]
    frames, redex = decompose(cmd)
    out: list[tuple[Configuration, StepLabel]] = []

    def succ(rule: str, new_cmd: Cmd, heap=None, atomic=None, event=None):
        nxt = gamma.copy()
        if heap is not None:
            nxt.heap = heap
        if atomic is not None:
            nxt.atomic = atomic
        nxt.threads[t] = plug(frames, new_cmd)
        out.append((nxt, StepLabel(t, rule, event)))

    if isinstance(redex, Let):
        v = _closed_value(redex.bound.expr)
        succ("Let", substitute(redex.body, v, redex.name))
        return out
    if isinstance(redex, ExprCmd):
        return out  # a finished thread takes no step
    if isinstance(redex, If):
        v = _closed_value(redex.cond)
        if v is None:
            return out
        if v != 0:
            succ("If-True", redex.body)
        else:
            succ("If-False", ExprCmd(Value(0)))
        return out
    if isinstance(redex, Cons):
        vals = [_closed_value(a) for a in redex.args]
        if any(v is None for v in vals):
            return out
        base = guided_base if guided_base is not None else _fresh_block(gamma, len(vals))
        if any(base + i in gamma.heap for i in range(len(vals))):
            return out
        heap = dict(gamma.heap)
        for i, v in enumerate(vals):
            heap[base + i] = v
        succ("Cons", ExprCmd(Value(base)), heap=heap)
        return out

    loc = _redex_location(redex)
    if loc is None:
        return out

    if isinstance(redex, ReadNA):
        state = gamma.cell_state(loc)
        if state.kind == "value" and guided_result in (None, state.value):
            succ(
                "NA-Read",
                ExprCmd(Value(state.value)),
                event=Label(t, loc, state.value, Operation(OpKind.READ_NA)),
            )
        return out
    if isinstance(redex, WriteNA):
        v = _closed_value(redex.value)
        if v is not None and gamma.cell_state(loc).kind == "value":
            heap = dict(gamma.heap)
            heap[loc] = RESERVED
            succ("NA-Write-Start", WriteNAInProgress(loc, v), heap=heap)
        return out
    if isinstance(redex, WriteNAInProgress):
        if gamma.heap.get(loc, 0) is RESERVED and loc not in gamma.atomic:
            heap = dict(gamma.heap)
            heap[loc] = redex.value
            succ(
                "NA-Write-End",
                ExprCmd(Value(0)),
                heap=heap,
                event=Label(t, loc, 0, Operation(OpKind.WRITE_NA, value=redex.value)),
            )
        return out
    if isinstance(redex, Free):
        if loc in gamma.atomic:
            atomic = dict(gamma.atomic)
            del atomic[loc]
            succ(
                "Free",
                ExprCmd(Value(0)),
                atomic=atomic,
                event=Label(
                    t, loc, 0, Operation(OpKind.WRITE_NA, value=0), pseudo="free"
                ),
            )
        elif gamma.cell_state(loc).kind == "value":
            heap = dict(gamma.heap)
            heap[loc] = RESERVED
            succ(
                "Free",
                ExprCmd(Value(0)),
                heap=heap,
                event=Label(
                    t, loc, 0, Operation(OpKind.WRITE_NA, value=0), pseudo="free"
                ),
            )
        return out
    if isinstance(redex, BeginAtomic):
        spec = _spec_by_name(gamma, redex.spec_name)
        if spec is None:
            return out
        if (
            gamma.cell_state(loc) == CellState("value", spec.v0)
            and loc not in gamma.atomic
        ):
            heap = dict(gamma.heap)
            heap[loc] = RESERVED
            atomic = dict(gamma.atomic)
            atomic[loc] = (spec, total_initial(spec))
            succ(
                "BeginAtomic",
                ExprCmd(Value(0)),
                heap=heap,
                atomic=atomic,
                event=Label(
                    t,
                    loc,
                    0,
                    Operation(OpKind.WRITE_NA, value=0),
                    pseudo="begin_atomic",
                    spec_name=redex.spec_name,
                ),
            )
        return out
    if isinstance(redex, EndAtomic):
        if loc in gamma.atomic:
            spec, _ = gamma.atomic[loc]
            values = (
                [guided_written]
                if guided_written is not None
                else _end_atomic_values(spec)
            )
            for v in values:
                heap = dict(gamma.heap)
                heap[loc] = v
                atomic = dict(gamma.atomic)
                del atomic[loc]
                succ(
                    "EndAtomic",
                    ExprCmd(Value(0)),
                    heap=heap,
                    atomic=atomic,
                    event=Label(
                        t,
                        loc,
                        0,
                        Operation(OpKind.WRITE_NA, value=v),
                        pseudo="end_atomic",
                    ),
                )
        return out
    if isinstance(redex, AtomicCmd):
        if loc not in gamma.atomic:
            return out
        spec, omega = gamma.atomic[loc]
        op = redex.operation({})
        if op not in spec.pre:
            return out
        pg, pl = spec.pre[op]
        rest = total_subtract(
            spec, omega, TotalTied(pg, tb_normalize(spec.local_monoid, {t: pl}))
        )
        if rest is None:
            return out  # precondition not splittable: stuck
        if isinstance(oracle, GraphGuided):
            candidates = [] if guided_result is None else [guided_result]
        else:
            candidates = oracle.result_candidates(spec, op)
        for v in candidates:
            post = spec.post_lookup(op, v)
            if post is None:
                continue
            if isinstance(oracle, GraphGuided):
                ok = oracle.consistent_at(spec, pivot, consistency_executed)
            else:
                ok = oracle.consistent(spec, t, v, op, omega)
            if not ok:
                continue
            qg, ql = post
            new_omega = total_compose(
                spec, rest, TotalTied(qg, tb_normalize(spec.local_monoid, {t: ql}))
            )
            atomic = dict(gamma.atomic)
            atomic[loc] = (spec, new_omega)
            succ("AtomicOp", ExprCmd(Value(v)), atomic=atomic, event=Label(t, loc, v, op))
        return out
    return out


def head_blocked(gamma: Configuration, t: str) -> bool:
    """True if the thread's redex is an atomic operation whose tied
    precondition is splittable — only the stutter rule applies, which is a
    wait, not a fault."""
    _, redex = decompose(gamma.threads[t])
    if not isinstance(redex, AtomicCmd):
        return False
    loc = _redex_location(redex)
    if loc is None or loc not in gamma.atomic:
        return False
    spec, omega = gamma.atomic[loc]
    op = redex.operation({})
    if op not in spec.pre:
        return False
    pg, pl = spec.pre[op]
    return (
        total_subtract(
            spec, omega, TotalTied(pg, tb_normalize(spec.local_monoid, {t: pl}))
        )
        is not None
    )


def _fork_child_name(gamma: Configuration, parent: str) -> str:
    k = 1
    while f"{parent}/{k}" in gamma.threads:
        k += 1
    return f"{parent}/{k}"


def _fork_successor(
    gamma: Configuration, t: str, frames, redex: Fork
) -> tuple[Configuration, StepLabel]:
    nxt = gamma.copy()
    child = _fork_child_name(gamma, t)
    nxt.threads[t] = plug(frames, ExprCmd(Value(0)))
    nxt.threads[child] = redex.body
    return nxt, StepLabel(t, "Fork")


def step(
    gamma: Configuration, oracle: Union[WitnessSearch, GraphGuided, None] = None
) -> list[tuple[Configuration, StepLabel]]:
    """All full-step successors: head steps of every thread plus forks."""
    out: list[tuple[Configuration, StepLabel]] = []
    for t in sorted(gamma.threads):
        frames, redex = decompose(gamma.threads[t])
        if isinstance(redex, Fork):
            out.append(_fork_successor(gamma, t, frames, redex))
            continue
        out.extend(head_step(gamma, t, oracle))
    return out


# -- safety exploration -----------------------------------------------------------------


@dataclass
class SafetyVerdict:
    safe: bool
    stuck_trace: Optional[list[StepLabel]]
    blocked_count: int
    explored: int

    def to_dict(self) -> dict:
        return {
            "safe": self.safe,
            "blocked_count": self.blocked_count,
            "explored": self.explored,
            "stuck_trace": None
            if self.stuck_trace is None
            else [s.to_dict() for s in self.stuck_trace],
        }


def explore_safety(
    program: Program,
    consistency: Union[WitnessSearch, GraphGuided, None] = None,
    max_configs: int = 200_000,
) -> SafetyVerdict:
    """Depth-first exploration of all interleavings (spurious stutters are
    collapsed, they do not change the configuration).  A thread is stuck if
    it has a head redex but no applicable rule, including an unsplittable
    tied precondition; it is merely blocked — which is safe — if only the
    stutter rule applies."""
    if consistency is None:
        consistency = WitnessSearch()
    if isinstance(consistency, GraphGuided):
        return _explore_guided(program, consistency, max_configs)
    gamma0 = initial_configuration(program)
    seen: set = set()
    blocked_count = 0
    stack: list[tuple[Configuration, list[StepLabel]]] = [(gamma0, [])]
    while stack:
        gamma, trace = stack.pop()
        key = gamma.key()
        if key in seen:
            continue
        seen.add(key)
        if len(seen) > max_configs:
            raise BoundExceeded(f"more than {max_configs} configurations")
        if not check_four_state(gamma):
            return SafetyVerdict(False, trace, blocked_count, len(seen))
        for t in sorted(gamma.threads):
            frames, redex = decompose(gamma.threads[t])
            if isinstance(redex, Fork):
                nxt, lab = _fork_successor(gamma, t, frames, redex)
                stack.append((nxt, trace + [lab]))
                continue
            if thread_finished(gamma.threads[t]) is not None:
                continue
            succs = head_step(gamma, t, consistency)
            if not succs:
                if head_blocked(gamma, t):
                    blocked_count += 1
                    continue
                return SafetyVerdict(
                    False, trace + [StepLabel(t, "stuck")], blocked_count, len(seen)
                )
            for nxt, lab in succs:
                stack.append((nxt, trace + [lab]))
    return SafetyVerdict(True, None, blocked_count, len(seen))


# -- graph-guided execution --------------------------------------------------------------


@dataclass
class _GuidedState:
    gamma: Configuration
    cursors: dict[str, int]  # per graph thread: events executed so far

    def key(self) -> tuple:
        return (self.gamma.key(), tuple(sorted(self.cursors.items())))


def _thread_event_lists(g: ExecutionGraph) -> dict[str, list[EventId]]:
    return {t: g.thread_events(t) for t in g.threads() if t != g.init_thread}


def _executed_events(
    lists: dict[str, list[EventId]], cursors: dict[str, int]
) -> frozenset:
    out = set()
    for t, es in lists.items():
        out.update(es[: cursors.get(t, 0)])
    return frozenset(out)


def _event_matches(redex: Cmd, loc: Optional[int], lab: Label) -> bool:
    if isinstance(redex, Cons):
        return lab.pseudo == "alloc"
    if isinstance(redex, ReadNA):
        return (
            lab.pseudo is None
            and lab.op.kind is OpKind.READ_NA
            and lab.location == loc
        )
    if isinstance(redex, WriteNAInProgress):
        return (
            lab.pseudo is None
            and lab.op.kind is OpKind.WRITE_NA
            and lab.location == loc
            and lab.op.value == redex.value
        )
    if isinstance(redex, Free):
        return lab.pseudo == "free" and lab.location == loc
    if isinstance(redex, BeginAtomic):
        return lab.pseudo == "begin_atomic" and lab.location == loc
    if isinstance(redex, EndAtomic):
        return lab.pseudo == "end_atomic" and lab.location == loc
    if isinstance(redex, AtomicCmd):
        return (
            lab.pseudo is None and lab.location == loc and lab.op == redex.operation({})
        )
    return False


def _guided_successors(
    program: Program,
    oracle: GraphGuided,
    lists: dict[str, list[EventId]],
    state: _GuidedState,
    t: str,
) -> tuple[list[tuple[_GuidedState, StepLabel]], str]:
    """Successors for one thread under graph guidance; the status is
    "ok", "done", "blocked" or "stuck"."""
    g = oracle.graph
    gamma = state.gamma
    frames, redex = decompose(gamma.threads[t])
    if isinstance(redex, ExprCmd) and not frames:
        return [], "done"

    def with_cursor(succs, advance: int):
        out = []
        for nxt, lab in succs:
            cursors = dict(state.cursors)
            cursors[t] = cursors.get(t, 0) + advance
            out.append((_GuidedState(nxt, cursors), lab))
        return out

    # Administrative rules produce no events.
    if isinstance(redex, (Let, If)):
        return with_cursor(head_step(gamma, t, oracle), 0), "ok"
    if isinstance(redex, Fork):
        return with_cursor([_fork_successor(gamma, t, frames, redex)], 0), "ok"
    if isinstance(redex, WriteNA):
        # two-phase: the graph's event is consumed by the write-end step
        succs = head_step(gamma, t, oracle)
        return with_cursor(succs, 0), "ok" if succs else "stuck"

    done = state.cursors.get(t, 0)
    events = lists.get(t, [])
    if done >= len(events):
        return [], "stuck"  # a memory redex remains but the graph has no event
    e = events[done]
    lab = g.lab[e]
    loc = _redex_location(redex)
    if not _event_matches(redex, loc, lab):
        return [], "stuck"
    if isinstance(redex, Cons):
        succs = head_step(gamma, t, oracle, guided_base=lab.location)
        return with_cursor(succs, len(redex.args)), "ok" if succs else "stuck"
    if isinstance(redex, (ReadNA, WriteNAInProgress, Free, BeginAtomic)):
        succs = head_step(gamma, t, oracle, guided_result=lab.result)
        return with_cursor(succs, 1), "ok" if succs else "stuck"
    if isinstance(redex, EndAtomic):
        succs = head_step(gamma, t, oracle, guided_written=lab.op.value)
        return with_cursor(succs, 1), "ok" if succs else "stuck"
    if isinstance(redex, AtomicCmd):
        executed = _executed_events(lists, state.cursors)
        succs = head_step(
            gamma,
            t,
            oracle,
            guided_result=lab.result,
            consistency_executed=executed,
            pivot=e,
        )
        if succs:
            return with_cursor(succs, 1), "ok"
        return [], "blocked" if head_blocked(gamma, t) else "stuck"
    return [], "stuck"


def _explore_guided(
    program: Program, oracle: GraphGuided, max_configs: int
) -> SafetyVerdict:
    lists = _thread_event_lists(oracle.graph)
    start = _GuidedState(initial_configuration(program), {})
    seen: set = set()
    blocked_count = 0
    stack: list[tuple[_GuidedState, list[StepLabel]]] = [(start, [])]
    while stack:
        state, trace = stack.pop()
        key = state.key()
        if key in seen:
            continue
        seen.add(key)
        if len(seen) > max_configs:
            raise BoundExceeded(f"more than {max_configs} configurations")
        if not check_four_state(state.gamma):
            return SafetyVerdict(False, trace, blocked_count, len(seen))
        for t in sorted(state.gamma.threads):
            succs, status = _guided_successors(program, oracle, lists, state, t)
            if status == "stuck":
                return SafetyVerdict(
                    False, trace + [StepLabel(t, "stuck")], blocked_count, len(seen)
                )
            if status == "blocked":
                blocked_count += 1
            for nxt, lab in succs:
                stack.append((nxt, trace + [lab]))
    return SafetyVerdict(True, None, blocked_count, len(seen))


# -- prefix replay and correspondence ------------------------------------------------------


def _silent_closure(program: Program, gamma: Configuration) -> Configuration:
    """Run all value-lets, resolved conditionals and forks to quiescence;
    these steps touch no memory, so eager application yields a canonical
    residual thread pool."""
    gamma = gamma.copy()
    changed = True
    while changed:
        changed = False
        for t in sorted(gamma.threads):
            frames, redex = decompose(gamma.threads[t])
            if isinstance(redex, Fork):
                nxt, _ = _fork_successor(gamma, t, frames, redex)
                gamma = nxt
                changed = True
            elif isinstance(redex, (Let, If)):
                succs = head_step(gamma, t)
                if succs:
                    gamma = succs[0][0]
                    changed = True
    return gamma


def replay_prefix(
    program: Program,
    g: ExecutionGraph,
    order: Sequence[EventId],
    spec_table: Optional[dict[str, AtomicSpec]] = None,
) -> Configuration:
    """The configuration reached by taking the steps corresponding to the
    events of a happens-before-prefix in the given order, resolving every
    nondeterministic choice from the events' labels and running silent steps
    eagerly.  All allocation events of one block fire together at the
    block's first event; initialization events are part of the initial
    configuration and are skipped."""
    oracle = GraphGuided(g)
    lists = _thread_event_lists(g)
    gamma = initial_configuration(program)
    if spec_table:
        gamma._specs.update(spec_table)
    gamma = _silent_closure(program, gamma)
    cursors: dict[str, int] = {}
    done: set[EventId] = set()
    for e in order:
        if e.thread == g.init_thread or e in done:
            done.add(e)
            continue
        t = e.thread
        if e not in lists.get(t, []):
            raise ReplayStuck(e, "event not in graph")
        target = lists[t].index(e)
        guard = 0
        while cursors.get(t, 0) <= target:
            guard += 1
            if guard > 4 + target:
                raise ReplayStuck(e, "no progress")
            state = _GuidedState(gamma, cursors)
            succs, status = _guided_successors(program, oracle, lists, state, t)
            if not succs:
                raise ReplayStuck(e, status)
            nxt, _ = succs[0]
            gamma, cursors = nxt.gamma, nxt.cursors
            gamma = _silent_closure(program, gamma)
        done.update(lists[t][: cursors[t]])
    return gamma


def hb_prefix_closed(g: ExecutionGraph, prefix: Iterable[EventId]) -> bool:
    prefix = set(prefix)
    hb = derive_hb(g)
    return all(a in prefix for a, b in hb if b in prefix)


def _hb_linearization(g: ExecutionGraph, hb: frozenset) -> list[EventId]:
    order: list[EventId] = []
    left = set(g.events)
    while left:
        for e in sorted(left):
            if not any((a, e) in hb for a in left if a != e):
                order.append(e)
                left.remove(e)
                break
        else:
            raise OpsemError("happens-before cycle")
    return order


def config_corresponds(
    program: Program,
    g: ExecutionGraph,
    prefix: Iterable[EventId],
    gamma: Configuration,
    spec_table: Optional[dict[str, AtomicSpec]] = None,
) -> bool:
    """The correspondence judgment between a happens-before-prefix and a
    configuration: the prefix is race-free; the thread pool matches the
    prefix's residual commands; each nonatomically-held cell holds its
    hb-final written value (reserved if freed); each atomic cell carries its
    specification and the net tied resource of the prefix's operations on
    it, post-compositions first."""
    prefix = set(prefix)
    specs = dict(program.specs)
    if spec_table:
        specs.update(spec_table)
    if not find_data_races(g.restrict(prefix)).race_free:
        return False
    hb = derive_hb(g)

    # Thread pool: compare against a canonical replay of the prefix.
    order = [e for e in _hb_linearization(g, hb) if e in prefix]
    try:
        expected = replay_prefix(program, g, order, spec_table)
    except ReplayStuck:
        return False
    if sorted((t, print_cmd(c)) for t, c in gamma.threads.items()) != sorted(
        (t, print_cmd(c)) for t, c in expected.threads.items()
    ):
        return False

    def hb_last(events: list[EventId]) -> EventId:
        return max(events, key=lambda e: sum(1 for x in events if (x, e) in hb))

    for loc in {g.lab[e].location for e in prefix}:
        convs = [
            e
            for e in prefix
            if g.lab[e].location == loc
            and g.lab[e].pseudo in ("begin_atomic", "end_atomic", "free")
        ]
        mode = "nonatomic" if not convs else g.lab[hb_last(convs)].pseudo
        if mode == "free":
            if gamma.heap.get(loc, 0) is not RESERVED or loc in gamma.atomic:
                return False
        elif mode == "begin_atomic":
            begin = hb_last(convs)
            spec = specs.get(g.lab[begin].spec_name or "")
            if spec is None or loc not in gamma.atomic:
                return False
            got_spec, got_omega = gamma.atomic[loc]
            ops = [
                (e.thread, g.lab[e].op, g.lab[e].result)
                for e in sorted(prefix)
                if g.lab[e].location == loc
                and g.lab[e].pseudo is None
                and g.lab[e].op in spec.pre
                and (begin, e) in hb
            ]
            want = net_resource(spec, ops)
            if got_spec.name != spec.name or want is None or got_omega != want:
                return False
            if gamma.heap.get(loc, 0) is not RESERVED:
                return False
        else:  # nonatomic mode (never converted, or converted back)
            writes = [
                e
                for e in prefix
                if g.lab[e].location == loc
                and g.lab[e].is_write_like
                and g.lab[e].pseudo != "free"
            ]
            if not writes:
                if loc in program.location_names.values() and gamma.heap.get(loc) != 0:
                    return False
                continue
            final = hb_last(writes)
            if gamma.heap.get(loc) != g.lab[final].written_value:
                return False
    return True
