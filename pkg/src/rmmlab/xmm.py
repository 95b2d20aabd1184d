"""Re-execution construction of consistent executions, and grounding checks.

A consistent graph is *constructible* if it can be reached from the empty
graph through Execute steps (each adds one porf-maximal event) and Re-Execute
steps (each fixes an rf-complete *committed* set, keeps its po-maximal
po-prefix — the *determined* set — verbatim, and rebuilds the rest through
Guided Steps, during which committed reads may temporarily read from
nowhere).  On high-level graphs, where an RMW is a single event, this defines
the re-executing variant of the high-level model; on low-level graphs, where
an RMW is a read/write pair, the committed set may split the pair.

``ymm_reachable``/``xmm_reachable`` search for a construction of a target
execution.  Intermediate graphs are drawn from the porf-prefix-closed
restrictions of the program's consistent executions, capped at the target
size plus two events; ``NotWithinBounds`` is therefore an under-approximation
of "unreachable" — Execute steps only ever add events of a program run, so
the pool is the natural candidate universe, but no completeness claim is
made.

``check_grounded``/``check_weakly_grounded`` decide whether every atomic
access of a graph (and its reads-from ancestry) is enabled under the atomic
specification installed by the governing ``begin_atomic`` event, absolutely
or relative to a total *grounding order* consistent with happens-before.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Sequence

from .enumeration import Bounds, enumerate_executions
from .exec_graph import (
    EventId,
    ExecutionGraph,
    Label,
    check_well_formed,
    mode_geq,
    to_low_level,
)
from .lang import Program
from .relations import check_consistent, derive_hb, derive_rpo, has_porf_cycle
from .tied import AtomicSpec


class XmmError(Exception):
    pass


# -- basic helpers -------------------------------------------------------------------


def graphs_equal(a: ExecutionGraph, b: ExecutionGraph) -> bool:
    return (
        a.events == b.events
        and dict(a.lab) == dict(b.lab)
        and a.po == b.po
        and a.rf == b.rf
        and a.mo == b.mo
        and a.rmw == b.rmw
    )


def is_release_event(lab: Label) -> bool:
    """Release write/RMW or release fence (pseudo events are nonatomic)."""
    if lab.pseudo is not None:
        return False
    kind = lab.op.kind
    return (kind.is_write or kind.is_rmw or kind.is_fence) and mode_geq(
        kind.mode, "rel"
    )


def _is_reading(lab: Label) -> bool:
    return lab.pseudo is None and (lab.op.kind.is_read or lab.op.kind.is_rmw)


def _po_preds(g: ExecutionGraph) -> dict[EventId, set[EventId]]:
    preds: dict[EventId, set[EventId]] = {e: set() for e in g.events}
    for a, b in g.po:
        preds[b].add(a)
    return preds


def _rf_ancestors(g: ExecutionGraph, e: EventId) -> set[EventId]:
    """Transitive reads-from predecessors of ``e``."""
    out: set[EventId] = set()
    frontier = [e]
    while frontier:
        cur = frontier.pop()
        src = g.rf_source(cur)
        if src is not None and src not in out:
            out.add(src)
            frontier.append(src)
    return out


# -- Execute steps -------------------------------------------------------------------


def validate_execute_step(g: ExecutionGraph, g2: ExecutionGraph) -> bool:
    """True iff ``g2`` extends ``g`` by one porf-maximal event and both are
    consistent."""
    if not check_consistent(g).consistent or not check_consistent(g2).consistent:
        return False
    added = g2.events - g.events
    if len(added) != 1 or not g.events <= g2.events:
        return False
    (e,) = added
    if not graphs_equal(g2.restrict(g.events), g):
        return False
    porf = g2.porf()
    return not any(a == e for a, _ in porf)


# -- Re-Execute steps ----------------------------------------------------------------


@dataclass(frozen=True)
class ReExecutePlan:
    """The committed set C, determined set D, and a guided addition order."""

    committed: frozenset[EventId]
    determined: frozenset[EventId]
    addition_order: tuple[EventId, ...]

    def to_dict(self) -> dict:
        return {
            "committed": sorted(e.encode() for e in self.committed),
            "determined": sorted(e.encode() for e in self.determined),
            "addition_order": [e.encode() for e in self.addition_order],
        }


def guided_steps_reachable(
    start: ExecutionGraph,
    target: ExecutionGraph,
    committed: Iterable[EventId],
) -> Optional[list[EventId]]:
    """An order adding the missing events of ``target`` to ``start`` where
    each added event is po-maximal at its step and either is not a read/RMW,
    or reads from an already-present event, or is committed.

    A complete order is necessarily a linear extension of po (an event added
    before one of its po-predecessors would make the predecessor forever
    un-addable), and within linear extensions addability only grows with the
    present set, so a greedy saturation is complete.
    """
    committed = frozenset(committed)
    present = set(start.events)
    if not present <= target.events:
        return None
    preds = _po_preds(target)
    # Start must be po-prefix-closed in the target, or some present event
    # already po-follows a missing one and that event can never be added.
    for e in present:
        if not preds[e] <= present:
            return None
    remaining = set(target.events) - present
    order: list[EventId] = []
    while remaining:
        progress = False
        for e in sorted(remaining):
            if not preds[e] <= present:
                continue
            if _is_reading(target.lab[e]) and e not in committed:
                src = target.rf_source(e)
                if src is None or src not in present:
                    continue
            present.add(e)
            remaining.remove(e)
            order.append(e)
            progress = True
        if not progress:
            return None
    return order


def max_determined_set(
    g: ExecutionGraph, committed: frozenset[EventId]
) -> Optional[frozenset[EventId]]:
    """The largest po-prefix-closed subset of the committed set, or absent if
    it is not po-maximal in the committed set (in which case no determined
    set satisfies both requirements, since any po-prefix-closed subset of C
    is contained in the largest one)."""
    preds = _po_preds(g)
    closed: dict[EventId, bool] = {}

    def prefix_in_c(e: EventId) -> bool:
        if e not in closed:
            closed[e] = False  # cycle guard; po is acyclic anyway
            closed[e] = e in committed and all(prefix_in_c(p) for p in preds[e])
        return closed[e]

    d = frozenset(e for e in committed if prefix_in_c(e))
    # po-maximality in C: an immediate po-successor of a D event that is
    # committed must itself be determined.
    for a, b in g.po:
        if a in d and b in committed and b not in d:
            if not any((a, c) in g.po and (c, b) in g.po for c in g.events):
                return None
    return d


def validate_re_execute_step(
    g: ExecutionGraph,
    g2: ExecutionGraph,
    plan: ReExecutePlan,
    allow_split_rmw: bool = True,
) -> bool:
    """Check the six conditions relating a source graph, a rebuilt graph and
    a committed/determined plan.

    ``allow_split_rmw`` distinguishes the low-level model (a committed set
    may contain only one half of an rmw pair) from the high-level discipline
    (an RMW is committed entirely or not at all), which on low-level graphs
    is enforced against the rmw pairing.
    """
    c, d = plan.committed, plan.determined
    if not check_consistent(g).consistent or not check_consistent(g2).consistent:
        return False
    if not (c <= g.events and c <= g2.events):
        return False
    if not graphs_equal(g.restrict(c), g2.restrict(c)):
        return False
    for e in c:
        if _is_reading(g.lab[e]):
            src = g.rf_source(e)
            if src is None or src not in c:
                return False
    if not allow_split_rmw:
        for r, w in g.rmw | g2.rmw:
            if (r in c) != (w in c):
                return False
    if not d <= c:
        return False
    preds = _po_preds(g)
    for e in d:
        if not preds[e] <= d:
            return False
    for a, b in g.po:  # po-maximality of D in C, over immediate successors
        if a in d and b in c and b not in d:
            if not any((a, x) in g.po and (x, b) in g.po for x in g.events):
                return False
    for e, e2 in derive_rpo(g2):
        if e2 not in d and e not in d:
            return False
    order = guided_steps_reachable(g.restrict(d), g2, c)
    if order is None:
        return False
    return True


def committed_nondetermined_releases(
    g: ExecutionGraph, plan: ReExecutePlan
) -> list[EventId]:
    """Committed non-determined release events; empty on every valid plan."""
    return sorted(
        e
        for e in plan.committed - plan.determined
        if is_release_event(g.lab[e])
    )


# -- construction search -------------------------------------------------------------


@dataclass(frozen=True)
class ExecuteStep:
    event: EventId
    graph: ExecutionGraph

    def to_dict(self) -> dict:
        return {"step": "execute", "event": self.event.encode()}


@dataclass(frozen=True)
class ReExecuteStep:
    plan: ReExecutePlan
    graph: ExecutionGraph

    def to_dict(self) -> dict:
        return {"step": "re-execute", **self.plan.to_dict()}


@dataclass
class ConstructionTrace:
    steps: list  # ExecuteStep | ReExecuteStep

    @property
    def re_execute_count(self) -> int:
        return sum(1 for s in self.steps if isinstance(s, ReExecuteStep))

    def to_json(self) -> str:
        return json.dumps([s.to_dict() for s in self.steps], indent=2)

    def final_graph(self) -> ExecutionGraph:
        if not self.steps:
            return ExecutionGraph(events=frozenset(), lab={})
        return self.steps[-1].graph

    def replays(self, target: ExecutionGraph, allow_split_rmw: bool = True) -> bool:
        """Every step validates and the last graph is the target."""
        cur = ExecutionGraph(events=frozenset(), lab={})
        for step in self.steps:
            if isinstance(step, ExecuteStep):
                if not validate_execute_step(cur, step.graph):
                    return False
            else:
                if not validate_re_execute_step(
                    cur, step.graph, step.plan, allow_split_rmw
                ):
                    return False
            cur = step.graph
        return graphs_equal(cur, target)


@dataclass
class Reachability:
    verdict: str  # "Constructible" | "NotWithinBounds"
    trace: Optional[ConstructionTrace]
    explored: int

    @property
    def constructible(self) -> bool:
        return self.verdict == "Constructible"

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "explored": self.explored,
            "steps": [s.to_dict() for s in self.trace.steps] if self.trace else None,
        }


def _porf_prefix_restrictions(g: ExecutionGraph, cap: int) -> Iterator[frozenset]:
    """All porf-prefix-closed event subsets of ``g`` of size at most ``cap``."""
    porf = g.porf()
    succs: dict[EventId, set[EventId]] = {e: set() for e in g.events}
    for a, b in porf:
        succs[a].add(b)
    seen: set[frozenset] = set()

    def rec(cur: frozenset):
        if cur in seen:
            return
        seen.add(cur)
        if len(cur) <= cap:
            yield cur
        for e in sorted(cur):
            if not succs[e] & cur:
                yield from rec(cur - {e})

    yield from rec(frozenset(g.events))


def _execute_only_trace(g: ExecutionGraph) -> ConstructionTrace:
    """Topological Execute construction of a porf-acyclic consistent graph."""
    porf = g.porf()
    order: list[EventId] = []
    left = set(g.events)
    while left:
        for e in sorted(left):
            if not any((a, e) in porf for a in left if a != e):
                order.append(e)
                left.remove(e)
                break
        else:
            raise XmmError("porf cycle in execute-only construction")
    steps = []
    present: set[EventId] = set()
    for e in order:
        present.add(e)
        steps.append(ExecuteStep(event=e, graph=g.restrict(present)))
    return ConstructionTrace(steps=steps)


def _rf_closed_subsets(g: ExecutionGraph) -> Iterator[frozenset]:
    """Subsets of the events whose reads/RMWs all have their rf source inside."""
    events = g.sorted_events()
    if len(events) > 16:
        raise XmmError(f"committed-set enumeration over {len(events)} events")
    src = {e: g.rf_source(e) for e in events}
    seen: set[frozenset] = set()
    for mask in range(1 << len(events)):
        sub = frozenset(e for i, e in enumerate(events) if mask >> i & 1)
        if any(
            _is_reading(g.lab[e]) and src[e] is not None and src[e] not in sub
            for e in sub
        ):
            continue
        if sub not in seen:
            seen.add(sub)
            yield sub


def _candidate_universe(
    program: Program, target: ExecutionGraph, bounds: Bounds, low_level: bool
) -> list[ExecutionGraph]:
    cap = len(target.events) + 2
    out: dict[str, ExecutionGraph] = {}
    pool = [ex.graph for ex in enumerate_executions(program, bounds)]
    if low_level:
        pool = [to_low_level(g) for g in pool]
    pool.append(target)
    for g in pool:
        for sub in _porf_prefix_restrictions(g, cap):
            h = g.restrict(sub)
            key = h.canonical_key()
            if key not in out and check_consistent(h).consistent:
                out[key] = h
    return list(out.values())


def _reachable(
    program: Program,
    target: ExecutionGraph,
    bounds: Bounds,
    max_re_exec: int,
    low_level: bool,
    allow_split_rmw: bool,
) -> Reachability:
    if not check_consistent(target).consistent:
        return Reachability("NotWithinBounds", None, 0)
    universe = _candidate_universe(program, target, bounds, low_level)
    target_key = target.canonical_key()

    # Level 0: porf-acyclic graphs are constructible by Execute steps alone.
    traces: dict[str, ConstructionTrace] = {}
    for g in universe:
        if not has_porf_cycle(g):
            traces[g.canonical_key()] = _execute_only_trace(g)
    explored = len(universe)

    for _ in range(max_re_exec):
        if target_key in traces:
            break
        new: dict[str, ConstructionTrace] = {}
        for h in universe:
            hkey = h.canonical_key()
            if hkey in traces or hkey in new:
                continue
            found = None
            for committed in _rf_closed_subsets(h):
                if found:
                    break
                if not allow_split_rmw and any(
                    (r in committed) != (w in committed) for r, w in h.rmw
                ):
                    continue
                for g in universe:
                    gkey = g.canonical_key()
                    if gkey not in traces:
                        continue
                    if not committed <= g.events:
                        continue
                    d = max_determined_set(g, committed)
                    if d is None:
                        continue
                    order = guided_steps_reachable(g.restrict(d), h, committed)
                    if order is None:
                        continue
                    plan = ReExecutePlan(committed, d, tuple(order))
                    explored += 1
                    if validate_re_execute_step(g, h, plan, allow_split_rmw):
                        found = ConstructionTrace(
                            steps=traces[gkey].steps + [ReExecuteStep(plan, h)]
                        )
                        break
            if found:
                new[hkey] = found
        if not new:
            break
        traces.update(new)

    if target_key in traces:
        return Reachability("Constructible", traces[target_key], explored)
    return Reachability("NotWithinBounds", None, explored)


def ymm_reachable(
    program: Program,
    target: ExecutionGraph,
    bounds: Bounds = Bounds(),
    max_re_exec: int = 2,
) -> Reachability:
    """Constructibility of a high-level target, where each RMW is one event
    and is committed entirely or not at all."""
    return _reachable(
        program, target, bounds, max_re_exec, low_level=False, allow_split_rmw=False
    )


def xmm_reachable(
    program: Program,
    target: ExecutionGraph,
    bounds: Bounds = Bounds(),
    max_re_exec: int = 2,
) -> Reachability:
    """Constructibility of the low-level form of a target, where an RMW is a
    read/write pair and the committed set may split it."""
    low = target if target.is_low_level() else to_low_level(target)
    return _reachable(
        program, low, bounds, max_re_exec, low_level=True, allow_split_rmw=True
    )


# -- grounding -----------------------------------------------------------------------


@dataclass(frozen=True)
class GroundingOrder:
    order: tuple[EventId, ...]

    def position(self) -> dict[EventId, int]:
        return {e: i for i, e in enumerate(self.order)}

    def consistent_with_hb(self, g: ExecutionGraph) -> bool:
        pos = self.position()
        return set(self.order) == set(g.events) and all(
            pos[a] < pos[b] for a, b in derive_hb(g) if a != b
        )


@dataclass
class GroundedReport:
    """Per-atomic-access grounding verdicts; ``issues`` names the failures,
    including ``NoBeginAtomic`` when no conversion event governs an access."""

    grounded: bool
    issues: list[tuple[EventId, str]]

    def to_dict(self) -> dict:
        return {
            "grounded": self.grounded,
            "issues": [[e.encode(), what] for e, what in self.issues],
        }


def _atomic_accesses(g: ExecutionGraph) -> list[EventId]:
    return [
        e
        for e in g.sorted_events()
        if g.lab[e].pseudo is None
        and not g.lab[e].op.kind.is_fence
        and g.lab[e].op.kind.mode != "na"
    ]


def _spec_of(
    g: ExecutionGraph, begin: EventId, spec_table: dict[str, AtomicSpec]
) -> Optional[AtomicSpec]:
    return spec_table.get(g.lab[begin].spec_name or "")


def _enabled_under(lab: Label, spec: AtomicSpec) -> bool:
    return spec.enabled(lab.op, lab.result)


def _grounded_wrt(
    g: ExecutionGraph,
    e: EventId,
    begin: EventId,
    spec_table: dict[str, AtomicSpec],
    hb: frozenset,
) -> Optional[str]:
    """Failure reason if ``e`` is not grounded with respect to ``begin``.

    The event and its atomic reads-from ancestors must be enabled under the
    installed specification; a nonatomic ancestor (the cell's initialising
    write) is accepted when it happens-before the conversion event, since the
    conversion itself vouches for the initial value.
    """
    spec = _spec_of(g, begin, spec_table)
    if spec is None:
        return f"unknown atomic specification {g.lab[begin].spec_name!r}"
    if not _enabled_under(g.lab[e], spec):
        return f"operation not enabled at result {g.lab[e].result}"
    for anc in sorted(_rf_ancestors(g, e)):
        lab = g.lab[anc]
        if lab.pseudo is not None or lab.op.kind.mode == "na":
            if (anc, begin) not in hb:
                return "nonatomic reads-from ancestor not before conversion"
        elif not _enabled_under(lab, spec):
            return f"reads-from ancestor {anc.encode()} not enabled"
    return None


def check_grounded(
    g: ExecutionGraph, spec_table: dict[str, AtomicSpec]
) -> GroundedReport:
    """Every atomic access must have exactly one hb-maximal hb-preceding
    conversion event on its location, and be grounded with respect to it."""
    hb = derive_hb(g)
    issues: list[tuple[EventId, str]] = []
    for e in _atomic_accesses(g):
        loc = g.lab[e].location
        begins = [
            b
            for b in g.sorted_events()
            if g.lab[b].pseudo == "begin_atomic"
            and g.lab[b].location == loc
            and (b, e) in hb
        ]
        maximal = [b for b in begins if not any((b, b2) in hb for b2 in begins)]
        if not begins:
            issues.append((e, "NoBeginAtomic"))
        elif len(maximal) != 1:
            issues.append((e, "no unique hb-maximal conversion event"))
        else:
            why = _grounded_wrt(g, e, maximal[0], spec_table, hb)
            if why is not None:
                issues.append((e, why))
    return GroundedReport(grounded=not issues, issues=issues)


def check_weakly_grounded(
    g: ExecutionGraph,
    order: GroundingOrder,
    spec_table: dict[str, AtomicSpec],
) -> bool:
    """Weak grounding against a given total order consistent with hb.

    An atomic access qualifies either through the most recent preceding
    conversion event in the order, or through the two-part fallback: every
    release reads-from ancestor of every order-predecessor precedes it, and
    it is a write, or its reads-from source precedes it and is itself weakly
    grounded or nonatomic.  The "transitive-reflexive order-predecessor"
    clause is read as: every event at or before it in the order.
    """
    if not order.consistent_with_hb(g):
        return False
    hb = derive_hb(g)
    pos = order.position()
    weakly: dict[EventId, bool] = {}
    for e in order.order:
        lab = g.lab[e]
        if lab.pseudo is not None or lab.op.kind.is_fence or lab.op.kind.mode == "na":
            continue
        loc = lab.location
        begins = [
            b
            for b in order.order
            if g.lab[b].pseudo == "begin_atomic"
            and g.lab[b].location == loc
            and pos[b] < pos[e]
        ]
        ok = False
        if begins:
            most_recent = max(begins, key=lambda b: pos[b])
            ok = _grounded_wrt(g, e, most_recent, spec_table, hb) is None
        if not ok:
            releases_before = all(
                pos[anc] < pos[e]
                for other in order.order
                if pos[other] <= pos[e]
                for anc in _rf_ancestors(g, other)
                if is_release_event(g.lab[anc])
            )
            src = g.rf_source(e)
            value_ok = lab.op.kind.is_write or (
                src is not None
                and pos[src] < pos[e]
                and (
                    weakly.get(src, False)
                    or g.lab[src].pseudo is not None
                    or g.lab[src].op.kind.mode == "na"
                )
            )
            ok = releases_before and value_ok
        weakly[e] = ok
        if not ok:
            return False
    return True
