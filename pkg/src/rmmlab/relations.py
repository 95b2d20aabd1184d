"""Derived relations over execution graphs and the consistency checks built on them.

All functions are pure; closures use worklist propagation over per-event
bitsets keyed by a dense index of the graph's events, which comfortably fits
desk-scale graphs in one machine word per row.
"""

from __future__ import annotations

from dataclasses import dataclass

from .exec_graph import EventId, ExecutionGraph, Label, OpKind, mode_geq

Pair = tuple[EventId, EventId]


def _closure(events: list[EventId], pairs: set[Pair]) -> frozenset[Pair]:
    """Transitive closure via bitset worklist propagation."""
    index = {e: i for i, e in enumerate(events)}
    succ = [0] * len(events)
    for a, b in pairs:
        succ[index[a]] |= 1 << index[b]
    changed = True
    while changed:
        changed = False
        for i in range(len(events)):
            row = succ[i]
            acc = row
            rest = row
            while rest:
                j = (rest & -rest).bit_length() - 1
                rest &= rest - 1
                acc |= succ[j]
            if acc != row:
                succ[i] = acc
                changed = True
    out = set()
    for i, a in enumerate(events):
        row = succ[i]
        while row:
            j = (row & -row).bit_length() - 1
            row &= row - 1
            out.add((a, events[j]))
    return frozenset(out)


def _rf_reach_through_rmws(g: ExecutionGraph, w: EventId) -> set[EventId]:
    """Events readable "from" w: w itself plus the RMWs of any release sequence
    (a chain of RMWs each reading from the previous) starting at an RMW that
    reads from w.  On low-level graphs the write half of an rmw pair counts as
    the RMW for chaining purposes."""
    pair_of_read = dict(g.rmw)

    def is_rmw_reader(e: EventId) -> bool:
        return g.lab[e].op.kind.is_rmw or e in pair_of_read

    reach = {w}
    frontier = [w]
    while frontier:
        u = frontier.pop()
        for src, r in g.rf:
            if src == u and is_rmw_reader(r):
                nxt = pair_of_read.get(r, r)
                if nxt not in reach:
                    reach.add(nxt)
                    frontier.append(nxt)
    return reach


def derive_sw(g: ExecutionGraph) -> frozenset[Pair]:
    """The synchronizes-with relation.

    The release side is a release-or-stronger write/RMW w, or a release fence
    po-followed by a relaxed-or-stronger write/RMW w.  The acquire side is an
    acquire-or-stronger read/RMW r, or an acquire fence po-preceded by a
    relaxed-or-stronger read/RMW r.  They are related if r reads from w
    directly or through a release sequence of RMWs.  When fences mediate, the
    fence events themselves are the endpoints of the edge.
    """
    release_side: list[tuple[EventId, EventId]] = []  # (anchor, mediating write)
    acquire_side: list[tuple[EventId, EventId]] = []  # (anchor, mediating read)
    for e in g.sorted_events():
        lab = g.lab[e]
        if lab.pseudo is not None:
            continue
        kind = lab.op.kind
        if (kind.is_write or kind.is_rmw) and mode_geq(kind.mode, "rel"):
            release_side.append((e, e))
        if (kind.is_read or kind.is_rmw) and mode_geq(kind.mode, "acq"):
            acquire_side.append((e, e))
        if kind == OpKind.FENCE_REL:
            for a, b in g.po:
                if a == e and g.lab[b].pseudo is None:
                    bk = g.lab[b].op.kind
                    if (bk.is_write or bk.is_rmw) and mode_geq(bk.mode, "rlx"):
                        release_side.append((e, b))
        if kind == OpKind.FENCE_ACQ:
            for a, b in g.po:
                if b == e and g.lab[a].pseudo is None:
                    ak = g.lab[a].op.kind
                    if (ak.is_read or ak.is_rmw) and mode_geq(ak.mode, "rlx"):
                        acquire_side.append((e, a))

    sw = set()
    for rel_anchor, w in release_side:
        reach = _rf_reach_through_rmws(g, w)
        for acq_anchor, r in acquire_side:
            src = g.rf_source(r)
            if src is not None and src in reach:
                sw.add((rel_anchor, acq_anchor))
    return frozenset(sw)


def derive_hb(g: ExecutionGraph, sw: frozenset[Pair] | None = None) -> frozenset[Pair]:
    if sw is None:
        sw = derive_sw(g)
    return _closure(g.sorted_events(), set(g.po) | set(sw))


def derive_fr(g: ExecutionGraph) -> frozenset[Pair]:
    """Each reader related to every mo-successor of its rf source."""
    fr = set()
    for w, r in g.rf:
        for a, b in g.mo:
            if a == w and b != r:
                fr.add((r, b))
    return frozenset(fr)


def derive_eco(g: ExecutionGraph, fr: frozenset[Pair] | None = None) -> frozenset[Pair]:
    if fr is None:
        fr = derive_fr(g)
    return _closure(g.sorted_events(), set(g.rf) | set(g.mo) | set(fr))


def derive_rpo(g: ExecutionGraph) -> frozenset[Pair]:
    """Relaxed program order: the po edges preserved by re-execution."""

    def kept(a: Label, b: Label) -> bool:
        ka, kb = a.op.kind, b.op.kind
        if a.pseudo is None and (ka.is_read or ka.is_rmw) and mode_geq(ka.mode, "rlx"):
            if kb == OpKind.FENCE_ACQ:
                return True
        if mode_geq(ka.mode, "acq"):
            return True
        if mode_geq(kb.mode, "rel"):
            return True
        if ka == OpKind.FENCE_REL and b.pseudo is None:
            if (kb.is_write or kb.is_rmw) and mode_geq(kb.mode, "rlx"):
                return True
        return False

    base = {(a, b) for a, b in g.po if kept(g.lab[a], g.lab[b])}
    return _closure(g.sorted_events(), base)


@dataclass(frozen=True)
class DerivedRelations:
    sw: frozenset[Pair]
    hb: frozenset[Pair]
    fr: frozenset[Pair]
    eco: frozenset[Pair]
    rpo: frozenset[Pair]


def derive_all(g: ExecutionGraph) -> DerivedRelations:
    sw = derive_sw(g)
    fr = derive_fr(g)
    return DerivedRelations(
        sw=sw,
        hb=derive_hb(g, sw),
        fr=fr,
        eco=derive_eco(g, fr),
        rpo=derive_rpo(g),
    )


@dataclass(frozen=True)
class ConsistencyVerdict:
    consistent: bool
    reasons: tuple[tuple, ...]

    def to_dict(self) -> dict:
        return {
            "consistent": self.consistent,
            "reasons": [
                [r[0]] + [list(e) if isinstance(e, tuple) else e for e in r[1:]]
                for r in self.reasons
            ],
        }


def _rmw_parts(g: ExecutionGraph) -> list[tuple[EventId, EventId]]:
    """(read side, write side) per RMW; on high-level graphs both are the event."""
    parts = [(e, e) for e in g.events if g.lab[e].op.kind.is_rmw]
    parts.extend(g.rmw)
    return parts


def check_consistent(g: ExecutionGraph) -> ConsistencyVerdict:
    """rf-completeness, coherence (hb irreflexive and consistent with eco),
    and atomicity of RMWs."""
    from .exec_graph import is_rf_complete

    reasons: list[tuple] = []
    if not is_rf_complete(g):
        reasons.append(("NotRfComplete",))
    hb = derive_hb(g)
    fr = derive_fr(g)
    eco = derive_eco(g, fr)
    for a, b in sorted(hb):
        if a == b:
            reasons.append(("CoherenceViolation", (a, b)))
        elif (b, a) in eco:
            reasons.append(("CoherenceViolation", (a, b)))
    for rpart, wpart in sorted(_rmw_parts(g)):
        for e in g.sorted_events():
            if (rpart, e) in fr and (e, wpart) in g.mo:
                reasons.append(("AtomicityViolation", rpart))
                break
    return ConsistencyVerdict(consistent=not reasons, reasons=tuple(reasons))


@dataclass(frozen=True)
class RaceReport:
    races: tuple[tuple[EventId, EventId, int], ...]

    @property
    def race_free(self) -> bool:
        return not self.races

    def to_dict(self) -> dict:
        return {
            "races": [
                {"first": list(a), "second": list(b), "location": loc}
                for a, b, loc in self.races
            ]
        }


def find_data_races(
    g: ExecutionGraph, mode_events: frozenset[EventId] | None = None
) -> RaceReport:
    """hb-unordered same-location pairs with a write-like and a nonatomic member.

    ``mode_events`` marks allocation/free/mode-change pseudo events, which are
    treated as nonatomic writes; by default every pseudo-labeled event is
    included.
    """
    if mode_events is None:
        mode_events = frozenset(e for e in g.events if g.lab[e].pseudo is not None)
    hb = derive_hb(g)

    def writish(e: EventId) -> bool:
        return e in mode_events or g.lab[e].is_write_like

    def nonatomic(e: EventId) -> bool:
        return e in mode_events or (g.lab[e].pseudo is None and g.lab[e].op.kind.mode == "na")

    races = []
    evs = g.sorted_events()
    for i, a in enumerate(evs):
        for b in evs[i + 1 :]:
            if g.lab[a].location != g.lab[b].location:
                continue
            if (a, b) in hb or (b, a) in hb:
                continue
            if (writish(a) or writish(b)) and (nonatomic(a) or nonatomic(b)):
                races.append((a, b, g.lab[a].location))
    return RaceReport(races=tuple(races))


def has_porf_cycle(g: ExecutionGraph) -> bool:
    porf = _closure(g.sorted_events(), set(g.po) | set(g.rf))
    return any(a == b for a, b in porf)
