"""Execution graphs: events, labels, well-formedness, RMW level conversion.

An execution graph is a set of labeled events together with the four base
relations ``po`` (program order), ``rf`` (reads-from), ``mo`` (modification
order) and ``rmw`` (the read/write pairing of low-level RMWs).  Graphs are
immutable; every operation returns a new graph.

Thread ids are strings.  A thread spawned by ``fork`` gets the id
``"<parent>/<ordinal>"``; program order is allowed to cross from a thread to
its fork descendants (the control flow of the parent orders its pre-fork
events before everything the child does).  The initialization thread is a
synthetic thread (``"init"`` by default) holding one nonatomic write of 0 per
used location.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Mapping, NamedTuple, Optional

INT64_MIN = -(1 << 63)
INT64_MAX = (1 << 63) - 1


def _wrap64(v: int) -> int:
    return ((v - INT64_MIN) & ((1 << 64) - 1)) + INT64_MIN


class GraphError(Exception):
    """Base class for execution graph errors."""


class NotHighLevel(GraphError):
    pass


class NotLowLevel(GraphError):
    pass


class InconsistentUpdateFn(GraphError):
    pass


class UnknownEvent(GraphError):
    pass


class ParseError(GraphError):
    pass


class OpKind(Enum):
    READ_NA = "read_na"
    READ_RLX = "read_rlx"
    READ_ACQ = "read_acq"
    FENCE_ACQ = "fence_acq"
    FENCE_REL = "fence_rel"
    WRITE_NA = "write_na"
    WRITE_RLX = "write_rlx"
    WRITE_REL = "write_rel"
    RMW_RLX = "rmw_rlx"
    RMW_REL = "rmw_rel"
    RMW_ACQ = "rmw_acq"
    RMW_ACQREL = "rmw_acqrel"

    @property
    def is_read(self) -> bool:
        return self in (OpKind.READ_NA, OpKind.READ_RLX, OpKind.READ_ACQ)

    @property
    def is_write(self) -> bool:
        return self in (OpKind.WRITE_NA, OpKind.WRITE_RLX, OpKind.WRITE_REL)

    @property
    def is_rmw(self) -> bool:
        return self in (OpKind.RMW_RLX, OpKind.RMW_REL, OpKind.RMW_ACQ, OpKind.RMW_ACQREL)

    @property
    def is_fence(self) -> bool:
        return self in (OpKind.FENCE_ACQ, OpKind.FENCE_REL)

    @property
    def reads(self) -> bool:
        """True for events that take a value from an rf predecessor."""
        return self.is_read or self.is_rmw

    @property
    def writes(self) -> bool:
        """True for events that can serve as an rf source / enter mo."""
        return self.is_write or self.is_rmw

    @property
    def mode(self) -> str:
        return _MODE[self]


_MODE = {
    OpKind.READ_NA: "na",
    OpKind.READ_RLX: "rlx",
    OpKind.READ_ACQ: "acq",
    OpKind.FENCE_ACQ: "acq",
    OpKind.FENCE_REL: "rel",
    OpKind.WRITE_NA: "na",
    OpKind.WRITE_RLX: "rlx",
    OpKind.WRITE_REL: "rel",
    OpKind.RMW_RLX: "rlx",
    OpKind.RMW_REL: "rel",
    OpKind.RMW_ACQ: "acq",
    OpKind.RMW_ACQREL: "acqrel",
}

# Mode lattice: na < rlx < acq < acqrel and rlx < rel < acqrel.
_MODE_GEQ = {
    "na": {"na"},
    "rlx": {"na", "rlx"},
    "acq": {"na", "rlx", "acq"},
    "rel": {"na", "rlx", "rel"},
    "acqrel": {"na", "rlx", "acq", "rel", "acqrel"},
}


def mode_geq(mode: str, floor: str) -> bool:
    """True if ``mode`` is at least as strong as ``floor`` in the access-mode lattice."""
    return floor in _MODE_GEQ[mode] or mode == floor


@dataclass(frozen=True)
class UpdateFn:
    """A closed representation of an RMW's update function.

    ``add`` with argument k maps v to v + k (64-bit wrapping), ``set`` maps
    every v to its argument, ``table`` is an explicit finite map with a
    default.  The closed enumeration keeps update functions serializable and
    comparable.
    """

    form: str  # "add" | "set" | "table"
    arg: int = 0
    table: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        if self.form not in ("add", "set", "table"):
            raise ValueError(f"unknown update form {self.form!r}")

    def apply(self, v: int) -> int:
        if self.form == "add":
            return _wrap64(v + self.arg)
        if self.form == "set":
            return self.arg
        for k, out in self.table:
            if k == v:
                return out
        return self.arg  # table default

    def encode(self) -> str:
        if self.form == "add":
            return f"add:{self.arg}"
        if self.form == "set":
            return f"set:{self.arg}"
        cells = ",".join(f"{k}>{v}" for k, v in self.table)
        return f"table:{self.arg}" + (";" + cells if cells else "")

    @staticmethod
    def decode(text: str) -> "UpdateFn":
        form, _, rest = text.partition(":")
        if form in ("add", "set"):
            return UpdateFn(form, int(rest))
        if form == "table":
            default, _, cells = rest.partition(";")
            table = tuple(
                (int(k), int(v))
                for k, v in (cell.split(">") for cell in cells.split(",") if cell)
            )
            return UpdateFn("table", int(default), table)
        raise ParseError(f"bad update function {text!r}")


def add(k: int) -> UpdateFn:
    return UpdateFn("add", k)


def setv(v: int) -> UpdateFn:
    return UpdateFn("set", v)


@dataclass(frozen=True)
class Operation:
    kind: OpKind
    value: Optional[int] = None  # writes only
    update: Optional[UpdateFn] = None  # RMWs only

    def __post_init__(self):
        if self.kind.is_write and self.value is None:
            raise ValueError(f"{self.kind} requires a value")
        if not self.kind.is_write and self.value is not None:
            raise ValueError(f"{self.kind} must not carry a value")
        if self.kind.is_rmw and self.update is None:
            raise ValueError(f"{self.kind} requires an update function")
        if not self.kind.is_rmw and self.update is not None:
            raise ValueError(f"{self.kind} must not carry an update function")

    @property
    def mode(self) -> str:
        return self.kind.mode


class EventId(NamedTuple):
    thread: str
    index: int

    def encode(self) -> str:
        return f"{self.thread}.{self.index}"

    @staticmethod
    def decode(text: str) -> "EventId":
        thread, _, idx = text.rpartition(".")
        if not thread:
            raise ParseError(f"bad event reference {text!r}")
        return EventId(thread, int(idx))


@dataclass(frozen=True)
class Label:
    """Event label: thread, location, result value, and operation.

    ``pseudo`` marks the bookkeeping events emitted for allocation,
    deallocation and atomic mode changes; they take part in program order and
    in the data-race check (as nonatomic writes) but not in rf or mo.
    ``spec_name`` names the atomic specification installed by a
    ``begin_atomic`` pseudo event.
    """

    thread: str
    location: int
    result: int
    op: Operation
    pseudo: Optional[str] = None  # None | "alloc" | "free" | "begin_atomic" | "end_atomic"
    spec_name: Optional[str] = None

    def __post_init__(self):
        if self.op.kind.is_write and self.result != 0:
            raise ValueError("result value of a write is always 0")

    @property
    def written_value(self) -> Optional[int]:
        """The value this event writes, or None if it does not write."""
        if self.pseudo not in (None, "alloc"):
            return None
        if self.op.kind.is_write:
            return self.op.value
        if self.op.kind.is_rmw:
            return self.op.update.apply(self.result)
        return None

    @property
    def is_write_like(self) -> bool:
        return self.pseudo in (None, "alloc") and self.op.kind.writes

    @property
    def is_read_like(self) -> bool:
        return self.pseudo is None and self.op.kind.reads


Relation = frozenset  # of (EventId, EventId) pairs


@dataclass(frozen=True)
class WellFormednessReport:
    ok: bool
    violations: tuple[tuple[str, tuple], ...]


def _thread_is_ancestor(parent: str, child: str) -> bool:
    return child.startswith(parent + "/")


@dataclass(frozen=True)
class ExecutionGraph:
    events: frozenset[EventId]
    lab: Mapping[EventId, Label]
    po: Relation = frozenset()
    rf: Relation = frozenset()
    mo: Relation = frozenset()
    rmw: Relation = frozenset()
    init_thread: str = "init"

    # -- basic views ------------------------------------------------------

    def sorted_events(self) -> list[EventId]:
        return sorted(self.events)

    def events_on(self, location: int) -> list[EventId]:
        return [e for e in self.sorted_events() if self.lab[e].location == location]

    def locations(self) -> list[int]:
        return sorted({self.lab[e].location for e in self.events})

    def thread_events(self, thread: str) -> list[EventId]:
        return sorted(e for e in self.events if e.thread == thread)

    def threads(self) -> list[str]:
        return sorted({e.thread for e in self.events})

    def is_high_level(self) -> bool:
        return not self.rmw

    def is_low_level(self) -> bool:
        return all(not self.lab[e].op.kind.is_rmw for e in self.events)

    def rf_source(self, e: EventId) -> Optional[EventId]:
        for w, r in self.rf:
            if r == e:
                return w
        return None

    def porf(self) -> Relation:
        return frozenset(self.po | self.rf)

    # -- structural operations --------------------------------------------

    def restrict(self, keep: Iterable[EventId]) -> "ExecutionGraph":
        """Induced subgraph on ``keep``; all four relations restricted."""
        keep = frozenset(keep)
        unknown = keep - self.events
        if unknown:
            raise UnknownEvent(f"not in graph: {sorted(unknown)}")

        def cut(rel: Relation) -> Relation:
            return frozenset((a, b) for a, b in rel if a in keep and b in keep)

        return ExecutionGraph(
            events=keep,
            lab={e: self.lab[e] for e in keep},
            po=cut(self.po),
            rf=cut(self.rf),
            mo=cut(self.mo),
            rmw=cut(self.rmw),
            init_thread=self.init_thread,
        )

    def with_event(
        self,
        e: EventId,
        label: Label,
        po: Iterable[tuple[EventId, EventId]] = (),
        rf: Iterable[tuple[EventId, EventId]] = (),
        mo: Iterable[tuple[EventId, EventId]] = (),
        rmw: Iterable[tuple[EventId, EventId]] = (),
    ) -> "ExecutionGraph":
        lab = dict(self.lab)
        lab[e] = label
        return ExecutionGraph(
            events=self.events | {e},
            lab=lab,
            po=self.po | frozenset(po),
            rf=self.rf | frozenset(rf),
            mo=self.mo | frozenset(mo),
            rmw=self.rmw | frozenset(rmw),
            init_thread=self.init_thread,
        )

    # -- canonical forms ----------------------------------------------------

    def canonical_key(self) -> str:
        return self.to_text()

    def canonicalize(self) -> "ExecutionGraph":
        """Renumber each thread's event indices densely in po order."""
        mapping: dict[EventId, EventId] = {}
        for t in self.threads():
            evs = self.thread_events(t)
            evs.sort(key=lambda e: (sum(1 for x in evs if (x, e) in self.po), e.index))
            for i, e in enumerate(evs):
                mapping[e] = EventId(t, i)
        return self.relabel(mapping)

    def relabel(self, mapping: Mapping[EventId, EventId]) -> "ExecutionGraph":
        def m(rel: Relation) -> Relation:
            return frozenset((mapping[a], mapping[b]) for a, b in rel)

        return ExecutionGraph(
            events=frozenset(mapping[e] for e in self.events),
            lab={mapping[e]: self.lab[e] for e in self.events},
            po=m(self.po),
            rf=m(self.rf),
            mo=m(self.mo),
            rmw=m(self.rmw),
            init_thread=self.init_thread,
        )

    # -- serialization ------------------------------------------------------

    def to_text(self) -> str:
        lines = []
        for e in self.sorted_events():
            lab = self.lab[e]
            val = lab.op.value if lab.op.kind.is_write else lab.result
            line = f"event {e.thread} {e.index} {lab.op.kind.value} loc={lab.location} val={val}"
            if lab.op.update is not None:
                line += f" upd={lab.op.update.encode()}"
            if lab.pseudo is not None:
                line += f" pseudo={lab.pseudo}"
            if lab.spec_name is not None:
                line += f" spec={lab.spec_name}"
            lines.append(line)
        for name, rel in (("po", self.po), ("rf", self.rf), ("mo", self.mo), ("rmw", self.rmw)):
            for a, b in sorted(rel):
                lines.append(f"{name} {a.encode()} {b.encode()}")
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_text(text: str, init_thread: str = "init") -> "ExecutionGraph":
        events: set[EventId] = set()
        lab: dict[EventId, Label] = {}
        rels: dict[str, set] = {"po": set(), "rf": set(), "mo": set(), "rmw": set()}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if parts[0] == "event":
                if len(parts) < 6:
                    raise ParseError(f"line {lineno}: short event line")
                thread, index, kind_name = parts[1], int(parts[2]), parts[3]
                try:
                    kind = OpKind(kind_name)
                except ValueError:
                    raise ParseError(f"line {lineno}: unknown op kind {kind_name!r}") from None
                fields = dict(p.split("=", 1) for p in parts[4:])
                loc, val = int(fields["loc"]), int(fields["val"])
                update = UpdateFn.decode(fields["upd"]) if "upd" in fields else None
                op = Operation(
                    kind,
                    value=val if kind.is_write else None,
                    update=update,
                )
                e = EventId(thread, index)
                events.add(e)
                lab[e] = Label(
                    thread=thread,
                    location=loc,
                    result=0 if kind.is_write else val,
                    op=op,
                    pseudo=fields.get("pseudo"),
                    spec_name=fields.get("spec"),
                )
            elif parts[0] in rels:
                if len(parts) != 3:
                    raise ParseError(f"line {lineno}: bad edge line")
                rels[parts[0]].add((EventId.decode(parts[1]), EventId.decode(parts[2])))
            else:
                raise ParseError(f"line {lineno}: unknown directive {parts[0]!r}")
        unknown = {e for pairs in rels.values() for pair in pairs for e in pair} - events
        if unknown:
            raise ParseError(f"edges mention undeclared events: {sorted(unknown)}")
        return ExecutionGraph(
            events=frozenset(events),
            lab=lab,
            po=frozenset(rels["po"]),
            rf=frozenset(rels["rf"]),
            mo=frozenset(rels["mo"]),
            rmw=frozenset(rels["rmw"]),
            init_thread=init_thread,
        )

    def to_json(self) -> str:
        doc = {
            "init_thread": self.init_thread,
            "events": [
                {
                    "thread": e.thread,
                    "index": e.index,
                    "kind": self.lab[e].op.kind.value,
                    "loc": self.lab[e].location,
                    "val": self.lab[e].op.value
                    if self.lab[e].op.kind.is_write
                    else self.lab[e].result,
                    **(
                        {"upd": self.lab[e].op.update.encode()}
                        if self.lab[e].op.update is not None
                        else {}
                    ),
                    **({"pseudo": self.lab[e].pseudo} if self.lab[e].pseudo else {}),
                    **({"spec": self.lab[e].spec_name} if self.lab[e].spec_name else {}),
                }
                for e in self.sorted_events()
            ],
            **{
                name: [[a.encode(), b.encode()] for a, b in sorted(rel)]
                for name, rel in (
                    ("po", self.po),
                    ("rf", self.rf),
                    ("mo", self.mo),
                    ("rmw", self.rmw),
                )
            },
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "ExecutionGraph":
        doc = json.loads(text)
        lines = []
        for ev in doc["events"]:
            line = (
                f"event {ev['thread']} {ev['index']} {ev['kind']} "
                f"loc={ev['loc']} val={ev['val']}"
            )
            if "upd" in ev:
                line += f" upd={ev['upd']}"
            if "pseudo" in ev:
                line += f" pseudo={ev['pseudo']}"
            if "spec" in ev:
                line += f" spec={ev['spec']}"
            lines.append(line)
        for name in ("po", "rf", "mo", "rmw"):
            for a, b in doc.get(name, []):
                lines.append(f"{name} {a} {b}")
        return ExecutionGraph.from_text(
            "\n".join(lines), init_thread=doc.get("init_thread", "init")
        )


# -- well-formedness --------------------------------------------------------


def check_well_formed(g: ExecutionGraph) -> WellFormednessReport:
    """Report every violation of the execution graph shape rules.

    Rule ids: ``po-shape``, ``po-init``, ``po-order``, ``rf-kinds``,
    ``rf-match``, ``rf-functional``, ``rf-thread``, ``mo-shape``,
    ``mo-order``, ``rmw-shape``, ``init``.
    """
    v: list[tuple[str, tuple]] = []
    init = g.init_thread

    # po shape: init-to-same-location, same thread, or fork lineage.
    for a, b in g.po:
        if a == b:
            v.append(("po-order", (a, b)))
            continue
        if a.thread == init:
            continue  # init writes may precede anything (transitivity adds edges)
        elif b.thread == init:
            v.append(("po-shape", (a, b)))
        elif a.thread != b.thread and not _thread_is_ancestor(a.thread, b.thread):
            v.append(("po-shape", (a, b)))

    # po totality and strict order per non-init thread.
    for t in g.threads():
        if t == init:
            continue
        evs = g.thread_events(t)
        for i, a in enumerate(evs):
            for b in evs[i + 1 :]:
                fwd, bwd = (a, b) in g.po, (b, a) in g.po
                if fwd and bwd:
                    v.append(("po-order", (a, b)))
                elif not fwd and not bwd:
                    v.append(("po-order", (a, b)))
        in_thread = {(a, b) for a, b in g.po if a.thread == t and b.thread == t}
        for a, b in in_thread:
            for c in evs:
                if (b, c) in in_thread and (a, c) not in in_thread:
                    v.append(("po-order", (a, c)))

    # init events po-precede every other same-location event.
    init_writes: dict[int, list[EventId]] = {}
    for e in g.thread_events(init):
        init_writes.setdefault(g.lab[e].location, []).append(e)
    for loc, ies in init_writes.items():
        for ie in ies:
            for e in g.events_on(loc):
                if e.thread != init and (ie, e) not in g.po:
                    v.append(("po-init", (ie, e)))

    # rf: kinds, location/value match, functional, same-thread implies po.
    seen_readers: dict[EventId, EventId] = {}
    for w, r in g.rf:
        lw, lr = g.lab[w], g.lab[r]
        if not lw.is_write_like or not lr.is_read_like:
            v.append(("rf-kinds", (w, r)))
            continue
        if lw.location != lr.location or lw.written_value != lr.result:
            v.append(("rf-match", (w, r)))
        if r in seen_readers:
            v.append(("rf-functional", (seen_readers[r], r)))
        seen_readers[r] = w
        if w.thread == r.thread and (w, r) not in g.po:
            v.append(("rf-thread", (w, r)))

    # mo: write-like, same location, strict total order per location.
    for a, b in g.mo:
        la, lb = g.lab[a], g.lab[b]
        if not la.is_write_like or not lb.is_write_like or la.location != lb.location or a == b:
            v.append(("mo-shape", (a, b)))
    for loc in g.locations():
        ws = [e for e in g.events_on(loc) if g.lab[e].is_write_like]
        for i, a in enumerate(ws):
            for b in ws[i + 1 :]:
                fwd, bwd = (a, b) in g.mo, (b, a) in g.mo
                if fwd == bwd:
                    v.append(("mo-order", (a, b)))
        on_loc = {(a, b) for a, b in g.mo if g.lab[a].location == loc}
        for a, b in on_loc:
            for c in ws:
                if (b, c) in on_loc and (a, c) not in on_loc:
                    v.append(("mo-order", (a, c)))

    # rmw: read -> write, immediate po successor.
    for r, w in g.rmw:
        lr, lw = g.lab[r], g.lab[w]
        if not lr.op.kind.is_read or not lw.op.kind.is_write:
            v.append(("rmw-shape", (r, w)))
            continue
        if (r, w) not in g.po or any(
            (r, c) in g.po and (c, w) in g.po for c in g.events
        ):
            v.append(("rmw-shape", (r, w)))

    # exactly one nonatomic init write of 0 per used location.
    used = {g.lab[e].location for e in g.events if e.thread != init}
    for loc in sorted(used):
        ies = [
            e
            for e in init_writes.get(loc, [])
            if g.lab[e].op.kind == OpKind.WRITE_NA and g.lab[e].op.value == 0
        ]
        if len(ies) != 1:
            v.append(("init", (loc,)))
    for e in g.thread_events(init):
        lab = g.lab[e]
        if lab.op.kind != OpKind.WRITE_NA or lab.op.value != 0 or lab.pseudo is not None:
            v.append(("init", (e,)))

    violations = tuple(sorted(set(v), key=repr))
    return WellFormednessReport(ok=not violations, violations=violations)


def is_rf_complete(g: ExecutionGraph) -> bool:
    """True iff every read and RMW has an rf predecessor."""
    readers = {r for _, r in g.rf}
    return all(
        e in readers for e in g.events if g.lab[e].is_read_like
    )


# -- high-level / low-level conversion ---------------------------------------

# Access-mode split of a high-level RMW into its read and write halves.
_RMW_SPLIT = {
    OpKind.RMW_RLX: (OpKind.READ_RLX, OpKind.WRITE_RLX),
    OpKind.RMW_REL: (OpKind.READ_RLX, OpKind.WRITE_REL),
    OpKind.RMW_ACQ: (OpKind.READ_ACQ, OpKind.WRITE_RLX),
    OpKind.RMW_ACQREL: (OpKind.READ_ACQ, OpKind.WRITE_REL),
}
_RMW_JOIN = {v: k for k, v in _RMW_SPLIT.items()}


def _po_order_key(g: ExecutionGraph, thread: str) -> list[EventId]:
    evs = g.thread_events(thread)
    evs.sort(key=lambda e: (sum(1 for x in evs if (x, e) in g.po), e.index))
    return evs


def to_low_level(g: ExecutionGraph) -> ExecutionGraph:
    """Split each RMW event into an rmw-linked read/write pair."""
    if not g.is_high_level():
        raise NotHighLevel("graph already has rmw edges")

    mapping: dict[EventId, tuple[EventId, ...]] = {}
    lab: dict[EventId, Label] = {}
    rmw_pairs: set[tuple[EventId, EventId]] = set()
    for t in g.threads():
        idx = 0
        for e in _po_order_key(g, t):
            old = g.lab[e]
            if old.op.kind.is_rmw:
                rk, wk = _RMW_SPLIT[old.op.kind]
                r, w = EventId(t, idx), EventId(t, idx + 1)
                idx += 2
                lab[r] = Label(t, old.location, old.result, Operation(rk))
                lab[w] = Label(
                    t, old.location, 0, Operation(wk, value=old.op.update.apply(old.result))
                )
                mapping[e] = (r, w)
                rmw_pairs.add((r, w))
            else:
                ne = EventId(t, idx)
                idx += 1
                lab[ne] = replace(old, thread=t)
                mapping[e] = (ne,)

    def read_part(e: EventId) -> EventId:
        return mapping[e][0]

    def write_part(e: EventId) -> EventId:
        return mapping[e][-1]

    po = set()
    for a, b in g.po:
        for x in mapping[a]:
            for y in mapping[b]:
                po.add((x, y))
    po |= rmw_pairs
    rf = {(write_part(w), read_part(r)) for w, r in g.rf}
    mo = {(write_part(a), write_part(b)) for a, b in g.mo}
    return ExecutionGraph(
        events=frozenset(lab),
        lab=lab,
        po=frozenset(po),
        rf=frozenset(rf),
        mo=frozenset(mo),
        rmw=frozenset(rmw_pairs),
        init_thread=g.init_thread,
    )


def to_high_level(
    g: ExecutionGraph, fns: Mapping[EventId, UpdateFn]
) -> ExecutionGraph:
    """Collapse each rmw pair back into a single RMW event.

    ``fns`` maps each rmw-related read to the update function of the collapsed
    event; it must agree with the written value.
    """
    if not g.is_low_level():
        raise NotLowLevel("graph has RMW-operation labels")
    pair_of_read = dict(g.rmw)
    write_halves = set(pair_of_read.values())

    mapping: dict[EventId, EventId] = {}
    lab: dict[EventId, Label] = {}
    for t in g.threads():
        idx = 0
        for e in _po_order_key(g, t):
            if e in write_halves:
                continue
            old = g.lab[e]
            ne = EventId(t, idx)
            idx += 1
            if e in pair_of_read:
                w = pair_of_read[e]
                fn = fns.get(e)
                if fn is None:
                    raise InconsistentUpdateFn(f"no update function for {e}")
                written = g.lab[w].op.value
                if fn.apply(old.result) != written:
                    raise InconsistentUpdateFn(
                        f"{e}: f({old.result}) = {fn.apply(old.result)} != {written}"
                    )
                kind = _RMW_JOIN[(old.op.kind, g.lab[w].op.kind)]
                lab[ne] = Label(t, old.location, old.result, Operation(kind, update=fn))
                mapping[e] = ne
                mapping[w] = ne
            else:
                lab[ne] = old
                mapping[e] = ne

    def remap(rel: Relation) -> frozenset:
        return frozenset(
            (mapping[a], mapping[b]) for a, b in rel if mapping[a] != mapping[b]
        )

    return ExecutionGraph(
        events=frozenset(lab),
        lab=lab,
        po=remap(g.po),
        rf=remap(g.rf),
        mo=remap(g.mo),
        rmw=frozenset(),
        init_thread=g.init_thread,
    )


def natural_update_fns(g: ExecutionGraph) -> dict[EventId, UpdateFn]:
    """Update functions recovering each rmw pair as a table-form RMW."""
    fns = {}
    for r, w in g.rmw:
        res, written = g.lab[r].result, g.lab[w].op.value
        if written == res + (written - res):
            fns[r] = add(written - res)
    return fns


# -- construction helper ------------------------------------------------------


@dataclass
class GraphBuilder:
    """Incremental builder filling in program order and init writes.

    Threads are added as ordered event lists; po is generated transitively
    within each thread, from every init write to every non-init event, and
    from a fork point to all events of the forked thread.
    """

    init_thread: str = "init"
    _labels: dict[EventId, Label] = field(default_factory=dict)
    _thread_order: dict[str, list[EventId]] = field(default_factory=dict)
    _fork_edges: list[tuple[EventId, str]] = field(default_factory=list)
    rf: set[tuple[EventId, EventId]] = field(default_factory=set)
    mo: set[tuple[EventId, EventId]] = field(default_factory=set)
    rmw: set[tuple[EventId, EventId]] = field(default_factory=set)

    def add_event(self, thread: str, label: Label) -> EventId:
        order = self._thread_order.setdefault(thread, [])
        e = EventId(thread, len(order))
        order.append(e)
        self._labels[e] = replace(label, thread=thread)
        return e

    def add_init_write(self, location: int) -> EventId:
        return self.add_event(
            self.init_thread,
            Label(self.init_thread, location, 0, Operation(OpKind.WRITE_NA, value=0)),
        )

    def fork(self, parent_last: Optional[EventId], child: str) -> None:
        """Order everything up to ``parent_last`` before all of ``child``."""
        if parent_last is not None:
            self._fork_edges.append((parent_last, child))
        self._thread_order.setdefault(child, [])

    def mo_chain(self, *events: EventId) -> None:
        for i, a in enumerate(events):
            for b in events[i + 1 :]:
                self.mo.add((a, b))

    def build(self) -> ExecutionGraph:
        po: set[tuple[EventId, EventId]] = set()
        for t, order in self._thread_order.items():
            if t == self.init_thread:
                continue
            for i, a in enumerate(order):
                for b in order[i + 1 :]:
                    po.add((a, b))
        # init writes precede each other and every non-init event.
        inits = self._thread_order.get(self.init_thread, [])
        for i, ie in enumerate(inits):
            for ie2 in inits[i + 1 :]:
                po.add((ie, ie2))
            for e in self._labels:
                if e.thread != self.init_thread:
                    po.add((ie, e))
        # fork ordering: parent prefix before all descendant events.
        for parent_last, child in self._fork_edges:
            before = set()
            for e in self._thread_order[parent_last.thread]:
                before.add(e)
                if e == parent_last:
                    break
            for a, b in list(po):
                if b == parent_last:
                    before.add(a)
            for e in self._labels:
                if e.thread == child or _thread_is_ancestor(child, e.thread):
                    for a in before:
                        po.add((a, e))
        # transitive closure over the fork edges.
        changed = True
        while changed:
            changed = False
            succs: dict[EventId, set[EventId]] = {}
            for a, b in po:
                succs.setdefault(a, set()).add(b)
            for a, b in list(po):
                for c in succs.get(b, ()):
                    if (a, c) not in po and a != c:
                        po.add((a, c))
                        changed = True
        return ExecutionGraph(
            events=frozenset(self._labels),
            lab=dict(self._labels),
            po=frozenset(po),
            rf=frozenset(self.rf),
            mo=frozenset(self.mo),
            rmw=frozenset(self.rmw),
            init_thread=self.init_thread,
        )
