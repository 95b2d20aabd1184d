"""Tied resources: cancellative commutative monoids, atomic specifications,
the consistency and grounding-consistency judgments, and sufficiency checking.

The consistency of a total tied resource with an operation is decided by a
bounded search over single-location traces: a chain of RMWs reading from each
other (starting from the location's initial value) plus acquire fences, with
a chosen assignment of events to threads.  Happens-before within a trace is
generated by the per-thread program order and same-location synchronization,
which is the documented abstraction this tool relies on: the judgment only
ever inspects hb, rf and mo among the events on the judged location.

The bounded search is exact up to the event bound; a negative answer is
reported as NotFoundWithinBound and is evidence, not proof.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional, Sequence

from .exec_graph import Operation, OpKind, UpdateFn, add, mode_geq, setv


class TiedError(Exception):
    pass


class UnknownOperation(TiedError):
    pass


class UnsupportedSpec(TiedError):
    """The bounded witness search handles specs whose enabled operations are
    RMWs and acquire fences over the (N, +, 0) monoids."""


# -- monoids ------------------------------------------------------------------


class Monoid:
    """A cancellative commutative monoid with a partial subtraction."""

    name = "abstract"
    unit = None

    def compose(self, a, b):
        raise NotImplementedError

    def subtract(self, a, b):
        """Return c with a = c . b, or None if no such element exists."""
        raise NotImplementedError

    def is_element(self, a) -> bool:
        raise NotImplementedError


class NatMonoid(Monoid):
    """(N, +, 0); subtraction is partial below zero."""

    name = "nat"
    unit = 0

    def compose(self, a, b):
        return a + b

    def subtract(self, a, b):
        return a - b if a >= b else None

    def is_element(self, a) -> bool:
        return isinstance(a, int) and a >= 0


class ProductMonoid(Monoid):
    def __init__(self, *parts: Monoid):
        self.parts = parts
        self.name = "x".join(p.name for p in parts)
        self.unit = tuple(p.unit for p in parts)

    def compose(self, a, b):
        return tuple(p.compose(x, y) for p, x, y in zip(self.parts, a, b))

    def subtract(self, a, b):
        out = []
        for p, x, y in zip(self.parts, a, b):
            d = p.subtract(x, y)
            if d is None:
                return None
            out.append(d)
        return tuple(out)

    def is_element(self, a) -> bool:
        return (
            isinstance(a, tuple)
            and len(a) == len(self.parts)
            and all(p.is_element(x) for p, x in zip(self.parts, a))
        )


NAT = NatMonoid()

_MONOIDS = {"nat": NAT}


# -- thread-bound and total tied resources ------------------------------------


def tb_normalize(monoid: Monoid, bound: Mapping[str, object]) -> tuple:
    return tuple(sorted((t, v) for t, v in bound.items() if v != monoid.unit))


@dataclass(frozen=True)
class TotalTied:
    """A global tied resource paired with per-thread local tied resources.

    ``bound`` holds only the non-unit entries, sorted, so equality is
    structural.
    """

    glob: object
    bound: tuple = ()

    def local(self, monoid: Monoid, thread: str):
        for t, v in self.bound:
            if t == thread:
                return v
        return monoid.unit

    def bound_dict(self) -> dict:
        return dict(self.bound)


def total_unit(spec: "AtomicSpec") -> TotalTied:
    return TotalTied(spec.global_monoid.unit, ())


def total_initial(spec: "AtomicSpec") -> TotalTied:
    return TotalTied(spec.rho0, ())


def total_compose(spec: "AtomicSpec", a: TotalTied, b: TotalTied) -> TotalTied:
    bound = a.bound_dict()
    for t, v in b.bound:
        bound[t] = spec.local_monoid.compose(bound.get(t, spec.local_monoid.unit), v)
    return TotalTied(
        spec.global_monoid.compose(a.glob, b.glob),
        tb_normalize(spec.local_monoid, bound),
    )


def total_subtract(spec: "AtomicSpec", a: TotalTied, b: TotalTied) -> Optional[TotalTied]:
    g = spec.global_monoid.subtract(a.glob, b.glob)
    if g is None:
        return None
    bound = a.bound_dict()
    for t, v in b.bound:
        d = spec.local_monoid.subtract(bound.get(t, spec.local_monoid.unit), v)
        if d is None:
            return None
        bound[t] = d
    return TotalTied(g, tb_normalize(spec.local_monoid, bound))


def at_thread(spec: "AtomicSpec", thread: str, local) -> TotalTied:
    """The total tied resource (eps, [thread := local])."""
    return TotalTied(
        spec.global_monoid.unit, tb_normalize(spec.local_monoid, {thread: local})
    )


# -- atomic specifications -----------------------------------------------------

_GUARDS: dict[str, Callable[[int, int], bool]] = {
    ">=": lambda v, k: v >= k,
    "<=": lambda v, k: v <= k,
    "==": lambda v, k: v == k,
    ">": lambda v, k: v > k,
    "<": lambda v, k: v < k,
    "any": lambda v, k: True,
}


@dataclass(frozen=True)
class PostClause:
    """One value-indexed family of the post map: a guard over the result value
    and the tied postcondition it yields."""

    guard: str
    k: int
    out: tuple  # (global element, local element)

    def admits(self, v: int) -> bool:
        return _GUARDS[self.guard](v, self.k)

    def encode(self) -> str:
        if self.guard == "any":
            return "any"
        return f"z{self.guard}{self.k}"


@dataclass(frozen=True)
class AtomicSpec:
    """An atomic location's contract: enabled operations with tied pre- and
    postconditions over cancellative commutative monoids."""

    name: str
    v0: int
    global_monoid: Monoid
    local_monoid: Monoid
    rho0: object
    pre: Mapping[Operation, tuple]
    post: Mapping[Operation, tuple[PostClause, ...]]

    def __post_init__(self):
        for op in self.pre:
            if op.kind.mode == "na":
                raise TiedError(f"invalid spec {self.name}: nonatomic {op.kind} enabled")
        for op in self.post:
            if op not in self.pre:
                raise TiedError(f"spec {self.name}: post for {op.kind} without pre")

    def post_lookup(self, op: Operation, v: int) -> Optional[tuple]:
        for clause in self.post.get(op, ()):
            if clause.admits(v):
                return clause.out
        return None

    def enabled(self, op: Operation, v: int) -> bool:
        return self.post_lookup(op, v) is not None

    def enabled_results(self, op: Operation, domain: Iterable[int]) -> list[int]:
        return [v for v in domain if self.enabled(op, v)]


# -- the Core ARC specification -------------------------------------------------

FAA_INC = Operation(OpKind.RMW_RLX, update=add(1))
FAA_DEC = Operation(OpKind.RMW_REL, update=add(-1))
FENCE_ACQ_OP = Operation(OpKind.FENCE_ACQ)


def arc_spec() -> AtomicSpec:
    """The reference-counter contract: relaxed increments, release decrements,
    acquire fences; one unit of global resource per outstanding permission,
    and one unit of local resource handed to the thread whose decrement
    reads 1."""
    return AtomicSpec(
        name="arc",
        v0=1,
        global_monoid=NAT,
        local_monoid=NAT,
        rho0=1,
        pre={
            FAA_INC: (1, 0),
            FAA_DEC: (1, 0),
            FENCE_ACQ_OP: (0, 1),
        },
        post={
            FAA_INC: (PostClause(">=", 1, (2, 0)),),
            FAA_DEC: (
                PostClause(">=", 2, (0, 0)),
                PostClause("==", 1, (0, 1)),
            ),
            FENCE_ACQ_OP: (PostClause("==", 0, (0, 1)),),
        },
    )


# -- replay and net resource -----------------------------------------------------

TiedEvent = tuple[str, Operation, int]  # (thread, operation, result)


def _pre_post(spec: AtomicSpec, ev: TiedEvent) -> tuple[tuple, tuple]:
    _, op, result = ev
    if op not in spec.pre:
        raise UnknownOperation(f"{op.kind} not enabled in spec {spec.name}")
    post = spec.post_lookup(op, result)
    if post is None:
        raise UnknownOperation(
            f"({op.kind}, {result}) not in the post domain of spec {spec.name}"
        )
    return spec.pre[op], post


def replay_in_order(
    spec: AtomicSpec, events: Sequence[TiedEvent], order: Sequence[int]
) -> Optional[TotalTied]:
    """Starting from (rho0, eps), consume each event's tied precondition and
    produce its postcondition in the given order; None if a subtraction is
    undefined."""
    state = total_initial(spec)
    for i in order:
        thread, op, result = events[i]
        (pg, pl), (qg, ql) = _pre_post(spec, events[i])
        state = total_subtract(
            spec, state, TotalTied(pg, tb_normalize(spec.local_monoid, {thread: pl}))
        )
        if state is None:
            return None
        state = total_compose(
            spec, state, TotalTied(qg, tb_normalize(spec.local_monoid, {thread: ql}))
        )
    return state


def net_resource(spec: AtomicSpec, events: Sequence[TiedEvent]) -> Optional[TotalTied]:
    """Compose all postconditions onto (rho0, eps), then subtract all
    preconditions; order-free by commutativity."""
    state = total_initial(spec)
    pres = []
    for ev in events:
        thread = ev[0]
        (pg, pl), (qg, ql) = _pre_post(spec, ev)
        state = total_compose(
            spec, state, TotalTied(qg, tb_normalize(spec.local_monoid, {thread: ql}))
        )
        pres.append(TotalTied(pg, tb_normalize(spec.local_monoid, {thread: pl})))
    for p in pres:
        state = total_subtract(spec, state, p)
        if state is None:
            return None
    return state


# -- bounded witness search -------------------------------------------------------


@dataclass(frozen=True)
class TraceWitness:
    """A found witness: the single-location trace, its pivot, and the executed
    set, together with the total tied resource the executed set replays to.

    Events are indexed 0..n-1: chain RMWs first (in modification order), then
    fences.  ``threads`` assigns each event a canonical thread label.
    """

    chain_ops: tuple[Operation, ...]
    chain_values: tuple[int, ...]
    fence_slots: tuple[tuple[int, int], ...]  # (thread, slot before which RMW)
    threads: tuple[int, ...]
    pivot: int
    executed: frozenset[int]
    omega: TotalTied  # bound keyed by canonical thread labels (as strings)

    @property
    def size(self) -> int:
        return len(self.threads)


@dataclass(frozen=True)
class ConsistencyResult:
    consistent: bool
    witness: Optional[TraceWitness]
    bound: int

    @property
    def verdict(self) -> str:
        return "Consistent" if self.consistent else "NotFoundWithinBound"


def _check_searchable(spec: AtomicSpec) -> tuple[list[Operation], bool]:
    if spec.global_monoid is not NAT or spec.local_monoid is not NAT:
        raise UnsupportedSpec("witness search requires the (N, +, 0) monoids")
    rmw_ops = []
    fence = False
    for op in spec.pre:
        if op.kind.is_rmw:
            rmw_ops.append(op)
        elif op.kind == OpKind.FENCE_ACQ:
            fence = True
        else:
            raise UnsupportedSpec(f"witness search cannot handle enabled {op.kind}")
    return rmw_ops, fence


def _iter_chains(
    spec: AtomicSpec,
    rmw_ops: list[Operation],
    length: int,
    pivot_op: Optional[Operation],
    pivot_value: Optional[int],
    pivot_enabled_required: bool,
):
    """Yield (ops, values, pivot_pos) for RMW chains of exactly `length`.

    values[i] is the value read by the i-th RMW; the chain starts at v0.
    Every non-pivot position must be enabled; the pivot position (when the
    pivot is an RMW) must match pivot_op/pivot_value.  pivot_pos is None when
    the pivot is not on the chain (fence pivot).
    """

    def rec(ops, values, v, pivot_pos):
        if len(ops) == length:
            if pivot_op is None or pivot_pos is not None:
                yield tuple(ops), tuple(values), pivot_pos
            return
        i = len(ops)
        for op in rmw_ops:
            is_pivot_here = (
                pivot_op is not None
                and pivot_pos is None
                and op == pivot_op
                and v == pivot_value
            )
            choices = [False]
            if is_pivot_here:
                choices.append(True)
            for as_pivot in choices:
                if as_pivot or spec.enabled(op, v):
                    if as_pivot and pivot_enabled_required and not spec.enabled(op, v):
                        continue
                    ops.append(op)
                    values.append(v)
                    yield from rec(ops, values, op.update.apply(v), i if as_pivot else pivot_pos)
                    ops.pop()
                    values.pop()

    yield from rec([], [], spec.v0, None)


def _restricted_growth(n: int, prefix_max: int = -1):
    """All canonical thread labelings of n items (restricted growth strings)."""
    if n == 0:
        yield ()
        return
    for t in range(prefix_max + 2):
        for rest in _restricted_growth(n - 1, max(prefix_max, t)):
            yield (t,) + rest


def _trace_hb(
    chain_modes: Sequence[str],
    chain_threads: Sequence[int],
    fence_slots: Sequence[tuple[int, int]],
) -> Optional[list[int]]:
    """hb bitmasks for a trace candidate, or None if it cannot be consistent.

    Nodes: chain RMWs 0..k-1 (in mo order), then fences.  po orders each
    thread's RMWs along the chain and inserts each fence at its slot; sw runs
    from each release RMW to each acquire fence whose thread read past it.
    Coherence requires hb between RMWs to follow the chain order.
    """
    k = len(chain_modes)
    n = k + len(fence_slots)
    adj = [0] * n

    per_thread: dict[int, list[int]] = {}
    for i, t in enumerate(chain_threads):
        per_thread.setdefault(t, []).append(i)

    for positions in per_thread.values():
        for a, b in zip(positions, positions[1:]):
            adj[a] |= 1 << b

    for fi, (t, slot) in enumerate(fence_slots):
        node = k + fi
        positions = per_thread.get(t, [])
        if slot > len(positions):
            return None
        if slot > 0:
            adj[positions[slot - 1]] |= 1 << node
        if slot < len(positions):
            adj[node] |= 1 << positions[slot]
        # same-thread fences in slot order, ties by index
        for fj, (t2, slot2) in enumerate(fence_slots):
            if fj != fi and t2 == t and (slot2, fj) > (slot, fi):
                adj[node] |= 1 << (k + fj)
        # sw into the acquire fence from every release RMW it reads past
        max_read = slot - 1 if slot > 0 else -1
        max_pos = positions[max_read] if max_read >= 0 else -1
        for w in range(k):
            if chain_modes[w] in ("rel", "acqrel") and w < max_pos:
                adj[w] |= 1 << node

    # sw into acquire RMWs
    for r in range(k):
        if chain_modes[r] in ("acq", "acqrel"):
            for w in range(k):
                if chain_modes[w] in ("rel", "acqrel") and w < r:
                    adj[w] |= 1 << r

    # transitive closure (Warshall over bitmasks)
    for j in range(n):
        bit = 1 << j
        for i in range(n):
            if adj[i] & bit:
                adj[i] |= adj[j]

    for i in range(n):
        if adj[i] & (1 << i):
            return None
    for i in range(k):
        row = adj[i] & ((1 << k) - 1)
        while row:
            j = (row & -row).bit_length() - 1
            row &= row - 1
            if j <= i:
                return None  # hb opposes the chain (coherence)
    return adj


def _all_orders_defined(
    members: list[int],
    member_mask: int,
    preds: list[int],
    rho0: int,
    pre_g: list[int],
    pre_l: list[int],
    d_g: list[int],
    d_l: list[int],
    threads: Sequence[int],
) -> bool:
    """True iff every hb-consistent total order of the member events can
    consume each precondition when it is reached (replay never goes negative).

    Every hb-downward-closed subset of the members occurs as a prefix of some
    order, and every minimal event of its complement can come next, so the
    check walks the lattice of downward-closed subsets and demands each
    frontier event's precondition be covered by the subset's net resource.
    """
    # Cheap necessary conditions first: for each member e, both the smallest
    # prefix allowing e (its hb-predecessors) and the largest (everything not
    # hb-after e) are reachable, so the precondition must hold at both.
    for e in members:
        pg, pl = pre_g[e], pre_l[e]
        if pg == 0 and pl == 0:
            continue
        for s in (
            preds[e] & member_mask,
            member_mask & ~(1 << e) & ~_succs_of(preds, e, member_mask),
        ):
            g = rho0
            le = 0
            te = threads[e]
            rest = s
            while rest:
                j = (rest & -rest).bit_length() - 1
                rest &= rest - 1
                g += d_g[j]
                if threads[j] == te:
                    le += d_l[j]
            if pg > g or pl > le:
                return False

    seen = {0}
    stack = [(0, rho0, ())]
    while stack:
        s, g, loc = stack.pop()
        locd = dict(loc)
        for e in members:
            bit = 1 << e
            if s & bit:
                continue
            if preds[e] & member_mask & ~s:
                continue  # not yet minimal in the complement
            if pre_g[e] > g or pre_l[e] > locd.get(threads[e], 0):
                return False
            nxt = s | bit
            if nxt not in seen:
                seen.add(nxt)
                nl = dict(locd)
                nl[threads[e]] = nl.get(threads[e], 0) + d_l[e]
                stack.append((nxt, g + d_g[e], tuple(nl.items())))
    return True


def _succs_of(preds: list[int], e: int, mask: int) -> int:
    out = 0
    bit = 1 << e
    rest = mask
    while rest:
        j = (rest & -rest).bit_length() - 1
        rest &= rest - 1
        if preds[j] & bit:
            out |= 1 << j
    return out


def search_witnesses(
    spec: AtomicSpec,
    pivot_op: Operation,
    pivot_value: int,
    bound: int,
    grounding: bool,
    omega_pred: Callable[[int, dict[int, int], int], bool],
    limit: int = 1,
    chain_filter: Optional[Callable] = None,
    candidate_filter: Optional[Callable] = None,
    max_fences: Optional[int] = None,
) -> list[TraceWitness]:
    """Enumerate witnesses of the (grounding-)consistency judgment.

    ``omega_pred(net_global, net_local_by_thread, pivot_thread)`` selects the
    total tied resources of interest; the expensive all-orders replay check
    only runs on candidates passing it.  Returns up to ``limit`` witnesses.

    ``chain_filter(ops, values, pivot_pos)`` and
    ``candidate_filter(ops, values, threads, fence_slots, pivot_index)`` are
    sound pruning hooks: they may reject candidates that provably cannot
    yield a resource satisfying ``omega_pred``.

    ``max_fences`` caps the number of fence events in a trace.  When every
    enabled RMW has a unit local precondition and the fence's postcondition
    equals its precondition (as with ``fence_reduction_applies``), traces with
    non-pivot fences are subsumed: a fence contributes nothing to the net
    resource and the synchronization it adds only forces globally-negative
    events earlier, and delaying such an event past fence-free successors
    preserves the definedness of every replay order.
    """
    rmw_ops, fence_enabled = _check_searchable(spec)
    results: list[TraceWitness] = []

    pivot_is_fence = pivot_op.kind == OpKind.FENCE_ACQ
    if pivot_is_fence and (not fence_enabled or pivot_value != 0):
        return results
    if not pivot_is_fence and pivot_op not in spec.pre:
        return results

    pre_of = dict(spec.pre)
    fence_pre = pre_of.get(Operation(OpKind.FENCE_ACQ), (0, 1))
    fence_post = (
        spec.post_lookup(Operation(OpKind.FENCE_ACQ), 0) if fence_enabled else None
    )

    max_extra_fences = bound if fence_enabled else 0
    if max_fences is not None:
        max_extra_fences = min(max_extra_fences, max_fences)
        if max_extra_fences == 0:
            fence_enabled = fence_enabled and pivot_is_fence
            if pivot_is_fence:
                max_extra_fences = 1

    for k in range(0, bound + 1):
        chain_iter = _iter_chains(
            spec,
            rmw_ops,
            k,
            None if pivot_is_fence else pivot_op,
            None if pivot_is_fence else pivot_value,
            pivot_enabled_required=not grounding,
        )
        for chain_ops, chain_values, pivot_pos in chain_iter:
            if chain_filter is not None and not chain_filter(
                chain_ops, chain_values, pivot_pos
            ):
                continue
            chain_modes = [op.kind.mode for op in chain_ops]
            for chain_threads in _restricted_growth(k):
                nthreads = (max(chain_threads) + 1) if chain_threads else 0
                lo = 1 if pivot_is_fence else 0
                hi = min(max_extra_fences, bound - k) if fence_enabled else 0
                for m in range(lo, hi + 1):
                    for cand in _fence_placements(
                        m, nthreads, chain_threads, pivot_is_fence
                    ):
                        fence_slots, pivot_idx = cand
                        if not pivot_is_fence:
                            pivot_idx = pivot_pos
                        if candidate_filter is not None and not candidate_filter(
                            chain_ops, chain_values, chain_threads, fence_slots, pivot_idx
                        ):
                            continue
                        w = _evaluate_candidate(
                            spec,
                            chain_ops,
                            chain_values,
                            chain_modes,
                            chain_threads,
                            fence_slots,
                            pivot_idx,
                            grounding,
                            fence_pre,
                            fence_post,
                            omega_pred,
                            limit - len(results),
                        )
                        results.extend(w)
                        if len(results) >= limit:
                            return results
    return results


def _fence_placements(m: int, nthreads: int, chain_threads, pivot_is_fence: bool):
    """All canonical placements of m fences; yields (slots, pivot_index).

    Each fence gets a (thread, slot) with thread either an existing one or the
    next fresh label; non-pivot fences are kept sorted to avoid duplicates.
    The pivot fence, when present, is the first fence node.
    """
    counts: dict[int, int] = {}
    for t in chain_threads:
        counts[t] = counts.get(t, 0) + 1

    def options(max_thread: int):
        for t in range(max_thread + 1):
            for slot in range(counts.get(t, 0) + 1):
                yield (t, slot)

    if m == 0:
        yield (), None
        return

    def rec(placed: list[tuple[int, int]], fresh: int):
        if len(placed) == m:
            yield tuple(placed), (len(chain_threads) if pivot_is_fence else None)
            return
        start_sorted = placed[1:] if pivot_is_fence else placed
        last = start_sorted[-1] if start_sorted else None
        first_free = pivot_is_fence and not placed
        for opt in options(fresh):
            if not first_free and last is not None and opt < last:
                continue
            nt = fresh + 1 if opt[0] == fresh else fresh
            placed.append(opt)
            yield from rec(placed, nt)
            placed.pop()

    yield from rec([], nthreads)


def _evaluate_candidate(
    spec: AtomicSpec,
    chain_ops,
    chain_values,
    chain_modes,
    chain_threads,
    fence_slots,
    pivot: int,
    grounding: bool,
    fence_pre,
    fence_post,
    omega_pred,
    limit: int,
) -> list[TraceWitness]:
    k = len(chain_ops)
    n = k + len(fence_slots)
    threads = list(chain_threads) + [t for t, _ in fence_slots]

    hb = _trace_hb(chain_modes, chain_threads, fence_slots)
    if hb is None:
        return []

    pre_g = [0] * n
    pre_l = [0] * n
    d_g = [0] * n
    d_l = [0] * n
    for i in range(k):
        pg, pl = spec.pre[chain_ops[i]]
        post = spec.post_lookup(chain_ops[i], chain_values[i])
        if post is None:
            if i != pivot:
                return []
            post = (0, 0)  # pivot delta is never used: pivot is not executed
        pre_g[i], pre_l[i] = pg, pl
        d_g[i], d_l[i] = post[0] - pg, post[1] - pl
    for fi in range(len(fence_slots)):
        i = k + fi
        pre_g[i], pre_l[i] = fence_pre
        d_g[i] = fence_post[0] - fence_pre[0]
        d_l[i] = fence_post[1] - fence_pre[1]

    required = 0
    for i in range(n):
        if hb[i] & (1 << pivot):
            required |= 1 << i
    forbidden = (1 << pivot) | hb[pivot]
    if grounding:
        for i in range(k):
            if i != pivot and chain_modes[i] in ("rel", "acqrel"):
                required |= 1 << i
    if required & forbidden:
        return []
    free = [i for i in range(n) if not ((required | forbidden) & (1 << i))]

    preds = [0] * n
    for i in range(n):
        row = hb[i]
        while row:
            j = (row & -row).bit_length() - 1
            row &= row - 1
            preds[j] |= 1 << i

    base_g = spec.rho0
    base_l: dict[int, int] = {}
    req_list = []
    rest = required
    while rest:
        j = (rest & -rest).bit_length() - 1
        rest &= rest - 1
        req_list.append(j)
        base_g += d_g[j]
        base_l[threads[j]] = base_l.get(threads[j], 0) + d_l[j]

    out: list[TraceWitness] = []
    for sub in range(1 << len(free)):
        g = base_g
        loc = dict(base_l)
        members = list(req_list)
        s = sub
        while s:
            b = (s & -s).bit_length() - 1
            s &= s - 1
            e = free[b]
            members.append(e)
            g += d_g[e]
            loc[threads[e]] = loc.get(threads[e], 0) + d_l[e]
        if g < 0 or any(v < 0 for v in loc.values()):
            continue
        loc = {t: v for t, v in loc.items() if v}
        if not omega_pred(g, loc, threads[pivot]):
            continue
        member_mask = 0
        for e in members:
            member_mask |= 1 << e
        if not _all_orders_defined(
            members, member_mask, preds, spec.rho0, pre_g, pre_l, d_g, d_l, threads
        ):
            continue
        out.append(
            TraceWitness(
                chain_ops=tuple(chain_ops),
                chain_values=tuple(chain_values),
                fence_slots=tuple(fence_slots),
                threads=tuple(threads),
                pivot=pivot,
                executed=frozenset(members),
                omega=TotalTied(g, tuple(sorted((str(t), v) for t, v in loc.items()))),
            )
        )
        if len(out) >= limit:
            return out
    return out


def fence_reduction_applies(spec: AtomicSpec) -> bool:
    """True when non-pivot fences cannot enable otherwise-impossible
    witnesses: enabled RMWs carry no local precondition and the fence's tied
    postcondition equals its precondition."""
    for op, (pg, pl) in spec.pre.items():
        if op.kind.is_rmw and pl != 0:
            return False
        if op.kind == OpKind.FENCE_ACQ:
            for clause in spec.post.get(op, ()):
                if clause.out != (pg, pl):
                    return False
    return True


def _omega_matcher(spec: AtomicSpec, omega: TotalTied, t: str):
    """Predicate matching a candidate net against a concrete total tied
    resource, up to renaming of the threads other than the pivot's."""
    want_pivot = omega.local(spec.local_monoid, t)
    others = sorted(v for th, v in omega.bound if th != t)

    def pred(g: int, loc: dict[int, int], pivot_thread: int) -> bool:
        if g != omega.glob:
            return False
        if loc.get(pivot_thread, 0) != want_pivot:
            return False
        rest = sorted(v for th, v in loc.items() if th != pivot_thread)
        return rest == others

    return pred


def check_consistent_resource(
    spec: AtomicSpec,
    t: str,
    v: int,
    o: Operation,
    omega: TotalTied,
    bound: int,
) -> ConsistencyResult:
    """Decide the consistency judgment for (t, v, o) and omega by bounded
    witness search over traces with at most ``bound`` events."""
    found = search_witnesses(
        spec, o, v, bound, grounding=False, omega_pred=_omega_matcher(spec, omega, t)
    )
    return ConsistencyResult(bool(found), found[0] if found else None, bound)


def check_grounding_consistent(
    spec: AtomicSpec,
    t: str,
    v: int,
    o: Operation,
    omega: TotalTied,
    bound: int,
) -> ConsistencyResult:
    """Decide the grounding-consistency judgment: the pivot need not be
    enabled, and the executed set must also contain every release event."""
    found = search_witnesses(
        spec, o, v, bound, grounding=True, omega_pred=_omega_matcher(spec, omega, t)
    )
    return ConsistencyResult(bool(found), found[0] if found else None, bound)


@dataclass(frozen=True)
class SufficiencyResult:
    sufficient: bool
    counterexample: Optional[tuple[Operation, int, TraceWitness]]
    bound: int


def check_sufficiency(
    spec: AtomicSpec, value_domain: Iterable[int], bound: int
) -> SufficiencyResult:
    """The tied precondition of each enabled operation must force the
    operation to occur only at enabled result values: for every o in dom(pre)
    and v outside dom(post), no grounding-consistency witness may cover o's
    precondition."""
    domain = sorted(set(value_domain))
    reduce_fences = fence_reduction_applies(spec)
    for o, (pg, pl) in sorted(spec.pre.items(), key=lambda kv: kv[0].kind.value):
        for v in domain:
            if spec.enabled(o, v):
                continue

            def covers_pre(g: int, loc: dict[int, int], pivot_thread: int) -> bool:
                return g >= pg and loc.get(pivot_thread, 0) >= pl

            def net_feasible(ops, values, pivot_pos):
                # Upper bound on the achievable net: releases are forced into
                # the executed set, anything else only helps if positive.
                g = spec.rho0
                loc_max = 0
                for i, (op, val) in enumerate(zip(ops, values)):
                    if i == pivot_pos:
                        continue
                    post = spec.post_lookup(op, val)
                    if post is None:
                        return False
                    dg = post[0] - spec.pre[op][0]
                    dl = post[1] - spec.pre[op][1]
                    if op.kind.mode in ("rel", "acqrel"):
                        g += dg
                    elif dg > 0:
                        g += dg
                    if dl > 0:
                        loc_max += dl
                return g >= pg and loc_max >= pl

            found = search_witnesses(
                spec,
                o,
                v,
                bound,
                grounding=True,
                omega_pred=covers_pre,
                chain_filter=net_feasible,
                max_fences=0 if reduce_fences else None,
            )
            if found:
                return SufficiencyResult(False, (o, v, found[0]), bound)
    return SufficiencyResult(True, None, bound)


# -- atomic spec text format -----------------------------------------------------


def operation_from_token(token: str) -> Operation:
    """Parse an operation token such as FAA_rlx(+1), W_rel(3) or fence_acq."""
    name, _, arg = token.partition("(")
    arg = arg.rstrip(")")
    name = name.strip()
    if name.startswith("FAA_"):
        return Operation(OpKind("rmw_" + name[4:]), update=add(int(arg)))
    if name.startswith("XCHG_"):
        return Operation(OpKind("rmw_" + name[5:]), update=setv(int(arg)))
    if name.startswith("W_"):
        return Operation(OpKind("write_" + name[2:]), value=int(arg))
    if name.startswith("R_"):
        return Operation(OpKind("read_" + name[2:]))
    if name in ("fence_acq", "fence_rel"):
        return Operation(OpKind(name))
    raise TiedError(f"unknown operation token {token!r}")


def operation_to_token(op: Operation) -> str:
    kind = op.kind
    if kind.is_rmw:
        mode = kind.value[len("rmw_") :]
        if op.update.form == "add":
            k = op.update.arg
            return f"FAA_{mode}({'+' if k >= 0 else ''}{k})"
        if op.update.form == "set":
            return f"XCHG_{mode}({op.update.arg})"
        raise TiedError("table-form updates have no spec token")
    if kind.is_write:
        return f"W_{kind.value[len('write_'):]}({op.value})"
    if kind.is_read:
        return f"R_{kind.value[len('read_'):]}"
    return kind.value


def parse_atomic_spec(name: str, body: str) -> AtomicSpec:
    """Parse the body of a ``spec NAME { ... }`` block."""
    fields: dict[str, str] = {}
    pre: dict[Operation, tuple] = {}
    post: dict[Operation, list[PostClause]] = {}
    for raw in body.split(";"):
        entry = raw.strip()
        if not entry:
            continue
        if entry.startswith("pre "):
            lhs, _, rhs = entry[4:].partition("=")
            pre[operation_from_token(lhs.strip())] = _parse_pair(rhs)
        elif entry.startswith("post "):
            head, rhs = entry[5:].rsplit("=", 1)
            op_token, _, guard = head.partition("@")
            op = operation_from_token(op_token.strip())
            guard = guard.strip()
            if not guard or guard == "any":
                clause = PostClause("any", 0, _parse_pair(rhs))
            else:
                if not guard.startswith("z"):
                    raise TiedError(f"bad post guard {guard!r}")
                rest = guard[1:]
                for sym in (">=", "<=", "==", ">", "<"):
                    if rest.startswith(sym):
                        clause = PostClause(sym, int(rest[len(sym) :]), _parse_pair(rhs))
                        break
                else:
                    raise TiedError(f"bad post guard {guard!r}")
            post.setdefault(op, []).append(clause)
        else:
            key, _, val = entry.partition("=")
            fields[key.strip()] = val.strip()
    gm = _MONOIDS[fields.get("rG", "nat")]
    lm = _MONOIDS[fields.get("rL", "nat")]
    return AtomicSpec(
        name=name,
        v0=int(fields["v0"]),
        global_monoid=gm,
        local_monoid=lm,
        rho0=int(fields["rho0"]),
        pre=pre,
        post={op: tuple(cl) for op, cl in post.items()},
    )


def _parse_pair(text: str) -> tuple:
    text = text.strip()
    if not (text.startswith("(") and text.endswith(")")):
        raise TiedError(f"bad resource pair {text!r}")
    a, _, b = text[1:-1].partition(",")
    return (int(a), int(b))


def print_atomic_spec(spec: AtomicSpec) -> str:
    parts = [
        f"v0={spec.v0}",
        f"rG={spec.global_monoid.name}",
        f"rL={spec.local_monoid.name}",
        f"rho0={spec.rho0}",
    ]
    for op, (g, l) in sorted(spec.pre.items(), key=lambda kv: operation_to_token(kv[0])):
        parts.append(f"pre {operation_to_token(op)} = ({g},{l})")
    for op, clauses in sorted(spec.post.items(), key=lambda kv: operation_to_token(kv[0])):
        for cl in clauses:
            parts.append(
                f"post {operation_to_token(op)} @ {cl.encode()} = ({cl.out[0]},{cl.out[1]})"
            )
    return f"spec {spec.name} {{ " + "; ".join(parts) + "; }"
