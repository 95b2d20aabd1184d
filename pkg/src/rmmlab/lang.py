"""The loop-free concurrent language and its litmus-test surface syntax.

A litmus file is a sequence of ``%``-comments, ``spec NAME { ... }`` blocks
(atomic location contracts), ``thread { ... }`` blocks, and an optional
``exists: a = 1 /\\ b = 1`` postcondition over the registers bound by
top-level ``let``s.  Threads run commands:

    let x = c in c        sequencing with a bound register
    c ; c                 sequencing, sugar for a wildcard let
    if e then { c }       one-armed conditional
    fork { c }            spawn a child thread
    cons(e1, ..., en)     allocate a fresh block, returns its address
    [e]                   nonatomic read (also: R_na(e))
    [e] := e              nonatomic write (also: W_na(e, v))
    free(e)               deallocate
    begin_atomic(e, NAME) convert a location to atomic under contract NAME
    end_atomic(e)         convert an atomic location back to nonatomic
    R_rlx(e), R_acq(e)    atomic reads
    W_rlx(e, v), W_rel(e, v)
    FAA_m(e, k)           fetch-and-add, m in rlx/rel/acq/acqrel
    XCHG_m(e, v)          atomic exchange
    fence_acq(e), fence_rel(e)

Expressions are integers, registers, ``e + e`` and ``e == e``.  A free
identifier used as a location names a global; named locations get small
addresses in order of first appearance.

``unroll_thread`` turns one thread's command into its event sequence given an
oracle supplying every read/RMW result and every allocation base address,
which is how the enumerator and the re-execution search drive the language.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence, Union

from .exec_graph import Label, Operation, OpKind, UpdateFn, add, setv
from .tied import AtomicSpec, parse_atomic_spec, print_atomic_spec


class LangError(Exception):
    pass


class ParseError(LangError):
    pass


class OracleExhausted(LangError):
    pass


# -- expressions ---------------------------------------------------------------


@dataclass(frozen=True)
class Value:
    n: int


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Add:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Eq:
    left: "Expr"
    right: "Expr"


Expr = Union[Value, Var, Add, Eq]


def eval_expr(e: Expr, env: Optional[dict[str, int]] = None) -> int:
    env = env or {}
    if isinstance(e, Value):
        return e.n
    if isinstance(e, Var):
        if e.name not in env:
            raise LangError(f"unbound register {e.name!r}")
        return env[e.name]
    if isinstance(e, Add):
        return eval_expr(e.left, env) + eval_expr(e.right, env)
    if isinstance(e, Eq):
        return 1 if eval_expr(e.left, env) == eval_expr(e.right, env) else 0
    raise LangError(f"not an expression: {e!r}")


# -- commands ------------------------------------------------------------------


@dataclass(frozen=True)
class ExprCmd:
    expr: Expr


@dataclass(frozen=True)
class Cons:
    args: tuple[Expr, ...]


@dataclass(frozen=True)
class ReadNA:
    loc: Expr


@dataclass(frozen=True)
class WriteNA:
    loc: Expr
    value: Expr


@dataclass(frozen=True)
class WriteNAInProgress:
    """Runtime marker for a nonatomic write whose start step has been taken;
    never produced by the parser."""

    loc: int
    value: int


@dataclass(frozen=True)
class Free:
    loc: Expr


@dataclass(frozen=True)
class BeginAtomic:
    loc: Expr
    spec_name: str


@dataclass(frozen=True)
class EndAtomic:
    loc: Expr


@dataclass(frozen=True)
class AtomicCmd:
    """An atomic read, write, RMW or fence on a location."""

    kind: OpKind
    loc: Expr
    value: Optional[Expr] = None  # writes
    update: Optional[UpdateFn] = None  # RMWs

    def operation(self, env: Optional[dict[str, int]] = None) -> Operation:
        if self.kind.is_write:
            return Operation(self.kind, value=eval_expr(self.value, env))
        if self.kind.is_rmw:
            return Operation(self.kind, update=self.update)
        return Operation(self.kind)


@dataclass(frozen=True)
class If:
    cond: Expr
    body: "Cmd"


@dataclass(frozen=True)
class Let:
    name: str
    bound: "Cmd"
    body: "Cmd"


@dataclass(frozen=True)
class Fork:
    body: "Cmd"


Cmd = Union[
    ExprCmd,
    Cons,
    ReadNA,
    WriteNA,
    WriteNAInProgress,
    Free,
    BeginAtomic,
    EndAtomic,
    AtomicCmd,
    If,
    Let,
    Fork,
]


def substitute(c: Cmd, value: int, name: str) -> Cmd:
    """Replace the register in a command; Let binders shadow."""

    def se(e: Expr) -> Expr:
        if isinstance(e, Var):
            return Value(value) if e.name == name else e
        if isinstance(e, Add):
            return Add(se(e.left), se(e.right))
        if isinstance(e, Eq):
            return Eq(se(e.left), se(e.right))
        return e

    if isinstance(c, ExprCmd):
        return ExprCmd(se(c.expr))
    if isinstance(c, Cons):
        return Cons(tuple(se(a) for a in c.args))
    if isinstance(c, ReadNA):
        return ReadNA(se(c.loc))
    if isinstance(c, WriteNA):
        return WriteNA(se(c.loc), se(c.value))
    if isinstance(c, WriteNAInProgress):
        return c
    if isinstance(c, Free):
        return Free(se(c.loc))
    if isinstance(c, BeginAtomic):
        return BeginAtomic(se(c.loc), c.spec_name)
    if isinstance(c, EndAtomic):
        return EndAtomic(se(c.loc))
    if isinstance(c, AtomicCmd):
        return AtomicCmd(
            c.kind, se(c.loc), se(c.value) if c.value is not None else None, c.update
        )
    if isinstance(c, If):
        return If(se(c.cond), substitute(c.body, value, name))
    if isinstance(c, Let):
        bound = substitute(c.bound, value, name)
        body = c.body if c.name == name else substitute(c.body, value, name)
        return Let(c.name, bound, body)
    if isinstance(c, Fork):
        return Fork(substitute(c.body, value, name))
    raise LangError(f"not a command: {c!r}")


# -- programs ------------------------------------------------------------------


@dataclass(frozen=True)
class Program:
    threads: tuple[Cmd, ...]
    specs: dict[str, AtomicSpec] = field(default_factory=dict)
    postcondition: tuple[tuple[str, int], ...] = ()
    location_names: dict[str, int] = field(default_factory=dict)

    def location_name(self, address: int) -> str:
        for name, a in self.location_names.items():
            if a == address:
                return name
        return str(address)


# -- parsing -------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s+|%[^\n]*"  # whitespace / comments
    r"|(?P<int>-?\d+)"
    r"|(?P<id>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<sym>:=|==|>=|<=|/\\|[-+(){}\[\],;:=@><])"
)

_KEYWORDS = {
    "let",
    "in",
    "if",
    "then",
    "fork",
    "cons",
    "free",
    "begin_atomic",
    "end_atomic",
    "thread",
    "spec",
    "exists",
}

_ATOMIC_READS = {"R_na": OpKind.READ_NA, "R_rlx": OpKind.READ_RLX, "R_acq": OpKind.READ_ACQ}
_ATOMIC_WRITES = {"W_na": OpKind.WRITE_NA, "W_rlx": OpKind.WRITE_RLX, "W_rel": OpKind.WRITE_REL}
_RMW_MODES = {"rlx": OpKind.RMW_RLX, "rel": OpKind.RMW_REL, "acq": OpKind.RMW_ACQ, "acqrel": OpKind.RMW_ACQREL}
_FENCES = {"fence_acq": OpKind.FENCE_ACQ, "fence_rel": OpKind.FENCE_REL}


def _tokenize(text: str) -> list[tuple[str, str]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"bad character {text[pos]!r} at offset {pos}")
        pos = m.end()
        if m.lastgroup == "int":
            tokens.append(("int", m.group("int")))
        elif m.lastgroup == "id":
            tokens.append(("id", m.group("id")))
        elif m.lastgroup == "sym":
            tokens.append(("sym", m.group("sym")))
    tokens.append(("eof", ""))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self) -> tuple[str, str]:
        return self.tokens[self.pos]

    def next(self) -> tuple[str, str]:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str, value: Optional[str] = None) -> str:
        k, v = self.next()
        if k != kind or (value is not None and v != value):
            raise ParseError(f"expected {value or kind}, got {v!r}")
        return v

    def at(self, kind: str, value: str) -> bool:
        return self.peek() == (kind, value)

    def eat(self, kind: str, value: str) -> bool:
        if self.at(kind, value):
            self.next()
            return True
        return False

    # expressions: additive over comparison (== binds loosest, non-assoc)

    def expr(self) -> Expr:
        left = self.additive()
        if self.eat("sym", "=="):
            return Eq(left, self.additive())
        return left

    def additive(self) -> Expr:
        left = self.atom()
        while self.at("sym", "+"):
            self.next()
            left = Add(left, self.atom())
        return left

    def atom(self) -> Expr:
        k, v = self.peek()
        if k == "int":
            self.next()
            return Value(int(v))
        if k == "id" and v not in _KEYWORDS:
            self.next()
            return Var(v)
        if self.eat("sym", "("):
            e = self.expr()
            self.expect("sym", ")")
            return e
        raise ParseError(f"expected expression, got {v!r}")

    # commands

    def block(self) -> Cmd:
        if self.eat("sym", "{"):
            c = self.cmd()
            self.expect("sym", "}")
            return c
        self.expect("sym", "(")
        c = self.cmd()
        self.expect("sym", ")")
        return c

    def cmd(self) -> Cmd:
        first = self.item()
        if self.eat("sym", ";"):
            return Let("_", first, self.cmd())
        return first

    def item(self) -> Cmd:
        k, v = self.peek()
        if k == "id" and v == "let":
            self.next()
            name = self.expect("id")
            self.expect("sym", "=")
            bound = self.item()
            self.expect("id", "in")
            return Let(name, bound, self.cmd())
        if k == "id" and v == "if":
            self.next()
            cond = self.expr()
            self.expect("id", "then")
            return If(cond, self.block())
        if k == "id" and v == "fork":
            self.next()
            return Fork(self.block())
        return self.primary()

    def primary(self) -> Cmd:
        k, v = self.peek()
        if k == "sym" and v == "[":
            self.next()
            loc = self.expr()
            self.expect("sym", "]")
            if self.eat("sym", ":="):
                return WriteNA(loc, self.expr())
            return ReadNA(loc)
        if k == "id":
            if v == "cons":
                self.next()
                self.expect("sym", "(")
                args = [self.expr()]
                while self.eat("sym", ","):
                    args.append(self.expr())
                self.expect("sym", ")")
                return Cons(tuple(args))
            if v == "free":
                self.next()
                self.expect("sym", "(")
                loc = self.expr()
                self.expect("sym", ")")
                return Free(loc)
            if v == "begin_atomic":
                self.next()
                self.expect("sym", "(")
                loc = self.expr()
                self.expect("sym", ",")
                name = self.expect("id")
                self.expect("sym", ")")
                return BeginAtomic(loc, name)
            if v == "end_atomic":
                self.next()
                self.expect("sym", "(")
                loc = self.expr()
                self.expect("sym", ")")
                return EndAtomic(loc)
            if v in _ATOMIC_READS:
                self.next()
                self.expect("sym", "(")
                loc = self.expr()
                self.expect("sym", ")")
                kind = _ATOMIC_READS[v]
                return ReadNA(loc) if kind == OpKind.READ_NA else AtomicCmd(kind, loc)
            if v in _ATOMIC_WRITES:
                self.next()
                self.expect("sym", "(")
                loc = self.expr()
                self.expect("sym", ",")
                val = self.expr()
                self.expect("sym", ")")
                kind = _ATOMIC_WRITES[v]
                if kind == OpKind.WRITE_NA:
                    return WriteNA(loc, val)
                return AtomicCmd(kind, loc, value=val)
            if v in _FENCES:
                self.next()
                self.expect("sym", "(")
                loc = self.expr()
                self.expect("sym", ")")
                return AtomicCmd(_FENCES[v], loc)
            if v.startswith("FAA_") and v[4:] in _RMW_MODES:
                self.next()
                self.expect("sym", "(")
                loc = self.expr()
                self.expect("sym", ",")
                amount = self._literal()
                self.expect("sym", ")")
                return AtomicCmd(_RMW_MODES[v[4:]], loc, update=add(amount))
            if v.startswith("XCHG_") and v[5:] in _RMW_MODES:
                self.next()
                self.expect("sym", "(")
                loc = self.expr()
                self.expect("sym", ",")
                new = self._literal()
                self.expect("sym", ")")
                return AtomicCmd(_RMW_MODES[v[5:]], loc, update=setv(new))
        if k == "sym" and v == "(":
            self.next()
            c = self.cmd()
            self.expect("sym", ")")
            return c
        return ExprCmd(self.expr())

    def _literal(self) -> int:
        neg = self.eat("sym", "-")
        if self.eat("sym", "+"):
            pass
        n = int(self.expect("int"))
        return -n if neg else n

    # top level

    def program(self) -> Program:
        threads: list[Cmd] = []
        specs: dict[str, AtomicSpec] = {}
        post: tuple[tuple[str, int], ...] = ()
        while True:
            k, v = self.peek()
            if k == "eof":
                break
            if (k, v) == ("id", "thread"):
                self.next()
                threads.append(self.block())
            elif (k, v) == ("id", "spec"):
                self.next()
                name = self.expect("id")
                body = self._raw_braces()
                specs[name] = parse_atomic_spec(name, body)
            elif (k, v) == ("id", "exists"):
                self.next()
                self.expect("sym", ":")
                post = self._postcondition()
            else:
                raise ParseError(f"expected thread, spec or exists, got {v!r}")
        prog = Program(threads=tuple(threads), specs=specs, postcondition=post)
        return _intern_locations(prog)

    def _raw_braces(self) -> str:
        """Re-render the tokens of a braced block; spec bodies have their own
        grammar handled by the contract parser."""
        self.expect("sym", "{")
        parts: list[str] = []
        depth = 1
        while depth:
            k, v = self.next()
            if k == "eof":
                raise ParseError("unterminated spec block")
            if (k, v) == ("sym", "{"):
                depth += 1
            elif (k, v) == ("sym", "}"):
                depth -= 1
                if depth == 0:
                    break
            parts.append(v)
        out = ""
        for p in parts:
            if out and (out[-1].isalnum() or out[-1] == "_") and (p[0].isalnum() or p[0] == "_"):
                out += " "
            out += p
        return out

    def _postcondition(self) -> tuple[tuple[str, int], ...]:
        conjuncts = []
        while True:
            name = self.expect("id")
            self.expect("sym", "=")
            neg = self.eat("sym", "-")
            n = int(self.expect("int"))
            conjuncts.append((name, -n if neg else n))
            if not self.eat("sym", "/\\"):
                break
        return tuple(conjuncts)


def _intern_locations(prog: Program) -> Program:
    """Assign small addresses to free identifiers used as locations, in order
    of first appearance across threads."""
    names: dict[str, int] = {}

    def walk_expr(e: Expr, bound: frozenset[str]):
        if isinstance(e, Var) and e.name not in bound and e.name not in names:
            names[e.name] = len(names) + 1
        elif isinstance(e, (Add, Eq)):
            walk_expr(e.left, bound)
            walk_expr(e.right, bound)

    def walk(c: Cmd, bound: frozenset[str]):
        if isinstance(c, ExprCmd):
            walk_expr(c.expr, bound)
        elif isinstance(c, Cons):
            for a in c.args:
                walk_expr(a, bound)
        elif isinstance(c, (ReadNA, Free, EndAtomic)):
            walk_expr(c.loc, bound)
        elif isinstance(c, WriteNA):
            walk_expr(c.loc, bound)
            walk_expr(c.value, bound)
        elif isinstance(c, BeginAtomic):
            walk_expr(c.loc, bound)
        elif isinstance(c, AtomicCmd):
            walk_expr(c.loc, bound)
            if c.value is not None:
                walk_expr(c.value, bound)
        elif isinstance(c, If):
            walk_expr(c.cond, bound)
            walk(c.body, bound)
        elif isinstance(c, Let):
            walk(c.bound, bound)
            walk(c.body, bound | {c.name})
        elif isinstance(c, Fork):
            walk(c.body, bound)

    for t in prog.threads:
        walk(t, frozenset())

    def subst_all(c: Cmd) -> Cmd:
        out = c
        for name, addr in names.items():
            out = substitute(out, addr, name)
        return out

    return Program(
        threads=tuple(subst_all(t) for t in prog.threads),
        specs=prog.specs,
        postcondition=prog.postcondition,
        location_names=names,
    )


def parse_litmus(text: str) -> Program:
    return _Parser(text).program()


def parse_cmd(text: str) -> Cmd:
    p = _Parser(text)
    c = p.cmd()
    p.expect("eof")
    return c


# -- printing ------------------------------------------------------------------


def print_expr(e: Expr, names: Optional[dict[int, str]] = None) -> str:
    names = names or {}
    if isinstance(e, Value):
        return names.get(e.n, str(e.n))
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Add):
        return f"{print_expr(e.left, names)} + {print_expr(e.right, names)}"
    if isinstance(e, Eq):
        return f"{print_expr(e.left, names)} == {print_expr(e.right, names)}"
    raise LangError(f"not an expression: {e!r}")


def print_cmd(c: Cmd, indent: int = 0, names: Optional[dict[int, str]] = None) -> str:
    pad = "  " * indent
    pe = lambda e: print_expr(e)  # value position: never rename literals
    # location position: a bare literal address prints as its name
    pl = lambda e: print_expr(e, names) if isinstance(e, Value) else print_expr(e)
    if isinstance(c, ExprCmd):
        return pad + pe(c.expr)
    if isinstance(c, Cons):
        return pad + "cons(" + ", ".join(pe(a) for a in c.args) + ")"
    if isinstance(c, ReadNA):
        return pad + f"R_na({pl(c.loc)})"
    if isinstance(c, WriteNA):
        return pad + f"W_na({pl(c.loc)}, {pe(c.value)})"
    if isinstance(c, WriteNAInProgress):
        return pad + f"W_na({c.loc}, {c.value})"  # mid-step marker
    if isinstance(c, Free):
        return pad + f"free({pl(c.loc)})"
    if isinstance(c, BeginAtomic):
        return pad + f"begin_atomic({pl(c.loc)}, {c.spec_name})"
    if isinstance(c, EndAtomic):
        return pad + f"end_atomic({pl(c.loc)})"
    if isinstance(c, AtomicCmd):
        kind = c.kind
        if kind.is_read:
            return pad + f"R_{kind.mode}({pl(c.loc)})"
        if kind.is_write:
            return pad + f"W_{kind.mode}({pl(c.loc)}, {pe(c.value)})"
        if kind.is_rmw:
            if c.update.form == "add":
                return pad + f"FAA_{kind.mode}({pl(c.loc)}, {c.update.arg})"
            return pad + f"XCHG_{kind.mode}({pl(c.loc)}, {c.update.arg})"
        return pad + f"{kind.value}({pl(c.loc)})"
    if isinstance(c, If):
        body = print_cmd(c.body, indent + 1, names)
        return pad + f"if {pe(c.cond)} then {{\n{body}\n{pad}}}"
    if isinstance(c, Let):
        if c.name == "_":
            return print_cmd(c.bound, indent, names) + ";\n" + print_cmd(c.body, indent, names)
        bound = print_cmd(c.bound, 0, names)
        return pad + f"let {c.name} = {bound} in\n" + print_cmd(c.body, indent, names)
    if isinstance(c, Fork):
        body = print_cmd(c.body, indent + 1, names)
        return pad + f"fork {{\n{body}\n{pad}}}"
    raise LangError(f"not a command: {c!r}")


def print_program(p: Program) -> str:
    names = {addr: name for name, addr in p.location_names.items()}
    chunks = []
    for spec in p.specs.values():
        chunks.append(print_atomic_spec(spec))
    for t in p.threads:
        chunks.append("thread {\n" + print_cmd(t, 1, names) + "\n}")
    if p.postcondition:
        chunks.append(
            "exists: " + " /\\ ".join(f"{r} = {v}" for r, v in p.postcondition)
        )
    return "\n\n".join(chunks) + "\n"


# -- unrolling -----------------------------------------------------------------


@dataclass
class ThreadTrace:
    """One thread's events in program order, under a fixed oracle."""

    events: list[Label]
    forks: list[tuple[int, Cmd]]  # (events emitted before the fork, child body)
    value: int
    registers: dict[str, int]
    consumed: int  # oracle values used


class _ListOracle:
    def __init__(self, values: Sequence[int]):
        self.values = list(values)
        self.used = 0

    def take(self, purpose: str, location: Optional[int] = None) -> int:
        if self.used >= len(self.values):
            raise OracleExhausted(f"oracle ran out supplying a {purpose}")
        v = self.values[self.used]
        self.used += 1
        return v


def unroll_thread(cmd: Cmd, thread: str, oracle) -> ThreadTrace:
    """Deterministically unroll one thread's command.

    The oracle supplies, in program order, the result of every read and RMW
    and the base address of every allocation: either a sequence of values or
    an object with ``take(purpose, location)``.  Forked bodies are recorded at
    their fork point, not unrolled; children of ``thread`` are expected to be
    named ``thread/1``, ``thread/2``, ... by the caller.
    """
    src = oracle if hasattr(oracle, "take") else _ListOracle(oracle)
    events: list[Label] = []
    forks: list[tuple[int, Cmd]] = []

    def emit(location: int, result: int, op: Operation, pseudo=None, spec_name=None):
        events.append(
            Label(thread, location, result, op, pseudo=pseudo, spec_name=spec_name)
        )

    def go(c: Cmd, env: dict[str, int]) -> int:
        if isinstance(c, ExprCmd):
            return eval_expr(c.expr, env)
        if isinstance(c, Cons):
            base = src.take("allocation address")
            for i, a in enumerate(c.args):
                emit(base + i, 0, Operation(OpKind.WRITE_NA, value=eval_expr(a, env)), pseudo="alloc")
            return base
        if isinstance(c, ReadNA):
            loc = eval_expr(c.loc, env)
            v = src.take("read result", loc)
            emit(loc, v, Operation(OpKind.READ_NA))
            return v
        if isinstance(c, WriteNA):
            emit(eval_expr(c.loc, env), 0, Operation(OpKind.WRITE_NA, value=eval_expr(c.value, env)))
            return 0
        if isinstance(c, Free):
            emit(eval_expr(c.loc, env), 0, Operation(OpKind.WRITE_NA, value=0), pseudo="free")
            return 0
        if isinstance(c, BeginAtomic):
            emit(
                eval_expr(c.loc, env),
                0,
                Operation(OpKind.WRITE_NA, value=0),
                pseudo="begin_atomic",
                spec_name=c.spec_name,
            )
            return 0
        if isinstance(c, EndAtomic):
            emit(eval_expr(c.loc, env), 0, Operation(OpKind.WRITE_NA, value=0), pseudo="end_atomic")
            return 0
        if isinstance(c, AtomicCmd):
            loc = eval_expr(c.loc, env)
            if c.kind.is_read or c.kind.is_rmw:
                v = src.take("read result", loc)
                emit(loc, v, c.operation(env))
                return v
            emit(loc, 0, c.operation(env))
            return 0
        if isinstance(c, If):
            if eval_expr(c.cond, env):
                return go(c.body, env)
            return 0
        if isinstance(c, Let):
            v = go(c.bound, env)
            env2 = dict(env)
            env2[c.name] = v
            result = go(c.body, env2)
            if c.name != "_":
                registers[c.name] = v
            return result
        if isinstance(c, Fork):
            body = c.body
            for name, v in env.items():
                body = substitute(body, v, name)
            forks.append((len(events), body))
            return 0
        raise LangError(f"cannot unroll {c!r}")

    registers: dict[str, int] = {}
    value = go(cmd, {})
    return ThreadTrace(
        events=events, forks=forks, value=value, registers=registers, consumed=src.used
    )
