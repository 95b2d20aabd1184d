from __future__ import annotations

import os
import pathlib
import random

import pytest

from rmmlab.enumeration import enumerate_executions
from rmmlab.lang import parse_litmus

ROOT = pathlib.Path(__file__).resolve().parent.parent
LITMUS = ROOT / "litmus"
GOLDENS = LITMUS / "goldens"

SEED = int(os.environ.get("RMMLAB_SEED", "20230823"))


@pytest.fixture
def rng() -> random.Random:
    return random.Random(SEED)


def read_litmus(name: str) -> str:
    return (LITMUS / name).read_text(encoding="utf-8")


def random_straightline_program(rng: random.Random) -> str:
    """A small random program over two shared locations with mixed access
    modes; every consistent execution of it is a well-formed graph with at
    most 12 events."""
    ops = []
    for loc in ("X", "Y"):
        ops += [
            f"W_rlx({loc}, {rng.randint(1, 2)})",
            f"W_rel({loc}, {rng.randint(1, 2)})",
            f"let r{{n}} = R_rlx({loc}) in r{{n}}",
            f"let r{{n}} = R_acq({loc}) in r{{n}}",
            f"FAA_rlx({loc}, 1)",
            f"fence_acq({loc})",
        ]
    threads = []
    counter = 0
    for _ in range(rng.randint(1, 3)):
        body = []
        for _ in range(rng.randint(1, 3)):
            stmt = rng.choice(ops)
            if "{n}" in stmt:
                stmt = stmt.replace("{n}", str(counter))
                counter += 1
            body.append(stmt)
        threads.append("thread {\n  " + ";\n  ".join(body) + "\n}")
    return "\n".join(threads) + "\n"


def random_executions(rng: random.Random, programs: int = 12, cap: int = 40):
    """Consistent executions of random programs, up to ``cap`` graphs."""
    out = []
    while len(out) < cap and programs > 0:
        programs -= 1
        prog = parse_litmus(random_straightline_program(rng))
        for e in enumerate_executions(prog):
            if len(e.graph.events) <= 12:
                out.append(e.graph)
            if len(out) >= cap:
                break
    return out
