"""Bit-exact serialization round-trips over the bundled corpus."""

from __future__ import annotations

import pytest

from rmmlab.exec_graph import ExecutionGraph
from rmmlab.lang import parse_litmus, print_program
from rmmlab.tied import parse_atomic_spec, print_atomic_spec

from conftest import GOLDENS, LITMUS


@pytest.mark.parametrize("name", sorted(p.name for p in LITMUS.glob("*.lit")))
def test_litmus_golden_round_trip(name):
    golden = (GOLDENS / (name + ".golden")).read_text(encoding="utf-8")
    parsed = parse_litmus((LITMUS / name).read_text(encoding="utf-8"))
    assert print_program(parsed) == golden
    assert print_program(parse_litmus(golden)) == golden


@pytest.mark.parametrize("name", sorted(p.name for p in LITMUS.glob("*.graph")))
def test_graph_text_round_trip_bit_exact(name):
    text = (LITMUS / name).read_text(encoding="utf-8")
    g = ExecutionGraph.from_text(text)
    assert g.to_text() == text
    assert ExecutionGraph.from_json(g.to_json()).to_text() == text


@pytest.mark.parametrize("name", sorted(p.name for p in LITMUS.glob("*.spec")))
def test_spec_round_trip_bit_exact(name):
    text = (LITMUS / name).read_text(encoding="utf-8")
    body = text.split("{", 1)[1].rsplit("}", 1)[0]
    spec = parse_atomic_spec(name.split(".")[0], body)
    assert print_atomic_spec(spec) + "\n" == text
