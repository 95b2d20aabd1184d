from __future__ import annotations

import json

import pytest

from rmmlab.cli import main

from conftest import LITMUS


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_check_c20_observable(capsys):
    code, out, _ = run(capsys, "check", str(LITMUS / "lb.lit"))
    assert code == 0
    assert "observable: True" in out


def test_check_yc20_json_schema(capsys):
    code, out, _ = run(
        capsys, "check", str(LITMUS / "lb.lit"), "--model", "yc20", "--output", "json"
    )
    assert code == 0
    doc = json.loads(out)
    assert doc["schema"] == "rmmlab/1"
    assert doc["command"] == "check"
    assert doc["observable"] is True


def test_check_yc20_bounded_unobservable_annotation(capsys):
    code, out, _ = run(
        capsys, "check", str(LITMUS / "lbd.lit"), "--model", "yc20", "--max-re-exec", "3"
    )
    assert code == 0
    assert "unobservable(bounded: max_re_exec=3)" in out


def test_check_jobs_deterministic(capsys):
    outs = []
    for jobs in ("1", "4"):
        code, out, _ = run(
            capsys,
            "check",
            str(LITMUS / "lbf.lit"),
            "--model",
            "yc20",
            "--jobs",
            jobs,
            "--output",
            "json",
        )
        assert code == 0
        outs.append(out)
    assert outs[0] == outs[1]


def test_missing_file_exit_2(capsys):
    code, _, err = run(capsys, "check", "nosuch.lit")
    assert code == 2 and "nosuch.lit" in err


def test_parse_error_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.lit"
    bad.write_text("thread { let = }")
    code, _, err = run(capsys, "check", str(bad))
    assert code == 2


def test_bound_exceeded_exit_3(capsys):
    code, _, err = run(capsys, "check", str(LITMUS / "lb.lit"), "--max-events", "2")
    assert code == 3 and "bound exceeded" in err


def test_usage_error_exit_2(capsys):
    assert main(["check"]) == 2
    assert main(["frobnicate"]) == 2


def test_enumerate_emits_graphs_and_figures(tmp_path, capsys):
    out_dir = tmp_path / "figs"
    code, out, _ = run(
        capsys,
        "enumerate",
        str(LITMUS / "lb.lit"),
        "--emit-graphs",
        str(out_dir),
        "--output",
        "json",
    )
    assert code == 0
    doc = json.loads(out)
    assert doc["executions"] == 4 and doc["racy"] == 0
    graphs = sorted(out_dir.glob("*.graph"))
    figures = sorted(out_dir.glob("*.png"))
    assert len(graphs) == 4 and len(figures) == 4
    assert all(p.stat().st_size > 0 for p in figures)


def test_enumerate_racy_exit_1(tmp_path, capsys):
    racy = tmp_path / "racy.lit"
    racy.write_text("thread { [X] := 1 }\nthread { [X] := 2 }\n")
    code, out, _ = run(capsys, "enumerate", str(racy))
    assert code == 1


def test_reach_constructible(capsys):
    code, out, _ = run(
        capsys,
        "reach",
        str(LITMUS / "lb.lit"),
        "--target",
        str(LITMUS / "lb_witness.graph"),
    )
    assert code == 0 and "Constructible" in out


def test_opsem_safe_and_trace(capsys):
    code, out, _ = run(
        capsys, "opsem", str(LITMUS / "arc1.lit"), "--trace", "--output", "json"
    )
    assert code == 0
    doc = json.loads(out)
    assert doc["safe"] is True
    assert doc["trace"] and all("thread" in s and "rule" in s for s in doc["trace"])


def test_opsem_unsafe_exit_1(tmp_path, capsys):
    bad = tmp_path / "uaf.lit"
    bad.write_text("thread { let a = cons(1) in free(a); free(a) }\n")
    code, out, _ = run(capsys, "opsem", str(bad))
    assert code == 1
    assert "false" in out.lower()


def test_arc_scorecard_text_and_json(capsys):
    code, out, _ = run(capsys, "arc", "--clones", "0")
    assert code == 0 and "verdict: ok" in out
    code, out, _ = run(capsys, "arc", "--clones", "0", "--output", "json")
    assert code == 0
    doc = json.loads(out)
    assert doc["ok"] is True and doc["clones"] == 0


def test_graph_verdicts(capsys):
    code, out, _ = run(capsys, "graph", str(LITMUS / "lb_witness.graph"))
    assert code == 0
    assert "well_formed: True" in out and "porf_cycle: True" in out


def test_graph_inconsistent_exit_1(tmp_path, capsys):
    text = (LITMUS / "lb_witness.graph").read_text()
    cut = tmp_path / "cut.graph"
    cut.write_text("\n".join(l for l in text.splitlines() if not l.startswith("rf")))
    code, out, _ = run(capsys, "graph", str(cut))
    assert code == 1
    assert "consistent: False" in out
