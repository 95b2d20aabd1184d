"""Command-line front end.

Subcommands:

- ``check FILE``      litmus verdict under a memory model (c20, yc20, xc20)
- ``enumerate FILE``  dump every consistent execution
- ``reach FILE --target G``  constructibility of a serialized target graph
- ``opsem FILE``      interleaving safety exploration
- ``arc``             the reference-counting case-study scorecard
- ``graph FILE``      verdicts on a serialized execution graph

Exit codes: 0 verdict computed; 1 property violated (racy, unsafe, or a
counterexample found); 2 usage or parse error; 3 bound exceeded.

``--output json`` emits a versioned JSON document (schema ``rmmlab/1``);
the default text output is line-delimited ``key: value`` pairs.  With
``--emit-graphs DIR`` every reported graph is written both as text and as a
rendered figure alongside it.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Optional

from .enumeration import (
    BoundExceeded,
    Bounds,
    check_litmus,
    enumerate_executions,
    postcondition_holds,
)
from .exec_graph import ExecutionGraph, GraphError, check_well_formed
from .lang import LangError, Program, parse_litmus
from .opsem import (
    GraphGuided,
    StepLabel,
    WitnessSearch,
    explore_safety,
    initial_configuration,
    step,
    thread_finished,
)
from .relations import check_consistent, derive_sw, find_data_races, has_porf_cycle
from .arc import ArcScenario, run_arc
from .viz import render_graph
from .xmm import xmm_reachable, ymm_reachable

SCHEMA = "rmmlab/1"

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_USAGE = 2
EXIT_BOUNDS = 3


class _CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _read_file(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise _CliError(f"cannot read {path}: {exc}", EXIT_USAGE) from exc


def _parse_program(path: str) -> Program:
    try:
        return parse_litmus(_read_file(path))
    except LangError as exc:
        raise _CliError(f"{path}: {exc}", EXIT_USAGE) from exc


def _parse_graph(path: str) -> ExecutionGraph:
    text = _read_file(path)
    try:
        if text.lstrip().startswith("{"):
            return ExecutionGraph.from_json(text)
        return ExecutionGraph.from_text(text)
    except (GraphError, ValueError, KeyError) as exc:
        raise _CliError(f"{path}: {exc}", EXIT_USAGE) from exc


def _bounds(args: argparse.Namespace) -> Bounds:
    return Bounds(max_events=args.max_events, require_enabled=True)


def _emit(args: argparse.Namespace, name: str, graphs) -> list[str]:
    """Write each graph as text plus a rendered figure; returns file names."""
    written: list[str] = []
    if not args.emit_graphs:
        return written
    os.makedirs(args.emit_graphs, exist_ok=True)
    for i, g in enumerate(graphs):
        base = os.path.join(args.emit_graphs, f"{name}_{i:03d}")
        with open(base + ".graph", "w", encoding="utf-8") as fh:
            fh.write(g.to_text())
        render_graph(g, base + ".png", title=f"{name} {i}")
        written.extend([base + ".graph", base + ".png"])
    return written


def _report(args: argparse.Namespace, command: str, payload: dict) -> None:
    if args.output == "json":
        print(json.dumps({"schema": SCHEMA, "command": command, **payload}, indent=2))
    else:
        for key, value in payload.items():
            if isinstance(value, (list, dict)):
                value = json.dumps(value)
            print(f"{key}: {value}")


# -- subcommands -------------------------------------------------------------------------


def _cmd_check(args: argparse.Namespace) -> int:
    program = _parse_program(args.file)
    bounds = _bounds(args)
    if args.model == "c20":
        verdict = check_litmus(program, bounds)
        payload = {
            "model": "c20",
            "observable": verdict.observable,
            "executions": verdict.executions,
        }
        witnesses = [verdict.witness.graph] if verdict.witness else []
    else:
        reach = ymm_reachable if args.model == "yc20" else xmm_reachable
        executions = enumerate_executions(program, bounds)
        candidates = [
            e for e in executions if postcondition_holds(program, e.registers)
        ]
        with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
            results = list(
                pool.map(
                    lambda e: reach(
                        program, e.graph, bounds, max_re_exec=args.max_re_exec
                    ),
                    candidates,
                )
            )
        constructible = [
            e.graph for e, r in zip(candidates, results) if r.constructible
        ]
        observable = bool(constructible)
        payload = {
            "model": args.model,
            "observable": observable,
            "verdict": "observable"
            if observable
            else f"unobservable(bounded: max_re_exec={args.max_re_exec})",
            "candidates": len(candidates),
            "constructible": len(constructible),
        }
        witnesses = constructible
    files = _emit(args, "witness", witnesses)
    if files:
        payload["emitted"] = files
    _report(args, "check", payload)
    return EXIT_OK


def _cmd_enumerate(args: argparse.Namespace) -> int:
    program = _parse_program(args.file)
    executions = enumerate_executions(program, _bounds(args))
    races = [find_data_races(e.graph) for e in executions]
    payload = {
        "executions": len(executions),
        "racy": sum(1 for r in races if not r.race_free),
        "registers": [e.registers for e in executions],
    }
    files = _emit(args, "execution", [e.graph for e in executions])
    if files:
        payload["emitted"] = files
    _report(args, "enumerate", payload)
    return EXIT_VIOLATION if payload["racy"] else EXIT_OK


def _cmd_reach(args: argparse.Namespace) -> int:
    program = _parse_program(args.file)
    target = _parse_graph(args.target)
    reach = ymm_reachable if args.model != "xc20" else xmm_reachable
    result = reach(program, target, _bounds(args), max_re_exec=args.max_re_exec)
    payload = result.to_dict()
    if result.verdict != "Constructible":
        payload["verdict"] = (
            f"{result.verdict}(max_re_exec={args.max_re_exec})"
        )
    _report(args, "reach", payload)
    return EXIT_OK


def _deterministic_trace(program: Program, max_steps: int = 400) -> list[StepLabel]:
    """One scheduler run (first enabled thread each step) for --trace."""
    gamma = initial_configuration(program)
    oracle = WitnessSearch()
    labels: list[StepLabel] = []
    for _ in range(max_steps):
        succs = step(gamma, oracle)
        if not succs:
            break
        gamma, lab = succs[0]
        labels.append(lab)
        if all(thread_finished(c) is not None for c in gamma.threads.values()):
            break
    return labels


def _cmd_opsem(args: argparse.Namespace) -> int:
    program = _parse_program(args.file)
    verdict = explore_safety(program, max_configs=args.max_configs)
    payload = verdict.to_dict()
    if args.trace:
        trace = (
            verdict.stuck_trace
            if verdict.stuck_trace is not None
            else _deterministic_trace(program)
        )
        payload["trace"] = [s.to_dict() for s in trace]
    _report(args, "opsem", payload)
    return EXIT_OK if verdict.safe else EXIT_VIOLATION


def _cmd_arc(args: argparse.Namespace) -> int:
    scorecard = run_arc(
        ArcScenario(clones=args.clones), model=args.model_arc
    )
    if args.output == "json":
        _report(args, "arc", scorecard.to_dict())
    else:
        print(scorecard.render())
    return EXIT_OK if scorecard.ok else EXIT_VIOLATION


def _cmd_graph(args: argparse.Namespace) -> int:
    g = _parse_graph(args.file)
    wf = check_well_formed(g)
    consistency = check_consistent(g)
    races = find_data_races(g)
    payload = {
        "events": len(g.events),
        "well_formed": wf.ok,
        "violations": [rule for rule, _ in wf.violations],
        "consistent": consistency.consistent,
        "reasons": consistency.to_dict()["reasons"],
        "porf_cycle": has_porf_cycle(g),
        "sw_empty": not derive_sw(g),
        "races": races.to_dict()["races"],
    }
    files = _emit(args, "graph", [g])
    if files:
        payload["emitted"] = files
    _report(args, "graph", payload)
    ok = wf.ok and consistency.consistent and races.race_free
    return EXIT_OK if ok else EXIT_VIOLATION


# -- argument parsing --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rmmlab",
        description="Relaxed-memory-model laboratory: litmus checking, "
        "execution enumeration, constructibility search, operational safety "
        "exploration, and the reference-counting case study.",
        epilog="Set RMMLAB_SEED to fix the seed of any randomized harness.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--output", choices=("text", "json"), default="text")
        p.add_argument("--max-events", type=int, default=16)
        p.add_argument("--emit-graphs", metavar="DIR", default=None)
        p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("check", help="litmus verdict under a memory model")
    p.add_argument("file")
    p.add_argument("--model", choices=("c20", "yc20", "xc20"), default="c20")
    p.add_argument("--max-re-exec", type=int, default=2)
    common(p)
    p.set_defaults(run=_cmd_check)

    p = sub.add_parser("enumerate", help="dump all consistent executions")
    p.add_argument("file")
    common(p)
    p.set_defaults(run=_cmd_enumerate)

    p = sub.add_parser("reach", help="constructibility of a target graph")
    p.add_argument("file")
    p.add_argument("--target", required=True, metavar="GRAPH")
    p.add_argument("--model", choices=("yc20", "xc20"), default="yc20")
    p.add_argument("--max-re-exec", type=int, default=2)
    common(p)
    p.set_defaults(run=_cmd_reach)

    p = sub.add_parser("opsem", help="interleaving safety exploration")
    p.add_argument("file")
    p.add_argument("--trace", action="store_true")
    p.add_argument("--max-configs", type=int, default=200_000)
    common(p)
    p.set_defaults(run=_cmd_opsem)

    p = sub.add_parser("arc", help="reference-counting case-study scorecard")
    p.add_argument("--clones", type=int, default=1)
    p.add_argument(
        "--model", dest="model_arc", choices=("c20", "yc20"), default="c20"
    )
    common(p)
    p.set_defaults(run=_cmd_arc)

    p = sub.add_parser("graph", help="verdicts on a serialized graph")
    p.add_argument("file")
    common(p)
    p.set_defaults(run=_cmd_graph)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    try:
        return args.run(args)
    except _CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except BoundExceeded as exc:
        print(f"bound exceeded: {exc}", file=sys.stderr)
        return EXIT_BOUNDS
    except (LangError, GraphError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
