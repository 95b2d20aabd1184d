"""rmmlab: a desk-scale laboratory for relaxed memory models.

The package covers five layers:

- execution graphs with program order, reads-from, modification order and the
  RMW pairing relation, plus derived relations (synchronizes-with,
  happens-before, extended coherence) and the consistency/race checks
  (``exec_graph``, ``relations``);
- a loop-free concurrent language with a litmus-test surface syntax and
  exhaustive enumeration of a program's consistent executions
  (``lang``, ``enumeration``);
- Execute/Re-Execute/Guided-step constructibility search and grounding checks
  (``xmm``);
- tied-resource atomic specifications over cancellative commutative monoids
  with the bounded consistency and sufficiency judgments (``tied``);
- an interleaving operational semantics with safety exploration and
  graph-guided replay (``opsem``), and the reference-counting case study
  built on all of the above (``arc``).
"""

from __future__ import annotations

from .arc import (
    ArcScenario,
    ArcScorecard,
    ArcSufficiencyReport,
    DecrementLemmaReport,
    FenceLemmaReport,
    arc_source,
    build_arc_program,
    check_arc_sufficiency,
    check_lemma_decrement,
    check_lemma_fence,
    run_arc,
)
from .enumeration import (
    BoundExceeded,
    Bounds,
    Execution,
    LitmusVerdict,
    check_litmus,
    count_races,
    enumerate_executions,
)
from .exec_graph import (
    EventId,
    ExecutionGraph,
    GraphBuilder,
    GraphError,
    Label,
    Operation,
    OpKind,
    ParseError as GraphParseError,
    UpdateFn,
    add,
    check_well_formed,
    setv,
    to_high_level,
    to_low_level,
)
from .lang import (
    LangError,
    ParseError,
    Program,
    parse_litmus,
    print_program,
    unroll_thread,
)
from .opsem import (
    Configuration,
    GraphGuided,
    SafetyVerdict,
    WitnessSearch,
    config_corresponds,
    explore_safety,
    initial_configuration,
    replay_prefix,
)
from .relations import (
    ConsistencyVerdict,
    RaceReport,
    check_consistent,
    derive_all,
    derive_eco,
    derive_hb,
    derive_sw,
    find_data_races,
    has_porf_cycle,
)
from .tied import (
    AtomicSpec,
    ConsistencyResult,
    SufficiencyResult,
    arc_spec,
    check_consistent_resource,
    check_grounding_consistent,
    check_sufficiency,
    parse_atomic_spec,
    print_atomic_spec,
)
from .xmm import (
    GroundingOrder,
    Reachability,
    ReExecutePlan,
    check_grounded,
    check_weakly_grounded,
    xmm_reachable,
    ymm_reachable,
)

__version__ = "0.1.0"

__all__ = [
    "ArcScenario",
    "ArcScorecard",
    "ArcSufficiencyReport",
    "AtomicSpec",
    "BoundExceeded",
    "Bounds",
    "Configuration",
    "ConsistencyResult",
    "ConsistencyVerdict",
    "DecrementLemmaReport",
    "EventId",
    "Execution",
    "ExecutionGraph",
    "FenceLemmaReport",
    "GraphBuilder",
    "GraphError",
    "GraphGuided",
    "GraphParseError",
    "GroundingOrder",
    "Label",
    "LangError",
    "LitmusVerdict",
    "Operation",
    "OpKind",
    "ParseError",
    "Program",
    "RaceReport",
    "Reachability",
    "ReExecutePlan",
    "SafetyVerdict",
    "SufficiencyResult",
    "UpdateFn",
    "WitnessSearch",
    "add",
    "arc_source",
    "arc_spec",
    "build_arc_program",
    "check_arc_sufficiency",
    "check_consistent",
    "check_consistent_resource",
    "check_grounded",
    "check_grounding_consistent",
    "check_lemma_decrement",
    "check_lemma_fence",
    "check_litmus",
    "check_sufficiency",
    "check_weakly_grounded",
    "check_well_formed",
    "config_corresponds",
    "count_races",
    "derive_all",
    "derive_eco",
    "derive_hb",
    "derive_sw",
    "enumerate_executions",
    "explore_safety",
    "find_data_races",
    "has_porf_cycle",
    "initial_configuration",
    "parse_atomic_spec",
    "parse_litmus",
    "print_atomic_spec",
    "print_program",
    "replay_prefix",
    "run_arc",
    "setv",
    "to_high_level",
    "to_low_level",
    "unroll_thread",
    "xmm_reachable",
    "ymm_reachable",
]
