"""Render execution graphs to image files with matplotlib.

Layout: one column per thread (init leftmost), events stacked top-to-bottom
in index order.  Edges are color-coded per relation: program order gray,
reads-from green, modification order blue (dashed), RMW pairing red.
"""

from __future__ import annotations

from typing import Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
from matplotlib.lines import Line2D
from matplotlib.patches import FancyArrowPatch

from .exec_graph import EventId, ExecutionGraph

_EDGE_STYLE = {
    "po": dict(color="0.55", linestyle="-", zorder=1),
    "rf": dict(color="forestgreen", linestyle="-", zorder=3),
    "mo": dict(color="steelblue", linestyle="--", zorder=2),
    "rmw": dict(color="firebrick", linestyle="-", zorder=3),
}

_KIND_TEXT = {
    "read_na": "Rna",
    "read_rlx": "Rrlx",
    "read_acq": "Racq",
    "write_na": "Wna",
    "write_rlx": "Wrlx",
    "write_rel": "Wrel",
    "rmw_rlx": "RMWrlx",
    "rmw_rel": "RMWrel",
    "rmw_acq": "RMWacq",
    "rmw_acqrel": "RMWar",
    "fence_acq": "Facq",
    "fence_rel": "Frel",
}


def event_text(g: ExecutionGraph, e: EventId) -> str:
    lab = g.lab[e]
    if lab.pseudo is not None:
        base = lab.pseudo
        if lab.pseudo == "begin_atomic" and lab.spec_name:
            base += f":{lab.spec_name}"
        if lab.pseudo == "alloc":
            return f"{base}({lab.location})={lab.op.value}"
        return f"{base}({lab.location})"
    kind = _KIND_TEXT.get(lab.op.kind.value, lab.op.kind.value)
    if lab.op.kind.is_fence:
        return f"{kind}({lab.location})"
    if lab.op.kind.is_write:
        return f"{kind}({lab.location})={lab.op.value}"
    if lab.op.kind.is_rmw:
        return f"{kind}({lab.location}):{lab.result}->{lab.written_value}"
    return f"{kind}({lab.location})={lab.result}"


def _transitive_reduction(pairs: set) -> set:
    """Drop edges implied by two-step paths, to keep po arrows readable."""
    return {
        (a, b)
        for a, b in pairs
        if not any((a, c) in pairs and (c, b) in pairs for c in {x for x, _ in pairs})
    }


def render_graph(
    g: ExecutionGraph, path: str, title: Optional[str] = None
) -> None:
    threads = sorted(g.threads(), key=lambda t: (t != g.init_thread, t))
    col = {t: i for i, t in enumerate(threads)}
    row: dict[EventId, int] = {}
    for t in threads:
        for i, e in enumerate(g.thread_events(t)):
            row[e] = i
    depth = max(row.values(), default=0) + 1

    def xy(e: EventId) -> tuple[float, float]:
        return (col[e.thread] * 2.2, -row[e] * 1.2)

    fig, ax = plt.subplots(
        figsize=(1.0 + 2.0 * len(threads), 1.2 + 0.9 * depth)
    )
    ax.set_axis_off()
    for e in g.sorted_events():
        x, y = xy(e)
        ax.text(
            x,
            y,
            f"{e.thread}.{e.index}: {event_text(g, e)}",
            ha="center",
            va="center",
            fontsize=8,
            zorder=4,
            bbox=dict(boxstyle="round,pad=0.3", fc="white", ec="0.3", lw=0.8),
        )

    rels = {
        "po": _transitive_reduction(set(g.po)),
        "rf": set(g.rf),
        "mo": _transitive_reduction(set(g.mo)),
        "rmw": set(g.rmw),
    }
    for name, pairs in rels.items():
        style = _EDGE_STYLE[name]
        for a, b in sorted(pairs):
            arrow = FancyArrowPatch(
                xy(a),
                xy(b),
                arrowstyle="-|>",
                mutation_scale=10,
                shrinkA=16,
                shrinkB=16,
                connectionstyle="arc3,rad=0.12",
                lw=1.1,
                **style,
            )
            ax.add_patch(arrow)

    handles = [
        Line2D([], [], label=name, **{k: v for k, v in s.items() if k != "zorder"})
        for name, s in _EDGE_STYLE.items()
        if rels[name]
    ]
    if handles:
        ax.legend(handles=handles, loc="lower center", ncol=4, fontsize=7, frameon=False)
    if title:
        ax.set_title(title, fontsize=10)
    ax.relim()
    ax.autoscale_view()
    ax.margins(0.25)
    fig.savefig(path, bbox_inches="tight", dpi=130)
    plt.close(fig)
