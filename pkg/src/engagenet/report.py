"""Graphviz DOT export and markdown summaries."""

from __future__ import annotations

from collections import defaultdict
from typing import Sequence

from .bn.dag import sorted_arcs
from .bootstrap import ConsensusNetwork
from .engagement import EngagementMatrix
from .inference import CptSet, Query, QueryError, empirical_conditional, model_query
from .resources import ResourceId, ResourceKind

FILL_COLORS = {
    ResourceKind.QUIZ: "lightblue",
    ResourceKind.VIDEO: "palegreen",
    ResourceKind.LECTURE_NOTES: "orange",
    ResourceKind.SUBMISSION: "pink",
}
MIN_PENWIDTH = 0.5
MAX_PENWIDTH = 4.0


def penwidth(strength: float) -> float:
    return MIN_PENWIDTH + (MAX_PENWIDTH - MIN_PENWIDTH) * strength


def to_dot(consensus: ConsensusNetwork) -> str:
    """DOT digraph: one column per chapter, nodes coloured by resource kind,
    arc width proportional to bootstrap strength."""
    dag = consensus.dag
    lines = [
        "digraph engagement {",
        "  graph [rankdir=LR];",
        '  node [shape=ellipse, style=filled, fontname="Helvetica"];',
    ]
    by_chapter: dict[int, list[ResourceId]] = defaultdict(list)
    for v in dag.nodes:
        by_chapter[v.chapter].append(v)
    for chapter in sorted(by_chapter):
        members = sorted(by_chapter[chapter], key=ResourceId.sort_key)
        lines.append(f"  subgraph chapter_{chapter} {{")
        lines.append("    rank=same;")
        for v in members:
            lines.append(f'    "{v}" [fillcolor="{FILL_COLORS[v.kind]}"];')
        lines.append("  }")
    for s, t in sorted_arcs(dag.arcs):
        w = consensus.strengths.strength((s, t))
        lines.append(f'  "{s}" -> "{t}" [penwidth={penwidth(w):.2f}, label="{w:.2f}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def _fmt(p: float) -> str:
    return f"{p:.3f}"


def summary_report(
    consensus: ConsensusNetwork,
    cpts: CptSet,
    matrix: EngagementMatrix,
    queries: Sequence[Query] = (),
    excluded: Sequence[tuple[ResourceId, float]] = (),
    settings: dict | None = None,
) -> str:
    out = ["# Engagement network report", ""]
    if settings:
        out += ["## Settings", ""]
        out += [f"- {k}: {v}" for k, v in settings.items()]
        out.append("")

    out += ["## Excluded resources", ""]
    if excluded:
        out += ["| resource | access rate |", "|---|---|"]
        out += [f"| {r} | {_fmt(rate)} |" for r, rate in excluded]
    else:
        out.append("none")
    out.append("")

    out += ["## Consensus arcs", ""]
    arcs = sorted_arcs(consensus.dag.arcs)
    if arcs:
        out += ["| source | target | strength |", "|---|---|---|"]
        ranked = sorted(arcs, key=lambda a: -consensus.strengths.counts[a])
        out += [f"| {s} | {t} | {consensus.strengths.strength((s, t)):.2f} |" for s, t in ranked]
    else:
        out.append("none")
    out.append("")

    out += ["## Arcs dropped to break cycles", ""]
    if consensus.dropped_for_cycles:
        out += [
            f"- {s} -> {t} ({consensus.strengths.strength((s, t)):.2f})"
            for s, t in consensus.dropped_for_cycles
        ]
    else:
        out.append("none")
    out.append("")

    if queries:
        out += ["## Queries", "", "| query | model | empirical | support |", "|---|---|---|---|"]
        for q in queries:
            try:
                model = _fmt(model_query(consensus.dag, cpts, q))
            except QueryError as exc:
                model = f"n/a ({exc})"
            try:
                p, n = empirical_conditional(matrix, q)
                emp, support = _fmt(p), str(n)
            except (QueryError, KeyError):
                emp, support = "n/a", "0"
            cell = str(q).replace("|", "\\|")
            out.append(f"| {cell} | {model} | {emp} | {support} |")
        out.append("")
    return "\n".join(out)
