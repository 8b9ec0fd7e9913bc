"""Brute-force structure search for tiny instances (validation oracle)."""

from __future__ import annotations

import itertools
from typing import Iterator, Sequence

from ..engagement import EngagementMatrix
from ..resources import ResourceId
from .dag import Dag, allowed_arc, arc_key, sorted_arcs, topological_sort
from .score import FamilyScorer, ScoredNetwork, score_with
from .search import TIE_TOLERANCE

MAX_ENUM_NODES = 5


def _guard(nodes: Sequence[ResourceId]) -> None:
    if len(nodes) > MAX_ENUM_NODES:
        raise ValueError(f"enumeration limited to {MAX_ENUM_NODES} nodes, got {len(nodes)}")
    if len(set(nodes)) != len(nodes):
        raise ValueError("duplicate nodes")


def enumerate_dags(nodes: Sequence[ResourceId]) -> Iterator[Dag]:
    """Every acyclic, tier-legal graph over ``nodes``, each exactly once."""
    nodes = tuple(nodes)
    _guard(nodes)
    # per unordered pair: no arc, or one of the legal directions
    choices = []
    for a, b in itertools.combinations(nodes, 2):
        opts = [None]
        if allowed_arc(a, b):
            opts.append((a, b))
        if allowed_arc(b, a):
            opts.append((b, a))
        choices.append(opts)
    for combo in itertools.product(*choices):
        arcs = [arc for arc in combo if arc is not None]
        if topological_sort(nodes, arcs) is not None:
            yield Dag(nodes, frozenset(arcs))


def exhaustive_best(matrix: EngagementMatrix, nodes: Sequence[ResourceId]) -> ScoredNetwork:
    """Globally BIC-optimal DAG; ties go to fewer arcs, then lexicographic arcs."""
    nodes = tuple(nodes)
    _guard(nodes)
    if matrix.n_students < 1:
        raise ValueError("need at least one student")
    columns = {v: matrix.index(v) for v in nodes}
    scorer = FamilyScorer(matrix.cells)
    scored = [score_with(scorer, dag, columns) for dag in enumerate_dags(nodes)]
    top = max(s.score for s in scored)
    near = [s for s in scored if s.score >= top - TIE_TOLERANCE]
    return min(near, key=lambda s: (len(s.dag.arcs), [arc_key(a) for a in sorted_arcs(s.dag.arcs)]))
