"""Conditional probability tables and conditional-engagement queries."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .bn.dag import Dag
from .engagement import EngagementMatrix
from .resources import ResourceId

MAX_QUERY_VARIABLES = 25
_BLOCK = 1 << 16


class QueryError(ValueError):
    pass


class ZeroProbabilityEvidence(QueryError):
    pass


class ZeroSupport(QueryError):
    pass


@dataclass(frozen=True)
class NodeCpt:
    """P(node = 1 | parent configuration).

    Row ``c`` of ``p1`` is the configuration whose bit ``i`` is the value of
    ``parents[i]``.
    """

    parents: tuple[ResourceId, ...]
    p1: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.p1) != 1 << len(self.parents):
            raise ValueError(f"expected {1 << len(self.parents)} rows, got {len(self.p1)}")
        if any(not 0.0 <= p <= 1.0 for p in self.p1):
            raise ValueError("probabilities must lie in [0, 1]")

    def row(self, assignment: Mapping[ResourceId, int]) -> int:
        return sum(int(assignment[p]) << i for i, p in enumerate(self.parents))

    def prob(self, value: int, assignment: Mapping[ResourceId, int]) -> float:
        p = self.p1[self.row(assignment)]
        return p if value else 1.0 - p


@dataclass(frozen=True)
class CptSet:
    tables: Mapping[ResourceId, NodeCpt]
    alpha: float = 1.0
    # (node, row) pairs estimated from zero observations under alpha = 0
    flagged: frozenset = field(default_factory=frozenset)

    def __getitem__(self, node: ResourceId) -> NodeCpt:
        return self.tables[node]

    def check_against(self, dag: Dag) -> None:
        for v in dag.nodes:
            if v not in self.tables:
                raise ValueError(f"no CPT for {v}")
            if set(self.tables[v].parents) != set(dag.parents(v)):
                raise ValueError(f"CPT parents of {v} disagree with the graph")

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "nodes": {
                v.name: {"parents": [p.name for p in t.parents], "p1": list(t.p1)}
                for v, t in self.tables.items()
            },
        }

    @classmethod
    def from_dict(cls, doc: dict) -> CptSet:
        tables = {
            ResourceId.parse(name): NodeCpt(
                tuple(ResourceId.parse(p) for p in entry["parents"]),
                tuple(float(x) for x in entry["p1"]),
            )
            for name, entry in doc["nodes"].items()
        }
        return cls(tables, float(doc.get("alpha", 1.0)))


def fit_cpts(matrix: EngagementMatrix, dag: Dag, alpha: float = 1.0) -> CptSet:
    """P(v=1|cfg) = (N_cfg,1 + alpha) / (N_cfg + 2 alpha); 0/0 gives 0.5, flagged."""
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    tables = {}
    flagged = set()
    for v in dag.nodes:
        parents = dag.parents(v)
        x = matrix.column(v).astype(np.int64)
        cfg = np.zeros_like(x)
        for i, p in enumerate(parents):
            cfg |= matrix.column(p).astype(np.int64) << i
        q = 1 << len(parents)
        ones = np.bincount(cfg, weights=x, minlength=q)
        totals = np.bincount(cfg, minlength=q)
        p1 = []
        for c in range(q):
            num = ones[c] + alpha
            den = totals[c] + 2 * alpha
            if den == 0:
                p1.append(0.5)
                flagged.add((v, c))
            else:
                p1.append(float(num / den))
        tables[v] = NodeCpt(parents, tuple(p1))
    return CptSet(tables, alpha, frozenset(flagged))


@dataclass(frozen=True)
class Query:
    target: ResourceId
    value: int = 1
    evidence: Mapping[ResourceId, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        ev = dict(self.evidence)
        if self.target in ev:
            raise QueryError(f"{self.target} appears as both target and evidence")
        if self.value not in (0, 1) or any(v not in (0, 1) for v in ev.values()):
            raise QueryError("query values must be 0 or 1")
        object.__setattr__(self, "evidence", ev)

    def resources(self) -> list[ResourceId]:
        return [self.target, *self.evidence]

    def __str__(self) -> str:
        head = f"P({self.target}={self.value}"
        if self.evidence:
            head += " | " + ", ".join(f"{r}={v}" for r, v in self.evidence.items())
        return head + ")"


_QUERY_RE = re.compile(r"^P\((?P<target>[^|)]*)(?:\|(?P<evidence>[^)]*))?\)$")


def _assignment(text: str) -> tuple[ResourceId, int]:
    name, sep, value = text.partition("=")
    if not sep or value not in ("0", "1"):
        raise QueryError(f"expected name=0 or name=1, got {text!r}")
    try:
        return ResourceId.parse(name), int(value)
    except ValueError as exc:
        raise QueryError(str(exc)) from exc


def parse_query(text: str) -> Query:
    """Parse ``P(sub_6=1 | sub_5=1, vid_7=1)``; whitespace is ignored."""
    compact = re.sub(r"\s+", "", text)
    m = _QUERY_RE.match(compact)
    if m is None:
        raise QueryError(f"cannot parse query {text!r}")
    target, value = _assignment(m.group("target"))
    evidence = {}
    if m.group("evidence") is not None:
        for part in m.group("evidence").split(","):
            r, v = _assignment(part)
            if r in evidence:
                raise QueryError(f"{r} given twice in evidence")
            evidence[r] = v
    return Query(target, value, evidence)


def model_query(dag: Dag, cpts: CptSet, q: Query) -> float:
    """Exact P(target | evidence) by enumeration over the ancestral set."""
    for r in q.resources():
        if r not in dag.nodes:
            raise QueryError(f"{r} is not a node of the network")
    relevant = dag.ancestors(q.resources())
    if len(relevant) > MAX_QUERY_VARIABLES:
        raise QueryError(
            f"query touches {len(relevant)} variables (limit {MAX_QUERY_VARIABLES})"
        )
    order = [v for v in dag.topological_order() if v in relevant]
    free = [v for v in order if v not in q.evidence]
    pos = {v: i for i, v in enumerate(free)}
    n_free = len(free)
    total = 1 << n_free

    joint_e = 0.0
    joint_te = 0.0
    for start in range(0, total, _BLOCK):
        idx = np.arange(start, min(total, start + _BLOCK), dtype=np.int64)
        values = {}
        for v in order:
            if v in q.evidence:
                values[v] = np.full(idx.shape, q.evidence[v], dtype=np.int64)
            else:
                values[v] = (idx >> pos[v]) & 1
        weight = np.ones(idx.shape)
        for v in order:
            t = cpts[v]
            row = np.zeros(idx.shape, dtype=np.int64)
            for i, p in enumerate(t.parents):
                row |= values[p] << i
            p1 = np.asarray(t.p1)[row]
            weight *= np.where(values[v] == 1, p1, 1.0 - p1)
        joint_e += float(weight.sum())
        joint_te += float(weight[values[q.target] == q.value].sum())
    if joint_e == 0.0:
        raise ZeroProbabilityEvidence(f"evidence of {q} has probability 0 under the model")
    return joint_te / joint_e


def empirical_conditional(matrix: EngagementMatrix, q: Query) -> tuple[float, int]:
    """Observed frequency of the target among students matching the evidence."""
    rows = np.ones(matrix.n_students, dtype=bool)
    for r, v in q.evidence.items():
        rows &= matrix.column(r) == v
    support = int(rows.sum())
    if support == 0:
        raise ZeroSupport(f"no student matches the evidence of {q}")
    hits = int((matrix.column(q.target)[rows] == q.value).sum())
    return hits / support, support
