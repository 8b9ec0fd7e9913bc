from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable

from ..resources import ResourceId

Arc = tuple[ResourceId, ResourceId]


class CycleError(ValueError):
    pass


def allowed_arc(source: ResourceId, target: ResourceId) -> bool:
    """Stationary or forward arcs only: source chapter <= target chapter."""
    if source == target:
        return False
    return source.chapter <= target.chapter


def arc_key(arc: Arc) -> tuple[str, str]:
    return (arc[0].name, arc[1].name)


def sorted_arcs(arcs: Iterable[Arc]) -> list[Arc]:
    return sorted(arcs, key=arc_key)


def topological_sort(nodes, arcs) -> list | None:
    """Kahn's algorithm, ready nodes taken in ``nodes`` order. None if cyclic."""
    pos = {v: i for i, v in enumerate(nodes)}
    indeg = {v: 0 for v in nodes}
    children: dict = {v: [] for v in nodes}
    for s, t in arcs:
        indeg[t] += 1
        children[s].append(t)
    ready = sorted((v for v in nodes if indeg[v] == 0), key=pos.__getitem__)
    out = []
    while ready:
        v = ready.pop(0)
        out.append(v)
        for c in children[v]:
            indeg[c] -= 1
            if indeg[c] == 0:
                ready.append(c)
        ready.sort(key=pos.__getitem__)
    return out if len(out) == len(pos) else None


@dataclass(frozen=True)
class Dag:
    nodes: tuple[ResourceId, ...]
    arcs: frozenset[Arc] = frozenset()

    def __post_init__(self) -> None:
        nodes = tuple(self.nodes)
        arcs = frozenset((s, t) for s, t in self.arcs)
        if len(set(nodes)) != len(nodes):
            raise ValueError("duplicate nodes")
        known = set(nodes)
        for s, t in arcs:
            if s == t:
                raise ValueError(f"self-arc on {s}")
            if s not in known or t not in known:
                raise ValueError(f"arc {s}->{t} references a node outside the graph")
        if topological_sort(nodes, arcs) is None:
            raise CycleError("arcs contain a directed cycle")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "arcs", arcs)

    def parents(self, node: ResourceId) -> tuple[ResourceId, ...]:
        ps = {s for s, t in self.arcs if t == node}
        return tuple(v for v in self.nodes if v in ps)

    def children(self, node: ResourceId) -> tuple[ResourceId, ...]:
        cs = {t for s, t in self.arcs if s == node}
        return tuple(v for v in self.nodes if v in cs)

    def topological_order(self) -> list[ResourceId]:
        return topological_sort(self.nodes, self.arcs)

    def ancestors(self, targets: Iterable[ResourceId]) -> set[ResourceId]:
        """``targets`` together with all their ancestors."""
        parents = {v: [] for v in self.nodes}
        for s, t in self.arcs:
            parents[t].append(s)
        seen = set()
        stack = list(targets)
        while stack:
            v = stack.pop()
            if v in seen:
                continue
            seen.add(v)
            stack.extend(parents[v])
        return seen

    def is_tier_legal(self) -> bool:
        return all(allowed_arc(s, t) for s, t in self.arcs)

    def with_nodes(self, nodes: Iterable[ResourceId]) -> Dag:
        """Restrict to ``nodes`` (in the given order), dropping arcs that leave it."""
        nodes = tuple(nodes)
        keep = set(nodes)
        return Dag(nodes, frozenset(a for a in self.arcs if a[0] in keep and a[1] in keep))

    def to_dict(self) -> dict:
        return {
            "nodes": [v.name for v in self.nodes],
            "arcs": [[s.name, t.name] for s, t in sorted_arcs(self.arcs)],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> Dag:
        nodes = tuple(ResourceId.parse(n) for n in doc["nodes"])
        arcs = frozenset((ResourceId.parse(s), ResourceId.parse(t)) for s, t in doc["arcs"])
        return cls(nodes, arcs)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))
