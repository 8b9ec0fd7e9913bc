"""Bootstrap model averaging: arc strengths and the thresholded consensus DAG.

Every iteration draws its rows from an RNG stream keyed only by
``(seed, iteration)``, so results do not depend on how iterations are
scheduled across workers.
"""

from __future__ import annotations

import csv
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from .bn.dag import Arc, Dag, arc_key, sorted_arcs
from .bn.search import SearchParams, hill_climb_data
from .engagement import EngagementMatrix
from .resources import ResourceId

RESAMPLING_METHODS = ("bootstrap", "subsample")
# counts within this of threshold * iterations still pass ("at least")
_THRESHOLD_SLACK = 1e-9


class InvariantViolation(RuntimeError):
    """A learned structure broke acyclicity or the chapter constraint."""


def _rng(seed: int, iteration: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, iteration]))


def resample_indices(n: int, seed: int, iteration: int, method: str = "bootstrap") -> np.ndarray:
    if n < 1:
        raise ValueError("cannot resample an empty matrix")
    rng = _rng(seed, iteration)
    if method == "bootstrap":
        return rng.integers(0, n, size=n)
    if method == "subsample":
        return np.sort(rng.choice(n, size=max(1, n // 2), replace=False))
    raise ValueError(f"unknown resampling method {method!r}")


def resample_rows(
    matrix: EngagementMatrix, seed: int, iteration: int, method: str = "bootstrap"
) -> EngagementMatrix:
    """N rows drawn uniformly with replacement from the (seed, iteration) stream."""
    return matrix.take_rows(resample_indices(matrix.n_students, seed, iteration, method))


def iteration_seed(seed: int, iteration: int) -> int:
    """Seed for the search inside one iteration (only used by restarts)."""
    words = np.random.SeedSequence([seed, iteration, 1]).generate_state(2, dtype=np.uint32)
    return (int(words[0]) << 32) | int(words[1])


@dataclass(frozen=True)
class ArcStrengthTable:
    counts: Mapping[Arc, int]
    iterations: int

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise ValueError("iterations must be positive")
        for arc, c in self.counts.items():
            if not 0 <= c <= self.iterations:
                raise ValueError(f"count for {arc} outside [0, iterations]")

    def strength(self, arc: Arc) -> float:
        return self.counts.get(arc, 0) / self.iterations

    def __contains__(self, arc: Arc) -> bool:
        return arc in self.counts

    def ranked(self) -> list[tuple[Arc, float]]:
        """Arcs by descending strength, ties by name."""
        arcs = sorted(self.counts, key=lambda a: (-self.counts[a], arc_key(a)))
        return [(a, self.strength(a)) for a in arcs]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["source", "target", "strength"])
            for (s, t), value in self.ranked():
                w.writerow([s.name, t.name, repr(value)])

    @classmethod
    def from_networks(cls, networks: Sequence[Dag]) -> ArcStrengthTable:
        counts: Counter = Counter()
        for dag in networks:
            counts.update(dag.arcs)
        return cls(dict(counts), len(networks))


@dataclass(frozen=True)
class ConsensusNetwork:
    dag: Dag
    strengths: ArcStrengthTable
    threshold: float
    dropped_for_cycles: tuple[Arc, ...] = ()
    dropped_for_direction: tuple[Arc, ...] = ()

    def to_dict(self) -> dict:
        return {
            **self.dag.to_dict(),
            "threshold": self.threshold,
            "iterations": self.strengths.iterations,
            "strengths": {
                f"{s.name}->{t.name}": self.strengths.strength((s, t))
                for s, t in sorted_arcs(self.dag.arcs)
            },
            "dropped_for_cycles": [[s.name, t.name] for s, t in self.dropped_for_cycles],
            "dropped_for_direction": [[s.name, t.name] for s, t in self.dropped_for_direction],
        }


def _check_structure(dag: Dag) -> None:
    if not dag.is_tier_legal():
        bad = [f"{s}->{t}" for s, t in sorted_arcs(dag.arcs) if s.chapter > t.chapter]
        raise InvariantViolation(f"backward-chapter arcs learned: {', '.join(bad)}")


def _arcs_on_cycles(arcs: set[Arc]) -> list[Arc]:
    succ: dict = {}
    for s, t in arcs:
        succ.setdefault(s, []).append(t)

    def reaches(a, b) -> bool:
        seen, stack = set(), [a]
        while stack:
            v = stack.pop()
            if v == b:
                return True
            if v in seen:
                continue
            seen.add(v)
            stack.extend(succ.get(v, ()))
        return False

    return [(s, t) for s, t in arcs if reaches(t, s)]


def consensus_from_strengths(
    strengths: ArcStrengthTable, nodes: Sequence[ResourceId], threshold: float = 0.5
) -> ConsensusNetwork:
    """Keep arcs with strength >= threshold, then settle conflicts and cycles.

    Both directions of a pair retained: the lexicographically smaller
    (source, target) name pair wins. Remaining cycles: drop the weakest arc on
    any cycle (ties lexicographic) until acyclic.
    """
    if not 0 < threshold <= 1:
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")
    cut = threshold * strengths.iterations - _THRESHOLD_SLACK
    kept = {a for a, c in strengths.counts.items() if c >= cut}

    by_direction = []
    for s, t in sorted_arcs(kept):
        if (t, s) in kept and arc_key((t, s)) < arc_key((s, t)):
            by_direction.append((s, t))
    kept -= set(by_direction)

    by_cycle = []
    while True:
        cyc = _arcs_on_cycles(kept)
        if not cyc:
            break
        weakest = min(cyc, key=lambda a: (strengths.counts[a], arc_key(a)))
        kept.discard(weakest)
        by_cycle.append(weakest)

    dag = Dag(tuple(nodes), frozenset(kept))
    _check_structure(dag)
    return ConsensusNetwork(dag, strengths, threshold, tuple(by_cycle), tuple(by_direction))


_WORKER: dict = {}


def _init_worker(data, nodes, params, method):
    _WORKER.update(data=data, nodes=nodes, params=params, method=method)


def _fit_one(iteration: int) -> frozenset:
    data, nodes, params, method = (_WORKER[k] for k in ("data", "nodes", "params", "method"))
    rows = resample_indices(data.shape[0], params.seed, iteration, method)
    p = replace(params, seed=iteration_seed(params.seed, iteration))
    net = hill_climb_data(data[rows], nodes, p)
    return net.dag.arcs


def bootstrap_networks(
    matrix: EngagementMatrix,
    iterations: int = 100,
    params: SearchParams = SearchParams(),
    workers: int = 1,
    method: str = "bootstrap",
) -> list[Dag]:
    """One hill-climbing fit per resample, in iteration order."""
    if iterations < 1:
        raise ValueError("iterations must be positive")
    if matrix.n_students < 1:
        raise ValueError("cannot bootstrap an empty matrix")
    if method not in RESAMPLING_METHODS:
        raise ValueError(f"unknown resampling method {method!r}")
    nodes = matrix.resources
    init = (np.asarray(matrix.cells), nodes, params, method)
    if workers <= 1:
        _init_worker(*init)
        try:
            arcs = [_fit_one(i) for i in range(iterations)]
        finally:
            _WORKER.clear()
    else:
        with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker, initargs=init) as ex:
            arcs = list(ex.map(_fit_one, range(iterations), chunksize=max(1, iterations // (4 * workers))))
    nets = [Dag(nodes, a) for a in arcs]
    for dag in nets:
        _check_structure(dag)
    return nets


def bootstrap_learn(
    matrix: EngagementMatrix,
    iterations: int = 100,
    threshold: float = 0.5,
    params: SearchParams = SearchParams(),
    workers: int = 1,
    method: str = "bootstrap",
) -> ConsensusNetwork:
    if not 0 < threshold <= 1:
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")
    nets = bootstrap_networks(matrix, iterations, params, workers, method)
    return consensus_from_strengths(ArcStrengthTable.from_networks(nets), matrix.resources, threshold)


def read_strengths_csv(path, iterations: int) -> ArcStrengthTable:
    counts = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            arc = (ResourceId.parse(row["source"]), ResourceId.parse(row["target"]))
            counts[arc] = round(float(row["strength"]) * iterations)
    return ArcStrengthTable(counts, iterations)


def consensus_from_dict(doc: dict, strengths: ArcStrengthTable) -> ConsensusNetwork:
    def arcs(key):
        return tuple((ResourceId.parse(s), ResourceId.parse(t)) for s, t in doc.get(key, []))

    return ConsensusNetwork(
        Dag.from_dict(doc),
        strengths,
        float(doc["threshold"]),
        arcs("dropped_for_cycles"),
        arcs("dropped_for_direction"),
    )
