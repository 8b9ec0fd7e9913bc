"""Greedy hill climbing over tier-constrained DAGs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..engagement import EngagementMatrix
from .dag import Dag, allowed_arc
from .score import FamilyScorer, ScoredNetwork

# Moves whose gains differ by less than this are ties, settled by move order.
TIE_TOLERANCE = 1e-9

ADD, DELETE, REVERSE = 0, 1, 2
UINT64_MAX = 2**64 - 1


@dataclass(frozen=True)
class SearchParams:
    epsilon: float = 1e-9
    max_iters: int = 10_000
    restarts: int = 0
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.restarts < 0:
            raise ValueError("restarts must be >= 0")
        if not 0 <= self.seed <= UINT64_MAX:
            raise ValueError("seed must be an unsigned 64-bit integer")


def _closure(adj: np.ndarray) -> np.ndarray:
    reach = adj.copy()
    for k in range(reach.shape[0]):
        reach |= np.outer(reach[:, k], reach[k, :])
    return reach


class _Climber:
    """Mutable search state; ``gain[i, j]`` is the score change from toggling
    arc i->j in node j's parent set."""

    def __init__(self, scorer: FamilyScorer, allowed: np.ndarray, params: SearchParams):
        self.scorer = scorer
        self.allowed = allowed
        self.params = params
        n = allowed.shape[0]
        self.n = n
        self.adj = np.zeros((n, n), dtype=bool)
        self.reach = np.zeros((n, n), dtype=bool)
        self.masks = [0] * n
        self.local = np.zeros(n)
        self.gain = np.full((n, n), -np.inf)
        self._sources = [np.flatnonzero(allowed[:, j]) for j in range(n)]
        for j in range(n):
            self._refresh(j)

    def _refresh(self, j: int) -> None:
        local = self.scorer.local
        base = local(j, self.masks[j])
        self.local[j] = base
        m = self.masks[j]
        col = self.gain[:, j]
        for i in self._sources[j]:
            col[i] = local(j, m ^ (1 << int(i))) - base

    def add(self, i: int, j: int) -> None:
        self.adj[i, j] = True
        self.masks[j] |= 1 << i
        src = self.reach[:, i].copy()
        src[i] = True
        dst = self.reach[j, :].copy()
        dst[j] = True
        self.reach |= np.outer(src, dst)
        self._refresh(j)

    def delete(self, i: int, j: int) -> None:
        self.adj[i, j] = False
        self.masks[j] &= ~(1 << i)
        self.reach = _closure(self.adj)
        self._refresh(j)

    def reverse(self, i: int, j: int) -> None:
        self.adj[i, j] = False
        self.adj[j, i] = True
        self.masks[j] &= ~(1 << i)
        self.masks[i] |= 1 << j
        self.reach = _closure(self.adj)
        self._refresh(j)
        self._refresh(i)

    def best_move(self):
        adj, gain = self.adj, self.gain
        add_ok = self.allowed & ~adj & ~adj.T & ~self.reach.T
        # i->j reversible iff j->i is allowed and no other i~>j path exists
        rev_ok = adj & self.allowed.T
        if rev_ok.any():
            rev_ok &= (adj.astype(np.int32) @ self.reach.astype(np.int32)) == 0
        rev_gain = gain + gain.T
        options = ((ADD, add_ok, gain), (DELETE, adj, gain), (REVERSE, rev_ok, rev_gain))
        best = -np.inf
        for _, ok, g in options:
            if ok.any():
                best = max(best, float(g[ok].max()))
        if not best > self.params.epsilon:
            return None
        for kind, ok, g in options:
            hits = np.argwhere(ok & (g >= best - TIE_TOLERANCE))
            if len(hits):
                i, j = hits[0]
                return kind, int(i), int(j)
        return None

    def climb(self) -> None:
        for _ in range(self.params.max_iters):
            move = self.best_move()
            if move is None:
                return
            kind, i, j = move
            if kind == ADD:
                self.add(i, j)
            elif kind == DELETE:
                self.delete(i, j)
            else:
                self.reverse(i, j)

    def perturb(self, rng: np.random.Generator, n_arcs: int) -> None:
        for _ in range(n_arcs):
            ok = self.allowed & ~self.adj & ~self.adj.T & ~self.reach.T
            cand = np.argwhere(ok)
            if not len(cand):
                return
            i, j = cand[rng.integers(len(cand))]
            self.add(int(i), int(j))

    def total(self) -> float:
        return float(sum(self.local.tolist()))


def _allowed_matrix(nodes) -> np.ndarray:
    n = len(nodes)
    allowed = np.zeros((n, n), dtype=bool)
    for i, s in enumerate(nodes):
        for j, t in enumerate(nodes):
            allowed[i, j] = allowed_arc(s, t)
    return allowed


def hill_climb_data(data: np.ndarray, nodes, params: SearchParams = SearchParams()) -> ScoredNetwork:
    """Hill climbing on a raw 0/1 array whose columns are ``nodes``."""
    nodes = tuple(nodes)
    if len(nodes) < 2:
        raise ValueError("hill climbing needs at least 2 nodes")
    scorer = FamilyScorer(data)
    allowed = _allowed_matrix(nodes)

    best = _Climber(scorer, allowed, params)
    best.climb()
    for r in range(1, params.restarts + 1):
        rng = np.random.default_rng([params.seed, r])
        c = _Climber(scorer, allowed, params)
        c.perturb(rng, max(1, len(nodes) // 2))
        c.climb()
        if c.total() > best.total():
            best = c

    arcs = frozenset((nodes[i], nodes[j]) for i, j in np.argwhere(best.adj))
    per_node = {v: float(best.local[k]) for k, v in enumerate(nodes)}
    return ScoredNetwork(Dag(nodes, arcs), sum(per_node.values()), per_node)


def hill_climb(matrix: EngagementMatrix, params: SearchParams = SearchParams()) -> ScoredNetwork:
    """Greedy add/delete/reverse search from the empty graph.

    Each step applies the single best legal move (acyclic and stationary or
    forward in chapter). Ties go to add < delete < reverse, then source
    index, then target index. Stops when no move gains more than
    ``params.epsilon`` or after ``params.max_iters`` moves.
    """
    if matrix.n_students < 1:
        raise ValueError("hill climbing needs at least one student")
    return hill_climb_data(matrix.cells, matrix.resources, params)
