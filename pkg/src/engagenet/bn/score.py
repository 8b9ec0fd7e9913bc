"""BIC scoring for binary Bayesian networks.

Family score for node v with parent set Pa, N rows, r = 2 states and
q = 2^|Pa| parent configurations::

    sum_{j,k} N_jk ln(N_jk / N_j)  -  q (r - 1) ln(N) / 2

with 0 ln 0 = 0. Higher is better.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from ..engagement import EngagementMatrix
from ..resources import ResourceId
from .dag import Dag

N_STATES = 2


def _xlogx_table(n: int) -> np.ndarray:
    x = np.arange(n + 1, dtype=np.float64)
    out = np.zeros(n + 1)
    out[1:] = x[1:] * np.log(x[1:])
    return out


class FamilyScorer:
    """Cached family scores over the columns of one data matrix.

    Parent sets are bitmasks over column positions.
    """

    def __init__(self, data: np.ndarray):
        data = np.asarray(data)
        if data.ndim != 2 or data.shape[0] < 1:
            raise ValueError("need a 2-D data array with at least one row")
        self.n_rows, self.n_cols = data.shape
        self._cols = [np.ascontiguousarray(data[:, j], dtype=np.int64) for j in range(self.n_cols)]
        self._xlogx = _xlogx_table(self.n_rows)
        self._log_n = math.log(self.n_rows)
        self._cache: dict[tuple[int, int], float] = {}

    def local(self, child: int, parent_mask: int) -> float:
        key = (child, parent_mask)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        idx = self._cols[child]
        k = 0
        m = parent_mask
        p = 0
        while m:
            if m & 1:
                idx = idx + (self._cols[p] << (k + 1))
                k += 1
            m >>= 1
            p += 1
        counts = np.bincount(idx, minlength=1 << (k + 1))
        per_cfg = counts[0::2] + counts[1::2]
        loglik = self._xlogx[counts].sum() - self._xlogx[per_cfg].sum()
        value = float(loglik) - (1 << k) * (N_STATES - 1) * self._log_n / 2
        self._cache[key] = value
        return value


def family_bic(child: np.ndarray, parents: np.ndarray | None = None) -> float:
    """BIC family score of one child column given a (rows x k) parent block."""
    child = np.asarray(child).reshape(-1, 1)
    if parents is None:
        parents = np.zeros((child.shape[0], 0), dtype=np.uint8)
    data = np.hstack([child, np.asarray(parents).reshape(child.shape[0], -1)])
    k = data.shape[1] - 1
    return FamilyScorer(data).local(0, (1 << (k + 1)) - 2)


@dataclass(frozen=True)
class ScoredNetwork:
    dag: Dag
    score: float
    per_node_scores: dict[ResourceId, float]

    def to_dict(self) -> dict:
        return {
            **self.dag.to_dict(),
            "score": self.score,
            "per_node_scores": {v.name: self.per_node_scores[v] for v in self.dag.nodes},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))


def masks_for(dag: Dag, columns: dict[ResourceId, int]) -> dict[ResourceId, int]:
    masks = {v: 0 for v in dag.nodes}
    for s, t in dag.arcs:
        masks[t] |= 1 << columns[s]
    return masks


def score_with(scorer: FamilyScorer, dag: Dag, columns: dict[ResourceId, int]) -> ScoredNetwork:
    masks = masks_for(dag, columns)
    per_node = {v: scorer.local(columns[v], masks[v]) for v in dag.nodes}
    return ScoredNetwork(dag, sum(per_node.values()), per_node)


def bic_score(matrix: EngagementMatrix, dag: Dag) -> ScoredNetwork:
    if matrix.n_students < 1:
        raise ValueError("BIC needs at least one student")
    columns = {}
    for v in dag.nodes:
        columns[v] = matrix.index(v)
    return score_with(FamilyScorer(matrix.cells), dag, columns)
