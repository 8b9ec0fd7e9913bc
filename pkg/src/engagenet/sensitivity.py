"""How much the consensus structure moves with the synchronous-window length."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bn.dag import Arc, sorted_arcs
from .bn.search import SearchParams
from .bootstrap import bootstrap_learn
from .engagement import build_matrix, exclude_high_access
from .ingest import ActivityEvent, CourseConfig, load_config, parse_log

DEFAULT_WINDOWS = (7, 10, 14, 17, 21)


def jaccard(a: frozenset, b: frozenset) -> float:
    union = a | b
    if not union:
        return 1.0
    return len(a & b) / len(union)


@dataclass(frozen=True)
class SensitivityReport:
    windows: tuple[int, ...]
    edge_sets: tuple[frozenset, ...]
    strengths: dict[Arc, tuple[float, ...]]
    jaccard: np.ndarray
    engaged_cells: tuple[int, ...]

    def to_dict(self) -> dict:
        return {
            "windows": list(self.windows),
            "engaged_cells": list(self.engaged_cells),
            "edges": {
                str(w): [[s.name, t.name] for s, t in sorted_arcs(e)]
                for w, e in zip(self.windows, self.edge_sets)
            },
            "strengths": [
                {"source": s.name, "target": t.name, "by_window": list(v)}
                for (s, t), v in sorted(self.strengths.items(), key=lambda kv: (kv[0][0].name, kv[0][1].name))
            ],
            "jaccard": self.jaccard.tolist(),
        }

    def to_markdown(self) -> str:
        ws = self.windows
        out = ["# Window sensitivity", ""]
        out += ["| window (days) | engaged cells | consensus arcs |", "|---|---|---|"]
        for w, n, e in zip(ws, self.engaged_cells, self.edge_sets):
            out.append(f"| {w} | {n} | {len(e)} |")
        out += ["", "## Jaccard similarity of consensus arc sets", ""]
        out.append("| | " + " | ".join(map(str, ws)) + " |")
        out.append("|---" * (len(ws) + 1) + "|")
        for w, row in zip(ws, self.jaccard):
            out.append(f"| {w} | " + " | ".join(f"{x:.2f}" for x in row) + " |")
        out += ["", "## Arc strength by window", ""]
        out.append("| arc | " + " | ".join(map(str, ws)) + " |")
        out.append("|---" * (len(ws) + 1) + "|")
        for (s, t), vals in sorted(self.strengths.items(), key=lambda kv: (kv[0][0].name, kv[0][1].name)):
            if max(vals) == 0:
                continue
            marks = " | ".join(f"{v:.2f}" for v in vals)
            out.append(f"| {s} -> {t} | {marks} |")
        return "\n".join(out) + "\n"


def sensitivity_from_events(
    events: Sequence[ActivityEvent],
    config: CourseConfig,
    windows: Sequence[int] = DEFAULT_WINDOWS,
    *,
    iterations: int = 100,
    threshold: float = 0.5,
    params: SearchParams = SearchParams(),
    workers: int = 1,
    method: str = "bootstrap",
) -> SensitivityReport:
    windows = tuple(int(w) for w in windows)
    if len(windows) < 2:
        raise ValueError("sensitivity needs at least two windows")
    if any(w <= 0 for w in windows):
        raise ValueError("windows must be positive")
    schedule = config.schedule()
    students = sorted({e.student_id for e in events})
    edge_sets, tables, cells = [], [], []
    for w in windows:
        cfg = config.with_window(w)
        matrix = build_matrix(events, schedule, cfg, students=students)
        cells.append(int(matrix.cells.sum()))
        learn, _ = exclude_high_access(matrix, cfg.exclusion_rate)
        cons = bootstrap_learn(learn, iterations, threshold, params, workers, method)
        edge_sets.append(cons.dag.arcs)
        tables.append(cons.strengths)

    arcs = set()
    for t in tables:
        arcs.update(t.counts)
    grid = {a: tuple(t.strength(a) for t in tables) for a in arcs}
    k = len(windows)
    jac = np.ones((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            jac[i, j] = jac[j, i] = jaccard(edge_sets[i], edge_sets[j])
    return SensitivityReport(windows, tuple(edge_sets), grid, jac, tuple(cells))


def sensitivity(log_path, config_path, windows: Sequence[int] = DEFAULT_WINDOWS, **kwargs) -> SensitivityReport:
    config = load_config(config_path)
    events, _ = parse_log(log_path, config)
    return sensitivity_from_events(events, config, windows, **kwargs)
