"""Ground-truth networks, synthetic cohorts and synthetic activity logs."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Mapping, Optional

import numpy as np

from .bn.dag import Dag
from .engagement import EngagementMatrix
from .ingest import (
    ActivityEvent,
    CourseConfig,
    DEFAULT_ID_COLUMN,
    MappingRule,
    ReleaseSchedule,
    format_timestamp,
    parse_timestamp,
)
from .inference import CptSet, NodeCpt
from .resources import ResourceId, ResourceKind, rid, sort_resources

TERM_START = datetime(2022, 10, 3, tzinfo=timezone.utc)  # a Monday
REPORTED = "reported"
FREE = "free"
FREE_LABEL = "free parameter (not a reported value)"

_CONTEXT = {
    ResourceKind.LECTURE_NOTES: "Page: Chapter {c} Lecture Notes",
    ResourceKind.VIDEO: "Video: Chapter {c} Video",
    ResourceKind.QUIZ: "Quiz: Chapter {c} Quiz",
    ResourceKind.SUBMISSION: "Assignment: Chapter {c} Code Submission",
}
_EVENTS = {
    ResourceKind.LECTURE_NOTES: ("Course module viewed",),
    ResourceKind.VIDEO: ("Course module viewed",),
    ResourceKind.QUIZ: ("Quiz attempt started", "Quiz attempt submitted"),
    ResourceKind.SUBMISSION: ("A submission has been submitted.", "Submission created."),
}
_RULE_PATTERNS = {
    ResourceKind.LECTURE_NOTES: ("Chapter {c} Lecture Notes", "viewed"),
    ResourceKind.VIDEO: ("Chapter {c} Video", "viewed"),
    ResourceKind.QUIZ: ("Chapter {c} Quiz", "attempt"),
    ResourceKind.SUBMISSION: ("Chapter {c} Code Submission", "submission"),
}
_NOISE_ROWS = (
    ("Forum: Announcements", "Discussion viewed"),
    ("Course: Introduction to Practical Statistics", "Course viewed"),
    ("Forum: Announcements", "Post created"),
)


@dataclass(frozen=True)
class GroundTruth:
    dag: Dag
    cpts: CptSet
    schedule: Mapping[ResourceId, datetime]
    label: str
    # (node, row) -> REPORTED | FREE; absent entries count as FREE
    provenance: Mapping[tuple[ResourceId, int], str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.dag.is_tier_legal():
            raise ValueError("ground-truth graph has a backward-chapter arc")
        self.cpts.check_against(self.dag)
        missing = [v for v in self.dag.nodes if v not in self.schedule]
        if missing:
            raise ValueError(f"no release time for {', '.join(map(str, missing))}")

    def to_dict(self) -> dict:
        nodes = {}
        for v in self.dag.nodes:
            t = self.cpts[v]
            nodes[v.name] = {
                "parents": [p.name for p in t.parents],
                "p1": list(t.p1),
                "source": [self.provenance.get((v, r), FREE) for r in range(len(t.p1))],
            }
        return {
            "label": self.label,
            "dag": self.dag.to_dict(),
            "cpts": nodes,
            "schedule": {v.name: format_timestamp(self.schedule[v]) for v in self.dag.nodes},
        }

    @classmethod
    def from_dict(cls, doc: dict) -> GroundTruth:
        dag = Dag.from_dict(doc["dag"])
        tables, prov = {}, {}
        for name, entry in doc["cpts"].items():
            v = rid(name)
            tables[v] = NodeCpt(tuple(rid(p) for p in entry["parents"]), tuple(entry["p1"]))
            for r, src in enumerate(entry.get("source", [])):
                prov[(v, r)] = src
        schedule = {rid(k): parse_timestamp(t) for k, t in doc["schedule"].items()}
        return cls(dag, CptSet(tables, alpha=0.0), schedule, doc.get("label", ""), prov)

    def describe(self) -> str:
        """Markdown listing of every CPT entry and where its value comes from."""
        lines = [f"# Ground truth: {self.label}", "", "| node | parents | configuration | P(node=1) | source |",
                 "|---|---|---|---|---|"]
        for v in self.dag.nodes:
            t = self.cpts[v]
            for r, p in enumerate(t.p1):
                cfg = ", ".join(f"{q}={(r >> i) & 1}" for i, q in enumerate(t.parents)) or "-"
                src = self.provenance.get((v, r), FREE)
                label = "reported" if src == REPORTED else FREE_LABEL
                parents = ", ".join(map(str, t.parents)) or "-"
                lines.append(f"| {v} | {parents} | {cfg} | {p:.2f} | {label} |")
        return "\n".join(lines) + "\n"


def term_schedule(resources, start: datetime = TERM_START) -> dict[ResourceId, datetime]:
    """Chapter c releases on Monday 00:00 UTC of week c."""
    return {r: start + timedelta(weeks=r.chapter - 1) for r in sort_resources(resources)}


def mapping_rules_for(resources) -> tuple[MappingRule, ...]:
    rules = []
    for r in sort_resources(resources):
        ctx, evt = _RULE_PATTERNS[r.kind]
        rules.append(MappingRule(ctx.format(c=r.chapter), evt, r))
    return tuple(rules)


def course_config_for(schedule: ReleaseSchedule, window_days: int = 14, **kwargs) -> CourseConfig:
    """Config whose mapping rules recognise the rows written by :func:`render_log_rows`."""
    max_chapter = max((r.chapter for r in schedule), default=1)
    kwargs.setdefault("max_chapter", max(9, max_chapter))
    return CourseConfig(
        releases=dict(schedule),
        mapping_rules=mapping_rules_for(schedule),
        window_days=window_days,
        **kwargs,
    )


# node -> (parents, [(P(node=1 | row), source), ...]); row bit i = parents[i]
_REFERENCE_TABLE: dict[str, tuple[tuple[str, ...], list[tuple[float, str]]]] = {
    # near-universal early lecture notes, dropped by the high-access rule
    "ln_1": ((), [(0.97, FREE)]),
    "ln_2": ((), [(0.97, FREE)]),
    "ln_3": ((), [(0.97, FREE)]),
    "ln_4": ((), [(0.75, FREE)]),
    **{f"ln_{c}": ((f"ln_{c - 1}",), [(0.35, FREE), (0.85, FREE)]) for c in range(5, 10)},
    "vid_1": ((), [(0.70, FREE)]),
    **{f"vid_{c}": ((f"vid_{c - 1}",), [(0.25, FREE), (0.80, FREE)]) for c in range(2, 10)},
    "quiz_1": ((), [(0.60, FREE)]),
    **{f"quiz_{c}": ((f"quiz_{c - 1}",), [(0.10, FREE), (0.80, FREE)]) for c in range(2, 10)},
    "sub_1": ((), [(0.70, FREE)]),
    "sub_2": ((), [(0.60, FREE)]),
    "sub_3": ((), [(0.55, FREE)]),
    "sub_4": ((), [(0.50, FREE)]),
    "sub_5": ((), [(0.45, FREE)]),
    "sub_6": (("sub_5",), [(0.20, FREE), (0.80, REPORTED)]),
    "sub_7": (("vid_7",), [(0.10, FREE), (0.83, REPORTED)]),
    "sub_8": (("sub_6", "sub_7"), [(0.05, FREE), (0.40, FREE), (0.40, FREE), (0.85, REPORTED)]),
}
_REFERENCE_TABLE["vid_4"] = (("vid_3",), [(0.25, FREE), (0.82, REPORTED)])
_REFERENCE_TABLE["quiz_2"] = (("quiz_1",), [(0.14, REPORTED), (0.75, FREE)])
_REFERENCE_TABLE["quiz_3"] = (("quiz_2",), [(0.07, REPORTED), (0.80, FREE)])


def reference_preset() -> GroundTruth:
    """Engagement network reproducing the published conditional percentages.

    Four within-kind chains (lecture notes from chapter 4, videos, quizzes,
    late submissions), early submissions as isolated roots, and a
    video-to-submission link in chapter 7. Entries marked FREE are arbitrary
    filler; only the REPORTED ones carry published values.
    """
    nodes = tuple(sort_resources(rid(n) for n in _REFERENCE_TABLE))
    arcs = set()
    tables, prov = {}, {}
    for name, (parents, rows) in _REFERENCE_TABLE.items():
        v = rid(name)
        ps = tuple(rid(p) for p in parents)
        arcs.update((p, v) for p in ps)
        tables[v] = NodeCpt(ps, tuple(p for p, _ in rows))
        for r, (_, src) in enumerate(rows):
            prov[(v, r)] = src
    dag = Dag(nodes, frozenset(arcs))
    return GroundTruth(dag, CptSet(tables, alpha=0.0), term_schedule(nodes), "reference", prov)


def save_ground_truth(gt: GroundTruth, path) -> None:
    Path(path).write_text(json.dumps(gt.to_dict(), indent=2) + "\n", encoding="utf-8")


def load_ground_truth(path) -> GroundTruth:
    return GroundTruth.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def sample_cohort(gt: GroundTruth, n_students: int, seed: int = 0) -> EngagementMatrix:
    """Ancestral sampling of ``n_students`` i.i.d. rows."""
    if n_students < 1:
        raise ValueError("n_students must be positive")
    rng = np.random.default_rng(seed)
    values: dict[ResourceId, np.ndarray] = {}
    for v in gt.dag.topological_order():
        t = gt.cpts[v]
        row = np.zeros(n_students, dtype=np.int64)
        for i, p in enumerate(t.parents):
            row |= values[p].astype(np.int64) << i
        values[v] = (rng.random(n_students) < np.asarray(t.p1)[row]).astype(np.uint8)
    resources = tuple(sort_resources(gt.dag.nodes))
    width = len(str(n_students))
    students = tuple(f"s{i:0{width}d}" for i in range(n_students))
    cells = np.column_stack([values[r] for r in resources])
    return EngagementMatrix(students, resources, cells)


def emit_logs(
    matrix: EngagementMatrix,
    schedule: ReleaseSchedule,
    seed: int = 0,
    *,
    spread_days: int = 14,
    max_clicks: int = 3,
    async_rate: float = 0.0,
) -> list[ActivityEvent]:
    """Synthetic click events that reproduce ``matrix`` under a 14-day window.

    Every 1-cell gets between 1 and ``max_clicks`` clicks uniform in
    [release, release + spread_days). With ``async_rate`` > 0, each
    (student, resource) cell independently gets one decoy click before the
    release time, outside every window. Events come back sorted by time.
    """
    if spread_days < 1 or max_clicks < 1:
        raise ValueError("spread_days and max_clicks must be positive")
    if not 0 <= async_rate <= 1:
        raise ValueError("async_rate must be in [0, 1]")
    missing = [r for r in matrix.resources if r not in schedule]
    if missing:
        raise KeyError(f"no release time for {', '.join(map(str, missing))}")
    rng = np.random.default_rng(seed)
    span = spread_days * 86400
    out = []
    for s_idx, sid in enumerate(matrix.students):
        for r_idx, res in enumerate(matrix.resources):
            release = schedule[res]
            names = _EVENTS[res.kind]
            ctx = _CONTEXT[res.kind].format(c=res.chapter)
            if matrix.cells[s_idx, r_idx]:
                for _ in range(int(rng.integers(1, max_clicks + 1))):
                    ts = release + timedelta(seconds=int(rng.integers(0, span)))
                    out.append(ActivityEvent(sid, ts, res, ctx, names[int(rng.integers(len(names)))]))
            if async_rate and rng.random() < async_rate:
                ts = release - timedelta(seconds=int(rng.integers(1, 7 * 86400 + 1)))
                out.append(ActivityEvent(sid, ts, res, ctx, names[0]))
    out.sort(key=lambda e: (e.timestamp, e.student_id, e.resource.sort_key()))
    return out


def _moodle_time(ts: datetime) -> str:
    return f"{ts.day}/{ts.month}/{ts.year % 100:02d}, {ts.hour:02d}:{ts.minute:02d}"


def render_log_rows(
    events: list[ActivityEvent],
    seed: int = 0,
    *,
    unmapped_rate: float = 0.0,
    time_format: str = "iso",
    names: Optional[Mapping[str, str]] = None,
) -> list[dict[str, str]]:
    """Moodle-style CSV rows for ``events``.

    After each event, one unmappable row (forum or course-page noise) is
    inserted with probability ``unmapped_rate``. ``time_format`` is "iso"
    (second precision) or "moodle" ("D/M/YY, HH:MM").
    """
    if time_format not in ("iso", "moodle"):
        raise ValueError("time_format must be 'iso' or 'moodle'")
    rng = np.random.default_rng(seed)
    fmt = format_timestamp if time_format == "iso" else _moodle_time
    rows = []
    for e in events:
        who = names[e.student_id] if names else e.student_id
        rows.append({
            "Time": fmt(e.timestamp),
            DEFAULT_ID_COLUMN: who,
            "Event context": e.raw_context,
            "Component": e.resource.kind.name.replace("_", " ").title(),
            "Event name": e.raw_event,
        })
        if unmapped_rate and rng.random() < unmapped_rate:
            ctx, evt = _NOISE_ROWS[int(rng.integers(len(_NOISE_ROWS)))]
            rows.append({
                "Time": fmt(e.timestamp + timedelta(seconds=int(rng.integers(1, 600)))),
                DEFAULT_ID_COLUMN: who,
                "Event context": ctx,
                "Component": "System",
                "Event name": evt,
            })
    return rows
