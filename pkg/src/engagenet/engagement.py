"""Binary synchronous-engagement matrix (students x resources)."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .ingest import DEFAULT_EXCLUSION_RATE, ActivityEvent, CourseConfig, ReleaseSchedule
from .resources import ResourceId, sort_resources

STUDENT_COLUMN = "student"


@dataclass(frozen=True, eq=False)
class EngagementMatrix:
    students: tuple[str, ...]
    resources: tuple[ResourceId, ...]
    cells: np.ndarray

    def __post_init__(self) -> None:
        students = tuple(self.students)
        resources = tuple(self.resources)
        cells = np.array(self.cells, dtype=np.uint8, copy=True).reshape(len(students), len(resources))
        if len(set(students)) != len(students):
            raise ValueError("duplicate student ids")
        if len(set(resources)) != len(resources):
            raise ValueError("duplicate resources")
        if list(resources) != sort_resources(resources):
            raise ValueError("resources must be sorted by chapter then kind")
        if cells.size and cells.max() > 1:
            raise ValueError("cells must be 0/1")
        cells.setflags(write=False)
        object.__setattr__(self, "students", students)
        object.__setattr__(self, "resources", resources)
        object.__setattr__(self, "cells", cells)

    @property
    def n_students(self) -> int:
        return len(self.students)

    def index(self, resource: ResourceId) -> int:
        try:
            return self.resources.index(resource)
        except ValueError:
            raise KeyError(f"{resource} is not a column of this matrix") from None

    def column(self, resource: ResourceId) -> np.ndarray:
        return self.cells[:, self.index(resource)]

    def access_rates(self) -> dict[ResourceId, float]:
        if self.n_students == 0:
            raise ValueError("access rate undefined for an empty matrix")
        sums = self.cells.sum(axis=0, dtype=np.int64)
        return {r: int(s) / self.n_students for r, s in zip(self.resources, sums)}

    def select(self, resources: Iterable[ResourceId]) -> EngagementMatrix:
        keep = sort_resources(resources)
        idx = [self.index(r) for r in keep]
        return EngagementMatrix(self.students, tuple(keep), self.cells[:, idx])

    def take_rows(self, rows: np.ndarray) -> EngagementMatrix:
        """Rows by position; duplicates get suffixed ids so students stay unique."""
        ids = tuple(f"{self.students[i]}#{k}" for k, i in enumerate(rows))
        return EngagementMatrix(ids, self.resources, self.cells[rows])

    def __eq__(self, other) -> bool:
        if not isinstance(other, EngagementMatrix):
            return NotImplemented
        return (
            self.students == other.students
            and self.resources == other.resources
            and np.array_equal(self.cells, other.cells)
        )

    __hash__ = None

    def __repr__(self) -> str:
        return f"EngagementMatrix({self.n_students} students x {len(self.resources)} resources)"

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([STUDENT_COLUMN] + [r.name for r in self.resources])
            for sid, row in zip(self.students, self.cells):
                w.writerow([sid] + [str(int(v)) for v in row])


def read_matrix_csv(path) -> EngagementMatrix:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty matrix file") from None
        if not header or header[0] != STUDENT_COLUMN:
            raise ValueError(f"{path}: first column must be '{STUDENT_COLUMN}'")
        resources = [ResourceId.parse(h) for h in header[1:]]
        students, rows = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}:{lineno}: expected {len(header)} fields")
            if any(v not in ("0", "1") for v in row[1:]):
                raise ValueError(f"{path}:{lineno}: cells must be 0 or 1")
            students.append(row[0])
            rows.append([int(v) for v in row[1:]])
    order = sorted(range(len(resources)), key=lambda i: resources[i].sort_key())
    cells = np.array(rows, dtype=np.uint8).reshape(len(students), len(resources))
    return EngagementMatrix(tuple(students), tuple(resources[i] for i in order), cells[:, order])


def is_synchronous(event: ActivityEvent, schedule: ReleaseSchedule, window_days: int) -> bool:
    """True iff release <= timestamp < release + window_days (half-open)."""
    if window_days <= 0:
        raise ValueError("window_days must be positive")
    try:
        release: datetime = schedule[event.resource]
    except KeyError:
        raise KeyError(f"{event.resource} has no release time") from None
    return release <= event.timestamp < release + timedelta(days=window_days)


def build_matrix(
    events: Iterable[ActivityEvent],
    schedule: ReleaseSchedule,
    config: CourseConfig,
    students: Optional[Sequence[str]] = None,
) -> EngagementMatrix:
    """Binarize synchronous events into a students x resources table.

    Columns are the declared resources of ``config``. Rows are every student
    seen in ``events`` (sorted), or ``students`` in the given order followed by
    any extra ids seen in events. Students without a synchronous click keep an
    all-zero row.
    """
    events = list(events)
    resources = tuple(config.resources)
    col = {r: j for j, r in enumerate(resources)}
    seen = {e.student_id for e in events}
    if students is None:
        order = sorted(seen)
    else:
        order = list(students)
        order += sorted(seen - set(order))
    row = {s: i for i, s in enumerate(order)}
    cells = np.zeros((len(order), len(resources)), dtype=np.uint8)
    for e in events:
        if e.resource not in col:
            raise KeyError(f"{e.resource} is not a declared resource")
        if is_synchronous(e, schedule, config.window_days):
            cells[row[e.student_id], col[e.resource]] = 1
    return EngagementMatrix(tuple(order), resources, cells)


def exclude_high_access(
    matrix: EngagementMatrix, rate: float = DEFAULT_EXCLUSION_RATE
) -> tuple[EngagementMatrix, list[tuple[ResourceId, float]]]:
    """Drop columns accessed by strictly more than ``rate`` of students."""
    if not 0 < rate <= 1:
        raise ValueError(f"rate must be in (0, 1], got {rate}")
    if matrix.n_students == 0:
        raise ValueError("cannot apply the exclusion rule to a matrix with no students")
    rates = matrix.access_rates()
    dropped = [(r, a) for r, a in rates.items() if a > rate]
    gone = {r for r, _ in dropped}
    return matrix.select(r for r in matrix.resources if r not in gone), dropped
