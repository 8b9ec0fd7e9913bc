"""Resource identifiers: one (kind, chapter) pair per course resource."""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass

DEFAULT_MAX_CHAPTER = 9


class ResourceKind(enum.Enum):
    LECTURE_NOTES = "ln"
    VIDEO = "vid"
    QUIZ = "quiz"
    SUBMISSION = "sub"

    @property
    def prefix(self) -> str:
        return self.value

    @property
    def rank(self) -> int:
        """Position within a chapter: ln < vid < quiz < sub."""
        return _KIND_RANK[self]


_KIND_RANK = {kind: i for i, kind in enumerate(ResourceKind)}
_NAME_RE = re.compile(r"^(ln|vid|quiz|sub)_(0|[1-9][0-9]*)$")


@dataclass(frozen=True)
class ResourceId:
    kind: ResourceKind
    chapter: int

    def __post_init__(self) -> None:
        if isinstance(self.chapter, bool) or not isinstance(self.chapter, int):
            raise TypeError(f"chapter must be an int, got {self.chapter!r}")
        if self.chapter < 1:
            raise ValueError(f"chapter must be >= 1, got {self.chapter}")

    @classmethod
    def parse(cls, text: str) -> ResourceId:
        m = _NAME_RE.match(text.strip())
        if m is None:
            raise ValueError(f"not a resource name: {text!r}")
        return cls(ResourceKind(m.group(1)), int(m.group(2)))

    @property
    def name(self) -> str:
        return f"{self.kind.prefix}_{self.chapter}"

    def sort_key(self) -> tuple[int, int]:
        return (self.chapter, self.kind.rank)

    def __str__(self) -> str:
        return self.name

    def __lt__(self, other: ResourceId) -> bool:
        if not isinstance(other, ResourceId):
            return NotImplemented
        return self.sort_key() < other.sort_key()


def rid(name: str) -> ResourceId:
    """Shorthand for :meth:`ResourceId.parse`."""
    return ResourceId.parse(name)


def sort_resources(resources) -> list[ResourceId]:
    return sorted(resources, key=ResourceId.sort_key)
