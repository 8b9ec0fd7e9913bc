"""Activity-log ingestion.

Turns an LMS activity export (CSV, one click per row) plus a JSON course
configuration into typed :class:`ActivityEvent` records. Rows that cannot be
used are counted in :class:`IngestDiagnostics`, never fatal.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence
from zoneinfo import ZoneInfo, ZoneInfoNotFoundError

from .resources import DEFAULT_MAX_CHAPTER, ResourceId, sort_resources

DEFAULT_WINDOW_DAYS = 14
DEFAULT_EXCLUSION_RATE = 0.95
DEFAULT_ID_COLUMN = "User full name"
TIME_COLUMN = "Time"
CONTEXT_COLUMN = "Event context"
EVENT_COLUMN = "Event name"

ReleaseSchedule = Mapping[ResourceId, datetime]

_CONFIG_KEYS = {
    "max_chapter",
    "resources",
    "mapping_rules",
    "window_days",
    "exclusion_rate",
    "timezone",
    "id_column",
}
_RESOURCE_KEYS = {"resource", "release"}
_RULE_KEYS = {"context", "event", "resource"}

# Moodle's "Time" column, e.g. "3/10/22, 14:05"
_MOODLE_TIME_RE = re.compile(
    r"^(\d{1,2})/(\d{1,2})/(\d{2}),\s*(\d{1,2}):(\d{2})(?::(\d{2}))?$"
)


class ConfigError(ValueError):
    """Course configuration is malformed or violates an invariant."""


class LogFormatError(ValueError):
    """Activity log cannot be read at all (missing columns, bad encoding)."""


@dataclass(frozen=True)
class MappingRule:
    """Case-insensitive substring patterns on the context and event columns."""

    context: str
    event: str
    resource: ResourceId

    def matches(self, raw_context: str, raw_event: str) -> bool:
        return (
            self.context.casefold() in raw_context.casefold()
            and self.event.casefold() in raw_event.casefold()
        )


@dataclass(frozen=True)
class CourseConfig:
    releases: Mapping[ResourceId, datetime]
    mapping_rules: tuple[MappingRule, ...] = ()
    max_chapter: int = DEFAULT_MAX_CHAPTER
    window_days: int = DEFAULT_WINDOW_DAYS
    exclusion_rate: float = DEFAULT_EXCLUSION_RATE
    timezone: str = "UTC"
    id_column: str = DEFAULT_ID_COLUMN

    def __post_init__(self) -> None:
        if isinstance(self.max_chapter, bool) or not isinstance(self.max_chapter, int):
            raise ConfigError("max_chapter must be an integer")
        if self.max_chapter < 1:
            raise ConfigError("max_chapter must be >= 1")
        if isinstance(self.window_days, bool) or not isinstance(self.window_days, int):
            raise ConfigError("window_days must be an integer")
        if self.window_days <= 0:
            raise ConfigError(f"window_days must be positive, got {self.window_days}")
        rate = self.exclusion_rate
        if isinstance(rate, bool) or not isinstance(rate, (int, float)) or not 0 < rate <= 1:
            raise ConfigError(f"exclusion_rate must be in (0, 1], got {rate!r}")
        source_tz(self.timezone)
        for res, when in self.releases.items():
            if res.chapter > self.max_chapter:
                raise ConfigError(f"{res} exceeds max_chapter {self.max_chapter}")
            if when.tzinfo is None:
                raise ConfigError(f"release time for {res} must be timezone-aware")
        for r in self.mapping_rules:
            if r.resource not in self.releases:
                raise ConfigError(f"mapping rule targets undeclared resource {r.resource}")
        ordered = {r: self.releases[r].astimezone(timezone.utc) for r in sort_resources(self.releases)}
        object.__setattr__(self, "releases", ordered)
        object.__setattr__(self, "mapping_rules", tuple(self.mapping_rules))

    @property
    def resources(self) -> list[ResourceId]:
        return list(self.releases)

    def schedule(self) -> dict[ResourceId, datetime]:
        return dict(self.releases)

    def with_window(self, window_days: int) -> CourseConfig:
        return CourseConfig(
            releases=self.releases,
            mapping_rules=self.mapping_rules,
            max_chapter=self.max_chapter,
            window_days=window_days,
            exclusion_rate=self.exclusion_rate,
            timezone=self.timezone,
            id_column=self.id_column,
        )

    def to_dict(self) -> dict:
        return {
            "max_chapter": self.max_chapter,
            "window_days": self.window_days,
            "exclusion_rate": self.exclusion_rate,
            "timezone": self.timezone,
            "id_column": self.id_column,
            "resources": [
                {"resource": r.name, "release": format_timestamp(t)}
                for r, t in self.releases.items()
            ],
            "mapping_rules": [
                {"context": m.context, "event": m.event, "resource": m.resource.name}
                for m in self.mapping_rules
            ],
        }


@dataclass(frozen=True)
class ActivityEvent:
    student_id: str
    timestamp: datetime
    resource: ResourceId
    raw_context: str = ""
    raw_event: str = ""

    def __post_init__(self) -> None:
        if not self.student_id:
            raise ValueError("student_id must be non-empty")
        if self.timestamp.tzinfo is None:
            raise ValueError("timestamp must be timezone-aware")


@dataclass
class IngestDiagnostics:
    total: int = 0
    mapped: int = 0
    unmapped: int = 0
    malformed_time: int = 0
    unmapped_samples: list[tuple[str, str]] = field(default_factory=list)

    def as_dict(self) -> dict[str, int]:
        return {
            "total": self.total,
            "mapped": self.mapped,
            "unmapped": self.unmapped,
            "malformed_time": self.malformed_time,
        }


def source_tz(name: str):
    if name.upper() == "UTC":
        return timezone.utc
    try:
        return ZoneInfo(name)
    except (ZoneInfoNotFoundError, ValueError) as exc:
        raise ConfigError(f"unknown timezone {name!r}") from exc


def parse_timestamp(text: str, tz=timezone.utc) -> datetime:
    """Parse ISO-8601 or Moodle "D/M/YY, HH:MM" into a UTC datetime.

    Naive values are interpreted in ``tz``. Sub-second precision is dropped.
    Raises ValueError on anything else, including impossible dates.
    """
    s = text.strip()
    m = _MOODLE_TIME_RE.match(s)
    if m is not None:
        day, month, yy, hh, mm, ss = m.groups()
        dt = datetime(2000 + int(yy), int(month), int(day), int(hh), int(mm), int(ss or 0))
    else:
        if not s or not s[0].isdigit():
            raise ValueError(f"unrecognised timestamp {text!r}")
        if s.endswith(("Z", "z")):
            s = s[:-1] + "+00:00"
        dt = datetime.fromisoformat(s)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=tz)
    return dt.astimezone(timezone.utc).replace(microsecond=0)


def format_timestamp(dt: datetime) -> str:
    return dt.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def student_key(raw_id: str) -> str:
    """Stable 64-bit pseudonym for a raw student identifier."""
    return hashlib.blake2b(raw_id.strip().encode("utf-8"), digest_size=8).hexdigest()


def _check_keys(obj, allowed: set[str], where: str) -> None:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be a JSON object")
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(sorted(unknown))}")


def _parse_resource(name, where: str) -> ResourceId:
    if not isinstance(name, str):
        raise ConfigError(f"{where}: resource must be a string")
    try:
        return ResourceId.parse(name)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def config_from_dict(doc: dict) -> CourseConfig:
    """Validate a decoded config document and build a :class:`CourseConfig`."""
    _check_keys(doc, _CONFIG_KEYS, "config")
    if "resources" not in doc:
        raise ConfigError("config is missing 'resources'")
    tz_name = doc.get("timezone", "UTC")
    if not isinstance(tz_name, str):
        raise ConfigError("timezone must be a string")
    tz = source_tz(tz_name)

    resources = doc["resources"]
    if not isinstance(resources, list):
        raise ConfigError("resources must be a list")
    releases: dict[ResourceId, datetime] = {}
    for i, entry in enumerate(resources):
        where = f"resources[{i}]"
        _check_keys(entry, _RESOURCE_KEYS, where)
        if set(entry) != _RESOURCE_KEYS:
            raise ConfigError(f"{where} needs both 'resource' and 'release'")
        res = _parse_resource(entry["resource"], where)
        if res in releases:
            raise ConfigError(f"duplicate resource {res}")
        if not isinstance(entry["release"], str):
            raise ConfigError(f"{where}: release must be a timestamp string")
        try:
            releases[res] = parse_timestamp(entry["release"], tz)
        except ValueError as exc:
            raise ConfigError(f"{where}: bad release time {entry['release']!r}") from exc

    rules = doc.get("mapping_rules", [])
    if not isinstance(rules, list):
        raise ConfigError("mapping_rules must be a list")
    parsed_rules = []
    for i, entry in enumerate(rules):
        where = f"mapping_rules[{i}]"
        _check_keys(entry, _RULE_KEYS, where)
        if set(entry) != _RULE_KEYS:
            raise ConfigError(f"{where} needs 'context', 'event' and 'resource'")
        if not isinstance(entry["context"], str) or not isinstance(entry["event"], str):
            raise ConfigError(f"{where}: patterns must be strings")
        parsed_rules.append(
            MappingRule(entry["context"], entry["event"], _parse_resource(entry["resource"], where))
        )

    kwargs = {k: doc[k] for k in ("max_chapter", "window_days", "exclusion_rate", "id_column") if k in doc}
    if "id_column" in kwargs and not isinstance(kwargs["id_column"], str):
        raise ConfigError("id_column must be a string")
    if "exclusion_rate" in kwargs and isinstance(kwargs["exclusion_rate"], float):
        if not math.isfinite(kwargs["exclusion_rate"]):
            raise ConfigError("exclusion_rate must be finite")
    return CourseConfig(releases=releases, mapping_rules=tuple(parsed_rules), timezone=tz_name, **kwargs)


def load_config(path) -> CourseConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return config_from_dict(doc)


def save_config(config: CourseConfig, path) -> None:
    Path(path).write_text(json.dumps(config.to_dict(), indent=2) + "\n", encoding="utf-8")


def map_event(raw_context: str, raw_event: str, config: CourseConfig) -> Optional[ResourceId]:
    for rule in config.mapping_rules:
        if rule.matches(raw_context, raw_event):
            return rule.resource
    return None


def parse_log(path, config: CourseConfig) -> tuple[list[ActivityEvent], IngestDiagnostics]:
    """Read an activity CSV and return mapped events in file order."""
    try:
        with open(path, newline="", encoding="utf-8-sig") as fh:
            return parse_log_rows(csv.reader(fh), config)
    except (OSError, UnicodeDecodeError) as exc:
        raise LogFormatError(f"cannot read log {path}: {exc}") from exc
    except csv.Error as exc:
        raise LogFormatError(f"malformed CSV in {path}: {exc}") from exc


def parse_log_rows(rows: Iterable[Sequence[str]], config: CourseConfig):
    rows = iter(rows)
    try:
        header = [h.strip() for h in next(rows)]
    except StopIteration:
        raise LogFormatError("log has no header row") from None
    required = [TIME_COLUMN, config.id_column, CONTEXT_COLUMN, EVENT_COLUMN]
    missing = [c for c in required if c not in header]
    if missing:
        raise LogFormatError(f"log is missing required column(s): {', '.join(missing)}")
    i_time, i_id, i_ctx, i_evt = (header.index(c) for c in required)
    width = max(i_time, i_id, i_ctx, i_evt) + 1
    tz = source_tz(config.timezone)

    events: list[ActivityEvent] = []
    diag = IngestDiagnostics()
    for row in rows:
        if not row:
            continue  # blank line, not a data row
        diag.total += 1
        if len(row) < width:
            row = list(row) + [""] * (width - len(row))
        try:
            ts = parse_timestamp(row[i_time], tz)
        except ValueError:
            diag.malformed_time += 1
            continue
        ctx, evt, who = row[i_ctx], row[i_evt], row[i_id].strip()
        res = map_event(ctx, evt, config)
        if res is None or not who:
            diag.unmapped += 1
            if len(diag.unmapped_samples) < 5:
                diag.unmapped_samples.append((ctx, evt))
            continue
        events.append(ActivityEvent(student_key(who), ts, res, ctx, evt))
        diag.mapped += 1
    return events, diag


LOG_COLUMNS = [TIME_COLUMN, DEFAULT_ID_COLUMN, CONTEXT_COLUMN, "Component", EVENT_COLUMN]


def write_log(path, rows: Iterable[Mapping[str, str]], columns: Sequence[str] = LOG_COLUMNS) -> None:
    """Write raw log rows (dicts keyed by column name) as a Moodle-style CSV."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({c: row.get(c, "") for c in columns})
