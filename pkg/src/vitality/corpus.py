"""Event-log ingestion and calendar-month aggregation.

Events arrive as JSON lines (one :class:`RepoEvent` per line) and labels as a
second JSON-lines file of :class:`CessationLabel` records.  Ingestion groups
events per repository, buckets them by UTC calendar month and attaches the
label, giving one immutable :class:`RepoTimeline` per repository.
"""
from __future__ import annotations

import json
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Mapping

from .timeutil import (
    format_instant,
    format_month,
    month_index,
    months_between,
    parse_instant,
    parse_month,
)

log = logging.getLogger(__name__)

TIMELINE_FORMAT = "vitality.timelines/2"


class EventKind(str, Enum):
    STAR = "Star"
    COMMIT = "Commit"
    FORK = "Fork"
    ISSUE_OPEN = "IssueOpen"
    ISSUE_COMMENT = "IssueComment"
    PR_OPEN = "PrOpen"
    PR_MERGE = "PrMerge"
    PR_COMMENT = "PrComment"
    TAG_PUSH = "TagPush"
    META_UPDATE = "MetaUpdate"


THREADED_KINDS = frozenset({EventKind.ISSUE_COMMENT, EventKind.PR_COMMENT, EventKind.PR_MERGE})
UNTHREADED_KINDS = frozenset({EventKind.STAR, EventKind.FORK, EventKind.TAG_PUSH})

# kind -> MonthBucket counter; MetaUpdate is retained on the timeline but not counted.
_BUCKET_FIELD = {
    EventKind.STAR: "stars",
    EventKind.COMMIT: "commits",
    EventKind.ISSUE_OPEN: "issues",
    EventKind.PR_OPEN: "prs",
    EventKind.TAG_PUSH: "tags",
    EventKind.ISSUE_COMMENT: "comments",
    EventKind.PR_COMMENT: "comments",
    EventKind.FORK: "forks",
    EventKind.PR_MERGE: "merges",
}
COUNT_FIELDS = ("stars", "commits", "issues", "prs", "tags", "comments", "forks", "merges")


class Status(str, Enum):
    ONGOING = "Ongoing"
    CEASED = "Ceased"


class Source(str, Enum):
    ARCHIVED = "Archived"
    DECLARED_IN_DOCS = "DeclaredInDocs"


class EventFormatError(ValueError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno
        self.message = message


@dataclass(frozen=True, order=True)
class RepoEvent:
    timestamp: datetime
    repo_id: str
    user_id: str
    kind: EventKind
    loc_changed: int = 0
    thread_id: str | None = None
    title: str | None = None

    def sort_key(self):
        return (self.timestamp, self.user_id, self.kind.value)

    def to_record(self) -> dict:
        rec = {
            "repo_id": self.repo_id,
            "user_id": self.user_id,
            "kind": self.kind.value,
            "timestamp": format_instant(self.timestamp),
            "loc_changed": self.loc_changed,
        }
        if self.thread_id is not None:
            rec["thread_id"] = self.thread_id
        if self.title is not None:
            rec["title"] = self.title
        return rec


@dataclass(frozen=True)
class CessationLabel:
    repo_id: str
    status: Status = Status.ONGOING
    cessation_time: datetime | None = None
    source: Source | None = None
    created_at: datetime | None = None

    def __post_init__(self):
        ceased = self.status is Status.CEASED
        has_time, has_source = self.cessation_time is not None, self.source is not None
        if (ceased and not (has_time and has_source)) or (not ceased and (has_time or has_source)):
            raise ValueError(
                f"{self.repo_id}: Ceased requires cessation_time and source (and Ongoing forbids them)"
            )

    @property
    def ceased(self) -> bool:
        return self.status is Status.CEASED

    def to_record(self) -> dict:
        rec: dict = {"repo_id": self.repo_id, "status": self.status.value}
        if self.cessation_time is not None:
            rec["cessation_time"] = format_instant(self.cessation_time)
        if self.source is not None:
            rec["source"] = self.source.value
        if self.created_at is not None:
            rec["created_at"] = format_instant(self.created_at)
        return rec


@dataclass(frozen=True)
class MonthBucket:
    month: int
    stars: int = 0
    commits: int = 0
    issues: int = 0
    prs: int = 0
    tags: int = 0
    comments: int = 0
    forks: int = 0
    merges: int = 0
    loc_sum: int = 0
    per_user_actions: Mapping[str, int] = field(default_factory=dict)

    def count(self, name: str) -> int:
        return getattr(self, name)

    def to_record(self) -> dict:
        rec: dict = {"month": format_month(self.month)}
        for name in COUNT_FIELDS:
            rec[name] = getattr(self, name)
        rec["loc_sum"] = self.loc_sum
        rec["per_user_actions"] = dict(sorted(self.per_user_actions.items()))
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "MonthBucket":
        kwargs = {name: int(rec[name]) for name in COUNT_FIELDS}
        return cls(
            month=parse_month(rec["month"]),
            loc_sum=int(rec["loc_sum"]),
            per_user_actions={str(k): int(v) for k, v in rec["per_user_actions"].items()},
            **kwargs,
        )


@dataclass(frozen=True)
class RepoTimeline:
    repo_id: str
    created_at: datetime
    label: CessationLabel
    months: tuple[MonthBucket, ...]
    # Raw events, sorted by (timestamp, user_id, kind).  Per-event detail
    # (thread ids, LOC per commit, ordinals) is needed downstream.
    events: tuple[RepoEvent, ...] = ()
    late_events: int = 0

    @property
    def first_month(self) -> int:
        return month_index(self.created_at)

    @property
    def last_month(self) -> int:
        return self.months[-1].month if self.months else self.first_month

    @property
    def cessation_time(self) -> datetime | None:
        return self.label.cessation_time

    def bucket(self, month: int) -> MonthBucket | None:
        i = month - self.first_month
        if 0 <= i < len(self.months):
            return self.months[i]
        return None

    def total(self, name: str, upto_month: int | None = None) -> int:
        return sum(
            b.count(name) for b in self.months if upto_month is None or b.month <= upto_month
        )

    def to_record(self) -> dict:
        return {
            "repo_id": self.repo_id,
            "created_at": format_instant(self.created_at),
            "label": self.label.to_record(),
            "late_events": self.late_events,
            "months": [b.to_record() for b in self.months],
            # compact rows: [epoch seconds, user, kind, loc, thread, title]
            "events": [
                [int(e.timestamp.timestamp()), e.user_id, e.kind.value, e.loc_changed, e.thread_id, e.title]
                for e in self.events
            ],
        }

    @classmethod
    def from_record(cls, rec: dict) -> "RepoTimeline":
        return cls(
            repo_id=rec["repo_id"],
            created_at=parse_instant(rec["created_at"]),
            label=parse_label(rec["label"]),
            months=tuple(MonthBucket.from_record(b) for b in rec["months"]),
            events=tuple(_event_from_row(rec["repo_id"], row) for row in rec["events"]),
            late_events=int(rec["late_events"]),
        )


_KIND_BY_VALUE = {k.value: k for k in EventKind}


def _event_from_row(repo_id: str, row: list) -> RepoEvent:
    # rows come from our own store, already validated at ingestion
    ts, user, kind, loc, thread, title = row
    return RepoEvent(datetime.fromtimestamp(ts, timezone.utc), repo_id, user, _KIND_BY_VALUE[kind], loc, thread, title)


def parse_event(rec: dict, lineno: int = 0) -> RepoEvent:
    """Validate one decoded record; unknown fields are ignored."""
    if not isinstance(rec, dict):
        raise EventFormatError(lineno, "record is not a JSON object")
    try:
        repo_id = str(rec["repo_id"])
        user_id = str(rec["user_id"])
        kind = EventKind(rec["kind"])
        ts = parse_instant(rec["timestamp"])
    except KeyError as exc:
        raise EventFormatError(lineno, f"missing field {exc.args[0]!r}") from None
    except ValueError as exc:
        raise EventFormatError(lineno, str(exc)) from None
    loc = rec.get("loc_changed", 0) or 0
    if not isinstance(loc, int) or isinstance(loc, bool) or loc < 0:
        raise EventFormatError(lineno, f"loc_changed must be a non-negative integer, got {loc!r}")
    if kind is not EventKind.COMMIT and loc != 0:
        raise EventFormatError(lineno, f"loc_changed must be 0 for {kind.value}")
    thread = rec.get("thread_id")
    thread = None if thread is None else str(thread)
    if kind in THREADED_KINDS and thread is None:
        raise EventFormatError(lineno, f"{kind.value} requires thread_id")
    if kind in UNTHREADED_KINDS and thread is not None:
        raise EventFormatError(lineno, f"{kind.value} must not carry thread_id")
    title = rec.get("title")
    return RepoEvent(
        timestamp=ts,
        repo_id=repo_id,
        user_id=user_id,
        kind=kind,
        loc_changed=loc,
        thread_id=thread,
        title=None if title is None else str(title),
    )


def parse_label(rec: dict) -> CessationLabel:
    status = Status(rec.get("status", Status.ONGOING.value))
    ct = rec.get("cessation_time")
    src = rec.get("source")
    created = rec.get("created_at")
    return CessationLabel(
        repo_id=str(rec["repo_id"]),
        status=status,
        cessation_time=None if ct is None else parse_instant(ct),
        source=None if src is None else Source(src),
        created_at=None if created is None else parse_instant(created),
    )


def parse_events(
    lines: Iterable[str], on_error: str = "raise"
) -> tuple[list[RepoEvent], list[EventFormatError]]:
    """Decode JSON-lines events.

    ``on_error="raise"`` stops at the first bad line; ``"skip"`` collects the
    errors and carries on.  Blank lines are ignored.
    """
    if on_error not in ("raise", "skip"):
        raise ValueError("on_error must be 'raise' or 'skip'")
    events: list[RepoEvent] = []
    errors: list[EventFormatError] = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise EventFormatError(lineno, f"invalid JSON ({exc.msg})") from None
            events.append(parse_event(rec, lineno))
        except EventFormatError as err:
            if on_error == "raise":
                raise
            errors.append(err)
    return events, errors


def parse_labels(lines: Iterable[str]) -> dict[str, CessationLabel]:
    labels: dict[str, CessationLabel] = {}
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            label = parse_label(json.loads(line))
        except (KeyError, ValueError) as exc:
            raise EventFormatError(lineno, f"bad label: {exc}") from None
        labels[label.repo_id] = label
    return labels


def build_timelines(
    events: Iterable[RepoEvent],
    labels: Mapping[str, CessationLabel] | None = None,
    *,
    observation_end: datetime | None = None,
    min_stars: int | None = None,
) -> dict[str, RepoTimeline]:
    """Group events into per-repository monthly timelines.

    ``observation_end`` defaults to the latest event timestamp; events after it
    are dropped.  With ``min_stars`` set, repositories whose lifetime star
    count is below it are excluded.
    """
    labels = labels or {}
    by_repo: dict[str, list[RepoEvent]] = defaultdict(list)
    all_events = list(events)
    if observation_end is None and all_events:
        observation_end = max(e.timestamp for e in all_events)
    dropped = 0
    for ev in all_events:
        if observation_end is not None and ev.timestamp > observation_end:
            dropped += 1
            continue
        by_repo[ev.repo_id].append(ev)
    if dropped:
        log.warning("dropped %d events after observation end", dropped)

    out: dict[str, RepoTimeline] = {}
    for repo_id in sorted(by_repo):
        evs = sorted(by_repo[repo_id], key=RepoEvent.sort_key)
        if min_stars is not None:
            n_stars = sum(1 for e in evs if e.kind is EventKind.STAR)
            if n_stars < min_stars:
                continue
        label = labels.get(repo_id) or CessationLabel(repo_id)
        out[repo_id] = _make_timeline(repo_id, evs, label, observation_end)
    return out


def _make_timeline(
    repo_id: str, evs: list[RepoEvent], label: CessationLabel, observation_end: datetime
) -> RepoTimeline:
    created = evs[0].timestamp
    if label.created_at is not None and label.created_at < created:
        created = label.created_at
    if label.cessation_time is not None and label.cessation_time < created:
        raise ValueError(f"{repo_id}: cessation_time precedes creation")

    end_month = month_index(observation_end)
    if label.ceased and label.cessation_time <= observation_end:
        end_month = month_index(label.cessation_time)
    first = month_index(created)

    counts = [Counter() for _ in range(end_month - first + 1)]
    users = [Counter() for _ in range(end_month - first + 1)]
    late = 0
    for ev in evs:
        if label.cessation_time is not None and ev.timestamp > label.cessation_time:
            late += 1
            continue
        slot = month_index(ev.timestamp) - first
        name = _BUCKET_FIELD.get(ev.kind)
        if name is None:
            continue
        counts[slot][name] += 1
        counts[slot]["loc_sum"] += ev.loc_changed
        users[slot][ev.user_id] += 1
    if late:
        log.warning("%s: %d events after cessation_time retained", repo_id, late)

    months = tuple(
        MonthBucket(
            month=first + i,
            loc_sum=c["loc_sum"],
            per_user_actions=dict(sorted(u.items())),
            **{name: c[name] for name in COUNT_FIELDS},
        )
        for i, (c, u) in enumerate(zip(counts, users))
    )
    return RepoTimeline(
        repo_id=repo_id,
        created_at=created,
        label=label,
        months=months,
        events=tuple(evs),
        late_events=late,
    )


def ingest_events(
    stream: Iterable[str],
    labels: Mapping[str, CessationLabel] | None = None,
    *,
    min_stars: int | None = None,
    observation_end: datetime | None = None,
    on_error: str = "raise",
) -> dict[str, RepoTimeline]:
    """Parse a JSON-lines event stream and build timelines keyed by repo id."""
    events, errors = parse_events(stream, on_error=on_error)
    if errors:
        log.warning("skipped %d malformed event lines (first: %s)", len(errors), errors[0])
    return build_timelines(
        events, labels, observation_end=observation_end, min_stars=min_stars
    )


def observed_duration(timeline: RepoTimeline, observation_end: datetime) -> tuple[float, bool]:
    """(months from creation to exit, event observed).

    A cessation later than ``observation_end`` is treated as censored.
    """
    if observation_end < timeline.created_at:
        raise ValueError("observation_end precedes repository creation")
    ct = timeline.label.cessation_time
    if timeline.label.ceased:
        if ct <= observation_end:
            return months_between(timeline.created_at, ct), True
        log.warning("%s: cessation after observation end, treated as censored", timeline.repo_id)
    return months_between(timeline.created_at, observation_end), False


# -- serialization -----------------------------------------------------------


def iter_event_lines(timelines: Iterable[RepoTimeline]) -> Iterator[str]:
    for tl in timelines:
        for ev in tl.events:
            yield json.dumps(ev.to_record(), ensure_ascii=False)


def iter_label_lines(timelines: Iterable[RepoTimeline]) -> Iterator[str]:
    for tl in timelines:
        rec = tl.label.to_record()
        rec["created_at"] = format_instant(tl.created_at)
        yield json.dumps(rec, ensure_ascii=False)


def write_jsonl(path: Path, lines: Iterable[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in lines:
            fh.write(line)
            fh.write("\n")


def save_timelines(path: Path, timelines: Mapping[str, RepoTimeline], observation_end: datetime) -> None:
    payload = {
        "format": TIMELINE_FORMAT,
        "observation_end": format_instant(observation_end),
        "timelines": [timelines[k].to_record() for k in sorted(timelines)],
    }
    Path(path).write_text(json.dumps(payload, ensure_ascii=False, separators=(",", ":")), encoding="utf-8")


def load_timelines(path: Path) -> tuple[dict[str, RepoTimeline], datetime]:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("format") != TIMELINE_FORMAT:
        raise ValueError(f"{path}: not a {TIMELINE_FORMAT} store")
    tls = [RepoTimeline.from_record(r) for r in payload["timelines"]]
    return {t.repo_id: t for t in tls}, parse_instant(payload["observation_end"])
