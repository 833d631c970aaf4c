"""Surface, maintainer-centric and project-evolution features.

All functions look at a repository *as of* a calendar month: only events
strictly before the first instant of the following month are visible.
Missing values are ``None`` (``NaN`` once flattened into a matrix).
"""
from __future__ import annotations

import json
import logging
import math
import re
from dataclasses import asdict, dataclass, fields
from enum import Enum
from functools import lru_cache
from importlib import resources
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .corpus import EventKind, RepoTimeline
from .influence import NormalizedWeight
from .timeutil import month_index, month_start

log = logging.getLogger(__name__)

SURFACE = ("stars", "commits", "issues", "prs", "tags", "comments")
USER_CENTRIC = ("weight", "weight_rank_pct", "weight_zscore")
MAINTAINER_CENTRIC = ("latest_maintainer_activity_interval", "avg_response_time", "response_decay_trend")
EVOLUTION = (
    "maintainer_contrib_ratio",
    "contrib_diversity",
    "balance_index",
    "activity_deviation",
    "quarterly_deviation",
    "feature_ratio",
    "bugfix_ratio",
    "bugfix_feature_ratio",
)
FEATURE_NAMES = SURFACE + USER_CENTRIC + MAINTAINER_CENTRIC + EVOLUTION
# raw unit-weight HITS score, only used by the H ablation group
HITS_FEATURE = "hits_score"

SUBSTANTIAL_KINDS = frozenset({EventKind.COMMIT, EventKind.PR_MERGE, EventKind.ISSUE_OPEN})
THREAD_OPEN_KINDS = frozenset({EventKind.ISSUE_OPEN, EventKind.PR_OPEN})


class PrCategory(str, Enum):
    FEATURE = "Feature"
    BUGFIX = "Bugfix"
    OTHER = "Other"


@dataclass(frozen=True)
class MaintainerSet:
    repo_id: str
    as_of: int
    members: frozenset[str]


class ResponseStats(NamedTuple):
    avg_response_time: float | None
    response_decay_trend: float | None
    unresponded_fraction: float | None


@dataclass(frozen=True)
class FeatureVector:
    repo_id: str
    as_of: int
    stars: int
    commits: int
    issues: int
    prs: int
    tags: int
    comments: int
    weight: float
    weight_rank_pct: float
    weight_zscore: float
    latest_maintainer_activity_interval: int
    avg_response_time: float | None
    response_decay_trend: float | None
    maintainer_contrib_ratio: float
    contrib_diversity: float | None
    balance_index: float
    activity_deviation: float
    quarterly_deviation: float | None
    feature_ratio: float | None
    bugfix_ratio: float | None
    bugfix_feature_ratio: float | None
    hits_score: float = 0.0

    def values(self, names: Sequence[str] = FEATURE_NAMES) -> list[float]:
        return [math.nan if getattr(self, n) is None else float(getattr(self, n)) for n in names]

    def validate(self) -> None:
        for n in SURFACE:
            if getattr(self, n) < 0:
                raise ValueError(f"{n} must be non-negative")
        if self.latest_maintainer_activity_interval < 0:
            raise ValueError("negative maintainer inactivity")
        if self.avg_response_time is not None and self.avg_response_time < 0:
            raise ValueError("negative response time")
        if not 0.0 < self.weight_rank_pct <= 1.0:
            raise ValueError("weight_rank_pct outside (0, 1]")
        for n in ("maintainer_contrib_ratio", "contrib_diversity", "feature_ratio", "bugfix_ratio"):
            v = getattr(self, n)
            if v is not None and not 0.0 <= v <= 1.0:
                raise ValueError(f"{n}={v} outside [0, 1]")
        if not 0.0 <= self.balance_index <= 0.25:
            raise ValueError("balance_index outside [0, 0.25]")
        if self.feature_ratio is not None and self.feature_ratio + self.bugfix_ratio > 1.0 + 1e-12:
            raise ValueError("feature_ratio + bugfix_ratio exceeds 1")
        if self.bugfix_feature_ratio is not None and self.bugfix_feature_ratio < 0:
            raise ValueError("negative bugfix_feature_ratio")


def feature_fields() -> list[str]:
    return [f.name for f in fields(FeatureVector) if f.name not in ("repo_id", "as_of")]


def _cutoff(as_of: int):
    return month_start(as_of + 1)


def _visible(timeline: RepoTimeline, as_of: int):
    cutoff = _cutoff(as_of)
    for ev in timeline.events:
        if ev.timestamp >= cutoff:
            break
        yield ev


# -- maintainers -------------------------------------------------------------


def identify_maintainers(timeline: RepoTimeline, as_of: int) -> MaintainerSet:
    """Users with a direct commit or a PR merge at or before ``as_of``."""
    members = frozenset(
        ev.user_id
        for ev in _visible(timeline, as_of)
        if ev.kind is EventKind.COMMIT or ev.kind is EventKind.PR_MERGE
    )
    return MaintainerSet(timeline.repo_id, as_of, members)


def maintainer_inactivity(timeline: RepoTimeline, maintainers: MaintainerSet, as_of: int) -> int:
    """Whole months since the latest action of any kind by any maintainer."""
    latest = None
    for ev in _visible(timeline, as_of):
        if ev.user_id in maintainers.members:
            latest = ev.timestamp
    if latest is None:
        log.debug("%s: no maintainer activity by %d, using age", timeline.repo_id, as_of)
        return max(0, as_of - timeline.first_month)
    return as_of - month_index(latest)


def response_latency(
    timeline: RepoTimeline, maintainers: MaintainerSet, as_of: int, window: int = 6
) -> ResponseStats:
    """Mean hours to first maintainer touch for threads opened in the window.

    The trend is the least-squares slope (hours per month) of the monthly mean
    response times; it needs at least two months with answered threads.
    """
    first_window_month = as_of - window + 1
    opened: dict[str, tuple[int, object]] = {}
    answered: dict[str, float] = {}
    for ev in _visible(timeline, as_of):
        if ev.thread_id is None:
            continue
        if ev.kind in THREAD_OPEN_KINDS:
            m = month_index(ev.timestamp)
            if m >= first_window_month and ev.thread_id not in opened:
                opened[ev.thread_id] = (m, ev.timestamp)
            continue
        if ev.thread_id in opened and ev.thread_id not in answered and ev.user_id in maintainers.members:
            t_open = opened[ev.thread_id][1]
            answered[ev.thread_id] = (ev.timestamp - t_open).total_seconds() / 3600.0
    if not opened:
        return ResponseStats(None, None, None)
    unresponded = 1.0 - len(answered) / len(opened)
    if not answered:
        return ResponseStats(None, None, unresponded)
    avg = float(np.mean(list(answered.values())))
    per_month: dict[int, list[float]] = {}
    for tid, hours in answered.items():
        per_month.setdefault(opened[tid][0] - first_window_month, []).append(hours)
    trend = None
    if len(per_month) >= 2:
        xs = np.array(sorted(per_month), dtype=float)
        ys = np.array([np.mean(per_month[int(x)]) for x in xs])
        trend = ols_slope(xs, ys)
    return ResponseStats(avg, trend, unresponded)


def ols_slope(xs, ys) -> float:
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    dx = xs - xs.mean()
    return float((dx * (ys - ys.mean())).sum() / (dx * dx).sum())


# -- evolution ----------------------------------------------------------------


def gini(x: Sequence[float]) -> float:
    """Mean-absolute-difference Gini, ``sum |x_i - x_j| / (2 n^2 mean)``.

    Evaluated in O(n log n) from the sorted values; integer input is handled
    in exact integer arithmetic.
    """
    n = len(x)
    if n == 0:
        raise ValueError("gini of an empty vector")
    vals = sorted(x)
    if vals[0] < 0:
        raise ValueError("gini needs non-negative values")
    total = sum(vals)
    if total == 0:
        return 0.0
    # sum_{i,j} |x_i - x_j| = 2 * sum_i (2i - n - 1) x_(i), 1-indexed ascending
    pair_sum = 2 * sum((2 * i - n - 1) * v for i, v in enumerate(vals, start=1))
    return pair_sum / (2 * n * total)


def contribution_structure(
    timeline: RepoTimeline, maintainers: MaintainerSet, as_of: int, window: int = 6
) -> tuple[float, float, float | None]:
    """(maintainer_contrib_ratio, balance_index, contrib_diversity)."""
    first_window_month = as_of - window + 1
    total = by_maintainers = 0
    for ev in _visible(timeline, as_of):
        if ev.kind in SUBSTANTIAL_KINDS and month_index(ev.timestamp) >= first_window_month:
            total += 1
            by_maintainers += ev.user_id in maintainers.members
    p = by_maintainers / total if total else 0.0
    balance = (p - 0.5) ** 2
    per_user: dict[str, int] = {}
    for m in range(first_window_month, as_of + 1):
        b = timeline.bucket(m)
        if b is None:
            continue
        for user, n in b.per_user_actions.items():
            per_user[user] = per_user.get(user, 0) + n
    diversity = 1.0 - gini(list(per_user.values())) if per_user else None
    return p, balance, diversity


def monthly_composite(timeline: RepoTimeline, as_of: int, standardize: bool = False) -> np.ndarray:
    """Mean of commits, issues and PRs per month, creation month .. ``as_of``.

    With ``standardize`` each of the three series is z-scored over the history
    before averaging (a constant series contributes zeros).
    """
    rows = []
    for m in range(timeline.first_month, as_of + 1):
        b = timeline.bucket(m)
        rows.append((0, 0, 0) if b is None else (b.commits, b.issues, b.prs))
    cols = np.asarray(rows, dtype=np.float64).reshape(len(rows), 3)
    if standardize and len(cols):
        sd = cols.std(axis=0)
        cols = np.where(sd > 0, (cols - cols.mean(axis=0)) / np.where(sd > 0, sd, 1.0), 0.0)
    return cols.sum(axis=1) / 3.0


def activity_deviation(
    timeline: RepoTimeline, as_of: int, standardize: bool = False
) -> tuple[float, float | None]:
    """(z-score of the last 3 months vs full history, last quarter vs prior three)."""
    series = monthly_composite(timeline, as_of, standardize)
    if len(series) == 0:
        raise ValueError("activity deviation needs at least one month of history")
    sd = series.std()
    recent = series[-3:].mean()
    act = float((recent - series.mean()) / sd) if sd > 0 else 0.0
    quarterly = None
    if len(series) >= 12:
        q = [series[len(series) - 3 * (j + 1): len(series) - 3 * j].mean() for j in range(4)]
        prev = np.array(q[1:])
        qsd = prev.std()
        quarterly = float((q[0] - prev.mean()) / qsd) if qsd > 0 else 0.0
    return act, quarterly


@lru_cache(maxsize=1)
def pr_keywords() -> dict[str, tuple[str, ...]]:
    text = resources.files("vitality.data").joinpath("pr_keywords.json").read_text("utf-8")
    cfg = json.loads(text)
    return {"feature": tuple(cfg["feature"]), "bugfix": tuple(cfg["bugfix"])}


@lru_cache(maxsize=1)
def _keyword_patterns() -> tuple[re.Pattern, re.Pattern]:
    kw = pr_keywords()

    def build(words):
        return re.compile(r"\b(?:" + "|".join(map(re.escape, words)) + r")\b", re.IGNORECASE)

    return build(kw["feature"]), build(kw["bugfix"])


def classify_pr(title: str | None) -> PrCategory:
    """Keyword classification of a PR title; bug-fix wins over feature."""
    if not title:
        return PrCategory.OTHER
    feat, fix = _keyword_patterns()
    if fix.search(title):
        return PrCategory.BUGFIX
    if feat.search(title):
        return PrCategory.FEATURE
    return PrCategory.OTHER


def pr_focus(
    timeline: RepoTimeline, as_of: int, window: int = 6
) -> tuple[float | None, float | None, float | None]:
    first_window_month = as_of - window + 1
    counts = {c: 0 for c in PrCategory}
    for ev in _visible(timeline, as_of):
        if ev.kind is EventKind.PR_OPEN and month_index(ev.timestamp) >= first_window_month:
            counts[classify_pr(ev.title)] += 1
    n = sum(counts.values())
    if n == 0:
        return None, None, None
    feat, fix = counts[PrCategory.FEATURE], counts[PrCategory.BUGFIX]
    return feat / n, fix / n, (fix / feat if feat else None)


# -- assembly -----------------------------------------------------------------


def is_alive(timeline: RepoTimeline, as_of: int) -> bool:
    """Created by the end of ``as_of`` and not ceased by then."""
    cutoff = _cutoff(as_of)
    if timeline.created_at >= cutoff:
        return False
    ct = timeline.label.cessation_time
    return not (timeline.label.ceased and ct <= cutoff)


def surface_counts(timeline: RepoTimeline, as_of: int) -> dict[str, int]:
    out = dict.fromkeys(SURFACE, 0)
    for b in timeline.months:
        if b.month > as_of:
            break
        for name in SURFACE:
            out[name] += b.count(name)
    return out


def compute_features(
    timeline: RepoTimeline,
    as_of: int,
    user_weight: NormalizedWeight,
    hits_score: float = 0.0,
) -> FeatureVector:
    maint = identify_maintainers(timeline, as_of)
    resp = response_latency(timeline, maint, as_of)
    p, balance, diversity = contribution_structure(timeline, maint, as_of)
    act, quarterly = activity_deviation(timeline, as_of)
    feat, fix, fix_feat = pr_focus(timeline, as_of)
    return FeatureVector(
        repo_id=timeline.repo_id,
        as_of=as_of,
        **surface_counts(timeline, as_of),
        weight=user_weight.raw,
        weight_rank_pct=user_weight.pct_rank,
        weight_zscore=user_weight.zscore,
        latest_maintainer_activity_interval=maintainer_inactivity(timeline, maint, as_of),
        avg_response_time=resp.avg_response_time,
        response_decay_trend=resp.response_decay_trend,
        maintainer_contrib_ratio=p,
        contrib_diversity=diversity,
        balance_index=balance,
        activity_deviation=act,
        quarterly_deviation=quarterly,
        feature_ratio=feat,
        bugfix_ratio=fix,
        bugfix_feature_ratio=fix_feat,
        hits_score=hits_score,
    )


def assemble(
    timelines: Iterable[RepoTimeline],
    influence: Mapping[str, NormalizedWeight],
    as_of: int,
    hits: Mapping[str, float] | None = None,
) -> list[FeatureVector]:
    """One feature vector per repository alive at ``as_of``, sorted by repo id.

    Repositories missing from ``influence`` get weight 0 and the window's
    minimum rank and z-score.
    """
    hits = hits or {}
    if influence:
        floor = NormalizedWeight(
            "", 0.0,
            min(w.pct_rank for w in influence.values()),
            min(w.zscore for w in influence.values()),
        )
    else:
        floor = NormalizedWeight("", 0.0, 1.0, 0.0)
    out = []
    for tl in sorted(timelines, key=lambda t: t.repo_id):
        if not is_alive(tl, as_of):
            continue
        uw = influence.get(tl.repo_id, floor)
        out.append(compute_features(tl, as_of, uw, hits.get(tl.repo_id, 0.0)))
    return out


def feature_dict(fv: FeatureVector) -> dict:
    return asdict(fv)
