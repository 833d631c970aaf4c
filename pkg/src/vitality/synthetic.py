"""Deterministic synthetic event corpora with ground-truth cessation labels.

Four archetypes are generated.  Rates below are per repository-month and are
multiplied by a per-repo scale drawn from ``lognormal(0, 0.3)``.

``Healthy``
    Steady activity (about 4 commits, 1.5 issues, 1.5 PRs, 3 stars per month),
    maintainers answer most threads within roughly a day.  Ongoing.
``QuietMaintained``
    Sparse commits (about one every three months) and few issues, but every
    thread is answered fast (mean 8 h).  Ongoing.
``Decaying``
    Healthy until ``decline_months`` (default 10-11) before cessation, then
    commits, issues, PRs and tags shrink geometrically (monthly ratio
    ``decline_ratio``, default 0.80-0.85) while response latency grows
    by 1.6x per month and fewer threads get answered.  Commit counts over the
    final six pre-cessation months are strictly decreasing and the last
    pre-cessation month has no maintainer activity at all.  Stars keep coming.
    Ceases (archived or declared) at a known month.
``AbruptCease``
    Healthy until a stop month, after which maintainers vanish; outsiders
    still star, fork and open unanswered issues.  Cessation is recorded
    ``stop_gap`` (default 7) months after the stop.

Users are drawn from one shared, popularity-skewed pool so the same people
touch several repositories, which gives the user-repository graph structure.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime, timedelta
from importlib import resources
from typing import Mapping

import numpy as np

from .corpus import (
    CessationLabel,
    EventKind,
    RepoEvent,
    RepoTimeline,
    Source,
    Status,
    build_timelines,
)
from .timeutil import month_index, month_start, parse_instant, parse_month

ARCHETYPES = ("Healthy", "QuietMaintained", "Decaying", "AbruptCease")
CEASING = frozenset({"Decaying", "AbruptCease"})

_FEATURE_TITLES = (
    "Add {} support", "Implement {}", "Introduce {} option", "feat: {} command",
    "Support {} in config", "Add new {} feature",
)
_BUGFIX_TITLES = (
    "Fix crash in {}", "fix: {} regression", "Resolve {} bug", "Patch {} leak",
    "Hotfix for {}", "Repair broken {}",
)
_OTHER_TITLES = (
    "Update README", "Refactor {} module", "Bump {} version", "Docs: clarify {}",
    "Tidy up {}", "CI tweaks for {}",
)
_TOPICS = ("parser", "cli", "cache", "auth", "logging", "export", "plugin", "theme", "network")


@dataclass(frozen=True)
class Rates:
    commits: float
    issues: float
    prs: float
    stars: float
    forks: float
    tags: float
    resp_mean_h: float
    resp_prob: float
    merge_prob: float
    pr_mix: tuple[float, float, float]  # feature, bugfix, other


HEALTHY = Rates(4.0, 1.5, 1.5, 3.0, 0.4, 0.25, 18.0, 0.95, 0.75, (0.5, 0.25, 0.25))
QUIET = Rates(0.35, 0.5, 0.15, 1.5, 0.15, 0.05, 8.0, 1.0, 0.6, (0.3, 0.4, 0.3))


@dataclass
class Scenario:
    counts: dict[str, int]
    start: int                  # first possible creation month
    created_until: int          # last possible creation month
    cessation_window: tuple[int, int]
    observation_end: datetime
    user_pool: int = 3000
    decline_months: tuple[int, int] = (10, 11)
    decline_ratio: tuple[float, float] = (0.8, 0.85)
    stop_gap: tuple[int, int] = (7, 7)

    @classmethod
    def from_dict(cls, scenario: Mapping) -> "Scenario":
        counts = dict(scenario["archetypes"])
        unknown = set(counts) - set(ARCHETYPES)
        if unknown:
            raise ValueError(f"unknown archetypes: {sorted(unknown)}")
        for name, n in counts.items():
            if not isinstance(n, int) or n <= 0:
                raise ValueError(f"archetype count must be a positive integer: {name}={n!r}")
        if not counts:
            raise ValueError("scenario names no archetypes")
        cw = scenario.get("cessation_window", ["2017-10", "2019-09"])
        sc = cls(
            counts=counts,
            start=parse_month(scenario.get("start", "2014-01")),
            created_until=parse_month(scenario.get("created_until", "2016-01")),
            cessation_window=(parse_month(cw[0]), parse_month(cw[1])),
            observation_end=parse_instant(scenario.get("observation_end", "2021-01-01")),
            user_pool=int(scenario.get("user_pool", 3000)),
            decline_months=tuple(int(v) for v in scenario.get("decline_months", (10, 11))),
            decline_ratio=tuple(float(v) for v in scenario.get("decline_ratio", (0.8, 0.85))),
            stop_gap=tuple(int(v) for v in scenario.get("stop_gap", (7, 7))),
        )
        if sc.created_until < sc.start or sc.cessation_window[1] < sc.cessation_window[0]:
            raise ValueError("empty creation or cessation window")
        if sc.cessation_window[0] - sc.created_until < 14:
            raise ValueError("cessation window must start at least 14 months after the last creation month")
        if month_start(sc.cessation_window[1] + 1) > sc.observation_end:
            raise ValueError("cessation window extends past observation end")
        lo, hi = sc.decline_months
        if not 6 <= lo <= hi or hi >= sc.cessation_window[0] - sc.created_until:
            raise ValueError("decline_months must satisfy 6 <= lo <= hi and fit after creation")
        lo, hi = sc.decline_ratio
        if not 0.0 < lo <= hi < 1.0:
            raise ValueError("decline_ratio must lie in (0, 1)")
        lo, hi = sc.stop_gap
        if not 1 <= lo <= hi or hi >= sc.cessation_window[0] - sc.created_until:
            raise ValueError("stop_gap must satisfy 1 <= lo <= hi and fit after creation")
        if sc.user_pool < 50:
            raise ValueError("user_pool must be at least 50")
        return sc


def default_scenario() -> dict:
    text = resources.files("vitality.data").joinpath("scenario_default.json").read_text("utf-8")
    return json.loads(text)


class _RepoGen:
    def __init__(self, rng: np.random.Generator, repo_id: str, pool: list[str], pool_p: np.ndarray):
        self.rng = rng
        self.repo_id = repo_id
        self.pool = pool
        self.pool_p = pool_p
        self.pool_cdf = np.cumsum(pool_p)
        self.events: list[RepoEvent] = []
        self.n_threads = 0

    def pick_users(self, n: int) -> list[str]:
        idx = self.rng.choice(len(self.pool), size=n, replace=False, p=self.pool_p)
        return [self.pool[i] for i in idx]

    def outsider(self) -> str:
        i = int(np.searchsorted(self.pool_cdf, self.rng.random() * self.pool_cdf[-1], side="right"))
        return self.pool[min(i, len(self.pool) - 1)]

    def time_in(self, month: int, lo: datetime) -> datetime:
        start = max(month_start(month), lo)
        span = (month_start(month + 1) - start).total_seconds()
        return start + timedelta(seconds=int(self.rng.uniform(0, span - 1)))

    def emit(self, ts: datetime, user: str, kind: EventKind, limit: datetime, **kw) -> bool:
        ts = ts.replace(microsecond=0)   # events carry second resolution
        if ts >= limit:
            return False
        self.events.append(RepoEvent(ts, self.repo_id, user, kind, **kw))
        return True

    def title(self, mix: tuple[float, float, float]) -> str:
        u = self.rng.random() * sum(mix)
        which = 0 if u < mix[0] else (1 if u < mix[0] + mix[1] else 2)
        templates = (_FEATURE_TITLES, _BUGFIX_TITLES, _OTHER_TITLES)[which]
        tpl = templates[int(self.rng.integers(len(templates)))]
        return tpl.format(_TOPICS[int(self.rng.integers(len(_TOPICS)))])

    def loc(self) -> int:
        return max(1, int(round(np.exp(self.rng.normal(3.0, 1.2)))))


def _generate_repo(
    gen: _RepoGen, archetype: str, sc: Scenario
) -> tuple[CessationLabel, list[RepoEvent]]:
    rng = gen.rng
    c_first = sc.start + int(rng.integers(sc.created_until - sc.start + 1))
    created = month_start(c_first) + timedelta(seconds=int(rng.uniform(0, 27 * 86400)))
    scale = float(np.exp(rng.normal(0.0, 0.3)))
    maintainers = gen.pick_users(int(rng.integers(1, 4)))
    contributors = gen.pick_users(int(rng.integers(3, 12)))

    cessation = None
    decline_start = stop_month = None
    end_month = month_index(sc.observation_end - timedelta(seconds=1))
    limit = sc.observation_end
    if archetype in CEASING:
        c_month = int(rng.integers(sc.cessation_window[0], sc.cessation_window[1] + 1))
        cessation = month_start(c_month) + timedelta(seconds=int(rng.uniform(0, 27 * 86400)))
        limit = cessation
        end_month = c_month
        if archetype == "Decaying":
            decline_start = c_month - int(rng.integers(sc.decline_months[0], sc.decline_months[1] + 1))
        else:
            stop_month = c_month - int(rng.integers(sc.stop_gap[0], sc.stop_gap[1] + 1))

    base = QUIET if archetype == "QuietMaintained" else HEALTHY
    # strictly decreasing commit schedule for the last six pre-cessation months
    schedule: dict[int, int] = {}
    if decline_start is not None:
        c_month = end_month
        ratio = float(rng.uniform(*sc.decline_ratio))
        top = base.commits * scale * ratio ** (c_month - 6 - decline_start)
        prev = None
        for k in range(6):
            target = max(5 - k, int(round(max(top, 5.0) * ratio ** k)))
            if prev is not None:
                target = min(target, prev - 1)
            schedule[c_month - 6 + k] = target
            prev = target
        schedule[c_month - 1] = 0

    maint_limit = limit
    if decline_start is not None:
        maint_limit = month_start(end_month - 1)
    if stop_month is not None:
        maint_limit = month_start(stop_month + 1)

    for m in range(c_first, end_month + 1):
        lo = created if m == c_first else month_start(m)
        mult, resp_mult, resp_prob, mix = 1.0, 1.0, base.resp_prob, base.pr_mix
        maint_active = True
        if decline_start is not None and m >= decline_start:
            k = m - decline_start
            mult = ratio ** k
            resp_mult = 1.6 ** k
            resp_prob = base.resp_prob * 0.85 ** k
            mix = (0.15, 0.6, 0.25)
            maint_active = m < end_month - 1
        if stop_month is not None and m > stop_month:
            maint_active = False
        if m == end_month and cessation is not None:
            maint_active = False
        # commits (maintainers only: any direct committer is a maintainer)
        if m in schedule:
            n_commits = schedule[m]
        elif maint_active:
            n_commits = int(rng.poisson(base.commits * scale * mult))
        else:
            n_commits = 0
        for _ in range(n_commits):
            who = maintainers[int(rng.integers(len(maintainers)))]
            gen.emit(gen.time_in(m, lo), who, EventKind.COMMIT, maint_limit, loc_changed=gen.loc())

        # stars / forks from the wider pool keep flowing until cessation
        for _ in range(int(rng.poisson(base.stars * scale))):
            gen.emit(gen.time_in(m, lo), gen.outsider(), EventKind.STAR, limit)
        for _ in range(int(rng.poisson(base.forks * scale))):
            gen.emit(gen.time_in(m, lo), gen.outsider(), EventKind.FORK, limit)
        if maint_active:
            for _ in range(int(rng.poisson(base.tags * mult))):
                who = maintainers[int(rng.integers(len(maintainers)))]
                gen.emit(gen.time_in(m, lo), who, EventKind.TAG_PUSH, maint_limit)
        if rng.random() < 0.03:
            gen.emit(gen.time_in(m, lo), maintainers[0], EventKind.META_UPDATE, maint_limit)

        # issues: outsiders keep filing even after maintainers leave
        issue_rate = base.issues * scale * (mult if maint_active else 0.5)
        for _ in range(int(rng.poisson(issue_rate))):
            gen.n_threads += 1
            thread = f"{gen.repo_id}#{gen.n_threads}"
            opener = gen.outsider() if rng.random() < 0.6 else contributors[int(rng.integers(len(contributors)))]
            t_open = gen.time_in(m, lo)
            if not gen.emit(t_open, opener, EventKind.ISSUE_OPEN, limit, thread_id=thread, title=gen.title((0.3, 0.5, 0.2))):
                continue
            if rng.random() < 0.4:
                t_c = t_open + timedelta(hours=float(rng.exponential(30.0)))
                gen.emit(t_c, gen.outsider(), EventKind.ISSUE_COMMENT, limit, thread_id=thread)
            if rng.random() < resp_prob:
                t_r = t_open + timedelta(hours=float(rng.exponential(base.resp_mean_h * resp_mult)))
                who = maintainers[int(rng.integers(len(maintainers)))]
                gen.emit(t_r, who, EventKind.ISSUE_COMMENT, maint_limit, thread_id=thread)

        # pull requests from contributors, merged by maintainers
        if maint_active:
            for _ in range(int(rng.poisson(base.prs * scale * mult))):
                gen.n_threads += 1
                thread = f"{gen.repo_id}#{gen.n_threads}"
                author = contributors[int(rng.integers(len(contributors)))]
                t_open = gen.time_in(m, lo)
                if not gen.emit(t_open, author, EventKind.PR_OPEN, limit, thread_id=thread, title=gen.title(mix)):
                    continue
                if rng.random() < resp_prob:
                    who = maintainers[int(rng.integers(len(maintainers)))]
                    t_r = t_open + timedelta(hours=float(rng.exponential(base.resp_mean_h * resp_mult)))
                    gen.emit(t_r, who, EventKind.PR_COMMENT, maint_limit, thread_id=thread)
                    if rng.random() < base.merge_prob:
                        t_m = t_r + timedelta(hours=float(rng.exponential(24.0)))
                        gen.emit(t_m, who, EventKind.PR_MERGE, maint_limit, thread_id=thread)

    if cessation is None:
        label = CessationLabel(gen.repo_id, created_at=created)
    else:
        source = Source.ARCHIVED if rng.random() < 0.6 else Source.DECLARED_IN_DOCS
        label = CessationLabel(gen.repo_id, Status.CEASED, cessation, source, created_at=created)
    return label, gen.events


def generate_events(scenario: Mapping, seed: int) -> tuple[list[RepoEvent], dict[str, CessationLabel], dict[str, str], datetime]:
    """Raw material for a synthetic corpus.

    Returns ``(events, labels, archetype_by_repo, observation_end)``.
    """
    sc = Scenario.from_dict(scenario)
    rng = np.random.default_rng(seed)
    pool = [f"user{i:05d}" for i in range(sc.user_pool)]
    p = 1.0 / (np.arange(sc.user_pool) + 20.0)
    pool_p = p / p.sum()

    events: list[RepoEvent] = []
    labels: dict[str, CessationLabel] = {}
    kinds: dict[str, str] = {}
    n = 0
    for archetype in ARCHETYPES:
        for _ in range(sc.counts.get(archetype, 0)):
            repo_id = f"repo{n:04d}"
            n += 1
            gen = _RepoGen(rng, repo_id, pool, pool_p)
            label, evs = _generate_repo(gen, archetype, sc)
            labels[repo_id] = label
            kinds[repo_id] = archetype
            events.extend(evs)
    return events, labels, kinds, sc.observation_end


def generate_synthetic_corpus(scenario: Mapping, seed: int) -> dict[str, RepoTimeline]:
    """Build timelines for a scenario; identical output for identical seeds."""
    events, labels, _, obs_end = generate_events(scenario, seed)
    return build_timelines(events, labels, observation_end=obs_end)
