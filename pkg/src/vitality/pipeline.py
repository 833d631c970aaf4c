"""Dataset construction shared by the CLI and the tests.

Survival samples are taken at the last full month before a repository's exit
(its cessation, or the observation end when censored).  Horizon-classifier
samples are taken at the last full month before the reference date ``T`` for
every repository alive at ``T``.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from datetime import datetime
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import RepoTimeline, observed_duration
from .features import FEATURE_NAMES, HITS_FEATURE, FeatureVector, compute_features
from .influence import DEFAULT_SCHEME, RAW_SCHEME, InteractionLog, NormalizedWeight, normalize
from .survival.boosting import holdout_split
from .survival.gbsa import GbsaLabel, alive_at, gbsa_label
from .timeutil import format_month, month_index, month_start, parse_month

log = logging.getLogger(__name__)

MATRIX_COLUMNS = FEATURE_NAMES + (HITS_FEATURE,)
# Real interaction graphs can have a tiny spectral gap; thousands of sweeps to reach 1e-9 happen.
HITS_MAX_ITER = 10_000


def active_in(timeline: RepoTimeline, month: int) -> bool:
    """Created by the end of ``month`` and not ceased before it began."""
    if timeline.created_at >= month_start(month + 1):
        return False
    ct = timeline.label.cessation_time
    return not (timeline.label.ceased and ct < month_start(month))


class InfluenceCache:
    """Monthly influence snapshots, normalised over the repositories active that month."""

    def __init__(self, timelines: Mapping[str, RepoTimeline], max_iter: int = HITS_MAX_ITER):
        self.timelines = timelines
        self.max_iter = max_iter
        self._log = InteractionLog(timelines.values(), DEFAULT_SCHEME)
        self._raw_log = InteractionLog(timelines.values(), RAW_SCHEME)
        self._norm: dict[int, dict[str, NormalizedWeight]] = {}
        self._hits: dict[int, dict[str, float]] = {}

    def population(self, month: int) -> list[str]:
        return sorted(r for r, tl in self.timelines.items() if active_in(tl, month))

    def normalized(self, month: int) -> dict[str, NormalizedWeight]:
        if month not in self._norm:
            pop = self.population(month)
            state = self._snapshot(self._log, month)
            self._norm[month] = normalize({r: state.pqs.get(r, 0.0) for r in pop}) if pop else {}
        return self._norm[month]

    def hits(self, month: int) -> dict[str, float]:
        if month not in self._hits:
            state = self._snapshot(self._raw_log, month)
            self._hits[month] = {r: state.pqs.get(r, 0.0) for r in self.population(month)}
        return self._hits[month]

    def _snapshot(self, ilog: InteractionLog, month: int):
        state = ilog.snapshot(month, max_iter=self.max_iter)
        if not state.converged:
            log.warning("HITS for %s stopped at %d iterations before converging",
                        format_month(month), state.iterations)
        return state

    def preload(self, norm: Mapping[int, dict], hits: Mapping[int, dict]) -> None:
        self._norm.update(norm)
        self._hits.update(hits)


def features_at(timeline: RepoTimeline, as_of: int, cache: InfluenceCache) -> FeatureVector:
    norm = cache.normalized(as_of)
    uw = norm.get(timeline.repo_id)
    if uw is None:
        uw = NormalizedWeight(timeline.repo_id, 0.0,
                              min((w.pct_rank for w in norm.values()), default=1.0),
                              min((w.zscore for w in norm.values()), default=0.0))
    return compute_features(timeline, as_of, uw, cache.hits(as_of).get(timeline.repo_id, 0.0))


# -- tables --------------------------------------------------------------------

@dataclass
class FeatureTable:
    repo_ids: list[str]
    as_of: list[int]
    X: np.ndarray
    names: tuple[str, ...] = MATRIX_COLUMNS
    durations: np.ndarray | None = None
    events: np.ndarray | None = None
    labels: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.repo_ids)

    def columns(self, names: Sequence[str]) -> np.ndarray:
        idx = [self.names.index(n) for n in names]
        return self.X[:, idx]


def survival_months(timeline: RepoTimeline, observation_end: datetime) -> int:
    """Snapshot month for a survival sample: the month before exit."""
    ct = timeline.label.cessation_time
    exit_at = ct if timeline.label.ceased and ct <= observation_end else observation_end
    return month_index(exit_at) - 1


def survival_table(timelines: Mapping[str, RepoTimeline], observation_end: datetime,
                   cache: InfluenceCache | None = None) -> FeatureTable:
    cache = cache or InfluenceCache(timelines)
    ids, months, rows, dur, ev = [], [], [], [], []
    for rid in sorted(timelines):
        tl = timelines[rid]
        m = survival_months(tl, observation_end)
        if m < tl.first_month:
            log.warning("%s: exits in its creation month, no snapshot available", rid)
            continue
        d, e = observed_duration(tl, observation_end)
        if d <= 0:
            continue
        fv = features_at(tl, m, cache)
        ids.append(rid)
        months.append(m)
        rows.append(fv.values(MATRIX_COLUMNS))
        dur.append(d)
        ev.append(e)
    X = np.asarray(rows, dtype=np.float64).reshape(len(rows), len(MATRIX_COLUMNS))
    return FeatureTable(ids, months, X, durations=np.asarray(dur), events=np.asarray(ev, dtype=bool),
                        meta={"observation_end": observation_end})


def horizon_table(timelines: Mapping[str, RepoTimeline], T: datetime, horizon_months: int,
                  cache: InfluenceCache | None = None) -> FeatureTable:
    cache = cache or InfluenceCache(timelines)
    as_of = month_index(T) - 1
    ids, rows, labels = [], [], []
    for rid in sorted(timelines):
        tl = timelines[rid]
        if not alive_at(tl, T) or as_of < tl.first_month:
            continue
        ids.append(rid)
        rows.append(features_at(tl, as_of, cache).values(MATRIX_COLUMNS))
        labels.append(gbsa_label(tl, T, horizon_months) is GbsaLabel.POSITIVE)
    X = np.asarray(rows, dtype=np.float64).reshape(len(rows), len(MATRIX_COLUMNS))
    return FeatureTable(ids, [as_of] * len(ids), X, labels=np.asarray(labels, dtype=bool),
                        meta={"T": T, "horizon": horizon_months})


def split(n: int, seed: int, labels=None, test_frac: float = 0.2):
    """Deterministic (train, test) index split; stratified when labels are given."""
    return holdout_split(n, test_frac, np.random.default_rng(seed), stratify=labels)


# -- CSV -------------------------------------------------------------------------

def _cell(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    if isinstance(v, (float, np.floating)):
        f = float(v)
        return str(int(f)) if f.is_integer() and abs(f) < 2**53 else repr(f)
    return str(v)


def write_table(path, table: FeatureTable) -> None:
    extra = []
    if table.durations is not None:
        extra = ["duration_months", "event"]
    elif table.labels is not None:
        extra = ["label"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["repo_id", "as_of", *table.names, *extra])
        for i, rid in enumerate(table.repo_ids):
            row = [rid, format_month(table.as_of[i]), *(_cell(v) for v in table.X[i])]
            if table.durations is not None:
                row += [repr(float(table.durations[i])), int(table.events[i])]
            elif table.labels is not None:
                row += [int(table.labels[i])]
            w.writerow(row)


def read_table(path) -> FeatureTable:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    if header[:2] != ["repo_id", "as_of"]:
        raise ValueError(f"{path}: not a feature table")
    tail = header[2:]
    extra = [c for c in ("duration_months", "event", "label") if c in tail]
    names = tuple(c for c in tail if c not in extra)
    unknown = set(names) - set(MATRIX_COLUMNS)
    if unknown:
        raise ValueError(f"{path}: unknown feature columns {sorted(unknown)}")
    k = len(names)
    X = np.array([[float(v) if v != "" else np.nan for v in r[2:2 + k]] for r in rows],
                 dtype=np.float64).reshape(len(rows), k)
    t = FeatureTable([r[0] for r in rows], [parse_month(r[1]) for r in rows], X, names)
    col = {c: 2 + k + j for j, c in enumerate(extra)}
    if "duration_months" in col:
        t.durations = np.array([float(r[col["duration_months"]]) for r in rows])
        t.events = np.array([r[col["event"]] == "1" for r in rows], dtype=bool)
    if "label" in col:
        t.labels = np.array([r[col["label"]] == "1" for r in rows], dtype=bool)
    return t


def feature_series(timeline: RepoTimeline, names: Iterable[str], months: Sequence[int],
                   cache: InfluenceCache) -> dict[str, list[float]]:
    """Monthly values of the selected features; NaN where undefined."""
    names = list(names)
    out = {n: [] for n in names}
    for m in months:
        fv = features_at(timeline, m, cache)
        for n, v in zip(names, fv.values(names)):
            out[n].append(v)
    return out
