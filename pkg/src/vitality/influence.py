"""User-repository influence scores on a time-decayed bipartite graph.

Each interaction between a user and a repository contributes a base weight
(star 1, commit 8 per log10 LOC, fork 4, issue/PR 2) scaled by a decay factor
``1 / (1 + k / N_p)`` where ``k`` is the interaction's 1-indexed position in
the repository's action stream and ``N_p`` the number of actions on the
repository in the snapshot.  Repository quality (PQS) and user influence (UIS)
are then propagated HITS-style with L1 normalisation after every half step.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np
import scipy.sparse as sp
from scipy.stats import rankdata

from .corpus import EventKind, RepoTimeline
from .timeutil import format_month, month_index

CLASS_OF_KIND = {
    EventKind.STAR: "star",
    EventKind.COMMIT: "commit",
    EventKind.FORK: "fork",
    EventKind.ISSUE_OPEN: "issue",
    EventKind.PR_OPEN: "issue",
}
CLASSES = ("star", "commit", "fork", "issue")

SNAPSHOT_COLUMNS = ("month", "repo_id", "weight", "weight_rank_pct", "weight_zscore")


@dataclass(frozen=True)
class EdgeScheme:
    star: float = 1.0
    commit: float = 8.0
    fork: float = 4.0
    issue: float = 2.0
    decay: bool = True
    log_loc: bool = True

    def base(self, cls: str) -> float:
        return getattr(self, cls)


DEFAULT_SCHEME = EdgeScheme()
# unit weights, no decay, no LOC scaling: the plain HITS baseline
RAW_SCHEME = EdgeScheme(1.0, 1.0, 1.0, 1.0, decay=False, log_loc=False)


@dataclass(frozen=True)
class EdgeWeight:
    user_id: str
    repo_id: str
    w_star: float = 0.0
    w_commit: float = 0.0
    w_fork: float = 0.0
    w_issue: float = 0.0

    @property
    def w_total(self) -> float:
        return self.w_star + self.w_commit + self.w_fork + self.w_issue


@dataclass(frozen=True)
class InfluenceState:
    snapshot_month: int | None
    pqs: dict[str, float]
    uis: dict[str, float]
    iterations: int
    converged: bool


@dataclass(frozen=True)
class NormalizedWeight:
    repo_id: str
    raw: float
    pct_rank: float
    zscore: float


def decay_factor(k: int, n_p: int) -> float:
    """Temporal decay ``1 / (1 + k / n_p)`` for the k-th of ``n_p`` actions."""
    if n_p < 1 or not 1 <= k <= n_p:
        raise ValueError(f"decay context requires 1 <= k <= N_p, got k={k}, N_p={n_p}")
    return 1.0 / (1.0 + k / n_p)


def commit_weight(loc: int, decay: float, base: float = 8.0) -> float:
    if loc < 0:
        raise ValueError("loc must be non-negative")
    if not 0.0 < decay <= 1.0:
        raise ValueError("decay must lie in (0, 1]")
    if loc == 0:
        return 0.0
    return base * math.log10(loc) * decay


class InteractionLog:
    """Flat per-interaction arrays for a corpus, built once.

    Snapshots at any month are then a masked prefix of these arrays, so the
    monthly recomputation used by feature assembly stays vectorised.
    """

    def __init__(self, timelines: Iterable[RepoTimeline], scheme: EdgeScheme = DEFAULT_SCHEME):
        self.scheme = scheme
        tls = sorted(timelines, key=lambda t: t.repo_id)
        self.repo_ids = [t.repo_id for t in tls]
        user_index: dict[str, int] = {}
        months, repos, users, ordinals, classes, locs = [], [], [], [], [], []
        for r, tl in enumerate(tls):
            starred: set[str] = set()
            k = 0
            for ev in tl.events:  # already ordered by (timestamp, user_id, kind)
                cls = CLASS_OF_KIND.get(ev.kind)
                if cls is None:
                    continue
                if cls == "star":
                    if ev.user_id in starred:
                        continue
                    starred.add(ev.user_id)
                k += 1
                months.append(month_index(ev.timestamp))
                repos.append(r)
                users.append(user_index.setdefault(ev.user_id, len(user_index)))
                ordinals.append(k)
                classes.append(CLASSES.index(cls))
                locs.append(ev.loc_changed)
        self.user_ids = list(user_index)
        self.month = np.asarray(months, dtype=np.int64)
        self.repo = np.asarray(repos, dtype=np.int64)
        self.user = np.asarray(users, dtype=np.int64)
        self.ordinal = np.asarray(ordinals, dtype=np.float64)
        self.cls = np.asarray(classes, dtype=np.int64)
        loc = np.asarray(locs, dtype=np.float64)
        base = np.array([scheme.base(c) for c in CLASSES])[self.cls] if len(classes) else np.zeros(0)
        is_commit = self.cls == CLASSES.index("commit")
        if scheme.log_loc:
            factor = np.where(loc > 0, np.log10(np.maximum(loc, 1.0)), 0.0)
            base = np.where(is_commit, base * factor, base)
        self.base = base

    def event_weights(self, as_of: int) -> tuple[np.ndarray, np.ndarray]:
        """(mask of interactions at or before ``as_of``, their decayed weights)."""
        mask = self.month <= as_of
        repo = self.repo[mask]
        w = self.base[mask]
        if self.scheme.decay and len(repo):
            n_p = np.bincount(repo, minlength=len(self.repo_ids)).astype(np.float64)
            w = w / (1.0 + self.ordinal[mask] / n_p[repo])
        return mask, w

    def matrix(self, as_of: int) -> sp.csr_matrix:
        """Users x repositories matrix of total edge weights."""
        mask, w = self.event_weights(as_of)
        shape = (len(self.user_ids), len(self.repo_ids))
        # explicit zeros are kept so zero-weight pairs remain edges
        return sp.coo_matrix((w, (self.user[mask], self.repo[mask])), shape=shape).tocsr()

    def edges(self, as_of: int) -> list[EdgeWeight]:
        mask, w = self.event_weights(as_of)
        acc: dict[tuple[int, int], list[float]] = {}
        for u, r, c, x in zip(self.user[mask], self.repo[mask], self.cls[mask], w):
            slot = acc.setdefault((int(u), int(r)), [0.0, 0.0, 0.0, 0.0])
            slot[int(c)] += float(x)
        out = [
            EdgeWeight(self.user_ids[u], self.repo_ids[r], *vals)
            for (u, r), vals in acc.items()
        ]
        out.sort(key=lambda e: (e.user_id, e.repo_id))
        return out

    def snapshot(self, as_of: int, tol: float = 1e-9, max_iter: int = 100) -> InfluenceState:
        mat = self.matrix(as_of)
        active_users = np.flatnonzero(np.diff(mat.indptr) > 0)
        active_repos = np.unique(mat.indices)
        sub = mat[active_users][:, active_repos]
        pqs, uis, it, conv = _hits(sub, tol, max_iter)
        return InfluenceState(
            snapshot_month=as_of,
            pqs={self.repo_ids[r]: float(v) for r, v in zip(active_repos, pqs)},
            uis={self.user_ids[u]: float(v) for u, v in zip(active_users, uis)},
            iterations=it,
            converged=conv,
        )


def build_edges(
    timelines: Iterable[RepoTimeline], as_of: int, scheme: EdgeScheme = DEFAULT_SCHEME
) -> list[EdgeWeight]:
    """All user-repository edges with interactions at or before month ``as_of``."""
    return InteractionLog(timelines, scheme).edges(as_of)


def _hits(w: sp.csr_matrix, tol: float, max_iter: int) -> tuple[np.ndarray, np.ndarray, int, bool]:
    n_users, n_repos = w.shape
    if n_users == 0 or n_repos == 0:
        return np.zeros(n_repos), np.zeros(n_users), 0, True
    if w.sum() <= 0.0:
        return np.full(n_repos, 1.0 / n_repos), np.full(n_users, 1.0 / n_users), 0, True
    wt = w.T.tocsr()
    uis = np.ones(n_users)
    pqs = np.ones(n_repos)
    for it in range(1, max_iter + 1):
        new_pqs = wt @ uis
        new_pqs /= new_pqs.sum()
        new_uis = w @ new_pqs
        new_uis /= new_uis.sum()
        delta = max(np.abs(new_pqs - pqs).max(), np.abs(new_uis - uis).max())
        pqs, uis = new_pqs, new_uis
        if delta < tol:
            return pqs, uis, it, True
    return pqs, uis, max_iter, False


def run_hits(edges: Iterable[EdgeWeight], tol: float = 1e-9, max_iter: int = 100) -> InfluenceState:
    """Alternate PQS/UIS updates from all-ones scores until the largest change < ``tol``."""
    if tol <= 0 or max_iter < 1:
        raise ValueError("tol must be > 0 and max_iter >= 1")
    edges = list(edges)
    users = sorted({e.user_id for e in edges})
    repos = sorted({e.repo_id for e in edges})
    ui = {u: i for i, u in enumerate(users)}
    ri = {r: i for i, r in enumerate(repos)}
    rows = [ui[e.user_id] for e in edges]
    cols = [ri[e.repo_id] for e in edges]
    vals = [e.w_total for e in edges]
    mat = sp.coo_matrix((vals, (rows, cols)), shape=(len(users), len(repos))).tocsr()
    pqs, uis, it, conv = _hits(mat, tol, max_iter)
    return InfluenceState(
        snapshot_month=None,
        pqs=dict(zip(repos, map(float, pqs))),
        uis=dict(zip(users, map(float, uis))),
        iterations=it,
        converged=conv,
    )


def weight_feature(
    edges: Iterable[EdgeWeight] | None, state: InfluenceState, repo_ids: Iterable[str] | None = None
) -> dict[str, float]:
    """Raw user-centric ``weight`` per repository: its PQS, 0 when absent."""
    if repo_ids is None:
        repo_ids = sorted(state.pqs) if edges is None else sorted({e.repo_id for e in edges} | set(state.pqs))
    return {r: state.pqs.get(r, 0.0) for r in repo_ids}


def normalize(raw: Mapping[str, float]) -> dict[str, NormalizedWeight]:
    """Percentile rank and log z-score of raw weights within one window."""
    if not raw:
        raise ValueError("cannot normalise an empty window")
    keys = list(raw)
    vals = np.array([raw[k] for k in keys], dtype=np.float64)
    if (vals < 0).any():
        raise ValueError("raw weights must be non-negative")
    pct = rankdata(vals, method="average") / len(vals)
    z = np.zeros(len(vals))
    pos = vals > 0
    if pos.any() and not np.all(vals == vals[0]):
        logs = np.log(vals[pos])
        mu, sigma = logs.mean(), logs.std()
        if sigma > 0:
            z[pos] = (logs - mu) / sigma
            z[~pos] = z[pos].min()
    return {
        k: NormalizedWeight(k, float(v), float(p), float(s))
        for k, v, p, s in zip(keys, vals, pct, z)
    }


def write_snapshot_csv(path, rows: Iterable[tuple[int, str, NormalizedWeight]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(SNAPSHOT_COLUMNS)
        for month, repo_id, nw in rows:
            out.writerow([format_month(month), repo_id, repr(nw.raw), repr(nw.pct_rank), repr(nw.zscore)])
