"""Evaluation: concordance indices, confusion metrics, ablation and importance."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np

from .features import EVOLUTION, HITS_FEATURE, MAINTAINER_CENTRIC, SURFACE, USER_CENTRIC
from .survival.boosting import BoostedModel, TrainConfig, feature_split_counts, fit, holdout_split, predict_margin
from .survival.tuning import ConfigError


class ConcordanceError(ValueError):
    pass


@dataclass(frozen=True)
class Concordance:
    cindex: float
    concordant: float
    discordant: float
    tied_risk: float
    n_pairs: int


def _as_arrays(risk, durations, events):
    risk = np.asarray(risk, dtype=np.float64)
    t = np.asarray(durations, dtype=np.float64)
    e = np.asarray(events, dtype=bool)
    if not (risk.shape == t.shape == e.shape) or risk.ndim != 1:
        raise ValueError("risk, durations and events must be 1-d and equally long")
    if np.isnan(risk).any():
        raise ValueError("risk scores contain NaN")
    return risk, t, e


def _comparable(t, e) -> np.ndarray:
    # i fails first (observed) and j is known to outlive it; a censored j at the same time counts
    ti, tj = t[:, None], t[None, :]
    return e[:, None] & ((ti < tj) | ((ti == tj) & ~e[None, :]))


def _weighted_concordance(risk, t, e, w) -> Concordance:
    comp = _comparable(t, e) & (w[:, None] > 0)
    n_pairs = int(comp.sum())
    if n_pairs == 0:
        raise ConcordanceError("no comparable pairs")
    ri, rj = risk[:, None], risk[None, :]
    W = np.broadcast_to(w[:, None], comp.shape)
    conc = float(W[comp & (ri > rj)].sum())
    disc = float(W[comp & (ri < rj)].sum())
    tied = float(W[comp & (ri == rj)].sum())
    total = conc + disc + tied
    return Concordance((conc + 0.5 * tied) / total, conc, disc, tied, n_pairs)


def concordance(risk, durations, events) -> Concordance:
    risk, t, e = _as_arrays(risk, durations, events)
    return _weighted_concordance(risk, t, e, np.ones(len(t)))


def harrell_c(risk, durations, events) -> float:
    """Harrell's C: higher risk should go with shorter survival; risk ties count one half."""
    return concordance(risk, durations, events).cindex


def censoring_survival(durations, events):
    """Kaplan-Meier estimate of the censoring distribution ``G``.

    Censorings are the "events" here.  Observed failures at a tied time leave
    the risk set first, so ``G`` only drops for censorings.  Returns the
    distinct times and ``G`` just after each of them.
    """
    t = np.asarray(durations, dtype=np.float64)
    e = np.asarray(events, dtype=bool)
    times, inv = np.unique(t, return_inverse=True)
    n_cens = np.bincount(inv, weights=~e, minlength=len(times))
    n_fail = np.bincount(inv, weights=e, minlength=len(times))
    n_total = np.bincount(inv, minlength=len(times))
    at_risk = np.cumsum(n_total[::-1])[::-1] - n_fail
    with np.errstate(divide="ignore", invalid="ignore"):
        step = np.where(at_risk > 0, 1.0 - n_cens / at_risk, 1.0)
    return times, np.cumprod(step)


def _eval_step(times, surv, x):
    pos = np.searchsorted(times, x, side="right") - 1
    return np.where(pos >= 0, surv[np.clip(pos, 0, None)], 1.0)


def uno_weighted(risk, durations, events, tau: float | None = None) -> Concordance:
    risk, t, e = _as_arrays(risk, durations, events)
    if tau is not None and tau > t.max():
        raise ValueError(f"tau={tau} exceeds the largest observed duration {t.max()}")
    times, G = censoring_survival(t, e)
    g = _eval_step(times, G, t)
    need = e if tau is None else e & (t < tau)
    if (g[need] <= 0).any():
        raise ConcordanceError("censoring survival is zero at an observed event time; shrink tau")
    w = np.zeros(len(t))
    w[need] = 1.0 / (g[need] ** 2)
    return _weighted_concordance(risk, t, e, w)


def uno_c(risk, durations, events, tau: float | None = None) -> float:
    """Uno's IPCW concordance; ``tau=None`` keeps every comparable pair."""
    return uno_weighted(risk, durations, events, tau).cindex


def default_tau(durations, q: float = 80.0) -> float:
    return float(np.percentile(np.asarray(durations, dtype=np.float64), q))


# -- classification ----------------------------------------------------------

@dataclass(frozen=True)
class ClassificationMetrics:
    accuracy: float
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int
    tn: int
    flags: tuple[str, ...] = ()

    @property
    def balanced_accuracy(self) -> float:
        tpr = self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0
        tnr = self.tn / (self.tn + self.fp) if self.tn + self.fp else 0.0
        return 0.5 * (tpr + tnr)


def confusion_metrics(tp: int, fp: int, fn: int, tn: int) -> ClassificationMetrics:
    n = tp + fp + fn + tn
    if n == 0:
        raise ValueError("empty confusion matrix")
    flags = []
    if tp + fp:
        precision = tp / (tp + fp)
    else:
        precision = 0.0
        flags.append("precision_undefined")
    if tp + fn:
        recall = tp / (tp + fn)
    else:
        recall = 0.0
        flags.append("recall_undefined")
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return ClassificationMetrics((tp + tn) / n, precision, recall, f1, tp, fp, fn, tn, tuple(flags))


def classification_metrics(pred, truth) -> ClassificationMetrics:
    pred = np.asarray(pred, dtype=bool)
    truth = np.asarray(truth, dtype=bool)
    if pred.shape != truth.shape:
        raise ValueError("pred and truth differ in length")
    if pred.size == 0:
        raise ValueError("no predictions")
    tp = int((pred & truth).sum())
    fp = int((pred & ~truth).sum())
    fn = int((~pred & truth).sum())
    tn = int((~pred & ~truth).sum())
    return confusion_metrics(tp, fp, fn, tn)


def balanced_accuracy(pred, truth) -> float:
    return classification_metrics(pred, truth).balanced_accuracy


# -- feature groups and ablation ----------------------------------------------

class GroupTag(str, Enum):
    S = "S"
    H = "H"
    U = "U"
    M = "M"
    P = "P"


@dataclass(frozen=True)
class FeatureGroup:
    tag: GroupTag
    members: tuple[str, ...]


GROUPS = {
    GroupTag.S: FeatureGroup(GroupTag.S, SURFACE),
    GroupTag.H: FeatureGroup(GroupTag.H, (HITS_FEATURE,)),
    GroupTag.U: FeatureGroup(GroupTag.U, USER_CENTRIC),
    GroupTag.M: FeatureGroup(GroupTag.M, MAINTAINER_CENTRIC),
    GroupTag.P: FeatureGroup(GroupTag.P, EVOLUTION),
}

DEFAULT_COMBOS = ("S", "S-stars", "S+H", "S+U", "S+M", "S+P", "U+M+P", "All")


def resolve_combo(combo: str, groups: Mapping[GroupTag, FeatureGroup] = GROUPS) -> tuple[str, ...]:
    """Feature names for a combo such as ``"S+U"``, ``"S-stars"`` or ``"All"``.

    ``All`` covers the S, U, M and P groups; the raw HITS score is only
    reachable through an explicit ``H``.
    """
    expr = combo.replace(" ", "").replace("−", "-")
    if not expr:
        raise ConfigError("empty combo")
    if expr == "All":
        expr = "S+U+M+P"
    head, *drops = expr.split("-")
    names: list[str] = []
    for tag in head.split("+"):
        try:
            g = groups[GroupTag(tag)]
        except (ValueError, KeyError):
            raise ConfigError(f"unknown feature group {tag!r} in combo {combo!r}") from None
        names.extend(n for n in g.members if n not in names)
    for d in drops:
        if d not in names:
            raise ConfigError(f"combo {combo!r} drops {d!r}, which it does not contain")
        names.remove(d)
    if not names:
        raise ConfigError(f"combo {combo!r} selects no features")
    return tuple(names)


@dataclass(frozen=True)
class EvalReport:
    combo: str
    features: tuple[str, ...]
    harrell_c: float
    uno_c: float
    n_pairs_used: int
    tau: float
    n_train: int
    n_test: int
    fingerprint: str

    def to_row(self) -> dict:
        return {
            "combo": self.combo,
            "n_features": len(self.features),
            "harrell_c": repr(self.harrell_c),
            "uno_c": repr(self.uno_c),
            "n_pairs_used": self.n_pairs_used,
            "tau": repr(self.tau),
            "n_train": self.n_train,
            "n_test": self.n_test,
            "fingerprint": self.fingerprint,
        }


REPORT_COLUMNS = ("combo", "n_features", "harrell_c", "uno_c", "n_pairs_used", "tau", "n_train", "n_test", "fingerprint")


def fingerprint(payload: Mapping) -> str:
    blob = json.dumps(payload, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def evaluate_aft(model: BoostedModel, X, durations, events, tau: float | None = None):
    """``(harrell, uno, n_pairs, tau)`` for an AFT model; risk is minus predicted log time."""
    risk = -predict_margin(model, X)
    if tau is None:
        tau = default_tau(durations)
    h = harrell_c(risk, durations, events)
    u = uno_weighted(risk, durations, events, tau)
    return h, u.cindex, u.n_pairs, tau


def ablate(X, names: Sequence[str], durations, events, combos: Iterable[str] = DEFAULT_COMBOS,
           config: TrainConfig = TrainConfig(), seed: int | None = None,
           test_frac: float = 0.2) -> list[EvalReport]:
    """Train one AFT model per combo on a shared train/test split."""
    X = np.asarray(X, dtype=np.float64)
    durations = np.asarray(durations, dtype=np.float64)
    events = np.asarray(events, dtype=bool)
    names = list(names)
    col = {n: i for i, n in enumerate(names)}
    seed = config.seed if seed is None else seed
    combos = list(combos)
    if not combos:
        raise ConfigError("no combos to evaluate")
    resolved = []
    for c in combos:
        feats = resolve_combo(c)
        missing = [f for f in feats if f not in col]
        if missing:
            raise ConfigError(f"combo {c!r} needs absent features {missing}")
        resolved.append((c, feats))

    tr, te = holdout_split(len(X), test_frac, np.random.default_rng(seed))
    tau = default_tau(durations[te])
    reports = []
    for c, feats in resolved:
        # canonical column order so permuted inputs train the same model
        cols = sorted(feats)
        idx = [col[f] for f in cols]
        model = fit(X[np.ix_(tr, idx)], durations[tr], events[tr], config, cols)
        h, u, n_pairs, _ = evaluate_aft(model, X[np.ix_(te, idx)], durations[te], events[te], tau)
        fp = fingerprint({"combo": c, "features": cols, "config": config.to_dict(), "seed": seed,
                          "n": len(X), "test_frac": test_frac})
        reports.append(EvalReport(c, tuple(feats), h, u, n_pairs, tau, len(tr), len(te), fp))
    return reports


def reports_csv(reports: Sequence[EvalReport]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=REPORT_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in reports:
        w.writerow(r.to_row())
    return buf.getvalue()


def reports_table(reports: Sequence[EvalReport]) -> str:
    lines = [f"{'Features':<10} {'Harrell C':>10} {'Uno C':>10} {'pairs':>7}"]
    lines.append("-" * len(lines[0]))
    for r in reports:
        lines.append(f"{r.combo:<10} {r.harrell_c:>10.4f} {r.uno_c:>10.4f} {r.n_pairs_used:>7d}")
    return "\n".join(lines) + "\n"


# -- importance ----------------------------------------------------------------

@dataclass(frozen=True)
class GroupImportance:
    tag: str
    score: float
    used: dict = field(default_factory=dict)
    unused: tuple[str, ...] = ()
    flagged: bool = False


def geometric_mean_positive(values: Iterable[float]) -> float:
    pos = [v for v in values if v > 0]
    if not pos:
        return 0.0
    return math.exp(sum(math.log(v) for v in pos) / len(pos))


def group_importance(model: BoostedModel, groups: Mapping = GROUPS) -> dict[str, GroupImportance]:
    """Geometric mean of the split counts of each group's features that were used at all."""
    counts = feature_split_counts(model)
    out = {}
    for key, g in groups.items():
        tag = key.value if isinstance(key, GroupTag) else str(key)
        members = [m for m in g.members if m in counts]
        used = {m: counts[m] for m in members if counts[m] > 0}
        unused = tuple(m for m in members if counts[m] == 0)
        score = geometric_mean_positive(used.values())
        out[tag] = GroupImportance(tag, score, used, unused, flagged=not used)
    return out
