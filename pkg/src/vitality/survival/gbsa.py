"""Horizon classifier: will a repository cease within ``horizon`` months of T?"""
from __future__ import annotations

from datetime import datetime
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.special import expit

from ..corpus import RepoTimeline
from ..timeutil import add_months
from .boosting import BoostedModel, LossKind, TrainConfig, fit_logistic, predict_margin


class GbsaLabel(str, Enum):
    POSITIVE = "Positive"
    NEGATIVE = "Negative"


def alive_at(timeline: RepoTimeline, T: datetime) -> bool:
    if timeline.created_at >= T:
        return False
    ct = timeline.label.cessation_time
    return not (timeline.label.ceased and ct <= T)


def gbsa_label(timeline: RepoTimeline, T: datetime, horizon_months: int) -> GbsaLabel:
    """Positive iff cessation falls in ``(T, T + horizon]``."""
    if not alive_at(timeline, T):
        raise ValueError(f"{timeline.repo_id} is not alive at {T:%Y-%m-%d}")
    ct = timeline.label.cessation_time
    if timeline.label.ceased and T < ct <= add_months(T, horizon_months):
        return GbsaLabel.POSITIVE
    return GbsaLabel.NEGATIVE


def balance_classes(y, seed: int) -> np.ndarray:
    """Indices of a 1:1 class-balanced subset (majority class downsampled)."""
    y = np.asarray(y).astype(bool)
    pos = np.flatnonzero(y)
    neg = np.flatnonzero(~y)
    if len(pos) == 0 or len(neg) == 0:
        raise ValueError("class balancing needs both classes")
    rng = np.random.default_rng(seed)
    if len(pos) > len(neg):
        pos = rng.choice(pos, size=len(neg), replace=False)
    elif len(neg) > len(pos):
        neg = rng.choice(neg, size=len(pos), replace=False)
    return np.sort(np.concatenate([pos, neg]))


def gbsa_fit(X, y, config: TrainConfig = TrainConfig(),
             feature_names: Sequence[str] | None = None) -> BoostedModel:
    """Balance the classes, then boost a logistic model on the horizon labels."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y).astype(bool)
    if y.all() or not y.any():
        raise ValueError("GBSA training needs both positive and negative samples")
    keep = balance_classes(y, config.seed)
    return fit_logistic(X[keep], y[keep].astype(np.float64), config, feature_names)


def gbsa_predict_proba(model: BoostedModel, X) -> np.ndarray:
    if model.loss_kind is not LossKind.LOGISTIC:
        raise ValueError("not a classifier model")
    return expit(predict_margin(model, X))


def gbsa_predict(model: BoostedModel, X, threshold: float = 0.5) -> np.ndarray:
    return gbsa_predict_proba(model, X) >= threshold
