"""Boosted survival models: AFT regression and the horizon classifier."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .boosting import (
    BoostedModel,
    LossKind,
    TrainConfig,
    aft_nloglik,
    feature_split_counts,
    fit,
    fit_logistic,
    load_model,
    predict_log_time,
    predict_margin,
    save_model,
)
from .gbsa import GbsaLabel, alive_at, balance_classes, gbsa_fit, gbsa_label, gbsa_predict, gbsa_predict_proba
from .losses import aft_loss, aft_normal, logistic
from .tuning import ConfigError, tune


@dataclass(frozen=True)
class SurvivalSample:
    features: np.ndarray        # NaN marks a missing value
    duration_months: float
    event: bool
    repo_id: str = ""

    def __post_init__(self):
        if not self.duration_months > 0:
            raise ValueError(f"duration must be positive, got {self.duration_months}")

    @property
    def missing(self) -> np.ndarray:
        return np.isnan(self.features)


def stack(samples):
    """Samples to ``(X, durations, events)`` arrays."""
    X = np.vstack([s.features for s in samples]).astype(np.float64)
    d = np.array([s.duration_months for s in samples], dtype=np.float64)
    e = np.array([s.event for s in samples], dtype=bool)
    return X, d, e


__all__ = [
    "BoostedModel", "ConfigError", "GbsaLabel", "LossKind", "SurvivalSample", "TrainConfig",
    "aft_loss", "aft_nloglik", "aft_normal", "alive_at", "balance_classes", "feature_split_counts",
    "fit", "fit_logistic", "gbsa_fit", "gbsa_label", "gbsa_predict", "gbsa_predict_proba",
    "load_model", "logistic", "predict_log_time", "predict_margin", "save_model", "stack", "tune",
]
