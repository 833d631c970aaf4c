"""Seeded random search over boosting hyperparameters."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .boosting import TrainConfig, aft_nloglik, fit, fit_logistic, holdout_split, predict_margin
from .gbsa import balance_classes

DEFAULT_SPACE = {
    "learning_rate": (0.03, 0.3),
    "max_depth": (2, 6),
    "min_samples_leaf": (5, 40),
    "subsample": (0.6, 1.0),
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Trial:
    index: int
    params: dict
    metric: float

    def to_record(self) -> dict:
        return {"trial": self.index, "params": self.params, "metric": self.metric}


def _sample(space: dict, rng: np.random.Generator) -> dict:
    out = {}
    for name in sorted(space):
        dom = space[name]
        if isinstance(dom, tuple):
            lo, hi = dom
            if lo > hi:
                raise ConfigError(f"empty range for {name}: {dom}")
            if isinstance(lo, int) and isinstance(hi, int):
                out[name] = int(rng.integers(lo, hi + 1))
            else:
                out[name] = float(rng.uniform(lo, hi))
        elif isinstance(dom, list):
            if not dom:
                raise ConfigError(f"no choices for {name}")
            out[name] = dom[int(rng.integers(len(dom)))]
        else:
            raise ConfigError(f"{name}: expected (lo, hi) tuple or list of choices")
    return out


def _balanced_error(y_true, y_pred) -> float:
    y_true = np.asarray(y_true, bool)
    y_pred = np.asarray(y_pred, bool)
    tpr = (y_pred & y_true).sum() / max(1, y_true.sum())
    tnr = (~y_pred & ~y_true).sum() / max(1, (~y_true).sum())
    return 1.0 - 0.5 * (tpr + tnr)


def tune(X, target, search_space: dict | None = None, budget: int = 20, seed: int = 0,
         kind: str = "aft", base: TrainConfig = TrainConfig(), feature_names=None):
    """Return ``(best_config, trials)``.

    ``target`` is ``(durations, events)`` for ``kind="aft"`` and a boolean label
    vector for ``kind="gbsa"``.  AFT trials are scored by validation nloglik,
    classifier trials by ``1 - balanced accuracy``; lower is better.
    """
    if budget < 1:
        raise ConfigError("budget must be at least 1")
    space = DEFAULT_SPACE if search_space is None else search_space
    if not space:
        raise ConfigError("search space is empty")
    if kind not in ("aft", "gbsa"):
        raise ConfigError(f"unknown model kind {kind!r}")

    X = np.asarray(X, dtype=np.float64)
    rng = np.random.default_rng(seed)
    if kind == "aft":
        durations, events = (np.asarray(a) for a in target)
        tr, va = holdout_split(len(X), 0.2, rng)
    else:
        y = np.asarray(target, bool)
        tr, va = holdout_split(len(X), 0.2, rng, stratify=y)

    trials: list[Trial] = []
    for i in range(budget):
        params = _sample(space, rng)
        try:
            cfg = base.with_overrides(params)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        if kind == "aft":
            model = fit(X[tr], durations[tr], events[tr], cfg, feature_names)
            metric = aft_nloglik(model, X[va], durations[va], events[va])
        else:
            keep = tr[balance_classes(y[tr], cfg.seed)]
            model = fit_logistic(X[keep], y[keep].astype(float), cfg, feature_names)
            metric = _balanced_error(y[va], predict_margin(model, X[va]) >= 0.0)
        trials.append(Trial(i, params, float(metric)))

    best = min(trials, key=lambda t: (t.metric, t.index))
    return base.with_overrides(best.params), trials


def write_trials(path, trials) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for t in trials:
            fh.write(json.dumps(t.to_record(), sort_keys=True) + "\n")
