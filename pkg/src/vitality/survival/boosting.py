"""Gradient-boosted trees for AFT survival regression and logistic classification."""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, fields, replace
from enum import Enum
from typing import Sequence

import numpy as np

from .losses import aft_normal, logistic
from .tree import RegressionTree, grow_tree

log = logging.getLogger(__name__)

MODEL_FORMAT = "vitality.boosted/1"
REG_LAMBDA = 1.0
MAX_BACKTRACK = 20


class LossKind(str, Enum):
    AFT_NORMAL = "AftNormal"
    LOGISTIC = "Logistic"


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    max_depth: int = 4
    min_samples_leaf: int = 20
    subsample: float = 1.0
    n_rounds: int = 200
    early_stopping_rounds: int | None = 20
    sigma: float = 1.0
    seed: int = 0

    def __post_init__(self):
        for name in ("learning_rate", "max_depth", "min_samples_leaf", "n_rounds", "sigma"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 < self.subsample <= 1.0:
            raise ValueError("subsample must lie in (0, 1]")
        if self.early_stopping_rounds is not None and self.early_stopping_rounds <= 0:
            raise ValueError("early_stopping_rounds must be positive or None")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")

    def with_overrides(self, overrides: dict) -> "TrainConfig":
        known = {f.name for f in fields(self)}
        unknown = set(overrides) - known
        if unknown:
            raise ValueError(f"unknown training options: {sorted(unknown)}")
        return replace(self, **overrides)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class BoostedModel:
    trees: list[RegressionTree]
    learning_rate: float
    base_score: float
    loss_kind: LossKind
    sigma: float
    feature_names: list[str]
    train_loss: list[float] = field(default_factory=list)
    valid_loss: list[float] = field(default_factory=list)
    meta: dict = field(default_factory=dict)   # run provenance (seed, config); not used for prediction

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "loss_kind": self.loss_kind.value,
            "learning_rate": self.learning_rate,
            "base_score": self.base_score,
            "sigma": self.sigma,
            "feature_names": list(self.feature_names),
            "trees": [t.to_dict() for t in self.trees],
            "train_loss": list(self.train_loss),
            "valid_loss": list(self.valid_loss),
            "meta": self.meta,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "BoostedModel":
        if d.get("format") != MODEL_FORMAT:
            raise ValueError(f"unsupported model format {d.get('format')!r}")
        return cls(
            trees=[RegressionTree.from_dict(t) for t in d["trees"]],
            learning_rate=float(d["learning_rate"]),
            base_score=float(d["base_score"]),
            loss_kind=LossKind(d["loss_kind"]),
            sigma=float(d["sigma"]),
            feature_names=list(d["feature_names"]),
            train_loss=[float(v) for v in d.get("train_loss", [])],
            valid_loss=[float(v) for v in d.get("valid_loss", [])],
            meta=dict(d.get("meta", {})),
        )

    @classmethod
    def loads(cls, text: str) -> "BoostedModel":
        return cls.from_dict(json.loads(text))


def save_model(model: BoostedModel, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(model.dumps())
        fh.write("\n")


def load_model(path) -> BoostedModel:
    with open(path, encoding="utf-8") as fh:
        return BoostedModel.loads(fh.read())


def _check_matrix(model: BoostedModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != model.n_features:
        raise ValueError(f"expected {model.n_features} features, got {X.shape[1]}")
    return X


def predict_margin(model: BoostedModel, X) -> np.ndarray:
    """Raw additive output: log time for AFT, log-odds for logistic."""
    X = _check_matrix(model, X)
    out = np.full(X.shape[0], model.base_score)
    for tree in model.trees:
        out += model.learning_rate * tree.predict(X)
    return out


def predict_log_time(model: BoostedModel, features) -> float | np.ndarray:
    """Predicted log lifespan; a single vector gives a float.  Risk is its negation."""
    single = np.ndim(features) == 1
    out = predict_margin(model, features)
    return float(out[0]) if single else out


def _objective(kind: LossKind, sigma: float):
    if kind is LossKind.AFT_NORMAL:
        def fn(pred, target):
            log_t, event = target
            return aft_normal(pred, log_t, event, sigma)
    else:
        def fn(pred, target):
            return logistic(pred, target)
    return fn


def _take(target, idx):
    if isinstance(target, tuple):
        return tuple(t[idx] for t in target)
    return target[idx]


def _boost(X, target, kind: LossKind, base_score: float, config: TrainConfig,
           feature_names: Sequence[str], stratify=None) -> BoostedModel:
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    rng = np.random.default_rng(config.seed)
    objective = _objective(kind, config.sigma)

    train_idx = np.arange(n)
    valid_idx = np.zeros(0, dtype=np.int64)
    if config.early_stopping_rounds is not None and n >= 10:
        train_idx, valid_idx = holdout_split(n, 0.2, rng, stratify=stratify)

    Xt, tt = X[train_idx], _take(target, train_idx)
    Xv, tv = X[valid_idx], _take(target, valid_idx)
    margin_t = np.full(len(train_idx), base_score)
    margin_v = np.full(len(valid_idx), base_score)

    model = BoostedModel([], config.learning_rate, base_score, kind, config.sigma, list(feature_names))
    loss_t = objective(margin_t, tt)[0].mean()
    best_valid, best_round, stale = np.inf, 0, 0
    for _ in range(config.n_rounds):
        _, grad, hess = objective(margin_t, tt)
        rows = np.arange(len(train_idx))
        if config.subsample < 1.0:
            k = max(1, int(round(config.subsample * len(rows))))
            rows = np.sort(rng.choice(rows, size=k, replace=False))
        tree = grow_tree(
            Xt, grad, hess, rows,
            max_depth=config.max_depth,
            min_samples_leaf=config.min_samples_leaf,
            reg_lambda=REG_LAMBDA,
        )
        step = config.learning_rate * tree.predict(Xt)
        new_loss = objective(margin_t + step, tt)[0].mean()
        # keep the training objective monotone: shrink an overshooting tree
        shrink = 0
        while new_loss > loss_t and shrink < MAX_BACKTRACK:
            tree.scale(0.5)
            step *= 0.5
            new_loss = objective(margin_t + step, tt)[0].mean()
            shrink += 1
        if new_loss > loss_t:
            tree = RegressionTree([-1], [0.0], [-1], [-1], [True], [0.0])
            step[:] = 0.0
            new_loss = loss_t
        elif shrink:
            log.debug("round %d: tree shrunk by 2^-%d", len(model.trees), shrink)
        margin_t += step
        loss_t = new_loss
        model.trees.append(tree)
        model.train_loss.append(float(loss_t))

        if len(valid_idx):
            margin_v += config.learning_rate * tree.predict(Xv)
            v = float(objective(margin_v, tv)[0].mean())
            model.valid_loss.append(v)
            if v < best_valid - 1e-12:
                best_valid, best_round, stale = v, len(model.trees), 0
            else:
                stale += 1
                if stale >= config.early_stopping_rounds:
                    break
    if len(valid_idx) and best_round:
        del model.trees[best_round:]
    return model


def holdout_split(n: int, frac: float, rng: np.random.Generator, stratify=None):
    """Random (train, holdout) index split; stratified when labels are given."""
    if stratify is None:
        perm = rng.permutation(n)
        k = max(1, int(round(frac * n)))
        return np.sort(perm[k:]), np.sort(perm[:k])
    stratify = np.asarray(stratify)
    train, hold = [], []
    for cls in np.unique(stratify):
        members = np.flatnonzero(stratify == cls)
        perm = rng.permutation(members)
        k = int(round(frac * len(members)))
        hold.append(perm[:k])
        train.append(perm[k:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(hold))


def fit(X, durations, events, config: TrainConfig = TrainConfig(),
        feature_names: Sequence[str] | None = None) -> BoostedModel:
    """Boost AFT-normal trees on right-censored durations (months)."""
    X = np.asarray(X, dtype=np.float64)
    durations = np.asarray(durations, dtype=np.float64)
    events = np.asarray(events, dtype=bool)
    if not (len(X) == len(durations) == len(events)):
        raise ValueError("X, durations and events differ in length")
    if (durations <= 0).any():
        raise ValueError("durations must be positive")
    if events.sum() == 0:
        raise ValueError("all samples are censored: the AFT likelihood is unbounded")
    if events.sum() < 2:
        raise ValueError("need at least two observed events")
    names = list(feature_names) if feature_names is not None else [f"f{i}" for i in range(X.shape[1])]
    log_t = np.log(durations)
    return _boost(X, (log_t, events), LossKind.AFT_NORMAL, float(log_t.mean()), config, names)


def fit_logistic(X, y, config: TrainConfig = TrainConfig(),
                 feature_names: Sequence[str] | None = None) -> BoostedModel:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(X) != len(y):
        raise ValueError("X and y differ in length")
    if len(np.unique(y)) < 2:
        raise ValueError("logistic boosting needs both classes")
    p = float(y.mean())
    names = list(feature_names) if feature_names is not None else [f"f{i}" for i in range(X.shape[1])]
    return _boost(X, y, LossKind.LOGISTIC, float(np.log(p / (1.0 - p))), config, names, stratify=y)


def aft_nloglik(model: BoostedModel, X, durations, events) -> float:
    pred = predict_margin(model, X)
    return float(aft_normal(pred, np.log(durations), np.asarray(events, bool), model.sigma)[0].mean())


def feature_split_counts(model: BoostedModel) -> dict[str, int]:
    """F-score: number of splits on each feature over all trees."""
    counts = dict.fromkeys(model.feature_names, 0)
    for tree in model.trees:
        for f in tree.split_features():
            counts[model.feature_names[f]] += 1
    return counts
