"""Second-order regression trees with sparsity-aware (missing value) splits.

Splits are found by exact greedy search over sorted unique feature values
with midpoint thresholds.  Missing values (``NaN``) are routed to whichever
side gives the larger gain, and that side is stored as the node's default
direction.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MIN_GAIN = 1e-12


@dataclass
class RegressionTree:
    feature: list[int] = field(default_factory=list)       # -1 marks a leaf
    threshold: list[float] = field(default_factory=list)
    left: list[int] = field(default_factory=list)
    right: list[int] = field(default_factory=list)
    default_left: list[bool] = field(default_factory=list)
    value: list[float] = field(default_factory=list)

    def _add(self, feature=-1, threshold=0.0, default_left=True, value=0.0) -> int:
        self.feature.append(feature)
        self.threshold.append(threshold)
        self.left.append(-1)
        self.right.append(-1)
        self.default_left.append(default_left)
        self.value.append(value)
        return len(self.feature) - 1

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def split_features(self) -> list[int]:
        return [f for f in self.feature if f >= 0]

    def scale(self, factor: float) -> None:
        self.value = [v * factor for v in self.value]

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row of ``X``."""
        feature = np.asarray(self.feature)
        threshold = np.asarray(self.threshold, dtype=np.float64)
        left = np.asarray(self.left)
        right = np.asarray(self.right)
        default_left = np.asarray(self.default_left, dtype=bool)
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        while True:
            f = feature[node]
            internal = f >= 0
            if not internal.any():
                return node
            x = X[rows, np.where(internal, f, 0)]
            go_left = np.where(np.isnan(x), default_left[node], x <= threshold[node])
            node = np.where(internal, np.where(go_left, left[node], right[node]), node)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(self.value, dtype=np.float64)[self.apply(X)]

    def to_dict(self) -> dict:
        return {
            "feature": list(self.feature),
            "threshold": list(self.threshold),
            "left": list(self.left),
            "right": list(self.right),
            "default_left": list(self.default_left),
            "value": list(self.value),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RegressionTree":
        return cls(
            feature=[int(v) for v in d["feature"]],
            threshold=[float(v) for v in d["threshold"]],
            left=[int(v) for v in d["left"]],
            right=[int(v) for v in d["right"]],
            default_left=[bool(v) for v in d["default_left"]],
            value=[float(v) for v in d["value"]],
        )


@dataclass
class _Split:
    gain: float
    feature: int
    threshold: float
    default_left: bool


def _score(g, h, lam):
    return g * g / (h + lam)


def best_split(X, grad, hess, idx, reg_lambda, min_samples_leaf) -> _Split | None:
    """Exact greedy search over all features for the rows in ``idx``."""
    g_tot = grad[idx].sum()
    h_tot = hess[idx].sum()
    n_tot = len(idx)
    parent = _score(g_tot, h_tot, reg_lambda)
    best: _Split | None = None
    for f in range(X.shape[1]):
        x = X[idx, f]
        miss = np.isnan(x)
        present = idx[~miss]
        if len(present) == 0:
            continue
        xp = x[~miss]
        order = np.argsort(xp, kind="mergesort")
        xs = xp[order]
        gs = np.cumsum(grad[present][order])
        hs = np.cumsum(hess[present][order])
        n_miss = int(miss.sum())
        g_miss = g_tot - gs[-1]
        h_miss = h_tot - hs[-1]

        # candidate cut after position i when the next value differs
        cut = np.flatnonzero(xs[:-1] < xs[1:])
        thresholds = 0.5 * (xs[cut] + xs[cut + 1])
        gl, hl, nl = gs[cut], hs[cut], cut + 1.0
        n_present = len(xs)
        cands = []
        # missing -> left
        cands.append((gl + g_miss, hl + h_miss, nl + n_miss, thresholds, True))
        # missing -> right
        cands.append((gl, hl, nl, thresholds, False))
        if n_miss:
            # all present values left, missing alone on the right
            cands.append((gs[-1:], hs[-1:], np.array([float(n_present)]), xs[-1:], False))
        for g_l, h_l, n_l, thr, dleft in cands:
            if len(thr) == 0:
                continue
            g_r = g_tot - g_l
            h_r = h_tot - h_l
            n_r = n_tot - n_l
            gain = 0.5 * (_score(g_l, h_l, reg_lambda) + _score(g_r, h_r, reg_lambda) - parent)
            ok = (n_l >= min_samples_leaf) & (n_r >= min_samples_leaf)
            if not ok.any():
                continue
            gain = np.where(ok, gain, -np.inf)
            j = int(np.argmax(gain))
            if gain[j] > MIN_GAIN and (best is None or gain[j] > best.gain):
                best = _Split(float(gain[j]), f, float(thr[j]), dleft)
    return best


def grow_tree(X, grad, hess, idx, *, max_depth, min_samples_leaf, reg_lambda) -> RegressionTree:
    """Depth-first growth; leaf value ``-G / (H + lambda)``."""
    tree = RegressionTree()

    def build(rows: np.ndarray, depth: int) -> int:
        g = grad[rows].sum()
        h = hess[rows].sum()
        split = None
        if depth < max_depth and len(rows) >= 2 * min_samples_leaf:
            split = best_split(X, grad, hess, rows, reg_lambda, min_samples_leaf)
        if split is None:
            return tree._add(value=float(-g / (h + reg_lambda)))
        node = tree._add(split.feature, split.threshold, split.default_left)
        x = X[rows, split.feature]
        go_left = np.where(np.isnan(x), split.default_left, x <= split.threshold)
        tree.left[node] = build(rows[go_left], depth + 1)
        tree.right[node] = build(rows[~go_left], depth + 1)
        return node

    build(np.asarray(idx, dtype=np.int64), 0)
    return tree
