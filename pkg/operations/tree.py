"""
CART decision tree for classification (gini) and multi-output regression (squared error).
"""

import numpy as np

from operations.base import Model


def _best_split(features: np.ndarray, values: np.ndarray, min_leaf: int):
    """
    Both gini and squared error reduce to maximizing sum(s_left**2)/n_left +
    sum(s_right**2)/n_right, where s are column sums of `values` (one-hot labels or targets).
    """
    n = values.shape[0]
    total = values.sum(axis=0)
    parent_score = float((total ** 2).sum() / n)
    tolerance = 1e-12 * max(1.0, abs(parent_score))
    n_left = np.arange(1, n)
    n_right = n - n_left

    best_gain, best = tolerance, None
    for column in range(features.shape[1]):
        order = np.argsort(features[:, column], kind="stable")
        ordered = features[order, column]
        left_sums = np.cumsum(values[order], axis=0)[:-1]
        gain = (
            (left_sums ** 2).sum(axis=1) / n_left
            + ((total - left_sums) ** 2).sum(axis=1) / n_right
            - parent_score
        )
        valid = (ordered[:-1] < ordered[1:]) & (n_left >= min_leaf) & (n_right >= min_leaf)
        if not valid.any():
            continue
        gain = np.where(valid, gain, -np.inf)
        position = int(np.argmax(gain))
        if gain[position] > best_gain:
            best_gain = float(gain[position])
            best = (column, float((ordered[position] + ordered[position + 1]) / 2.0))
    return best


class DecisionTree(Model):
    operation_id = "decision_tree"

    def _grow(self, features: np.ndarray, values: np.ndarray):
        max_depth = int(self.params.get("max_depth", 3))
        min_leaf = int(self.params.get("min_samples_leaf", 1))
        feature, threshold, left, right, leaf_values = [], [], [], [], []

        def build(rows: np.ndarray, depth: int) -> int:
            node = len(feature)
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            leaf_values.append(values[rows].mean(axis=0))
            if depth >= max_depth or len(rows) < 2 * min_leaf:
                return node
            split = _best_split(features[rows], values[rows], min_leaf)
            if split is None:
                return node
            column, cut = split
            goes_left = features[rows, column] <= cut
            feature[node] = column
            threshold[node] = cut
            left[node] = build(rows[goes_left], depth + 1)
            right[node] = build(rows[~goes_left], depth + 1)
            return node

        build(np.arange(features.shape[0]), 0)
        return {
            "feature": np.asarray(feature, dtype=np.int64),
            "threshold": np.asarray(threshold, dtype=np.float64),
            "left": np.asarray(left, dtype=np.int64),
            "right": np.asarray(right, dtype=np.int64),
            "value": np.vstack(leaf_values),
        }

    def _leaf_values(self, state, features):
        n = features.shape[0]
        node = np.zeros(n, dtype=np.int64)
        rows = np.arange(n)
        while True:
            column = state["feature"][node]
            internal = column >= 0
            if not internal.any():
                break
            goes_left = features[rows, np.maximum(column, 0)] <= state["threshold"][node]
            child = np.where(goes_left, state["left"][node], state["right"][node])
            node = np.where(internal, child, node)
        return state["value"][node]

    def fit_classifier(self, features, labels, n_classes, rng):
        return self._grow(features, np.eye(n_classes)[labels])

    def fit_regressor(self, features, targets, rng):
        return self._grow(features, targets)

    def predict_proba(self, state, features):
        return self._leaf_values(state, features)

    def predict_values(self, state, features):
        return self._leaf_values(state, features)
