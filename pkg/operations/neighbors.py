"""
Instance-based and generative models: k-nearest neighbours and Gaussian naive Bayes.
"""

import numpy as np
from scipy.special import logsumexp

from operations.base import Model


class KNearestNeighbors(Model):
    operation_id = "knn"

    def _average(self, state, features):
        train = state["features"]
        k = min(int(self.params.get("n_neighbors", 5)), train.shape[0])
        distances = ((features[:, None, :] - train[None, :, :]) ** 2).sum(axis=2)
        # stable sort: ties resolve to the earlier training row
        nearest = np.argsort(distances, axis=1, kind="stable")[:, :k]
        return state["values"][nearest].mean(axis=1)

    def fit_classifier(self, features, labels, n_classes, rng):
        return {"features": features.copy(), "values": np.eye(n_classes)[labels]}

    def fit_regressor(self, features, targets, rng):
        return {"features": features.copy(), "values": targets.copy()}

    def predict_proba(self, state, features):
        return self._average(state, features)

    def predict_values(self, state, features):
        return self._average(state, features)


class GaussianNaiveBayes(Model):
    operation_id = "naive_bayes_gaussian"

    def fit_classifier(self, features, labels, n_classes, rng):
        smoothing = float(self.params.get("var_smoothing", 1e-9)) * max(float(features.var(axis=0).max()), 1.0)
        n_features = features.shape[1]
        means = np.zeros((n_classes, n_features))
        variances = np.ones((n_classes, n_features))
        counts = np.zeros(n_classes)
        for label in range(n_classes):
            rows = features[labels == label]
            counts[label] = rows.shape[0]
            if rows.shape[0]:
                means[label] = rows.mean(axis=0)
                variances[label] = rows.var(axis=0)
        variances = variances + smoothing
        log_prior = np.log(np.maximum(counts, 1e-12) / counts.sum())
        return {"means": means, "variances": variances, "log_prior": log_prior}

    def predict_proba(self, state, features):
        variances = state["variances"]
        squared = ((features[:, None, :] - state["means"][None, :, :]) ** 2) / variances[None, :, :]
        joint = state["log_prior"] - 0.5 * np.log(2.0 * np.pi * variances).sum(axis=1) - 0.5 * squared.sum(axis=2)
        return np.exp(joint - logsumexp(joint, axis=1, keepdims=True))
