"""
Linear models: ordinary least squares, ridge and multinomial logistic regression.
"""

import numpy as np
from scipy.special import softmax

from errors import SingularFitError
from operations.base import Model

LOGISTIC_ITERATIONS = 500
LOGISTIC_LEARNING_RATE = 0.1


class OrdinaryLeastSquares(Model):
    operation_id = "ols"

    def fit_regressor(self, features, targets, rng):
        design = np.column_stack([features, np.ones(features.shape[0])])
        if np.linalg.matrix_rank(design) < design.shape[1]:
            raise SingularFitError(
                f"design matrix of rank {np.linalg.matrix_rank(design)} for {design.shape[1]} coefficients"
            )
        solution, *_ = np.linalg.lstsq(design, targets, rcond=None)
        return {"coef": solution[:-1], "intercept": solution[-1]}

    def predict_values(self, state, features):
        return features @ state["coef"] + state["intercept"]


class Ridge(Model):
    """L2-penalized least squares; the intercept is not penalized"""

    operation_id = "ridge"

    def fit_regressor(self, features, targets, rng):
        alpha = float(self.params.get("alpha", 1.0))
        x_mean = features.mean(axis=0)
        y_mean = targets.mean(axis=0)
        centered = features - x_mean
        gram = centered.T @ centered
        if alpha == 0.0 and np.linalg.matrix_rank(gram) < gram.shape[0]:
            raise SingularFitError("rank-deficient system with alpha=0")
        coef = np.linalg.solve(gram + alpha * np.eye(gram.shape[0]), centered.T @ (targets - y_mean))
        return {"coef": coef, "intercept": y_mean - x_mean @ coef}

    def predict_values(self, state, features):
        return features @ state["coef"] + state["intercept"]


class LogisticRegression(Model):
    """Softmax regression by full-batch gradient descent on standardized inputs"""

    operation_id = "logistic_regression"

    def fit_classifier(self, features, labels, n_classes, rng):
        alpha = float(self.params.get("alpha", 1e-4))
        mean = features.mean(axis=0)
        scale = features.std(axis=0)
        scale[scale == 0.0] = 1.0
        x = (features - mean) / scale
        onehot = np.eye(n_classes)[labels]

        weights = np.zeros((x.shape[1], n_classes))
        bias = np.zeros(n_classes)
        n = x.shape[0]
        for _ in range(LOGISTIC_ITERATIONS):
            residual = softmax(x @ weights + bias, axis=1) - onehot
            weights -= LOGISTIC_LEARNING_RATE * (x.T @ residual / n + alpha * weights)
            bias -= LOGISTIC_LEARNING_RATE * residual.mean(axis=0)
        return {"mean": mean, "scale": scale, "weights": weights, "bias": bias}

    def predict_proba(self, state, features):
        x = (features - state["mean"]) / state["scale"]
        return softmax(x @ state["weights"] + state["bias"], axis=1)
