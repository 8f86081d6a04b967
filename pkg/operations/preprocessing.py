"""
Feature-level data operations. None of them reads the target outside of fitting, and
only the outlier filter changes the row set (at fit time only).
"""

import logging

import numpy as np

from operations.base import NodeData, Operation, OperationKind, require_finite

logger = logging.getLogger(__name__)

POWER_ITERATIONS = 200
POWER_TOLERANCE = 1e-12


def _column_stats(features: np.ndarray):
    mean = np.nanmean(features, axis=0) if features.size else np.zeros(features.shape[1])
    mean = np.where(np.isnan(mean), 0.0, mean)
    std = np.nanstd(features, axis=0) if features.size else np.ones(features.shape[1])
    std = np.where(np.isnan(std) | (std == 0.0), 1.0, std)
    return mean, std


class StandardScaling(Operation):
    operation_id = "standard_scaling"

    def fit(self, data: NodeData, rng):
        mean, std = _column_stats(data.features)
        return {"mean": mean, "std": std}

    def transform(self, state, data: NodeData, fitting: bool) -> NodeData:
        return data.evolve(features=(data.features - state["mean"]) / state["std"])

    def inverse_transform(self, state, features: np.ndarray) -> np.ndarray:
        return features * state["std"] + state["mean"]


class MinMaxScaling(Operation):
    operation_id = "minmax_scaling"

    def fit(self, data: NodeData, rng):
        low = np.nanmin(data.features, axis=0)
        span = np.nanmax(data.features, axis=0) - low
        low = np.where(np.isnan(low), 0.0, low)
        span = np.where(np.isnan(span) | (span == 0.0), 1.0, span)
        return {"min": low, "range": span}

    def transform(self, state, data: NodeData, fitting: bool) -> NodeData:
        return data.evolve(features=(data.features - state["min"]) / state["range"])

    def inverse_transform(self, state, features: np.ndarray) -> np.ndarray:
        return features * state["range"] + state["min"]


class MeanImputation(Operation):
    operation_id = "mean_imputation"

    def fit(self, data: NodeData, rng):
        mean, _ = _column_stats(data.features)
        return {"fill": mean}

    def transform(self, state, data: NodeData, fitting: bool) -> NodeData:
        filled = np.where(np.isnan(data.features), state["fill"], data.features)
        return data.evolve(features=filled)


class ZScoreOutlierFilter(Operation):
    """Drops training rows with any |z| above the threshold; prediction rows pass through"""

    operation_id = "zscore_outlier_filter"

    def fit(self, data: NodeData, rng):
        mean, std = _column_stats(data.features)
        return {"mean": mean, "std": std}

    def transform(self, state, data: NodeData, fitting: bool) -> NodeData:
        if not fitting:
            return data
        threshold = float(self.params.get("threshold", 3.0))
        z = np.abs((data.features - state["mean"]) / state["std"])
        keep = ~np.any(np.nan_to_num(z, nan=0.0) > threshold, axis=1)
        if keep.sum() < 2:
            logger.debug("outlier filter would keep %d rows; keeping all", int(keep.sum()))
            return data
        return data.take(np.flatnonzero(keep))


class PcaTopK(Operation):
    """Top-k principal components found by power iteration with deflation"""

    operation_id = "pca_topk"

    def fit(self, data: NodeData, rng):
        require_finite(data.features, self.operation_id)
        mean = data.features.mean(axis=0)
        centered = data.features - mean
        covariance = centered.T @ centered / max(centered.shape[0] - 1, 1)
        k = min(int(self.params.get("n_components", 2)), covariance.shape[0])

        components = []
        residual = covariance.copy()
        for _ in range(k):
            vector = rng.standard_normal(residual.shape[0])
            vector /= np.linalg.norm(vector)
            for _ in range(POWER_ITERATIONS):
                moved = residual @ vector
                norm = np.linalg.norm(moved)
                if norm < POWER_TOLERANCE:
                    break
                moved /= norm
                converged = np.linalg.norm(moved - vector) < POWER_TOLERANCE
                vector = moved
                if converged:
                    break
            # sign convention: largest-magnitude loading is positive
            if vector[np.argmax(np.abs(vector))] < 0:
                vector = -vector
            eigenvalue = float(vector @ residual @ vector)
            residual = residual - eigenvalue * np.outer(vector, vector)
            components.append(vector)
        return {"mean": mean, "components": np.vstack(components)}

    def transform(self, state, data: NodeData, fitting: bool) -> NodeData:
        require_finite(data.features, self.operation_id)
        return data.evolve(features=(data.features - state["mean"]) @ state["components"].T)


class MergeConcat(Operation):
    """Explicit merge point; the executor already concatenated the parents' columns"""

    operation_id = "merge_concat"
    kind = OperationKind.DATA_FLOW

    def fit(self, data: NodeData, rng):
        return {}

    def transform(self, state, data: NodeData, fitting: bool) -> NodeData:
        return data
