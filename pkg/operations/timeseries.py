"""
Series operations for forecasting: trailing smoothing and the lagged window transform
that turns a series into a supervised table with `horizon` targets per row.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from operations.base import NodeData, Operation, OperationKind, Stage


class LaggedTransform(Operation):
    operation_id = "lagged_transform"

    def fit(self, data: NodeData, rng):
        horizon = int(data.horizon)
        available = data.n_rows - horizon
        if available < 1:
            raise ValueError(f"series of {data.n_rows} points is too short for horizon {horizon}")
        window = min(int(self.params.get("window_size", 10)), available)
        return {"window": window, "horizon": horizon}

    def transform(self, state, data: NodeData, fitting: bool) -> NodeData:
        window, horizon = int(state["window"]), int(state["horizon"])
        series = data.features[:, 0]
        if not fitting:
            if series.shape[0] < window:
                raise ValueError(f"need {window} history points to forecast, got {series.shape[0]}")
            return data.evolve(
                features=series[-window:].reshape(1, window),
                target=None,
                idx=np.array([data.idx[-1] + 1]),
                stage=Stage.TABLE,
            )

        rows = series.shape[0] - window - horizon + 1
        features = sliding_window_view(series, window)[:rows]
        targets = sliding_window_view(np.asarray(data.target, dtype=np.float64), horizon)[window:window + rows]
        return data.evolve(
            features=np.ascontiguousarray(features),
            target=np.ascontiguousarray(targets),
            idx=data.idx[window:window + rows],
            stage=Stage.TABLE,
        )


class MovingAverageSmoothing(Operation):
    operation_id = "moving_average_smoothing"
    kind = OperationKind.DATA_PROCESSING

    def fit(self, data: NodeData, rng):
        return {"window": int(self.params.get("window_size", 3))}

    def transform(self, state, data: NodeData, fitting: bool) -> NodeData:
        window = int(state["window"])
        padded = np.vstack([np.zeros((1, data.width)), np.cumsum(data.features, axis=0)])
        ends = np.arange(1, data.n_rows + 1)
        starts = np.maximum(ends - window, 0)
        counts = (ends - starts).reshape(-1, 1)
        return data.evolve(features=(padded[ends] - padded[starts]) / counts)
