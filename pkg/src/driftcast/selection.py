"""Model collections and the schemas that pick which of them forecast and train.

A collection holds one tree per forecast-horizon step (direct multistep
strategy). Schemas route each origin to a collection: a single collection for
the whole stream, one per calendar quarter, or one per change-point segment.
The mixed schemas additionally blend or switch between the two collections
adjacent to a change point inside a boundary window of ``boundary_days``
either side, driven by the previous origin's per-collection forecast error.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np
import pandas as pd

from driftcast.changepoint import ChangePointSet, segment_of
from driftcast.errors import ConfigError
from driftcast.hoeffding import HoeffdingTreeRegressor, TreeParams


class SchemaKind(str, Enum):
    SMCA = "smca"
    QDMDC = "qdmdc"
    PCPDMC = "pcpdmc"
    MCPDMC_WA = "mcpdmc-wa"
    MCPDMC_SW = "mcpdmc-sw"


CHANGE_POINT_KINDS = frozenset(
    {SchemaKind.PCPDMC, SchemaKind.MCPDMC_WA, SchemaKind.MCPDMC_SW}
)
MIXED_KINDS = frozenset({SchemaKind.MCPDMC_WA, SchemaKind.MCPDMC_SW})


def vector_mae(predicted: np.ndarray, actual: np.ndarray) -> float:
    return float(np.mean(np.abs(predicted - actual)))


def vector_mse(predicted: np.ndarray, actual: np.ndarray) -> float:
    return float(np.mean((predicted - actual) ** 2))


FEEDBACK_METRICS: dict[str, Callable[[np.ndarray, np.ndarray], float]] = {
    "mae": vector_mae,
    "mse": vector_mse,
}


class ModelCollection:
    """Ordered set of ``horizon`` trees; tree i forecasts horizon step i."""

    def __init__(self, horizon: int, params: TreeParams, label: str) -> None:
        if horizon < 1:
            raise ConfigError("horizon must be >= 1")
        self.models = [HoeffdingTreeRegressor(params) for _ in range(horizon)]
        self.id = label

    @property
    def horizon(self) -> int:
        return len(self.models)

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.asarray([tree.predict_one(x) for tree in self.models], dtype=float)

    def learn(self, x: np.ndarray, y: np.ndarray) -> None:
        if len(y) != len(self.models):
            raise ValueError(f"target of length {len(y)} for horizon {len(self.models)}")
        for tree, value in zip(self.models, y):
            tree.learn_one(x, float(value))


def build_collections(
    kind: SchemaKind, horizon: int, params: TreeParams, cps: ChangePointSet | None
) -> list[ModelCollection]:
    """One collection for SMCA, four for QDMDC, one per segment otherwise."""
    if kind is SchemaKind.SMCA:
        count = 1
    elif kind is SchemaKind.QDMDC:
        count = 4
    else:
        if cps is None:
            raise ConfigError(f"{kind.value} requires a change point set")
        count = cps.k
    return [ModelCollection(horizon, params, f"{kind.value}-c{i}") for i in range(count)]


@dataclass(frozen=True)
class _Window:
    """Boundary-window context: the nearest change point and its neighbours."""

    position: int
    window_id: tuple[int, int]
    pre_index: int
    post_index: int


class SchemaState:
    """Routing state for one selection schema over one stream.

    ``prev_error`` carries the per-collection feedback errors (E_C1, E_C2)
    measured at the previous origin of the current boundary window; it resets
    whenever a new window is entered so stale errors cannot leak between
    regimes.
    """

    def __init__(
        self,
        kind: SchemaKind,
        collections: list[ModelCollection],
        cps: ChangePointSet | None = None,
        boundary_days: int = 7,
        feedback_metric: str | Callable[[np.ndarray, np.ndarray], float] = "mae",
    ) -> None:
        self.kind = SchemaKind(kind)
        self.collections = collections
        self.cps = cps
        self.boundary_days = boundary_days
        if callable(feedback_metric):
            self.feedback = feedback_metric
        else:
            try:
                self.feedback = FEEDBACK_METRICS[feedback_metric]
            except KeyError:
                raise ConfigError(f"unknown feedback metric {feedback_metric!r}") from None
        self.prev_error: tuple[float, float] | None = None
        self._prev_window: tuple[int, int] | None = None

        if self.kind in CHANGE_POINT_KINDS and cps is None:
            raise ConfigError(f"{self.kind.value} requires a change point set")
        expected = {SchemaKind.SMCA: 1, SchemaKind.QDMDC: 4}.get(
            self.kind, cps.k if cps is not None else None
        )
        if expected is not None and len(collections) != expected:
            raise ConfigError(
                f"{self.kind.value} needs {expected} collections, got {len(collections)}"
            )
        if boundary_days < 0:
            raise ConfigError("boundary_days must be >= 0")

    # -- routing -------------------------------------------------------------

    @staticmethod
    def _effective_day(origin: pd.Timestamp) -> int:
        # Day 366 of leap years shares day 365's routing.
        return min(int(origin.dayofyear), 365)

    def _window(self, origin: pd.Timestamp) -> _Window | None:
        if self.kind not in MIXED_KINDS or self.cps is None or not self.cps.positions:
            return None
        day = self._effective_day(origin)
        best_pos = None
        best_dist = None
        for pos in self.cps.positions:
            diff = abs(day - pos)
            dist = min(diff, 365 - diff)
            if dist <= self.boundary_days and (best_dist is None or dist < best_dist):
                best_pos, best_dist = pos, dist
        if best_pos is None:
            return None
        offset = day - best_pos
        if offset > self.boundary_days:
            offset -= 365
        elif offset < -self.boundary_days:
            offset += 365
        anchor = origin - pd.Timedelta(days=offset)
        pre_day = best_pos - 1 if best_pos > 1 else 365
        return _Window(
            position=best_pos,
            window_id=(best_pos, int(anchor.year)),
            pre_index=segment_of(pre_day, self.cps),
            post_index=segment_of(best_pos, self.cps),
        )

    def active_collections(self, origin: pd.Timestamp) -> list[tuple[int, str]]:
        """(collection index, role) pairs forecasting and training at this origin."""
        if self.kind is SchemaKind.SMCA:
            return [(0, "active")]
        if self.kind is SchemaKind.QDMDC:
            return [((origin.month - 1) // 3, "active")]
        window = self._window(origin)
        if window is not None:
            return [(window.pre_index, "C1"), (window.post_index, "C2")]
        return [(segment_of(self._effective_day(origin), self.cps), "active")]

    # -- forecasting ----------------------------------------------------------

    def _window_errors(self, window: _Window) -> tuple[float, float] | None:
        if self.prev_error is None or self._prev_window != window.window_id:
            return None
        return self.prev_error

    def forecast_with_trace(
        self, x: np.ndarray, origin: pd.Timestamp
    ) -> tuple[np.ndarray, dict]:
        window = self._window(origin)
        if window is None:
            index = self.active_collections(origin)[0][0]
            vector = self.collections[index].predict(x)
            return vector, {"mode": "single", "collections": [index], "weights": [1.0]}

        pre, post = window.pre_index, window.post_index
        f_pre = self.collections[pre].predict(x)
        f_post = self.collections[post].predict(x)
        errors = self._window_errors(window)

        if self.kind is SchemaKind.MCPDMC_WA:
            if errors is None or (errors[0] == 0.0 and errors[1] == 0.0):
                w_pre = w_post = 0.5
            else:
                e_pre, e_post = errors
                w_pre = 1.0 - e_pre / (e_pre + e_post)
                w_post = 1.0 - e_post / (e_pre + e_post)
            vector = (w_pre * f_pre + w_post * f_post) / (w_pre + w_post)
            trace = {"mode": "wavg", "collections": [pre, post], "weights": [w_pre, w_post]}
            return vector, trace

        # Switching: the first origin of a window and the all-zero degenerate
        # case take C1; equal nonzero errors take C2 (the "otherwise" branch).
        if errors is None or (errors[0] == 0.0 and errors[1] == 0.0) or errors[0] < errors[1]:
            vector, weights = f_pre, [1.0, 0.0]
        else:
            vector, weights = f_post, [0.0, 1.0]
        return vector, {"mode": "switch", "collections": [pre, post], "weights": weights}

    def forecast(self, x: np.ndarray, origin: pd.Timestamp) -> np.ndarray:
        vector, _ = self.forecast_with_trace(x, origin)
        return vector

    # -- training --------------------------------------------------------------

    def train(self, x: np.ndarray, y: np.ndarray, origin: pd.Timestamp) -> None:
        """Train every active collection on (x, y), test-then-train order.

        Inside a boundary window the per-collection feedback errors are
        measured against this origin's pre-training forecasts, then both
        adjacent collections learn the instance.
        """
        window = self._window(origin)
        if window is None:
            index = self.active_collections(origin)[0][0]
            self.collections[index].learn(x, y)
            self.prev_error = None
            self._prev_window = None
            return

        f_pre = self.collections[window.pre_index].predict(x)
        f_post = self.collections[window.post_index].predict(x)
        errors = (self.feedback(f_pre, y), self.feedback(f_post, y))
        self.collections[window.pre_index].learn(x, y)
        if window.post_index != window.pre_index:
            self.collections[window.post_index].learn(x, y)
        self.prev_error = errors
        self._prev_window = window.window_id
