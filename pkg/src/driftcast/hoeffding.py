"""Incremental regression tree with confidence-bound split decisions.

A leaf accumulates target moments, per-feature ordered split statistics and
two competing predictors (running mean and an online linear model); every
``grace_period`` instances it evaluates candidate splits by variance
reduction and splits when the confidence radius separates the best from the
second-best feature, or when the radius falls below the tie threshold.
Everything is deterministic: identical streams grow identical trees.
"""

from __future__ import annotations

import math
from bisect import bisect_right, insort
from dataclasses import dataclass

import numpy as np


def hoeffding_epsilon(r: float, delta: float, n: int) -> float:
    """Confidence radius sqrt(r^2 * ln(1/delta) / (2n)) after n observations."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 < delta <= 1.0:
        raise ValueError("delta must be in (0, 1]")
    return math.sqrt(r * r * math.log(1.0 / delta) / (2.0 * n))


@dataclass(frozen=True)
class TreeParams:
    """Growth and leaf-model settings.

    ``merit_range`` is the range of the split-merit ratio handed to the
    confidence bound; the ratio of second-best to best variance reduction
    lives in [0, 1], so it stays at 1.
    """

    delta: float = 1e-7
    tau: float = 0.5
    grace_period: int = 7
    decay: float = 0.2
    max_depth: int = 20
    leaf_learning_rate: float = 0.5
    merit_range: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 < self.delta <= 1.0:
            raise ValueError("delta must be in (0, 1]")
        if self.tau < 0:
            raise ValueError("tau must be >= 0")
        if self.grace_period < 1:
            raise ValueError("grace_period must be >= 1")
        if not 0.0 < self.decay <= 1.0:
            raise ValueError("decay must be in (0, 1]")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.leaf_learning_rate <= 0:
            raise ValueError("leaf_learning_rate must be positive")


class NumericSplitStats:
    """Ordered per-value target moments for one feature.

    Supports exact variance-reduction queries at every observed threshold
    (left branch takes x <= threshold).
    """

    __slots__ = ("_keys", "_stats")

    def __init__(self) -> None:
        self._keys: list[float] = []
        self._stats: dict[float, list[float]] = {}

    def update(self, value: float, y: float) -> None:
        stat = self._stats.get(value)
        if stat is None:
            self._stats[value] = [1.0, y, y * y]
            insort(self._keys, value)
        else:
            stat[0] += 1.0
            stat[1] += y
            stat[2] += y * y

    def _gather(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        stats = self._stats
        rows = [stats[k] for k in self._keys]
        arr = np.asarray(rows, dtype=float)
        return arr[:, 0], arr[:, 1], arr[:, 2]

    def best_split(self, n: float, total: float, total_sq: float) -> tuple[float, float | None]:
        """Best (merit, threshold) over observed thresholds, or (0, None)."""
        if len(self._keys) < 2:
            return 0.0, None
        cnt, s, ss = self._gather()
        n_left = np.cumsum(cnt)[:-1]
        s_left = np.cumsum(s)[:-1]
        ss_left = np.cumsum(ss)[:-1]
        n_right = n - n_left
        s_right = total - s_left
        ss_right = total_sq - ss_left
        var_all = max(total_sq / n - (total / n) ** 2, 0.0)
        var_left = np.maximum(ss_left / n_left - (s_left / n_left) ** 2, 0.0)
        var_right = np.maximum(ss_right / n_right - (s_right / n_right) ** 2, 0.0)
        merit = var_all - (n_left / n) * var_left - (n_right / n) * var_right
        best = int(np.argmax(merit))
        return max(float(merit[best]), 0.0), self._keys[best]

    def merit_at(self, threshold: float, n: float, total: float, total_sq: float) -> float:
        """Variance reduction of the partition at an arbitrary threshold."""
        pos = bisect_right(self._keys, threshold)
        if pos == 0 or pos == len(self._keys):
            return 0.0
        n_left = s_left = ss_left = 0.0
        for key in self._keys[:pos]:
            cnt, s, ss = self._stats[key]
            n_left += cnt
            s_left += s
            ss_left += ss
        n_right = n - n_left
        s_right = total - s_left
        ss_right = total_sq - ss_left
        var_all = max(total_sq / n - (total / n) ** 2, 0.0)
        var_left = max(ss_left / n_left - (s_left / n_left) ** 2, 0.0)
        var_right = max(ss_right / n_right - (s_right / n_right) ** 2, 0.0)
        return max(var_all - (n_left / n) * var_left - (n_right / n) * var_right, 0.0)

    def to_rows(self) -> list[list[float]]:
        return [[k, *self._stats[k]] for k in self._keys]

    @classmethod
    def from_rows(cls, rows: list[list[float]]) -> "NumericSplitStats":
        obj = cls()
        obj._keys = [row[0] for row in rows]
        obj._stats = {row[0]: [row[1], row[2], row[3]] for row in rows}
        return obj


class LeafStats:
    """Leaf node: target moments, split observers and the two leaf predictors.

    The linear predictor is a normalized least-mean-squares model on features
    standardized by the leaf's running mean and variance, with the target
    likewise standardized; both predictors carry exponentially decayed
    absolute-error trackers used to select the leaf prediction.
    """

    __slots__ = (
        "depth",
        "n",
        "total",
        "total_sq",
        "inherited_mean",
        "splitters",
        "err_mean",
        "err_linear",
        "scaler_mean",
        "scaler_m2",
        "weights",
        "bias",
    )

    def __init__(self, n_features: int | None, depth: int, inherited_mean: float) -> None:
        self.depth = depth
        self.n = 0
        self.total = 0.0
        self.total_sq = 0.0
        self.inherited_mean = inherited_mean
        self.err_mean = 0.0
        self.err_linear = 0.0
        self.splitters: list[NumericSplitStats] | None = None
        self.scaler_mean: np.ndarray | None = None
        self.scaler_m2: np.ndarray | None = None
        self.weights: np.ndarray | None = None
        self.bias = 0.0
        if n_features is not None:
            self._allocate(n_features)

    def _allocate(self, n_features: int) -> None:
        self.splitters = [NumericSplitStats() for _ in range(n_features)]
        self.scaler_mean = np.zeros(n_features)
        self.scaler_m2 = np.zeros(n_features)
        self.weights = np.zeros(n_features)

    def mean_prediction(self) -> float:
        if self.n == 0:
            return self.inherited_mean
        return self.total / self.n

    def _standardize(self, x: np.ndarray) -> np.ndarray:
        if self.n < 2:
            return x - self.scaler_mean
        std = np.sqrt(self.scaler_m2 / self.n)
        std[std == 0.0] = 1.0
        return (x - self.scaler_mean) / std

    def _target_scale(self) -> tuple[float, float]:
        if self.n == 0:
            return self.inherited_mean, 1.0
        mean = self.total / self.n
        var = max(self.total_sq / self.n - mean * mean, 0.0)
        return mean, math.sqrt(var) if var > 0 else 1.0

    def linear_prediction(self, x: np.ndarray) -> float:
        if self.n == 0:
            return self.inherited_mean
        mean_y, scale_y = self._target_scale()
        xt = self._standardize(x)
        return mean_y + scale_y * (float(self.weights @ xt) + self.bias)

    def prediction(self, x: np.ndarray) -> float:
        # Ties (including the fresh-leaf state) go to the mean predictor.
        if self.err_linear < self.err_mean:
            return self.linear_prediction(x)
        return self.mean_prediction()

    def learn(self, x: np.ndarray, y: float, params: TreeParams) -> None:
        if self.splitters is None:
            self._allocate(len(x))

        # Selector trackers score predictions issued before this update.
        decay = params.decay
        self.err_mean = (1 - decay) * self.err_mean + decay * abs(y - self.mean_prediction())
        self.err_linear = (1 - decay) * self.err_linear + decay * abs(y - self.linear_prediction(x))

        self.n += 1
        self.total += y
        self.total_sq += y * y

        delta = x - self.scaler_mean
        self.scaler_mean += delta / self.n
        self.scaler_m2 += delta * (x - self.scaler_mean)

        mean_y, scale_y = self._target_scale()
        xt = self._standardize(x)
        residual = float(self.weights @ xt) + self.bias - (y - mean_y) / scale_y
        step = params.leaf_learning_rate / (1.0 + float(xt @ xt))
        self.weights -= step * residual * xt
        self.bias -= step * residual

        values = x.tolist()
        for splitter, value in zip(self.splitters, values):
            splitter.update(value, y)


class SplitNode:
    """Binary internal node; x[feature] <= threshold routes left."""

    __slots__ = ("feature", "threshold", "left", "right")

    def __init__(self, feature: int, threshold: float, left, right) -> None:
        self.feature = feature
        self.threshold = threshold
        self.left = left
        self.right = right


def candidate_merit(stats: LeafStats, feature: int, threshold: float) -> float:
    """Variance reduction of splitting the leaf at (feature, threshold).

    Degenerate partitions (an empty side) score 0.
    """
    if stats.n < 2:
        raise ValueError("merit needs at least two observations")
    return stats.splitters[feature].merit_at(threshold, stats.n, stats.total, stats.total_sq)


class HoeffdingTreeRegressor:
    """Single-output incremental regression tree.

    ``learn_one`` requires exclusive access; ``predict_one`` is read-only and
    valid after any number of updates, including zero. ``split_log`` records
    (n, epsilon, merit_best, merit_second, feature, threshold) per accepted
    split for instrumented replay.
    """

    def __init__(self, params: TreeParams | None = None) -> None:
        self.params = params or TreeParams()
        self.root: LeafStats | SplitNode = LeafStats(None, depth=0, inherited_mean=0.0)
        self.n_features: int | None = None
        self.seen = 0
        self.split_log: list[tuple[int, float, float, float, int, float]] = []

    def _check_arity(self, x) -> np.ndarray:
        arr = np.asarray(x, dtype=float)
        if arr.ndim != 1:
            raise ValueError("feature vector must be one-dimensional")
        if self.n_features is None:
            self.n_features = len(arr)
        elif len(arr) != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {len(arr)}")
        return arr

    def _route(self, x: np.ndarray) -> tuple[LeafStats, SplitNode | None, bool]:
        node = self.root
        parent: SplitNode | None = None
        went_left = False
        while isinstance(node, SplitNode):
            parent = node
            went_left = x[node.feature] <= node.threshold
            node = node.left if went_left else node.right
        return node, parent, went_left

    def learn_one(self, x, y: float) -> None:
        arr = self._check_arity(x)
        leaf, parent, went_left = self._route(arr)
        leaf.learn(arr, float(y), self.params)
        self.seen += 1
        if leaf.n % self.params.grace_period == 0 and leaf.depth < self.params.max_depth:
            self._attempt_split(leaf, parent, went_left)

    def predict_one(self, x) -> float:
        arr = self._check_arity(x)
        leaf, _, _ = self._route(arr)
        return leaf.prediction(arr)

    def _attempt_split(self, leaf: LeafStats, parent: SplitNode | None, went_left: bool) -> None:
        best_merit = 0.0
        second_merit = 0.0
        best_feature = -1
        best_threshold: float | None = None
        for feature, splitter in enumerate(leaf.splitters):
            merit, threshold = splitter.best_split(leaf.n, leaf.total, leaf.total_sq)
            if threshold is not None and merit > best_merit:
                second_merit = best_merit
                best_merit = merit
                best_feature = feature
                best_threshold = threshold
            elif merit > second_merit:
                second_merit = merit
        if best_threshold is None or best_merit <= 0.0:
            return

        params = self.params
        epsilon = hoeffding_epsilon(params.merit_range, params.delta, leaf.n)
        ratio = second_merit / best_merit
        if not ((1.0 - ratio) > epsilon or epsilon < params.tau):
            return

        mean = leaf.mean_prediction()
        node = SplitNode(
            best_feature,
            best_threshold,
            LeafStats(self.n_features, leaf.depth + 1, mean),
            LeafStats(self.n_features, leaf.depth + 1, mean),
        )
        if parent is None:
            self.root = node
        elif went_left:
            parent.left = node
        else:
            parent.right = node
        self.split_log.append(
            (leaf.n, epsilon, best_merit, second_merit, best_feature, best_threshold)
        )

    # -- inspection helpers -------------------------------------------------

    def n_nodes(self) -> int:
        count = 0
        stack = [self.root]
        while stack:
            node = stack.pop()
            count += 1
            if isinstance(node, SplitNode):
                stack.extend((node.left, node.right))
        return count

    def n_leaves(self) -> int:
        return (self.n_nodes() + 1) // 2

    def depth(self) -> int:
        best = 0
        stack = [(self.root, 0)]
        while stack:
            node, d = stack.pop()
            best = max(best, d)
            if isinstance(node, SplitNode):
                stack.extend(((node.left, d + 1), (node.right, d + 1)))
        return best

    # -- snapshots -----------------------------------------------------------

    SNAPSHOT_FORMAT = "driftcast-tree"
    SNAPSHOT_VERSION = 1

    def to_snapshot(self) -> dict:
        """Self-describing state dump for checkpoint/resume."""
        nodes: list[dict] = []

        def emit(node) -> int:
            idx = len(nodes)
            nodes.append({})
            if isinstance(node, SplitNode):
                nodes[idx] = {
                    "kind": "split",
                    "feature": node.feature,
                    "threshold": node.threshold,
                    "left": emit(node.left),
                    "right": emit(node.right),
                }
            else:
                nodes[idx] = {
                    "kind": "leaf",
                    "depth": node.depth,
                    "n": node.n,
                    "total": node.total,
                    "total_sq": node.total_sq,
                    "inherited_mean": node.inherited_mean,
                    "err_mean": node.err_mean,
                    "err_linear": node.err_linear,
                    "bias": node.bias,
                    "scaler_mean": None if node.scaler_mean is None else node.scaler_mean.tolist(),
                    "scaler_m2": None if node.scaler_m2 is None else node.scaler_m2.tolist(),
                    "weights": None if node.weights is None else node.weights.tolist(),
                    "splitters": None
                    if node.splitters is None
                    else [s.to_rows() for s in node.splitters],
                }
            return idx

        emit(self.root)
        return {
            "format": self.SNAPSHOT_FORMAT,
            "version": self.SNAPSHOT_VERSION,
            "n_features": self.n_features,
            "seen": self.seen,
            "params": {
                "delta": self.params.delta,
                "tau": self.params.tau,
                "grace_period": self.params.grace_period,
                "decay": self.params.decay,
                "max_depth": self.params.max_depth,
                "leaf_learning_rate": self.params.leaf_learning_rate,
                "merit_range": self.params.merit_range,
            },
            "nodes": nodes,
        }

    @classmethod
    def from_snapshot(cls, snapshot: dict) -> "HoeffdingTreeRegressor":
        if snapshot.get("format") != cls.SNAPSHOT_FORMAT:
            raise ValueError("not a tree snapshot")
        if snapshot.get("version") != cls.SNAPSHOT_VERSION:
            raise ValueError(f"unsupported snapshot version {snapshot.get('version')}")
        tree = cls(TreeParams(**snapshot["params"]))
        tree.n_features = snapshot["n_features"]
        tree.seen = snapshot["seen"]
        nodes = snapshot["nodes"]

        def build(idx: int):
            payload = nodes[idx]
            if payload["kind"] == "split":
                return SplitNode(
                    payload["feature"],
                    payload["threshold"],
                    build(payload["left"]),
                    build(payload["right"]),
                )
            leaf = LeafStats(None, payload["depth"], payload["inherited_mean"])
            leaf.n = payload["n"]
            leaf.total = payload["total"]
            leaf.total_sq = payload["total_sq"]
            leaf.err_mean = payload["err_mean"]
            leaf.err_linear = payload["err_linear"]
            leaf.bias = payload["bias"]
            if payload["scaler_mean"] is not None:
                leaf.scaler_mean = np.asarray(payload["scaler_mean"], dtype=float)
                leaf.scaler_m2 = np.asarray(payload["scaler_m2"], dtype=float)
                leaf.weights = np.asarray(payload["weights"], dtype=float)
                leaf.splitters = [NumericSplitStats.from_rows(r) for r in payload["splitters"]]
            return leaf

        tree.root = build(0)
        return tree
