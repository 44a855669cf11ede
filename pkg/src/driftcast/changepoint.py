"""Penalized change-point segmentation and day-of-year segment routing.

The detector minimizes the penalized cost sum(C(segment) + penalty) over all
segmentations whose boundaries fall on multiples of the subsample stride and
whose segments are at least the minimum length, using dynamic programming
with candidate pruning. Detected positions are projected onto day-of-year
indices so one reference year can route every later year.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from driftcast.errors import DataError, FormatError, InsufficientDataError
from driftcast.ingest import RawSeries

# Penalty tiers reported for the reference datasets; presets, not defaults.
PENALTY_PRESETS: dict[str, float] = {
    "gas-low": 732e9,
    "gas-medium": 244e9,
    "gas-high": 122e9,
    "electricity-low": 100e6,
    "electricity-medium": 150e6,
    "electricity-high": 250e6,
}


@dataclass(frozen=True)
class PeltConfig:
    """Detector settings; lengths are in samples of the analyzed series."""

    penalty: float
    min_segment: int = 168
    subsample: int = 24

    def __post_init__(self) -> None:
        if self.penalty < 0:
            raise ValueError("penalty must be >= 0")
        if self.subsample < 1:
            raise ValueError("subsample must be >= 1")
        if self.min_segment < self.subsample:
            raise ValueError("min_segment must be >= subsample")


@dataclass(frozen=True)
class ChangePointSet:
    """Strictly increasing day-of-year segment starts (1..365).

    A position p means day p is the first day of the new segment.
    """

    positions: tuple[int, ...]

    def __post_init__(self) -> None:
        for pos in self.positions:
            if not 1 <= pos <= 365:
                raise ValueError(f"position {pos} outside 1..365")
        if any(b <= a for a, b in zip(self.positions, self.positions[1:])):
            raise ValueError("positions must be strictly increasing")

    @property
    def k(self) -> int:
        """Segment count."""
        return len(self.positions) + 1


def prefix_sums(y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Prefix sums of y and y*y with a leading zero, for O(1) segment costs."""
    arr = np.asarray(y, dtype=float)
    s1 = np.concatenate(([0.0], np.cumsum(arr)))
    s2 = np.concatenate(([0.0], np.cumsum(arr * arr)))
    return s1, s2


def segment_cost_l2(
    y: np.ndarray, a: int, b: int, prefix: tuple[np.ndarray, np.ndarray] | None = None
) -> float:
    """Sum of squared deviations from the mean over y[a:b], in O(1) from prefix sums."""
    if not 0 <= a < b <= len(y):
        raise ValueError(f"empty or out-of-range segment [{a}, {b})")
    if prefix is None:
        prefix = prefix_sums(y)
    s1, s2 = prefix
    width = b - a
    total = s1[b] - s1[a]
    return max(float(s2[b] - s2[a] - total * total / width), 0.0)


def pelt(y: np.ndarray, cfg: PeltConfig) -> list[int]:
    """Exact penalized segmentation of ``y``; returns internal change indices.

    Candidates are pruned once their partial cost plus the segment cost to the
    current point exceeds the incumbent optimum plus the penalty; a pruned
    candidate stays admissible for another ``min_segment`` samples because the
    domination argument needs the dominating point itself to be a feasible
    last boundary.
    """
    arr = np.asarray(y, dtype=float)
    n = len(arr)
    msz, jump, beta = cfg.min_segment, cfg.subsample, cfg.penalty
    if n < 2 * msz:
        raise InsufficientDataError(
            f"series of {n} samples cannot hold two segments of {msz}"
        )
    prefix = prefix_sums(arr)
    s1 = prefix[0].tolist()
    s2 = prefix[1].tolist()

    # Internal boundaries live on the subsample grid and must leave room for
    # a minimum-length segment on both sides; the series end is always an
    # evaluation point.
    internal = [t for t in range(jump, n, jump) if msz <= t <= n - msz]
    points = internal + [n]

    cost_best = {0: -beta}
    argmin: dict[int, int] = {}
    candidates = [0]
    dominated_at: dict[int, int] = {}

    for t in points:
        best_val = math.inf
        best_c = -1
        s1_t = s1[t]
        s2_t = s2[t]
        alive = []
        partials = []
        for c in candidates:
            dom = dominated_at.get(c)
            if dom is not None and t - dom >= msz:
                continue
            seg = t - c
            total = s1_t - s1[c]
            partial = cost_best[c] + (s2_t - s2[c] - total * total / seg)
            alive.append(c)
            partials.append(partial)
            if seg >= msz and partial < best_val:
                best_val = partial
                best_c = c
        cost_best[t] = best_val + beta
        argmin[t] = best_c
        for c, partial in zip(alive, partials):
            if c not in dominated_at and partial > cost_best[t]:
                dominated_at[c] = t
        candidates = alive
        if t != n:
            candidates.append(t)

    changes: list[int] = []
    t = n
    while argmin[t] != 0:
        t = argmin[t]
        changes.append(t)
    changes.reverse()
    return changes


def detect_reference(
    series: RawSeries,
    window: tuple[pd.Timestamp, pd.Timestamp],
    cfg: PeltConfig,
    daily_mean: bool = False,
) -> ChangePointSet:
    """Detect change points on the target restricted to ``window`` and project
    them to day-of-year positions for annual reuse.

    ``window`` is half-open [start, end). With ``daily_mean`` the target is
    pre-aggregated to daily means and the configured lengths are reinterpreted
    in days. Positions landing on day 366 are dropped.
    """
    start, end = pd.Timestamp(window[0]), pd.Timestamp(window[1])
    first, last = series.timestamps[0], series.timestamps[-1]
    if start < first or end > last + pd.Timedelta(hours=1):
        raise DataError(
            f"reference window [{start}, {end}) outside series "
            f"[{first}, {last + pd.Timedelta(hours=1)})"
        )
    if end <= start:
        raise DataError("reference window is empty")

    lo = int(series.timestamps.searchsorted(start, side="left"))
    hi = int(series.timestamps.searchsorted(end, side="left"))
    values = series.target[lo:hi]

    if daily_mean:
        days = len(values) // 24
        if days < 2:
            raise InsufficientDataError("daily aggregation needs at least two full days")
        values = values[: days * 24].reshape(days, 24).mean(axis=1)
        cfg = PeltConfig(
            penalty=cfg.penalty,
            min_segment=max(1, cfg.min_segment // 24),
            subsample=max(1, cfg.subsample // 24),
        )
        step = pd.Timedelta(days=1)
    else:
        step = pd.Timedelta(hours=1)

    changes = pelt(values, cfg)
    positions: list[int] = []
    for idx in changes:
        day = int((start + idx * step).dayofyear)
        if day == 366:
            continue
        if not positions or day > positions[-1]:
            positions.append(day)
    return ChangePointSet(tuple(positions))


def segment_of(day_of_year: int, cps: ChangePointSet) -> int:
    """0-based segment index of a day; day 366 inherits the last segment."""
    if not 1 <= day_of_year <= 366:
        raise ValueError(f"day_of_year {day_of_year} outside 1..366")
    if day_of_year == 366:
        return len(cps.positions)
    return bisect_right(cps.positions, day_of_year)


def write_changepoints(path: str | Path, cps: ChangePointSet) -> Path:
    """Persist positions one day-of-year per line so runs can pin segmentation."""
    path = Path(path)
    path.write_text("".join(f"{p}\n" for p in cps.positions), encoding="utf-8")
    return path


def read_changepoints(path: str | Path) -> ChangePointSet:
    path = Path(path)
    if not path.exists():
        raise DataError(f"change-point file not found: {path}")
    positions = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        try:
            positions.append(int(line))
        except ValueError as exc:
            raise FormatError(f"{path.name}:{lineno}: not a day-of-year: {line!r}") from exc
    try:
        return ChangePointSet(tuple(positions))
    except ValueError as exc:
        raise FormatError(f"{path.name}: {exc}") from exc
