"""CSV ingestion, gap repair and forecast-origin instance construction."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from driftcast.errors import (
    ConfigError,
    DataError,
    FormatError,
    InsufficientDataError,
    SchemaError,
    UnrecoverableGapError,
)


@dataclass(frozen=True)
class ColumnSchema:
    """Column-role mapping for the input CSV.

    Exactly one timestamp column and one target column; exogenous and flag
    entries name the CSV columns directly. ``forecast`` points at a column
    carrying an externally forecast exogenous series (known ahead of time).
    """

    timestamp: str
    target: str
    exogenous: tuple[str, ...] = ()
    flags: tuple[str, ...] = ()
    forecast: str | None = None

    def __post_init__(self) -> None:
        names = [self.timestamp, self.target, *self.exogenous, *self.flags]
        if self.forecast is not None:
            names.append(self.forecast)
        duplicates = {n for n in names if names.count(n) > 1}
        if duplicates:
            raise ConfigError(f"column assigned to more than one role: {sorted(duplicates)}")


@dataclass
class RawSeries:
    """Hourly-gridded series bundle; values may be NaN until imputation."""

    timestamps: pd.DatetimeIndex
    target: np.ndarray
    exogenous: dict[str, np.ndarray] = field(default_factory=dict)
    flags: dict[str, np.ndarray] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.timestamps)

    def validate(self) -> None:
        n = len(self.timestamps)
        if self.timestamps.has_duplicates:
            raise FormatError("duplicate timestamps in series")
        if n > 1:
            steps = np.diff(self.timestamps.asi8)
            if not np.all(steps == 3_600_000_000_000):
                bad = int(np.argmin(steps == 3_600_000_000_000))
                raise FormatError(
                    f"timestamps not hourly-spaced around {self.timestamps[bad]}"
                )
        for name, values in [("target", self.target), *self.exogenous.items(), *self.flags.items()]:
            if len(values) != n:
                raise FormatError(f"column {name!r} has length {len(values)}, expected {n}")


@dataclass(frozen=True, eq=False)
class Instance:
    """One forecast-origin sample: flat feature vector plus m-step target."""

    origin: pd.Timestamp
    features: np.ndarray
    target: np.ndarray


@dataclass(frozen=True)
class FeatureConfig:
    """Feature layout for instance construction.

    The feature vector is the concatenation of a lag block (``lag_hours``
    values of the target and of every series in ``lag_exogenous``, ending
    just before the origin), a forecast block (``forecast_hours`` values of
    the forecast-feed column starting at the origin, or persistence of the
    last observed value when no feed is configured) and a calendar block
    (day of week, month and the 0/1 flags).
    """

    lag_hours: int = 72
    forecast_hours: int = 24
    horizon: int = 24
    origin_hour: int = 0
    lag_exogenous: tuple[str, ...] = ()
    calendar: bool = True
    forecast_source: str | None = None

    def __post_init__(self) -> None:
        if self.lag_hours < 1 or self.horizon < 1:
            raise ConfigError("lag_hours and horizon must be positive")
        if self.forecast_hours < 0:
            raise ConfigError("forecast_hours must be >= 0")
        if not 0 <= self.origin_hour <= 23:
            raise ConfigError("origin_hour must be in 0..23")
        if self.forecast_source is not None and self.forecast_hours > self.horizon:
            raise ConfigError(
                "forecast_hours cannot exceed horizon when a forecast feed is used"
            )


_HOUR_NS = 3_600_000_000_000


def load_csv(path: str | Path, schema: ColumnSchema, delimiter: str = ",") -> RawSeries:
    """Load a CSV onto the full hourly grid between its first and last row.

    Rows are sorted by timestamp; hours absent from the file become NaN values
    to be repaired by :func:`impute_gaps`. Duplicated or sub-hourly timestamps
    are format errors naming the first offending data row (1-based).
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"input file not found: {path}")
    frame = pd.read_csv(path, sep=delimiter)

    wanted = [schema.timestamp, schema.target, *schema.exogenous, *schema.flags]
    if schema.forecast is not None:
        wanted.append(schema.forecast)
    missing = [c for c in wanted if c not in frame.columns]
    if missing:
        raise SchemaError(f"missing column(s) {missing} in {path.name}")

    stamps = pd.to_datetime(frame[schema.timestamp], errors="coerce")
    bad = stamps.isna()
    if bad.any():
        row = int(bad.idxmax()) + 1
        raise FormatError(f"unparsable timestamp at data row {row}")
    if stamps.duplicated().any():
        row = int(stamps.duplicated().idxmax()) + 1
        raise FormatError(f"duplicated timestamp {stamps[row - 1]} at data row {row}")
    misaligned = stamps.to_numpy(dtype="datetime64[ns]").view("int64") % _HOUR_NS != 0
    if misaligned.any():
        row = int(np.flatnonzero(misaligned)[0]) + 1
        raise FormatError(f"timestamp not on an hour boundary at data row {row}")

    frame = frame.assign(**{schema.timestamp: stamps}).sort_values(schema.timestamp)
    frame = frame.set_index(schema.timestamp)
    grid = pd.date_range(frame.index[0], frame.index[-1], freq="h")
    frame = frame.reindex(grid)

    def numeric(column: str) -> np.ndarray:
        return pd.to_numeric(frame[column], errors="coerce").to_numpy(dtype=float)

    exogenous = {name: numeric(name) for name in schema.exogenous}
    if schema.forecast is not None:
        exogenous[schema.forecast] = numeric(schema.forecast)
    flags = {}
    for name in schema.flags:
        col = frame[name]
        if col.dtype == object:
            col = col.replace({"True": 1, "False": 0, "true": 1, "false": 0})
        flags[name] = pd.to_numeric(col, errors="coerce").to_numpy(dtype=float)

    series = RawSeries(timestamps=grid, target=numeric(schema.target), exogenous=exogenous, flags=flags)
    series.validate()
    return series


def _nan_runs(values: np.ndarray) -> list[tuple[int, int]]:
    """Half-open [start, stop) index ranges of consecutive NaNs."""
    mask = np.isnan(values)
    if not mask.any():
        return []
    edges = np.diff(mask.astype(np.int8))
    starts = list(np.flatnonzero(edges == 1) + 1)
    stops = list(np.flatnonzero(edges == -1) + 1)
    if mask[0]:
        starts.insert(0, 0)
    if mask[-1]:
        stops.append(len(values))
    return list(zip(starts, stops))


def impute_gaps(series: RawSeries, max_gap: int = 6) -> RawSeries:
    """Fill missing values: linear interpolation for numeric series within
    gaps of at most ``max_gap`` hours, last observation carried forward for
    flags. Longer gaps, and gaps touching either series edge, are
    unrecoverable errors reporting the gap location.
    """
    n = len(series)
    index = np.arange(n, dtype=float)

    def repair(name: str, values: np.ndarray) -> np.ndarray:
        runs = _nan_runs(values)
        if not runs:
            return values.copy()
        for start, stop in runs:
            width = stop - start
            if start == 0 or stop == n:
                raise UnrecoverableGapError(
                    f"column {name!r}: gap of {width}h at the series edge "
                    f"starting {series.timestamps[start]}"
                )
            if width > max_gap:
                raise UnrecoverableGapError(
                    f"column {name!r}: gap of {width}h starting "
                    f"{series.timestamps[start]} exceeds max_gap={max_gap}"
                )
        good = ~np.isnan(values)
        return np.interp(index, index[good], values[good])

    def carry(values: np.ndarray) -> np.ndarray:
        filled = pd.Series(values).ffill().bfill().to_numpy(dtype=float)
        if np.isnan(filled).any():
            raise UnrecoverableGapError("flag column has no observed values")
        return filled

    return RawSeries(
        timestamps=series.timestamps,
        target=repair("target", series.target),
        exogenous={k: repair(k, v) for k, v in series.exogenous.items()},
        flags={k: carry(v) for k, v in series.flags.items()},
    )


def _persistence_source(series: RawSeries, cfg: FeatureConfig) -> np.ndarray:
    # Fallback feed: persist the first lagged exogenous series, or the target
    # when none is selected.
    if cfg.lag_exogenous:
        return series.exogenous[cfg.lag_exogenous[0]]
    return series.target


def feature_names(series: RawSeries, cfg: FeatureConfig) -> list[str]:
    """Positional meaning of every feature column, stable across a run."""
    names: list[str] = []
    for block in ("target", *cfg.lag_exogenous):
        names.extend(f"{block}[t-{k}]" for k in range(cfg.lag_hours, 0, -1))
    names.extend(f"forecast[t+{k}]" for k in range(cfg.forecast_hours))
    if cfg.calendar:
        names.append("day_of_week")
        names.append("month")
        names.extend(f"flag:{name}" for name in sorted(series.flags))
    return names


def build_instances(series: RawSeries, cfg: FeatureConfig) -> list[Instance]:
    """Materialize one instance per origin with full history and future.

    An origin is a timestamp at ``cfg.origin_hour`` with ``lag_hours`` of
    history before it and ``horizon`` hours from it onward; the target vector
    is the next ``horizon`` hourly values starting at the origin. The result
    is deterministic and ordered by origin.
    """
    n = len(series)
    if n < cfg.lag_hours + cfg.horizon:
        raise InsufficientDataError(
            f"series of {n}h cannot host lag {cfg.lag_hours}h plus horizon {cfg.horizon}h"
        )
    for name in cfg.lag_exogenous:
        if name not in series.exogenous:
            raise ConfigError(f"lag_exogenous references unknown series {name!r}")
    if cfg.forecast_source is not None and cfg.forecast_source not in series.exogenous:
        raise ConfigError(f"forecast_source references unknown series {cfg.forecast_source!r}")

    used = [("target", series.target)]
    used += [(name, series.exogenous[name]) for name in cfg.lag_exogenous]
    if cfg.forecast_source is not None:
        used.append((cfg.forecast_source, series.exogenous[cfg.forecast_source]))
    if cfg.calendar:
        used += list(series.flags.items())
    for name, values in used:
        if np.isnan(values).any():
            raise DataError(f"column {name!r} still has missing values; impute first")

    forecast_feed = (
        series.exogenous[cfg.forecast_source] if cfg.forecast_source is not None else None
    )
    persistence = _persistence_source(series, cfg) if forecast_feed is None else None
    flag_order = sorted(series.flags)

    hours = series.timestamps.hour
    instances: list[Instance] = []
    for i in range(cfg.lag_hours, n - cfg.horizon + 1):
        if hours[i] != cfg.origin_hour:
            continue
        blocks = [series.target[i - cfg.lag_hours : i]]
        blocks += [series.exogenous[name][i - cfg.lag_hours : i] for name in cfg.lag_exogenous]
        if cfg.forecast_hours:
            if forecast_feed is not None:
                blocks.append(forecast_feed[i : i + cfg.forecast_hours])
            else:
                blocks.append(np.full(cfg.forecast_hours, persistence[i - 1]))
        if cfg.calendar:
            origin = series.timestamps[i]
            calendar = [float(origin.dayofweek), float(origin.month)]
            calendar += [float(series.flags[name][i]) for name in flag_order]
            blocks.append(np.asarray(calendar))
        instances.append(
            Instance(
                origin=series.timestamps[i],
                features=np.concatenate(blocks),
                target=series.target[i : i + cfg.horizon].copy(),
            )
        )
    return instances
