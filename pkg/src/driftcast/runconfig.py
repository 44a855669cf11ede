"""Declarative run configuration: INI parsing, defaults, validation, echo."""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass
from pathlib import Path

import pandas as pd

from driftcast.changepoint import PENALTY_PRESETS, PeltConfig
from driftcast.errors import ConfigError
from driftcast.hoeffding import TreeParams
from driftcast.ingest import ColumnSchema, FeatureConfig
from driftcast.selection import CHANGE_POINT_KINDS, FEEDBACK_METRICS, SchemaKind

OUTPUT_DIR_ENV = "DRIFTCAST_OUTPUT_DIR"

_KNOWN_KEYS: dict[str, tuple[str, ...]] = {
    "input": (
        "path",
        "delimiter",
        "timestamp_column",
        "target_column",
        "exogenous_columns",
        "flag_columns",
        "forecast_column",
        "max_gap_hours",
    ),
    "features": (
        "lag_hours",
        "forecast_hours",
        "horizon",
        "origin_hour",
        "lag_exogenous",
        "calendar",
    ),
    "detector": (
        "penalty",
        "min_segment_hours",
        "subsample_hours",
        "reference_start",
        "reference_end",
        "daily_mean",
    ),
    "schema": (
        "kind",
        "boundary_days",
        "feedback_metric",
        "changepoint_file",
    ),
    "tree": (
        "grace_period",
        "delta",
        "tau",
        "decay",
        "max_depth",
        "leaf_learning_rate",
    ),
    "evaluation": ("eval_start",),
    "output": ("directory", "label"),
}


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved settings for one experiment run."""

    input_path: Path
    column_schema: ColumnSchema
    delimiter: str
    max_gap_hours: int
    features: FeatureConfig
    detector: PeltConfig | None
    reference_start: pd.Timestamp | None
    reference_end: pd.Timestamp | None
    daily_mean: bool
    changepoint_file: Path | None
    schema_kind: SchemaKind
    boundary_days: int
    feedback_metric: str
    tree: TreeParams
    eval_start: pd.Timestamp | None
    output_dir: Path
    label: str


def _split_list(value: str) -> tuple[str, ...]:
    return tuple(item.strip() for item in value.split(",") if item.strip())


def _parse_bool(section: str, key: str, value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"[{section}] {key}: expected a boolean, got {value!r}")


def _parse_int(section: str, key: str, value: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: expected an integer, got {value!r}") from None


def _parse_float(section: str, key: str, value: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: expected a number, got {value!r}") from None


def _parse_timestamp(section: str, key: str, value: str) -> pd.Timestamp:
    stamp = pd.Timestamp(value)
    if pd.isna(stamp):
        raise ConfigError(f"[{section}] {key}: unparsable timestamp {value!r}")
    return stamp


def _parse_penalty(value: str) -> float:
    token = value.strip().lower()
    if token in PENALTY_PRESETS:
        return PENALTY_PRESETS[token]
    try:
        penalty = float(token)
    except ValueError:
        raise ConfigError(
            f"[detector] penalty: expected a number or preset "
            f"({', '.join(sorted(PENALTY_PRESETS))}), got {value!r}"
        ) from None
    if penalty < 0:
        raise ConfigError("[detector] penalty must be >= 0")
    return penalty


def parse_config_text(text: str, source: str = "<config>") -> RunConfig:
    """Parse and validate configuration text; omitted keys take documented defaults."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc

    for section in parser.sections():
        if section not in _KNOWN_KEYS:
            raise ConfigError(f"unknown section [{section}]")
        for key in parser[section]:
            if key not in _KNOWN_KEYS[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")

    def get(section: str, key: str, default: str | None = None) -> str | None:
        if parser.has_option(section, key):
            return parser.get(section, key)
        return default

    if not parser.has_section("input"):
        raise ConfigError("missing required section [input]")
    path_value = get("input", "path")
    if not path_value:
        raise ConfigError("[input] path is required")
    target = get("input", "target_column")
    if not target:
        raise ConfigError("[input] target_column is required")
    timestamp = get("input", "timestamp_column", "timestamp")
    exogenous = _split_list(get("input", "exogenous_columns", "") or "")
    flags = _split_list(get("input", "flag_columns", "") or "")
    forecast_column = get("input", "forecast_column") or None
    column_schema = ColumnSchema(
        timestamp=timestamp,
        target=target,
        exogenous=exogenous,
        flags=flags,
        forecast=forecast_column,
    )
    delimiter = get("input", "delimiter", ",") or ","
    max_gap = _parse_int("input", "max_gap_hours", get("input", "max_gap_hours", "6"))
    if max_gap < 0:
        raise ConfigError("[input] max_gap_hours must be >= 0")

    lag_exogenous_raw = get("features", "lag_exogenous") if parser.has_section("features") else None
    lag_exogenous = _split_list(lag_exogenous_raw) if lag_exogenous_raw is not None else exogenous
    unknown_lags = [name for name in lag_exogenous if name not in exogenous]
    if unknown_lags:
        raise ConfigError(f"[features] lag_exogenous names not declared exogenous: {unknown_lags}")
    try:
        features = FeatureConfig(
            lag_hours=_parse_int("features", "lag_hours", get("features", "lag_hours", "72")),
            forecast_hours=_parse_int(
                "features", "forecast_hours", get("features", "forecast_hours", "24")
            ),
            horizon=_parse_int("features", "horizon", get("features", "horizon", "24")),
            origin_hour=_parse_int("features", "origin_hour", get("features", "origin_hour", "0")),
            lag_exogenous=lag_exogenous,
            calendar=_parse_bool("features", "calendar", get("features", "calendar", "true")),
            forecast_source=forecast_column,
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"[features] {exc}") from exc

    kind_value = get("schema", "kind") if parser.has_section("schema") else None
    if not kind_value:
        raise ConfigError("[schema] kind is required")
    try:
        schema_kind = SchemaKind(kind_value.strip().lower())
    except ValueError:
        raise ConfigError(
            f"[schema] kind must be one of {[k.value for k in SchemaKind]}, got {kind_value!r}"
        ) from None
    boundary_days = _parse_int("schema", "boundary_days", get("schema", "boundary_days", "7"))
    if boundary_days < 0:
        raise ConfigError("[schema] boundary_days must be >= 0")
    feedback_metric = (get("schema", "feedback_metric", "mae") or "mae").strip().lower()
    if feedback_metric not in FEEDBACK_METRICS:
        raise ConfigError(
            f"[schema] feedback_metric must be one of {sorted(FEEDBACK_METRICS)}"
        )
    changepoint_file = get("schema", "changepoint_file") or None

    has_detector = parser.has_section("detector")
    detector = None
    reference_start = reference_end = None
    daily_mean = False
    if has_detector:
        penalty_value = get("detector", "penalty")
        if penalty_value is None:
            raise ConfigError("[detector] penalty is required")
        try:
            detector = PeltConfig(
                penalty=_parse_penalty(penalty_value),
                min_segment=_parse_int(
                    "detector", "min_segment_hours", get("detector", "min_segment_hours", "168")
                ),
                subsample=_parse_int(
                    "detector", "subsample_hours", get("detector", "subsample_hours", "24")
                ),
            )
        except ValueError as exc:
            raise ConfigError(f"[detector] {exc}") from exc
        start_value = get("detector", "reference_start")
        end_value = get("detector", "reference_end")
        if not start_value or not end_value:
            raise ConfigError("[detector] reference_start and reference_end are required")
        reference_start = _parse_timestamp("detector", "reference_start", start_value)
        reference_end = _parse_timestamp("detector", "reference_end", end_value)
        if reference_end <= reference_start:
            raise ConfigError("[detector] reference window is empty")
        daily_mean = _parse_bool("detector", "daily_mean", get("detector", "daily_mean", "false"))

    if schema_kind in CHANGE_POINT_KINDS:
        if has_detector and changepoint_file:
            raise ConfigError(
                "[detector] and [schema] changepoint_file are mutually exclusive"
            )
        if not has_detector and not changepoint_file:
            raise ConfigError(
                f"schema {schema_kind.value} requires a [detector] section or a changepoint_file"
            )
    else:
        if has_detector or changepoint_file:
            raise ConfigError(
                f"schema {schema_kind.value} does not take change-point settings"
            )

    try:
        tree = TreeParams(
            delta=_parse_float("tree", "delta", get("tree", "delta", "1e-7")),
            tau=_parse_float("tree", "tau", get("tree", "tau", "0.5")),
            grace_period=_parse_int("tree", "grace_period", get("tree", "grace_period", "7")),
            decay=_parse_float("tree", "decay", get("tree", "decay", "0.2")),
            max_depth=_parse_int("tree", "max_depth", get("tree", "max_depth", "20")),
            leaf_learning_rate=_parse_float(
                "tree", "leaf_learning_rate", get("tree", "leaf_learning_rate", "0.5")
            ),
        )
    except ValueError as exc:
        raise ConfigError(f"[tree] {exc}") from exc

    eval_start_value = get("evaluation", "eval_start") if parser.has_section("evaluation") else None
    eval_start = (
        _parse_timestamp("evaluation", "eval_start", eval_start_value)
        if eval_start_value
        else None
    )

    output_value = get("output", "directory") if parser.has_section("output") else None
    output_dir = os.environ.get(OUTPUT_DIR_ENV) or output_value or "driftcast-output"
    label = (get("output", "label") if parser.has_section("output") else None) or schema_kind.value

    return RunConfig(
        input_path=Path(path_value),
        column_schema=column_schema,
        delimiter=delimiter,
        max_gap_hours=max_gap,
        features=features,
        detector=detector,
        reference_start=reference_start,
        reference_end=reference_end,
        daily_mean=daily_mean,
        changepoint_file=Path(changepoint_file) if changepoint_file else None,
        schema_kind=schema_kind,
        boundary_days=boundary_days,
        feedback_metric=feedback_metric,
        tree=tree,
        eval_start=eval_start,
        output_dir=Path(output_dir),
        label=label,
    )


def parse_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    return parse_config_text(path.read_text(encoding="utf-8"), source=str(path))


def render_config(cfg: RunConfig) -> str:
    """Resolved-config echo: every effective value, re-parseable."""
    lines = ["[input]"]
    lines.append(f"path = {cfg.input_path}")
    lines.append(f"delimiter = {cfg.delimiter}")
    lines.append(f"timestamp_column = {cfg.column_schema.timestamp}")
    lines.append(f"target_column = {cfg.column_schema.target}")
    lines.append(f"exogenous_columns = {', '.join(cfg.column_schema.exogenous)}")
    lines.append(f"flag_columns = {', '.join(cfg.column_schema.flags)}")
    if cfg.column_schema.forecast:
        lines.append(f"forecast_column = {cfg.column_schema.forecast}")
    lines.append(f"max_gap_hours = {cfg.max_gap_hours}")
    lines.append("")
    lines.append("[features]")
    lines.append(f"lag_hours = {cfg.features.lag_hours}")
    lines.append(f"forecast_hours = {cfg.features.forecast_hours}")
    lines.append(f"horizon = {cfg.features.horizon}")
    lines.append(f"origin_hour = {cfg.features.origin_hour}")
    lines.append(f"lag_exogenous = {', '.join(cfg.features.lag_exogenous)}")
    lines.append(f"calendar = {str(cfg.features.calendar).lower()}")
    lines.append("")
    if cfg.detector is not None:
        lines.append("[detector]")
        lines.append(f"penalty = {cfg.detector.penalty!r}")
        lines.append(f"min_segment_hours = {cfg.detector.min_segment}")
        lines.append(f"subsample_hours = {cfg.detector.subsample}")
        lines.append(f"reference_start = {cfg.reference_start.isoformat()}")
        lines.append(f"reference_end = {cfg.reference_end.isoformat()}")
        lines.append(f"daily_mean = {str(cfg.daily_mean).lower()}")
        lines.append("")
    lines.append("[schema]")
    lines.append(f"kind = {cfg.schema_kind.value}")
    lines.append(f"boundary_days = {cfg.boundary_days}")
    lines.append(f"feedback_metric = {cfg.feedback_metric}")
    if cfg.changepoint_file is not None:
        lines.append(f"changepoint_file = {cfg.changepoint_file}")
    lines.append("")
    lines.append("[tree]")
    lines.append(f"grace_period = {cfg.tree.grace_period}")
    lines.append(f"delta = {cfg.tree.delta!r}")
    lines.append(f"tau = {cfg.tree.tau!r}")
    lines.append(f"decay = {cfg.tree.decay!r}")
    lines.append(f"max_depth = {cfg.tree.max_depth}")
    lines.append(f"leaf_learning_rate = {cfg.tree.leaf_learning_rate!r}")
    lines.append("")
    if cfg.eval_start is not None:
        lines.append("[evaluation]")
        lines.append(f"eval_start = {cfg.eval_start.isoformat()}")
        lines.append("")
    lines.append("[output]")
    lines.append(f"directory = {cfg.output_dir}")
    lines.append(f"label = {cfg.label}")
    return "\n".join(lines) + "\n"
