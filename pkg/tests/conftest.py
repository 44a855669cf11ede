from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from driftcast.ingest import Instance


def make_hourly_frame(
    start: str,
    periods: int,
    target_fn=None,
    extra_columns: dict | None = None,
) -> pd.DataFrame:
    """Hourly CSV-shaped frame with a deterministic default target."""
    stamps = pd.date_range(start, periods=periods, freq="h")
    hours = np.arange(periods)
    if target_fn is None:
        target = 100.0 + 10.0 * np.sin(2 * np.pi * hours / 24.0)
    else:
        target = np.asarray([target_fn(ts, i) for i, ts in enumerate(stamps)], dtype=float)
    data = {"timestamp": stamps.strftime("%Y-%m-%d %H:%M"), "consumption": target}
    if extra_columns:
        data.update(extra_columns)
    return pd.DataFrame(data)


def write_frame(frame: pd.DataFrame, path: Path) -> Path:
    frame.to_csv(path, index=False)
    return path


def make_instances(
    start: str,
    n_days: int,
    horizon: int,
    feature_fn,
    target_fn,
) -> list[Instance]:
    """Daily-origin instances with arbitrary feature/target generators.

    ``feature_fn(origin, day_index) -> 1-D array``;
    ``target_fn(origin, day_index, features) -> array of length horizon``.
    """
    origins = pd.date_range(start, periods=n_days, freq="D")
    instances = []
    for day, origin in enumerate(origins):
        features = np.asarray(feature_fn(origin, day), dtype=float)
        target = np.asarray(target_fn(origin, day, features), dtype=float)
        assert len(target) == horizon
        instances.append(Instance(origin=origin, features=features, target=target))
    return instances


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def render_ini(sections: dict[str, dict]) -> str:
    lines = []
    for name, options in sections.items():
        lines.append(f"[{name}]")
        for key, value in options.items():
            lines.append(f"{key} = {value}")
        lines.append("")
    return "\n".join(lines)


PLANTED_DAYS = (100, 250)
PLANTED_LEVELS = (50.0, 120.0, 80.0)


def regime_csv(path: Path, start="2013-01-01", years=2, seed=7) -> Path:
    """Hourly CSV with annual level shifts at PLANTED_DAYS."""
    rng = np.random.default_rng(seed)
    periods = 0
    begin = pd.Timestamp(start)
    end = pd.Timestamp(f"{begin.year + years - 1}-12-31 23:00")
    stamps = pd.date_range(begin, end, freq="h")
    day = np.minimum(stamps.dayofyear.to_numpy(), 365)
    segment = np.zeros(len(stamps), dtype=int)
    for planted in PLANTED_DAYS:
        segment += day >= planted
    target = np.asarray(PLANTED_LEVELS)[segment] + rng.normal(0.0, 1.0, len(stamps))
    frame = pd.DataFrame(
        {"timestamp": stamps.strftime("%Y-%m-%d %H:%M"), "consumption": target}
    )
    frame.to_csv(path, index=False)
    return path


def run_config_ini(
    csv_path: Path,
    out_dir: Path,
    kind: str = "smca",
    detector: dict | None = None,
    schema_extra: dict | None = None,
    eval_start: str | None = None,
    label: str | None = None,
    features: dict | None = None,
) -> str:
    sections: dict[str, dict] = {
        "input": {"path": csv_path, "target_column": "consumption"},
        "features": {"lag_hours": 24, "forecast_hours": 0, "horizon": 4, **(features or {})},
        "schema": {"kind": kind, **(schema_extra or {})},
        "output": {"directory": out_dir, "label": label or kind},
    }
    if detector is not None:
        sections["detector"] = detector
    if eval_start is not None:
        sections["evaluation"] = {"eval_start": eval_start}
    return render_ini(sections)
