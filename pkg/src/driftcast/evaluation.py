"""Interleaved test-then-train stream runner, error metrics and comparisons."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from driftcast.errors import DegenerateTestError, ProtocolError
from driftcast.ingest import Instance
from driftcast.selection import SchemaState


@dataclass(eq=False)
class ForecastRecord:
    """One origin's forecast against its realized targets."""

    origin: pd.Timestamp
    predicted: np.ndarray
    actual: np.ndarray
    schema: str
    trace: dict
    included: bool = True


def run_stream(
    instances: list[Instance],
    state: SchemaState,
    eval_start: pd.Timestamp | None = None,
) -> list[ForecastRecord]:
    """Forecast, record, then train on every instance in origin order.

    Records with origins before ``eval_start`` are produced and retained but
    flagged as excluded from aggregate metrics.
    """
    records: list[ForecastRecord] = []
    last: pd.Timestamp | None = None
    for instance in instances:
        if last is not None and instance.origin <= last:
            raise ProtocolError(
                f"instance at {instance.origin} arrives after {last}; stream must be ordered"
            )
        predicted, trace = state.forecast_with_trace(instance.features, instance.origin)
        records.append(
            ForecastRecord(
                origin=instance.origin,
                predicted=predicted,
                actual=instance.target.copy(),
                schema=state.kind.value,
                trace=trace,
                included=eval_start is None or instance.origin >= eval_start,
            )
        )
        state.train(instance.features, instance.target, instance.origin)
        last = instance.origin
    return records


def _flatten(records: list[ForecastRecord]) -> tuple[np.ndarray, np.ndarray]:
    actual = [r.actual for r in records if r.included]
    predicted = [r.predicted for r in records if r.included]
    if not actual:
        raise ValueError("no included records to aggregate")
    return np.concatenate(actual), np.concatenate(predicted)


def sape_values(actual: np.ndarray, predicted: np.ndarray) -> np.ndarray:
    """Per-point symmetric absolute percentage errors in [0, 200].

    Pairs where |G| + |F| = 0 contribute 0.
    """
    denom = 0.5 * (np.abs(actual) + np.abs(predicted))
    out = np.zeros_like(denom)
    nz = denom > 0
    out[nz] = 100.0 * np.abs(actual - predicted)[nz] / denom[nz]
    return out


def mae(records: list[ForecastRecord]) -> float:
    actual, predicted = _flatten(records)
    return float(np.mean(np.abs(actual - predicted)))


def mse(records: list[ForecastRecord]) -> float:
    actual, predicted = _flatten(records)
    return float(np.mean((actual - predicted) ** 2))


def smape(records: list[ForecastRecord]) -> float:
    actual, predicted = _flatten(records)
    return float(np.mean(sape_values(actual, predicted)))


_GRANULARITIES = ("year", "month", "month-of-single-year")


def aggregate(records: list[ForecastRecord], granularity: str) -> list[dict]:
    """Bucketed metric tables.

    Yearly rows report the mean metrics (MAE, MSE, SMAPE); monthly rows
    report the median of per-point SAPE. Buckets without included records
    are omitted.
    """
    if granularity not in _GRANULARITIES:
        raise ValueError(f"granularity must be one of {_GRANULARITIES}")
    buckets: dict = {}
    for record in records:
        if not record.included:
            continue
        if granularity == "year":
            key = record.origin.year
        elif granularity == "month":
            key = record.origin.month
        else:
            key = (record.origin.year, record.origin.month)
        buckets.setdefault(key, []).append(record)

    rows = []
    for key in sorted(buckets):
        actual, predicted = _flatten(buckets[key])
        sape = sape_values(actual, predicted)
        if granularity == "year":
            rows.append(
                {
                    "bucket": key,
                    "mae": float(np.mean(np.abs(actual - predicted))),
                    "mse": float(np.mean((actual - predicted) ** 2)),
                    "smape": float(np.mean(sape)),
                    "n_pairs": int(len(sape)),
                }
            )
        else:
            bucket = key if granularity == "month" else f"{key[0]}-{key[1]:02d}"
            rows.append(
                {
                    "bucket": bucket,
                    "median_sape": float(np.median(sape)),
                    "n_pairs": int(len(sape)),
                }
            )
    return rows


@dataclass
class ErrorReport:
    """Aggregated error tables for one run."""

    label: str
    schema: str
    overall: dict
    yearly: list[dict]
    monthly: list[dict]
    sape: np.ndarray
    notes: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "schema": self.schema,
            "overall": self.overall,
            "yearly": self.yearly,
            "monthly": self.monthly,
            "notes": self.notes,
        }


def build_report(
    records: list[ForecastRecord], label: str, notes: dict | None = None
) -> ErrorReport:
    actual, predicted = _flatten(records)
    sape = sape_values(actual, predicted)
    overall = {
        "mae": float(np.mean(np.abs(actual - predicted))),
        "mse": float(np.mean((actual - predicted) ** 2)),
        "smape": float(np.mean(sape)),
        "n_origins": int(sum(1 for r in records if r.included)),
        "n_pairs": int(len(sape)),
    }
    # Jensen sanity: the mean of squares dominates the squared mean.
    if overall["mse"] < overall["mae"] ** 2 * (1.0 - 1e-12):
        raise AssertionError("metric consistency violated: MSE < MAE^2")
    return ErrorReport(
        label=label,
        schema=records[0].schema if records else "",
        overall=overall,
        yearly=aggregate(records, "year"),
        monthly=aggregate(records, "month-of-single-year"),
        sape=sape,
        notes=notes or {},
    )


def per_origin_losses(records: list[ForecastRecord]) -> tuple[list[pd.Timestamp], np.ndarray]:
    """Squared-error loss per included origin, averaged over horizon steps."""
    origins = [r.origin for r in records if r.included]
    losses = np.asarray(
        [float(np.mean((r.actual - r.predicted) ** 2)) for r in records if r.included]
    )
    return origins, losses


def diebold_mariano(
    errs_a: np.ndarray, errs_b: np.ndarray, h: int = 1
) -> tuple[float, float]:
    """Diebold-Mariano statistic and two-sided normal p-value.

    ``errs_a`` and ``errs_b`` are per-origin loss series. The loss
    differential's long-run variance is estimated as gamma_0 plus twice the
    first h-1 autocovariances (1/n normalization). Identical series return
    (0, 1); any other zero/negative variance differential is degenerate.
    """
    a = np.asarray(errs_a, dtype=float)
    b = np.asarray(errs_b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("loss series must be one-dimensional and equally long")
    n = len(a)
    if n < 10:
        raise ValueError("need at least 10 loss pairs")
    if h < 1:
        raise ValueError("h must be >= 1")
    if h > n:
        raise ValueError("h cannot exceed the series length")

    d = a - b
    if not np.any(d != 0.0):
        return 0.0, 1.0
    d_bar = float(np.mean(d))
    centered = d - d_bar
    gammas = [float(centered[j:] @ centered[: n - j]) / n for j in range(h)]
    v_hat = gammas[0] + 2.0 * sum(gammas[1:])
    if v_hat <= 0.0:
        raise DegenerateTestError("loss differential has no usable variance")
    statistic = d_bar / math.sqrt(v_hat / n)
    p_value = math.erfc(abs(statistic) / math.sqrt(2.0))
    return statistic, p_value


# -- artifact emitters --------------------------------------------------------


def write_records_csv(records: list[ForecastRecord], path: str | Path) -> Path:
    """Long-format records file: one row per origin and horizon step."""
    path = Path(path)
    lines = ["origin,step,actual,predicted,schema,collections,weights,included"]
    for record in records:
        collections = ";".join(str(i) for i in record.trace["collections"])
        weights = ";".join(repr(float(w)) for w in record.trace["weights"])
        stamp = record.origin.isoformat()
        for step in range(len(record.predicted)):
            lines.append(
                f"{stamp},{step},{float(record.actual[step])!r},"
                f"{float(record.predicted[step])!r},"
                f"{record.schema},{collections},{weights},{int(record.included)}"
            )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def write_report_json(report: ErrorReport, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return path


def write_smape_by_year_csv(report: ErrorReport, path: str | Path) -> Path:
    """Plot-ready long format for SMAPE-by-year curves."""
    path = Path(path)
    lines = ["label,schema,year,smape"]
    for row in report.yearly:
        lines.append(f"{report.label},{report.schema},{row['bucket']},{row['smape']!r}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
