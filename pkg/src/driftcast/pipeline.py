"""End-to-end experiment orchestration and artifact persistence."""

from __future__ import annotations

import csv
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from driftcast.changepoint import (
    ChangePointSet,
    detect_reference,
    read_changepoints,
    write_changepoints,
)
from driftcast.errors import AlignmentError, DataError, DriftcastError
from driftcast.evaluation import (
    ErrorReport,
    build_report,
    diebold_mariano,
    run_stream,
    write_records_csv,
    write_report_json,
    write_smape_by_year_csv,
)
from driftcast.ingest import RawSeries, build_instances, impute_gaps, load_csv
from driftcast.runconfig import RunConfig, render_config
from driftcast.selection import CHANGE_POINT_KINDS, SchemaState, build_collections

RECORDS_FILE = "records.csv"
REPORT_FILE = "report.json"
CHANGEPOINTS_FILE = "changepoints.txt"
CONFIG_FILE = "config.ini"
SMAPE_FILE = "smape_by_year.csv"

# Choices the pipeline documents in every run report.
_REPORT_NOTES = {
    "excluded_features": "categorical text columns (weather phenomena, cloud cover) are not ingested",
    "scaling": "no global feature scaling is applied; tree thresholds are scale-equivariant",
}


@dataclass
class RunResult:
    label: str
    output_dir: Path
    records_path: Path
    report_path: Path
    config_path: Path
    changepoints_path: Path | None
    report: ErrorReport
    changepoints: ChangePointSet | None


@contextmanager
def _stage(name: str):
    try:
        yield
    except DriftcastError as exc:
        if not str(exc).startswith(f"{name}:"):
            exc.args = (f"{name}: {exc}",)
        raise


def load_series(cfg: RunConfig) -> RawSeries:
    series = load_csv(cfg.input_path, cfg.column_schema, delimiter=cfg.delimiter)
    return impute_gaps(series, max_gap=cfg.max_gap_hours)


def resolve_changepoints(cfg: RunConfig, series: RawSeries | None = None) -> ChangePointSet | None:
    """Change points for the run: detected, loaded from file, or none."""
    if cfg.schema_kind not in CHANGE_POINT_KINDS:
        return None
    if cfg.changepoint_file is not None:
        return read_changepoints(cfg.changepoint_file)
    if series is None:
        series = load_series(cfg)
    return detect_reference(
        series,
        (cfg.reference_start, cfg.reference_end),
        cfg.detector,
        daily_mean=cfg.daily_mean,
    )


def detect(cfg: RunConfig) -> tuple[ChangePointSet, Path]:
    """Run only the detection stage and persist the change-point artifact."""
    with _stage("ingest"):
        series = load_series(cfg)
    with _stage("detect"):
        cps = resolve_changepoints(cfg, series)
    if cps is None:
        raise DataError(f"detect: schema {cfg.schema_kind.value} has no detector configured")
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    path = write_changepoints(cfg.output_dir / CHANGEPOINTS_FILE, cps)
    return cps, path


def run(cfg: RunConfig) -> RunResult:
    """Execute ingest, detection, streaming evaluation and artifact writing.

    Deterministic: identical config and input produce byte-identical outputs.
    Partially written outputs are removed when a stage fails.
    """
    with _stage("ingest"):
        series = load_series(cfg)
        instances = build_instances(series, cfg.features)
        if not instances:
            raise DataError("no instances could be built from the input series")
    with _stage("detect"):
        cps = resolve_changepoints(cfg, series)
    with _stage("stream"):
        collections = build_collections(cfg.schema_kind, cfg.features.horizon, cfg.tree, cps)
        state = SchemaState(
            cfg.schema_kind,
            collections,
            cps=cps,
            boundary_days=cfg.boundary_days,
            feedback_metric=cfg.feedback_metric,
        )
        records = run_stream(instances, state, eval_start=cfg.eval_start)
    with _stage("report"):
        notes = dict(_REPORT_NOTES)
        notes["n_collections"] = len(collections)
        notes["collection_usage"] = _collection_usage(records)
        if cps is not None:
            notes["changepoints"] = list(cps.positions)
        report = build_report(records, cfg.label, notes=notes)

    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    try:
        records_path = write_records_csv(records, cfg.output_dir / RECORDS_FILE)
        written.append(records_path)
        report_path = write_report_json(report, cfg.output_dir / REPORT_FILE)
        written.append(report_path)
        smape_path = write_smape_by_year_csv(report, cfg.output_dir / SMAPE_FILE)
        written.append(smape_path)
        changepoints_path = None
        if cps is not None:
            changepoints_path = write_changepoints(cfg.output_dir / CHANGEPOINTS_FILE, cps)
            written.append(changepoints_path)
        config_path = cfg.output_dir / CONFIG_FILE
        config_path.write_text(render_config(cfg), encoding="utf-8")
        written.append(config_path)
    except Exception:
        for path in written:
            path.unlink(missing_ok=True)
        raise

    return RunResult(
        label=cfg.label,
        output_dir=cfg.output_dir,
        records_path=records_path,
        report_path=report_path,
        config_path=config_path,
        changepoints_path=changepoints_path,
        report=report,
        changepoints=cps,
    )


def _collection_usage(records) -> dict[str, int]:
    usage: dict[str, int] = {}
    for record in records:
        for index in record.trace["collections"]:
            key = str(index)
            usage[key] = usage.get(key, 0) + 1
    return usage


def _records_path(path: str | Path) -> Path:
    path = Path(path)
    if path.is_dir():
        return path / RECORDS_FILE
    if path.name == REPORT_FILE or path.suffix == ".json":
        return path.with_name(RECORDS_FILE)
    return path


def _load_losses(path: Path) -> tuple[str, dict[str, float]]:
    """Per-origin mean squared loss of included records, keyed by origin."""
    if not path.exists():
        raise DataError(f"records file not found: {path}")
    sums: dict[str, float] = {}
    counts: dict[str, int] = {}
    label = ""
    with path.open(newline="", encoding="utf-8") as handle:
        for row in csv.DictReader(handle):
            if row["included"] != "1":
                continue
            origin = row["origin"]
            err = float(row["actual"]) - float(row["predicted"])
            sums[origin] = sums.get(origin, 0.0) + err * err
            counts[origin] = counts.get(origin, 0) + 1
            label = row["schema"]
    return label, {origin: sums[origin] / counts[origin] for origin in sums}


def compare(path_a: str | Path, path_b: str | Path, h: int = 1) -> dict:
    """Pairwise Diebold-Mariano comparison of two finished runs.

    Accepts run directories, report paths or records paths; the runs must
    share the exact same included forecast origins.
    """
    label_a, losses_a = _load_losses(_records_path(path_a))
    label_b, losses_b = _load_losses(_records_path(path_b))
    if list(losses_a) != list(losses_b):
        only_a = next(iter(set(losses_a) - set(losses_b)), None)
        only_b = next(iter(set(losses_b) - set(losses_a)), None)
        raise AlignmentError(
            f"runs do not share forecast origins (e.g. {only_a or only_b})"
        )
    a = np.asarray(list(losses_a.values()))
    b = np.asarray(list(losses_b.values()))
    statistic, p_value = diebold_mariano(a, b, h=h)
    return {
        "a": str(path_a),
        "b": str(path_b),
        "label_a": label_a,
        "label_b": label_b,
        "h": h,
        "n_origins": int(len(a)),
        "statistic": statistic,
        "p_value": p_value,
    }
