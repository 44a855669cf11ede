"""HTTP facade over the engine: runs, detection, validation, comparisons."""

from __future__ import annotations

import functools
from pathlib import Path

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from driftcast import __version__
from driftcast.errors import ConfigError, DataError, DriftcastError
from driftcast.pipeline import compare as compare_runs
from driftcast.pipeline import detect as detect_changepoints
from driftcast.pipeline import run as run_experiment
from driftcast.runconfig import RunConfig, parse_config, parse_config_text, render_config


class RunRequest(BaseModel):
    config_path: str | None = None
    config_text: str | None = None
    output_dir: str | None = None


class OverallMetrics(BaseModel):
    mae: float
    mse: float
    smape: float
    n_origins: int
    n_pairs: int


class RunResponse(BaseModel):
    label: str
    output_dir: str
    records_path: str
    report_path: str
    config_path: str
    changepoints_path: str | None
    changepoints: list[int] | None
    overall: OverallMetrics


class DetectResponse(BaseModel):
    positions: list[int]
    segments: int
    artifact_path: str


class CompareRequest(BaseModel):
    path_a: str
    path_b: str
    h: int = 1


class CompareResponse(BaseModel):
    a: str
    b: str
    label_a: str
    label_b: str
    h: int
    n_origins: int
    statistic: float
    p_value: float


class ValidateResponse(BaseModel):
    valid: bool
    resolved: str


class HealthResponse(BaseModel):
    status: str
    version: str


app = FastAPI(
    title="driftcast",
    version=__version__,
    description="Continual multistep forecasting with change-point-routed model collections",
)


def _error_payload(kind: str, message: str) -> dict:
    return {"error_kind": kind, "message": message}


def _mapped_errors(endpoint):
    @functools.wraps(endpoint)
    def wrapper(*args, **kwargs):
        try:
            return endpoint(*args, **kwargs)
        except ConfigError as exc:
            raise HTTPException(422, detail=_error_payload("validation", str(exc))) from exc
        except DataError as exc:
            raise HTTPException(400, detail=_error_payload("data", str(exc))) from exc
        except DriftcastError as exc:
            raise HTTPException(500, detail=_error_payload("runtime", str(exc))) from exc

    return wrapper


def _load_config(request: RunRequest) -> RunConfig:
    if (request.config_path is None) == (request.config_text is None):
        raise ConfigError("provide exactly one of config_path or config_text")
    if request.config_path is not None:
        cfg = parse_config(request.config_path)
    else:
        cfg = parse_config_text(request.config_text)
    if request.output_dir is not None:
        cfg = RunConfig(**{**cfg.__dict__, "output_dir": Path(request.output_dir)})
    return cfg


@app.get("/health", response_model=HealthResponse)
def health() -> HealthResponse:
    return HealthResponse(status="ok", version=__version__)


@app.post("/validate", response_model=ValidateResponse)
@_mapped_errors
def validate(request: RunRequest) -> ValidateResponse:
    cfg = _load_config(request)
    return ValidateResponse(valid=True, resolved=render_config(cfg))


@app.post("/detect", response_model=DetectResponse)
@_mapped_errors
def detect(request: RunRequest) -> DetectResponse:
    cfg = _load_config(request)
    cps, artifact = detect_changepoints(cfg)
    return DetectResponse(
        positions=list(cps.positions), segments=cps.k, artifact_path=str(artifact)
    )


@app.post("/runs", response_model=RunResponse)
@_mapped_errors
def run(request: RunRequest) -> RunResponse:
    cfg = _load_config(request)
    result = run_experiment(cfg)
    return RunResponse(
        label=result.label,
        output_dir=str(result.output_dir),
        records_path=str(result.records_path),
        report_path=str(result.report_path),
        config_path=str(result.config_path),
        changepoints_path=(
            str(result.changepoints_path) if result.changepoints_path is not None else None
        ),
        changepoints=(
            list(result.changepoints.positions) if result.changepoints is not None else None
        ),
        overall=OverallMetrics(**result.report.overall),
    )


@app.post("/compare", response_model=CompareResponse)
@_mapped_errors
def compare(request: CompareRequest) -> CompareResponse:
    return CompareResponse(**compare_runs(request.path_a, request.path_b, h=request.h))
