from __future__ import annotations

import pytest
from fastapi.testclient import TestClient

from driftcast.service import app

from conftest import regime_csv, run_config_ini

DETECTOR = {
    "penalty": "20000",
    "min_segment_hours": 168,
    "subsample_hours": 24,
    "reference_start": "2013-01-01",
    "reference_end": "2014-01-01",
}


@pytest.fixture(scope="module")
def client():
    return TestClient(app)


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    base = tmp_path_factory.mktemp("svc")
    return base, regime_csv(base / "series.csv")


class TestHealth:
    def test_health(self, client):
        response = client.get("/health")
        assert response.status_code == 200
        assert response.json()["status"] == "ok"


class TestValidate:
    def test_valid_config_echoes_resolved_values(self, client, workspace):
        base, csv_path = workspace
        response = client.post(
            "/validate",
            json={"config_text": run_config_ini(csv_path, base / "out")},
        )
        assert response.status_code == 200
        body = response.json()
        assert body["valid"] is True
        assert "grace_period = 7" in body["resolved"]

    def test_invalid_config_maps_to_422(self, client):
        response = client.post("/validate", json={"config_text": "[input]\npath = x\n"})
        assert response.status_code == 422
        assert response.json()["detail"]["error_kind"] == "validation"

    def test_both_config_sources_rejected(self, client, workspace):
        base, csv_path = workspace
        text = run_config_ini(csv_path, base / "out")
        response = client.post(
            "/validate", json={"config_text": text, "config_path": "x.ini"}
        )
        assert response.status_code == 422

    def test_config_path_variant(self, client, workspace, tmp_path):
        base, csv_path = workspace
        path = tmp_path / "run.ini"
        path.write_text(run_config_ini(csv_path, base / "out"), encoding="utf-8")
        response = client.post("/validate", json={"config_path": str(path)})
        assert response.status_code == 200


class TestRunEndpoint:
    def test_run_returns_metrics_and_paths(self, client, workspace):
        base, csv_path = workspace
        response = client.post(
            "/runs",
            json={"config_text": run_config_ini(csv_path, base / "run-out")},
        )
        assert response.status_code == 200
        body = response.json()
        assert body["label"] == "smca"
        assert body["overall"]["smape"] > 0
        assert body["changepoints"] is None
        assert (base / "run-out" / "records.csv").exists()

    def test_output_dir_override(self, client, workspace):
        base, csv_path = workspace
        response = client.post(
            "/runs",
            json={
                "config_text": run_config_ini(csv_path, base / "ignored"),
                "output_dir": str(base / "override-out"),
            },
        )
        assert response.status_code == 200
        assert (base / "override-out" / "report.json").exists()

    def test_missing_input_maps_to_400(self, client, tmp_path):
        response = client.post(
            "/runs",
            json={"config_text": run_config_ini(tmp_path / "absent.csv", tmp_path / "out")},
        )
        assert response.status_code == 400
        assert response.json()["detail"]["error_kind"] == "data"


class TestDetectEndpoint:
    def test_detect_returns_positions(self, client, workspace):
        base, csv_path = workspace
        response = client.post(
            "/detect",
            json={
                "config_text": run_config_ini(
                    csv_path, base / "detect-out", kind="pcpdmc", detector=DETECTOR
                )
            },
        )
        assert response.status_code == 200
        body = response.json()
        assert body["positions"] == [100, 250]
        assert body["segments"] == 3


class TestCompareEndpoint:
    def test_compare_two_runs(self, client, workspace):
        base, csv_path = workspace
        for name in ("cmp-a", "cmp-b"):
            response = client.post(
                "/runs",
                json={"config_text": run_config_ini(csv_path, base / name, label=name)},
            )
            assert response.status_code == 200
        response = client.post(
            "/compare",
            json={"path_a": str(base / "cmp-a"), "path_b": str(base / "cmp-b"), "h": 1},
        )
        assert response.status_code == 200
        body = response.json()
        assert body["statistic"] == 0.0  # deterministic engine, identical runs
        assert body["p_value"] == 1.0

    def test_alignment_error_maps_to_400(self, client, workspace, tmp_path):
        base, csv_path = workspace
        short_csv = regime_csv(tmp_path / "short.csv", years=1)
        response = client.post(
            "/runs",
            json={"config_text": run_config_ini(short_csv, tmp_path / "short-out")},
        )
        assert response.status_code == 200
        response = client.post(
            "/compare",
            json={"path_a": str(base / "cmp-a"), "path_b": str(tmp_path / "short-out")},
        )
        assert response.status_code == 400
        assert response.json()["detail"]["error_kind"] == "data"
