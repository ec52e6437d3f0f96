import json
import time

import pytest
from fastapi.testclient import TestClient

from degenflow.main import app
from degenflow.models import JobStatus

CROCCO = json.dumps({"kind": "crocco_demo", "crocco": {"profile": "linear", "samples": 200}}).encode()


@pytest.fixture
def client(isolated_dirs):
    with TestClient(app) as test_client:
        yield test_client


def _submit(client, content=CROCCO, filename="experiment.json", **data):
    return client.post(
        "/api/v1/experiments",
        files={"config": (filename, content, "application/json")},
        data=data,
    )


def _wait(client, job_id, timeout=30.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        status = client.get(f"/api/v1/status/{job_id}").json()
        if status["status"] in (JobStatus.DONE.value, JobStatus.ERROR.value):
            return status
        time.sleep(0.05)
    raise AssertionError(f"job {job_id} did not finish within {timeout}s")


class TestService:
    def test_health(self, client):
        response = client.get("/health")
        assert response.status_code == 200
        assert response.json()["status"] == "healthy"

    def test_crocco_job_lifecycle(self, client, isolated_dirs):
        uploads, results = isolated_dirs
        response = _submit(client)
        assert response.status_code == 200
        job_id = response.json()["job_id"]

        status = _wait(client, job_id)
        assert status["status"] == "done"
        assert status["progress"] == 100
        assert status["kind"] == "crocco_demo"
        assert status["passed"] is True
        assert status["exit_status"] == 0

        manifest = client.get(f"/api/v1/result/{job_id}").json()
        assert manifest["verdicts"] == {"crocco": True}
        assert "crocco_report.json" in manifest["files"]
        assert (results / job_id / "manifest.json").exists()

        report = client.get(f"/api/v1/result/{job_id}/files/crocco_report.json")
        assert report.status_code == 200
        assert report.json()["profile"] == "linear"
        assert client.get(f"/api/v1/result/{job_id}/files/secrets.txt").status_code == 404

        assert client.delete(f"/api/v1/job/{job_id}").status_code == 200
        assert client.get(f"/api/v1/status/{job_id}").status_code == 404
        assert not (results / job_id).exists()
        assert list(uploads.iterdir()) == []

    def test_kind_and_overrides_form_fields(self, client):
        content = json.dumps({"kind": "solve"}).encode()
        response = _submit(client, content, kind="crocco_demo", overrides='["crocco.profile=exponential"]')
        assert response.status_code == 200
        job_id = response.json()["job_id"]
        _wait(client, job_id)
        report = client.get(f"/api/v1/result/{job_id}/files/crocco_report.json").json()
        assert report["profile"] == "exponential"

    def test_failing_run_reports_error(self, client):
        content = json.dumps({
            "kind": "solve",
            "domain": {"kind": "unit_cube", "dimension": 1},
            "counts": [33],
            "solver": {"dt": 0.1},
        }).encode()
        job_id = _submit(client, content).json()["job_id"]
        status = _wait(client, job_id)
        assert status["status"] == "error"
        assert status["exit_status"] == 2
        error = client.get(f"/api/v1/result/{job_id}/files/error.json").json()
        assert error["error_code"] == "step_rejected"

    def test_unknown_job(self, client):
        assert client.get("/api/v1/status/missing").status_code == 404
        assert client.get("/api/v1/result/missing").status_code == 404
        assert client.delete("/api/v1/job/missing").status_code == 404


class TestUploadValidation:
    def test_wrong_extension(self, client):
        response = _submit(client, filename="experiment.txt")
        assert response.status_code == 400
        assert "Invalid file type" in response.json()["detail"]

    def test_invalid_json(self, client):
        response = _submit(client, content=b'{"kind": "crocco_demo",\n')
        assert response.status_code == 400
        assert response.json()["detail"]["error_code"] == "config_syntax"

    def test_schema_violation(self, client):
        response = _submit(client, content=json.dumps({"kind": "stability_pair"}).encode())
        assert response.status_code == 400
        detail = response.json()["detail"]
        assert detail["error_code"] == "config_validation"
        assert detail["context"]["field"] == "domain"

    def test_malformed_overrides(self, client):
        response = _submit(client, overrides="[not json")
        assert response.status_code == 400
