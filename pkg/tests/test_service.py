"""HTTP contract: status mapping, error bodies, concurrency via the dataset lock."""

from __future__ import annotations

import json
import threading
import time
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from bidsbuilder._version import __version__
from bidsbuilder.convert import ConverterHandle
from bidsbuilder.service import ServiceConfig, create_app
from conftest import SIDECARS, reference_request_document, make_session


@pytest.fixture
def client(fixtures_root) -> TestClient:
    config = ServiceConfig(converter=ConverterHandle.mock(fixtures_root))
    return TestClient(create_app(config))


def request_body(scans: dict, output: Path, **extra) -> bytes:
    document = {"scans": scans, "output": str(output), **extra}
    return json.dumps(document).encode("utf-8")


class TestHealth:
    def test_health(self, client):
        response = client.get("/health")
        assert response.status_code == 200
        assert response.json() == {"status": "ok", "version": __version__}


class TestCreateEndpoint:
    def test_reference_document_returns_201(self, client, reference_fixtures, tmp_path):
        output = tmp_path / "dataset"
        response = client.post(
            "/createBids", content=reference_request_document(output)
        )
        assert response.status_code == 201
        report = response.json()
        assert report["status"] == "created"
        assert report["timing"]["converter_s"] <= report["timing"]["total_s"]
        assert report["subjects"] == 1 and report["sessions"] == 2

    def test_empty_body_is_400_missing_key(self, client):
        response = client.post("/createBids", content=b"{}")
        assert response.status_code == 400
        assert response.json()["error_code"] == "MissingKey"

    def test_malformed_json_is_400(self, client):
        response = client.post("/createBids", content=b"{nope")
        assert response.status_code == 400
        assert response.json()["error_code"] == "MalformedJson"

    def test_unknown_key_is_400(self, client, tmp_path):
        body = request_body({"01": {"01": "/d/s1"}}, tmp_path / "ds", outpt="x")
        response = client.post("/createBids", content=body)
        assert response.status_code == 400
        assert response.json()["error_code"] == "UnknownKey"

    def test_illegal_override_is_400(self, client, tmp_path):
        document = json.loads(reference_request_document(tmp_path / "ds"))
        document["metadata"]["modalities"][0]["type"] = "bold"
        response = client.post("/createBids", content=json.dumps(document).encode())
        assert response.status_code == 400
        assert response.json()["error_code"] == "IllegalOverride"

    def test_unclassifiable_series_is_422_with_names(self, client, fixtures_root, tmp_path):
        make_session(fixtures_root, "/d/odd", {"mystery": {"sidecar": SIDECARS["rm"]}})
        response = client.post(
            "/createBids", content=request_body({"01": {"01": "/d/odd"}}, tmp_path / "ds")
        )
        assert response.status_code == 422
        body = response.json()
        assert body["error_code"] == "ClassificationFailed"
        assert body["failed_series"] == [
            {"series_name": "mystery", "reason": "research mode"}
        ]

    def test_output_not_empty_is_409(self, client, fixtures_root, tmp_path):
        make_session(fixtures_root, "/d/s1", {"a": {"sidecar": SIDECARS["t2"]}})
        output = tmp_path / "ds"
        output.mkdir()
        (output / "occupied").write_text("x")
        response = client.post("/createBids", content=request_body({"01": {"01": "/d/s1"}}, output))
        assert response.status_code == 409
        assert response.json()["error_code"] == "OutputNotEmpty"

    def test_converter_failure_is_500(self, client, fixtures_root, tmp_path):
        make_session(fixtures_root, "/d/bad", {"a": {"fail": "scanner ate it"}})
        response = client.post(
            "/createBids", content=request_body({"01": {"01": "/d/bad"}}, tmp_path / "ds")
        )
        assert response.status_code == 500
        assert response.json()["error_code"] == "ConverterFailed"

    def test_oversize_body_is_400(self, fixtures_root, tmp_path):
        config = ServiceConfig(
            converter=ConverterHandle.mock(fixtures_root), max_body_bytes=64
        )
        client = TestClient(create_app(config))
        body = request_body({"01": {"01": "/d/s1" + "x" * 200}}, tmp_path / "ds")
        response = client.post("/createBids", content=body)
        assert response.status_code == 400
        assert response.json()["error_code"] == "BodyTooLarge"


class TestUpdateEndpoint:
    def test_update_after_create_returns_200(self, client, fixtures_root, tmp_path):
        make_session(fixtures_root, "/d/s1", {"a": {"sidecar": SIDECARS["t2"]}})
        make_session(fixtures_root, "/d/s2", {"b": {"sidecar": SIDECARS["t1ir"]}})
        output = tmp_path / "ds"
        assert (
            client.post(
                "/createBids", content=request_body({"01": {"01": "/d/s1"}}, output)
            ).status_code
            == 201
        )
        response = client.post(
            "/updateBids", content=request_body({"02": {"01": "/d/s2"}}, output)
        )
        assert response.status_code == 200
        assert response.json()["status"] == "updated"

    def test_update_without_state_is_404(self, client, fixtures_root, tmp_path):
        make_session(fixtures_root, "/d/s1", {"a": {"sidecar": SIDECARS["t2"]}})
        bare = tmp_path / "bare"
        bare.mkdir()
        response = client.post("/updateBids", content=request_body({"01": {"01": "/d/s1"}}, bare))
        assert response.status_code == 404
        assert response.json()["error_code"] == "StateFileMissing"

    def test_session_conflict_is_409(self, client, fixtures_root, tmp_path):
        make_session(fixtures_root, "/d/s1", {"a": {"sidecar": SIDECARS["t2"]}})
        output = tmp_path / "ds"
        client.post("/createBids", content=request_body({"01": {"01": "/d/s1"}}, output))
        response = client.post(
            "/updateBids", content=request_body({"01": {"01": "/d/s1"}}, output)
        )
        assert response.status_code == 409
        assert response.json()["error_code"] == "SessionConflict"


class TestConcurrency:
    def test_second_mutation_is_busy_and_health_stays_up(self, fixtures_root, tmp_path):
        make_session(
            fixtures_root, "/d/slow", {"a": {"sidecar": SIDECARS["t2"], "sleep_s": 0.8}}
        )
        make_session(fixtures_root, "/d/fast", {"b": {"sidecar": SIDECARS["t2"]}})
        app = create_app(ServiceConfig(converter=ConverterHandle.mock(fixtures_root)))
        output = tmp_path / "ds"
        results: dict[str, object] = {}

        with TestClient(app) as first_client, TestClient(app) as second_client:
            def slow_create():
                results["first"] = first_client.post(
                    "/createBids", content=request_body({"01": {"01": "/d/slow"}}, output)
                )

            worker = threading.Thread(target=slow_create)
            worker.start()
            # Wait until the first request holds the dataset lock.
            lock_path = output / ".bidstoolbox.lock"
            deadline = time.monotonic() + 5.0
            while not lock_path.exists() and time.monotonic() < deadline:
                time.sleep(0.01)
            assert lock_path.exists(), "first request never acquired the lock"
            second = second_client.post(
                "/createBids", content=request_body({"01": {"02": "/d/fast"}}, output)
            )
            health = second_client.get("/health")
            worker.join()

        assert second.status_code == 409
        assert second.json()["error_code"] == "Busy"
        assert health.status_code == 200
        assert results["first"].status_code == 201
