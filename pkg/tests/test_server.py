"""HTTP tool service: routes, error schema, concurrency determinism."""

import json
import threading
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor

import pytest

from gsdkit.ingest import write_detection_json
from gsdkit.server import make_server

from test_estimator import detection_set


@pytest.fixture(scope="module")
def server_url():
    server = make_server("127.0.0.1", 0, {"l_ref": 5.045, "n_instances": 42},
                         version="test", log_requests=False)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    host, port = server.server_address[:2]
    yield f"http://{host}:{port}"
    server.shutdown()
    server.server_close()
    thread.join(timeout=5)


def post(url, payload, raw=None):
    body = raw if raw is not None else json.dumps(payload).encode()
    request = urllib.request.Request(url, data=body,
                                     headers={"Content-Type": "application/json"})
    try:
        with urllib.request.urlopen(request, timeout=10) as resp:
            return resp.status, resp.read()
    except urllib.error.HTTPError as err:
        return err.code, err.read()


def estimate_payload(sides):
    ds = detection_set(sides)
    return {"detections": json.loads(write_detection_json(ds))}


class TestRoutes:
    def test_health(self, server_url):
        with urllib.request.urlopen(server_url + "/v1/health", timeout=10) as resp:
            doc = json.loads(resp.read())
        assert doc["status"] == "ok"
        assert doc["l_ref"] == 5.045
        assert doc["n_instances"] == 42
        assert doc["version"] == "test"

    def test_estimate_ok(self, server_url):
        status, body = post(server_url + "/v1/estimate",
                            estimate_payload([50.45] * 30))
        assert status == 200
        doc = json.loads(body)
        assert doc["gsd_pred"] == pytest.approx(0.1, rel=1e-9)
        assert doc["recommended_action"] == "trust"

    def test_zero_detections(self, server_url):
        status, body = post(server_url + "/v1/estimate", estimate_payload([]))
        assert status == 200
        doc = json.loads(body)
        assert doc["gsd_pred"] is None
        assert doc["confidence"] == 0.0
        assert doc["recommended_action"] == "fallback"

    def test_area_ok(self, server_url):
        status, body = post(server_url + "/v1/area",
                            {"pixel_count": 10000, "gsd": 0.1})
        assert status == 200
        assert json.loads(body)["area_m2"] == pytest.approx(100.0, rel=1e-9)

    def test_unknown_route_404(self, server_url):
        status, body = post(server_url + "/v1/nope", {})
        assert status == 404
        assert json.loads(body)["error"]["code"] == "not_found"

    def test_get_unknown_route_404(self, server_url):
        try:
            with urllib.request.urlopen(server_url + "/v1/bogus", timeout=10) as resp:
                status = resp.status
        except urllib.error.HTTPError as err:
            status = err.code
        assert status == 404


class TestErrorSchema:
    def test_bad_confidence_names_field(self, server_url):
        payload = estimate_payload([50.0])
        payload["detections"]["detections"][0]["conf"] = 1.3
        status, body = post(server_url + "/v1/estimate", payload)
        assert status == 400
        error = json.loads(body)["error"]
        assert error["code"] == "schema_violation"
        assert "conf" in error["field"]

    def test_invalid_json_body(self, server_url):
        status, body = post(server_url + "/v1/estimate", None, raw=b"{nope")
        assert status == 400
        assert json.loads(body)["error"]["code"] == "schema_violation"

    def test_empty_body(self, server_url):
        status, body = post(server_url + "/v1/estimate", None, raw=b"")
        assert status == 400

    def test_unknown_field(self, server_url):
        status, body = post(server_url + "/v1/estimate",
                            {"detections": {}, "surprise": 1})
        assert status == 400
        assert json.loads(body)["error"]["field"] == "surprise"


class TestConcurrency:
    def test_concurrent_identical_requests(self, server_url):
        payload = estimate_payload([45.0 + 0.3 * i for i in range(25)])
        body = json.dumps(payload).encode()

        def call(_):
            return post(server_url + "/v1/estimate", None, raw=body)

        with ThreadPoolExecutor(max_workers=16) as pool:
            results = list(pool.map(call, range(40)))
        statuses = {status for status, _ in results}
        bodies = {payload for _, payload in results}
        assert statuses == {200}
        assert len(bodies) == 1

    def test_interleaved_requests_stay_independent(self, server_url):
        small = json.dumps(estimate_payload([50.45] * 30)).encode()
        guard = json.dumps(estimate_payload([12.0] * 30)).encode()

        def call(i):
            raw = small if i % 2 == 0 else guard
            return i, post(server_url + "/v1/estimate", None, raw=raw)[1]

        with ThreadPoolExecutor(max_workers=8) as pool:
            results = dict(pool.map(call, range(20)))
        small_bodies = {results[i] for i in range(0, 20, 2)}
        guard_bodies = {results[i] for i in range(1, 20, 2)}
        assert len(small_bodies) == 1
        assert len(guard_bodies) == 1
        assert json.loads(small_bodies.pop())["recommended_action"] == "trust"
        assert json.loads(guard_bodies.pop())["recommended_action"] == "fallback"
