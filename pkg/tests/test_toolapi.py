"""Tool request handling: schemas, fallback policy, determinism."""

import json

import pytest

from gsdkit.estimator import EstimatorConfig
from gsdkit.ingest import write_detection_json
from gsdkit.toolapi import (
    FALLBACK_THRESHOLD,
    ToolError,
    _recommended_action,
    handle_area,
    handle_estimate,
    response_json,
)

from test_estimator import detection_set

L_REF = 5.045


def inline_request(sides, confs=None, **extra):
    ds = detection_set(sides, confs)
    doc = json.loads(write_detection_json(ds))
    request = {"detections": doc}
    request.update(extra)
    return request


class TestHandleEstimate:
    def test_uniform_scene_trusted(self):
        response = handle_estimate(inline_request([50.45] * 30), L_REF)
        assert response["gsd_pred"] == pytest.approx(0.1, rel=1e-12)
        assert response["recommended_action"] == "trust"
        assert response["path"] == "kde"
        assert response["diagnostics"]["n_filtered"] == 30

    def test_zero_detections_fallback(self):
        response = handle_estimate(inline_request([]), L_REF)
        assert response["gsd_pred"] is None
        assert response["confidence"] == 0.0
        assert response["recommended_action"] == "fallback"
        assert response["path"] == "no_detections"

    def test_guard_forces_fallback(self):
        sides = [12.0 + 0.01 * i for i in range(20)]
        response = handle_estimate(inline_request(sides), L_REF)
        assert response["guard_triggered"]
        assert response["confidence"] <= 0.3
        assert response["recommended_action"] == "fallback"

    def test_identical_requests_identical_responses(self):
        request = inline_request([45.0 + 0.3 * i for i in range(25)])
        a = response_json(handle_estimate(request, L_REF))
        b = response_json(handle_estimate(request, L_REF))
        assert a == b

    def test_config_override(self):
        sides = [50.0] * 10 + [200.0, 210.0]
        with_filter = handle_estimate(inline_request(sides), L_REF)
        without = handle_estimate(
            inline_request(sides, **{"config": {"alpha": None}}), L_REF)
        assert with_filter["diagnostics"]["n_filtered"] == 10
        assert without["diagnostics"]["n_filtered"] == 12

    def test_exactly_one_source_required(self):
        with pytest.raises(ToolError) as err:
            handle_estimate({}, L_REF)
        assert err.value.code == "schema_violation"
        with pytest.raises(ToolError):
            handle_estimate({"detections": {}, "detections_path": "x.json"},
                            L_REF)

    def test_unknown_request_key(self):
        with pytest.raises(ToolError) as err:
            handle_estimate(inline_request([50.0], bogus=1), L_REF)
        assert err.value.field == "bogus"

    def test_unknown_config_key(self):
        with pytest.raises(ToolError) as err:
            handle_estimate(inline_request([50.0], config={"nope": 1}), L_REF)
        assert err.value.field == "config.nope"

    def test_bad_config_value(self):
        with pytest.raises(ToolError) as err:
            handle_estimate(inline_request([50.0], config={"min_conf": 2.0}),
                            L_REF)
        assert err.value.code == "schema_violation"

    def test_schema_error_names_conf(self):
        request = inline_request([50.0])
        request["detections"]["detections"][0]["conf"] = 1.3
        with pytest.raises(ToolError) as err:
            handle_estimate(request, L_REF)
        assert err.value.code == "schema_violation"
        assert "conf" in err.value.field

    def test_detections_path(self, tmp_path):
        ds = detection_set([50.45] * 10)
        path = tmp_path / "d.json"
        path.write_text(write_detection_json(ds), encoding="utf-8")
        response = handle_estimate({"detections_path": str(path)}, L_REF)
        assert response["gsd_pred"] == pytest.approx(0.1, rel=1e-9)

    def test_missing_file_is_io_error(self, tmp_path):
        with pytest.raises(ToolError) as err:
            handle_estimate({"detections_path": str(tmp_path / "nope.json")},
                            L_REF)
        assert err.value.code == "io_error"

    def test_base_config_respected(self):
        base = EstimatorConfig(l_ref=L_REF, min_conf=0.5)
        response = handle_estimate(inline_request([50.0] * 6, [0.4] * 6),
                                   L_REF, base)
        assert response["path"] == "no_detections"


class TestRecommendedAction:
    def test_boundary_half_is_trust(self):
        # The fallback policy is a strict less-than at 0.5.
        assert FALLBACK_THRESHOLD == 0.5
        assert _recommended_action(0.5) == "trust"
        assert _recommended_action(0.4999999) == "fallback"
        assert _recommended_action(0.0) == "fallback"
        assert _recommended_action(1.0) == "trust"


class TestHandleArea:
    def test_explicit_gsd(self):
        response = handle_area({"pixel_count": 10_000, "gsd": 0.1}, L_REF)
        assert response["area_m2"] == pytest.approx(100.0, rel=1e-12)
        assert response["gsd_used"] == 0.1
        assert response["recommended_action"] == "trust"

    def test_from_detections(self):
        request = inline_request([50.45] * 30)
        request["pixel_count"] = 172_000
        response = handle_area(request, L_REF)
        assert response["gsd_used"] == pytest.approx(0.1, rel=1e-9)
        assert response["area_m2"] == pytest.approx(1720.0, rel=1e-6)
        assert response["confidence"] > 0.5

    def test_no_detections_means_no_area(self):
        request = inline_request([])
        request["pixel_count"] = 5000
        response = handle_area(request, L_REF)
        assert response["area_m2"] is None
        assert response["recommended_action"] == "fallback"

    def test_pixel_count_validation(self):
        with pytest.raises(ToolError) as err:
            handle_area({"pixel_count": -1, "gsd": 0.1}, L_REF)
        assert err.value.field == "pixel_count"
        with pytest.raises(ToolError):
            handle_area({"pixel_count": 1.5, "gsd": 0.1}, L_REF)

    def test_gsd_validation(self):
        with pytest.raises(ToolError) as err:
            handle_area({"pixel_count": 10, "gsd": -0.1}, L_REF)
        assert err.value.field == "gsd"

    def test_exactly_one_gsd_source(self):
        with pytest.raises(ToolError):
            handle_area({"pixel_count": 10}, L_REF)
        bad = inline_request([50.0])
        bad.update({"pixel_count": 10, "gsd": 0.1})
        with pytest.raises(ToolError):
            handle_area(bad, L_REF)


def test_response_serialises_canonically():
    response = handle_estimate(inline_request([50.45] * 30), L_REF)
    text = response_json(response)
    assert text.endswith("\n")
    assert response_json(json.loads(text)) == text
