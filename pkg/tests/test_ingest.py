"""Parsers, the canonical JSON interchange, and tile planning."""

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gsdkit.geometry import longer_side
from gsdkit.ingest import (
    DetectionSchemaError,
    DetectionSet,
    canonical_dumps,
    parse_dota_annotation,
    parse_gsd_meta,
    read_detection_json,
    tile_plan,
    write_detection_json,
)

from conftest import make_detection

DOTA_LINE = "0 0 40 0 40 18 0 18 small-vehicle 0"


class TestParseDota:
    def test_single_vehicle(self):
        result = parse_dota_annotation(DOTA_LINE, "small-vehicle")
        assert len(result.detections) == 1
        assert result.source == "ground_truth"
        assert result.detections[0].confidence == 1.0
        assert longer_side(result.detections[0].polygon) == 40.0

    def test_category_filter_excludes(self):
        line = "0 0 40 0 40 18 0 18 plane 0"
        result = parse_dota_annotation(line, "small-vehicle")
        assert result.detections == []
        assert result.n_skipped == 0

    def test_malformed_line_counted(self):
        text = "\n".join([
            "imagesource:GoogleEarth",
            "gsd:0.12",
            DOTA_LINE,
            "10 10 50 10 50 28 10 28 small-vehicle 0",
            "20 20 60 20 60 38 20 38 small-vehicle 1",
            "not a valid line",
        ])
        result = parse_dota_annotation(text, "small-vehicle")
        assert len(result.detections) == 3
        assert result.n_skipped == 1

    def test_missing_difficulty_still_rejected_short_line(self):
        # 8 coords + category (9 tokens) parses; fewer tokens is a skip.
        ok = "0 0 40 0 40 18 0 18 small-vehicle"
        bad = "0 0 40 0 40 18 0 18"
        result = parse_dota_annotation(ok + "\n" + bad, "small-vehicle")
        assert len(result.detections) == 1
        assert result.n_skipped == 1

    def test_degenerate_polygon_skipped(self):
        line = "0 0 40 0 80 0 20 0 small-vehicle 0"
        result = parse_dota_annotation(line, "small-vehicle")
        assert result.detections == []
        assert result.n_skipped == 1

    def test_non_convex_polygon_skipped(self):
        line = "0 0 2 2 2 0 0 2 small-vehicle 0"
        result = parse_dota_annotation(line, "small-vehicle")
        assert result.detections == []
        assert result.n_skipped == 1

    def test_empty_document_is_empty_set(self):
        result = parse_dota_annotation("", "small-vehicle")
        assert result.detections == []
        assert result.width > 0 and result.height > 0

    def test_explicit_dimensions_and_margin(self):
        # Box far outside a 100x100 image is dropped and counted.
        far = "500 500 540 500 540 518 500 518 small-vehicle 0"
        text = DOTA_LINE + "\n" + far
        result = parse_dota_annotation(text, "small-vehicle",
                                       image_width=100, image_height=100)
        assert len(result.detections) == 1
        assert result.n_skipped == 1

    def test_all_difficulties_ingested(self):
        text = "\n".join(
            f"0 {20 * i} 40 {20 * i} 40 {20 * i + 18} 0 {20 * i + 18} small-vehicle {d}"
            for i, d in enumerate((0, 1, 2)))
        result = parse_dota_annotation(text, "small-vehicle")
        assert len(result.detections) == 3


class TestParseGsdMeta:
    def test_value(self):
        assert parse_gsd_meta("gsd:0.146").gsd_gt == 0.146

    def test_null(self):
        assert parse_gsd_meta("gsd:null").gsd_gt is None

    def test_absent(self):
        assert parse_gsd_meta("imagesource:GoogleEarth\n").gsd_gt is None

    def test_first_line_wins(self):
        assert parse_gsd_meta("gsd:0.2\ngsd:0.9").gsd_gt == 0.2

    def test_unparseable_value_is_absent(self):
        assert parse_gsd_meta("gsd:abc").gsd_gt is None

    def test_non_positive_is_absent(self):
        assert parse_gsd_meta("gsd:0").gsd_gt is None
        assert parse_gsd_meta("gsd:-0.2").gsd_gt is None

    def test_full_dota_header(self):
        text = "imagesource:GoogleEarth\ngsd:0.146\n" + DOTA_LINE
        meta = parse_gsd_meta(text, image_id="P0001")
        assert meta.image_id == "P0001"
        assert meta.gsd_gt == 0.146


def _sample_set(n=50, seed=5, source="detector"):
    rng = np.random.default_rng(seed)
    dets = [
        make_detection(cx=rng.uniform(50, 950), cy=rng.uniform(50, 950),
                       long_px=rng.uniform(8, 60), short_px=rng.uniform(3, 7),
                       theta=rng.uniform(0, math.pi),
                       conf=1.0 if source == "ground_truth"
                       else round(float(rng.uniform(0.1, 1.0)), 3))
        for _ in range(n)
    ]
    return DetectionSet(image_id="img-1", width=1000, height=1000,
                        detections=dets, source=source)


class TestDetectionJson:
    def test_minimal_document(self):
        doc = {"image_id": "a", "width": 100, "height": 100,
               "source": "detector",
               "detections": [{"poly": [[0, 0], [40, 0], [40, 18], [0, 18]],
                               "conf": 0.5, "label": "small-vehicle"}]}
        ds = read_detection_json(doc)
        assert len(ds.detections) == 1
        assert ds.detections[0].confidence == 0.5

    def test_round_trip_is_byte_identical(self):
        ds = _sample_set()
        once = write_detection_json(ds)
        twice = write_detection_json(read_detection_json(once))
        assert once == twice

    def test_round_trip_values_at_nine_digits(self):
        ds = _sample_set(n=5)
        back = read_detection_json(write_detection_json(ds))
        for a, b in zip(ds.detections, back.detections):
            np.testing.assert_allclose(b.polygon.points, a.polygon.points,
                                       rtol=1e-8)
            assert b.confidence == pytest.approx(a.confidence, rel=1e-8)

    def test_confidence_out_of_range(self):
        doc = {"image_id": "a", "width": 100, "height": 100,
               "source": "detector",
               "detections": [{"poly": [[0, 0], [40, 0], [40, 18], [0, 18]],
                               "conf": 1.3, "label": "x"}]}
        with pytest.raises(DetectionSchemaError) as err:
            read_detection_json(doc)
        assert "conf" in err.value.field

    @pytest.mark.parametrize("missing", ["image_id", "width", "height",
                                         "source", "detections"])
    def test_missing_field_named(self, missing):
        doc = {"image_id": "a", "width": 10, "height": 10,
               "source": "detector", "detections": []}
        del doc[missing]
        with pytest.raises(DetectionSchemaError) as err:
            read_detection_json(doc)
        assert err.value.field == missing

    def test_unknown_field_rejected(self):
        doc = {"image_id": "a", "width": 10, "height": 10,
               "source": "detector", "detections": [], "extra": 1}
        with pytest.raises(DetectionSchemaError) as err:
            read_detection_json(doc)
        assert err.value.field == "extra"

    def test_bad_source(self):
        doc = {"image_id": "a", "width": 10, "height": 10,
               "source": "guess", "detections": []}
        with pytest.raises(DetectionSchemaError) as err:
            read_detection_json(doc)
        assert err.value.field == "source"

    def test_non_convex_rejected(self):
        # A dart: positive area but one reflex vertex.
        doc = {"image_id": "a", "width": 10, "height": 10,
               "source": "detector",
               "detections": [{"poly": [[0, 0], [4, 0], [2, 1], [0, 4]],
                               "conf": 0.5, "label": "x"}]}
        with pytest.raises(DetectionSchemaError, match="convex"):
            read_detection_json(doc)

    def test_degenerate_rejected(self):
        doc = {"image_id": "a", "width": 10, "height": 10,
               "source": "detector",
               "detections": [{"poly": [[0, 0], [2, 2], [2, 0], [0, 2]],
                               "conf": 0.5, "label": "x"}]}
        with pytest.raises(DetectionSchemaError, match="degenerate"):
            read_detection_json(doc)

    def test_out_of_margin_rejected(self):
        doc = {"image_id": "a", "width": 100, "height": 100,
               "source": "detector",
               "detections": [{"poly": [[300, 300], [340, 300], [340, 318],
                                        [300, 318]],
                               "conf": 0.5, "label": "x"}]}
        with pytest.raises(DetectionSchemaError, match="bounds"):
            read_detection_json(doc)

    def test_slight_overshoot_tolerated(self):
        # 5% margin on a 100-px image allows coordinates down to -5.
        doc = {"image_id": "a", "width": 100, "height": 100,
               "source": "detector",
               "detections": [{"poly": [[-4, 0], [30, 0], [30, 18], [-4, 18]],
                               "conf": 0.5, "label": "x"}]}
        assert len(read_detection_json(doc).detections) == 1

    def test_ground_truth_requires_full_confidence(self):
        doc = {"image_id": "a", "width": 100, "height": 100,
               "source": "ground_truth",
               "detections": [{"poly": [[0, 0], [40, 0], [40, 18], [0, 18]],
                               "conf": 0.9, "label": "x"}]}
        with pytest.raises(DetectionSchemaError) as err:
            read_detection_json(doc)
        assert "conf" in err.value.field

    def test_invalid_json_text(self):
        with pytest.raises(DetectionSchemaError, match="invalid JSON"):
            read_detection_json("{not json")

    def test_parses_from_text_and_bytes(self):
        ds = _sample_set(n=3)
        text = write_detection_json(ds)
        assert len(read_detection_json(text).detections) == 3
        assert len(read_detection_json(text.encode()).detections) == 3


class TestCanonicalJson:
    def test_sorted_keys_and_newline(self):
        out = canonical_dumps({"b": 1, "a": 2})
        assert out == '{"a":2,"b":1}\n'

    def test_floats_at_nine_significant_digits(self):
        out = canonical_dumps({"x": 0.12345678912345})
        assert out == '{"x":0.123456789}\n'

    def test_serialisation_idempotent(self):
        doc = {"x": [1.2345678912345, 7.0, 1e-12], "n": 3, "s": "t"}
        once = canonical_dumps(doc)
        twice = canonical_dumps(json.loads(once))
        assert once == twice

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError, match="non-finite"):
            canonical_dumps({"x": float("inf")})


class TestTilePlan:
    def test_single_tile_when_image_smaller(self):
        assert tile_plan(1000, 1000, 1024, 0) == [(0, 0, 1000, 1000)]

    def test_boundary_clamp(self):
        tiles = tile_plan(2000, 1000, 1024, 200)
        assert [t[0] for t in tiles] == [0, 824, 976]
        assert all(t[1] == 0 and t[3] == 1000 for t in tiles)

    def test_five_by_five(self):
        tiles = tile_plan(4000, 4000, 1024, 200)
        assert len(tiles) == 25
        xs = sorted({t[0] for t in tiles})
        assert xs == [0, 824, 1648, 2472, 2976]

    def test_validation(self):
        with pytest.raises(ValueError):
            tile_plan(0, 100)
        with pytest.raises(ValueError):
            tile_plan(100, 100, tile_size=100, overlap=100)
        with pytest.raises(ValueError):
            tile_plan(100, 100, tile_size=100, overlap=-1)

    @settings(max_examples=60, deadline=None)
    @given(
        width=st.integers(1, 700),
        height=st.integers(1, 700),
        tile=st.integers(2, 300),
        overlap_frac=st.floats(0.0, 0.9),
    )
    def test_full_pixel_coverage(self, width, height, tile, overlap_frac):
        overlap = int(tile * overlap_frac)
        covered = np.zeros((height, width), dtype=bool)
        for x, y, w, h in tile_plan(width, height, tile, overlap):
            assert 0 <= x and 0 <= y
            assert x + w <= width and y + h <= height
            covered[y:y + h, x:x + w] = True
        assert covered.all()
