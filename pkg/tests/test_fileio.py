import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scenefeat import fileio
from scenefeat.types import (
    Detection,
    DetectionSet,
    ExtractionParams,
    FeatureBundle,
    LabelMap,
    MaskValidationError,
    SchemaError,
    SegmentationMask,
)


class TestHexFloats:
    @given(st.floats(allow_nan=False, allow_infinity=False))
    @settings(max_examples=200)
    def test_roundtrip_bit_exact(self, x):
        back = fileio.decode_float(fileio.encode_float(x))
        assert math.copysign(1.0, back) == math.copysign(1.0, x)
        assert back == x or (math.isnan(back) and math.isnan(x))

    def test_negative_zero_preserved(self):
        assert str(fileio.decode_float(fileio.encode_float(-0.0))) == "-0.0"

    def test_bad_literal(self):
        with pytest.raises(SchemaError, match="params.rho"):
            fileio.decode_float("zz", "params.rho")


class TestPGM:
    def test_p5_roundtrip(self, tmp_path):
        arr = np.array([[0, 1], [1, 2]], dtype=np.int64)
        mask = SegmentationMask(arr, 37)
        path = tmp_path / "m.pgm"
        fileio.write_mask(mask, path)
        loaded = fileio.load_mask(path)
        assert loaded.seg_categories == 37
        assert np.array_equal(loaded.pixels, arr)

    def test_p2_and_p5_twins_load_identically(self, tmp_path):
        arr = np.arange(12, dtype=np.int64).reshape(3, 4) % 5
        mask = SegmentationMask(arr, 5)
        fileio.write_mask(mask, tmp_path / "bin.pgm")
        fileio.write_mask(mask, tmp_path / "plain.pgm", plain=True)
        a = fileio.load_mask(tmp_path / "bin.pgm")
        b = fileio.load_mask(tmp_path / "plain.pgm")
        assert np.array_equal(a.pixels, b.pixels)
        assert a.seg_categories == b.seg_categories

    def test_sixteen_bit_payload(self, tmp_path):
        arr = np.array([[300, 0], [37, 299]], dtype=np.int64)
        mask = SegmentationMask(arr, 300)
        fileio.write_mask(mask, tmp_path / "wide.pgm")
        loaded = fileio.load_mask(tmp_path / "wide.pgm")
        assert np.array_equal(loaded.pixels, arr)

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "trunc.pgm"
        path.write_bytes(b"P5\n2 2\n9\n\x00\x01\x02")
        with pytest.raises(SchemaError, match="payload holds 3 bytes"):
            fileio.load_mask(path)

    def test_value_above_maxval(self, tmp_path):
        path = tmp_path / "bad.pgm"
        path.write_bytes(b"P5\n2 1\n3\n\x00\x07")
        with pytest.raises(SchemaError, match="exceeds maxval"):
            fileio.load_mask(path)

    def test_validation_against_configured_categories(self, tmp_path):
        path = tmp_path / "m.pgm"
        path.write_bytes(b"P5\n2 2\n37\n\x00\x01\x01\x02")
        loaded = fileio.load_mask(path, seg_categories=37)
        assert loaded.pixels[1, 1] == 2
        with pytest.raises(MaskValidationError, match=r"at \(1, 1\)"):
            fileio.load_mask(path, seg_categories=1)

    def test_comments_in_header(self, tmp_path):
        path = tmp_path / "c.pgm"
        path.write_bytes(b"P5\n# a comment\n2 1\n# another\n5\n\x01\x02")
        loaded = fileio.load_mask(path)
        assert np.array_equal(loaded.pixels, [[1, 2]])

    def test_not_a_pgm(self, tmp_path):
        path = tmp_path / "x.pgm"
        path.write_bytes(b"P6\n1 1\n255\n\x00\x00\x00")
        with pytest.raises(SchemaError, match="not a P2/P5"):
            fileio.load_mask(path)


def _write_detdoc(tmp_path, confidences, schema=fileio.DETECTIONS_SCHEMA, **overrides):
    doc = {
        "schema": schema,
        "image_width": 100,
        "image_height": 80,
        "obj_categories": 5,
        "detections": [
            {"category": 1, "bbox": [10, 10, 20, 20], "confidence": c} for c in confidences
        ],
    }
    doc.update(overrides)
    path = tmp_path / "d.json"
    path.write_text(json.dumps(doc))
    return path


class TestDetectionsIO:
    def test_threshold_drops_low_confidence(self, tmp_path):
        path = _write_detdoc(tmp_path, [0.1, 0.3, 0.9])
        loaded = fileio.load_detections(path, confidence_threshold=0.2)
        assert len(loaded.detections) == 2
        assert loaded.dropped_low_confidence == 1

    def test_zero_threshold_keeps_all(self, tmp_path):
        path = _write_detdoc(tmp_path, [0.1, 0.3, 0.9])
        loaded = fileio.load_detections(path, confidence_threshold=0.0)
        assert len(loaded.detections) == 3

    def test_empty_record_list(self, tmp_path):
        path = _write_detdoc(tmp_path, [])
        loaded = fileio.load_detections(path)
        assert len(loaded.detections) == 0 and loaded.dropped_low_confidence == 0

    def test_schema_violation_names_record(self, tmp_path):
        path = _write_detdoc(tmp_path, [0.5])
        doc = json.loads(path.read_text())
        doc["detections"].append({"category": 2, "bbox": [1, 2, 3], "confidence": 0.5})
        path.write_text(json.dumps(doc))
        with pytest.raises(SchemaError, match=r"detections\[1\]"):
            fileio.load_detections(path)

    def test_category_out_of_vocabulary(self, tmp_path):
        path = _write_detdoc(tmp_path, [0.5])
        doc = json.loads(path.read_text())
        doc["detections"][0]["category"] = 6
        path.write_text(json.dumps(doc))
        with pytest.raises(SchemaError, match=r"category 6 outside \[1, 5\]"):
            fileio.load_detections(path)

    def test_boxes_clamped_with_count(self, tmp_path):
        path = _write_detdoc(tmp_path, [0.5])
        doc = json.loads(path.read_text())
        doc["detections"][0]["bbox"] = [-5, 10, 150, 20]
        path.write_text(json.dumps(doc))
        loaded = fileio.load_detections(path)
        assert loaded.clamped == 1
        assert loaded.detections.detections[0].bbox == (0.0, 10.0, 100.0, 20.0)

    def test_names_resolved_through_labels(self, tmp_path):
        path = _write_detdoc(tmp_path, [0.5])
        doc = json.loads(path.read_text())
        doc["detections"][0]["category"] = "tv"
        path.write_text(json.dumps(doc))
        labels = LabelMap(seg_names=("wall",), obj_names=("chair", "tv", "sofa", "bed", "desk"))
        loaded = fileio.load_detections(path, labels=labels)
        assert loaded.detections.detections[0].category == 2
        with pytest.raises(SchemaError, match="without a label map"):
            fileio.load_detections(path)

    def test_wrong_schema_rejected(self, tmp_path):
        path = _write_detdoc(tmp_path, [0.5], schema="something/9")
        with pytest.raises(SchemaError, match="schema"):
            fileio.load_detections(path)

    def test_roundtrip_through_writer(self, tmp_path):
        ds = DetectionSet(
            detections=(Detection(category=2, bbox=(1.5, 2.25, 30.125, 40.0), confidence=0.625),),
            image_width=100, image_height=80, obj_categories=5)
        fileio.write_detections(ds, tmp_path / "d.json")
        loaded = fileio.load_detections(tmp_path / "d.json", confidence_threshold=0.0)
        assert loaded.detections == ds


def _random_bundle(seed=0, with_global=False):
    rng = np.random.default_rng(seed)
    return FeatureBundle(
        shmf=rng.normal(size=(3, 7)) * 10.0 ** float(rng.integers(-8, 8)),
        ssf=rng.random(size=(3, 5)),
        sfv=rng.integers(0, 9, size=4),
        sfm=rng.integers(0, 9, size=(4, 4, 2)),
        global_vec=rng.normal(size=6) if with_global else None,
    )


class TestFeatureFiles:
    @pytest.mark.parametrize("with_global", [False, True])
    def test_roundtrip_bit_exact(self, tmp_path, with_global):
        bundle = _random_bundle(1, with_global)
        params = ExtractionParams(bins=2, rho=2.5, confidence_threshold=0.3)
        fileio.write_features(bundle, params, tmp_path / "f.json")
        back, back_params = fileio.read_features(tmp_path / "f.json")
        for part in ("shmf", "ssf", "sfv", "sfm", "global"):
            a, b = bundle.block(part), back.block(part)
            assert (a is None) == (b is None)
            if a is not None:
                assert a.tobytes() == b.tobytes()
        assert back_params == params

    def test_partial_bundle_keeps_absent_flags(self, tmp_path):
        bundle = FeatureBundle(shmf=np.zeros((2, 7)), ssf=np.zeros((2, 5)))
        fileio.write_features(bundle, ExtractionParams(), tmp_path / "f.json")
        doc = json.loads((tmp_path / "f.json").read_text())
        assert doc["blocks"]["sfm"] is None and doc["blocks"]["sfv"] is None
        back, _ = fileio.read_features(tmp_path / "f.json")
        assert back.sfm is None and back.sfv is None
        assert back.parts == ("shmf", "ssf")

    def test_tampered_shape_names_field(self, tmp_path):
        bundle = _random_bundle(2)
        fileio.write_features(bundle, ExtractionParams(), tmp_path / "f.json")
        doc = json.loads((tmp_path / "f.json").read_text())
        doc["blocks"]["ssf"]["shape"] = [3, 4]
        (tmp_path / "f.json").write_text(json.dumps(doc))
        with pytest.raises(SchemaError, match=r"blocks\.ssf\.shape"):
            fileio.read_features(tmp_path / "f.json")

    def test_value_count_mismatch(self, tmp_path):
        bundle = _random_bundle(3)
        fileio.write_features(bundle, ExtractionParams(), tmp_path / "f.json")
        doc = json.loads((tmp_path / "f.json").read_text())
        doc["blocks"]["sfv"]["values"] = doc["blocks"]["sfv"]["values"][:-1]
        (tmp_path / "f.json").write_text(json.dumps(doc))
        with pytest.raises(SchemaError, match=r"blocks\.sfv\.values"):
            fileio.read_features(tmp_path / "f.json")

    def test_writer_bytes_deterministic(self, tmp_path):
        bundle = _random_bundle(4)
        fileio.write_features(bundle, ExtractionParams(), tmp_path / "a.json")
        fileio.write_features(bundle, ExtractionParams(), tmp_path / "b.json")
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


class TestManifest:
    def test_roundtrip(self, tmp_path):
        rows = [
            fileio.ManifestRow("s0", "office", 7, "masks/s0.pgm", "detections/s0.json", 0),
            fileio.ManifestRow("s1", "lounge", 8, "masks/s1.pgm", "detections/s1.json", 2),
        ]
        config = {"classes": ["office", "lounge"], "seed": 5}
        fileio.write_manifest(rows, config, tmp_path / "m.tsv")
        back_rows, back_config = fileio.read_manifest(tmp_path / "m.tsv")
        assert back_rows == rows
        assert back_config == config

    def test_header_required(self, tmp_path):
        (tmp_path / "m.tsv").write_text("id\tlabel\n")
        with pytest.raises(SchemaError, match="schema line"):
            fileio.read_manifest(tmp_path / "m.tsv")
