import numpy as np
import pytest

from scenefeat import fileio, synth
from scenefeat.types import ClippingError, ConfigError, SegmentationMask


def template_with(*shapes, label="t"):
    return synth.SceneTemplate(label=label, shapes=tuple(shapes))


class TestGenerateScene:
    def test_zero_presence_yields_void_scene(self):
        t = template_with(synth.ShapeSpec(1, "rectangle", obj_category=1, presence=0.0))
        scene = synth.generate_scene(t, seed=1)
        assert not scene.mask.pixels.any()
        assert len(scene.detections) == 0

    def test_forced_rectangle_exact_footprint_and_box(self):
        t = template_with(
            synth.ShapeSpec(1, "rectangle", obj_category=1, size=(10 / 96, 10 / 96),
                            region=(0.5, 0.5, 0.5, 0.5))
        )
        scene = synth.generate_scene(t, seed=42)
        assert int((scene.mask.pixels == 1).sum()) == 100
        x0, y0, x1, y1 = scene.detections.detections[0].bbox
        assert (x1 - x0, y1 - y0) == (10.0, 10.0)

    def test_same_seed_same_scene(self):
        t = synth.default_templates()[0]
        a = synth.generate_scene(t, seed=7)
        b = synth.generate_scene(t, seed=7)
        assert a.mask.pixels.tobytes() == b.mask.pixels.tobytes()
        assert a.detections == b.detections
        assert synth.generate_scene(t, seed=8).mask.pixels.tobytes() != a.mask.pixels.tobytes()

    def test_category_indices_validated_against_config(self):
        t = template_with(synth.ShapeSpec(9, "rectangle"))
        with pytest.raises(ConfigError, match="seg category 9"):
            synth.generate_scene(t, seed=1, seg_categories=6)
        t2 = template_with(synth.ShapeSpec(1, "rectangle", obj_category=9))
        with pytest.raises(ConfigError, match="obj category 9"):
            synth.generate_scene(t2, seed=1, obj_categories=5)

    def test_detection_box_covers_category_pixels_unless_occluded(self):
        for seed in range(30):
            for t in synth.default_templates():
                scene = synth.generate_scene(t, seed=seed)
                occluded = 0
                for spec_det in scene.detections.detections:
                    x0, y0, x1, y1 = (int(v) for v in spec_det.bbox)
                    region = scene.mask.pixels[y0:y1, x0:x1]
                    if not region.size or not (region > 0).any():
                        occluded += 1
                assert occluded <= scene.occluded


class TestShapeSpecValidation:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"shape": "hexagon"},
            {"shape": "ellipse", "presence": 1.5},
            {"shape": "ellipse", "size": (0.0, 0.5)},
            {"shape": "ellipse", "size_y": (0.5, 1.2)},
            {"shape": "ellipse", "region": (0.5, 0.0, 0.2, 1.0)},
            {"shape": "ellipse", "count": (3, 1)},
        ],
    )
    def test_invalid_spec(self, kwargs):
        with pytest.raises(ConfigError):
            synth.ShapeSpec(seg_category=1, **{"shape": "ellipse", **kwargs})


class TestTransforms:
    def test_translate_identity(self, chair_mask):
        out = synth.transform_mask(chair_mask, synth.Translate(0, 0))
        assert np.array_equal(out.pixels, chair_mask.pixels)

    def test_reflect_involution(self, chair_mask):
        once = synth.transform_mask(chair_mask, synth.Reflect("x"))
        twice = synth.transform_mask(once, synth.Reflect("x"))
        assert np.array_equal(twice.pixels, chair_mask.pixels)

    def test_rotate90_cyclic(self, chair_mask):
        out = chair_mask
        for _ in range(4):
            out = synth.transform_mask(out, synth.Rotate90(1))
        assert np.array_equal(out.pixels, chair_mask.pixels)

    def test_translate_clipping_detected(self, chair_mask):
        with pytest.raises(ClippingError):
            synth.transform_mask(chair_mask, synth.Translate(200, 0))

    def test_rotation_clipping_detected(self):
        arr = np.zeros((20, 20), dtype=np.int64)
        arr[0, :] = 1  # content on the frame edge clips under any rotation
        with pytest.raises(ClippingError):
            synth.transform_mask(SegmentationMask(arr, 1), synth.Rotate(0.3))

    def test_exact_transforms_conserve_pixel_counts(self, chair_mask):
        base = int((chair_mask.pixels == 1).sum())
        for tf in (synth.Translate(2, 2), synth.Reflect("y"), synth.Rotate90(3)):
            moved = synth.transform_mask(chair_mask, tf)
            assert int((moved.pixels == 1).sum()) == base

    def test_scale_replicates_pixels(self, chair_mask):
        scaled = synth.transform_mask(chair_mask, synth.Scale(3))
        assert scaled.pixels.shape == (72, 72)
        assert int((scaled.pixels == 1).sum()) == 9 * int((chair_mask.pixels == 1).sum())
        with pytest.raises(ConfigError):
            synth.transform_mask(chair_mask, synth.Scale(0))

    def test_rotation_is_categorical(self):
        mask = synth.random_shape_mask(3)
        rotated = synth.transform_mask(mask, synth.Rotate(0.41))
        assert set(np.unique(rotated.pixels)) <= {0, 1}


class TestDatasets:
    def test_two_templates_ten_each(self, tmp_path):
        config = synth.DatasetConfig(
            templates=synth.default_templates()[:2], samples=20, seed=5,
            width=64, height=64)
        manifest = synth.generate_dataset(config, tmp_path)
        rows, meta = fileio.read_manifest(manifest)
        assert len(rows) == 20
        assert len(list((tmp_path / "masks").glob("*.pgm"))) == 20
        assert len(list((tmp_path / "detections").glob("*.json"))) == 20
        labels = [r.label for r in rows]
        assert labels.count("office") == 10 and labels.count("bedroom") == 10
        assert meta["classes"] == ["office", "bedroom"]

    def test_manifest_bytes_deterministic(self, tmp_path):
        config = synth.default_dataset_config(samples=12, seed=3)
        m1 = synth.generate_dataset(config, tmp_path / "a")
        m2 = synth.generate_dataset(config, tmp_path / "b")
        assert m1.read_bytes() == m2.read_bytes()
        for name in ("masks/s00000.pgm", "detections/s00005.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_requires_two_templates(self):
        with pytest.raises(ConfigError):
            synth.DatasetConfig(templates=synth.default_templates()[:1], samples=5, seed=1)

    def test_round_robin_balance(self, tmp_path):
        manifest = synth.generate_dataset(synth.default_dataset_config(samples=200, seed=9),
                                          tmp_path)
        rows, _ = fileio.read_manifest(manifest)
        counts = {}
        for r in rows:
            counts[r.label] = counts.get(r.label, 0) + 1
        assert sorted(counts.values()) == [33, 33, 33, 33, 34, 34]


class TestRandomShapeMask:
    def test_margin_and_area(self):
        for seed in range(10):
            mask = synth.random_shape_mask(seed, size=128, margin=36, min_area=400)
            assert int((mask.pixels == 1).sum()) >= 400
            border = np.concatenate([
                mask.pixels[:36, :].ravel(), mask.pixels[-36:, :].ravel(),
                mask.pixels[:, :36].ravel(), mask.pixels[:, -36:].ravel()])
            assert not border.any()
