import numpy as np
import pytest

from scenefeat import fileio, pipeline, synth
from scenefeat.types import ExtractionParams, SegmentationMask

from conftest import random_mask


@pytest.fixture(scope="module")
def small_dataset(tmp_path_factory):
    base = tmp_path_factory.mktemp("ds")
    manifest = synth.generate_dataset(synth.default_dataset_config(samples=12, seed=3), base)
    return base, manifest


class TestExtractBundle:
    def test_all_blocks_from_synthetic_sample(self):
        scene = synth.generate_scene(synth.default_templates()[0], seed=5)
        bundle = pipeline.extract_bundle(scene.mask, scene.detections)
        assert bundle.parts == ("shmf", "ssf", "sfv", "sfm")
        assert bundle.shmf.shape == (6, 7)
        assert bundle.sfm.shape == (5, 5, 3)

    def test_mask_only_flags_object_blocks_absent(self):
        mask = random_mask(0)
        bundle = pipeline.extract_bundle(mask)
        assert bundle.parts == ("shmf", "ssf")
        assert bundle.sfv is None and bundle.sfm is None

    def test_shmf_ssf_share_one_pass(self):
        from scenefeat import moments, ssf

        mask = random_mask(1)
        bundle = pipeline.extract_bundle(mask)
        ms = moments.moment_set(mask)
        assert np.array_equal(bundle.shmf, moments.shmf_from_moments(ms).rows)
        assert np.array_equal(bundle.ssf, ssf.ssf_from_moments(ms).rows)


class TestBatchExtract:
    def test_outputs_per_sample(self, small_dataset, tmp_path):
        base, manifest = small_dataset
        written = pipeline.batch_extract(manifest, tmp_path / "f")
        assert len(written) == 12
        assert written == sorted(written)
        bundle, params = fileio.read_features(tmp_path / "f" / written[0])
        assert bundle.parts == ("shmf", "ssf", "sfv", "sfm")
        assert params == ExtractionParams()

    def test_thread_count_does_not_change_bytes(self, small_dataset, tmp_path):
        base, manifest = small_dataset
        pipeline.batch_extract(manifest, tmp_path / "one", threads=1)
        pipeline.batch_extract(manifest, tmp_path / "four", threads=4)
        for f in sorted((tmp_path / "one").iterdir()):
            assert f.read_bytes() == (tmp_path / "four" / f.name).read_bytes()

    def test_failure_carries_sample_id(self, small_dataset, tmp_path):
        base, manifest = small_dataset
        (base / "masks" / "s00003.pgm").write_bytes(b"P5\n1 1\n1\n")
        try:
            with pytest.raises(Exception, match="s00003"):
                pipeline.batch_extract(manifest, tmp_path / "broken")
        finally:
            # restore the sample for other tests in this module
            config = synth.default_dataset_config(samples=12, seed=3)
            synth.generate_dataset(config, base)

    def test_dataset_loading_for_training(self, small_dataset, tmp_path):
        base, manifest = small_dataset
        pipeline.batch_extract(manifest, tmp_path / "feats")
        dataset, classes = pipeline.load_feature_dataset(manifest, tmp_path / "feats")
        assert len(dataset) == 12
        assert classes == [t.label for t in synth.default_templates()]
        labels = {y for _, y in dataset}
        assert labels == set(range(6))


class TestInvarianceBattery:
    def test_solid_rectangle_passes_exact(self):
        arr = np.zeros((48, 48), dtype=np.int64)
        arr[12:30, 9:25] = 1
        report = pipeline.invariance_battery(SegmentationMask(arr, 1))
        exact = [c for c in report.checks if c.kind == "exact"]
        assert all(c.max_hu_delta <= 1e-9 for c in exact)
        assert all(c.pixel_counts_conserved for c in exact)

    def test_reflection_reports_h7_flip(self, chair_mask):
        report = pipeline.invariance_battery(chair_mask)
        reflections = [c for c in report.checks if c.name.startswith("reflect")]
        assert len(reflections) == 2
        assert all(c.h7_sign_flipped for c in reflections)

    def test_blob_passes_full_battery(self):
        mask = synth.random_shape_mask(2, size=192, margin=48, min_area=1500)
        report = pipeline.invariance_battery(mask)
        assert report.passed
        kinds = {c.kind for c in report.checks}
        assert kinds == {"exact", "scale", "rotate"}

    def test_rotation_skipped_for_small_shapes(self):
        arr = np.zeros((64, 64), dtype=np.int64)
        arr[30:40, 30:42] = 1  # 120 px: scale applies, rotation does not
        report = pipeline.invariance_battery(SegmentationMask(arr, 1))
        kinds = [c.kind for c in report.checks]
        assert "scale" in kinds and "rotate" not in kinds

    def test_report_formatting(self, chair_mask):
        report = pipeline.invariance_battery(chair_mask)
        text = pipeline.format_invariance_report(report)
        assert "reflect(x)" in text and "overall:" in text
