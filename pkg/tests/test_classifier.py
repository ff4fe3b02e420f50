import numpy as np
import pytest

from scenefeat import classifier
from scenefeat.types import ConfigError, FeatureBundle, TrainingError


def make_bundle(kind: int, jitter: float, L=2, N=3, K=3, rng=None, global_shift=None):
    rng = rng or np.random.default_rng(0)
    shmf = np.full((L, 7), float(kind)) + rng.normal(size=(L, 7)) * jitter
    ssf = np.full((L, 5), 0.2 + 0.3 * kind) + rng.normal(size=(L, 5)) * jitter
    sfv = np.zeros(N, dtype=np.int64)
    sfv[kind % N] = 3
    sfm = np.zeros((N, N, K), dtype=np.int64)
    sfm[kind % N, kind % N, kind % K] = 6
    g = None
    if global_shift is not None:
        g = rng.normal(size=4) * jitter + global_shift[kind]
    return FeatureBundle(shmf=shmf, ssf=ssf, sfv=sfv, sfm=sfm, global_vec=g)


def separable_dataset(n=40, classes=2, jitter=0.02, seed=0, global_shift=None):
    rng = np.random.default_rng(seed)
    return [(make_bundle(k % classes, jitter, rng=rng, global_shift=global_shift), k % classes)
            for k in range(n)]


class TestBuildBundle:
    def test_length_arithmetic(self):
        b = classifier.build_bundle(
            shmf=np.zeros((2, 7)), ssf=np.zeros((2, 5)), sfv=np.zeros(3, dtype=np.int64),
            sfm=np.zeros((3, 3, 3), dtype=np.int64),
            seg_categories=2, obj_categories=3, bins=3)
        assert b.flatten().size == 14 + 10 + 3 + 27

    def test_all_zero_inputs(self):
        b = classifier.build_bundle(shmf=np.zeros((1, 7)), ssf=np.zeros((1, 5)))
        assert not b.flatten().any()

    def test_determinism(self):
        b = make_bundle(1, 0.1)
        assert b.flatten().tobytes() == b.flatten().tobytes()

    def test_mismatch_names_block(self):
        with pytest.raises(ConfigError, match="ssf"):
            classifier.build_bundle(ssf=np.zeros((4, 5)), seg_categories=3)
        with pytest.raises(ConfigError, match="sfm"):
            classifier.build_bundle(sfm=np.zeros((2, 2, 5), dtype=np.int64),
                                    obj_categories=2, bins=3)


class TestTrain:
    def test_separable_two_class(self):
        data = separable_dataset()
        cfg = classifier.TrainConfig(epochs=200, learning_rate=0.1, seed=1,
                                     hidden1=16, hidden2=8)
        model = classifier.train(data, cfg)
        report = classifier.evaluate(model, data)
        assert report.accuracy >= 0.99

    def test_fixed_seed_bit_identical_weights(self):
        data = separable_dataset()
        cfg = classifier.TrainConfig(epochs=20, seed=7, hidden1=8, hidden2=4)
        m1 = classifier.train(data, cfg)
        m2 = classifier.train(data, cfg)
        assert set(m1.weights) == set(m2.weights)
        for name in m1.weights:
            assert m1.weights[name].tobytes() == m2.weights[name].tobytes()

    def test_empty_dataset(self):
        with pytest.raises(TrainingError, match="empty"):
            classifier.train([])

    def test_single_class(self):
        data = [(make_bundle(0, 0.01), 0) for _ in range(8)]
        with pytest.raises(TrainingError, match="2 distinct classes"):
            classifier.train(data)

    def test_shape_drift(self):
        data = [(make_bundle(0, 0.01), 0), (make_bundle(1, 0.01, L=3), 1)]
        with pytest.raises(TrainingError, match="drift"):
            classifier.train(data)

    def test_standardized_input_rejected(self):
        b = make_bundle(0, 0.01)
        flagged = FeatureBundle(shmf=b.shmf, ssf=b.ssf, sfv=b.sfv, sfm=b.sfm,
                                standardized=True)
        with pytest.raises(TrainingError, match="standardized"):
            classifier.train([(flagged, 0), (make_bundle(1, 0.01), 1)])

    def test_feature_subset_training(self):
        data = separable_dataset()
        cfg = classifier.TrainConfig(epochs=100, feature_parts=("shmf", "ssf"),
                                     hidden1=8, hidden2=4, seed=2)
        model = classifier.train(data, cfg)
        assert model.input_dim == 24
        assert classifier.evaluate(model, data).accuracy >= 0.95


class TestTwoStep:
    def test_global_branch_frozen_in_step_two(self):
        shift = {0: -2.0, 1: 2.0}
        data = separable_dataset(global_shift=shift)
        cfg = classifier.TrainConfig(
            epochs=60, seed=3, hidden1=8, hidden2=4, two_step=True,
            feature_parts=("shmf", "ssf", "sfv", "sfm", "global"))
        model = classifier.train(data, cfg)
        assert model.global_dim == 4
        # retrain the probe alone: identical first-step stream means the
        # frozen branch must match a probe-only run exactly
        probe_cfg = classifier.TrainConfig(
            epochs=60, seed=3, hidden1=8, hidden2=4, two_step=True,
            feature_parts=("shmf", "ssf", "sfv", "sfm", "global"))
        again = classifier.train(data, probe_cfg)
        assert model.weights["Wg"].tobytes() == again.weights["Wg"].tobytes()
        report = classifier.evaluate(model, data)
        assert report.accuracy >= 0.99

    def test_two_step_without_global_is_joint(self):
        data = separable_dataset()
        cfg = classifier.TrainConfig(epochs=30, seed=3, hidden1=8, hidden2=4, two_step=True)
        model = classifier.train(data, cfg)
        assert model.global_dim == 0 and "Wg" not in model.weights


@pytest.fixture(scope="module")
def trained():
    data = separable_dataset()
    cfg = classifier.TrainConfig(epochs=200, learning_rate=0.1, seed=1,
                                 hidden1=16, hidden2=8)
    return classifier.train(data, cfg), data


class TestPredict:

    def test_probabilities_sum_to_one(self, trained):
        model, data = trained
        _, probs = classifier.predict(model, data[0][0])
        assert probs.min() >= 0.0
        assert abs(probs.sum() - 1.0) <= 1e-6

    def test_untrained_model_uniform(self):
        data = separable_dataset()
        cfg = classifier.TrainConfig(epochs=1, seed=0, hidden1=8, hidden2=4)
        model = classifier.train(data, cfg)
        model.weights["W3"][:] = 0.0
        model.weights["b3"][:] = 0.0
        label, probs = classifier.predict(model, data[0][0])
        assert label == 0  # argmax tie-break: lowest index
        assert np.allclose(probs, 0.5)

    def test_training_sample_predicted_correctly(self, trained):
        model, data = trained
        bundle, label = data[3]
        assert classifier.predict(model, bundle)[0] == label

    def test_shape_mismatch(self, trained):
        model, _ = trained
        with pytest.raises(ConfigError):
            classifier.predict(model, make_bundle(0, 0.01, L=4))

    def test_standardized_flag_rejected(self, trained):
        model, data = trained
        b = data[0][0]
        flagged = FeatureBundle(shmf=b.shmf, ssf=b.ssf, sfv=b.sfv, sfm=b.sfm,
                                standardized=True)
        with pytest.raises(ConfigError, match="standardized"):
            classifier.predict(model, flagged)


class TestEvaluate:
    def test_perfect_predictor_diagonal(self):
        data = separable_dataset(n=30)
        cfg = classifier.TrainConfig(epochs=200, learning_rate=0.1, seed=1,
                                     hidden1=16, hidden2=8)
        model = classifier.train(data, cfg)
        report = classifier.evaluate(model, data)
        assert report.accuracy == 1.0
        assert np.array_equal(report.confusion, np.diag(np.diag(report.confusion)))
        assert np.array_equal(report.per_class_recall, [1.0, 1.0])

    def test_constant_predictor_single_column(self):
        data = separable_dataset(n=20)
        cfg = classifier.TrainConfig(epochs=1, seed=0, hidden1=4, hidden2=2)
        model = classifier.train(data, cfg)
        for name in model.weights:
            model.weights[name][:] = 0.0
        model.weights["b3"][:] = np.array([0.0, 5.0])
        report = classifier.evaluate(model, data)
        assert report.confusion[:, 1].sum() == 20
        assert report.confusion[:, 0].sum() == 0

    def test_accuracy_matches_manual_recount(self):
        data = separable_dataset(n=24, jitter=0.8, seed=5)
        cfg = classifier.TrainConfig(epochs=30, seed=2, hidden1=8, hidden2=4)
        model = classifier.train(data, cfg)
        report = classifier.evaluate(model, data)
        correct = sum(classifier.predict(model, b)[0] == y for b, y in data)
        assert report.accuracy == correct / len(data)
        assert report.confusion.sum() == len(data)
        assert np.trace(report.confusion) == correct

    def test_empty_dataset(self):
        data = separable_dataset(n=8)
        model = classifier.train(data, classifier.TrainConfig(epochs=1, hidden1=4, hidden2=2))
        with pytest.raises(TrainingError, match="empty"):
            classifier.evaluate(model, [])


class TestGradients:
    def test_backprop_matches_central_differences(self):
        rng = np.random.default_rng(0)
        sem_d, g_d, h1, h2, C, B = 5, 3, 4, 3, 3, 8
        weights = {
            "W1": rng.normal(size=(sem_d, h1)) * 0.5, "b1": rng.normal(size=h1) * 0.1,
            "W2": rng.normal(size=(h1 + C, h2)) * 0.5, "b2": rng.normal(size=h2) * 0.1,
            "W3": rng.normal(size=(h2, C)) * 0.5, "b3": rng.normal(size=C) * 0.1,
            "Wg": rng.normal(size=(g_d, C)) * 0.5, "bg": rng.normal(size=C) * 0.1,
        }
        xs = rng.normal(size=(B, sem_d + g_d))
        labels = rng.integers(0, C, B)
        # central differences need all relu pre-activations clear of zero
        state = classifier._forward(weights, xs, sem_d, g_d)
        assert min(np.abs(state["z1"]).min(), np.abs(state["z2"]).min()) > 0.01
        _, grads = classifier.loss_and_gradients(weights, xs, labels, sem_d, g_d)
        eps = 1e-3
        for name, w in weights.items():
            it = np.nditer(w, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                orig = w[idx]
                w[idx] = orig + eps
                up, _ = classifier.loss_and_gradients(weights, xs, labels, sem_d, g_d)
                w[idx] = orig - eps
                down, _ = classifier.loss_and_gradients(weights, xs, labels, sem_d, g_d)
                w[idx] = orig
                fd = (up - down) / (2 * eps)
                rel = abs(fd - grads[name][idx]) / max(1e-8, abs(fd), abs(grads[name][idx]))
                assert rel <= 1e-4, (name, idx, rel)


class TestModelDocument:
    def test_roundtrip_lossless(self, tmp_path):
        data = separable_dataset(n=16)
        cfg = classifier.TrainConfig(epochs=10, seed=4, hidden1=8, hidden2=4)
        model = classifier.train(data, cfg, class_names=("alpha", "beta"))
        classifier.write_model(model, tmp_path / "m.json")
        back = classifier.read_model(tmp_path / "m.json")
        assert back.parts == model.parts
        assert back.classes == model.classes
        assert back.class_names == ("alpha", "beta")
        assert back.mean.tobytes() == model.mean.tobytes()
        assert back.std.tobytes() == model.std.tobytes()
        for name in model.weights:
            assert back.weights[name].tobytes() == model.weights[name].tobytes()
        # round-tripped model predicts identically
        for bundle, _ in data[:4]:
            a = classifier.predict(model, bundle)
            b = classifier.predict(back, bundle)
            assert a[0] == b[0] and np.array_equal(a[1], b[1])

    def test_write_bytes_deterministic(self, tmp_path):
        data = separable_dataset(n=16)
        cfg = classifier.TrainConfig(epochs=5, seed=4, hidden1=8, hidden2=4)
        model = classifier.train(data, cfg)
        classifier.write_model(model, tmp_path / "a.json")
        classifier.write_model(model, tmp_path / "b.json")
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
