import numpy as np
import pytest

from ocnna import layers as L
from ocnna.data import LabeledDataset
from ocnna.errors import DimensionError, DivergenceError
from ocnna.graph import ModelGraph, tensors_equal
from ocnna.inference import accuracy, predict
from ocnna.trainer import (TrainConfig, build_model, build_preset, loss_and_grads, make_synthetic_dataset,
                           softmax_cross_entropy, tiny3_arch, train)
from gradcheck import numeric_grad, rel_error


def small_cnn(seed=0, classes=3):
    arch = {
        "name": "small", "input_shape": [6, 6, 1],
        "layers": [
            {"kind": "conv2d", "filters": 3, "kernel": 3},
            {"kind": "batchnorm"},
            {"kind": "relu"},
            {"kind": "maxpool", "window": 2},
            {"kind": "flatten"},
            {"kind": "dense", "units": classes},
            {"kind": "softmax"},
        ],
    }
    return build_model(arch, seed)


def test_config_defaults_and_validation():
    cfg = TrainConfig()
    assert (cfg.learning_rate, cfg.momentum, cfg.weight_decay, cfg.batch_size) == (1e-3, 0.9, 1e-6, 64)
    for bad in ({"epochs": 0}, {"momentum": 1.0}, {"learning_rate": -1}, {"batch_size": 0}, {"weight_decay": -1}):
        with pytest.raises(ValueError):
            TrainConfig(**bad)


def test_synthetic_dataset():
    a = make_synthetic_dataset(3, 10, 16, seed=5)
    b = make_synthetic_dataset(3, 10, 16, seed=5)
    assert a.images.tobytes() == b.images.tobytes() and np.array_equal(a.labels, b.labels)
    assert a.images.shape == (30, 16, 16, 1)
    assert np.bincount(a.labels).tolist() == [10, 10, 10]
    assert set(make_synthetic_dataset(1, 4, 8, seed=0).labels.tolist()) == {0}
    with pytest.raises(ValueError):
        make_synthetic_dataset(3, 0, 16, seed=0)


def test_tiny3_preset_shape():
    g = build_preset("tiny3", seed=0)
    assert g.name == "tiny3"
    assert len(g.conv_indices()) == 3
    assert all(g.layers[i].filters == 16 for i in g.conv_indices())
    assert g.shapes()[-1] == (3,)
    assert tiny3_arch()["input_shape"] == [16, 16, 1]
    with pytest.raises(ValueError):
        build_preset("resnet50")


def test_init_is_seeded():
    assert tensors_equal(build_preset("tiny3", seed=3), build_preset("tiny3", seed=3))
    assert not tensors_equal(build_preset("tiny3", seed=3), build_preset("tiny3", seed=4))


def test_cross_entropy_gradient():
    rng = np.random.default_rng(0)
    z = rng.standard_normal((4, 3))
    y = np.array([0, 2, 1, 2])
    _, g = softmax_cross_entropy(z, y)
    num = numeric_grad(lambda: softmax_cross_entropy(z, y)[0], z)
    assert rel_error(g, num) < 1e-4


@pytest.mark.parametrize("seed", range(3))
def test_model_gradients_match_finite_differences(seed):
    g = small_cnn(seed)
    rng = np.random.default_rng(seed)
    for layer in g.layers:
        for name in layer.params:
            layer.params[name] = layer.params[name].astype(np.float64)
    x = rng.standard_normal((4, 6, 6, 1))
    y = rng.integers(0, 3, 4)
    _, grads = loss_and_grads(g, x, y)
    for i, pg in grads.items():
        for name, analytic in pg.items():
            arr = g.layers[i].params[name]
            num = numeric_grad(lambda: loss_and_grads(g, x, y)[0], arr)
            assert rel_error(analytic, num) < 1e-4, (i, name)


def test_zero_learning_rate_and_decay_is_identity():
    g = small_cnn()
    d = make_synthetic_dataset(3, 5, 6, seed=1)
    out, hist = train(g, d, TrainConfig(learning_rate=0.0, weight_decay=0.0, epochs=2, batch_size=4))
    assert tensors_equal(g, out)
    assert len(hist) == 2


def test_zero_learning_rate_only_decays():
    g = small_cnn()
    d = make_synthetic_dataset(3, 4, 6, seed=1)  # 12 samples, batch 4 -> 3 steps
    out, _ = train(g, d, TrainConfig(learning_rate=0.0, weight_decay=0.01, epochs=1, batch_size=4))
    k0 = g.layers[0].params["kernel"].astype(np.float64)
    expected = k0
    for _ in range(3):
        expected = (expected - 0.01 * expected).astype(np.float32).astype(np.float64)
    np.testing.assert_array_equal(out.layers[0].params["kernel"], expected.astype(np.float32))


def test_separable_blobs_reach_99_percent():
    rng = np.random.default_rng(0)
    pts = rng.uniform(-3, 3, (2000, 2))
    pts = pts[np.abs(pts[:, 0] + pts[:, 1]) >= 1.0][:400]  # margin 1.0 around x0 + x1 = 0
    labels = (pts[:, 0] + pts[:, 1] > 0).astype(int)
    d = LabeledDataset(pts.reshape(-1, 1, 1, 2), labels, 2)
    g = build_model({"name": "lin", "input_shape": [1, 1, 2],
                     "layers": [{"kind": "flatten"}, {"kind": "dense", "units": 2}, {"kind": "softmax"}]}, seed=0)
    out, hist = train(g, d, TrainConfig(learning_rate=0.05, epochs=50, seed=0))
    assert accuracy(predict(out, d), d.labels) >= 0.99
    assert hist[-1] < hist[0]


def test_training_is_deterministic():
    d = make_synthetic_dataset(3, 8, 6, seed=2)
    cfg = TrainConfig(learning_rate=0.05, epochs=3, batch_size=5, seed=9)
    a, ha = train(small_cnn(), d, cfg)
    b, hb = train(small_cnn(), d, cfg)
    assert tensors_equal(a, b) and ha == hb


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_is_reported():
    d = make_synthetic_dataset(3, 8, 6, seed=2)
    with pytest.raises(DivergenceError):
        train(small_cnn(), d, TrainConfig(learning_rate=1e36, momentum=0.0, epochs=5, batch_size=4))


def test_class_count_mismatch():
    d = make_synthetic_dataset(4, 3, 6, seed=2)
    with pytest.raises(DimensionError):
        train(small_cnn(classes=3), d, TrainConfig(epochs=1))
