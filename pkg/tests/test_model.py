"""Tests for the toy MLP: forward, gradients, training, serialization."""

import numpy as np
import pytest

from mdda.data import LabeledDataset
from mdda.image import DimensionMismatchError
from mdda.model import (
    ClassifierModel,
    TrainConfig,
    accuracy,
    forward,
    forward_batch,
    init_model,
    input_gradient_from_dlogits,
    load_model,
    loss_and_input_gradient,
    predict,
    predict_batch,
    save_model,
    softmax,
    train,
)


def forward_loop_oracle(model, img):
    """Per-unit Python loops; no matrix ops shared with the implementation."""
    h = [float(v) for v in np.asarray(img).ravel()]
    for li, (w, b) in enumerate(zip(model.weights, model.biases)):
        out = []
        for unit in range(w.shape[0]):
            z = float(b[unit])
            for k in range(w.shape[1]):
                z += float(w[unit, k]) * h[k]
            if li < len(model.weights) - 1:
                z = max(z, 0.0)
            out.append(z)
        h = out
    return np.array(h)


def random_model(seed, dims=(3, 4, 1), hidden=(5,), k=3):
    return init_model(dims, k, hidden_sizes=hidden, seed=seed)


def random_image(seed, dims=(3, 4, 1)):
    return np.random.default_rng(seed).uniform(size=dims)


def linear_model(w, b, dims):
    return ClassifierModel(
        input_dims=dims,
        n_classes=w.shape[0],
        weights=(w,),
        biases=(b,),
    )


def test_forward_matches_loop_oracle():
    for seed in range(5):
        model = random_model(seed)
        img = random_image(seed + 50)
        np.testing.assert_allclose(forward(model, img), forward_loop_oracle(model, img), atol=1e-12)


def test_forward_two_hidden_layers_matches_oracle():
    model = init_model((2, 2, 1), 3, hidden_sizes=(6, 4), seed=9)
    img = random_image(1, (2, 2, 1))
    np.testing.assert_allclose(forward(model, img), forward_loop_oracle(model, img), atol=1e-12)


def test_forward_batch_matches_single():
    model = random_model(2)
    imgs = np.stack([random_image(i) for i in range(4)])
    batch = forward_batch(model, imgs)
    for i in range(4):
        # batch and single matmuls may reduce in different orders
        np.testing.assert_allclose(batch[i], forward(model, imgs[i]), atol=1e-12)


def test_linear_model_closed_form():
    # no hidden layer: logits = W x + b exactly
    rng = np.random.default_rng(0)
    w = rng.normal(size=(3, 4))
    b = rng.normal(size=3)
    model = linear_model(w, b, (2, 2, 1))
    img = rng.uniform(size=(2, 2, 1))
    np.testing.assert_allclose(forward(model, img), w @ img.ravel() + b, atol=1e-14)


def test_linear_model_input_gradient_closed_form():
    # cross-entropy input gradient of a linear model is W^T (p - onehot)
    rng = np.random.default_rng(1)
    w = rng.normal(size=(3, 4))
    b = rng.normal(size=3)
    model = linear_model(w, b, (2, 2, 1))
    img = rng.uniform(size=(2, 2, 1))
    label = 1
    p = softmax(w @ img.ravel() + b)
    expected = w.T @ (p - np.eye(3)[label])
    _, grad = loss_and_input_gradient(model, img, label)
    np.testing.assert_allclose(grad.ravel(), expected, atol=1e-12)


def test_gradient_matches_finite_differences():
    h = 1e-5
    for seed in range(3):
        model = random_model(seed, dims=(4, 4, 1), hidden=(8,), k=4)
        img = random_image(seed + 9, (4, 4, 1))
        label = seed % 4
        _, grad = loss_and_input_gradient(model, img, label)
        coords = np.random.default_rng(seed).integers(0, img.size, size=12)
        for flat in coords:
            idx = np.unravel_index(flat, img.shape)
            plus, minus = img.copy(), img.copy()
            plus[idx] += h
            minus[idx] -= h
            lp, _ = loss_and_input_gradient(model, plus, label)
            lm, _ = loss_and_input_gradient(model, minus, label)
            fd = (lp - lm) / (2 * h)
            denom = max(abs(fd), abs(grad[idx]), 1e-8)
            assert abs(fd - grad[idx]) / denom <= 1e-4


def test_input_gradient_batch_matches_single():
    model = random_model(3)
    imgs = np.stack([random_image(i + 20) for i in range(3)])
    dlogits = np.random.default_rng(7).normal(size=(3, model.n_classes))
    batch = input_gradient_from_dlogits(model, imgs, dlogits)
    for i in range(3):
        single = input_gradient_from_dlogits(model, imgs[i], dlogits[i])
        np.testing.assert_allclose(batch[i], single, atol=1e-14)


def test_softmax_properties():
    logits = np.array([0.3, -1.2, 2.5])
    p = softmax(logits)
    assert p.sum() == pytest.approx(1.0)
    assert np.all(p > 0)
    # overflow safety
    big = softmax(np.array([1000.0, 0.0]))
    assert np.isfinite(big).all() and big[0] == pytest.approx(1.0)
    # zero logits -> uniform
    np.testing.assert_allclose(softmax(np.zeros(4)), 0.25)


def test_predict_tie_breaks_to_lowest_index():
    model = linear_model(np.zeros((4, 4)), np.zeros(4), (2, 2, 1))
    assert predict(model, np.full((2, 2, 1), 0.5)) == 0


def test_loss_label_validation():
    model = random_model(0)
    with pytest.raises(ValueError):
        loss_and_input_gradient(model, random_image(0), 99)


def test_model_shape_validation():
    with pytest.raises(DimensionMismatchError):
        ClassifierModel(
            input_dims=(2, 2, 1),
            n_classes=3,
            weights=(np.zeros((5, 4)), np.zeros((3, 6))),  # 6 != 5
            biases=(np.zeros(5), np.zeros(3)),
        )
    with pytest.raises(DimensionMismatchError):
        ClassifierModel(input_dims=(2, 2, 1), n_classes=3,
                        weights=(np.zeros((2, 4)),), biases=(np.zeros(2),))
    with pytest.raises(ValueError):
        linear_model(np.full((3, 4), np.nan), np.zeros(3), (2, 2, 1))


def test_init_model_deterministic_and_he_scaled():
    a = init_model((8, 8, 1), 4, seed=5)
    b = init_model((8, 8, 1), 4, seed=5)
    for wa, wb in zip(a.weights, b.weights):
        np.testing.assert_array_equal(wa, wb)
    c = init_model((8, 8, 1), 4, seed=6)
    assert not np.array_equal(a.weights[0], c.weights[0])
    # He scale: empirical std of the first layer near sqrt(2/fan_in)
    expected = np.sqrt(2.0 / 64)
    assert a.weights[0].std() == pytest.approx(expected, rel=0.1)
    assert np.all(a.biases[0] == 0.0)


def tiny_dataset(seed=0, n=40):
    """Linearly separable two-class toy: bright-left vs bright-right."""
    rng = np.random.default_rng(seed)
    imgs = np.zeros((n, 2, 2, 1))
    labels = np.zeros(n, dtype=np.int64)
    for i in range(n):
        label = i % 2
        imgs[i, :, label, 0] = 0.8 + 0.1 * rng.uniform()
        imgs[i] += 0.05 * rng.uniform(size=(2, 2, 1))
        labels[i] = label
    return LabeledDataset(images=np.clip(imgs, 0, 1), labels=labels,
                          class_names=("left", "right"), split="train")


def test_train_deterministic():
    ds = tiny_dataset()
    cfg = TrainConfig(hidden_sizes=(6,), epochs=4, batch_size=8, seed=3)
    a, b = train(ds, cfg), train(ds, cfg)
    for wa, wb in zip(a.weights, b.weights):
        np.testing.assert_array_equal(wa, wb)


def test_train_zero_epochs_returns_initialization():
    ds = tiny_dataset()
    cfg = TrainConfig(hidden_sizes=(6,), epochs=0, seed=3)
    trained = train(ds, cfg)
    fresh = init_model((2, 2, 1), 2, hidden_sizes=(6,), seed=3)
    for wa, wb in zip(trained.weights, fresh.weights):
        np.testing.assert_array_equal(wa, wb)


def test_train_fits_separable_data():
    ds = tiny_dataset()
    model = train(ds, TrainConfig(hidden_sizes=(6,), epochs=20, batch_size=8, seed=0))
    assert accuracy(model, ds) == 1.0


def test_train_empty_dataset_rejected():
    ds = tiny_dataset()
    empty = LabeledDataset(images=ds.images[:0], labels=ds.labels[:0],
                           class_names=ds.class_names, split="train")
    with pytest.raises(ValueError):
        train(empty)


def test_accuracy_counts_matches_manual():
    ds = tiny_dataset(n=10)
    model = train(ds, TrainConfig(hidden_sizes=(4,), epochs=2, seed=1))
    preds = predict_batch(model, ds.images)
    manual = sum(int(p) == int(t) for p, t in zip(preds, ds.labels)) / 10
    assert accuracy(model, ds) == pytest.approx(manual)


def test_save_load_round_trip(tmp_path):
    model = train(tiny_dataset(), TrainConfig(hidden_sizes=(5,), epochs=2, seed=2))
    path = tmp_path / "m.bin"
    save_model(model, path)
    back = load_model(path)
    assert back.input_dims == model.input_dims
    assert back.n_classes == model.n_classes
    assert back.hidden_sizes == model.hidden_sizes
    for wa, wb in zip(model.weights, back.weights):
        np.testing.assert_array_equal(wa, wb)
    for ba, bb in zip(model.biases, back.biases):
        np.testing.assert_array_equal(ba, bb)
    img = random_image(0, (2, 2, 1))
    np.testing.assert_array_equal(forward(model, img), forward(back, img))


def test_load_rejects_bad_files(tmp_path):
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"NOTAMODEL")
    with pytest.raises(ValueError):
        load_model(bad)
    model = init_model((2, 2, 1), 2, hidden_sizes=(3,), seed=0)
    path = tmp_path / "m.bin"
    save_model(model, path)
    path.write_bytes(path.read_bytes() + b"\x00")
    with pytest.raises(ValueError):
        load_model(path)
