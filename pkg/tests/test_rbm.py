import numpy as np
import pytest

from deepmmc.numeric import DataMatrix, logistic_map, make_rng
from deepmmc.rbm import (
    GAUSSIAN,
    PretrainConfig,
    RbmLayer,
    cd1_step,
    hidden_activation,
    init_rbm_layer,
    pretrain_stack,
    train_rbm_layer,
    visible_reconstruction,
)


def zero_layer(d_vis, d_hid, kind="binary"):
    return RbmLayer(np.zeros((d_vis + 1, d_hid)), np.zeros(d_vis), kind)


class TestActivations:
    def test_zero_weights_give_half(self):
        layer = zero_layer(3, 4)
        out = hidden_activation(layer, np.array([[0.2, 0.9, -1.0]]))
        assert np.array_equal(out, np.full((1, 4), 0.5))

    def test_single_unit_oracle(self):
        # weight 2, hidden bias -1, v=1: logistic(2*1 - 1) = logistic(1)
        layer = RbmLayer(np.array([[2.0], [-1.0]]), np.zeros(1))
        out = hidden_activation(layer, np.array([[1.0]]))
        assert out[0, 0] == pytest.approx(1.0 / (1.0 + np.exp(-1.0)), abs=1e-15)

    def test_rows_independent(self):
        rng = make_rng(0)
        layer = init_rbm_layer(5, 3, "binary", rng)
        v = rng.random((4, 5))
        doubled = hidden_activation(layer, np.vstack([v, v]))
        assert np.array_equal(doubled[:4], doubled[4:])

    def test_dimension_mismatch(self):
        layer = zero_layer(3, 2)
        with pytest.raises(ValueError):
            hidden_activation(layer, np.ones((1, 4)))

    def test_reconstruction_binary_zero(self):
        layer = zero_layer(3, 2)
        out = visible_reconstruction(layer, np.ones((2, 2)))
        assert np.array_equal(out, np.full((2, 3), 0.5))

    def test_reconstruction_gaussian_is_bias(self):
        bias = np.array([1.5, -2.0])
        layer = RbmLayer(np.zeros((3, 4)), bias, GAUSSIAN)
        out = visible_reconstruction(layer, np.ones((3, 4)))
        assert np.array_equal(out, np.tile(bias, (3, 1)))

    def test_reconstruction_oracle(self):
        # weight 2, visible bias 0, h=1: logistic(2)
        layer = RbmLayer(np.array([[2.0], [0.0]]), np.zeros(1))
        out = visible_reconstruction(layer, np.array([[1.0]]))
        assert out[0, 0] == pytest.approx(logistic_map(np.array([2.0]))[0], abs=1e-15)

    def test_reconstruction_dimension_mismatch(self):
        layer = zero_layer(3, 2)
        with pytest.raises(ValueError):
            visible_reconstruction(layer, np.ones((1, 3)))


class TestCd1:
    def test_symmetric_fixed_point_update_is_exactly_zero(self):
        # zero weights and v = 0.5 everywhere: positive and negative
        # statistics coincide regardless of the sampled hidden states
        layer = zero_layer(4, 3)
        cfg = PretrainConfig(momentum=0.0, weight_decay=0.0)
        batch = np.full((8, 4), 0.5)
        updated, err = cd1_step(layer, batch, cfg, make_rng(0))
        assert np.array_equal(updated.weights, layer.weights)
        assert np.array_equal(updated.visible_bias, layer.visible_bias)
        assert err == 0.0

    def test_fixed_seed_is_bit_identical(self):
        rng = make_rng(7)
        layer = init_rbm_layer(6, 4, "binary", rng)
        batch = (make_rng(1).random((10, 6)) > 0.5).astype(float)
        cfg = PretrainConfig()
        a, _ = cd1_step(layer, batch, cfg, make_rng(42))
        b, _ = cd1_step(layer, batch, cfg, make_rng(42))
        assert np.array_equal(a.weights, b.weights)
        assert np.array_equal(a.visible_bias, b.visible_bias)

    def test_dimension_mismatch(self):
        layer = zero_layer(3, 2)
        with pytest.raises(ValueError):
            cd1_step(layer, np.ones((2, 5)), PretrainConfig(), make_rng(0))

    def test_correlated_toy_reconstruction_error_drops(self):
        # two perfectly correlated binary columns, 200 epochs of CD-1;
        # oracle is the reconstruction-error trace itself
        data = np.array([[0, 0], [1, 1], [0, 0], [1, 1], [0, 0], [1, 1]], dtype=float)
        cfg = PretrainConfig(epochs=200, minibatch_size=6, learning_rate=0.2, seed=0)
        layer = init_rbm_layer(2, 4, "binary", make_rng(0))
        _, errors = train_rbm_layer(layer, data, cfg, make_rng(0))
        assert errors[-1] < errors[0]


class TestPretrainStack:
    def test_wine_shape_single_layer(self):
        rng = make_rng(0)
        x = DataMatrix(rng.normal(size=(30, 13)), feature_kind="continuous")
        stack = pretrain_stack(x, [100], PretrainConfig(epochs=1), rng)
        assert len(stack) == 1
        assert stack[0].visible_kind == GAUSSIAN
        assert stack[0].weights.shape == (14, 100)

    def test_mnist_style_three_layers(self):
        rng = make_rng(0)
        x = DataMatrix(make_rng(1).random((20, 784)), feature_kind="binary")
        stack = pretrain_stack(x, [400, 200, 100], PretrainConfig(epochs=0), rng)
        assert [layer.weights.shape for layer in stack] == [(785, 400), (401, 200), (201, 100)]
        assert [layer.visible_kind for layer in stack] == ["binary", "binary", "binary"]

    def test_zero_epochs_returns_initialized_layer(self):
        x = DataMatrix(make_rng(1).random((50, 8)), feature_kind="binary")
        stack = pretrain_stack(x, [2000], PretrainConfig(epochs=0), make_rng(9))
        w = stack[0].weights[:-1]
        assert abs(float(w.mean())) < 1e-3
        assert float(w.std()) == pytest.approx(0.01, rel=0.05)
        assert np.array_equal(stack[0].weights[-1], np.zeros(2000))
        assert np.array_equal(stack[0].visible_bias, np.zeros(8))

    def test_layer_chaining(self):
        x = DataMatrix(make_rng(1).random((15, 6)), feature_kind="binary")
        stack = pretrain_stack(x, [5, 4, 3], PretrainConfig(epochs=2), make_rng(0))
        for lower, upper in zip(stack, stack[1:]):
            assert upper.d_vis == lower.d_hid

    def test_deterministic(self):
        x = DataMatrix(make_rng(1).random((25, 6)), feature_kind="binary")
        cfg = PretrainConfig(epochs=5)
        a = pretrain_stack(x, [4, 3], cfg, make_rng(11))
        b = pretrain_stack(x, [4, 3], cfg, make_rng(11))
        for la, lb in zip(a, b):
            assert np.array_equal(la.weights, lb.weights)
            assert np.array_equal(la.visible_bias, lb.visible_bias)

    def test_empty_layer_sizes_rejected(self):
        x = DataMatrix(np.ones((4, 2)))
        with pytest.raises(ValueError):
            pretrain_stack(x, [], PretrainConfig(), make_rng(0))

    def test_training_progress_over_seeds(self):
        # separable toy data; epoch-mean error in the last quartile of
        # epochs should beat the first quartile for every seed
        rng = make_rng(3)
        protos = np.array([[1, 1, 0, 0, 0, 0], [0, 0, 0, 0, 1, 1]], dtype=float)
        rows = protos[rng.integers(2, size=60)]
        flips = rng.random(rows.shape) < 0.05
        data = np.abs(rows - flips.astype(float))
        cfg = PretrainConfig(epochs=40, minibatch_size=10, learning_rate=0.3)
        q = cfg.epochs // 4
        wins = 0
        for seed in range(5):
            layer = init_rbm_layer(6, 8, "binary", make_rng(seed))
            _, errors = train_rbm_layer(layer, data, cfg, make_rng(seed))
            if errors[-q:].mean() < errors[:q].mean():
                wins += 1
        assert wins == 5


class TestConfigValidation:
    def test_rejects_bad_momentum(self):
        with pytest.raises(ValueError):
            PretrainConfig(momentum=1.0)

    def test_rate_defaults_by_kind(self):
        cfg = PretrainConfig()
        assert cfg.rate_for("binary") == 0.05
        assert cfg.rate_for(GAUSSIAN) == 0.01
        assert PretrainConfig(learning_rate=0.2).rate_for(GAUSSIAN) == 0.2
