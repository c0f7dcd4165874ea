import math

import numpy as np
import numpy.testing as npt
import pytest

from spoofsim import (AdamState, DenseNetwork, Gradients, TrainConfig,
                      adam_step, backward, cross_entropy, cross_entropy_grad,
                      finite_diff_check, forward, init_network, load_model,
                      predict, save_model)
from spoofsim.nn import LINEAR, RELU, SOFTMAX


def small_net(sizes=(7, 6, 5, 3), seed=0):
    return init_network(list(sizes), rng=np.random.default_rng(seed))


class TestInit:
    def test_classifier_shapes(self):
        net = init_network([800, 50, 50, 50, 2], rng=np.random.default_rng(0))
        assert [w.shape for w in net.weights] == [(50, 800), (50, 50), (50, 50), (2, 50)]
        assert net.activations == [RELU, RELU, RELU, SOFTMAX]
        assert all(np.all(b == 0) for b in net.biases)

    def test_generator_shape(self):
        net = init_network([100, 128, 128, 128, 800],
                           [RELU, RELU, RELU, LINEAR],
                           rng=np.random.default_rng(0))
        assert net.layer_sizes == [100, 128, 128, 128, 800]

    def test_deterministic_under_seed(self):
        a = small_net(seed=3)
        b = small_net(seed=3)
        for wa, wb in zip(a.weights, b.weights):
            npt.assert_array_equal(wa, wb)

    def test_nonpositive_size_rejected(self):
        with pytest.raises(ValueError):
            init_network([4, 0, 2], rng=np.random.default_rng(0))

    def test_softmax_only_at_output(self):
        with pytest.raises(ValueError):
            DenseNetwork([np.ones((2, 3)), np.ones((2, 2))],
                         [np.zeros(2), np.zeros(2)], [SOFTMAX, SOFTMAX])

    def test_dimension_chain_enforced(self):
        with pytest.raises(ValueError):
            DenseNetwork([np.ones((4, 3)), np.ones((2, 5))],
                         [np.zeros(4), np.zeros(2)], [RELU, LINEAR])


class TestForward:
    def test_symmetric_softmax(self):
        net = DenseNetwork([np.zeros((2, 2))], [np.zeros(2)], [SOFTMAX])
        out, _ = forward(net, np.array([3.0, -1.0]))
        npt.assert_allclose(out, [0.5, 0.5])

    def test_identity_linear_layer(self):
        net = DenseNetwork([np.eye(4)], [np.zeros(4)], [LINEAR])
        x = np.array([1.0, -2.0, 3.5, 0.0])
        out, _ = forward(net, x)
        npt.assert_array_equal(out, x)

    def test_against_independent_reimplementation(self):
        rng = np.random.default_rng(8)
        net = small_net(seed=8)
        x = rng.standard_normal(7)
        out, _ = forward(net, x)
        # plain-loop oracle of the same arithmetic
        a = x.copy()
        for w, b, act in zip(net.weights, net.biases, net.activations):
            z = np.array([float(np.dot(w[i], a)) + b[i] for i in range(w.shape[0])])
            if act == RELU:
                a = np.array([max(0.0, v) for v in z])
            elif act == SOFTMAX:
                e = np.exp(z - max(z))
                a = e / e.sum()
            else:
                a = z
        npt.assert_allclose(out, a, atol=1e-12)

    def test_softmax_rows_sum_to_one(self):
        rng = np.random.default_rng(1)
        net = small_net(seed=1)
        out, _ = forward(net, rng.standard_normal((40, 7)) * 100)
        npt.assert_allclose(out.sum(axis=1), 1.0, atol=1e-9)
        assert np.all(out > 0)

    def test_width_mismatch_rejected(self):
        with pytest.raises(ValueError):
            forward(small_net(), np.zeros(6))

    def test_predict_matches_forward(self):
        rng = np.random.default_rng(2)
        net = small_net(seed=2)
        x = rng.standard_normal((5, 7))
        npt.assert_array_equal(predict(net, x), forward(net, x)[0])


class TestCrossEntropy:
    def test_perfect_prediction(self):
        assert cross_entropy([1.0, 0.0], [1.0, 0.0]) == 0.0

    def test_uniform_prediction(self):
        npt.assert_allclose(cross_entropy([0.5, 0.5], [1.0, 0.0]), math.log(2),
                            rtol=1e-12)

    def test_confidently_wrong(self):
        npt.assert_allclose(cross_entropy([0.9, 0.1], [0.0, 1.0]),
                            -math.log(0.1), rtol=1e-12)

    def test_nonnegative_and_zero_only_at_label(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            z = rng.standard_normal(4)
            p = np.exp(z) / np.exp(z).sum()
            y = np.zeros(4)
            y[rng.integers(4)] = 1.0
            assert cross_entropy(p, y) >= 0.0

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            cross_entropy([0.5, 0.5], [1.0, 0.0, 0.0])

    def test_unnormalised_prediction_rejected(self):
        with pytest.raises(ValueError):
            cross_entropy([0.6, 0.6], [1.0, 0.0])

    def test_non_one_hot_label_rejected(self):
        with pytest.raises(ValueError):
            cross_entropy([0.5, 0.5], [0.5, 0.5])

    def test_batch_mean(self):
        p = np.array([[0.5, 0.5], [1.0, 0.0]])
        y = np.array([[1.0, 0.0], [1.0, 0.0]])
        npt.assert_allclose(cross_entropy(p, y), math.log(2) / 2, rtol=1e-12)


class TestBackward:
    def test_zero_loss_gradient_gives_zero_parameter_gradients(self):
        net = small_net()
        out, cache = forward(net, np.ones(7))
        grads = backward(net, cache, np.zeros(3))
        assert all(np.all(g == 0) for g in grads.d_weights)
        assert all(np.all(g == 0) for g in grads.d_biases)

    @pytest.mark.parametrize("sizes", [(7, 6, 5, 3), (4, 9, 2), (5, 5, 5, 5, 4)])
    def test_matches_finite_differences(self, sizes):
        rng = np.random.default_rng(sum(sizes))
        net = small_net(sizes, seed=sum(sizes))
        x = rng.standard_normal(sizes[0])
        label = np.zeros(sizes[-1])
        label[0] = 1.0
        assert finite_diff_check(net, x, label, h=1e-5) < 1e-4

    def test_softmax_cross_entropy_composite_equals_residual(self):
        rng = np.random.default_rng(4)
        net = small_net(seed=4)
        x = rng.standard_normal(7)
        label = np.array([0.0, 1.0, 0.0])
        out, cache = forward(net, x)
        grads = backward(net, cache, cross_entropy_grad(out, label))
        # with softmax + cross-entropy, d(loss)/d(last pre-activation) = p - y,
        # so the last bias gradient equals the residual directly
        npt.assert_allclose(grads.d_biases[-1], out - label, atol=1e-12)

    def test_input_gradient_shape(self):
        net = small_net()
        x = np.ones((4, 7))
        out, cache = forward(net, x)
        grads = backward(net, cache, np.ones_like(out))
        assert grads.d_input.shape == x.shape

    def test_stale_cache_rejected(self):
        net = small_net()
        other = small_net((7, 4, 3))
        _, cache = forward(other, np.ones(7))
        with pytest.raises(ValueError):
            backward(net, cache, np.zeros(3))


class TestAdam:
    def test_zero_gradient_is_noop(self):
        net = small_net()
        before = [w.copy() for w in net.weights]
        grads = Gradients([np.zeros_like(w) for w in net.weights],
                          [np.zeros_like(b) for b in net.biases], None)
        adam_step(net, grads, AdamState.for_network(net), TrainConfig())
        for w0, w1 in zip(before, net.weights):
            npt.assert_array_equal(w0, w1)

    def test_constant_gradient_step_approaches_learning_rate(self):
        net = DenseNetwork([np.zeros((1, 1))], [np.zeros(1)], [LINEAR])
        state = AdamState.for_network(net)
        cfg = TrainConfig(learning_rate=1e-3)
        grads = Gradients([np.array([[0.37]])], [np.array([0.37])], None)
        for _ in range(2000):
            adam_step(net, grads, state, cfg)
        last = net.weights[0][0, 0]
        adam_step(net, grads, state, cfg)
        npt.assert_allclose(last - net.weights[0][0, 0], cfg.learning_rate,
                            rtol=1e-4)

    def test_same_seed_same_trajectory(self):
        def run():
            rng = np.random.default_rng(5)
            net = small_net(seed=5)
            state = AdamState.for_network(net)
            x = rng.standard_normal((20, 7))
            y = np.zeros((20, 3))
            y[np.arange(20), rng.integers(0, 3, 20)] = 1.0
            for _ in range(50):
                out, cache = forward(net, x)
                adam_step(net, backward(net, cache, cross_entropy_grad(out, y)),
                          state, TrainConfig())
            return net
        a, b = run(), run()
        for wa, wb in zip(a.weights, b.weights):
            npt.assert_array_equal(wa, wb)

    def test_state_mismatch_rejected(self):
        net = small_net()
        other = small_net((7, 4, 3))
        grads = Gradients([np.zeros_like(w) for w in net.weights],
                          [np.zeros_like(b) for b in net.biases], None)
        with pytest.raises(ValueError):
            adam_step(net, grads, AdamState.for_network(other), TrainConfig())

    def test_linearly_separable_toy_set_reaches_full_accuracy(self):
        rng = np.random.default_rng(6)
        x = np.concatenate([rng.standard_normal((50, 2)) + [3, 3],
                            rng.standard_normal((50, 2)) - [3, 3]])
        labels = np.array([0] * 50 + [1] * 50)
        y = np.zeros((100, 2))
        y[np.arange(100), labels] = 1.0
        net = init_network([2, 8, 2], rng=rng)
        state = AdamState.for_network(net)
        cfg = TrainConfig(learning_rate=1e-2, batch_size=100)
        for _ in range(500):
            out, cache = forward(net, x)
            adam_step(net, backward(net, cache, cross_entropy_grad(out, y)),
                      state, cfg)
        assert np.all(np.argmax(predict(net, x), axis=1) == labels)


class TestFiniteDiffCheck:
    def test_subsampled_check_is_deterministic_and_small(self):
        net = init_network([30, 16, 8, 2], rng=np.random.default_rng(7))
        x = np.random.default_rng(8).standard_normal(30)
        label = np.array([1.0, 0.0])
        err = finite_diff_check(net, x, label, h=1e-5, max_per_tensor=10,
                                rng=np.random.default_rng(9))
        assert err < 1e-4

    def test_bad_h_rejected(self):
        with pytest.raises(ValueError):
            finite_diff_check(small_net(), np.ones(7), np.array([1.0, 0, 0]), h=0)


class TestPersistence:
    def test_round_trip_is_bit_exact(self, tmp_path):
        net = init_network([12, 9, 4], [RELU, SOFTMAX],
                           rng=np.random.default_rng(10))
        path = tmp_path / "model.bin"
        save_model(net, path)
        loaded = load_model(path)
        assert loaded.activations == net.activations
        for a, b in zip(net.weights + net.biases, loaded.weights + loaded.biases):
            npt.assert_array_equal(a, b)

    def test_all_activation_codes_round_trip(self, tmp_path):
        net = init_network([3, 5, 5, 2], [RELU, LINEAR, SOFTMAX],
                           rng=np.random.default_rng(11))
        save_model(net, tmp_path / "m.bin")
        assert load_model(tmp_path / "m.bin").activations == [RELU, LINEAR, SOFTMAX]

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"NOTMODEL" + b"\x00" * 32)
        with pytest.raises(ValueError):
            load_model(path)

    def test_trailing_bytes_rejected(self, tmp_path):
        net = init_network([3, 2], rng=np.random.default_rng(12))
        path = tmp_path / "m.bin"
        save_model(net, path)
        path.write_bytes(path.read_bytes() + b"\x00")
        with pytest.raises(ValueError):
            load_model(path)
