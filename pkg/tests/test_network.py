"""Feedforward network: initialization, forward pass, gradients, SGD."""

import numpy as np
import pytest

from stforecast.errors import DivergenceError
from stforecast.network import (Network, NetworkConfig, TrainConfig,
                                backprop_gradients, forward, forward_batch,
                                init_network, learning_rate, load_network,
                                mse, save_network, train, _train_loop)


def logistic(z):
    return 1.0 / (1.0 + np.exp(-z))


def tiny_network(activation="logistic"):
    w1 = np.array([[0.3, -0.2], [0.1, 0.4], [-0.5, 0.2]])
    b1 = np.array([0.05, -0.1, 0.2])
    w2 = np.array([0.7, -0.3, 0.5])
    return Network(w1, b1, w2, 0.1, activation)


class TestInitNetwork:
    def test_matches_the_documented_draw_order(self):
        cfg = NetworkConfig(input_dim=4, hidden_units=3, alpha_rng=2e-3,
                            beta_rng=-0.5, seed=11)
        net = init_network(cfg)
        rng = np.random.default_rng(11)
        lo = 2e-3 * -0.5
        assert np.array_equal(net.w1, lo + 2e-3 * rng.random((3, 4)))
        assert np.array_equal(net.b1, 2e-3 * rng.random(3))
        assert np.array_equal(net.w2, lo + 2e-3 * rng.random(3))
        assert net.b2 == 2e-3 * rng.random(())

    def test_ranges(self):
        net = init_network(NetworkConfig(input_dim=50, hidden_units=40,
                                         alpha_rng=1e-2, beta_rng=-0.5, seed=3))
        assert np.all(net.w1 >= -5e-3) and np.all(net.w1 < 5e-3)
        assert np.all(net.w2 >= -5e-3) and np.all(net.w2 < 5e-3)
        assert np.all(net.b1 >= 0.0) and np.all(net.b1 < 1e-2)
        assert 0.0 <= net.b2 < 1e-2

    def test_same_seed_same_network_different_seed_different(self):
        cfg = NetworkConfig(input_dim=3, hidden_units=2, seed=7)
        a, b = init_network(cfg), init_network(cfg)
        assert np.array_equal(a.w1, b.w1) and a.b2 == b.b2
        c = init_network(NetworkConfig(input_dim=3, hidden_units=2, seed=8))
        assert not np.array_equal(a.w1, c.w1)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            NetworkConfig(input_dim=0, hidden_units=1)
        with pytest.raises(ValueError):
            NetworkConfig(input_dim=1, hidden_units=0)
        with pytest.raises(ValueError):
            NetworkConfig(input_dim=1, hidden_units=1, activation="tanh")


class TestNetworkContainer:
    def test_weights_are_read_only_copies(self):
        w1 = np.zeros((2, 2))
        net = Network(w1, np.zeros(2), np.zeros(2), 0.0, "relu")
        w1[0, 0] = 9.0
        assert net.w1[0, 0] == 0.0
        with pytest.raises(ValueError):
            net.w1[0, 0] = 1.0

    def test_shape_and_value_validation(self):
        with pytest.raises(ValueError):
            Network(np.zeros(2), np.zeros(2), np.zeros(2), 0.0, "relu")
        with pytest.raises(ValueError):
            Network(np.zeros((2, 2)), np.zeros(3), np.zeros(2), 0.0, "relu")
        with pytest.raises(ValueError):
            Network(np.full((2, 2), np.nan), np.zeros(2), np.zeros(2), 0.0,
                    "relu")
        with pytest.raises(ValueError):
            Network(np.zeros((2, 2)), np.zeros(2), np.zeros(2), np.inf, "relu")
        with pytest.raises(ValueError):
            Network(np.zeros((2, 2)), np.zeros(2), np.zeros(2), 0.0, "step")

    def test_dimension_properties(self):
        net = tiny_network()
        assert (net.input_dim, net.hidden_units) == (2, 3)


class TestForward:
    def test_logistic_against_hand_computation(self):
        net = tiny_network("logistic")
        x = np.array([0.8, -0.4])
        hidden = logistic(net.b1 + net.w1 @ x)
        expected = logistic(0.1 + net.w2 @ hidden)
        assert forward(net, x) == pytest.approx(expected, rel=1e-15)

    def test_relu_against_hand_computation(self):
        net = tiny_network("relu")
        x = np.array([0.8, -0.4])
        hidden = np.maximum(net.b1 + net.w1 @ x, 0.0)
        expected = max(0.1 + net.w2 @ hidden, 0.0)
        assert forward(net, x) == pytest.approx(expected, rel=1e-15)

    def test_batch_agrees_with_single_inputs(self, rng):
        net = tiny_network("logistic")
        inputs = rng.random((10, 2))
        batch = forward_batch(net, inputs)
        assert batch.shape == (10,)
        for row, out in zip(inputs, batch):
            assert forward(net, row) == out

    def test_input_shape_errors(self):
        net = tiny_network()
        with pytest.raises(ValueError):
            forward(net, np.zeros(3))
        with pytest.raises(ValueError):
            forward_batch(net, np.zeros((4, 3)))

    def test_logistic_saturation_is_stable(self):
        net = Network([[1.0]], [0.0], [1.0], 0.0, "logistic")
        with np.errstate(over="raise"):
            low = forward(net, np.array([-800.0]))
            high = forward(net, np.array([800.0]))
        # sigma(-800) underflows cleanly to 0 and sigma(800) to 1, so the
        # outputs are sigma(0) and sigma(1) exactly.
        assert low == 0.5
        assert high == pytest.approx(logistic(1.0), rel=1e-15)

    def test_mse_oracle(self):
        net = tiny_network("logistic")
        inputs = np.array([[0.1, 0.2], [0.5, -0.5]])
        targets = np.array([0.4, 0.6])
        outputs = forward_batch(net, inputs)
        expected = np.mean((targets - outputs) ** 2)
        assert mse(net, inputs, targets) == pytest.approx(expected, rel=1e-15)


def finite_difference_gradients(net, x, target, h=1e-6):
    """Central differences of the squared error through the public forward."""

    def loss(w1, b1, w2, b2):
        return (target - forward(Network(w1, b1, w2, b2, net.activation), x)) ** 2

    args = [net.w1.copy(), net.b1.copy(), net.w2.copy(), net.b2]
    grads = []
    for k, arr in enumerate(args[:3]):
        g = np.zeros_like(arr)
        for idx in np.ndindex(arr.shape):
            plus, minus = [a.copy() for a in args[:3]], [a.copy() for a in args[:3]]
            plus[k][idx] += h
            minus[k][idx] -= h
            g[idx] = (loss(*plus, args[3]) - loss(*minus, args[3])) / (2 * h)
        grads.append(g)
    gb2 = (loss(*args[:3], args[3] + h) - loss(*args[:3], args[3] - h)) / (2 * h)
    grads.append(gb2)
    return grads


class TestBackprop:
    def test_matches_central_differences_for_logistic(self, rng):
        net = init_network(NetworkConfig(input_dim=5, hidden_units=4,
                                         alpha_rng=0.5, seed=2,
                                         activation="logistic"))
        x = rng.random(5)
        target = 0.3
        grads = backprop_gradients(net, x, target)
        fd_w1, fd_b1, fd_w2, fd_b2 = finite_difference_gradients(net, x, target)
        assert np.allclose(grads.w1, fd_w1, rtol=1e-5, atol=1e-10)
        assert np.allclose(grads.b1, fd_b1, rtol=1e-5, atol=1e-10)
        assert np.allclose(grads.w2, fd_w2, rtol=1e-5, atol=1e-10)
        assert grads.b2 == pytest.approx(fd_b2, rel=1e-5)

    def test_matches_central_differences_for_relu_off_the_kink(self):
        # All pre-activations are far from zero, so the finite-difference
        # probe stays on one side of every kink.
        net = Network([[1.0, 0.5], [-0.8, 0.6]], [0.5, 0.3], [0.9, 0.8], 0.3,
                      "relu")
        x = np.array([1.0, 2.0])
        grads = backprop_gradients(net, x, 0.5)
        fd_w1, fd_b1, fd_w2, fd_b2 = finite_difference_gradients(net, x, 0.5)
        assert np.allclose(grads.w1, fd_w1, rtol=1e-5, atol=1e-9)
        assert np.allclose(grads.b1, fd_b1, rtol=1e-5, atol=1e-9)
        assert np.allclose(grads.w2, fd_w2, rtol=1e-5, atol=1e-9)
        assert grads.b2 == pytest.approx(fd_b2, rel=1e-5)

    def test_relu_kink_uses_zero_subgradient(self):
        # Second hidden unit sits exactly at z = 0: it must contribute no
        # gradient to its own weights.
        net = Network([[1.0, 0.0], [0.0, 0.0]], [0.2, 0.0], [0.5, 0.5], 0.1,
                      "relu")
        grads = backprop_gradients(net, np.array([1.0, 1.0]), 2.0)
        assert grads.b1[1] == 0.0
        assert np.array_equal(grads.w1[1], [0.0, 0.0])
        assert grads.b1[0] != 0.0

    def test_input_shape_error(self):
        with pytest.raises(ValueError):
            backprop_gradients(tiny_network(), np.zeros(5), 0.0)


class TestLearningRate:
    def test_hyperbolic_decay_formula(self):
        assert learning_rate(0.2, 0) == 0.2
        assert learning_rate(0.2, 10000) == pytest.approx(0.1, rel=1e-15)
        assert learning_rate(0.5, 2500) == pytest.approx(0.4, rel=1e-15)


class TestTrain:
    @staticmethod
    def sgd_oracle(net, inputs, targets, tcfg):
        """Replay SGD through the public gradient function."""
        rng = np.random.default_rng(tcfg.seed)
        idx = rng.integers(0, inputs.shape[0], size=tcfg.n_steps * tcfg.batch_size)
        w1, b1, w2, b2 = net.w1.copy(), net.b1.copy(), net.w2.copy(), net.b2
        vw1 = np.zeros_like(w1)
        vb1 = np.zeros_like(b1)
        vw2 = np.zeros_like(w2)
        vb2 = 0.0
        for n in range(tcfg.n_steps):
            gw1 = np.zeros_like(w1)
            gb1 = np.zeros_like(b1)
            gw2 = np.zeros_like(w2)
            gb2 = 0.0
            current = Network(w1, b1, w2, b2, net.activation)
            for s in range(tcfg.batch_size):
                p = idx[n * tcfg.batch_size + s]
                g = backprop_gradients(current, inputs[p], targets[p])
                gw1 += g.w1
                gb1 += g.b1
                gw2 += g.w2
                gb2 += g.b2
            scale = learning_rate(tcfg.eta, n) / tcfg.batch_size
            vw1 = tcfg.momentum * vw1 - scale * gw1
            vb1 = tcfg.momentum * vb1 - scale * gb1
            vw2 = tcfg.momentum * vw2 - scale * gw2
            vb2 = tcfg.momentum * vb2 - scale * gb2
            w1, b1, w2, b2 = w1 + vw1, b1 + vb1, w2 + vw2, b2 + vb2
        return w1, b1, w2, b2

    @pytest.fixture()
    def problem(self, rng):
        net = init_network(NetworkConfig(input_dim=3, hidden_units=4,
                                         alpha_rng=0.3, seed=5,
                                         activation="logistic"))
        inputs = rng.random((12, 3))
        targets = rng.random(12)
        return net, inputs, targets

    def test_single_step_is_one_gradient_descent_update(self, problem):
        net, inputs, targets = problem
        tcfg = TrainConfig(eta=0.4, momentum=0.0, n_steps=1, seed=9)
        result = train(net, (inputs, targets), tcfg)
        w1, b1, w2, b2 = self.sgd_oracle(net, inputs, targets, tcfg)
        assert np.allclose(result.network.w1, w1, rtol=1e-12, atol=1e-15)
        assert np.allclose(result.network.b1, b1, rtol=1e-12, atol=1e-15)
        assert np.allclose(result.network.w2, w2, rtol=1e-12, atol=1e-15)
        assert result.network.b2 == pytest.approx(b2, rel=1e-12)

    def test_momentum_and_decay_over_several_steps(self, problem):
        net, inputs, targets = problem
        tcfg = TrainConfig(eta=0.3, momentum=0.6, n_steps=7, seed=13)
        result = train(net, (inputs, targets), tcfg)
        w1, b1, w2, b2 = self.sgd_oracle(net, inputs, targets, tcfg)
        assert np.allclose(result.network.w1, w1, rtol=1e-10, atol=1e-13)
        assert np.allclose(result.network.b1, b1, rtol=1e-10, atol=1e-13)
        assert np.allclose(result.network.w2, w2, rtol=1e-10, atol=1e-13)
        assert result.network.b2 == pytest.approx(b2, rel=1e-10)

    def test_batch_updates_average_the_gradients(self, problem):
        net, inputs, targets = problem
        tcfg = TrainConfig(eta=0.4, momentum=0.0, n_steps=2, seed=21,
                           batch_size=3)
        result = train(net, (inputs, targets), tcfg)
        w1, b1, w2, b2 = self.sgd_oracle(net, inputs, targets, tcfg)
        assert np.allclose(result.network.w1, w1, rtol=1e-10, atol=1e-13)
        assert result.network.b2 == pytest.approx(b2, rel=1e-10)

    def test_error_clip_caps_the_update_but_not_the_trace(self):
        # One relu unit pinned on: output is b2 + w2*x with x = 1, so the
        # prediction error against target 5 is far beyond the clip.
        net = Network([[1.0]], [1.0], [1.0], 0.5, "relu")
        inputs = np.array([[1.0]])
        targets = np.array([5.0])
        yhat = forward(net, inputs[0])
        clipped = train(net, (inputs, targets),
                        TrainConfig(eta=0.1, n_steps=1, error_clip=0.5))
        # Same clipped error arises unclipped from a target 0.5 above yhat.
        surrogate = train(net, (inputs, np.array([yhat + 0.5])),
                          TrainConfig(eta=0.1, n_steps=1))
        assert np.array_equal(clipped.network.w1, surrogate.network.w1)
        assert np.array_equal(clipped.network.w2, surrogate.network.w2)
        assert clipped.network.b2 == surrogate.network.b2
        assert clipped.trace_loss[0] == pytest.approx((5.0 - yhat) ** 2)
        assert surrogate.trace_loss[0] == pytest.approx(0.25)

    def test_loss_trace_is_subsampled_every_thousand_updates(self, problem):
        net, inputs, targets = problem
        result = train(net, (inputs, targets),
                       TrainConfig(eta=0.05, n_steps=2500, seed=3))
        assert np.array_equal(result.trace_steps, [0, 1000, 2000])
        assert np.all(np.isfinite(result.trace_loss))
        assert result.final_mse == pytest.approx(
            mse(result.network, inputs, targets), rel=1e-15)

    def test_accepts_pattern_objects_with_inputs_and_targets(self, problem):
        net, inputs, targets = problem

        class Bundle:
            pass

        bundle = Bundle()
        bundle.inputs, bundle.targets = inputs, targets
        tcfg = TrainConfig(eta=0.1, n_steps=3, seed=1)
        a = train(net, bundle, tcfg)
        b = train(net, (inputs, targets), tcfg)
        assert np.array_equal(a.network.w1, b.network.w1)
        assert a.network.b2 == b.network.b2

    def test_training_is_deterministic_and_leaves_the_input_untouched(
            self, problem):
        net, inputs, targets = problem
        before = net.w1.copy()
        tcfg = TrainConfig(eta=0.2, momentum=0.5, n_steps=50, seed=4)
        a = train(net, (inputs, targets), tcfg)
        b = train(net, (inputs, targets), tcfg)
        assert np.array_equal(a.network.w1, b.network.w1)
        assert a.network.b2 == b.network.b2
        assert np.array_equal(a.trace_loss, b.trace_loss)
        assert np.array_equal(net.w1, before)

    def test_divergence_raises_with_the_update_index(self):
        net = Network([[0.1]], [0.2], [0.3], 0.4, "relu")
        inputs = np.array([[1.0]])
        targets = np.array([10.0])
        with pytest.raises(DivergenceError) as excinfo:
            train(net, (inputs, targets),
                  TrainConfig(eta=1e160, n_steps=5, seed=0))
        assert excinfo.value.step is not None and excinfo.value.step >= 1

    def test_validation_errors(self, problem):
        net, inputs, targets = problem
        tcfg = TrainConfig(eta=0.1)
        with pytest.raises(ValueError):
            train(net, (inputs, targets[:-1]), tcfg)
        with pytest.raises(ValueError):
            train(net, (inputs[:0], targets[:0]), tcfg)
        with pytest.raises(ValueError):
            train(net, (np.zeros((4, 7)), np.zeros(4)), tcfg)

    def test_train_config_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(eta=-0.1)
        with pytest.raises(ValueError):
            TrainConfig(eta=0.1, momentum=1.0)
        with pytest.raises(ValueError):
            TrainConfig(eta=0.1, n_steps=0)
        with pytest.raises(ValueError):
            TrainConfig(eta=0.1, batch_size=0)
        with pytest.raises(ValueError):
            TrainConfig(eta=0.1, error_clip=0.0)


class TestCompiledLoopParity:
    def test_python_fallback_matches_the_compiled_loop(self, rng):
        inputs = rng.random((8, 3))
        targets = rng.random(8)
        sample_idx = rng.integers(0, 8, size=40)
        net = init_network(NetworkConfig(input_dim=3, hidden_units=4,
                                         alpha_rng=0.2, seed=17))
        trace = {}
        for name, loop in (("jit", _train_loop), ("py", _train_loop.py_func)):
            w1, b1, w2 = net.w1.copy(), net.b1.copy(), net.w2.copy()
            b2_box = np.array([net.b2])
            trace_loss = np.full(1, np.nan)
            code = loop(w1, b1, w2, b2_box, inputs, targets, sample_idx,
                        True, 0.3, 0.4, 2, np.inf, trace_loss)
            trace[name] = (w1, b1, w2, b2_box[0], trace_loss[0], code)
        for a, b in zip(trace["jit"], trace["py"]):
            assert np.array_equal(a, b)


class TestNetworkFiles:
    def test_round_trip_is_exact(self, tmp_path, rng):
        net = init_network(NetworkConfig(input_dim=6, hidden_units=5,
                                         alpha_rng=0.77, seed=23,
                                         activation="logistic"))
        path = tmp_path / "net.txt"
        save_network(net, path)
        back = load_network(path)
        assert np.array_equal(back.w1, net.w1)
        assert np.array_equal(back.b1, net.b1)
        assert np.array_equal(back.w2, net.w2)
        assert back.b2 == net.b2
        assert back.activation == "logistic"

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "net.txt"
        path.write_text("")
        with pytest.raises(ValueError, match="empty"):
            load_network(path)

    def test_malformed_header_rejected(self, tmp_path):
        path = tmp_path / "net.txt"
        path.write_text("3 4\n")
        with pytest.raises(ValueError, match="header"):
            load_network(path)

    def test_wrong_line_count_rejected(self, tmp_path):
        path = tmp_path / "net.txt"
        path.write_text("2 2 relu\n0 0\n0 0\n")
        with pytest.raises(ValueError, match="lines"):
            load_network(path)

    def test_wrong_row_width_rejected(self, tmp_path):
        path = tmp_path / "net.txt"
        path.write_text("2 1 relu\n0 0 0\n0\n0\n0\n")
        with pytest.raises(ValueError, match="w1"):
            load_network(path)
