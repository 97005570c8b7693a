import numpy as np
import pytest

from osiwae.harness.checks import max_fd_error_mlp
from osiwae.nets import GaussianProposalHead, Mlp


def _set_layer(net, params, index, weight, bias):
    offset, n_in, n_out = net._layout[index]
    params[offset: offset + n_out * n_in] = np.asarray(weight, dtype=float).ravel()
    params[offset + n_out * n_in: offset + n_out * n_in + n_out] = bias
    return params


class TestForward:
    def test_identity_weights_rectify(self):
        # hidden layer with identity weights, identity second layer: output
        # is the rectifier applied to the input
        net = Mlp((2, 2, 2))
        params = np.zeros(net.n_params)
        _set_layer(net, params, 0, np.eye(2), np.zeros(2))
        _set_layer(net, params, 1, np.eye(2), np.zeros(2))
        out, _ = net.forward(params, np.array([[1.0, -1.0]]))
        assert out.tolist() == [[1.0, 0.0]]

    def test_zero_weights_return_bias(self):
        net = Mlp((3, 2))
        params = np.zeros(net.n_params)
        _set_layer(net, params, 0, np.zeros((2, 3)), np.array([0.7, -0.3]))
        rng = np.random.default_rng(0)
        for _ in range(5):
            out, _ = net.forward(params, rng.standard_normal((4, 3)))
            assert np.array_equal(out, np.tile([0.7, -0.3], (4, 1)))

    def test_matches_naive_loop(self):
        # straight-line re-implementation with explicit python loops
        rng = np.random.default_rng(3)
        net = Mlp((3, 5, 2))
        params = net.init_params(rng)
        x = rng.standard_normal((1, 3))
        out, _ = net.forward(params, x)
        layers = net.unpack(params)
        h = x[0]
        for li, (w, b) in enumerate(layers):
            z = np.array([sum(w[o, i] * h[i] for i in range(w.shape[1])) + b[o]
                          for o in range(w.shape[0])])
            h = np.maximum(z, 0.0) if li < len(layers) - 1 else z
        np.testing.assert_array_equal(out[0], h)

    def test_dimension_mismatch_is_an_error(self):
        net = Mlp((3, 2))
        with pytest.raises(ValueError):
            net.forward(net.init_params(np.random.default_rng(0)), np.zeros((1, 4)))


class TestBackward:
    def test_zero_upstream_gives_zero_gradients(self):
        rng = np.random.default_rng(1)
        net = Mlp((2, 4, 3))
        params = net.init_params(rng)
        _, tape = net.forward(params, rng.standard_normal((2, 2)))
        pg, ig = net.backward(params, tape, np.zeros((2, 3)))
        assert not pg.any() and not ig.any()

    def test_scalar_chain_rule(self):
        # w*x + b with upstream 1: d/dw = x, d/db = 1, input grad = w
        net = Mlp((1, 1))
        params = np.array([2.5, 0.3])  # w, b
        x = np.array([[1.7]])
        out, tape = net.forward(params, x)
        assert out[0, 0] == pytest.approx(2.5 * 1.7 + 0.3)
        pg, ig = net.backward(params, tape, np.array([[1.0]]))
        assert pg[0].tolist() == [1.7, 1.0]
        assert ig[0, 0] == 2.5

    def test_gradients_match_finite_differences(self):
        # quantified over 100 random nets and inputs
        assert max_fd_error_mlp(n_nets=100, seed=2) < 1e-6

    def test_stale_tape_is_an_error(self):
        rng = np.random.default_rng(4)
        net = Mlp((2, 3))
        params = net.init_params(rng)
        _, tape = net.forward(params, rng.standard_normal((1, 2)))
        other = params.copy()
        with pytest.raises(ValueError, match="stale"):
            net.backward(other, tape, np.ones((1, 3)))


class TestRectifierAtZero:
    def test_subgradient_at_zero_is_zero_and_consistent(self):
        # pre-activation exactly zero: forward emits 0 and backward blocks
        # the path with the same mask
        net = Mlp((1, 1, 1))
        params = np.zeros(net.n_params)
        _set_layer(net, params, 0, [[1.0]], [-1.0])
        _set_layer(net, params, 1, [[1.0]], [0.0])
        out, tape = net.forward(params, np.array([[1.0]]))
        assert out[0, 0] == 0.0
        assert not tape.masks[0][0, 0]
        pg, ig = net.backward(params, tape, np.array([[1.0]]))
        # hidden weight/bias and the input receive no gradient
        assert ig[0, 0] == 0.0
        assert pg[0, 0] == 0.0 and pg[0, 1] == 0.0


class TestProposalHead:
    def test_log_std_bias_initialization(self):
        rng = np.random.default_rng(5)
        head = GaussianProposalHead(3, 2, hidden=(8,), init_log_std=np.log(0.5))
        params = head.init_params(rng)
        x = rng.standard_normal((6, 3))
        _, log_std, _ = head.forward(params, x)
        assert log_std.shape == (6, 2)
        # zero-bias hidden layers leave the final bias as the output offset
        zero_in = np.zeros((1, 3))
        _, log_std0, _ = head.forward(params, zero_in)
        np.testing.assert_allclose(log_std0, np.log(0.5), atol=1e-12)

    def test_backward_combines_both_nets(self):
        rng = np.random.default_rng(6)
        head = GaussianProposalHead(2, 1, hidden=(4,))
        params = head.init_params(rng)
        x = rng.standard_normal((3, 2))
        mean, log_std, tapes = head.forward(params, x)
        pg, ig = head.backward(tapes, np.ones_like(mean), np.ones_like(log_std))
        assert pg.shape == (3, head.n_params)
        assert ig.shape == (3, 2)
