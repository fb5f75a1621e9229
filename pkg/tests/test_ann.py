import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import complex_step_check, fd_check, gradient_oracle, random_net_case
from swingbench.ann import (GradientBundle, LayerSpec, Mlp, WeightsFormatError, backward, forward,
                            layer_specs, load_weights, mlp_init, save_weights, sgd_update)


def single(w, b, act="linear"):
    w = np.atleast_2d(np.asarray(w, float))
    return Mlp([LayerSpec(w.shape[1], w.shape[0], act)], [w], [np.asarray(b, float)])


# initialization

def test_init_reproducible_and_seed_sensitive():
    specs = layer_specs(6, (10,), 1)
    assert mlp_init(specs, 7).same_parameters(mlp_init(specs, 7))
    assert not mlp_init(specs, 7).same_parameters(mlp_init(specs, 8))


def test_init_respects_glorot_bound():
    net = mlp_init(layer_specs(6, (10,), 1), 0)
    for spec, w, b in zip(net.layers, net.weights, net.biases):
        assert np.all(np.abs(w) <= math.sqrt(6.0 / (spec.fan_in + spec.fan_out)))
        assert np.all(b == 0.0)
    assert [s.activation for s in net.layers] == ["tanh", "linear"]


def test_dimension_mismatch_rejected():
    with pytest.raises(ValueError):
        mlp_init([LayerSpec(3, 4), LayerSpec(5, 1)], 0)
    with pytest.raises(ValueError):
        LayerSpec(0, 1)
    with pytest.raises(ValueError):
        LayerSpec(1, 1, "relu")


# forward

def test_zero_network_outputs_zero():
    net = mlp_init(layer_specs(6, (10,), 1), 0)
    for p in net.params():
        p[...] = 0.0
    y, _ = forward(net, np.ones(6))
    assert y.tolist() == [0.0]


def test_affine_layer():
    assert forward(single([[2.0]], [0.5]), [1.0])[0].tolist() == [2.5]


def test_tanh_layer():
    y, _ = forward(single([[1.0, 1.0]], [0.0], "tanh"), [0.5, 0.5])
    assert y[0] == pytest.approx(0.76159, abs=1e-5)
    assert y[0] == math.tanh(1.0)


def test_input_length_checked():
    with pytest.raises(ValueError):
        forward(mlp_init(layer_specs(3, (4,)), 0), np.ones(4))


def test_batch_forward_matches_rows(rng):
    net = mlp_init(layer_specs(6, (10,), 1), 1)
    X = rng.normal(size=(7, 6))
    yb, _ = forward(net, X)
    for i in range(7):
        np.testing.assert_allclose(forward(net, X[i])[0], yb[i], rtol=0, atol=1e-15)


def test_forward_is_pure(rng):
    net = mlp_init(layer_specs(6, (10,), 1), 1)
    x = rng.normal(size=6)
    before = net.copy()
    assert forward(net, x)[0].tolist() == forward(net, x)[0].tolist()
    assert net.same_parameters(before)


# backward

def test_zero_output_error_zero_gradients(rng):
    net = mlp_init(layer_specs(6, (10,), 1), 1)
    _, cache = forward(net, rng.normal(size=6))
    g = backward(net, cache, np.zeros(1))
    assert g.norm() == 0.0 and np.all(g.input_grad == 0.0)


def test_linear_layer_closed_form():
    net = single([[0.3, -0.2]], [0.1])
    x, t = np.array([2.0, 5.0]), 1.0
    y, cache = forward(net, x)
    g = backward(net, cache, y - t)
    np.testing.assert_allclose(g.weight_grads[0], (y - t)[:, None] * x[None, :], atol=1e-15)
    np.testing.assert_allclose(g.input_grad, (y - t) * net.weights[0][0], atol=1e-15)


def test_output_error_shape_checked(rng):
    net = mlp_init(layer_specs(3, (4,)), 0)
    _, cache = forward(net, rng.normal(size=3))
    with pytest.raises(ValueError):
        backward(net, cache, np.zeros(2))


@pytest.mark.parametrize("n_in,hidden", [(6, (10,)), (3, (8,))])
def test_gradients_match_finite_differences(rng, n_in, hidden):
    for k in range(20):
        assert fd_check(*random_net_case(rng, n_in, hidden, k)) < 1e-6


def test_deep_network_gradients_match_complex_step(rng):
    for k in range(20):
        assert complex_step_check(*random_net_case(rng, 4, (5, 3), k)) < 1e-10


def test_gradient_oracle_both_shapes():
    worst = gradient_oracle()
    assert worst["ni"] < 1e-6 and worst["nc"] < 1e-6


def test_batch_gradient_is_sum_of_rows(rng):
    net = mlp_init(layer_specs(6, (10,), 1), 2)
    X, E = rng.normal(size=(5, 6)), rng.normal(size=(5, 1))
    _, cache = forward(net, X)
    gb = backward(net, cache, E)
    total = None
    for i in range(5):
        _, c = forward(net, X[i])
        g = backward(net, c, E[i])
        np.testing.assert_allclose(gb.input_grad[i], g.input_grad, atol=1e-14)
        total = g.weight_grads[0] if total is None else total + g.weight_grads[0]
    np.testing.assert_allclose(gb.weight_grads[0], total, atol=1e-13)


# SGD

def test_sgd_zero_gradient_unchanged():
    net = mlp_init(layer_specs(3, (4,)), 0)
    g = GradientBundle([np.zeros_like(w) for w in net.weights],
                       [np.zeros_like(b) for b in net.biases], np.zeros(3))
    assert sgd_update(net, g, 0.5).same_parameters(net)


def test_sgd_single_weight():
    net = single([[1.0]], [0.0])
    g = GradientBundle([np.array([[0.25]])], [np.array([0.0])], np.zeros(1))
    assert sgd_update(net, g, 1.0, clip=math.inf).weights[0][0, 0] == 0.75


def test_sgd_clips_to_norm():
    net = single([[0.0, 0.0]], [0.0])
    g = GradientBundle([np.array([[6.0, 8.0]])], [np.array([0.0])], np.zeros(2))
    out = sgd_update(net, g, 0.1, clip=1.0)
    step = np.concatenate([out.weights[0].ravel(), out.biases[0]])
    assert np.linalg.norm(step) == pytest.approx(0.1, rel=1e-15)


def test_sgd_skips_non_finite():
    net = single([[1.0]], [0.0])
    g = GradientBundle([np.array([[math.nan]])], [np.array([0.0])], np.zeros(1))
    out = sgd_update(net, g, 1.0)
    assert out.same_parameters(net) and out.skipped_updates == 1


def test_sgd_returns_new_network(rng):
    net = mlp_init(layer_specs(3, (4,)), 0)
    before = net.copy()
    _, cache = forward(net, rng.normal(size=3))
    sgd_update(net, backward(net, cache, np.ones(1)), 0.1)
    assert net.same_parameters(before)


# serialization

def test_weights_round_trip(tmp_path, rng):
    net = mlp_init(layer_specs(6, (10, 4), 1), 3)
    net.biases[0][:] = rng.normal(size=10)
    save_weights(net, tmp_path / "w.txt")
    back = load_weights(tmp_path / "w.txt")
    assert back.same_parameters(net)
    X = rng.normal(size=(100, 6))
    assert np.array_equal(forward(net, X)[0], forward(back, X)[0])


def test_weights_file_layout(tmp_path):
    save_weights(single([[2.0]], [0.0]), tmp_path / "w.txt")
    raw = (tmp_path / "w.txt").read_bytes()
    assert raw == b"MLPV1 1\nLAYER 1 1 linear\n2.0000000000000000e0 0.0000000000000000e0\n"


def test_hand_written_file(tmp_path):
    (tmp_path / "w.txt").write_text("MLPV1 1\nLAYER 1 1 linear\n2 0\n")
    assert forward(load_weights(tmp_path / "w.txt"), [3.0])[0].tolist() == [6.0]


@pytest.mark.parametrize("text,line", [
    ("MLPV1 2\nLAYER 1 1 linear\n2 0\n", 4),          # truncated
    ("MLPV2 1\nLAYER 1 1 linear\n2 0\n", 1),          # bad header
    ("MLPV1 1\nLAYER 1 1 linear\n2 x\n", 3),          # bad number
    ("MLPV1 1\nLAYER 1 1 linear\n2 0 1\n", 3),        # arity
    ("MLPV1 1\nLAYER 1 1 sigmoid\n2 0\n", 2),         # activation
    ("MLPV1 1\nLAYER 1 1 linear\n2 0\nextra\n", 4),   # trailing content
])
def test_malformed_files_name_the_line(tmp_path, text, line):
    (tmp_path / "w.txt").write_text(text)
    with pytest.raises(WeightsFormatError) as exc:
        load_weights(tmp_path / "w.txt")
    assert exc.value.line == line and f"line {line}" in str(exc.value)


def test_dimension_mismatch_in_file(tmp_path):
    (tmp_path / "w.txt").write_text("MLPV1 2\nLAYER 1 2 tanh\n1 0\n1 0\nLAYER 3 1 linear\n1 1 1 0\n")
    with pytest.raises(WeightsFormatError):
        load_weights(tmp_path / "w.txt")


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=3, max_size=3))
def test_round_trip_arbitrary_values(tmp_path_factory, vals):
    path = tmp_path_factory.mktemp("w") / "w.txt"
    net = single([vals[:2]], [vals[2]])
    save_weights(net, path)
    assert load_weights(path).same_parameters(net)
