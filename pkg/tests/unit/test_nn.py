"""
Tests for the autodiff engine, layers, loss and optimizer.
"""
import threading

import numpy as np
import pytest

from core.errors import ShapeError, TrainingError
from networks.base import ArchitectureConfig, ConvSpec
from networks.cnn_dnn import CNNDNN
from networks.cnn_lstm_dnn import CNNLSTMDNN
from nn.gradcheck import check_gradients, grad_check, relative_error
from nn.layers import KinkRecorder, conv1d, conv_output_length, dense, dropout, relu
from nn.losses import mse_loss
from nn.optim import OptimizerState, adam_step, lr_schedule
from nn.recurrent import lstm
from nn.tensor import Tensor, parameter


def _tiny(config_factory):
    return config_factory(
        conv_stack=(ConvSpec(3, 9, 1), ConvSpec(3, 3, 2)),
        others_units=4, head_units=(6, 5, 4), seed=1,
    ).without_dropout()


# --- tensor ---

def test_broadcast_add_mul_gradients():
    a = parameter(np.array([[1.0, 2.0], [3.0, 4.0]]), "a")
    b = parameter(np.array([10.0, 20.0]), "b")

    ((a * b) + b).sum().backward()

    np.testing.assert_allclose(a.grad, [[10.0, 20.0], [10.0, 20.0]])
    np.testing.assert_allclose(b.grad, [6.0, 8.0])


def test_matmul_gradient():
    a = parameter(np.array([[1.0, 2.0]]), "a")
    b = parameter(np.array([[3.0], [4.0]]), "b")

    (a @ b).sum().backward()

    np.testing.assert_allclose(a.grad, [[3.0, 4.0]])
    np.testing.assert_allclose(b.grad, [[1.0], [2.0]])


def test_pow_div_and_indexing_gradients():
    x = parameter(np.array([1.0, 2.0, 4.0]), "x")

    (x[1:] ** 2 / 2.0).sum().backward()

    np.testing.assert_allclose(x.grad, [0.0, 2.0, 4.0])


def test_gradients_reset_between_backward_calls():
    x = parameter(np.array([3.0]), "x")

    for _ in range(2):
        x.zero_grad()
        (x * x).sum().backward()

    np.testing.assert_allclose(x.grad, [6.0])


def test_backward_needs_seed_for_vectors():
    with pytest.raises(ValueError, match="seed gradient"):
        parameter(np.ones(3), "x").backward()


# --- layers ---

def test_dense_rejects_wrong_width():
    with pytest.raises(ShapeError):
        dense(Tensor(np.ones((2, 3))), parameter(np.ones((4, 1)), "w"), parameter(np.zeros(1), "b"))


def test_conv_output_length_stride_two():
    assert conv_output_length(53, 9, 1) == 45
    assert conv_output_length(45, 3, 2) == 22


def test_conv1d_hand_example():
    x = Tensor(np.arange(1.0, 6.0).reshape(1, 5, 1))
    filters = parameter(np.array([1.0, 0.0, -1.0]).reshape(3, 1, 1), "f")

    out = conv1d(x, filters, parameter(np.zeros(1), "b"))

    np.testing.assert_allclose(out.data.reshape(-1), [-2.0, -2.0, -2.0])


def test_conv1d_gradients_match_finite_differences(rng):
    x = parameter(rng.normal(size=(2, 11, 2)), "x")
    filters = parameter(rng.normal(size=(3, 2, 4)), "f")
    bias = parameter(rng.normal(size=4), "b")

    error = check_gradients(lambda: (conv1d(x, filters, bias, stride=2) ** 2).sum(),
                            {"x": x, "f": filters, "b": bias}, samples_per_parameter=None)

    assert error < 1e-6


def test_lstm_gradients_match_finite_differences(rng):
    x = parameter(rng.normal(size=(3, 5, 2)), "x")
    w_input = parameter(rng.normal(scale=0.5, size=(2, 12)), "wi")
    w_hidden = parameter(rng.normal(scale=0.5, size=(3, 12)), "wh")
    bias = parameter(rng.normal(scale=0.1, size=12), "b")
    params = {"x": x, "wi": w_input, "wh": w_hidden, "b": bias}

    error = check_gradients(lambda: (lstm(x, w_input, w_hidden, bias) ** 2).sum(), params,
                            samples_per_parameter=None)

    assert error < 1e-6


def test_relu_blocks_negative_gradient():
    x = parameter(np.array([-1.0, 2.0]), "x")

    relu(x).sum().backward()

    np.testing.assert_array_equal(x.grad, [0.0, 1.0])


def test_kink_recorder_sees_only_its_own_thread():
    def other_thread():
        with KinkRecorder() as theirs:
            relu(Tensor(np.array([1.0, -1.0, 1.0])))
        seen.append(theirs)

    seen = []
    with KinkRecorder() as mine:
        worker = threading.Thread(target=other_thread)
        worker.start()
        worker.join()
        relu(Tensor(np.array([-2.0, 3.0])))

    assert len(mine.patterns) == 1
    np.testing.assert_array_equal(mine.patterns[0], [False, True])
    assert len(seen[0].patterns) == 1
    np.testing.assert_array_equal(seen[0].patterns[0], [True, False, True])


def test_dropout_inference_is_identity(rng):
    x = Tensor(rng.normal(size=(4, 5)))

    assert dropout(x, 0.5, training=False) is x


def test_dropout_training_scales_survivors(rng):
    x = Tensor(np.ones((200, 50)))

    out = dropout(x, 0.2, training=True, rng=rng).data

    assert set(np.unique(out)) <= {0.0, 1.25}
    assert out.mean() == pytest.approx(1.0, abs=0.05)


def test_dropout_training_needs_rng():
    with pytest.raises(ValueError, match="random generator"):
        dropout(Tensor(np.ones(3)), 0.5, training=True)


# --- loss ---

def test_mse_loss_value_and_gradient():
    predictions = parameter(np.array([[1.0], [3.0]]), "p")

    loss = mse_loss(predictions, np.array([0.0, 1.0]))
    loss.backward()

    assert float(loss.data) == pytest.approx(2.5)
    np.testing.assert_allclose(predictions.grad, [[1.0], [2.0]])


def test_mse_loss_length_mismatch():
    with pytest.raises(ShapeError):
        mse_loss(Tensor(np.zeros((3, 1))), np.zeros(2))


# --- gradient check ---

def _scaled_square(w, backward_scale):
    """sum(w ** 2) whose backward returns backward_scale * w."""
    out = Tensor(np.sum(w.data ** 2), (w,), "sq")

    def _backward():
        w.accumulate(out.grad * backward_scale * w.data)
    out._backward = _backward
    return out


def test_relative_error_floor_bounds_small_gradients():
    assert relative_error(3e-7, 2e-7) == pytest.approx(1e-3)
    assert relative_error(3e-7, 2e-7, floor=1e-12) == pytest.approx(0.2)
    assert relative_error(1.5, 1.0) == pytest.approx(0.2)


def test_check_gradients_flags_wrong_small_gradient():
    w = parameter(np.array([1e-7, -2e-7, 5e-8]), "w")

    correct = check_gradients(lambda: _scaled_square(w, 2.0), {"w": w},
                              samples_per_parameter=None, floor=1e-12)
    wrong = check_gradients(lambda: _scaled_square(w, 3.0), {"w": w},
                            samples_per_parameter=None)

    assert correct < 1e-6
    assert wrong > 1e-5


# --- networks under gradient check ---

@pytest.mark.parametrize("network_class, factory", [
    (CNNDNN, lambda **kw: ArchitectureConfig.cnn_dnn(cnn_dense_units=6, **kw)),
    (CNNLSTMDNN, lambda **kw: ArchitectureConfig.cnn_lstm_dnn(lstm_units=5, **kw)),
])
def test_network_gradients_match_finite_differences(rng, network_class, factory):
    network = network_class(_tiny(factory), n_others=6)
    inputs = rng.normal(size=(4, network.n_inputs))
    inputs[:, :6] = np.eye(6)[rng.integers(0, 6, 4)]
    targets = rng.normal(size=4)

    assert grad_check(network, inputs, targets) < 1e-5


# --- optimizer ---

def test_lr_schedule_staircase():
    assert lr_schedule(0) == pytest.approx(0.0004)
    assert lr_schedule(2499) == pytest.approx(0.0004)
    assert lr_schedule(2500) == pytest.approx(0.000384)
    assert lr_schedule(5000) == pytest.approx(0.0004 * 0.96 ** 2)


def test_lr_schedule_negative_step():
    with pytest.raises(ValueError):
        lr_schedule(-1)


def test_adam_first_step_moves_by_learning_rate():
    params = {"w": np.array([1.0, -1.0, 0.5])}
    state = OptimizerState.for_parameters(params, base_lr=0.01)

    adam_step(state, params, {"w": np.array([3.0, -0.2, 0.0])})

    np.testing.assert_allclose(params["w"], [0.99, -0.99, 0.5], atol=1e-6)
    assert state.step == 1


def test_adam_minimizes_quadratic():
    params = {"w": np.array([5.0, -3.0])}
    state = OptimizerState.for_parameters(params, base_lr=0.1, decay_steps=1000)

    for _ in range(1000):
        adam_step(state, params, {"w": 2.0 * params["w"]})

    assert np.all(np.abs(params["w"]) < 0.1)


def test_adam_non_finite_gradient_names_parameter():
    params = {"head0.weight": np.ones(2)}
    state = OptimizerState.for_parameters(params)

    with pytest.raises(TrainingError, match="head0.weight"):
        adam_step(state, params, {"head0.weight": np.array([1.0, np.nan])})
