import numpy as np
import pytest

from cfmlab.autodiff import NonFiniteError, Tape, check_gradient_fd
from cfmlab.rng import stream


def test_matmul_forward_values():
    tape = Tape()
    a = tape.const([[1.0, 2.0], [3.0, 4.0]])
    b = tape.const([[1.0], [1.0]])
    out = tape.matmul(a, b)
    assert np.array_equal(tape.value(out), [[3.0], [7.0]])


def test_identity_graph_returns_input():
    tape = Tape()
    x = np.arange(6.0).reshape(2, 3)
    tape.input(x)
    assert np.array_equal(tape.forward(), x)


def test_two_layer_mlp_matches_hand_evaluation(rng):
    W1 = rng.standard_normal((3, 5))
    b1 = rng.standard_normal(5)
    W2 = rng.standard_normal((5, 2))
    b2 = rng.standard_normal(2)
    x = rng.standard_normal((4, 3))

    tape = Tape()
    h = tape.nonlin(tape.bias_add(tape.matmul(tape.input(x), tape.param(W1)),
                                  tape.param(b1)), "tanh")
    out = tape.bias_add(tape.matmul(h, tape.param(W2)), tape.param(b2))

    # straight-line hand evaluation, no tape involved
    expected = np.tanh(x @ W1 + b1) @ W2 + b2
    assert np.allclose(tape.value(out), expected, atol=1e-14)


def test_backward_square():
    tape = Tape()
    x = tape.param(np.array(3.0))
    tape.mul(x, x)
    (grad,) = tape.backward(np.array(1.0))
    assert grad == pytest.approx(6.0)


def test_backward_sum_of_linear_map_is_outer_product(rng):
    W = rng.standard_normal((2, 3))
    x = rng.standard_normal((3, 1))
    tape = Tape()
    Wn = tape.param(W)
    tape.reduce_sum(tape.matmul(Wn, tape.const(x)))
    (grad,) = tape.backward()
    assert np.allclose(grad, np.ones((2, 1)) @ x.T, atol=1e-14)
    assert check_gradient_fd(tape) < 1e-9


def test_backward_constant_graph_zero_grads():
    tape = Tape()
    p = tape.param(np.ones(3))
    c = tape.const(np.full(3, 2.0))
    tape.reduce_sum(tape.mul(c, c))  # p never used downstream
    (grad,) = tape.backward()
    assert np.array_equal(grad, np.zeros(3))


def test_gradient_check_quadratic():
    tape = Tape()
    p = tape.param(np.array([1.5, -0.5, 2.0]))
    tape.reduce_sum(tape.mul(p, p))
    assert check_gradient_fd(tape, h=1e-5) < 1e-6


def test_gradient_check_linear_graph_near_exact():
    tape = Tape()
    p = tape.param(np.array([[0.2, -1.0], [0.3, 0.7]]))
    tape.reduce_sum(tape.scale(p, 3.0))
    assert check_gradient_fd(tape, h=1e-5) < 1e-10


def test_gradient_check_mlp_tanh(rng):
    tape = Tape()
    x = tape.input(rng.standard_normal((6, 4)))
    h = tape.nonlin(tape.bias_add(tape.matmul(x, tape.param(rng.standard_normal((4, 8)) * 0.5)),
                                  tape.param(rng.standard_normal(8) * 0.1)), "tanh")
    out = tape.matmul(h, tape.param(rng.standard_normal((8, 3)) * 0.5))
    tape.scale(tape.reduce_sum(tape.mul(out, out)), 1.0 / 6)
    assert check_gradient_fd(tape, h=1e-5) < 1e-5


@pytest.mark.parametrize("seed", range(8))
def test_gradient_check_random_graphs(seed):
    """Property: backward matches central differences on random compositions."""
    gen = stream(777, seed)
    tape = Tape()
    n, d0 = int(gen.integers(2, 5)), int(gen.integers(2, 5))
    act = ["silu", "tanh", "softplus"][seed % 3]
    z = tape.input(gen.standard_normal((n, d0)))
    width = d0
    for _ in range(int(gen.integers(1, 4))):
        new_w = int(gen.integers(2, 6))
        z = tape.bias_add(tape.matmul(z, tape.param(gen.standard_normal((width, new_w)) * 0.7)),
                          tape.param(gen.standard_normal(new_w) * 0.2))
        z = tape.nonlin(z, act)
        width = new_w
    extra = tape.param(gen.standard_normal((n, width)) * 0.5)
    z = tape.mul(tape.add(z, extra), tape.sub(z, extra))
    tape.scale(tape.reduce_sum(z), 1.0 / n)
    assert check_gradient_fd(tape, h=1e-5) < 1e-5


@pytest.mark.parametrize("op", ["add", "sub", "mul", "matmul", "bias_add",
                                "nonlin", "reduce_sum", "scale"])
def test_gradient_check_each_primitive(op, rng):
    tape = Tape()
    a = tape.param(rng.standard_normal((3, 4)))
    if op in ("add", "sub", "mul"):
        b = tape.param(rng.standard_normal((3, 4)))
        z = getattr(tape, op)(a, b)
    elif op == "matmul":
        b = tape.param(rng.standard_normal((4, 2)))
        z = tape.matmul(a, b)
    elif op == "bias_add":
        b = tape.param(rng.standard_normal(4))
        z = tape.bias_add(a, b)
    elif op == "nonlin":
        z = tape.nonlin(a, "silu")
    elif op == "scale":
        z = tape.scale(a, -2.5)
    else:
        z = a
    tape.reduce_sum(z) if op != "reduce_sum" else tape.reduce_sum(a)
    assert check_gradient_fd(tape, h=1e-5) < 1e-5


def test_forward_replay_is_bit_identical(rng):
    tape = Tape()
    x = tape.input(rng.standard_normal((5, 3)))
    h = tape.nonlin(tape.matmul(x, tape.param(rng.standard_normal((3, 3)))), "silu")
    tape.reduce_sum(h)
    first = tape.value(len(tape) - 1).copy()
    replayed = tape.forward()
    assert np.array_equal(first, replayed)


def test_forward_rebinds_inputs(rng):
    tape = Tape()
    x0 = rng.standard_normal((2, 3))
    tape.scale(tape.input(x0), 2.0)
    x1 = rng.standard_normal((2, 3))
    assert np.array_equal(tape.forward([x1]), 2.0 * x1)


def test_shape_mismatch_errors():
    tape = Tape()
    a = tape.const(np.ones((2, 3)))
    b = tape.const(np.ones((3, 3)))
    with pytest.raises(ValueError):
        tape.add(a, b)
    with pytest.raises(ValueError):
        tape.matmul(a, a)
    with pytest.raises(ValueError):
        tape.bias_add(a, a)


def test_forward_input_shape_mismatch():
    tape = Tape()
    tape.scale(tape.input(np.ones((2, 2))), 1.0)
    with pytest.raises(ValueError):
        tape.forward([np.ones((3, 2))])


def test_backward_before_anything_recorded():
    with pytest.raises(RuntimeError):
        Tape().backward()
    with pytest.raises(RuntimeError):
        Tape().forward()


def test_backward_seed_shape_mismatch():
    tape = Tape()
    tape.scale(tape.param(np.ones((2, 2))), 1.0)
    with pytest.raises(ValueError):
        tape.backward(np.ones(3))


def test_nonfinite_surfaces_as_error():
    tape = Tape()
    big = tape.const(np.array(1e200))
    with np.errstate(over="ignore"):
        with pytest.raises(NonFiniteError):
            tape.mul(big, big)
    with pytest.raises(NonFiniteError):
        Tape().input(np.array([np.inf]))


def test_grad_of_nonparam_leaf(rng):
    tape = Tape()
    x = tape.input(rng.standard_normal((2, 2)))
    tape.reduce_sum(tape.scale(x, 3.0))
    tape.backward()
    assert np.allclose(tape.grad_of(x), np.full((2, 2), 3.0))
