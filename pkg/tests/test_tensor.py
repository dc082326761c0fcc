import numpy as np
import pytest

from atlab import tensor as tc
from atlab.tensor import ShapeError, Tape, Tensor

from conftest import central_difference, rel_err


def test_matmul_identity():
    a = Tensor([[1.0, 2.0], [3.0, 4.0]])
    out = tc.matmul(a, Tensor(np.eye(2)))
    assert np.array_equal(out.data, a.data)


def test_softmax_ce_uniform_logits_is_log_c():
    logits = Tensor(np.zeros((3, 10)))
    loss = tc.softmax_cross_entropy(logits, np.array([0, 5, 9]))
    assert loss.item() == pytest.approx(np.log(10.0), abs=1e-15)


def test_relu_values():
    out = tc.relu(Tensor([-1.0, 0.0, 2.0]))
    assert np.array_equal(out.data, [0.0, 0.0, 2.0])


def test_matmul_shape_error_names_op_and_shapes():
    with pytest.raises(ShapeError, match=r"matmul.*\(2, 3\).*\(2, 3\)"):
        tc.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))


def test_add_shape_error():
    with pytest.raises(ShapeError, match="add"):
        tc.add(Tensor(np.ones((2, 3))), Tensor(np.ones((4, 5))))


def test_label_out_of_range():
    with pytest.raises(ValueError, match="label out of range"):
        tc.softmax_cross_entropy(Tensor(np.zeros((2, 3))), np.array([0, 3]))


def test_linear_form_gradient_is_weight():
    w = Tensor([1.5, -2.0, 0.25])
    x = Tensor([0.1, 0.2, 0.3], requires_grad=True)
    tc.tsum(tc.mul(w, x)).backward()
    assert np.array_equal(x.grad, w.data)


def test_relu_subgradient_zero_at_origin():
    x = Tensor([-1.0, 0.0, 2.0], requires_grad=True)
    tc.tsum(tc.relu(x)).backward()
    assert np.array_equal(x.grad, [0.0, 0.0, 1.0])


def test_sign_gradient_is_zero_everywhere():
    x = Tensor([-3.0, 0.0, 5.0], requires_grad=True)
    tc.tsum(tc.sign(x)).backward()
    assert np.array_equal(x.grad, np.zeros(3))
    assert np.array_equal(tc.sign(Tensor([-3.0, 0.0, 5.0])).data, [-1.0, 0.0, 1.0])


def test_clamp_gradient_blocks_outside_interval():
    x = Tensor([-2.0, -1.0, 0.5, 1.0, 2.0], requires_grad=True)
    tc.tsum(tc.clamp(x, -1.0, 1.0)).backward()
    assert np.array_equal(x.grad, [0.0, 1.0, 1.0, 1.0, 0.0])


def test_diamond_graph_counts_each_path_once():
    x = Tensor(2.0, requires_grad=True)
    y = Tensor(5.0, requires_grad=True)
    tc.add(tc.mul(x, y), x).backward()
    assert x.grad == pytest.approx(6.0)
    assert y.grad == pytest.approx(2.0)


def test_repeated_backward_does_not_accumulate():
    x = Tensor([1.0, 2.0], requires_grad=True)
    loss = tc.tsum(tc.mul(x, x))
    loss.backward()
    first = x.grad.copy()
    loss.backward()
    assert np.array_equal(x.grad, first)


@pytest.mark.parametrize("seed", range(5))
def test_two_layer_net_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    dims = [3, 6, 4]
    labels = rng.integers(0, dims[-1], size=5)
    arrays = [
        rng.normal(size=(5, dims[0])),
        rng.normal(size=(dims[0], dims[1])),
        rng.normal(size=dims[1]),
        rng.normal(size=(dims[1], dims[2])),
        rng.normal(size=dims[2]),
    ]

    def forward(parts):
        x, w1, b1, w2, b2 = [Tensor(p, requires_grad=True) for p in parts]
        h = tc.relu(tc.add(tc.matmul(x, w1), b1))
        loss = tc.softmax_cross_entropy(tc.add(tc.matmul(h, w2), b2), labels)
        return loss, (x, w1, b1, w2, b2)

    loss, leaves = forward(arrays)
    loss.backward()
    fd = central_difference(lambda parts: forward(parts)[0].item(), arrays)
    for leaf, numeric in zip(leaves, fd):
        assert rel_err(leaf.grad, numeric) < 1e-5


def test_softmax_ce_shift_invariance():
    rng = np.random.default_rng(7)
    z = rng.normal(size=(6, 4)) * 3.0
    y = rng.integers(0, 4, size=6)
    a = tc.softmax_cross_entropy(Tensor(z), y).item()
    b = tc.softmax_cross_entropy(Tensor(z + 123.456), y).item()
    assert abs(a - b) < 1e-12


def test_determinism_bit_identical():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(4, 4))
    w = rng.normal(size=(4, 2))
    y = np.array([0, 1, 0, 1])

    def run():
        loss = tc.softmax_cross_entropy(tc.matmul(Tensor(x, requires_grad=True), Tensor(w)), y)
        return loss.item()

    assert run() == run()


def test_backward_requires_scalar():
    x = Tensor([1.0, 2.0], requires_grad=True)
    with pytest.raises(ShapeError, match="scalar"):
        tc.mul(x, x).backward()


def test_backward_on_leaf_is_an_error():
    with pytest.raises(ValueError, match="leaf"):
        Tensor(1.0, requires_grad=True).backward()


def test_tape_topological_order():
    x = Tensor([1.0], requires_grad=True)
    y = tc.mul(x, x)
    z = tc.tsum(tc.add(y, x))
    tape = Tape.trace(z)
    pos = {id(t): i for i, t in enumerate(tape.nodes)}
    for node in tape.nodes:
        for parent in node._parents:
            assert pos[id(parent)] < pos[id(node)]
    assert len(tape.nodes) == len({id(t) for t in tape.nodes})


def test_tensor_data_is_readonly():
    t = Tensor([1.0, 2.0])
    with pytest.raises(ValueError):
        t.data[0] = 5.0


def test_bias_broadcast_gradient_sums_rows():
    x = Tensor(np.ones((4, 3)), requires_grad=True)
    b = Tensor(np.zeros(3), requires_grad=True)
    tc.tsum(tc.add(x, b)).backward()
    assert np.array_equal(b.grad, [4.0, 4.0, 4.0])
    assert np.array_equal(x.grad, np.ones((4, 3)))
