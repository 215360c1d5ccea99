import numpy as np
import pytest

from ovavss.errors import ConfigurationError, DimensionError, EvaluationError, InputError, NumericalError
from ovavss.numcore import (
    MultiHeadAttention,
    Parameter,
    Tensor,
    concat,
    conv2d,
    gelu,
    grad_check,
    layer_norm,
    log,
    matmul,
    no_grad,
    reduce_sum,
    relu,
    sigmoid,
    softmax,
)
from ovavss.numcore.nn import GroupNorm, group_norm, resize_bilinear

SOFTMAX_123 = [0.09003, 0.24473, 0.66524]


def test_matmul_examples():
    eye = Tensor(np.eye(2))
    m = Tensor([[1.0, 2.0], [3.0, 4.0]])
    assert np.array_equal(matmul(eye, m).data, m.data)
    assert matmul(Tensor([[1.0, 2.0]]), Tensor([[3.0], [4.0]])).data.tolist() == [[11.0]]


def test_matmul_shape_mismatch_names_both_shapes():
    with pytest.raises(DimensionError) as err:
        matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))
    assert "(2, 3)" in str(err.value)


def test_matmul_gradient(rng):
    b = Tensor(rng.normal(size=(4, 2)))
    assert grad_check(lambda a: reduce_sum(matmul(a, b)), Tensor(rng.normal(size=(3, 4)))) < 1e-6
    a = Tensor(rng.normal(size=(3, 4)))
    assert grad_check(lambda b: reduce_sum(matmul(a, b)), Tensor(rng.normal(size=(4, 2)))) < 1e-6


def test_matmul_identity_associativity(rng):
    a, b, eye = rng.normal(size=(3, 4)), rng.normal(size=(4, 5)), np.eye(4)
    left = matmul(matmul(Tensor(a), Tensor(eye)), Tensor(b)).data
    right = matmul(Tensor(a), matmul(Tensor(eye), Tensor(b))).data
    assert np.array_equal(left, right)


def test_softmax_examples():
    assert np.allclose(softmax(Tensor([0.0, 0.0, 0.0])).data, 1 / 3)
    big = softmax(Tensor([1000.0, 0.0])).data
    assert np.isfinite(big).all() and big[0] == pytest.approx(1.0) and big[1] == pytest.approx(0.0)
    assert np.allclose(softmax(Tensor([1.0, 2.0, 3.0])).data, SOFTMAX_123, atol=1e-4)


def test_softmax_rows_normalized(rng):
    out = softmax(Tensor(rng.normal(scale=5.0, size=(6, 7))), axis=-1).data
    assert np.all(np.abs(out.sum(axis=-1) - 1.0) < 1e-9)
    assert out.min() >= 0.0 and out.max() <= 1.0


def test_grad_check_examples():
    assert grad_check(lambda x: reduce_sum(x * x), Tensor([1.0, 2.0, 3.0])) < 1e-8
    x = Tensor(np.random.default_rng(3).normal(size=5), requires_grad=True)
    reduce_sum(softmax(x)).backward()
    assert np.abs(x.grad).max() < 1e-9


def test_grad_check_rejects_bad_eps():
    with pytest.raises(InputError):
        grad_check(lambda x: reduce_sum(x), Tensor([1.0]), eps=1e-2)


def test_grad_check_non_finite_is_evaluation_error():
    with pytest.raises(EvaluationError):
        grad_check(lambda x: reduce_sum(x) * float("inf"), Tensor([1.0]))


def test_non_finite_op_output_raises():
    with pytest.raises(NumericalError):
        log(Tensor([0.0]))


@pytest.mark.parametrize(
    "op",
    [relu, gelu, sigmoid, lambda x: softmax(x, axis=-1), lambda x: layer_norm(x), lambda x: x * x + x / 3.0],
    ids=["relu", "gelu", "sigmoid", "softmax", "layer_norm", "poly"],
)
def test_elementwise_gradients(op, rng):
    weights = Tensor(rng.normal(size=(3, 5)))
    for _ in range(20):
        x = Tensor(rng.normal(size=(3, 5)) + 0.05)
        assert grad_check(lambda t: reduce_sum(op(t) * weights), x) < 1e-4


def test_shared_subexpression_accumulates():
    x = Tensor([1.5], requires_grad=True)
    (x + x).backward()
    assert x.grad.tolist() == [2.0]


def test_scalars_keep_rank_zero(rng):
    x = Parameter(np.array(3.0))
    assert x.shape == ()
    loss = reduce_sum(x * Tensor(rng.normal(size=(2, 3))))
    assert loss.shape == ()
    loss.backward()
    assert x.grad.shape == ()
    assert Tensor(np.ones((4, 3)).T).data.flags.c_contiguous


def test_no_grad_records_nothing():
    x = Tensor([1.0], requires_grad=True)
    with no_grad():
        y = x * 2.0
    assert y.is_leaf


def test_layer_norm_statistics(rng):
    out = layer_norm(Tensor(10.0 * rng.normal(size=(4, 64)))).data
    assert np.all(np.abs(out.mean(axis=-1)) < 1e-9)
    assert np.all(np.abs(out.var(axis=-1) - 1.0) < 1e-6)


def test_group_norm_gradient(rng):
    gamma = Tensor(rng.normal(size=4))
    w = Tensor(rng.normal(size=(1, 4, 3, 3)))
    x = Tensor(rng.normal(size=(1, 4, 3, 3)))
    assert grad_check(lambda t: reduce_sum(group_norm(t, 2, gamma) * w), x) < 1e-4


def test_group_norm_layer_rejects_indivisible_channels():
    with pytest.raises(ConfigurationError, match="not divisible"):
        GroupNorm(12, 8)
    assert GroupNorm(12, 4).groups == 4


@pytest.mark.parametrize("stride", [1, 2])
def test_conv2d_shape_and_gradient(stride, rng):
    x = Tensor(rng.normal(size=(2, 3, 8, 8)))
    w = Tensor(rng.normal(size=(4, 3, 3, 3)))
    out = conv2d(x, w, stride=stride)
    assert out.shape == (2, 4, 8 // stride, 8 // stride)
    assert grad_check(lambda t: reduce_sum(conv2d(t, w, stride=stride) ** 2), x, max_entries=30) < 1e-4
    assert grad_check(lambda t: reduce_sum(conv2d(x, t, stride=stride) ** 2), w, max_entries=30) < 1e-4


def test_conv2d_matches_direct_sum(rng):
    x = rng.normal(size=(1, 2, 5, 5))
    w = rng.normal(size=(1, 2, 3, 3))
    out = conv2d(Tensor(x), Tensor(w)).data
    padded = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    assert out[0, 0, 2, 3] == pytest.approx(np.sum(padded[0, :, 2:5, 3:6] * w[0]))


def test_bilinear_resize_gradient(rng):
    x = Tensor(rng.normal(size=(2, 3, 4)))
    weights = Tensor(rng.normal(size=(2, 6, 8)))
    assert grad_check(lambda t: reduce_sum(resize_bilinear(t, (6, 8)) * weights), x) < 1e-6


def test_concat_and_getitem_gradients(rng):
    other = Tensor(rng.normal(size=(2, 3)))
    x = Tensor(rng.normal(size=(2, 3)))
    assert grad_check(lambda t: reduce_sum(concat([t, other], axis=0) ** 2), x) < 1e-6
    idx = np.array([1, 1, 0])
    assert grad_check(lambda t: reduce_sum(t[idx] ** 2), x) < 1e-6


def _identity_attention(dim: int) -> MultiHeadAttention:
    attn = MultiHeadAttention(dim, 1)
    for proj in (attn.q_proj, attn.k_proj, attn.v_proj, attn.out_proj):
        proj.weight = Parameter(np.eye(dim))
        proj.bias = Parameter(np.zeros(dim))
    return attn


def test_attention_hand_example():
    attn = _identity_attention(2)
    out = attn(Tensor([[1.0, 0.0]]), Tensor([[1.0, 0.0]]), Tensor([[1.0, 0.0]]))
    assert np.allclose(out.data, [[1.0, 0.0]])


def test_attention_single_key_collapse(rng):
    attn = MultiHeadAttention(8, 2, rng)
    q = Tensor(rng.normal(size=(5, 8)))
    kv = Tensor(rng.normal(size=(1, 8)))
    out = attn(q, kv, kv).data
    expected = attn.out_proj(attn.v_proj(kv)).data
    assert np.allclose(out, np.repeat(expected, 5, axis=0), atol=1e-12)


def test_attention_key_permutation_invariant(rng):
    attn = MultiHeadAttention(8, 2, rng)
    q = rng.normal(size=(3, 8))
    kv = rng.normal(size=(6, 8))
    perm = rng.permutation(6)
    a = attn(Tensor(q), Tensor(kv), Tensor(kv)).data
    b = attn(Tensor(q), Tensor(kv[perm]), Tensor(kv[perm])).data
    assert np.allclose(a, b, atol=1e-12)


def test_attention_rejects_indivisible_heads():
    with pytest.raises(ConfigurationError):
        MultiHeadAttention(6, 4)


def test_attention_gradient(rng):
    attn = MultiHeadAttention(4, 2, rng)
    kv = Tensor(rng.normal(size=(3, 4)))
    assert grad_check(lambda q: reduce_sum(attn(q, kv, kv) ** 2), Tensor(rng.normal(size=(2, 4)))) < 1e-4
    q = Tensor(rng.normal(size=(2, 4)))
    assert grad_check(lambda t: reduce_sum(attn(q, t, t) ** 2), Tensor(rng.normal(size=(3, 4)))) < 1e-4
