"""Autodiff engine tests: op correctness against brute-force oracles,
backward accumulation, finite-difference gradient checks, and Adam."""

import numpy as np
import pytest

from latentloco import autodiff as ad


def test_matmul_identity():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((3, 3))
    out = ad.matmul(ad.Tensor(np.eye(3)), ad.Tensor(a))
    assert np.array_equal(out.data, a)


def test_tanh_zero_vector():
    out = ad.tanh(ad.Tensor(np.zeros(7)))
    assert np.array_equal(out.data, np.zeros(7))


def test_matmul_matches_triple_loop():
    rng = np.random.default_rng(1)
    a = rng.standard_normal((4, 5))
    b = rng.standard_normal((5, 3))
    want = np.zeros((4, 3))
    for i in range(4):
        for j in range(3):
            for k in range(5):
                want[i, j] += a[i, k] * b[k, j]
    got = ad.matmul(ad.Tensor(a), ad.Tensor(b)).data
    assert np.max(np.abs(got - want)) < 1e-12


def test_forward_op_dispatch_and_no_mutation():
    a = ad.Tensor(np.arange(3.0))
    b = ad.Tensor(np.ones(3))
    before = a.data.copy()
    out = ad.forward_op("add", [a, b])
    assert np.array_equal(out.data, np.array([1.0, 2.0, 3.0]))
    assert np.array_equal(a.data, before)
    assert out.op == "add"
    assert out.parents == (a, b)


def test_shape_mismatch_diagnostic_names_kind_and_shapes():
    with pytest.raises(ad.ShapeError, match=r"matmul.*\(2, 3\).*\(2, 3\)"):
        ad.matmul(ad.Tensor(np.zeros((2, 3))), ad.Tensor(np.zeros((2, 3))))
    with pytest.raises(ad.ShapeError, match="add"):
        ad.add(ad.Tensor(np.zeros(3)), ad.Tensor(np.zeros(4)))


def test_backward_sum_gives_ones():
    x = ad.Tensor(np.arange(5.0), requires_grad=True)
    ad.backward(ad.tsum(x))
    assert np.array_equal(x.grad, np.ones(5))


def test_backward_mean_of_square():
    rng = np.random.default_rng(2)
    x_val = rng.standard_normal(6)
    x = ad.Tensor(x_val, requires_grad=True)
    ad.backward(ad.mean(ad.mul(x, x)))
    assert np.allclose(x.grad, 2.0 * x_val / 6.0, atol=1e-14)


def test_backward_rejects_non_scalar():
    x = ad.Tensor(np.zeros(3), requires_grad=True)
    with pytest.raises(ValueError, match="scalar"):
        ad.backward(ad.mul(x, x))


def test_shared_node_accumulates_both_paths():
    # loss = sum(x*a) + sum(x*b): grad must equal the sum of the two
    # single-path gradients computed separately.
    rng = np.random.default_rng(3)
    x_val = rng.standard_normal(4)
    a, b = rng.standard_normal(4), rng.standard_normal(4)

    x = ad.Tensor(x_val, requires_grad=True)
    loss = ad.add(ad.tsum(ad.mul(x, ad.Tensor(a))), ad.tsum(ad.mul(x, ad.Tensor(b))))
    ad.backward(loss)

    x1 = ad.Tensor(x_val, requires_grad=True)
    ad.backward(ad.tsum(ad.mul(x1, ad.Tensor(a))))
    x2 = ad.Tensor(x_val, requires_grad=True)
    ad.backward(ad.tsum(ad.mul(x2, ad.Tensor(b))))

    assert np.allclose(x.grad, x1.grad + x2.grad, atol=1e-14)


def test_no_grad_for_requires_grad_false():
    x = ad.Tensor(np.ones(3), requires_grad=False)
    y = ad.Tensor(np.ones(3), requires_grad=True)
    ad.backward(ad.tsum(ad.mul(x, y)))
    assert x.grad is None
    assert np.array_equal(y.grad, np.ones(3))


def test_two_layer_mlp_gradient_vs_finite_differences():
    rng = np.random.default_rng(4)
    w1 = rng.standard_normal((3, 4)) * 0.5
    w2 = rng.standard_normal((4, 1)) * 0.5
    x = rng.standard_normal((5, 3))
    flat = np.concatenate([w1.ravel(), w2.ravel()])

    def f(p):
        w1_t = ad.Tensor(p.data[:12].reshape(3, 4), requires_grad=p.requires_grad,
                         parents=(p,), op="view")
        w2_t = ad.Tensor(p.data[12:].reshape(4, 1), requires_grad=p.requires_grad,
                         parents=(p,), op="view")

        def back_w1():
            ad._accum(p, np.concatenate([w1_t.grad.ravel(), np.zeros(4)]))

        def back_w2():
            ad._accum(p, np.concatenate([np.zeros(12), w2_t.grad.ravel()]))

        w1_t._backward = back_w1
        w2_t._backward = back_w2
        h = ad.tanh(ad.matmul(ad.Tensor(x), w1_t))
        return ad.mean(ad.mul(ad.matmul(h, w2_t), ad.matmul(h, w2_t)))

    assert ad.grad_check(f, flat, h=1e-5) < 1e-4


# --- per-kind finite-difference sweep --------------------------------------

def _unary_case(op, rng, positive=False, avoid_zero=False):
    x = rng.uniform(0.5, 2.0, (3, 4)) if positive else rng.standard_normal((3, 4))
    if avoid_zero:
        x = np.where(np.abs(x) < 1e-2, x + 0.05, x)
    return lambda p: ad.mean(op(p)), x


def _kind_case(kind, rng):
    """Build (f, point) exercising one op kind with a scalar-valued wrapper."""
    if kind == "matmul":
        b = rng.standard_normal((4, 2))
        return lambda p: ad.mean(ad.matmul(p, ad.Tensor(b))), rng.standard_normal((3, 4))
    if kind in ("add", "sub", "mul", "minimum", "maximum"):
        other = rng.standard_normal((3, 4))
        x = rng.standard_normal((3, 4))
        if kind in ("minimum", "maximum"):
            # keep FD probes away from the tie kink
            gap = np.abs(x - other) < 5e-2
            x = np.where(gap, x + 0.1, x)
        op = getattr(ad, kind)
        return lambda p: ad.mean(op(p, ad.Tensor(other))), x
    if kind == "scale":
        return lambda p: ad.mean(ad.scale(p, -1.7)), rng.standard_normal((3, 4))
    if kind == "tanh":
        return _unary_case(ad.tanh, rng)
    if kind == "elu":
        return _unary_case(ad.elu, rng, avoid_zero=True)
    if kind == "exp":
        return _unary_case(ad.exp, rng)
    if kind == "log":
        return _unary_case(ad.log, rng, positive=True)
    if kind == "mean":
        return lambda p: ad.mean(p), rng.standard_normal((3, 4))
    if kind == "sum":
        return lambda p: ad.tsum(p), rng.standard_normal((3, 4))
    if kind == "row_sum":
        w = rng.standard_normal(3)
        return lambda p: ad.mean(ad.mul(ad.row_sum(p), ad.Tensor(w))), rng.standard_normal((3, 4))
    if kind == "sq_err":
        tgt = rng.standard_normal((3, 4))
        return lambda p: ad.sq_err(p, ad.Tensor(tgt)), rng.standard_normal((3, 4))
    if kind == "concatenate":
        other = rng.standard_normal((3, 2))
        w = rng.standard_normal(6)
        return (lambda p: ad.mean(ad.mul(ad.concat([p, ad.Tensor(other)], axis=1),
                                         ad.Tensor(w))),
                rng.standard_normal((3, 4)))
    if kind == "clip":
        x = rng.uniform(-2.0, 2.0, (3, 4))
        x = np.where(np.abs(np.abs(x) - 0.8) < 5e-2, x * 0.5, x)
        return lambda p: ad.mean(ad.clip(p, -0.8, 0.8)), x
    raise AssertionError(f"no finite-difference case for kind {kind!r}")


@pytest.mark.parametrize("kind", sorted(ad.OPS))
def test_registered_kind_matches_finite_differences(kind):
    rng = np.random.default_rng(hash(kind) % 2**32)
    for _ in range(10):
        f, point = _kind_case(kind, rng)
        assert ad.grad_check(f, point, h=1e-6) < 1e-4, kind


def test_graph_evaluation_deterministic():
    def run():
        rng = np.random.default_rng(7)
        x = ad.Tensor(rng.standard_normal((4, 3)), requires_grad=True)
        w = ad.Tensor(rng.standard_normal((3, 2)), requires_grad=True)
        loss = ad.mean(ad.elu(ad.matmul(x, w)))
        ad.backward(loss)
        return loss.data.copy(), x.grad.copy(), w.grad.copy()

    l1, gx1, gw1 = run()
    l2, gx2, gw2 = run()
    assert np.array_equal(l1, l2)
    assert np.array_equal(gx1, gx2)
    assert np.array_equal(gw1, gw2)


# --- grad_check -------------------------------------------------------------

def test_grad_check_constant_function_is_zero():
    assert ad.grad_check(lambda p: ad.Tensor(3.0), np.ones(4)) == 0.0


def test_grad_check_quadratic_is_exact():
    rng = np.random.default_rng(8)
    err = ad.grad_check(lambda p: ad.scale(ad.sq_err(p, ad.Tensor(np.zeros(5))), 0.5),
                        rng.standard_normal(5))
    assert err < 1e-8


def test_grad_check_rejects_non_finite():
    def f(p):
        return ad.log(ad.tsum(p))  # negative sum -> nan

    with pytest.raises(ValueError, match="non-finite"):
        ad.grad_check(f, -np.ones(3))


def test_grad_check_rejects_bad_h():
    with pytest.raises(ValueError, match="h"):
        ad.grad_check(lambda p: ad.tsum(p), np.ones(2), h=0.0)


# --- Adam -------------------------------------------------------------------

def test_adam_zero_grad_keeps_params():
    state = ad.adam_init(4, lr=0.1)
    p = np.ones(4)
    new_p, state = ad.adam_step(p, np.zeros(4), state)
    assert np.array_equal(new_p, p)
    assert state.step == 1


def test_adam_first_step_magnitude_is_lr():
    # bias-corrected first step: |delta| = lr * |g| / (|g| + eps*sqrt(1-b2))
    state = ad.adam_init(1, lr=0.05)
    new_p, _ = ad.adam_step(np.array([2.0]), np.array([0.7]), state)
    assert abs(abs(new_p[0] - 2.0) - 0.05) < 1e-8


def test_adam_rejects_non_finite_gradient_with_index():
    state = ad.adam_init(3)
    g = np.array([0.0, np.nan, 1.0])
    with pytest.raises(ValueError, match="index 1"):
        ad.adam_step(np.zeros(3), g, state)


def test_adam_ten_step_trace_matches_reference():
    # independent scalar reference: f(x) = x^2, grad = 2x, lr = 0.1
    lr, b1, b2, eps = 0.1, 0.9, 0.999, 1e-8
    x_ref, m, v = 1.0, 0.0, 0.0
    trace = []
    for k in range(1, 11):
        g = 2.0 * x_ref
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        m_hat = m / (1 - b1**k)
        v_hat = v / (1 - b2**k)
        x_ref = x_ref - lr * m_hat / (np.sqrt(v_hat) + eps)
        trace.append(x_ref)

    state = ad.adam_init(1, lr=lr)
    x = np.array([1.0])
    for k in range(10):
        x, state = ad.adam_step(x, 2.0 * x, state)
        assert abs(x[0] - trace[k]) < 1e-10
    assert state.step == 10


def test_adam_wrapper_updates_tensors_in_place():
    t = ad.Tensor(np.ones(3), requires_grad=True)
    opt = ad.Adam([t], lr=0.1)
    loss = ad.sq_err(t, ad.Tensor(np.zeros(3)))
    ad.backward(loss)
    opt.step()
    assert np.all(t.data < 1.0)
    assert opt.state.step == 1
