import numpy as np

from progip import autodiff
from progip.autodiff import concat, cross3, layer_norm, no_grad, softmax, stack, tensor


def numerical_grad(f, x, eps=1e-6):
    """Central finite differences of a scalar-valued f at x."""
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        hi = f(x)
        flat[i] = orig - eps
        lo = f(x)
        flat[i] = orig
        gf[i] = (hi - lo) / (2 * eps)
    return g


def check_op(build, shapes, seed=0, tol=1e-7):
    """Compare autodiff gradients of sum(build(*tensors)) to finite differences."""
    rng = np.random.default_rng(seed)
    arrays = [rng.normal(size=s) for s in shapes]
    tensors = [tensor(a.copy(), requires_grad=True) for a in arrays]
    out = build(*tensors)
    loss = out.sum() if out.shape != () else out
    loss.backward()
    for k, (a, t) in enumerate(zip(arrays, tensors)):
        def f(x, k=k):
            vals = [arr.copy() for arr in arrays]
            vals[k] = x
            with no_grad():
                res = build(*[tensor(v) for v in vals])
            return float(res.data.sum())

        num = numerical_grad(f, a.copy())
        err = np.abs(t.grad - num).max()
        scale = max(np.abs(num).max(), 1.0)
        assert err / scale < tol, f"input {k}: err {err:.3g} vs scale {scale:.3g}"


class TestElementwiseOps:
    def test_add_broadcast(self):
        check_op(lambda a, b: a + b, [(4, 5), (5,)])

    def test_sub_mul(self):
        check_op(lambda a, b: (a - b) * a, [(3, 4), (3, 4)])

    def test_div(self):
        check_op(lambda a, b: a / (b * b + 2.0), [(6,), (6,)])

    def test_tanh_sigmoid_relu(self):
        check_op(lambda a: a.tanh() + a.sigmoid() + (a * 3).relu(), [(50,)], seed=3)

    def test_sqrt_exp(self):
        check_op(lambda a: (a * a + 1.0).sqrt() + (a * 0.1).exp(), [(20,)])

    def test_square_mean(self):
        check_op(lambda a: a.square().mean(axis=1), [(4, 7)])


class TestMatmulAndShape:
    def test_matmul(self):
        check_op(lambda a, b: a @ b, [(4, 6), (6, 3)])

    def test_batched_matmul(self):
        check_op(lambda a, b: a @ b, [(2, 5, 4, 6), (2, 5, 6, 3)])

    def test_matmul_broadcast_weights(self):
        # shared weight matrix against a batch: the gradient sums over batch
        check_op(lambda a, b: a @ b, [(7, 3, 4), (4, 2)])

    def test_reshape_transpose(self):
        check_op(lambda a: a.reshape(6, 4).transpose((1, 0)) @ a.reshape(6, 4), [(24,)])

    def test_getitem_slice(self):
        check_op(lambda a: a[:, 1:3] * 2.0 + a[:, :2], [(5, 4)])

    def test_getitem_overlapping(self):
        check_op(lambda a: a[1:] * a[:-1], [(6, 2)])

    def test_swapaxes(self):
        check_op(lambda a, b: a.swapaxes(-1, -2) @ b, [(3, 4, 5), (3, 4, 2)])


class TestCompositeOps:
    def test_concat(self):
        check_op(lambda a, b: concat([a, b], axis=-1) @ concat([a, b], axis=-1).swapaxes(-1, -2), [(3, 4), (3, 2)])

    def test_stack(self):
        check_op(lambda a, b: stack([a * 2.0, b], axis=0), [(4, 3), (4, 3)])

    def test_softmax_rows_sum_to_one(self):
        x = tensor(np.random.default_rng(0).normal(size=(5, 9)))
        s = softmax(x, axis=-1)
        np.testing.assert_allclose(s.data.sum(axis=-1), 1.0, atol=1e-12)

    def test_softmax_grad(self):
        check_op(lambda a, w: (softmax(a, axis=-1) * w).sum(), [(4, 6), (4, 6)])

    def test_layer_norm_grad(self):
        check_op(lambda x, g, b: layer_norm(x, g, b), [(5, 8), (8,), (8,)], tol=1e-6)

    def test_layer_norm_standardizes(self):
        x = tensor(np.random.default_rng(1).normal(size=(10, 16)) * 5 + 3)
        out = layer_norm(x, tensor(np.ones(16)), tensor(np.zeros(16)))
        np.testing.assert_allclose(out.data.mean(axis=-1), 0.0, atol=1e-10)
        np.testing.assert_allclose(out.data.std(axis=-1), 1.0, atol=1e-3)

    def test_cross3(self):
        check_op(lambda a, b: cross3(a, b), [(7, 3), (7, 3)])
        rng = np.random.default_rng(2)
        a, b = rng.normal(size=(2, 5, 3))
        got = cross3(tensor(a), tensor(b)).data
        np.testing.assert_allclose(got, np.cross(a, b), atol=1e-12)


class TestGraphMechanics:
    def test_grad_accumulates_over_reuse(self):
        x = tensor(np.array([2.0, 3.0]), requires_grad=True)
        y = x * x + x * 4.0
        y.sum().backward()
        np.testing.assert_allclose(x.grad, 2 * x.data + 4.0)

    def test_detach_blocks_gradient(self):
        x = tensor(np.array([1.0, 2.0]), requires_grad=True)
        y = (x.detach() * 3.0 + x).sum()
        y.backward()
        np.testing.assert_allclose(x.grad, [1.0, 1.0])

    def test_no_grad_builds_no_graph(self):
        x = tensor(np.ones(3), requires_grad=True)
        with no_grad():
            y = x * 2.0
        assert not y.requires_grad
        assert y._backward is None

    def test_no_grad_values_bitwise_equal(self):
        rng = np.random.default_rng(3)
        a = rng.normal(size=(6, 6))

        def run():
            x = tensor(a.copy(), requires_grad=autodiff.grad_enabled())
            return (softmax(x @ x, axis=-1).tanh()).data

        traced = run()
        with no_grad():
            untraced = run()
        np.testing.assert_array_equal(traced, untraced)

    def test_backward_seed_gradient(self):
        x = tensor(np.arange(4.0), requires_grad=True)
        y = x * x
        y.backward(np.array([1.0, 0.0, 2.0, 0.0]))
        np.testing.assert_allclose(x.grad, 2.0 * x.data * [1.0, 0.0, 2.0, 0.0])

    def test_float32_stays_float32(self):
        x = tensor(np.ones((3, 3), dtype=np.float32), requires_grad=True)
        y = (x @ x + 1.5) * 0.5
        assert y.dtype == np.float32
        y.sum().backward()
        assert x.grad.dtype == np.float32
