import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from fredo import nn
from fredo.errors import NoForwardCache, ShapeMismatch


def random_params(rng, input_len, output_len, depth):
    """Fully random parameters (no zero second layers) so every path carries gradient.

    Weights are scaled by 1/sqrt(fan_in) to keep activations O(1); unit-normal
    weights at depth 3 push the loss to ~1e6, where central differences are
    dominated by cancellation (eps * loss / h) rather than the gradient.
    """

    def layer(fan_out, fan_in):
        return nn.LinearLayer(rng.normal(size=(fan_out, fan_in)) / np.sqrt(fan_in), rng.normal(size=fan_out))

    proj = layer(output_len, input_len)
    mixers = tuple(nn.MixerBlock(layer(output_len, output_len), layer(output_len, output_len)) for _ in range(depth))
    return nn.ModelParams(proj, mixers)


# central differences with h = 1e-5 are meaningless across a ReLU kink; samples
# whose pre-activations come this close to zero are redrawn
KINK_MARGIN = 1e-3


def relu_margin(cache) -> float:
    """Smallest |pre-activation| feeding any ReLU in the stack."""
    return min((float(np.min(np.abs(pre))) for _, pre in cache.mixer_inputs), default=np.inf)


def assert_grads_close(analytic, numeric, rtol=1e-4, atol=1e-6):
    for (name, a), n in zip(analytic.named_tensors(), numeric.tensors()):
        bound = atol + rtol * np.maximum(np.abs(a), np.abs(n))
        assert np.all(np.abs(a - n) <= bound), f"{name}: max diff {np.max(np.abs(a - n))}"


class TestForward:
    def test_linear_hand_example(self):
        layer = nn.LinearLayer([[1.0, 2.0], [3.0, 4.0]], [0.0, 0.0])
        np.testing.assert_array_equal(nn.linear_forward(layer, [1.0, 1.0]), [3.0, 7.0])

    def test_identity_mixer_is_relu(self, rng):
        eye = nn.LinearLayer(np.eye(5), np.zeros(5))
        x = rng.normal(size=5)
        np.testing.assert_array_equal(nn.mixer_forward(nn.MixerBlock(eye, eye), x), np.maximum(x, 0))

    def test_zero_weights_give_second_bias(self, rng):
        b1, b2 = rng.normal(size=4), rng.normal(size=4)
        block = nn.MixerBlock(nn.LinearLayer(np.zeros((4, 4)), b1), nn.LinearLayer(np.zeros((4, 4)), b2))
        for _ in range(3):
            np.testing.assert_array_equal(nn.mixer_forward(block, rng.normal(size=4)), b2)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            nn.linear_forward(nn.LinearLayer(np.eye(3), np.zeros(3)), np.zeros(4))

    def test_zero_second_layer_stack_outputs_zero(self, rng):
        params = nn.init_params(6, 5, 3, rng)
        out, _ = nn.stack_forward(params, rng.normal(size=(10, 6)))
        assert np.all(out == 0.0)

    def test_init_bounds(self, rng):
        params = nn.init_params(16, 8, 2, rng)
        assert np.all(np.abs(params.input_proj.weights) <= 1 / 4)
        assert params.num_parameters() == 16 * 8 + 8 + 2 * 2 * (64 + 8)


class TestBackward:
    @settings(max_examples=25, deadline=None)
    @given(
        st.integers(1, 8),
        st.integers(1, 8),
        st.integers(1, 3),
        st.integers(1, 4),
        st.integers(0, 2**32 - 1),
    )
    def test_matches_finite_differences(self, input_len, output_len, depth, batch, seed):
        rng = np.random.default_rng(seed)
        params = random_params(rng, input_len, output_len, depth)
        x = rng.normal(size=(batch, input_len))
        y = rng.normal(size=(batch, output_len))

        def loss(p):
            return nn.mse(nn.stack_forward(p, x)[0], y)

        out, cache = nn.stack_forward(params, x)
        assume(relu_margin(cache) > KINK_MARGIN)
        grads, dx = nn.backward(params, cache, nn.mse_grad(out, y))
        assert_grads_close(grads, nn.finite_difference_gradients(loss, params))

        h = 1e-5
        dx_num = np.zeros_like(x)
        for idx in np.ndindex(*x.shape):
            xp, xm = x.copy(), x.copy()
            xp[idx] += h
            xm[idx] -= h
            dx_num[idx] = (nn.mse(nn.stack_forward(params, xp)[0], y) - nn.mse(nn.stack_forward(params, xm)[0], y)) / (2 * h)
        np.testing.assert_allclose(dx, dx_num, rtol=1e-4, atol=1e-6)

    def test_zero_upstream(self, rng):
        params = random_params(rng, 4, 3, 2)
        out, cache = nn.stack_forward(params, rng.normal(size=(5, 4)))
        grads, dx = nn.backward(params, cache, np.zeros_like(out))
        assert all(np.all(g == 0) for g in grads.tensors())
        assert np.all(dx == 0)

    def test_no_cache(self, rng):
        params = random_params(rng, 4, 3, 1)
        with pytest.raises(NoForwardCache):
            nn.backward(params, None, np.zeros(3))

    def test_single_linear_layer_closed_form(self, rng):
        o, i = 4, 3
        layer = nn.LinearLayer(rng.normal(size=(o, i)), rng.normal(size=o))
        x, y = rng.normal(size=i), rng.normal(size=o)
        pred = nn.linear_forward(layer, x)
        dw, db, _ = nn.linear_backward(layer, x, nn.mse_grad(pred, y))
        closed = 2.0 / o * np.outer(layer.weights @ x + layer.bias - y, x)
        np.testing.assert_allclose(dw, closed, rtol=1e-12)
        np.testing.assert_allclose(db, 2.0 / o * (pred - y), rtol=1e-12)
        # and against central differences
        h = 1e-5
        for a in range(o):
            for b in range(i):
                wp, wm = layer.weights.copy(), layer.weights.copy()
                wp[a, b] += h
                wm[a, b] -= h
                up = nn.mse(nn.linear_forward(nn.LinearLayer(wp, layer.bias), x), y)
                down = nn.mse(nn.linear_forward(nn.LinearLayer(wm, layer.bias), x), y)
                assert closed[a, b] == pytest.approx((up - down) / (2 * h), rel=1e-5, abs=1e-8)

    def test_relu_derivative_at_zero_is_zero(self):
        # first layer pre-activation is exactly zero
        first = nn.LinearLayer(np.zeros((2, 2)), np.zeros(2))
        second = nn.LinearLayer(np.eye(2), np.zeros(2))
        proj = nn.LinearLayer(np.eye(2), np.zeros(2))
        params = nn.ModelParams(proj, (nn.MixerBlock(first, second),))
        _, cache = nn.stack_forward(params, np.array([[1.0, -1.0]]))
        grads, _ = nn.backward(params, cache, np.ones((1, 2)))
        assert np.all(grads.mixers[0].first.bias == 0)


class TestLosses:
    def test_zero_when_equal(self, rng):
        x = rng.normal(size=7)
        assert nn.mse(x, x) == 0.0 and nn.mae(x, x) == 0.0

    def test_hand_example(self):
        assert nn.mse([0.0, 0.0], [1.0, 3.0]) == 5.0
        assert nn.mae([0.0, 0.0], [1.0, 3.0]) == 2.0

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            nn.mse([1.0], [1.0, 2.0])

    @given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=20), st.integers(0, 2**32 - 1))
    def test_jensen(self, values, seed):
        pred = np.array(values)
        target = np.random.default_rng(seed).normal(size=pred.size)
        m2, m1 = nn.mse(pred, target), nn.mae(pred, target)
        assert m2 >= 0
        assert m1**2 <= m2 * (1 + 1e-12) + 1e-300


class TestAdam:
    def _scalar(self, value):
        proj = nn.LinearLayer([[value]], [0.0])
        block = nn.MixerBlock(nn.LinearLayer([[0.0]], [0.0]), nn.LinearLayer([[0.0]], [0.0]))
        return nn.ModelParams(proj, (block,))

    def test_zero_gradient(self, rng):
        params = nn.init_params(3, 2, 2, rng)
        state = nn.AdamState.create(params, lr=0.1)
        new, state = nn.adam_step(params, params.zeros_like(), state)
        assert state.step_count == 1
        for a, b in zip(new.tensors(), params.tensors()):
            np.testing.assert_array_equal(a, b)

    def test_first_step(self):
        params = self._scalar(0.0)
        grads = self._scalar(1.0)
        state = nn.AdamState.create(params, lr=0.1)
        new, _ = nn.adam_step(params, grads, state)
        # m_hat = 1, v_hat = 1 after bias correction
        assert new.input_proj.weights[0, 0] == pytest.approx(-0.1 / (1 + 1e-8), rel=1e-12)

    def test_constant_gradient_step_size(self):
        params = self._scalar(0.0)
        grads = self._scalar(0.37)
        state = nn.AdamState.create(params, lr=0.01)
        prev = 0.0
        for _ in range(500):
            params, state = nn.adam_step(params, grads, state)
            value = params.input_proj.weights[0, 0]
            step = prev - value
            prev = value
        assert step == pytest.approx(0.01, rel=1e-6)

    def test_determinism(self, rng):
        def run():
            r = np.random.default_rng(3)
            params = nn.init_params(4, 3, 2, r)
            state = nn.AdamState.create(params, lr=1e-2)
            x, y = r.normal(size=(8, 4)), r.normal(size=(8, 3))
            for _ in range(20):
                out, cache = nn.stack_forward(params, x)
                grads, _ = nn.backward(params, cache, nn.mse_grad(out, y))
                params, state = nn.adam_step(params, grads, state)
            return params

        for a, b in zip(run().tensors(), run().tensors()):
            assert np.array_equal(a, b)

    def test_shape_mismatch(self, rng):
        params = nn.init_params(3, 2, 1, rng)
        other = nn.init_params(4, 2, 1, rng)
        with pytest.raises(ShapeMismatch):
            nn.adam_step(params, other, nn.AdamState.create(params))
