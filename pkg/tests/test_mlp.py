import numpy as np
import pytest

from pusmi.mlp import (
    BnGrads,
    BnState,
    MlpGrads,
    MlpSpec,
    SgdConfig,
    backward,
    forward,
    init_params,
    params_from_dict,
    params_to_dict,
    sgd_step,
)

FD_SPECS = [
    MlpSpec((2, 1)),
    MlpSpec((3, 4, 2)),
    MlpSpec((3, 4, 2), hidden_batchnorm=True),
    MlpSpec((2, 5, 3, 1), hidden_batchnorm=(True, False)),
    MlpSpec((3, 4, 1), hidden_batchnorm=True, input_batchnorm=True, input_relu=True),
]


def linear_loss(params, spec, x, v):
    """Scalar loss sum(out * v); its output gradient is constant in out."""
    out, _ = forward(params, spec, x, "train")
    return float(np.sum(out * v))


def param_leaves(params):
    """All trainable arrays of a network, batchnorm scale/shift included."""
    leaves = list(params.weights) + list(params.biases)
    for bn in [params.input_bn, *params.hidden_bn]:
        if bn is not None:
            leaves += [bn.gamma, bn.beta]
    return leaves


def grad_leaves(grads):
    leaves = list(grads.weights) + list(grads.biases)
    for bn in [grads.input_bn, *grads.hidden_bn]:
        if bn is not None:
            leaves += [bn.gamma, bn.beta]
    return leaves


class TestMlpSpec:
    def test_rejects_short_or_nonpositive_shapes(self):
        with pytest.raises(ValueError):
            MlpSpec((3,))
        with pytest.raises(ValueError):
            MlpSpec((3, 0, 1))

    def test_bool_broadcasts_over_hidden_layers(self):
        spec = MlpSpec((2, 4, 4, 1), hidden_batchnorm=True)
        assert spec.hidden_batchnorm == (True, True)
        assert spec.has_batchnorm

    def test_flag_count_must_match_hidden_layers(self):
        with pytest.raises(ValueError, match="flag"):
            MlpSpec((2, 4, 4, 1), hidden_batchnorm=(True,))

    def test_dimensions(self):
        spec = MlpSpec((5, 3, 2))
        assert (spec.in_dim, spec.out_dim, spec.n_layers) == (5, 2, 2)
        assert not spec.has_batchnorm


class TestInitParams:
    def test_glorot_bounds_and_zero_biases(self):
        spec = MlpSpec((6, 4, 2))
        params = init_params(spec, 0)
        for w, (fan_in, fan_out) in zip(params.weights, [(6, 4), (4, 2)]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            assert w.shape == (fan_in, fan_out)
            assert np.abs(w).max() <= limit
        assert all(not b.any() for b in params.biases)

    def test_batchnorm_initialised_to_identity(self):
        spec = MlpSpec((3, 4, 1), hidden_batchnorm=True, input_batchnorm=True)
        params = init_params(spec, 1)
        for bn in (params.input_bn, params.hidden_bn[0]):
            assert np.array_equal(bn.gamma, np.ones_like(bn.gamma))
            assert not bn.beta.any() and not bn.running_mean.any()
            assert np.array_equal(bn.running_var, np.ones_like(bn.running_var))

    def test_deterministic_in_seed(self):
        spec = MlpSpec((3, 2))
        a, b = init_params(spec, 7), init_params(spec, 7)
        assert all(np.array_equal(x, y) for x, y in zip(a.weights, b.weights))


class TestForward:
    def test_plain_linear_layer_is_affine(self):
        spec = MlpSpec((2, 3))
        params = init_params(spec, 2)
        x = np.random.default_rng(3).normal(size=(5, 2))
        out, _ = forward(params, spec, x, "eval")
        np.testing.assert_allclose(out, x @ params.weights[0] + params.biases[0])

    def test_train_mode_standardises_with_batch_statistics(self):
        spec = MlpSpec((3, 3), input_batchnorm=True)
        params = init_params(spec, 4)
        params.weights[0] = np.eye(3)
        x = np.random.default_rng(5).normal(loc=2.0, scale=3.0, size=(64, 3))
        out, _ = forward(params, spec, x, "train")
        expect = (x - x.mean(axis=0)) / np.sqrt(x.var(axis=0) + 1e-5)
        np.testing.assert_allclose(out, expect, rtol=1e-12)

    def test_train_mode_updates_running_statistics_with_momentum(self):
        spec = MlpSpec((2, 1), input_batchnorm=True)
        params = init_params(spec, 6)
        x = np.random.default_rng(7).normal(size=(32, 2))
        forward(params, spec, x, "train")
        np.testing.assert_allclose(params.input_bn.running_mean, 0.1 * x.mean(axis=0))
        np.testing.assert_allclose(
            params.input_bn.running_var, 0.9 + 0.1 * x.var(axis=0)
        )

    def test_eval_mode_uses_running_statistics_and_mutates_nothing(self):
        spec = MlpSpec((2, 1), input_batchnorm=True)
        params = init_params(spec, 8)
        params.input_bn.running_mean = np.array([1.0, -1.0])
        params.input_bn.running_var = np.array([4.0, 0.25])
        before = params.clone()
        x = np.random.default_rng(9).normal(size=(10, 2))
        out, _ = forward(params, spec, x, "eval")
        x_hat = (x - [1.0, -1.0]) / np.sqrt(np.array([4.0, 0.25]) + 1e-5)
        np.testing.assert_allclose(out, x_hat @ params.weights[0] + params.biases[0])
        assert np.array_equal(params.input_bn.running_mean, before.input_bn.running_mean)
        assert np.array_equal(params.input_bn.running_var, before.input_bn.running_var)

    def test_input_relu_clips_before_first_layer(self):
        spec = MlpSpec((2, 1), input_relu=True)
        params = init_params(spec, 10)
        x = np.array([[-3.0, 2.0], [1.0, -4.0]])
        out, _ = forward(params, spec, x, "eval")
        np.testing.assert_allclose(
            out, np.maximum(x, 0.0) @ params.weights[0] + params.biases[0]
        )

    def test_batchnorm_needs_two_rows_in_train_mode(self):
        spec = MlpSpec((2, 1), input_batchnorm=True)
        params = init_params(spec, 11)
        with pytest.raises(ValueError, match="at least 2"):
            forward(params, spec, np.zeros((1, 2)), "train")
        forward(params, spec, np.zeros((1, 2)), "eval")  # fine without batch stats

    def test_rejects_bad_mode_and_shape(self):
        spec = MlpSpec((2, 1))
        params = init_params(spec, 12)
        with pytest.raises(ValueError, match="mode"):
            forward(params, spec, np.zeros((3, 2)), "test")
        with pytest.raises(ValueError, match="columns"):
            forward(params, spec, np.zeros((3, 5)), "eval")


class TestBackward:
    @pytest.mark.parametrize("spec", FD_SPECS, ids=lambda s: "x".join(map(str, s.layer_sizes)))
    def test_matches_central_differences(self, spec):
        rng = np.random.default_rng(13)
        params = init_params(spec, rng)
        x = rng.normal(size=(16, spec.in_dim)) + 0.3
        v = rng.normal(size=spec.out_dim)

        out, cache = forward(params.clone(), spec, x, "train")
        grads, input_grad = backward(cache, np.broadcast_to(v, out.shape).copy())

        eps = 1e-5
        worst = 0.0
        for leaf, g_leaf in zip(param_leaves(params), grad_leaves(grads)):
            it = np.nditer(leaf, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                saved = leaf[idx]
                leaf[idx] = saved + eps
                up = linear_loss(params.clone(), spec, x, v)
                leaf[idx] = saved - eps
                down = linear_loss(params.clone(), spec, x, v)
                leaf[idx] = saved
                fd = (up - down) / (2 * eps)
                # Denominator floor sits above the difference-quotient noise
                # eps_machine * |loss| / eps: a bias feeding a batchnorm
                # layer has an exactly zero gradient and both sides are noise.
                err = abs(g_leaf[idx] - fd) / max(abs(fd), abs(g_leaf[idx]), 1e-5)
                worst = max(worst, err)
        assert worst < 1e-4

    def test_input_gradient_matches_central_differences(self):
        spec = MlpSpec((3, 4, 2), hidden_batchnorm=True)
        rng = np.random.default_rng(14)
        params = init_params(spec, rng)
        x = rng.normal(size=(8, 3)) + 0.2
        v = rng.normal(size=2)
        out, cache = forward(params.clone(), spec, x, "train")
        _, input_grad = backward(cache, np.broadcast_to(v, out.shape).copy())
        eps = 1e-5
        for idx in [(0, 0), (3, 1), (7, 2)]:
            saved = x[idx]
            x[idx] = saved + eps
            up = linear_loss(params.clone(), spec, x, v)
            x[idx] = saved - eps
            down = linear_loss(params.clone(), spec, x, v)
            x[idx] = saved
            fd = (up - down) / (2 * eps)
            assert input_grad[idx] == pytest.approx(fd, rel=1e-4, abs=1e-8)

    def test_least_squares_gradient_closed_form(self):
        spec = MlpSpec((3, 1))
        params = init_params(spec, 15)
        rng = np.random.default_rng(16)
        x = rng.normal(size=(20, 3))
        y = rng.normal(size=(20, 1))
        out, cache = forward(params, spec, x, "train")
        grads, _ = backward(cache, (out - y) / len(x))
        np.testing.assert_allclose(grads.weights[0], x.T @ (out - y) / len(x), rtol=1e-14)
        np.testing.assert_allclose(grads.biases[0], (out - y).mean(axis=0), rtol=1e-14)

    def test_zero_output_grad_gives_zero_grads(self):
        spec = MlpSpec((2, 3, 1), hidden_batchnorm=True, input_batchnorm=True)
        params = init_params(spec, 17)
        x = np.random.default_rng(18).normal(size=(6, 2))
        out, cache = forward(params, spec, x, "train")
        grads, input_grad = backward(cache, np.zeros_like(out))
        assert not input_grad.any()
        for leaf in grad_leaves(grads):
            assert not leaf.any()

    def test_requires_train_cache_and_matching_shape(self):
        spec = MlpSpec((2, 1))
        params = init_params(spec, 19)
        x = np.zeros((4, 2))
        out, eval_cache = forward(params, spec, x, "eval")
        with pytest.raises(ValueError, match="train"):
            backward(eval_cache, np.zeros_like(out))
        _, cache = forward(params, spec, x, "train")
        with pytest.raises(ValueError, match="shape"):
            backward(cache, np.zeros((4, 2)))


class TestSgdStep:
    def _one_weight(self, value):
        spec = MlpSpec((1, 1))
        params = init_params(spec, 0)
        params.weights[0][:] = value
        return spec, params

    def test_hand_arithmetic(self):
        _, params = self._one_weight(2.0)
        grads = MlpGrads(weights=[np.array([[3.0]])], biases=[np.array([0.5])], hidden_bn=[])
        cfg = SgdConfig(learning_rate=0.1, weight_decay=0.5)
        stepped = sgd_step(params, grads, cfg, np.random.default_rng(0))
        # w: 2 - 0.1 * (3 + 0.5 * 2); b: 0 - 0.1 * (0.5 + 0)
        assert stepped.weights[0][0, 0] == pytest.approx(1.6, abs=1e-15)
        assert stepped.biases[0][0] == pytest.approx(-0.05, abs=1e-15)

    def test_zero_learning_rate_is_identity(self):
        spec = MlpSpec((2, 3, 1), hidden_batchnorm=True)
        params = init_params(spec, 20)
        x = np.random.default_rng(21).normal(size=(8, 2))
        out, cache = forward(params.clone(), spec, x, "train")
        grads, _ = backward(cache, np.ones_like(out))
        cfg = SgdConfig(learning_rate=0.0, weight_decay=0.1, grad_noise_std=1.0)
        stepped = sgd_step(params, grads, cfg, np.random.default_rng(22))
        assert all(np.array_equal(a, b) for a, b in zip(stepped.weights, params.weights))
        assert np.array_equal(stepped.hidden_bn[0].gamma, params.hidden_bn[0].gamma)

    def test_noise_reproducible_from_generator_state(self):
        spec = MlpSpec((3, 2))
        params = init_params(spec, 23)
        grads = MlpGrads(
            weights=[np.ones((3, 2))], biases=[np.ones(2)], hidden_bn=[]
        )
        cfg = SgdConfig(learning_rate=0.05, grad_noise_std=0.3)
        a = sgd_step(params, grads, cfg, np.random.default_rng(99))
        b = sgd_step(params, grads, cfg, np.random.default_rng(99))
        c = sgd_step(params, grads, cfg, np.random.default_rng(100))
        assert np.array_equal(a.weights[0], b.weights[0])
        assert not np.array_equal(a.weights[0], c.weights[0])

    def test_batchnorm_scale_shift_exempt_from_weight_decay(self):
        spec = MlpSpec((2, 3, 1), hidden_batchnorm=True)
        params = init_params(spec, 24)
        params.hidden_bn[0].gamma = np.array([2.0, 3.0, 4.0])
        grads = MlpGrads(
            weights=[np.zeros((2, 3)), np.zeros((3, 1))],
            biases=[np.zeros(3), np.zeros(1)],
            hidden_bn=[BnGrads(np.zeros(3), np.zeros(3))],
        )
        cfg = SgdConfig(learning_rate=0.1, weight_decay=1.0)
        stepped = sgd_step(params, grads, cfg, np.random.default_rng(25))
        # Zero gradients: weights still shrink through decay, gamma must not.
        assert np.array_equal(stepped.hidden_bn[0].gamma, params.hidden_bn[0].gamma)
        assert np.abs(stepped.weights[0]).max() < np.abs(params.weights[0]).max()

    def test_inputs_untouched_and_running_stats_copied(self):
        spec = MlpSpec((2, 1), input_batchnorm=True)
        params = init_params(spec, 26)
        snapshot = params.clone()
        grads = MlpGrads(
            weights=[np.ones((2, 1))],
            biases=[np.ones(1)],
            hidden_bn=[],
            input_bn=BnGrads(np.ones(2), np.ones(2)),
        )
        stepped = sgd_step(params, grads, SgdConfig(0.1), np.random.default_rng(27))
        assert np.array_equal(params.weights[0], snapshot.weights[0])
        assert np.array_equal(stepped.input_bn.running_mean, params.input_bn.running_mean)
        stepped.input_bn.running_mean[0] = 123.0
        assert params.input_bn.running_mean[0] != 123.0

    def test_config_validation(self):
        with pytest.raises(ValueError, match="learning_rate"):
            SgdConfig(learning_rate=-0.1)
        with pytest.raises(ValueError, match=">= 0"):
            SgdConfig(learning_rate=0.1, weight_decay=-1.0)
        with pytest.raises(ValueError, match="batch_size"):
            SgdConfig(learning_rate=0.1, batch_size=0)
        SgdConfig(learning_rate=0.0)  # zero step size is a legal freeze

    def test_descends_convex_least_squares(self):
        spec = MlpSpec((2, 1))
        params = init_params(spec, 28)
        rng = np.random.default_rng(29)
        x = rng.normal(size=(50, 2))
        y = x @ np.array([[1.5], [-0.5]]) + 0.3
        cfg = SgdConfig(learning_rate=0.05)

        def loss(p):
            out, _ = forward(p, spec, x, "eval")
            return float(np.mean((out - y) ** 2))

        start = loss(params)
        for _ in range(60):
            out, cache = forward(params, spec, x, "train")
            grads, _ = backward(cache, 2 * (out - y) / len(x))
            params = sgd_step(params, grads, cfg, rng)
        assert loss(params) < 0.05 * start


class TestSerialisation:
    def test_round_trip_with_batchnorm(self):
        spec = MlpSpec((3, 4, 2), hidden_batchnorm=True, input_batchnorm=True)
        params = init_params(spec, 30)
        x = np.random.default_rng(31).normal(size=(12, 3))
        forward(params, spec, x, "train")  # make running stats non-trivial
        restored = params_from_dict(params_to_dict(params))
        assert all(np.array_equal(a, b) for a, b in zip(restored.weights, params.weights))
        assert all(np.array_equal(a, b) for a, b in zip(restored.biases, params.biases))
        assert np.array_equal(restored.input_bn.running_var, params.input_bn.running_var)
        assert np.array_equal(restored.hidden_bn[0].gamma, params.hidden_bn[0].gamma)

    def test_round_trip_without_batchnorm(self):
        params = init_params(MlpSpec((2, 1)), 32)
        restored = params_from_dict(params_to_dict(params))
        assert restored.input_bn is None
        assert restored.hidden_bn == []
        assert np.array_equal(restored.weights[0], params.weights[0])
