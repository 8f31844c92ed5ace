import numpy as np
import pytest

from progip import autodiff, backbone
from progip.backbone import (
    BackboneConfig,
    backbone_backward,
    backbone_forward,
    forward,
    init_weights,
    load_weights,
    param_shapes,
    save_weights,
    sinusoidal_encoding,
    wrap_params,
)
from progip.errors import ShapeMismatch

TINY = BackboneConfig(
    in_dim=4, out_dim=8, d_model=8, tf_layers=2, heads=2,
    rnn_layers=2, rnn_width=8, decoder_hidden=8, window=3, dtype="float64",
)
TINY_POSE_ONLY = BackboneConfig(
    in_dim=4, out_dim=2, d_model=8, tf_layers=1, heads=2,
    rnn_layers=1, rnn_width=8, decoder_hidden=8, window=3,
    has_pelvis_head=False, dtype="float64",
)


def run(config, weights, window):
    return backbone_forward(config, weights, window)


class TestInit:
    def test_deterministic(self):
        a = init_weights(TINY, seed=10)
        b = init_weights(TINY, seed=10)
        assert a.keys() == b.keys()
        for k in a:
            np.testing.assert_array_equal(a[k], b[k])

    def test_seed_changes_weights(self):
        a = init_weights(TINY, seed=10)
        b = init_weights(TINY, seed=11)
        assert any(np.abs(a[k] - b[k]).max() > 0 for k in a)

    def test_xavier_bound(self):
        weights = init_weights(TINY, seed=0)
        for name, shape, kind in param_shapes(TINY):
            if kind == "linear":
                bound = np.sqrt(6.0 / (shape[0] + shape[1]))
                assert np.abs(weights[name]).max() <= bound + 1e-12, name

    def test_biases_zero_recurrent_orthogonal(self):
        weights = init_weights(TINY, seed=0)
        for name, shape, kind in param_shapes(TINY):
            if kind == "bias":
                assert np.abs(weights[name]).max() == 0.0
            if kind == "recurrent":
                h = shape[0]
                for g in range(shape[1] // h):
                    block = weights[name][:, g * h:(g + 1) * h]
                    np.testing.assert_allclose(block.T @ block, np.eye(h), atol=1e-6)


class TestForward:
    def test_zero_weights_zero_output(self):
        weights = {k: np.zeros_like(v) for k, v in init_weights(TINY, 0).items()}
        out = run(TINY, weights, np.zeros((3, 4)))
        np.testing.assert_array_equal(out, np.zeros((3, 8)))

    def test_output_shape_paper_instance(self):
        # third-stage shape at paper size: 40 x 165 in, 40 x 42 out
        config = BackboneConfig(in_dim=165, out_dim=42, window=40)
        weights = init_weights(config, seed=10)
        out = run(config, weights, np.random.default_rng(0).normal(size=(40, 165)))
        assert out.shape == (40, 42)

    def test_deterministic_forward(self):
        weights = init_weights(TINY, seed=10)
        x = np.random.default_rng(1).normal(size=(3, 4))
        np.testing.assert_array_equal(run(TINY, weights, x), run(TINY, weights, x))

    def test_shape_mismatch(self):
        weights = init_weights(TINY, seed=10)
        with pytest.raises(ShapeMismatch):
            run(TINY, weights, np.zeros((3, 5)))

    def test_attention_rows_sum_to_one(self):
        weights = init_weights(TINY, seed=10)
        x = autodiff.tensor(np.random.default_rng(2).normal(size=(2, 3, 4)))
        traced = []
        with autodiff.no_grad():
            forward(TINY, wrap_params(weights), x, trace_attn=traced)
        assert len(traced) == TINY.tf_layers
        for attn in traced:
            np.testing.assert_allclose(attn.sum(axis=-1), 1.0, atol=1e-6)

    def test_lstm_forward_direction_causal(self):
        # with the backward direction's outputs ignored, frame t must not
        # depend on frames > t
        config = BackboneConfig(
            in_dim=4, out_dim=8, d_model=8, tf_layers=0, heads=2,
            rnn_layers=1, rnn_width=8, decoder_hidden=None, window=5, dtype="float64",
        )
        weights = init_weights(config, seed=3)
        rng = np.random.default_rng(4)
        x = rng.normal(size=(5, 4))
        x2 = x.copy()
        x2[3:] += rng.normal(size=(2, 4))

        def fwd_states(inp):
            params = wrap_params(weights)
            with autodiff.no_grad():
                h = autodiff.tensor(inp[None].astype(np.float64))
                h = h @ params["proj.w"] + params["proj.b"]
                h = h + sinusoidal_encoding(5, 8, np.float64)
                xg = h @ params["lstm0.fwd.wx"] + params["lstm0.fwd.b"]
                return backbone._lstm_direction(xg, params["lstm0.fwd.wh"], 8, reverse=False).data

        a, b = fwd_states(x), fwd_states(x2)
        np.testing.assert_array_equal(a[0, :3], b[0, :3])
        assert np.abs(a[0, 3:] - b[0, 3:]).max() > 0

    def test_matches_dense_oracle(self):
        """Straight-line numpy reimplementation of the whole forward pass."""
        config = TINY
        weights = init_weights(config, seed=7)
        rng = np.random.default_rng(8)
        x = rng.normal(size=(3, 4))
        got = run(config, weights, x)

        w = weights
        h = x @ w["proj.w"] + w["proj.b"]
        pos = np.arange(3)[:, None].astype(float)
        i = np.arange(8)[None, :]
        h = h + np.where(i % 2 == 0, np.sin(pos / 10000 ** ((2 * (i // 2)) / 8)),
                         np.cos(pos / 10000 ** ((2 * (i // 2)) / 8)))

        def ln(v, gn, bs):
            mu = v.mean(-1, keepdims=True)
            var = ((v - mu) ** 2).mean(-1, keepdims=True)
            return (v - mu) / np.sqrt(var + 1e-5) * gn + bs

        for L in range(config.tf_layers):
            p = f"tf{L}."
            q = (h @ w[p + "wq"] + w[p + "q_b"]).reshape(3, 2, 4).transpose(1, 0, 2)
            k = (h @ w[p + "wk"] + w[p + "k_b"]).reshape(3, 2, 4).transpose(1, 0, 2)
            v = (h @ w[p + "wv"] + w[p + "v_b"]).reshape(3, 2, 4).transpose(1, 0, 2)
            scores = q @ k.transpose(0, 2, 1) / np.sqrt(4)
            e = np.exp(scores - scores.max(-1, keepdims=True))
            attn = e / e.sum(-1, keepdims=True)
            ctx = (attn @ v).transpose(1, 0, 2).reshape(3, 8)
            h = ln(h + ctx @ w[p + "wo"] + w[p + "o_b"], w[p + "ln1.g"], w[p + "ln1.b"])
            ff = np.maximum(h @ w[p + "ff1.w"] + w[p + "ff1.b"], 0) @ w[p + "ff2.w"] + w[p + "ff2.b"]
            h = ln(h + ff, w[p + "ln2.g"], w[p + "ln2.b"])

        def sig(v):
            return 1 / (1 + np.exp(-v))

        for L in range(config.rnn_layers):
            outs = []
            for direction, order in (("fwd", range(3)), ("bwd", range(2, -1, -1))):
                p = f"lstm{L}.{direction}."
                hh = np.zeros(8)
                cc = np.zeros(8)
                seq = [None] * 3
                for t in order:
                    gates = h[t] @ w[p + "wx"] + w[p + "b"] + hh @ w[p + "wh"]
                    ii, ff_, gg, oo = np.split(gates, 4)
                    cc = sig(ff_) * cc + sig(ii) * np.tanh(gg)
                    hh = sig(oo) * np.tanh(cc)
                    seq[t] = hh
                outs.append(np.stack(seq))
            h = np.concatenate(outs, axis=-1)

        def dec(name):
            p = f"dec.{name}."
            return np.maximum(h @ w[p + "w1"] + w[p + "b1"], 0) @ w[p + "w2"] + w[p + "b2"]

        expected = np.concatenate([dec("pelvis"), dec("pose")], axis=-1)
        np.testing.assert_allclose(got, expected, atol=1e-6)


class TestBackward:
    def test_zero_upstream_zero_grads(self):
        weights = init_weights(TINY, seed=10)
        grads = backbone_backward(TINY, weights, np.random.default_rng(0).normal(size=(3, 4)), np.zeros(8), 1)
        assert all(np.abs(g).max() == 0.0 for g in grads.values())

    @pytest.mark.parametrize("config", [TINY, TINY_POSE_ONLY], ids=["two-head", "pose-only"])
    def test_finite_difference_every_tensor(self, config):
        weights = init_weights(config, seed=10)
        rng = np.random.default_rng(11)
        window = rng.normal(size=(3, config.in_dim))
        upstream = rng.normal(size=(config.out_dim,))
        grads = backbone_backward(config, weights, window, upstream, frame_index=1)

        eps = 1e-4
        for name in weights:
            w = weights[name]
            num = np.zeros_like(w)
            flat_w, flat_n = w.reshape(-1), num.reshape(-1)
            for j in range(flat_w.size):
                orig = flat_w[j]
                flat_w[j] = orig + eps
                hi = float(backbone_forward(config, weights, window)[1] @ upstream)
                flat_w[j] = orig - eps
                lo = float(backbone_forward(config, weights, window)[1] @ upstream)
                flat_w[j] = orig
                flat_n[j] = (hi - lo) / (2 * eps)
            denom = max(np.linalg.norm(num), np.linalg.norm(grads[name]), 1e-8)
            rel = np.linalg.norm(grads[name] - num) / denom
            assert rel < 1e-4, f"{name}: rel err {rel:.2e}"

    def test_linear_degenerate_matches_closed_form(self):
        # no attention, no recurrence, single linear decoder: the output is
        # affine in the decoder weights, so the gradient has a closed form
        config = BackboneConfig(
            in_dim=4, out_dim=3, d_model=8, tf_layers=0, heads=1,
            rnn_layers=0, decoder_hidden=None, window=3,
            has_pelvis_head=False, dtype="float64",
        )
        weights = init_weights(config, seed=5)
        rng = np.random.default_rng(6)
        window = rng.normal(size=(3, 4))
        upstream = rng.normal(size=3)
        n = 2
        grads = backbone_backward(config, weights, window, upstream, frame_index=n)
        hidden = window @ weights["proj.w"] + weights["proj.b"] + sinusoidal_encoding(3, 8, np.float64)
        np.testing.assert_allclose(grads["dec.pose.w"], np.outer(hidden[n], upstream), atol=1e-12)
        np.testing.assert_allclose(grads["dec.pose.b"], upstream, atol=1e-12)
        np.testing.assert_allclose(grads["proj.w"], np.outer(window[n], weights["dec.pose.w"] @ upstream), atol=1e-12)


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        weights = init_weights(TINY, seed=10)
        path = tmp_path / "net.ckpt"
        save_weights(path, TINY, weights)
        config2, weights2 = load_weights(path)
        assert config2 == TINY
        for k in weights:
            np.testing.assert_allclose(weights2[k], weights[k].astype(np.float32), atol=1e-7)

    def test_forward_survives_round_trip(self, tmp_path):
        config = BackboneConfig(in_dim=4, out_dim=8, d_model=8, tf_layers=1, heads=2,
                                rnn_layers=1, rnn_width=8, decoder_hidden=8, window=3)
        weights = init_weights(config, seed=10)
        path = tmp_path / "net.ckpt"
        save_weights(path, config, weights)
        _, loaded = load_weights(path)
        x = np.random.default_rng(1).normal(size=(3, 4)).astype(np.float32)
        np.testing.assert_array_equal(run(config, weights, x), run(config, loaded, x))

    def test_rejects_foreign_file(self, tmp_path):
        path = tmp_path / "junk.ckpt"
        path.write_bytes(b"not a checkpoint")
        with pytest.raises(ValueError):
            load_weights(path)
