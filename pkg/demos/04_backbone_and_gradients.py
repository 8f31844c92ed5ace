"""Inside one network: encoder/decoder shapes and exact gradients.

Each of the five pipeline networks is the same design: input projection,
sinusoidal positions, self-attention layers, a bidirectional LSTM stack and
two small MLP decoders.  Gradients come from the package's own reverse-mode
tape; here we corroborate one against finite differences.
Run: python demos/04_backbone_and_gradients.py
"""

import numpy as np

from progip.backbone import BackboneConfig, backbone_backward, backbone_forward, init_weights, param_shapes

config = BackboneConfig(
    in_dim=45, out_dim=96, d_model=64, tf_layers=2, heads=4,
    rnn_layers=1, rnn_width=64, decoder_hidden=64, window=20,
)
weights = init_weights(config, seed=10)
n_params = sum(int(np.prod(s)) for _, s, _ in param_shapes(config))
print(f"network: {config.in_dim} -> {config.out_dim}, {n_params:,} parameters, "
      f"{len(weights)} tensors")

rng = np.random.default_rng(0)
window = rng.normal(size=(config.window, config.in_dim)).astype(np.float32)
out = backbone_forward(config, weights, window)
print("forward:", window.shape, "->", out.shape)

print("\n== exact reverse-mode gradients for one frame's error ==")
upstream = rng.normal(size=config.out_dim).astype(np.float32)
grads = backbone_backward(config, weights, window, upstream, frame_index=10)
print("gradient tensors:", len(grads))

# corroborate one scalar against a central finite difference (float64 copy)
check = BackboneConfig(**{**config.__dict__, "dtype": "float64"})
w64 = {k: v.astype(np.float64) for k, v in weights.items()}
g64 = backbone_backward(check, w64, window.astype(np.float64), upstream.astype(np.float64), 10)
name = "dec.pelvis.w2"
eps = 1e-5
w64[name][3, 2] += eps
hi = backbone_forward(check, w64, window)[10] @ upstream
w64[name][3, 2] -= 2 * eps
lo = backbone_forward(check, w64, window)[10] @ upstream
w64[name][3, 2] += eps
numeric = (hi - lo) / (2 * eps)
print(f"{name}[3,2]: analytic {g64[name][3, 2]:+.6e}  numeric {numeric:+.6e}")
