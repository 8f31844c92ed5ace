"""One sequence-regression network instance: transformer-encoder layers
followed by a bidirectional LSTM stack, decoded by small MLPs.

The same forward code serves training (gradient tape on) and inference
(tape off, identical arithmetic).  Weights live in a flat name -> ndarray
dict with a layout that is a pure function of the config, which keeps
checkpoints, the Adam state and finite-difference sweeps aligned.

Networks with a pelvis head decode the global orientation (first 6 output
channels) separately from the remaining joint channels; the lower-body
stage runs a single pose decoder.
"""

import json
import struct
from dataclasses import asdict, dataclass

import numpy as np

from . import autodiff
from .autodiff import concat, layer_norm, softmax, stack, tensor
from .errors import ShapeMismatch

_MAGIC = b"PGIPCKPT"
_CKPT_VERSION = 1


@dataclass(frozen=True)
class BackboneConfig:
    in_dim: int
    out_dim: int
    d_model: int = 256
    tf_layers: int = 3
    heads: int = 8
    rnn_layers: int = 2
    rnn_width: int = 256
    decoder_hidden: int = 256
    window: int = 40
    has_pelvis_head: bool = True
    ff_width: int = None
    dtype: str = "float32"

    def __post_init__(self):
        if self.d_model % self.heads != 0:
            raise ValueError("d_model must be divisible by heads")
        if self.has_pelvis_head and self.out_dim < 6:
            raise ValueError("pelvis head needs at least 6 output channels")
        if self.ff_width is None:
            object.__setattr__(self, "ff_width", 4 * self.d_model)

    @property
    def encoder_out(self):
        return 2 * self.rnn_width if self.rnn_layers > 0 else self.d_model

    @property
    def np_dtype(self):
        return np.dtype(self.dtype)


def param_shapes(config):
    """Ordered (name, shape, kind) parameter layout for a config."""
    d = config.d_model
    shapes = [("proj.w", (config.in_dim, d), "linear"), ("proj.b", (d,), "bias")]
    for i in range(config.tf_layers):
        p = f"tf{i}."
        for m in ("wq", "wk", "wv", "wo"):
            shapes.append((p + m, (d, d), "linear"))
            shapes.append((p + m[1:] + "_b", (d,), "bias"))
        shapes += [
            (p + "ff1.w", (d, config.ff_width), "linear"),
            (p + "ff1.b", (config.ff_width,), "bias"),
            (p + "ff2.w", (config.ff_width, d), "linear"),
            (p + "ff2.b", (d,), "bias"),
            (p + "ln1.g", (d,), "ln_gain"),
            (p + "ln1.b", (d,), "bias"),
            (p + "ln2.g", (d,), "ln_gain"),
            (p + "ln2.b", (d,), "bias"),
        ]
    h = config.rnn_width
    for layer in range(config.rnn_layers):
        in_dim = d if layer == 0 else 2 * h
        for direction in ("fwd", "bwd"):
            p = f"lstm{layer}.{direction}."
            shapes += [
                (p + "wx", (in_dim, 4 * h), "linear"),
                (p + "wh", (h, 4 * h), "recurrent"),
                (p + "b", (4 * h,), "bias"),
            ]
    heads = [("pose", config.out_dim - 6 if config.has_pelvis_head else config.out_dim)]
    if config.has_pelvis_head:
        heads.insert(0, ("pelvis", 6))
    for name, width in heads:
        p = f"dec.{name}."
        if config.decoder_hidden:
            shapes += [
                (p + "w1", (config.encoder_out, config.decoder_hidden), "linear"),
                (p + "b1", (config.decoder_hidden,), "bias"),
                (p + "w2", (config.decoder_hidden, width), "linear"),
                (p + "b2", (width,), "bias"),
            ]
        else:
            shapes += [(p + "w", (config.encoder_out, width), "linear"), (p + "b", (width,), "bias")]
    return shapes


def _orthogonal(rng, shape):
    a = rng.normal(size=(max(shape), max(shape)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    return q[: shape[0], : shape[1]]


def init_weights(config, seed):
    """Deterministic init: Xavier-uniform linears, per-gate orthogonal
    recurrent matrices, zero biases, unit layer-norm gains."""
    rng = np.random.default_rng(seed)
    weights = {}
    for name, shape, kind in param_shapes(config):
        if kind == "linear":
            bound = np.sqrt(6.0 / (shape[0] + shape[1]))
            w = rng.uniform(-bound, bound, size=shape)
        elif kind == "recurrent":
            h = shape[0]
            w = np.concatenate([_orthogonal(rng, (h, h)) for _ in range(shape[1] // h)], axis=1)
        elif kind == "ln_gain":
            w = np.ones(shape)
        else:
            w = np.zeros(shape)
        weights[name] = w.astype(config.np_dtype)
    return weights


def sinusoidal_encoding(length, dim, dtype):
    """Fixed additive positional table (length, dim)."""
    pos = np.arange(length)[:, None].astype(np.float64)
    i = np.arange(dim)[None, :]
    angle = pos / np.power(10000.0, (2 * (i // 2)) / dim)
    pe = np.where(i % 2 == 0, np.sin(angle), np.cos(angle))
    return pe.astype(dtype)


def wrap_params(weights, requires_grad=False):
    return {k: tensor(v, requires_grad=requires_grad) for k, v in weights.items()}


def _attention(x, params, prefix, heads, trace=None):
    b, m, d = x.shape
    dh = d // heads

    def split_heads(t):
        return t.reshape(b, m, heads, dh).transpose((0, 2, 1, 3))

    q = split_heads(x @ params[prefix + "wq"] + params[prefix + "q_b"])
    k = split_heads(x @ params[prefix + "wk"] + params[prefix + "k_b"])
    v = split_heads(x @ params[prefix + "wv"] + params[prefix + "v_b"])
    scores = (q @ k.swapaxes(-1, -2)) * (1.0 / np.sqrt(dh))
    attn = softmax(scores, axis=-1)
    if trace is not None:
        trace.append(attn.data)
    ctx = (attn @ v).transpose((0, 2, 1, 3)).reshape(b, m, d)
    return ctx @ params[prefix + "wo"] + params[prefix + "o_b"]


def _lstm_direction(xg, wh, width, reverse):
    """One LSTM pass over precomputed input-gate activations (B, M, 4H)."""
    b, m, _ = xg.shape
    h = tensor(np.zeros((b, width), dtype=xg.dtype))
    c = tensor(np.zeros((b, width), dtype=xg.dtype))
    steps = range(m - 1, -1, -1) if reverse else range(m)
    outputs = [None] * m
    for t in steps:
        gates = xg[:, t, :] + h @ wh
        i = gates[:, 0 * width: 1 * width].sigmoid()
        f = gates[:, 1 * width: 2 * width].sigmoid()
        g = gates[:, 2 * width: 3 * width].tanh()
        o = gates[:, 3 * width: 4 * width].sigmoid()
        c = f * c + i * g
        h = o * c.tanh()
        outputs[t] = h
    return stack(outputs, axis=1)


def forward(config, params, x, trace_attn=None):
    """Run the network on a (B, M, in_dim) Tensor; returns (B, M, out_dim).

    params: name -> Tensor (see wrap_params).  trace_attn, when a list, is
    filled with each layer's (B, heads, M, M) attention weights.
    """
    b, m, d_in = x.shape
    if d_in != config.in_dim:
        raise ShapeMismatch(f"expected input dim {config.in_dim}, got {d_in}")
    h = x @ params["proj.w"] + params["proj.b"]
    h = h + sinusoidal_encoding(m, config.d_model, config.np_dtype)

    for i in range(config.tf_layers):
        p = f"tf{i}."
        attn_out = _attention(h, params, p, config.heads, trace=trace_attn)
        h = layer_norm(h + attn_out, params[p + "ln1.g"], params[p + "ln1.b"])
        ff = ((h @ params[p + "ff1.w"] + params[p + "ff1.b"]).relu()) @ params[p + "ff2.w"] + params[p + "ff2.b"]
        h = layer_norm(h + ff, params[p + "ln2.g"], params[p + "ln2.b"])

    for layer in range(config.rnn_layers):
        p = f"lstm{layer}."
        outs = []
        for direction, reverse in (("fwd", False), ("bwd", True)):
            q = p + direction + "."
            xg = h @ params[q + "wx"] + params[q + "b"]
            outs.append(_lstm_direction(xg, params[q + "wh"], config.rnn_width, reverse))
        h = concat(outs, axis=-1)

    def head(name):
        q = f"dec.{name}."
        if config.decoder_hidden:
            hid = (h @ params[q + "w1"] + params[q + "b1"]).relu()
            return hid @ params[q + "w2"] + params[q + "b2"]
        return h @ params[q + "w"] + params[q + "b"]

    if config.has_pelvis_head:
        return concat([head("pelvis"), head("pose")], axis=-1)
    return head("pose")


def backbone_forward(config, weights, window):
    """Plain-array forward for one (M, in_dim) window -> (M, out_dim)."""
    window = np.asarray(window, dtype=config.np_dtype)
    if window.ndim != 2 or window.shape[1] != config.in_dim:
        raise ShapeMismatch(f"expected (M, {config.in_dim}), got {window.shape}")
    with autodiff.no_grad():
        out = forward(config, wrap_params(weights), tensor(window[None]))
    return out.data[0]


def backbone_backward(config, weights, window, upstream, frame_index):
    """Gradients of <output[frame_index], upstream> w.r.t. every weight.

    window: (M, in_dim); upstream: (out_dim,).  Returns name -> ndarray with
    the same shapes as the weights.
    """
    window = np.asarray(window, dtype=config.np_dtype)
    upstream = np.asarray(upstream, dtype=config.np_dtype)
    if upstream.shape != (config.out_dim,):
        raise ShapeMismatch(f"expected upstream ({config.out_dim},), got {upstream.shape}")
    params = wrap_params(weights, requires_grad=True)
    out = forward(config, params, tensor(window[None]))
    loss = (out[:, frame_index, :] * upstream).sum()
    loss.backward()
    return {k: (t.grad if t.grad is not None else np.zeros_like(t.data)) for k, t in params.items()}


def save_weights(path, config, weights):
    """Checkpoint: magic + header JSON (config, tensor manifest) + f32 blob."""
    manifest = []
    offset = 0
    blobs = []
    for name, shape, _ in param_shapes(config):
        arr = np.ascontiguousarray(weights[name], dtype="<f4")
        manifest.append({"name": name, "shape": list(shape), "offset": offset, "nbytes": arr.nbytes})
        offset += arr.nbytes
        blobs.append(arr)
    header = json.dumps(
        {"format_version": _CKPT_VERSION, "config": asdict(config), "manifest": manifest, "blob_nbytes": offset}
    ).encode("utf-8")
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<I", len(header)))
        f.write(header)
        for b in blobs:
            f.write(b.tobytes())


def load_weights(path):
    """Read a checkpoint back into (config, weights in config dtype)."""
    with open(path, "rb") as f:
        if f.read(8) != _MAGIC:
            raise ValueError(f"{path}: not a checkpoint file")
        (hlen,) = struct.unpack("<I", f.read(4))
        header = json.loads(f.read(hlen).decode("utf-8"))
        if header["format_version"] != _CKPT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version")
        blob = f.read(header["blob_nbytes"])
    config = BackboneConfig(**header["config"])
    weights = {}
    for entry in header["manifest"]:
        arr = np.frombuffer(blob, dtype="<f4", count=int(np.prod(entry["shape"])), offset=entry["offset"])
        weights[entry["name"]] = arr.reshape(entry["shape"]).astype(config.np_dtype)
    return config, weights
