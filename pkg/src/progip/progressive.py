"""Five-network progressive pipeline: a rough full-body estimate feeds four
region stages ordered by kinematic-chain depth, whose outputs are fused into
the final reduced pose.

Stage inputs are concatenations along the feature axis, per time step:

    x1 = [x, rough]                  45 + 96  = 141
    x2 = [x1, stage1]               141 + 24  = 165
    x3 = [x1, stage2]               141 + 42  = 183   (default wiring)
       = [x2, stage2 transition]    165 + 18  = 183   (alternate wiring)
    x4 = [x1, stage1 pelvis]        141 + 6   = 147

Stage outputs put the pelvis 6D first, then the stage's joints in canonical
order, so the fusion [stage3 | stage4] is exactly the 96-dim reduced pose.
"""

import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import autodiff, skeleton
from .autodiff import concat, tensor
from .backbone import BackboneConfig, forward, init_weights, load_weights, save_weights, wrap_params
from .errors import ShapeMismatch
from .imusynth import ACC_SCALE, FEATURE_DIM, SensorPlacement
from .skeleton import REDUCED_JOINTS, expand_reduced

NET_NAMES = ("global", "stage1", "stage2", "stage3", "stage4")

# (input dim, output dim, output joints after the pelvis slot)
STAGE_TABLE = {
    "global": (45, 96, REDUCED_JOINTS[1:]),
    "stage1": (141, 24, REDUCED_JOINTS[1:4]),
    "stage2": (165, 42, REDUCED_JOINTS[1:7]),
    "stage3": (183, 72, REDUCED_JOINTS[1:12]),
    "stage4": (147, 24, REDUCED_JOINTS[12:16]),
}

PRESETS = {
    "paper": dict(d_model=256, tf_layers=3, heads=8, rnn_layers=2, rnn_width=256, decoder_hidden=256),
    "desk": dict(d_model=48, tf_layers=1, heads=4, rnn_layers=1, rnn_width=48, decoder_hidden=48),
}

_BUNDLE_VERSION = 1


def stage_configs(window=40, preset="paper", dtype="float32"):
    """BackboneConfig for each of the five networks.

    preset: a key of PRESETS or a dict of BackboneConfig size overrides.
    """
    sizes = PRESETS[preset] if isinstance(preset, str) else dict(preset)
    configs = {}
    for name, (in_dim, out_dim, _) in STAGE_TABLE.items():
        configs[name] = BackboneConfig(
            in_dim=in_dim,
            out_dim=out_dim,
            window=window,
            has_pelvis_head=(name != "stage4"),
            dtype=dtype,
            **sizes,
        )
    return configs


@dataclass
class ProgIPModel:
    """Bundle of the five networks plus everything inference needs."""

    skel: skeleton.SkeletonModel
    placement: SensorPlacement
    configs: dict
    weights: dict
    acc_scale: float = ACC_SCALE
    window: int = 40
    supervised_frame: int = 30  # 1-based index N within the window
    stage3_input: str = "fig_wiring"  # or "text_wiring"
    skeleton_sha256: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 1 <= self.supervised_frame <= self.window:
            raise ValueError("supervised frame must lie inside the window")
        if self.stage3_input not in ("fig_wiring", "text_wiring"):
            raise ValueError(f"unknown stage3 wiring {self.stage3_input!r}")

    @property
    def lookahead(self):
        """Future frames consumed per estimate (latency in frames)."""
        return self.window - self.supervised_frame

    @property
    def dtype(self):
        return self.configs["global"].np_dtype

    @classmethod
    def create(cls, skel=None, placement=None, preset="paper", window=40,
               supervised_frame=30, acc_scale=ACC_SCALE, seed=10,
               stage3_input="fig_wiring", dtype="float32"):
        skel = skel or skeleton.default_skeleton()
        configs = stage_configs(window=window, preset=preset, dtype=dtype)
        weights = {name: init_weights(configs[name], seed + i) for i, name in enumerate(NET_NAMES)}
        return cls(
            skel=skel,
            placement=placement or SensorPlacement(),
            configs=configs,
            weights=weights,
            acc_scale=acc_scale,
            window=window,
            supervised_frame=supervised_frame,
            stage3_input=stage3_input,
            skeleton_sha256=skeleton.asset_sha256(skeleton.default_asset_path()),
        )


def pipeline_forward(model, params, x, detach_between_stages=True):
    """Chain all five networks over a (B, M, 45) Tensor.

    params: {net name: {param name: Tensor}}.  Returns per-net (B, M, out)
    Tensors plus the fused 96-dim sequence under key "fused".  When
    detach_between_stages is set, each stage sees earlier outputs as
    constants, so losses stay within their own network.
    """
    if x.shape[-1] != FEATURE_DIM:
        raise ShapeMismatch(f"expected (..., {FEATURE_DIM}) features, got {x.shape}")

    def carry(t):
        return t.detach() if detach_between_stages else t

    cfg = model.configs
    rough = forward(cfg["global"], params["global"], x)
    x1 = concat([x, carry(rough)], axis=-1)
    out1 = forward(cfg["stage1"], params["stage1"], x1)
    x2 = concat([x1, carry(out1)], axis=-1)
    out2 = forward(cfg["stage2"], params["stage2"], x2)
    if model.stage3_input == "fig_wiring":
        x3 = concat([x1, carry(out2)], axis=-1)
    else:
        x3 = concat([x2, carry(out2[..., 24:42])], axis=-1)
    out3 = forward(cfg["stage3"], params["stage3"], x3)
    x4 = concat([x1, carry(out1[..., 0:6])], axis=-1)
    out4 = forward(cfg["stage4"], params["stage4"], x4)
    fused = concat([out3, out4], axis=-1)
    return {"global": rough, "stage1": out1, "stage2": out2, "stage3": out3, "stage4": out4, "fused": fused}


def _as_window(model, window):
    window = np.asarray(window, dtype=model.dtype)
    if window.ndim != 2 or window.shape != (model.window, FEATURE_DIM):
        raise ShapeMismatch(f"expected ({model.window}, {FEATURE_DIM}) window, got {window.shape}")
    return window


def estimate_global(model, window):
    """Rough full-body estimate for one (M, 45) window -> (M, 96)."""
    window = _as_window(model, window)
    with autodiff.no_grad():
        params = {"global": wrap_params(model.weights["global"])}
        out = forward(model.configs["global"], params["global"], tensor(window[None]))
    return out.data[0]


def run_window(model, window):
    """Full pipeline on one (M, 45) window -> fused (M, 96) sequence."""
    window = _as_window(model, window)
    with autodiff.no_grad():
        params = {n: wrap_params(model.weights[n]) for n in NET_NAMES}
        outs = pipeline_forward(model, params, tensor(window[None]))
    return outs["fused"].data[0]


def run_stages(model, window):
    """Reduced pose (96,) for the supervised frame of one window."""
    return run_window(model, window)[model.supervised_frame - 1]


def decode_pose(model, reduced):
    """Reduced pose -> (24, 3, 3) full pose on the model's skeleton."""
    return expand_reduced(np.asarray(reduced, dtype=np.float64), model.skel)


def estimate_sequence(model, features):
    """Stride-1 sliding-window estimation over a (T, 45) feature sequence.

    Returns (frame_indices, reduced (len, 96)): one estimate per window,
    assigned to its supervised frame.  Each window runs through the exact
    same single-window path as the streaming runtime.
    """
    features = np.asarray(features)
    t = len(features)
    m = model.window
    if t < m:
        return np.array([], dtype=int), np.zeros((0, 96), dtype=model.dtype)
    idx = []
    outs = []
    for start in range(t - m + 1):
        outs.append(run_stages(model, features[start: start + m]))
        idx.append(start + model.supervised_frame - 1)
    return np.asarray(idx), np.stack(outs)


def save_model(model, path):
    """Write the five checkpoints plus pipeline.json into a directory."""
    os.makedirs(path, exist_ok=True)
    for name in NET_NAMES:
        save_weights(os.path.join(path, f"{name}.ckpt"), model.configs[name], model.weights[name])
    manifest = {
        "format_version": _BUNDLE_VERSION,
        "acc_scale": model.acc_scale,
        "window": model.window,
        "supervised_frame": model.supervised_frame,
        "stage3_input": model.stage3_input,
        "sensor_joints": list(model.placement.sensor_joints),
        "skeleton_sha256": model.skeleton_sha256,
        "nets": {name: f"{name}.ckpt" for name in NET_NAMES},
        "meta": model.meta,
    }
    with open(os.path.join(path, "pipeline.json"), "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=1)


def load_model(path, skel=None):
    """Load a model bundle; uses the packaged skeleton unless one is given."""
    with open(os.path.join(path, "pipeline.json"), "r", encoding="utf-8") as f:
        manifest = json.load(f)
    if manifest["format_version"] != _BUNDLE_VERSION:
        raise ValueError(f"{path}: unsupported bundle version {manifest['format_version']}")
    configs = {}
    weights = {}
    for name, fname in manifest["nets"].items():
        configs[name], weights[name] = load_weights(os.path.join(path, fname))
    return ProgIPModel(
        skel=skel or skeleton.default_skeleton(),
        placement=SensorPlacement(tuple(manifest["sensor_joints"])),
        configs=configs,
        weights=weights,
        acc_scale=manifest["acc_scale"],
        window=manifest["window"],
        supervised_frame=manifest["supervised_frame"],
        stage3_input=manifest["stage3_input"],
        skeleton_sha256=manifest["skeleton_sha256"],
        meta=manifest.get("meta", {}),
    )
