"""Losses, optimizer and the window-supervised training loop.

Every window of M frames contributes gradients only through its supervised
frame (index N-1 inside the window): the per-stage losses compare that
frame's estimates against ground truth.  Each stage pays a squared error on
its joint channels, a lambda-weighted squared error on its pelvis channels,
and optionally a joint-position consistency term: the estimated rotations
are decoded, pushed through the stage's partial forward kinematics, and the
resulting positions are compared with ground-truth positions.  The position
term backpropagates through the 6D decoding and the kinematic chain.
"""

import time
from dataclasses import dataclass

import numpy as np

from . import autodiff
from .autodiff import cross3, stack, tensor
from .backbone import wrap_params
from .errors import NonFiniteLoss, TooShort
from .imusynth import ACC_SCALE, ImuSequence, build_input, synthesize_imu
from .progressive import NET_NAMES, pipeline_forward
from .skeleton import STAGE_PREFIX_JOINTS, forward_kinematics, reduce_full

# slice of the canonical 96-dim target owned by each network's output
STAGE_TARGET_SLICE = {
    "global": slice(0, 96),
    "stage1": slice(0, 24),
    "stage2": slice(0, 42),
    "stage3": slice(0, 72),
    "stage4": slice(72, 96),
}

# networks whose position-consistency term is defined (the rough global
# estimate is supervised on rotations only)
FK_STAGES = {"stage1": 1, "stage2": 2, "stage3": 3, "stage4": 4}


@dataclass(frozen=True)
class TrainConfig:
    lam: float = 0.1
    lr: float = 1e-4
    batch: int = 256
    seed: int = 10
    epochs: int = 1
    max_steps: int = None
    use_fk_loss: bool = True
    detach_between_stages: bool = True
    stride: int = 1

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("pelvis weight must be non-negative")


TRAIN_PRESETS = {
    "paper": TrainConfig(),
    "desk": TrainConfig(batch=32, lr=1e-3),
}


@dataclass
class StageLoss:
    rotation: float = 0.0
    pelvis: float = 0.0
    position: float = 0.0

    @property
    def total(self):
        return self.rotation + self.pelvis + self.position


@dataclass
class LossReport:
    stages: dict
    total: float

    def __str__(self):
        parts = [f"total {self.total:.5f}"]
        parts += [f"{k} {v.total:.5f}" for k, v in self.stages.items()]
        return "  ".join(parts)


def six_d_to_rot_t(v):
    """Differentiable Gram-Schmidt decode, (..., 6) Tensor -> (..., 3, 3)."""
    a = v[..., 0:3]
    b = v[..., 3:6]
    c0 = a / a.square().sum(axis=-1, keepdims=True).sqrt()
    b_perp = b - (b * c0).sum(axis=-1, keepdims=True) * c0
    c1 = b_perp / b_perp.square().sum(axis=-1, keepdims=True).sqrt()
    c2 = cross3(c0, c1)
    return stack([c0, c1, c2], axis=-1)


def subchain_positions_t(skel, stage, joint_rots, pelvis_rot):
    """Differentiable partial FK.

    joint_rots: (B, K, 3, 3) Tensor in STAGE_PREFIX_JOINTS[stage] order;
    pelvis_rot: (B, 3, 3) Tensor.  Returns (B, K+1, 3) positions for the
    pelvis followed by the stage joints.
    """
    names = STAGE_PREFIX_JOINTS[stage]
    b = pelvis_rot.shape[0]
    zeros = tensor(np.zeros((b, 3), dtype=pelvis_rot.dtype))
    glob = {"Pelvis": pelvis_rot}
    pos = {"Pelvis": zeros}
    for k, name in enumerate(names):
        j = skel.index[name]
        parent = skel.names[skel.parents[j]]
        offset = skel.rest_offsets[j].astype(pelvis_rot.dtype).reshape(3, 1)
        step = glob[parent] @ offset
        pos[name] = pos[parent] + step.reshape(b, 3)
        glob[name] = glob[parent] @ joint_rots[:, k]
    return stack([pos[n] for n in ("Pelvis",) + names], axis=1)


def stage_loss(net, estimate, target, skel, lam=0.1, use_fk=True,
               gt_positions=None, fk_pelvis=None):
    """Loss of one network at the supervised frame.

    estimate: (B, D) Tensor; target: (B, D) ndarray in the same layout;
    gt_positions: (B, 24, 3) ndarray, required when use_fk and the stage has
    a position term; fk_pelvis: (B, 6) Tensor, the pelvis the lower-body
    stage borrows for FK (it has none of its own).

    Reduction: sum over coordinates, mean over the batch.
    """
    b = estimate.shape[0]
    target = np.asarray(target, dtype=estimate.dtype)
    diff = estimate - target
    has_pelvis = net != "stage4"
    if has_pelvis:
        pelvis_term = diff[:, 0:6].square().sum() * (lam / b)
        rot_term = diff[:, 6:].square().sum() * (1.0 / b)
    else:
        pelvis_term = tensor(np.zeros((), dtype=estimate.dtype))
        rot_term = diff.square().sum() * (1.0 / b)

    stage_id = FK_STAGES.get(net)
    if use_fk and stage_id is not None:
        names = STAGE_PREFIX_JOINTS[stage_id]
        if has_pelvis:
            pelvis6, joints6 = estimate[:, 0:6], estimate[:, 6:]
        else:
            pelvis6, joints6 = fk_pelvis, estimate
        pelvis_rot = six_d_to_rot_t(pelvis6)
        joint_rots = six_d_to_rot_t(joints6.reshape(b, len(names), 6))
        positions = subchain_positions_t(skel, stage_id, joint_rots, pelvis_rot)
        covered = skel.joint_indices(("Pelvis",) + names)
        gt = np.asarray(gt_positions, dtype=estimate.dtype)[:, covered]
        pos_term = (positions - gt).square().sum() * (1.0 / b)
    else:
        pos_term = tensor(np.zeros((), dtype=estimate.dtype))

    total = pelvis_term + rot_term + pos_term
    stats = StageLoss(
        rotation=float(rot_term.data),
        pelvis=float(pelvis_term.data),
        position=float(pos_term.data),
    )
    return total, stats


class Adam:
    """Adam with bias correction; state is keyed like the weight dicts."""

    def __init__(self, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {}
        self.v = {}

    def step(self, weights, grads):
        self.t += 1
        b1c = 1.0 - self.beta1**self.t
        b2c = 1.0 - self.beta2**self.t
        for net, ws in weights.items():
            for name, w in ws.items():
                g = grads[net][name]
                key = (net, name)
                m = self.m.get(key)
                if m is None:
                    m = np.zeros_like(w)
                    self.m[key] = m
                    self.v[key] = np.zeros_like(w)
                v = self.v[key]
                m *= self.beta1
                m += (1.0 - self.beta1) * g
                v *= self.beta2
                v += (1.0 - self.beta2) * g * g
                w -= self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)


@dataclass
class TrainingData:
    """Feature/target arrays for one sequence, ready to window."""

    features: np.ndarray   # (T, 45)
    target96: np.ndarray   # (T, 96)
    positions: np.ndarray  # (T, 24, 3)
    label: str = ""

    def __len__(self):
        return len(self.features)

    @classmethod
    def from_motion(cls, skel, motion, placement=None, acc_scale=ACC_SCALE):
        """Synthesize IMU measurements from the motion and pair with targets."""
        imu = synthesize_imu(skel, motion, placement)
        return cls._assemble(skel, motion, imu, acc_scale)

    @classmethod
    def from_real(cls, skel, motion, acc_scale=ACC_SCALE):
        """Use the sequence's measured IMU channel instead of synthesis."""
        if not motion.has_imu:
            raise ValueError("sequence carries no measured IMU channel")
        imu = ImuSequence(
            acc=motion.imu_acc.astype(np.float64),
            rot=motion.imu_rot.astype(np.float64),
            dt=1.0 / motion.framerate,
        )
        return cls._assemble(skel, motion, imu, acc_scale)

    @classmethod
    def _assemble(cls, skel, motion, imu, acc_scale):
        feats = build_input(imu, acc_scale)
        rots = motion.local_rotations()
        target96 = reduce_full(rots, skel)
        positions, _ = forward_kinematics(skel, rots)
        return cls(features=feats, target96=target96, positions=positions, label=motion.label)


def make_training_windows(data, window, supervised_frame, stride=1):
    """Iterate (features (M, 45), target96 (96,), positions (24, 3)) tuples.

    The supervision row is the window's N-th frame (1-based), i.e. absolute
    frame start + N - 1.
    """
    t = len(data)
    if t < window:
        raise TooShort(f"sequence of {t} frames cannot fill a {window}-frame window")
    for start in range(0, t - window + 1, stride):
        sup = start + supervised_frame - 1
        yield data.features[start: start + window], data.target96[sup], data.positions[sup]


def window_count(n_frames, window, stride=1):
    return 0 if n_frames < window else (n_frames - window) // stride + 1


def _compute_losses(model, outs, target96, positions, config):
    n_idx = model.supervised_frame - 1
    total = None
    stages = {}
    fk_pelvis = outs["stage1"][:, n_idx, 0:6]
    if config.detach_between_stages:
        fk_pelvis = fk_pelvis.detach()
    for net in NET_NAMES:
        est = outs[net][:, n_idx, :]
        tgt = target96[:, STAGE_TARGET_SLICE[net]]
        loss_t, stats = stage_loss(
            net, est, tgt, model.skel,
            lam=config.lam, use_fk=config.use_fk_loss,
            gt_positions=positions,
            fk_pelvis=fk_pelvis if net == "stage4" else None,
        )
        stages[net] = stats
        total = loss_t if total is None else total + loss_t
    return total, LossReport(stages=stages, total=float(total.data))


def train_step(model, batch, config, optimizer):
    """One optimization step over a batch dict; returns a LossReport.

    batch: {"features": (B, M, 45), "target96": (B, 96),
            "positions": (B, 24, 3)}.  Raises NonFiniteLoss (and leaves the
    weights untouched) if the forward pass degenerates.
    """
    x = tensor(np.asarray(batch["features"], dtype=model.dtype))
    params = {n: wrap_params(model.weights[n], requires_grad=True) for n in NET_NAMES}
    outs = pipeline_forward(model, params, x, detach_between_stages=config.detach_between_stages)
    total, report = _compute_losses(model, outs, batch["target96"], batch["positions"], config)
    if not np.isfinite(report.total):
        raise NonFiniteLoss(f"aborting step: loss = {report.total}")
    total.backward()
    grads = {
        net: {k: (t.grad if t.grad is not None else np.zeros_like(t.data)) for k, t in ps.items()}
        for net, ps in params.items()
    }
    optimizer.step(model.weights, grads)
    return report


def evaluate_loss(model, datas, config, max_windows=None):
    """Mean total loss over stride-1 windows, without touching weights."""
    losses = []
    for data in datas:
        for feats, tgt, pos in make_training_windows(data, model.window, model.supervised_frame, config.stride):
            x = tensor(np.asarray(feats[None], dtype=model.dtype))
            with autodiff.no_grad():
                params = {n: wrap_params(model.weights[n]) for n in NET_NAMES}
                outs = pipeline_forward(model, params, x, detach_between_stages=True)
                _, report = _compute_losses(model, outs, tgt[None], pos[None], config)
            losses.append(report.total)
            if max_windows and len(losses) >= max_windows:
                return float(np.mean(losses))
    return float(np.mean(losses))


def train(model, datas, config, log_every=0):
    """Window-supervised training over a list of TrainingData.

    Deterministic given config.seed: window order, batching and updates
    replay exactly.  Returns the list of per-step LossReports.
    """
    index = []
    for d_i, data in enumerate(datas):
        for start in range(0, len(data) - model.window + 1, config.stride):
            index.append((d_i, start))
    if not index:
        raise TooShort("no sequence is long enough to fill a window")

    rng = np.random.default_rng(config.seed)
    optimizer = Adam(lr=config.lr)
    history = []
    step = 0
    t0 = time.time()
    for _ in range(config.epochs):
        order = rng.permutation(len(index))
        for lo in range(0, len(order), config.batch):
            chosen = [index[i] for i in order[lo: lo + config.batch]]
            feats = np.stack([datas[d].features[s: s + model.window] for d, s in chosen])
            sup = [s + model.supervised_frame - 1 for _, s in chosen]
            target96 = np.stack([datas[d].target96[i] for (d, _), i in zip(chosen, sup)])
            positions = np.stack([datas[d].positions[i] for (d, _), i in zip(chosen, sup)])
            batch = {"features": feats, "target96": target96, "positions": positions}
            history.append(train_step(model, batch, config, optimizer))
            step += 1
            if log_every and step % log_every == 0:
                rate = step / (time.time() - t0)
                print(f"step {step:>5}  {history[-1]}  ({rate:.2f} steps/s)")
            if config.max_steps and step >= config.max_steps:
                return history
    return history


def fine_tune(model, real_motions, config, skel=None, acc_scale=None, log_every=0):
    """Continue training on sequences with measured IMU channels.

    Zero epochs (or max_steps=0) leaves the model untouched.  Returns the
    model for chaining.
    """
    if config.epochs <= 0 or (config.max_steps is not None and config.max_steps <= 0):
        return model
    skel = skel or model.skel
    datas = [TrainingData.from_real(skel, m, acc_scale or model.acc_scale) for m in real_motions]
    train(model, datas, config, log_every=log_every)
    return model
