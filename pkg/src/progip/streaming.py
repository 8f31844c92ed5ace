"""Real-time sliding-window inference.

Frames arrive one at a time; each is turned into its 45-dim feature vector
(the angular velocity needs only the previous frame's rotations) and pushed
into a ring buffer of the window length M.  Once the buffer is full, every
new frame triggers one pipeline run and emits the pose of the frame that is
M - N frames old, i.e. the estimate lags the newest sample by the model's
lookahead (10 frames = 166.7 ms at 60 Hz with the default M = 40, N = 30).

Ingestion is decoupled from inference by a bounded pending queue: feed()
never blocks, and once more than 2M frames are waiting the oldest are
dropped and counted in the timing stats.
"""

import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .imusynth import FEATURE_DIM, frame_features
from .progressive import run_window


@dataclass
class TimingStats:
    frames_in: int = 0
    poses_out: int = 0
    dropped: int = 0
    inference_us: list = field(default_factory=list)

    def median_us(self):
        return float(np.median(self.inference_us)) if self.inference_us else 0.0

    def mean_us(self):
        return float(np.mean(self.inference_us)) if self.inference_us else 0.0


class StreamState:
    """Ring buffer plus bookkeeping for one live stream."""

    def __init__(self, model):
        self.model = model
        self.window = model.window
        self.features = np.zeros((self.window, FEATURE_DIM), dtype=np.float64)
        self.fill = 0
        self.ptr = 0
        self.prev_rot = None
        self.frame_counter = 0
        self.last_pose = None
        self.pending = deque()
        self.max_pending = 2 * self.window
        self.stats = TimingStats()

    def _window_view(self):
        if self.ptr == 0:
            return self.features.copy()
        return np.concatenate([self.features[self.ptr:], self.features[: self.ptr]])


def stream_step(state, acc, rot):
    """Push one frame (acc (3, 3), rot (3, 3, 3)); maybe emit a pose.

    Returns (frame_index, reduced_pose (96,)) once the buffer is full, where
    frame_index identifies which input frame the pose belongs to; None while
    the buffer is still warming up.
    """
    feats = frame_features(acc, rot, state.prev_rot, state.model.acc_scale)
    state.prev_rot = np.array(rot, dtype=np.float64, copy=True)
    state.features[state.ptr] = feats
    state.ptr = (state.ptr + 1) % state.window
    state.fill = min(state.fill + 1, state.window)
    index = state.frame_counter
    state.frame_counter += 1
    state.stats.frames_in += 1

    if state.fill < state.window:
        return None
    t0 = time.perf_counter()
    fused = run_window(state.model, state._window_view())
    state.stats.inference_us.append((time.perf_counter() - t0) * 1e6)
    reduced = fused[state.model.supervised_frame - 1]
    emitted_index = index - state.model.lookahead
    state.last_pose = reduced
    state.stats.poses_out += 1
    return emitted_index, reduced


def feed(state, acc, rot):
    """Non-blocking ingestion; drops the oldest backlog beyond 2M frames."""
    state.pending.append((np.asarray(acc, dtype=np.float64), np.asarray(rot, dtype=np.float64)))
    if len(state.pending) > state.max_pending:
        state.pending.popleft()
        state.stats.dropped += 1


def drain(state):
    """Run inference over everything queued; returns the emitted poses."""
    out = []
    while state.pending:
        acc, rot = state.pending.popleft()
        emitted = stream_step(state, acc, rot)
        if emitted is not None:
            out.append(emitted)
    return out


def stream_sequence(model, imu):
    """Feed a prerecorded ImuSequence frame by frame.

    Returns (frame_indices, reduced (n, 96), stats) exactly as a live run
    would produce them.
    """
    state = StreamState(model)
    idx = []
    outs = []
    for t in range(len(imu)):
        emitted = stream_step(state, imu.acc[t], imu.rot[t])
        if emitted is not None:
            idx.append(emitted[0])
            outs.append(emitted[1])
    reduced = np.stack(outs) if outs else np.zeros((0, 96), dtype=model.dtype)
    return np.asarray(idx, dtype=int), reduced, state.stats
