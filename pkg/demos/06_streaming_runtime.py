"""Frame-by-frame streaming: warmup, lookahead lag and batch equivalence.

The runtime buffers M frames; each new frame then yields the pose of the
frame M - N steps in the past (10 frames = 166.7 ms at 60 Hz with the
default geometry).  Streamed results are bit-identical to offline
sliding-window evaluation.  Run: python demos/06_streaming_runtime.py
"""

import numpy as np

from progip import skeleton
from progip.imusynth import build_input, synthesize_imu
from progip.motions import scripted_motion
from progip.progressive import ProgIPModel, estimate_sequence
from progip.streaming import StreamState, stream_step

skel = skeleton.default_skeleton()
model = ProgIPModel.create(preset="desk", window=40, supervised_frame=30, seed=10)
motion = scripted_motion(200, seed=6)
imu = synthesize_imu(skel, motion)

print(f"window M = {model.window}, supervised frame N = {model.supervised_frame}, "
      f"lookahead = {model.lookahead} frames ({model.lookahead / 60 * 1000:.1f} ms at 60 Hz)")

state = StreamState(model)
emitted = []
for t in range(len(imu)):
    result = stream_step(state, imu.acc[t], imu.rot[t])
    if result is not None:
        emitted.append(result)
    if t in (10, 38, 39, 40, 100):
        status = f"emitted pose for frame {result[0]}" if result else "warming up"
        print(f"  after frame {t:>3}: {status}")

idx = np.array([i for i, _ in emitted])
print(f"\nposes emitted: {len(emitted)}; constant lag: "
      f"{set(np.arange(model.window - 1, len(imu)) - idx)} frames")

feats = build_input(imu, model.acc_scale)
batch_idx, batch_out = estimate_sequence(model, feats)
stream_out = np.stack([p for _, p in emitted])
print("bit-identical to batch evaluation:", np.array_equal(stream_out, batch_out))
print(f"median inference {state.stats.median_us() / 1000:.1f} ms/frame (desk preset)")
