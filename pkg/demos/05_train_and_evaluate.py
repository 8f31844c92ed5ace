"""Train the five-stage estimator on a scripted clip and measure the errors.

A compact run: synthesize IMU data from one motion clip, overfit briefly
with the position-consistency loss enabled, then evaluate rotation and
position errors over the clip.  Expect a few minutes on a laptop; raise
STEPS for tighter errors.  Run: python demos/05_train_and_evaluate.py
"""

import numpy as np

from progip import metrics, skeleton
from progip.motions import scripted_motion
from progip.progressive import ProgIPModel, estimate_sequence
from progip.training import TrainConfig, TrainingData, train

STEPS = 300

skel = skeleton.default_skeleton()
motion = scripted_motion(400, seed=5, label="demo-clip")
data = TrainingData.from_motion(skel, motion)
model = ProgIPModel.create(preset="desk", window=40, supervised_frame=30, seed=10)

print(f"training on {motion.n_frames} frames "
      f"({len(data)} frames -> {len(data) - model.window + 1} windows), {STEPS} steps")
config = TrainConfig(batch=32, lr=1e-3, seed=10, epochs=200, max_steps=STEPS)
history = train(model, [data], config, log_every=50)
print(f"loss: {history[0].total:.3f} -> {history[-1].total:.3f}")

print("\n== evaluation on the training clip ==")
idx, reduced = estimate_sequence(model, data.features)
pred = skeleton.expand_reduced(reduced.astype(np.float64), skel)
gt = motion.local_rotations()[idx]
result = metrics.evaluate_sequence(pred, gt, skel, label=motion.label)
for key in metrics.METRIC_KEYS:
    print(f"  {key:<16} {result.mean(key):7.3f} (+/- {result.std(key):.3f})")

print("\n== per-motion report ==")
rows, overall = metrics.per_motion_report([result])
print(metrics.format_report(rows, overall))
