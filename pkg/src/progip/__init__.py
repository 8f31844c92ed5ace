"""Full-body pose estimation from three head/wrist IMUs.

The package is organized as a numpy library:

  rotmath      rotation matrices, 6D representation, angular error
  skeleton     24-joint kinematic tree, FK, reduced/full pose, regions
  imusynth     synthetic IMU generation and input normalization
  autodiff     minimal reverse-mode tape used by the networks
  backbone     one TE-biLSTM + MLP network instance
  progressive  the five-network depth-ordered pipeline
  training     losses (incl. FK position consistency), Adam, train loop
  metrics      rotation/position error metrics and reporting
  datasets     canonical storage, resampling, split protocol
  streaming    real-time sliding-window runtime
  export       JSONL / BVH pose output
  motions      scripted motion clips for demos and smoke training
"""

from . import (
    autodiff,
    backbone,
    datasets,
    export,
    imusynth,
    metrics,
    motions,
    progressive,
    rotmath,
    skeleton,
    streaming,
    training,
)
from .progressive import ProgIPModel

__version__ = "0.1.0"

__all__ = [
    "autodiff",
    "backbone",
    "datasets",
    "export",
    "imusynth",
    "metrics",
    "motions",
    "progressive",
    "rotmath",
    "skeleton",
    "streaming",
    "training",
    "ProgIPModel",
    "__version__",
]
