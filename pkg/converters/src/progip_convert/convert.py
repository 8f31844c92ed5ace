"""Conversion driver: source archive -> canonical dirs + catalog.json."""

import os
import shutil
import subprocess
import tempfile

import numpy as np

from .canonical import read_blob, write_catalog, write_sequence
from .errors import ConvertError
from .manifest import ConversionManifest
from .sources import READERS

DEFAULT_FRAMERATE = 60.0


def _synthetic_acc_means(seq_dir):
    """Per-sensor mean synthetic accelerations for one canonical sequence.

    Shells out to the estimation CLI (`progip synth`), which writes a copy
    of the sequence with synthetic IMU channels attached; only that file
    output is consumed here.
    """
    with tempfile.TemporaryDirectory(prefix="progip_convert_") as tmp:
        cmd = ["progip", "synth", "--data", seq_dir, "--out", tmp]
        try:
            proc = subprocess.run(cmd, capture_output=True, text=True, timeout=600)
        except FileNotFoundError as e:
            raise ConvertError("recalibration needs the 'progip' CLI on PATH") from e
        if proc.returncode != 0:
            raise ConvertError(f"'progip synth' failed: {proc.stderr.strip()}")
        out_dir = os.path.join(tmp, os.path.basename(seq_dir.rstrip("/")))
        import json
        with open(os.path.join(out_dir, "meta.json"), "r", encoding="utf-8") as f:
            n = json.load(f)["n_frames"]
        acc = read_blob(os.path.join(out_dir, "imu_acc.f32"), (n, 3, 3))
    return acc.mean(axis=0)


def _recalibrate_acc(seq_dir, acc):
    """Align each sensor's mean acceleration with its synthetic mean."""
    target = _synthetic_acc_means(seq_dir)
    return acc - acc.mean(axis=0) + target


def convert(manifest: ConversionManifest):
    """Run one conversion; returns the list of catalog entries written."""
    reader = READERS[manifest.kind]
    manifest.check_output_dir()
    if manifest.force and os.path.isdir(manifest.out_dir):
        for child in os.listdir(manifest.out_dir):
            path = os.path.join(manifest.out_dir, child)
            shutil.rmtree(path) if os.path.isdir(path) else os.remove(path)
    os.makedirs(manifest.out_dir, exist_ok=True)

    entries = []
    for name, record in reader(manifest.source):
        rate = manifest.framerate or record.get("framerate") or DEFAULT_FRAMERATE
        seq_dir = os.path.join(manifest.out_dir, name)
        extra = dict(manifest.extra_tags)
        if record.get("gap_filled_frames"):
            extra["gap_filled_frames"] = record["gap_filled_frames"]

        imu_acc = record.get("imu_acc")
        imu_rot = record.get("imu_rot")
        write_sequence(
            seq_dir,
            poses=record["poses"].astype(np.float32),
            framerate=rate,
            subject=manifest.subject,
            label=name,
            imu_acc=imu_acc,
            imu_rot=imu_rot,
            extra_meta=extra or None,
        )
        if manifest.recalibrate and imu_acc is not None:
            recal = _recalibrate_acc(seq_dir, np.asarray(imu_acc, dtype=np.float64))
            # keep the raw channel next to the recalibrated one
            os.replace(os.path.join(seq_dir, "imu_acc.f32"), os.path.join(seq_dir, "imu_acc_raw.f32"))
            recal.astype("<f4").tofile(os.path.join(seq_dir, "imu_acc.f32"))
        entries.append({
            "path": name,
            "dataset": manifest.kind,
            "subset": manifest.subset,
            "subject": manifest.subject,
            "label": name,
            "n_frames": int(len(record["poses"])),
            "framerate": float(rate),
            "has_imu": imu_acc is not None,
            "recalibrated": bool(manifest.recalibrate and imu_acc is not None),
        })

    if not entries:
        raise ConvertError(f"{manifest.source}: nothing to convert")
    write_catalog(manifest.out_dir, entries)
    return entries
