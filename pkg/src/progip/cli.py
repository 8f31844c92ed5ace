"""Command-line entry points.

    progip synth     --data <dir> --out <dir>           synthesize IMU channels
    progip train     --data <dir...> --out <model dir>  train from motion data
    progip finetune  --model <dir> --data <dir...>      continue on real IMU
    progip eval      --model <dir> --data <dir...>      per-motion error report
    progip stream    --model <dir>                      stdin/UDP frames -> JSONL poses
    progip export    --input poses.jsonl --out <file>   JSONL -> BVH/JSONL
    progip data validate <dir>                          check a canonical dir

Exit codes: 0 success, 1 runtime error, 2 usage error.  Relative --data
paths resolve against $PROGIP_DATA_DIR when it is set.
"""

import argparse
import json
import os
import sys
import threading

import numpy as np

from . import datasets, export, imusynth, metrics, progressive, skeleton, streaming, training
from .errors import ProgipError
from .imusynth import ImuSequence
from .progressive import ProgIPModel
from .training import TRAIN_PRESETS, TrainingData


def _resolve(path):
    root = os.environ.get("PROGIP_DATA_DIR")
    if root and not os.path.isabs(path) and not os.path.exists(path):
        return os.path.join(root, path)
    return path


def _sequence_dirs(paths):
    """Expand data arguments into canonical sequence directories."""
    dirs = []
    for p in paths:
        p = _resolve(p)
        if os.path.isfile(os.path.join(p, "meta.json")):
            dirs.append(p)
            continue
        subdirs = sorted(
            os.path.join(p, d) for d in os.listdir(p)
            if os.path.isfile(os.path.join(p, d, "meta.json"))
        )
        if not subdirs:
            raise ProgipError(f"{p}: no canonical sequences found")
        dirs.extend(subdirs)
    return dirs


def _load_skeleton(args):
    if getattr(args, "skeleton", None):
        return skeleton.SkeletonModel.from_asset(args.skeleton)
    return skeleton.default_skeleton()


def _add_model_flags(p):
    p.add_argument("--skeleton", help="skeleton asset file (default: bundled)")
    p.add_argument("--hz", type=float, default=60.0, help="frame rate (default 60)")
    p.add_argument("--window", type=int, default=40, help="input block size M")
    p.add_argument("--supervise-frame", type=int, default=30, help="estimated frame N within the window")
    p.add_argument("--acc-scale", type=float, default=30.0, help="acceleration normalization divisor")
    p.add_argument("--seed", type=int, default=10)
    p.add_argument("--preset", choices=("paper", "desk"), default="desk")


def cmd_synth(args):
    skel = _load_skeleton(args)
    for seq_dir in _sequence_dirs(args.data):
        motion = datasets.load_canonical(seq_dir)
        motion = datasets.resample(motion, args.hz)
        imu = imusynth.synthesize_imu(skel, motion)
        motion.imu_acc = imu.acc.astype(np.float32)
        motion.imu_rot = imu.rot.astype(np.float32)
        out = os.path.join(args.out, os.path.basename(seq_dir.rstrip("/")))
        datasets.save_canonical(motion, out)
        print(f"{seq_dir} -> {out} ({motion.n_frames} frames, IMU attached)")
    return 0


def _training_config(args, steps):
    base = TRAIN_PRESETS[args.preset]
    overrides = {"seed": args.seed, "epochs": args.epochs, "max_steps": steps}
    if args.batch:
        overrides["batch"] = args.batch
    if args.lr:
        overrides["lr"] = args.lr
    from dataclasses import replace
    return replace(base, **overrides)


def _load_training_data(args, skel, require_imu=False):
    datas = []
    for seq_dir in _sequence_dirs(args.data):
        motion = datasets.resample(datasets.load_canonical(seq_dir), args.hz)
        if require_imu:
            datas.append(TrainingData.from_real(skel, motion, args.acc_scale))
        elif motion.has_imu:
            datas.append(TrainingData.from_real(skel, motion, args.acc_scale))
        else:
            datas.append(TrainingData.from_motion(skel, motion, acc_scale=args.acc_scale))
    return datas


def cmd_train(args):
    skel = _load_skeleton(args)
    model = ProgIPModel.create(
        skel=skel, preset=args.preset, window=args.window,
        supervised_frame=args.supervise_frame, acc_scale=args.acc_scale, seed=args.seed,
    )
    datas = _load_training_data(args, skel)
    config = _training_config(args, args.steps)
    history = training.train(model, datas, config, log_every=args.log_every)
    progressive.save_model(model, args.out)
    print(f"trained {len(history)} steps; final loss {history[-1].total:.5f}; model -> {args.out}")
    return 0


def cmd_finetune(args):
    model = progressive.load_model(_resolve(args.model))
    skel = model.skel
    motions = [datasets.resample(datasets.load_canonical(d), args.hz) for d in _sequence_dirs(args.data)]
    config = _training_config(args, args.steps)
    training.fine_tune(model, motions, config, skel=skel, log_every=args.log_every)
    out = args.out or args.model
    progressive.save_model(model, out)
    print(f"fine-tuned on {len(motions)} sequences; model -> {out}")
    return 0


def cmd_eval(args):
    model = progressive.load_model(_resolve(args.model))
    skel = model.skel
    results = []
    for seq_dir in _sequence_dirs(args.data):
        motion = datasets.resample(datasets.load_canonical(seq_dir), args.hz)
        if motion.has_imu:
            imu = ImuSequence(acc=motion.imu_acc.astype(np.float64),
                              rot=motion.imu_rot.astype(np.float64), dt=1.0 / motion.framerate)
        else:
            imu = imusynth.synthesize_imu(skel, motion)
        feats = imusynth.build_input(imu, model.acc_scale)
        idx, reduced = progressive.estimate_sequence(model, feats)
        if len(idx) == 0:
            print(f"warning: {seq_dir} shorter than one window, skipped", file=sys.stderr)
            continue
        pred = skeleton.expand_reduced(reduced.astype(np.float64), skel)
        gt = motion.local_rotations()[idx]
        label = motion.label or os.path.basename(seq_dir)
        results.append(metrics.evaluate_sequence(pred, gt, skel, joint_mask=args.joint_mask, label=label))
    if not results:
        raise ProgipError("no evaluable sequences")
    rows, overall = metrics.per_motion_report(results)
    print(metrics.format_report(rows, overall))
    if args.csv:
        metrics.write_csv(rows, overall, args.csv)
        print(f"report -> {args.csv}")
    return 0


def _parse_record(line):
    parts = [p.strip() for p in line.replace(",", " ").split()]
    if len(parts) != 14:
        raise ProgipError(f"bad frame record ({len(parts)} fields, expected 14): {line!r}")
    t = float(parts[0])
    sensor = int(parts[1])
    acc = np.array([float(x) for x in parts[2:5]])
    rot = np.array([float(x) for x in parts[5:14]]).reshape(3, 3)
    return t, sensor, acc, rot


def _frames_from_lines(lines):
    """Group per-sensor records into complete (acc (3,3), rot (3,3,3)) frames."""
    pending = {}
    for line in lines:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        t, sensor, acc, rot = _parse_record(line)
        slot = pending.setdefault(t, {})
        slot[sensor] = (acc, rot)
        if len(slot) == 3:
            del pending[t]
            acc3 = np.stack([slot[s][0] for s in range(3)])
            rot3 = np.stack([slot[s][1] for s in range(3)])
            yield t, acc3, rot3


def _udp_lines(port):
    import socket

    sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    sock.bind(("127.0.0.1", port))
    while True:
        data, _ = sock.recvfrom(4096)
        for line in data.decode("utf-8", "replace").splitlines():
            yield line


def cmd_stream(args):
    model = progressive.load_model(_resolve(args.model))
    state = streaming.StreamState(model)
    calib = None
    calib_buffer = []
    lines = _udp_lines(args.udp) if args.udp else sys.stdin

    frames = _frames_from_lines(lines)
    stop = object()

    if args.udp:
        # ingestion thread keeps the socket drained; inference runs here
        import queue

        q = queue.Queue()

        def pump():
            for item in frames:
                q.put(item)
            q.put(stop)

        threading.Thread(target=pump, daemon=True).start()

        def frame_iter():
            while True:
                item = q.get()
                if item is stop:
                    return
                yield item

        frames = frame_iter()

    for t, acc, rot in frames:
        if args.calibrate and calib is None:
            calib_buffer.append((acc, rot))
            if len(calib_buffer) >= args.calibrate:
                imu = ImuSequence(
                    acc=np.stack([a for a, _ in calib_buffer]),
                    rot=np.stack([r for _, r in calib_buffer]),
                    dt=1.0 / args.hz,
                )
                calib = imusynth.tpose_calibration(imu, n_frames=args.calibrate)
                print(f"# calibrated after {args.calibrate} frames", file=sys.stderr)
            continue
        if calib is not None:
            sensor_c, g = calib
            rot = g @ rot @ sensor_c
            acc = acc @ g.T
        streaming.feed(state, acc, rot)
        for index, reduced in streaming.drain(state):
            pose = progressive.decode_pose(model, reduced)
            aa = _pose_to_axis_angle(pose)
            print(json.dumps({"frame": int(index), "time_s": index / args.hz, "axis_angle": aa}),
                  flush=True)  # live consumers must not wait on block buffering
    stats = state.stats
    print(
        f"# frames {stats.frames_in}  poses {stats.poses_out}  dropped {stats.dropped}  "
        f"median {stats.median_us() / 1000:.2f} ms",
        file=sys.stderr,
    )
    return 0


def _pose_to_axis_angle(pose):
    from . import rotmath

    return [[float(x) for x in row] for row in rotmath.rot_to_axis_angle(pose)]


def cmd_export(args):
    frames, poses = export.load_jsonl(_resolve(args.input))
    skel = _load_skeleton(args)
    export.export_poses(poses, args.out, fmt=args.format, skel=skel, framerate=args.hz)
    print(f"{len(poses)} poses -> {args.out}")
    return 0


def cmd_data_validate(args):
    seq = datasets.load_canonical(_resolve(args.dir))
    print(
        f"{args.dir}: OK  frames {seq.n_frames}  rate {seq.framerate:g} Hz  "
        f"duration {seq.duration_s():.2f} s  subject {seq.subject!r}  label {seq.label!r}  "
        f"imu {'yes' if seq.has_imu else 'no'}"
    )
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="progip", description="3-IMU full-body pose estimation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="attach synthetic IMU channels to motion dirs")
    p.add_argument("--data", nargs="+", required=True)
    p.add_argument("--out", required=True)
    _add_model_flags(p)
    p.set_defaults(func=cmd_synth)

    for name, func, needs_out in (("train", cmd_train, True), ("finetune", cmd_finetune, False)):
        p = sub.add_parser(name, help=f"{name} the five-stage model")
        p.add_argument("--data", nargs="+", required=True)
        if needs_out:
            p.add_argument("--out", required=True)
        else:
            p.add_argument("--model", required=True)
            p.add_argument("--out")
        p.add_argument("--steps", type=int, default=None, help="cap on optimizer steps")
        p.add_argument("--epochs", type=int, default=1)
        p.add_argument("--batch", type=int, default=None)
        p.add_argument("--lr", type=float, default=None)
        p.add_argument("--log-every", type=int, default=0)
        _add_model_flags(p)
        p.set_defaults(func=func)

    p = sub.add_parser("eval", help="evaluate a model on motion data")
    p.add_argument("--model", required=True)
    p.add_argument("--data", nargs="+", required=True)
    p.add_argument("--csv", help="also write the report as CSV")
    p.add_argument("--joint-mask", choices=("all", "upper_body"), default="all")
    _add_model_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("stream", help="stdin/UDP sensor records -> JSONL poses on stdout")
    p.add_argument("--model", required=True)
    p.add_argument("--calibrate", type=int, default=0, metavar="K",
                   help="derive frame alignment from the first K rest-pose frames")
    p.add_argument("--udp", type=int, default=0, metavar="PORT", help="listen on UDP instead of stdin")
    _add_model_flags(p)
    p.set_defaults(func=cmd_stream)

    p = sub.add_parser("export", help="convert a JSONL pose stream")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("jsonl", "bvh"), default="bvh")
    _add_model_flags(p)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("data", help="dataset utilities")
    data_sub = p.add_subparsers(dest="data_command", required=True)
    v = data_sub.add_parser("validate", help="check a canonical motion directory")
    v.add_argument("dir")
    v.set_defaults(func=cmd_data_validate)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ProgipError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
