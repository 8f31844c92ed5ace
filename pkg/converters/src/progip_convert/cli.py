"""progip-convert: archive -> canonical motion directories.

    progip-convert --kind amass --src poses/ --out data/amass --subset CMU
    progip-convert --kind dip --src dip_s9.npz --out data/dip --subject 9
    progip-convert --kind totalcapture --src tc/ --out data/tc --recalibrate

Exit codes: 0 success, 1 conversion error, 2 usage error.
"""

import argparse
import sys

from .convert import convert
from .errors import ConvertError
from .manifest import SOURCE_KINDS, ConversionManifest


def build_parser():
    p = argparse.ArgumentParser(prog="progip-convert",
                                description="convert mocap archives to canonical motion dirs")
    p.add_argument("--kind", choices=SOURCE_KINDS, required=True)
    p.add_argument("--src", required=True, help="archive file or directory of archives")
    p.add_argument("--out", required=True, help="output directory (one subdir per sequence)")
    p.add_argument("--framerate", type=float, default=None,
                   help="override when the source records no rate")
    p.add_argument("--subset", default="", help="subset tag for the catalog (e.g. HumanEval)")
    p.add_argument("--subject", default="", help="subject tag for the catalog")
    p.add_argument("--recalibrate", action="store_true",
                   help="align mean accelerations with synthetic values (needs progip on PATH)")
    p.add_argument("--force", action="store_true", help="overwrite a non-empty output directory")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    manifest = ConversionManifest(
        source=args.src,
        kind=args.kind,
        out_dir=args.out,
        framerate=args.framerate,
        subset=args.subset,
        subject=args.subject,
        recalibrate=args.recalibrate,
        force=args.force,
    )
    try:
        entries = convert(manifest)
    except ConvertError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(f"{len(entries)} sequence(s) -> {args.out} (catalog.json written)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
