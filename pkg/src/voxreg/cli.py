"""Command-line entry points: register, warp, evaluate, visualize, phantom."""

import argparse
import enum
import os
import sys

from .config import RegConfig
from .fileio import (load_field, load_landmarks, load_nifti, save_field,
                     save_landmarks, save_nifti)
from .metrics import evaluate_pair, write_report_json, write_summary_csv
from .optim import register
from .phantom import make_phantom
from .sampler import InterpMode, warp, warp_labels
from .viz import save_visualization
from .volume import LabelMap


class Command(enum.Enum):
    REGISTER = "register"
    WARP = "warp"
    EVALUATE = "evaluate"
    VISUALIZE = "visualize"
    PHANTOM = "phantom"


def _cleanup(paths):
    for p in paths:
        if p and os.path.exists(p):
            try:
                os.unlink(p)
            except OSError:
                pass


def _guarded(outputs, fn):
    """Run fn; on any failure remove the partially written outputs."""
    try:
        return fn()
    except BaseException:
        _cleanup(outputs)
        raise


def _load_config(args) -> RegConfig:
    cfg = RegConfig.from_json(args.config) if args.config else RegConfig()
    if args.jobs is not None:
        cfg = cfg.replace(jobs=args.jobs)
    if args.bf is not None:
        cfg = cfg.replace(bf_enabled=args.bf)
    if args.bf_sigma_spatial is not None:
        cfg = cfg.replace(bf_sigma_spatial=args.bf_sigma_spatial)
    if args.bf_sigma_range is not None:
        cfg = cfg.replace(bf_sigma_range=args.bf_sigma_range)
    return cfg


def cmd_register(args) -> int:
    if args.config and not os.path.exists(args.config):
        raise FileNotFoundError(args.config)
    cfg = _load_config(args)
    moving = load_nifti(args.moving, kind="image")
    fixed = load_nifti(args.fixed, kind="image")
    outputs = [args.out_field, args.trace_out]

    def run():
        field, trace = register(moving, fixed, cfg)
        save_field(field, args.out_field)
        if args.trace_out:
            trace.to_csv(args.trace_out)
        final = trace.rows[-1]
        print(f"registered: ncc={final[2]:.4f} reg={final[3]:.4f} "
              f"total={final[4]:.4f} -> {args.out_field}")
        return 0

    return _guarded(outputs, run)


def cmd_warp(args) -> int:
    u = load_field(args.field)
    outputs = [args.out]

    def run():
        if args.labels:
            lab = load_nifti(args.input, kind="labels")
            save_nifti(warp_labels(lab, u), args.out)
        else:
            vol = load_nifti(args.input, kind="image")
            mode = InterpMode.NEAREST if args.mode == "nearest" else InterpMode.LINEAR
            save_nifti(warp(vol, u, mode), args.out)
        print(f"warped {args.input} -> {args.out}")
        return 0

    # input is loaded inside the guard so a bad file leaves no output,
    # but FileNotFoundError must escape for the exit-2 contract
    if not os.path.exists(args.input):
        raise FileNotFoundError(args.input)
    return _guarded(outputs, run)


def cmd_evaluate(args) -> int:
    u = load_field(args.field)
    labels_f = load_nifti(args.fixed_labels, kind="labels") \
        if args.fixed_labels else None
    labels_m = load_nifti(args.moving_labels, kind="labels") \
        if args.moving_labels else None
    lm_f = load_landmarks(args.landmarks_fixed) if args.landmarks_fixed else None
    lm_m = load_landmarks(args.landmarks_moving) if args.landmarks_moving else None
    outputs = [args.out_json, args.out_csv]

    def run():
        report = evaluate_pair(labels_f=labels_f, labels_m=labels_m,
                               lm_f=lm_f, lm_m=lm_m, u=u,
                               pair_id=args.pair_id, jobs=args.jobs or 1)
        write_report_json(report, args.out_json)
        write_summary_csv([report], args.out_csv)
        print(report.format_row())
        return 0

    return _guarded(outputs, run)


def cmd_visualize(args) -> int:
    u = load_field(args.field)
    background = load_nifti(args.background, kind="image") \
        if args.background else None
    outputs = [args.out_png]

    def run():
        save_visualization(u, args.out_png, background=background,
                           axis=args.axis, slice_index=args.slice,
                           arrow_stride=args.stride)
        print(f"wrote {args.out_png}")
        return 0

    return _guarded(outputs, run)


def cmd_phantom(args) -> int:
    outputs = [args.out_image, args.out_labels, args.out_landmarks]

    def run():
        vol, lab, lms = make_phantom(args.kind, tuple(args.dims), args.seed,
                                     count=args.count)
        save_nifti(vol, args.out_image)
        if args.out_labels:
            save_nifti(lab, args.out_labels)
        if args.out_landmarks:
            save_landmarks(lms, args.out_landmarks)
        print(f"phantom '{args.kind}' dims={tuple(args.dims)} seed={args.seed} "
              f"-> {args.out_image}")
        return 0

    return _guarded(outputs, run)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="voxreg",
        description="Deformable 3D registration by displacement-field "
                    "optimization, plus warping, evaluation, and visualization.")
    sub = p.add_subparsers(dest="command", required=True)

    reg = sub.add_parser(Command.REGISTER.value,
                         help="optimize a displacement field for one pair")
    reg.add_argument("--moving", required=True)
    reg.add_argument("--fixed", required=True)
    reg.add_argument("--out-field", required=True)
    reg.add_argument("--config", help="JSON file of config overrides")
    reg.add_argument("--trace-out", help="per-iteration loss CSV")
    reg.add_argument("--jobs", type=int)
    reg.add_argument("--bf", dest="bf", action="store_true", default=None,
                     help="bilateral-filter the final field (default on)")
    reg.add_argument("--no-bf", dest="bf", action="store_false")
    reg.add_argument("--bf-sigma-spatial", type=float)
    reg.add_argument("--bf-sigma-range", type=float)
    reg.set_defaults(func=cmd_register)

    wp = sub.add_parser(Command.WARP.value, help="resample through a field")
    wp.add_argument("--input", required=True)
    wp.add_argument("--field", required=True)
    wp.add_argument("--out", required=True)
    wp.add_argument("--labels", action="store_true",
                    help="treat input as a label map (nearest lookup)")
    wp.add_argument("--mode", choices=["linear", "nearest"], default="linear")
    wp.set_defaults(func=cmd_warp)

    ev = sub.add_parser(Command.EVALUATE.value,
                        help="score a field against labels/landmarks")
    ev.add_argument("--field", required=True)
    ev.add_argument("--fixed-labels")
    ev.add_argument("--moving-labels")
    ev.add_argument("--landmarks-fixed")
    ev.add_argument("--landmarks-moving")
    ev.add_argument("--out-json", default="metrics.json")
    ev.add_argument("--out-csv", default="metrics.csv")
    ev.add_argument("--pair-id", default="pair")
    ev.add_argument("--jobs", type=int, default=1)
    ev.set_defaults(func=cmd_evaluate)

    vz = sub.add_parser(Command.VISUALIZE.value,
                        help="render grid + arrows for one slice")
    vz.add_argument("--field", required=True)
    vz.add_argument("--background")
    vz.add_argument("--axis", choices=["x", "y", "z"], default="z")
    vz.add_argument("--slice", type=int, default=None)
    vz.add_argument("--out-png", required=True)
    vz.add_argument("--stride", type=int, default=8)
    vz.set_defaults(func=cmd_visualize)

    ph = sub.add_parser(Command.PHANTOM.value,
                        help="generate a synthetic labeled volume")
    ph.add_argument("--kind", choices=["spheres", "blobs"], default="spheres")
    ph.add_argument("--dims", type=int, nargs=3, required=True)
    ph.add_argument("--seed", type=int, default=0)
    ph.add_argument("--count", type=int, default=5)
    ph.add_argument("--out-image", required=True)
    ph.add_argument("--out-labels")
    ph.add_argument("--out-landmarks")
    ph.set_defaults(func=cmd_phantom)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as e:
        print(f"error: missing file: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # noqa: BLE001 - CLI boundary
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
