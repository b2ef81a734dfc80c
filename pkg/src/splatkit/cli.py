"""Command-line pipeline: ingest -> train -> prune -> render, plus the
synthetic benchmark (synth/eval) and splat inspection (info).

Configuration is flat `key=value` pairs (repeatable --set flag and/or a
`key = value` config file); `--print-config` on any subcommand prints every
accepted key with its effective default. Exit codes: 0 success (warnings
allowed), 2 usage error, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from .errors import SplatkitError
from .formats.colmap import SceneBundle, diagnose_registration, parse_colmap_dir
from .formats.image import write_image
from .formats.splat_ply import read_splat_ply, write_splat_ply
from .geom import look_at_quat, quat_to_rot
from .formats.colmap import CameraIntrinsics, CameraModel, CameraPose
from .model import init_from_sparse, sigmoid
from .pruning import Aabb, PruneChainConfig, run_prune_chain
from .rasterizer import RenderOptions, render
from .synth import (RigSpec, VortexSpec, evaluate, make_dataset,
                    read_held_out_names)
from .trainer import TrainConfig, compute_extent, train


class UsageError(Exception):
    pass


def _atomic_write_text(path, text: str) -> None:
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w") as f:
        f.write(text)
    os.replace(tmp, path)


def _parse_value(raw: str, default):
    if isinstance(default, bool):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise UsageError(f"expected boolean, got {raw!r}")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    if isinstance(default, tuple):
        if raw.strip() == "":
            return ()
        parts = [p.strip() for p in raw.split(",")]
        elem = default[0] if default else 0.0
        if isinstance(elem, str):
            return tuple(parts)
        if isinstance(elem, int) and not isinstance(elem, bool):
            return tuple(int(p) for p in parts)
        return tuple(float(p) for p in parts)
    return raw


def _collect_overrides(args) -> dict[str, str]:
    pairs: dict[str, str] = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.is_file():
            raise UsageError(f"config file not found: {path}")
        for lineno, line in enumerate(path.read_text().splitlines(), 1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise UsageError(f"{path}:{lineno}: expected key = value")
            key, _, value = stripped.partition("=")
            pairs[key.strip()] = value.strip()
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        key, _, value = item.partition("=")
        pairs[key.strip()] = value.strip()
    return pairs


def _apply_overrides(cls, overrides: dict[str, str], prefix: str = "",
                     base=None):
    values = dataclasses.asdict(base) if base is not None else {
        f.name: (f.default_factory() if f.default_factory is not dataclasses.MISSING
                 else f.default)
        for f in dataclasses.fields(cls)}
    consumed = []
    for key, raw in overrides.items():
        if prefix:
            if not key.startswith(prefix):
                continue
            name = key[len(prefix):]
        else:
            name = key
        if name not in values:
            continue
        values[name] = _parse_value(raw, values[name])
        consumed.append(key)
    for key in consumed:
        del overrides[key]
    try:
        return cls(**values)
    except SplatkitError as e:
        raise UsageError(str(e)) from e


def _reject_unknown(overrides: dict[str, str]) -> None:
    if overrides:
        raise UsageError("unknown configuration keys: " + ", ".join(sorted(overrides)))


def _print_config(objs: dict[str, object]) -> None:
    for prefix, obj in objs.items():
        for f in dataclasses.fields(obj):
            value = getattr(obj, f.name)
            if isinstance(value, tuple):
                value = ",".join(str(v) for v in value)
            print(f"{prefix}{f.name} = {value}")


def _load_training_bundle(dataset_dir) -> tuple[SceneBundle, SceneBundle, list[str]]:
    """Full bundle, training-only bundle, and held-out names from rigspec."""
    bundle = parse_colmap_dir(dataset_dir)
    held = read_held_out_names(dataset_dir)
    train_poses = [p for p in bundle.poses if p.image_name not in held]
    train_bundle = SceneBundle(bundle.intrinsics, train_poses, bundle.points,
                               bundle.images, bundle.warnings)
    return bundle, train_bundle, held


def cmd_ingest(args) -> int:
    bundle = parse_colmap_dir(args.colmap_dir)
    expected = args.expected_cameras or len(bundle.poses)
    warnings = list(bundle.warnings) + diagnose_registration(bundle, expected)
    extent = compute_extent(bundle.poses)
    cloud = init_from_sparse(bundle.points, extent.radius)
    write_splat_ply(cloud, args.out)
    print(f"views: {len(bundle.poses)}")
    print(f"points: {len(bundle.points)}")
    print(f"extent: {extent.radius:.6g} (center {extent.center.round(6).tolist()})")
    print(f"gaussians written: {cloud.n} -> {args.out}")
    print(f"warnings: {len(warnings)}")
    for w in warnings:
        print(f"  [{w.kind}] {w.message}")
    return 0


def _write_checkpoint(out_dir: Path, cloud, iteration: int, extent: float,
                      config: TrainConfig, final: bool) -> Path:
    name = "checkpoint" if final else f"checkpoint_{iteration:06d}"
    ply = out_dir / f"{name}.ply"
    write_splat_ply(cloud, ply)
    meta = (f"iteration = {iteration}\n"
            f"config_hash = {config.config_hash()}\n"
            f"extent = {extent!r}\n"
            f"seed = {config.seed}\n"
            f"active_sh_degree = {cloud.active_sh_degree}\n"
            f"gaussians = {cloud.n}\n")
    _atomic_write_text(out_dir / f"{name}.meta.txt", meta)
    return ply


def cmd_train(args) -> int:
    overrides = _collect_overrides(args)
    config = _apply_overrides(TrainConfig, overrides)
    _reject_unknown(overrides)
    if args.seed is not None:
        config = dataclasses.replace(config, seed=args.seed)
    if args.print_config:
        _print_config({"": config})
        return 0
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    full, train_bundle, held = _load_training_bundle(args.dataset_dir)
    extent = compute_extent(train_bundle.poses)
    init = init_from_sparse(train_bundle.points, extent.radius)
    if config.iterations == 0:
        cloud, log = init, []
    else:
        def writer(c, it, ext):
            _write_checkpoint(out_dir, c, it, ext, config,
                              final=(it == config.iterations))

        cloud, log = train(train_bundle, init, config, checkpoint_writer=writer)
    _write_checkpoint(out_dir, cloud, config.iterations, extent.radius, config,
                      final=True)
    _atomic_write_text(out_dir / "train_log.jsonl",
                       "".join(json.dumps(rec) + "\n" for rec in log))
    if held:
        table = evaluate(cloud, full, held)
        for line in table.lines():
            print(line)
        _atomic_write_text(out_dir / "metrics.txt", "\n".join(table.lines()) + "\n")
    print(f"final cloud: {cloud.n} gaussians -> {out_dir / 'checkpoint.ply'}")
    return 0


def cmd_prune(args) -> int:
    overrides = _collect_overrides(args)
    chain = _apply_overrides(PruneChainConfig, overrides)
    _reject_unknown(overrides)
    if args.print_config:
        _print_config({"": chain})
        return 0
    cloud = read_splat_ply(args.splat)
    bundle = points = None
    if args.dataset_dir:
        _, bundle, _ = _load_training_bundle(args.dataset_dir)
        points = bundle.points
    if args.bounds and args.bounds != "auto":
        vals = [float(v) for v in args.bounds.split(",")]
        if len(vals) != 6:
            raise UsageError("--bounds expects 'auto' or 6 comma-separated numbers")
        chain = dataclasses.replace(chain, bounds_box=Aabb(vals[:3], vals[3:]))
    if chain.use_bounds and chain.bounds_box is None and points is None:
        raise UsageError("bounds rule needs --dataset-dir (for auto bounds) "
                         "or an explicit --bounds box")
    if chain.use_support and bundle is None:
        raise UsageError("support rule needs --dataset-dir")
    pruned, report = run_prune_chain(cloud, chain, bundle=bundle, points=points)
    write_splat_ply(pruned, args.out)
    report_path = args.report or f"{args.out}.report.txt"
    _atomic_write_text(report_path, "\n".join(report.lines()) + "\n")
    for line in report.lines():
        print(line)
    return 0


def _orbit_poses(cloud, n: int, radius_scale: float, height_scale: float,
                 focal: float, width: int, height: int):
    center = cloud.positions.mean(axis=0) if cloud.n else np.zeros(3)
    spread = float(np.linalg.norm(cloud.positions - center, axis=1).max()) \
        if cloud.n else 1.0
    spread = max(spread, 1e-6)
    intr = CameraIntrinsics(1, CameraModel.PINHOLE, width, height, focal, focal,
                            width / 2.0, height / 2.0)
    poses = []
    for k in range(n):
        a = 2.0 * np.pi * k / n
        cam_center = center + np.array([
            radius_scale * spread * np.cos(a),
            radius_scale * spread * np.sin(a),
            height_scale * spread])
        q = look_at_quat(cam_center, center)
        R = quat_to_rot(q)
        poses.append(CameraPose(k + 1, q, -R @ cam_center, 1, f"orbit{k:03d}.ppm"))
    return intr, poses


def cmd_render(args) -> int:
    cloud = read_splat_ply(args.splat)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    exact = RenderOptions.exact()
    bg = tuple(float(v) for v in args.background.split(","))
    if args.view:
        if not args.dataset_dir:
            raise UsageError("--view needs --dataset-dir")
        bundle = parse_colmap_dir(args.dataset_dir)
        by_name = {p.image_name: p for p in bundle.poses}
        if args.view not in by_name:
            raise UsageError(f"unknown view: {args.view}")
        pose = by_name[args.view]
        out = render(cloud, bundle.intrinsics[pose.camera_id], pose, bg, exact)
        write_image(out.image(), out_dir / args.view)
        print(f"wrote {out_dir / args.view}")
        return 0
    intr, poses = _orbit_poses(cloud, args.orbit, args.orbit_radius,
                               args.orbit_height, args.focal,
                               args.width, args.size_height)
    for pose in poses:
        out = render(cloud, intr, pose, bg, exact)
        write_image(out.image(), out_dir / pose.image_name)
    print(f"wrote {len(poses)} orbit views to {out_dir}")
    return 0


def cmd_synth(args) -> int:
    overrides = _collect_overrides(args)
    vortex = _apply_overrides(VortexSpec, overrides, prefix="vortex.")
    rig = _apply_overrides(RigSpec, overrides, prefix="rig.")
    _reject_unknown(overrides)
    if args.seed is not None:
        vortex = dataclasses.replace(vortex, seed=args.seed)
    if args.print_config:
        _print_config({"vortex.": vortex, "rig.": rig})
        return 0
    bundle = make_dataset(vortex, rig, args.out_dir, subsample=args.subsample,
                          noise_sigma=args.noise_sigma, noise_seed=args.noise_seed)
    held = read_held_out_names(args.out_dir)
    print(f"dataset: {len(bundle.poses)} views "
          f"({len(bundle.poses) - len(held)} training, {len(held)} held out), "
          f"{len(bundle.points)} points -> {args.out_dir}")
    return 0


def cmd_eval(args) -> int:
    cloud = read_splat_ply(args.splat)
    bundle = parse_colmap_dir(args.dataset_dir)
    held = args.views or read_held_out_names(args.dataset_dir)
    names = {p.image_name for p in bundle.poses}
    for v in held:
        if v not in names:
            raise UsageError(f"unknown view: {v}")
    table = evaluate(cloud, bundle, held)
    for line in table.lines():
        print(line)
    if args.out:
        _atomic_write_text(args.out, "\n".join(table.lines()) + "\n")
    return 0


def cmd_info(args) -> int:
    warnings = []
    cloud = read_splat_ply(args.splat, warnings=warnings)
    print(f"gaussians: {cloud.n}")
    if cloud.n:
        lo = cloud.positions.min(axis=0).round(6).tolist()
        hi = cloud.positions.max(axis=0).round(6).tolist()
        op = sigmoid(cloud.opacity_logits)
        sc = np.exp(cloud.log_scales)
        print(f"position bounds: {lo} .. {hi}")
        print(f"opacity: min {op.min():.6f} mean {op.mean():.6f} max {op.max():.6f}")
        print(f"scale: min {sc.min():.6g} mean {sc.mean():.6g} max {sc.max():.6g}")
    for w in warnings:
        print(f"  [{w.kind}] {w.message}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="splatkit",
                                description="3D Gaussian splatting toolkit")
    p.add_argument("--seed", type=int, default=None, help="override RNG seed")
    p.add_argument("--threads", type=int, default=1,
                   help="accepted for interface stability; rendering is "
                        "single-threaded for bitwise reproducibility")
    p.add_argument("--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common_cfg(sp):
        sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="configuration override (repeatable)")
        sp.add_argument("--config", help="config file of 'key = value' lines")
        sp.add_argument("--print-config", action="store_true",
                        help="print effective configuration and exit")

    sp = sub.add_parser("ingest", help="parse a COLMAP export, diagnose, initialize")
    sp.add_argument("colmap_dir")
    sp.add_argument("--expected-cameras", type=int, default=None)
    sp.add_argument("--out", required=True, help="initialization splat PLY")
    sp.set_defaults(func=cmd_ingest)

    sp = sub.add_parser("train", help="optimize a splat cloud on a dataset")
    sp.add_argument("dataset_dir")
    sp.add_argument("--out-dir", required=True)
    common_cfg(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("prune", help="remove floaters from a splat cloud")
    sp.add_argument("splat")
    sp.add_argument("--out", required=True)
    sp.add_argument("--dataset-dir", default=None)
    sp.add_argument("--bounds", default=None,
                    help="'auto' or xmin,ymin,zmin,xmax,ymax,zmax")
    sp.add_argument("--report", default=None)
    common_cfg(sp)
    sp.set_defaults(func=cmd_prune)

    sp = sub.add_parser("render", help="render novel views from a splat cloud")
    sp.add_argument("splat")
    sp.add_argument("--out-dir", required=True)
    sp.add_argument("--dataset-dir", default=None)
    sp.add_argument("--view", default=None, help="render this dataset view")
    sp.add_argument("--orbit", type=int, default=8, help="orbit view count")
    sp.add_argument("--orbit-radius", type=float, default=2.5,
                    help="orbit radius as a multiple of cloud spread")
    sp.add_argument("--orbit-height", type=float, default=0.6)
    sp.add_argument("--focal", type=float, default=140.0)
    sp.add_argument("--width", type=int, default=128)
    sp.add_argument("--size-height", type=int, default=128)
    sp.add_argument("--background", default="0,0,0")
    sp.set_defaults(func=cmd_render)

    sp = sub.add_parser("synth", help="generate a synthetic benchmark dataset")
    sp.add_argument("--out-dir", required=True)
    sp.add_argument("--subsample", type=float, default=1.0)
    sp.add_argument("--noise-sigma", type=float, default=0.0)
    sp.add_argument("--noise-seed", type=int, default=1)
    common_cfg(sp)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("eval", help="held-out view metrics for a splat cloud")
    sp.add_argument("splat")
    sp.add_argument("dataset_dir")
    sp.add_argument("--views", nargs="*", default=None)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("info", help="print splat PLY statistics")
    sp.add_argument("splat")
    sp.set_defaults(func=cmd_info)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 2
    except SplatkitError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
