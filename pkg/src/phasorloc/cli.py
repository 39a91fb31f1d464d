"""Command-line surface tying the library together.

Subcommands: simulate, encode, decode, evaluate, sweep, filter, render,
residuals. Exit codes: 0 success, 1 validation error (including usage), 2
I/O or format error. All randomness flows from --seed; --preset and
--config compose with explicit flags, and flags win.
"""

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import codec, filtering, formats, metrics, presets
from . import render as render_mod
from . import sim
from .errors import (FormatError, OutOfRangeError, UndefinedMetricError,
                     ValidationError)

FRAME_NAME = "frame_{:06d}.grid"
MAP_NAME = "map_{:06d}.grid"


class _Parser(argparse.ArgumentParser):
    """argparse variant that reports usage problems with exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _resolve_config(args, flag_map) -> dict:
    """defaults < preset < config file < explicit flags."""
    values = presets.default_config()
    if getattr(args, "preset", None):
        values.update(presets.expand_preset(args.preset))
    if getattr(args, "config", None):
        text = Path(args.config).read_text()
        values.update(formats.parse_keyvalues(text, formats.CONFIG_SCHEMA,
                                              path=args.config))
    for flag, key in flag_map.items():
        flag_value = getattr(args, flag, None)
        if flag_value is not None:
            values[key] = flag_value
    return values


def _pool_map(worker, items, workers: int):
    """Order-preserving map, inline or over a process pool."""
    if workers <= 1:
        return [worker(item) for item in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(worker, items))


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def _simulate_worker(task):
    values, frame_id, out_dir = task
    config = presets.build_sim_config(values)
    frame, emitters = sim.simulate_frame(config, frame_id)
    formats.write_frame_grid(Path(out_dir) / FRAME_NAME.format(frame_id), frame)
    return emitters


def _cmd_simulate(args) -> int:
    values = _resolve_config(args, {"density": "sim.density",
                                    "frames": "sim.n_frames",
                                    "seed": "sim.seed"})
    config = presets.build_sim_config(values)
    out = Path(args.out)
    frames_dir = out / "frames"
    frames_dir.mkdir(parents=True, exist_ok=True)
    tasks = [(values, fid, str(frames_dir)) for fid in range(config.n_frames)]
    emitter_sets = _pool_map(_simulate_worker, tasks, args.workers)
    formats.write_emitters(out / "emitters.csv", emitter_sets)
    formats.write_config(out / "config.txt", values)
    print(f"simulated {config.n_frames} frames -> {out}")
    return 0


# ---------------------------------------------------------------------------
# encode
# ---------------------------------------------------------------------------

def _encode_worker(task):
    values, emitters, out_dir = task
    camera = presets.build_camera(values)
    decode_cfg = presets.build_decode_config(values)
    z_range = (values["sim.z_min"], values["sim.z_max"])
    pair = codec.encode_targets(emitters, camera, z_range, decode_cfg)
    formats.write_map_pair(Path(out_dir) / MAP_NAME.format(emitters.frame_id),
                           pair)
    return emitters.frame_id


def _cmd_encode(args) -> int:
    values = _resolve_config(args, {"frames": "sim.n_frames"})
    sets = formats.read_emitters(args.gt)
    by_frame = {es.frame_id: es for es in sets}
    n_frames = values["sim.n_frames"]
    if by_frame:
        n_frames = max(n_frames, max(by_frame) + 1)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    tasks = [(values, by_frame.get(fid, sim.EmitterSet.empty(fid)), str(out))
             for fid in range(n_frames)]
    _pool_map(_encode_worker, tasks, args.workers)
    print(f"encoded {n_frames} map pairs -> {out}")
    return 0


# ---------------------------------------------------------------------------
# decode
# ---------------------------------------------------------------------------

def _decode_worker(task):
    values, path, frame_id = task
    decode_cfg = presets.build_decode_config(values)
    pair = formats.read_map_pair(path)
    return codec.decode(pair, decode_cfg, frame_id=frame_id)


def _cmd_decode(args) -> int:
    values = _resolve_config(args, {})
    maps_dir = Path(args.maps)
    paths = sorted(maps_dir.glob("map_*.grid"))
    if not paths:
        raise FormatError("no map_*.grid files found", path=str(maps_dir))
    tasks = []
    for path in paths:
        frame_id = int(path.stem.split("_")[1])
        tasks.append((values, str(path), frame_id))
    results = _pool_map(_decode_worker, tasks, args.workers)
    seeds = codec.LocalizationSet.concatenate(results)
    formats.write_seeds(args.out, seeds)
    dropped = seeds.n_dropped_depth
    print(f"decoded {seeds.n} seeds from {len(paths)} frames"
          + (f" ({dropped} dropped: undefined depth)" if dropped else ""))
    return 0


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------

def _evaluate_sets(gt_sets, seeds, tol_lateral, tol_axial, lateral_only):
    acc = metrics.MetricAccumulator()
    frame_ids = sorted(set(es.frame_id for es in gt_sets)
                       | set(int(f) for f in np.unique(seeds.frame_ids)))
    by_frame = {es.frame_id: es for es in gt_sets}
    for fid in frame_ids:
        gt = by_frame.get(fid, sim.EmitterSet.empty(fid))
        acc.add(metrics.match_localizations(gt, seeds.for_frame(fid),
                                            tol_lateral, tol_axial,
                                            lateral_only=lateral_only))
    return acc


def _cmd_evaluate(args) -> int:
    values = _resolve_config(args, {"tol_lateral": "metrics.tol_lateral",
                                    "tol_axial": "metrics.tol_axial"})
    gt_sets = formats.read_emitters(args.gt)
    seeds = formats.read_seeds(args.pred)
    lateral_only = args.lateral_only or values["metrics.lateral_only"]
    acc = _evaluate_sets(gt_sets, seeds, values["metrics.tol_lateral"],
                         values["metrics.tol_axial"], lateral_only)
    report = acc.report()
    text = formats.report_text(report)
    sys.stdout.write(text)
    if args.out:
        Path(args.out).write_text(text)
    return 0


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

def _cmd_sweep(args) -> int:
    values = _resolve_config(args, {"seed": "sim.seed"})
    densities = [float(tok) for tok in args.densities.split(",") if tok]
    config = presets.build_sim_config(values)
    decode_cfg = presets.build_decode_config(values)
    min_sep_nm = args.min_separation * config.camera.pixel_pitch_x / codec.UPSAMPLE
    points = metrics.density_sweep(
        densities, config, decode_cfg,
        tol_lateral=values["metrics.tol_lateral"],
        tol_axial=values["metrics.tol_axial"],
        lateral_only=values["metrics.lateral_only"],
        min_separation_nm=min_sep_nm,
        map_noise_sigma=args.map_noise,
        rel_tolerance=values["metrics.residual_rel_tolerance"],
        checkpoint_every=values["metrics.residual_checkpoint"],
        patience=values["metrics.residual_patience"],
        max_frames=args.max_frames)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for i, point in enumerate(points):
        rep = point.report
        formats.write_report(out / f"report_{i:03d}.txt", rep)
        rows.append([rep.density, rep.ji, rep.rmse_lateral, rep.rmse_3d,
                     rep.efficiency_3d])
        status = "converged" if point.convergence.converged else "not converged"
        print(f"density {rep.density:g}: ji={rep.ji:.4f} "
              f"rmse_3d={rep.rmse_3d:.3f} nm ({status}, "
              f"{rep.n_seeds} seeds)")
    formats.write_columns(out / "sweep.txt",
                          ["density", "ji", "rmse_lateral", "rmse_3d",
                           "efficiency_3d"], rows)
    return 0


# ---------------------------------------------------------------------------
# filter
# ---------------------------------------------------------------------------

def _cmd_filter(args) -> int:
    values = _resolve_config(args, {})
    seeds = formats.read_seeds(args.pred)
    z_range = (values["sim.z_min"], values["sim.z_max"])
    if args.scores:
        _, arr = formats.read_columns(args.scores)
        if arr.shape[0] != seeds.n:
            raise ValidationError("score file length does not match seed count")
        scores = arr[:, 0]
    else:
        scores = filtering.proxy_uncertainty(
            seeds, z_range, c1=values["filter.c1"],
            c2=values["filter.c2"]).scalar_score
    if args.rates:
        if not args.gt:
            raise ValidationError("--rates needs --gt to evaluate the curve")
        rates = [float(tok) for tok in args.rates.split(",") if tok]
        gt_sets = formats.read_emitters(args.gt)
        curve = filtering.filter_sweep(
            gt_sets, seeds, scores, rates,
            tol_lateral=values["metrics.tol_lateral"],
            tol_axial=values["metrics.tol_axial"])
        formats.write_columns(args.out, ["rate", "ji", "rmse_3d"], curve)
        print(f"filter curve over {len(rates)} rates -> {args.out}")
    else:
        if args.threshold is not None:
            kept = seeds.subset(scores <= args.threshold)
        else:
            kept = filtering.filter_by_rate(seeds, scores, args.rate)
        formats.write_seeds(args.out, kept)
        print(f"kept {kept.n} of {seeds.n} seeds -> {args.out}")
    return 0


# ---------------------------------------------------------------------------
# render
# ---------------------------------------------------------------------------

def _cmd_render(args) -> int:
    flag_map = {"bin_size": "render.bin_size", "color_mode": "render.color_mode",
                "scale": "render.intensity_scale", "colormap": "render.colormap",
                "cross_axis": "render.cross_axis",
                "cross_center": "render.cross_center",
                "cross_thickness": "render.cross_thickness"}
    values = _resolve_config(args, flag_map)
    if args.z_clip:
        lo, hi = (float(t) for t in args.z_clip.split(","))
        values["render.z_clip_min"], values["render.z_clip_max"] = lo, hi
    if args.region:
        x0, x1, y0, y1 = (float(t) for t in args.region.split(","))
        values.update({"render.region_x0": x0, "render.region_x1": x1,
                       "render.region_y0": y0, "render.region_y1": y1})
    cfg = presets.build_render_config(values)
    seeds = formats.read_localizations_any(args.pred)
    if cfg.cross_section is not None:
        result = render_mod.render_cross_section(seeds, cfg)
    else:
        result = render_mod.render_histogram(seeds, cfg)
    render_mod.save_png(result, args.out)
    if result.warning:
        print(f"warning: {result.warning}", file=sys.stderr)
    print(f"rendered {int(result.counts.sum())} seeds -> {args.out}")
    return 0


# ---------------------------------------------------------------------------
# residuals
# ---------------------------------------------------------------------------

def _cmd_residuals(args) -> int:
    values = _resolve_config(args, {"seed": "sim.seed",
                                    "density": "sim.density"})
    config = presets.build_sim_config(values)
    decode_cfg = presets.build_decode_config(values)
    min_sep_nm = args.min_separation * config.camera.pixel_pitch_x / codec.UPSAMPLE
    stream = metrics.oracle_pair_stream(config, decode_cfg,
                                        min_separation_nm=min_sep_nm,
                                        map_noise_sigma=args.map_noise,
                                        n_frames=args.max_frames)
    acc = metrics.MetricAccumulator()
    rows = []

    def checkpoints():
        mark = values["metrics.residual_checkpoint"]
        for emitters, pair in stream:
            pred = codec.decode(pair, decode_cfg, frame_id=emitters.frame_id)
            acc.add(metrics.match_localizations(
                emitters, pred, values["metrics.tol_lateral"],
                values["metrics.tol_axial"]))
            while acc.n_seeds >= mark:
                snap = acc.snapshot()
                rows.append(snap)
                yield snap
                mark += values["metrics.residual_checkpoint"]

    result = metrics.residual_convergence(
        checkpoints(), values["metrics.residual_rel_tolerance"],
        values["metrics.residual_patience"])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    formats.write_columns(out / "residuals.txt",
                          ["n_seeds", "ji", "rmse_lateral", "rmse_3d"], rows)
    summary = {
        "converged": ("bool", None),
        "seeds_needed": ("int", None),
        "checkpoints_seen": ("int", None),
    }
    formats_values = {"converged": result.converged,
                      "seeds_needed": result.seeds_needed,
                      "checkpoints_seen": result.checkpoints_seen}
    (out / "convergence.txt").write_text(
        formats.format_keyvalues(formats_values, summary))
    if result.converged:
        print(f"converged after {result.seeds_needed} seeds")
    else:
        print(f"not converged after {result.checkpoints_seen} checkpoints "
              f"(last residuals {result.last_residuals})")
    return 0


# ---------------------------------------------------------------------------
# parser wiring
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="phasorloc",
                     description="SMLM simulation, complex-domain codec and "
                                 "localization evaluation")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--preset", help="named preset (AI-1..AI-9, AI-AS, AI-DH)")
        p.add_argument("--config", help="run-config file (key = value)")

    p = sub.add_parser("simulate", help="generate frames and ground truth")
    common(p)
    p.add_argument("--frames", type=int, help="number of frames")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--density", type=float, help="emitters per um^2")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("encode", help="encode ground truth into map pairs")
    common(p)
    p.add_argument("--gt", required=True, help="emitter CSV")
    p.add_argument("--frames", type=int, help="total frame count")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_encode)

    p = sub.add_parser("decode", help="decode map pairs into seeds")
    common(p)
    p.add_argument("--maps", required=True, help="directory of map_*.grid")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True, help="output seed CSV")
    p.set_defaults(func=_cmd_decode)

    p = sub.add_parser("evaluate", help="match predictions and report metrics")
    common(p)
    p.add_argument("--gt", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--tol-lateral", dest="tol_lateral", type=float)
    p.add_argument("--tol-axial", dest="tol_axial", type=float)
    p.add_argument("--lateral-only", action="store_true")
    p.add_argument("--out", help="also write the report here")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("sweep", help="oracle density sweep with residual stop")
    common(p)
    p.add_argument("--densities", required=True, help="comma-separated list")
    p.add_argument("--seed", type=int)
    p.add_argument("--min-separation", dest="min_separation", type=float,
                   default=0.0, help="pairwise floor in super-res pixels")
    p.add_argument("--map-noise", dest="map_noise", type=float, default=0.0,
                   help="iid Gaussian sigma added to both map channels")
    p.add_argument("--max-frames", dest="max_frames", type=int, default=5000)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("filter", help="uncertainty filtering / rate curves")
    common(p)
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", help="ground truth (needed for --rates curves)")
    p.add_argument("--rate", type=float, default=0.0,
                   help="fraction of worst seeds to drop")
    p.add_argument("--rates", help="comma-separated rates for a curve")
    p.add_argument("--threshold", type=float,
                   help="drop seeds with score above this instead of by rate")
    p.add_argument("--scores", help="external score column file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_filter)

    p = sub.add_parser("render", help="histogram reconstruction to PNG")
    common(p)
    p.add_argument("--pred", required=True)
    p.add_argument("--bin-size", dest="bin_size", type=float)
    p.add_argument("--color-mode", dest="color_mode",
                   choices=["depth", "frame_id", "density"])
    p.add_argument("--scale", choices=["linear", "sqrt"])
    p.add_argument("--colormap")
    p.add_argument("--z-clip", dest="z_clip", help="zmin,zmax nm")
    p.add_argument("--region", help="x0,x1,y0,y1 nm")
    p.add_argument("--cross-axis", dest="cross_axis", choices=["x", "y", "z"])
    p.add_argument("--cross-center", dest="cross_center", type=float)
    p.add_argument("--cross-thickness", dest="cross_thickness", type=float)
    p.add_argument("--out", required=True, help="output PNG")
    p.set_defaults(func=_cmd_render)

    p = sub.add_parser("residuals", help="how-much-data-is-enough study")
    common(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--density", type=float)
    p.add_argument("--min-separation", dest="min_separation", type=float,
                   default=0.0)
    p.add_argument("--map-noise", dest="map_noise", type=float, default=0.0)
    p.add_argument("--max-frames", dest="max_frames", type=int, default=5000)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_residuals)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, OutOfRangeError, UndefinedMetricError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FormatError as exc:
        print(f"format error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
