"""Command-line entry point: synth, run, eval, sweep-s, render."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .association import AssocConfig
from .curvefit import SmoothingFitParams, SweepTable, sweep_smoothing
from .errors import MapBuildError
from .instance import CLASSES
from .metrics import (
    DEFAULT_MOT_GATE,
    EvalReport,
    LARGE_THRESHOLDS,
    MotCounts,
    SMALL_THRESHOLDS,
    clear_mot_counts,
    global_map_cd,
    instance_ap,
)
from .mapstore import load_map, save_map
from .pipeline import PipelineParams, run_scene, scene_gt_frames, scene_observations, trace_pred_frames
from .render import render_svg, sweep_chart_svg
from .synth import CURVATURES, NoiseConfig, SceneConfig, make_scene, read_scene, write_scene

log = logging.getLogger("icmap")

_LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING,
               "info": logging.INFO, "debug": logging.DEBUG}


def _setup_logging():
    level = os.environ.get("IC_MAPPER_LOG", "warn").strip().lower()
    logging.basicConfig(level=_LOG_LEVELS.get(level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _parse_range(text: str) -> tuple[float, float]:
    try:
        l, w = text.lower().split("x")
        rng = (float(l), float(w))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"invalid range {text!r}; expected LENGTHxWIDTH, e.g. 100x50"
        ) from None
    if min(rng) <= 0:
        raise argparse.ArgumentTypeError("range extents must be positive")
    return rng


def _parse_sgrid(text: str) -> list[float]:
    try:
        start, stop, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"invalid s grid {text!r}; expected start:stop:step"
        ) from None
    if step <= 0 or stop < start or start < 0:
        raise argparse.ArgumentTypeError("s grid needs start >= 0, stop >= start, step > 0")
    return [round(v, 10) for v in np.arange(start, stop + step / 2, step)]


def _parse_thresholds(text: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid thresholds {text!r}") from None
    if not vals or any(v <= 0 for v in vals):
        raise argparse.ArgumentTypeError("thresholds must be positive numbers")
    return vals


def load_config(path) -> dict[str, str]:
    """Parse a `key = value` config file; '#' starts a comment."""
    cfg: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise MapBuildError(f"{path}:{lineno}: expected 'key = value', got {raw.rstrip()!r}")
            key, val = (part.strip() for part in line.split("=", 1))
            cfg[key] = val
    return cfg


def _cfg_get(cfg: dict, key: str, cast, default):
    if key not in cfg:
        return default
    try:
        if cast is bool:
            return cfg[key].strip().lower() in ("1", "true", "yes", "on")
        return cast(cfg[key])
    except ValueError:
        raise MapBuildError(f"config key {key!r}: cannot parse {cfg[key]!r}") from None


def _scene_config(cfg: dict, args) -> SceneConfig:
    noise = NoiseConfig(
        jitter_sigma=_cfg_get(cfg, "jitter_sigma", float, 0.0),
        dropout_prob=_cfg_get(cfg, "dropout_prob", float, 0.0),
        fp_rate=_cfg_get(cfg, "fp_rate", float, 0.0),
        split_prob=_cfg_get(cfg, "split_prob", float, 0.0),
        embedding_sigma=_cfg_get(cfg, "embedding_sigma", float, 0.05),
        embed_dim=_cfg_get(cfg, "embed_dim", int, 16),
        score_tp_mean=_cfg_get(cfg, "score_tp_mean", float, 0.8),
        score_tp_std=_cfg_get(cfg, "score_tp_std", float, 0.1),
        score_fp_mean=_cfg_get(cfg, "score_fp_mean", float, 0.4),
        score_fp_std=_cfg_get(cfg, "score_fp_std", float, 0.15),
    )
    curvature = _cfg_get(cfg, "curvature", str, "straight")
    if curvature not in CURVATURES:
        raise MapBuildError(f"config key 'curvature': unknown value {curvature!r}")
    rng = args.range or _cfg_get(cfg, "range", _parse_range, (100.0, 50.0))
    return SceneConfig(
        road_length=_cfg_get(cfg, "road_length", float, 150.0),
        lane_count=_cfg_get(cfg, "lane_count", int, 2),
        lane_width=_cfg_get(cfg, "lane_width", float, 3.5),
        curvature=curvature,
        radius=_cfg_get(cfg, "radius", float, 120.0),
        crossing_count=_cfg_get(cfg, "crossing_count", int, 1),
        frame_count=_cfg_get(cfg, "frame_count", int, 20),
        frame_spacing=_cfg_get(cfg, "frame_spacing", float, 3.0),
        range_lw=rng,
        noise=noise,
        seed=args.seed if args.seed is not None else _cfg_get(cfg, "seed", int, 0),
    )


def _pipeline_params(cfg: dict, args) -> PipelineParams:
    def flag(name, key, cast, default):
        v = getattr(args, name, None)
        return v if v is not None else _cfg_get(cfg, key, cast, default)

    assoc = AssocConfig(
        tau=flag("tau", "tau", float, 2.0),
        theta=flag("theta", "theta", float, 0.5),
        w_geo=flag("w_geo", "w_geo", float, 0.7),
        w_feat=flag("w_feat", "w_feat", float, 0.3),
        max_age=flag("max_age", "max_age", int, 0),
        geo_metric=_cfg_get(cfg, "geo_metric", str, "chamfer"),
    )
    fit = SmoothingFitParams(
        s=flag("s", "s", float, 0.5),
        degree=_cfg_get(cfg, "degree", int, 3),
        out_spacing=_cfg_get(cfg, "out_spacing", float, 1.0),
        min_points=_cfg_get(cfg, "min_points", int, 20),
        ctrl_spacing=_cfg_get(cfg, "ctrl_spacing", float, 2.0),
    )
    fusion = _cfg_get(cfg, "fusion", bool, True)
    if getattr(args, "no_fusion", False):
        fusion = False
    return PipelineParams(
        assoc=assoc,
        fit=fit,
        n_sample=flag("n_sample", "n_sample", int, 20),
        expand=flag("expand", "expand", float, 20.0),
        fuse_radius=_cfg_get(cfg, "fuse_radius", float, 1.0),
        fuse_weight=_cfg_get(cfg, "fuse_weight", float, 0.5),
        fusion_enabled=fusion,
        min_score=_cfg_get(cfg, "min_score", float, 0.55),
    )


# ---------------------------------------------------------------------------
# subcommands

def _synth_one(task):
    config, out_path = task
    write_scene(make_scene(config), out_path)
    return out_path


def cmd_synth(args) -> int:
    cfg = load_config(args.config) if args.config else {}
    base = _scene_config(cfg, args)
    if args.count is None:
        if args.out is None:
            raise MapBuildError("synth needs --out (or --count with --out-dir)")
        write_scene(make_scene(base), args.out)
        log.info("wrote scene %s", args.out)
        return 0
    out_dir = Path(args.out_dir or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    tasks = []
    for i in range(args.count):
        cfg_i = SceneConfig(**{**base.__dict__, "seed": base.seed + i})
        tasks.append((cfg_i, str(out_dir / f"scene_{i:03d}.json")))
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            list(pool.map(_synth_one, tasks))
    else:
        for task in tasks:
            _synth_one(task)
    return 0


def cmd_run(args) -> int:
    cfg = load_config(args.config) if args.config else {}
    params = _pipeline_params(cfg, args)
    scene = read_scene(args.scene)
    gmap, trace = run_scene(scene, params)
    save_map(gmap, args.out_map)
    if args.trace:
        with open(args.trace, "w", encoding="utf-8") as fh:
            json.dump(trace, fh, indent=1)
            fh.write("\n")
    return 0


def _eval_one(task) -> dict:
    scene_path, map_path, trace_path, thresholds, mot_gate, want_mot = task
    scene = read_scene(scene_path)
    pred_map = load_map(map_path)
    if thresholds is None:
        thresholds = list(LARGE_THRESHOLDS if scene.range_lw[0] >= 80 else SMALL_THRESHOLDS)
    gt_frames = scene_gt_frames(scene)
    out: dict = {"thresholds": thresholds, "mot_gate": mot_gate}
    cd, mcd = global_map_cd(pred_map, scene.gt)
    out["cd"] = cd
    out["mcd"] = mcd
    if want_mot:
        with open(trace_path, encoding="utf-8") as fh:
            trace = json.load(fh)
        pred_frames = trace_pred_frames(trace)
        ap, mean_ap, det_counts = instance_ap(pred_frames, gt_frames, thresholds)
        out["ap"] = ap
        out["mean_ap"] = mean_ap
        out["det_counts"] = det_counts
        out["mot"] = {
            cls: c.__dict__ for cls, c in clear_mot_counts(pred_frames, gt_frames, mot_gate).items()
        }
        out["pred_frames"] = pred_frames
        out["gt_frames"] = gt_frames
    return out


def cmd_eval(args) -> int:
    scenes = args.scene
    if args.mot and not args.trace and not args.pred_dir:
        raise MapBuildError("--mot requires --trace (per-frame tracked instances)")
    if len(scenes) > 1 and not args.pred_dir:
        raise MapBuildError("evaluating several scenes requires --pred-dir")
    tasks = []
    for scene_path in scenes:
        if args.pred_dir:
            stem = Path(scene_path).stem
            map_path = str(Path(args.pred_dir) / f"{stem}.map.json")
            trace_path = str(Path(args.pred_dir) / f"{stem}.trace.json")
        else:
            map_path = args.pred_map
            trace_path = args.trace
        if map_path is None:
            raise MapBuildError("eval needs --pred-map (or --pred-dir)")
        tasks.append((scene_path, map_path, trace_path, args.thresholds, args.mot_gate, args.mot))
    if args.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_eval_one, tasks))
    else:
        results = [_eval_one(t) for t in tasks]

    report = EvalReport(ap_thresholds=results[0]["thresholds"], mot_gate=args.mot_gate)
    per_class_cd: dict[str, list[float]] = {}
    for res in results:
        for cls, val in res["cd"].items():
            per_class_cd.setdefault(cls, []).append(val)
    report.cd = {cls: float(np.mean(vals)) for cls, vals in per_class_cd.items()}
    report.mcd = float(np.mean(list(report.cd.values()))) if report.cd else float("nan")
    if args.mot:
        # AP pools frames across scenes; MOT counts are summed per scene
        pred_frames = [fr for res in results for fr in res["pred_frames"]]
        gt_frames = [fr for res in results for fr in res["gt_frames"]]
        ap, mean_ap, det_counts = instance_ap(pred_frames, gt_frames, results[0]["thresholds"])
        report.ap = ap
        report.mean_ap = mean_ap
        report.det_counts = det_counts
        totals: dict[str, MotCounts] = {}
        for res in results:
            for cls, c in res["mot"].items():
                totals[cls] = totals.get(cls, MotCounts()).add(MotCounts(**c))
        report.mota = {cls: c.mota for cls, c in totals.items()}
        report.motp = {cls: c.motp for cls, c in totals.items()}
        report.id_switches = {cls: c.id_switches for cls, c in totals.items()}
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(report.to_json())
    sys.stdout.write(report.table())
    return 0


def _sweep_one(task):
    scene_path, grid, s_params = task
    scene = read_scene(scene_path)
    obs = scene_observations(scene)
    return sweep_smoothing(obs, grid, s_params)


def cmd_sweep_s(args) -> int:
    cfg = load_config(args.config) if args.config else {}
    params = _pipeline_params(cfg, args)
    grid = args.s_grid
    tasks = [(path, grid, params.fit) for path in args.scene]
    if args.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            all_rows = list(pool.map(_sweep_one, tasks))
    else:
        all_rows = [_sweep_one(t) for t in tasks]
    seen = {cls for rows in all_rows for _, errs in rows for cls in errs}
    classes = [cls for cls in CLASSES if cls in seen]
    if not classes:
        raise MapBuildError("no polyline observations found in the given scenes")
    table = SweepTable(classes=classes)
    for i, s in enumerate(grid):
        merged = {}
        for cls in classes:
            vals = [rows[i][1][cls] for rows in all_rows if cls in rows[i][1]]
            merged[cls] = float(np.mean(vals))
        table.rows.append((s, merged))
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(table.to_text())
    if args.plot:
        with open(args.plot, "w", encoding="utf-8") as fh:
            fh.write(sweep_chart_svg(table))
    sys.stdout.write(table.to_text())
    return 0


def cmd_render(args) -> int:
    entries = [(Path(p).name, load_map(p)) for p in args.maps]
    gt = None
    if args.gt:
        gt = read_scene(args.gt).gt
    svg = render_svg(entries, gt)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(svg)
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="icmap",
        description="Online vectorized map construction over synthetic detection streams.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_pipeline_flags(p):
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--theta", type=float, help="match acceptance threshold")
        p.add_argument("--tau", type=float, help="geometric affinity scale, meters")
        p.add_argument("--w-geo", dest="w_geo", type=float, help="geometric branch weight")
        p.add_argument("--w-feat", dest="w_feat", type=float, help="feature branch weight")
        p.add_argument("--max-age", dest="max_age", type=int, help="frames a track may go unseen")
        p.add_argument("--n-sample", dest="n_sample", type=int, help="history sample count")
        p.add_argument("--expand", type=float, help="patch expansion for sampling, meters")
        p.add_argument("--s", type=float, help="smoothing weight for merging")
        p.add_argument("--no-fusion", dest="no_fusion", action="store_true",
                       help="skip the history blend stage")

    p = sub.add_parser("synth", help="generate a synthetic scene file")
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--seed", type=int, help="RNG seed (overrides config)")
    p.add_argument("--out", help="output scene path")
    p.add_argument("--count", type=int, help="generate this many scenes (seeds seed..seed+N-1)")
    p.add_argument("--out-dir", help="directory for --count output")
    p.add_argument("--range", type=_parse_range, help="perception range LxW, e.g. 100x50")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("run", help="run the tracking + merging pipeline over a scene")
    p.add_argument("scene")
    p.add_argument("--out-map", required=True)
    p.add_argument("--trace", help="per-frame trace output (needed for MOT eval)")
    add_pipeline_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval", help="evaluate a predicted map/trace against a scene")
    p.add_argument("--scene", nargs="+", required=True)
    p.add_argument("--pred-map", help="predicted map file")
    p.add_argument("--trace", help="trace file from `icmap run`")
    p.add_argument("--pred-dir", help="directory of {stem}.map.json/{stem}.trace.json for multi-scene")
    p.add_argument("--mot", action="store_true", help="also compute AP and CLEAR-MOT from the trace")
    p.add_argument("--thresholds", type=_parse_thresholds,
                   help="AP thresholds in meters, e.g. 0.5,1.0,1.5")
    p.add_argument("--mot-gate", dest="mot_gate", type=float, default=DEFAULT_MOT_GATE)
    p.add_argument("--report", help="write the report as JSON here")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep-s", help="sweep the smoothing weight and report fit error")
    p.add_argument("scene", nargs="+")
    p.add_argument("--s-grid", dest="s_grid", type=_parse_sgrid, default="0:2:0.1",
                   help="start:stop:step (default 0:2:0.1)")
    p.add_argument("--out", required=True, help="TSV table output")
    p.add_argument("--plot", help="SVG chart output")
    p.add_argument("--jobs", type=int, default=1)
    add_pipeline_flags(p)
    p.set_defaults(func=cmd_sweep_s)

    p = sub.add_parser("render", help="render map files to SVG")
    p.add_argument("maps", nargs="*")
    p.add_argument("--gt", help="scene file whose ground truth is overlaid")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    if isinstance(getattr(args, "s_grid", None), str):
        args.s_grid = _parse_sgrid(args.s_grid)
    try:
        return args.func(args)
    except MapBuildError as exc:
        print(f"icmap: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"icmap: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
