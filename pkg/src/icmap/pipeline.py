"""Frame-by-frame pipeline: associate, sample history, fuse, merge.

This is the glue the CLI drives; it owns the effective parameter set and
the per-frame trace consumed by the tracking metrics.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .association import AssocConfig, TrackBuffer, associate_frame
from .curvefit import SmoothingFitParams
from .errors import OrderingError
from .geometry import Rect
from .instance import MapInstance
from .mapstore import GlobalMap, fuse_with_history, merge_instance, sample_history
from .synth import Scene

TRACE_FORMAT_VERSION = "1"


@dataclass(frozen=True)
class PipelineParams:
    assoc: AssocConfig = field(default_factory=AssocConfig)
    fit: SmoothingFitParams = field(default_factory=SmoothingFitParams)
    n_sample: int = 20
    expand: float = 20.0
    fuse_radius: float = 1.0
    fuse_weight: float = 0.5
    fusion_enabled: bool = True
    min_score: float = 0.55

    def effective(self) -> dict:
        doc = {"assoc": asdict(self.assoc), "fit": asdict(self.fit)}
        for key in ("n_sample", "expand", "fuse_radius", "fuse_weight",
                    "fusion_enabled", "min_score"):
            doc[key] = getattr(self, key)
        return doc


def run_scene(scene: Scene, params: PipelineParams) -> tuple[GlobalMap, dict]:
    """Stream the scene's frames through the full pipeline.

    Returns the final global map and a trace document holding, per frame,
    the detection count, accepted matches with their affinity, freshly
    issued IDs, and the tracked world-frame instances.
    """
    gmap = GlobalMap(scene_id=scene.scene_id)
    buffer = TrackBuffer()
    trace_frames = []
    prev_t = None
    for frame in scene.frames:
        if prev_t is not None and frame.t <= prev_t:
            raise OrderingError(f"frame {frame.t} after frame {prev_t}")
        prev_t = frame.t
        dets = [d for d in frame.detections if d.score >= params.min_score]
        result = associate_frame(buffer, dets, frame.ego_pose, params.assoc, frame.t)
        buffer = result.buffer
        patch = Rect(frame.ego_pose, scene.range_lw[0] / 2.0, scene.range_lw[1] / 2.0)
        ids = [d.id for d in result.dets]
        history = sample_history(gmap, patch, params.expand, ids, params.n_sample)
        outputs: list[MapInstance] = []
        for det in result.dets:
            if params.fusion_enabled:
                det = fuse_with_history(
                    det, history.get(det.id), params.fuse_radius, params.fuse_weight
                )
            outputs.append(det)
        for det in outputs:
            merge_instance(gmap, det, params.fit, frame=frame.t)
        trace_frames.append(
            {
                "t": frame.t,
                "det_count": len(dets),
                "matches": [[i, tid, aff] for i, tid, aff in result.matches],
                "new_ids": list(result.new_ids),
                "instances": [
                    {
                        "id": d.id,
                        "class": d.cls,
                        "score": float(d.score),
                        "points": [[float(x), float(y)] for x, y in d.points],
                    }
                    for d in outputs
                ],
            }
        )
    trace = {
        "format_version": TRACE_FORMAT_VERSION,
        "scene_id": scene.scene_id,
        "config": params.effective(),
        "frames": trace_frames,
    }
    return gmap, trace


def trace_pred_frames(trace: dict) -> list[list[MapInstance]]:
    """Tracked per-frame instances (world frame) out of a trace document."""
    frames = []
    for fr in trace["frames"]:
        frames.append(
            [
                MapInstance(
                    o["class"],
                    np.asarray(o["points"], dtype=np.float64),
                    score=float(o.get("score", 1.0)),
                    id=int(o["id"]),
                )
                for o in fr["instances"]
            ]
        )
    return frames


def scene_gt_frames(scene: Scene) -> list[list[MapInstance]]:
    """Per-frame ground truth transformed to the world frame."""
    from .geometry import EGO_TO_WORLD

    return [
        [g.transformed(f.ego_pose, EGO_TO_WORLD) for g in f.gt_local] for f in scene.frames
    ]


def scene_observations(scene: Scene) -> dict:
    """Group a scene's polyline detections by their ground-truth instance.

    Each detection is attributed to the nearest gt_local instance of its
    class (unambiguous at the noise levels used for sweeps); the result
    feeds curvefit.sweep_smoothing.
    """
    from .geometry import EGO_TO_WORLD, chamfer_distance

    cases: dict[int, list] = {}
    ref: dict[int, MapInstance] = {}
    for inst_id in sorted(scene.gt.instances):
        inst = scene.gt.instances[inst_id]
        if inst.is_polyline:
            ref[inst_id] = inst
            cases[inst_id] = []
    for frame in scene.frames:
        gt_world = {
            g.id: g.transformed(frame.ego_pose, EGO_TO_WORLD)
            for g in frame.gt_local
            if g.is_polyline
        }
        if not gt_world:
            continue
        for det in frame.detections:
            if not det.is_polyline:
                continue
            world = det.transformed(frame.ego_pose, EGO_TO_WORLD)
            best_id, best_d = None, np.inf
            for gid, g in gt_world.items():
                if g.cls != det.cls:
                    continue
                d = chamfer_distance(world.points, g.points)
                if d < best_d:
                    best_id, best_d = gid, d
            if best_id is not None and best_d < 5.0:
                cases[best_id].append(world.points)
    out: dict[str, list] = {}
    for gid, obs in cases.items():
        if obs:
            out.setdefault(ref[gid].cls, []).append((ref[gid].points, obs))
    return out
