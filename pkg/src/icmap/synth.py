"""Synthetic scene generation: ground-truth maps, ego trajectories,
per-frame clipped ground truth with IDs, and noisy detections with
simulated embeddings. Everything is a pure function of (config, seed).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleScene, SceneFormatError, UnsupportedVersion
from .geometry import (
    Pose2,
    Rect,
    WORLD_TO_EGO,
    clip_polygon_to_rect,
    clip_polyline_to_rect,
    polyline_length,
    resample_even,
    transform_points,
)
from .instance import BOUNDARY, CLASSES, DIVIDER, PED_CROSSING, MapInstance
from .mapstore import GlobalMap
from .polygon import ensure_ccw, polygon_area

SCENE_FORMAT_VERSION = "1"

STRAIGHT = "straight"
ARC = "arc"
S_CURVE = "s_curve"
CURVATURES = (STRAIGHT, ARC, S_CURVE)

N_POINTS = 20  # detector-shaped output: points per polyline instance


@dataclass(frozen=True)
class NoiseConfig:
    jitter_sigma: float = 0.0
    dropout_prob: float = 0.0
    fp_rate: float = 0.0
    split_prob: float = 0.0
    embedding_sigma: float = 0.05
    embed_dim: int = 16
    score_tp_mean: float = 0.8
    score_tp_std: float = 0.1
    score_fp_mean: float = 0.4
    score_fp_std: float = 0.15

    def __post_init__(self):
        for name in ("dropout_prob", "fp_rate", "split_prob"):
            if not 0.0 <= getattr(self, name):
                raise ValueError(f"{name} must be >= 0")
        for name in ("dropout_prob", "split_prob"):
            if getattr(self, name) > 1.0:
                raise ValueError(f"{name} must be <= 1")
        if self.jitter_sigma < 0 or self.embedding_sigma < 0:
            raise ValueError("sigmas must be >= 0")

    @classmethod
    def zero(cls) -> "NoiseConfig":
        """Fully deterministic detections: no jitter, constant scores."""
        return cls(embedding_sigma=0.0, score_tp_std=0.0, score_fp_std=0.0)


@dataclass(frozen=True)
class SceneConfig:
    road_length: float = 150.0
    lane_count: int = 2
    lane_width: float = 3.5
    curvature: str = STRAIGHT
    radius: float = 120.0
    crossing_count: int = 1
    frame_count: int = 20
    frame_spacing: float = 3.0
    range_lw: tuple[float, float] = (100.0, 50.0)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    seed: int = 0

    def __post_init__(self):
        if self.road_length <= 0 or self.lane_width <= 0 or self.frame_spacing <= 0:
            raise ValueError("scene dimensions must be positive")
        if self.lane_count < 1 or self.frame_count < 1 or self.crossing_count < 0:
            raise ValueError("scene counts out of range")
        if self.curvature not in CURVATURES:
            raise ValueError(f"unknown curvature {self.curvature!r}")
        if min(self.range_lw) <= 0:
            raise ValueError("perception range must be positive")


@dataclass
class Frame:
    t: int
    ego_pose: Pose2
    gt_local: list[MapInstance]
    detections: list[MapInstance]


@dataclass
class Scene:
    scene_id: str
    range_lw: tuple[float, float]
    gt: GlobalMap
    frames: list[Frame]


def _centerline(config: SceneConfig, step: float = 0.5):
    """Dense centerline samples: positions (K, 2), headings (K,), arclen (K,)."""
    L = config.road_length
    n = int(round(L / step)) + 1
    s = np.linspace(0.0, L, n)
    if config.curvature == STRAIGHT:
        x = s
        y = np.zeros_like(s)
        th = np.zeros_like(s)
    elif config.curvature == ARC:
        R = config.radius
        phi = s / R
        x = R * np.sin(phi)
        y = R * (1.0 - np.cos(phi))
        th = phi
    else:  # s_curve: left arc then right arc of the same radius
        R = config.radius
        half = L / 2.0
        x = np.empty_like(s)
        y = np.empty_like(s)
        th = np.empty_like(s)
        first = s <= half
        phi = s[first] / R
        x[first] = R * np.sin(phi)
        y[first] = R * (1.0 - np.cos(phi))
        th[first] = phi
        phi1 = half / R
        x1, y1 = R * math.sin(phi1), R * (1.0 - math.cos(phi1))
        psi = (s[~first] - half) / R
        lx = R * np.sin(psi)
        ly = -R * (1.0 - np.cos(psi))
        c, sn = math.cos(phi1), math.sin(phi1)
        x[~first] = x1 + c * lx - sn * ly
        y[~first] = y1 + sn * lx + c * ly
        th[~first] = phi1 - psi
    return np.column_stack([x, y]), th, s


def _offset_polyline(center: np.ndarray, headings: np.ndarray, d: float) -> np.ndarray:
    normals = np.column_stack([-np.sin(headings), np.cos(headings)])
    pts = center + d * normals
    n = max(2, int(round(polyline_length(pts))) + 1)
    return resample_even(pts, n)


def generate_scene(config: SceneConfig) -> tuple[GlobalMap, list[Pose2]]:
    """Ground-truth map plus the ego trajectory along the centerline."""
    half_road = config.lane_count * config.lane_width / 2.0
    if config.curvature != STRAIGHT:
        if config.radius <= 0:
            raise InfeasibleScene("curved roads need a positive radius")
        if half_road >= config.radius:
            raise InfeasibleScene(
                f"road half-width {half_road} m exceeds curvature radius {config.radius} m"
            )
    center, headings, s = _centerline(config)

    gmap = GlobalMap(scene_id=f"scene-{config.curvature}-{config.seed}")
    next_id = 0

    def add(cls: str, pts: np.ndarray):
        nonlocal next_id
        gmap.instances[next_id] = MapInstance(cls, pts, id=next_id)
        gmap.last_update[next_id] = 0
        next_id += 1

    add(BOUNDARY, _offset_polyline(center, headings, +half_road))
    add(BOUNDARY, _offset_polyline(center, headings, -half_road))
    for k in range(1, config.lane_count):
        add(DIVIDER, _offset_polyline(center, headings, -half_road + k * config.lane_width))

    half_len = 2.0  # crossing half-extent along the road
    for i in range(config.crossing_count):
        sc = config.road_length * (i + 1) / (config.crossing_count + 1)
        s0, s1 = sc - half_len, sc + half_len
        quad = []
        for si, side in ((s0, -1.0), (s1, -1.0), (s1, 1.0), (s0, 1.0)):
            cx = np.interp(si, s, center[:, 0])
            cy = np.interp(si, s, center[:, 1])
            th = np.interp(si, s, headings)
            quad.append([cx - side * half_road * math.sin(th),
                         cy + side * half_road * math.cos(th)])
        add(PED_CROSSING, ensure_ccw(np.asarray(quad)))

    poses = []
    for j in range(config.frame_count):
        sj = min(j * config.frame_spacing, config.road_length)
        poses.append(
            Pose2(
                np.interp(sj, s, center[:, 0]),
                np.interp(sj, s, center[:, 1]),
                np.interp(sj, s, headings),
            )
        )
    return gmap, poses


def clip_gt_frame(gt: GlobalMap, pose: Pose2, range_lw, n_points: int = N_POINTS) -> list[MapInstance]:
    """Ground truth visible from `pose`: clipped, ego frame, IDs kept.

    Polylines keep their longest clipped piece (resampled to `n_points`);
    fragments shorter than 0.5 m and slivers of crossings are dropped.
    """
    rect = Rect(pose, range_lw[0] / 2.0, range_lw[1] / 2.0)
    out: list[MapInstance] = []
    for inst_id in sorted(gt.instances):
        inst = gt.instances[inst_id]
        if inst.is_polyline:
            pieces = clip_polyline_to_rect(inst.points, rect, min_length=0.5)
            if not pieces:
                continue
            longest = max(pieces, key=polyline_length)
            pts = resample_even(longest, n_points)
        else:
            pieces = clip_polygon_to_rect(inst.points, rect)
            if not pieces or abs(polygon_area(pieces[0])) < 0.25:
                continue
            pts = pieces[0]
        local = transform_points(pose, pts, WORLD_TO_EGO)
        out.append(MapInstance(inst.cls, local, id=inst.id))
    return out


def _embedding_base(embed_seed: int, inst_id: int, dim: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence([embed_seed, 9176, inst_id]))
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def _unit(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def _score(rng, mean, std):
    val = rng.normal(mean, std) if std > 0 else mean
    return float(np.clip(val, 0.05, 1.0))


def corrupt_frame(gt_frame, noise: NoiseConfig, seed, range_lw=(100.0, 50.0),
                  embed_seed: int = 0) -> list[MapInstance]:
    """Noisy detections for one frame: jitter, dropout, splits, false
    positives; embeddings are per-ID base vectors plus Gaussian noise."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    dets: list[MapInstance] = []
    for inst in gt_frame:
        if noise.dropout_prob > 0 and rng.random() < noise.dropout_prob:
            continue
        pts = inst.points.copy()
        fragments = [pts]
        if (
            inst.is_polyline
            and noise.split_prob > 0
            and len(pts) >= 8
            and rng.random() < noise.split_prob
        ):
            cut = int(rng.integers(len(pts) * 2 // 5, len(pts) * 3 // 5 + 1))
            fragments = [
                resample_even(pts[: cut + 1], len(pts)),
                resample_even(pts[cut:], len(pts)),
            ]
        for frag in fragments:
            frag = frag.copy()
            if noise.jitter_sigma > 0:
                frag += rng.normal(0.0, noise.jitter_sigma, frag.shape)
            base = _embedding_base(embed_seed, inst.id, noise.embed_dim)
            if noise.embedding_sigma > 0:
                emb = base + rng.normal(0.0, noise.embedding_sigma, noise.embed_dim)
                emb /= np.linalg.norm(emb)
            else:
                emb = base
            dets.append(
                MapInstance(
                    inst.cls,
                    frag,
                    score=_score(rng, noise.score_tp_mean, noise.score_tp_std),
                    embedding=emb,
                )
            )
    n_fp = int(rng.poisson(noise.fp_rate)) if noise.fp_rate > 0 else 0
    hl, hw = range_lw[0] / 2.0, range_lw[1] / 2.0
    for _ in range(n_fp):
        cls = CLASSES[int(rng.integers(0, 3))]
        cx = rng.uniform(-hl, hl)
        cy = rng.uniform(-hw, hw)
        ang = rng.uniform(0, math.tau)
        c, s = math.cos(ang), math.sin(ang)
        if cls == PED_CROSSING:
            a, b = rng.uniform(1.5, 3.0), rng.uniform(2.0, 5.0)
            quad = np.array([[-a, -b], [a, -b], [a, b], [-a, b]], dtype=float)
            pts = quad @ np.array([[c, s], [-s, c]]) + [cx, cy]
            pts = ensure_ccw(pts)
        else:
            length = rng.uniform(5.0, 15.0)
            ts = np.linspace(-length / 2, length / 2, N_POINTS)
            pts = np.column_stack([cx + c * ts, cy + s * ts])
        dets.append(
            MapInstance(
                cls,
                pts,
                score=_score(rng, noise.score_fp_mean, noise.score_fp_std),
                embedding=_unit(rng, noise.embed_dim),
            )
        )
    return dets


def make_scene(config: SceneConfig) -> Scene:
    """Full scene: ground truth plus per-frame clipped GT and detections."""
    gt, poses = generate_scene(config)
    frames = []
    for t, pose in enumerate(poses):
        local = clip_gt_frame(gt, pose, config.range_lw)
        dets = corrupt_frame(
            local,
            config.noise,
            [config.seed, 104729, t],
            config.range_lw,
            embed_seed=config.seed,
        )
        frames.append(Frame(t, pose, local, dets))
    return Scene(gt.scene_id, config.range_lw, gt, frames)


# ---------------------------------------------------------------------------
# scene file io

def _inst_json(inst: MapInstance, with_id: bool, with_det: bool) -> dict:
    obj: dict = {}
    if with_id:
        obj["id"] = inst.id
    obj["class"] = inst.cls
    if with_det:
        obj["score"] = float(inst.score)
    obj["points"] = [[float(x), float(y)] for x, y in inst.points]
    if with_det and inst.embedding is not None:
        obj["embedding"] = [float(v) for v in inst.embedding]
    return obj


def _inst_parse(obj: dict, where: str, need_id: bool) -> MapInstance:
    if "class" not in obj or "points" not in obj:
        raise SceneFormatError(f"{where}: instance needs 'class' and 'points'")
    if obj["class"] not in CLASSES:
        raise SceneFormatError(f"{where}: unknown class {obj['class']!r}")
    if need_id and "id" not in obj:
        raise SceneFormatError(f"{where}: missing 'id'")
    emb = obj.get("embedding")
    return MapInstance(
        obj["class"],
        np.asarray(obj["points"], dtype=np.float64),
        score=float(obj.get("score", 1.0)),
        id=int(obj["id"]) if "id" in obj else None,
        embedding=np.asarray(emb, dtype=np.float64) if emb is not None else None,
    )


def write_scene(scene: Scene, path) -> None:
    doc = {
        "format_version": SCENE_FORMAT_VERSION,
        "scene_id": scene.scene_id,
        "range": [float(scene.range_lw[0]), float(scene.range_lw[1])],
        "gt": {
            "instances": [
                _inst_json(scene.gt.instances[k], True, False) for k in sorted(scene.gt.instances)
            ]
        },
        "frames": [
            {
                "t": f.t,
                "ego_pose": {"x": f.ego_pose.x, "y": f.ego_pose.y, "theta": f.ego_pose.theta},
                "gt_local": [_inst_json(i, True, False) for i in f.gt_local],
                "detections": [_inst_json(d, False, True) for d in f.detections],
            }
            for f in scene.frames
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def read_scene(path) -> Scene:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SceneFormatError(f"{path}: not valid JSON: {exc}") from exc
    version = doc.get("format_version")
    if version is None:
        raise SceneFormatError(f"{path}: missing field 'format_version'")
    if version != SCENE_FORMAT_VERSION:
        raise UnsupportedVersion(f"{path}: scene format_version {version!r} not supported")
    for key in ("scene_id", "range", "gt", "frames"):
        if key not in doc:
            raise SceneFormatError(f"{path}: missing field {key!r}")
    gt = GlobalMap(scene_id=str(doc["scene_id"]))
    for i, obj in enumerate(doc["gt"].get("instances", [])):
        inst = _inst_parse(obj, f"{path}: gt.instances[{i}]", need_id=True)
        gt.instances[inst.id] = inst
        gt.last_update[inst.id] = 0
    frames = []
    for fi, fobj in enumerate(doc["frames"]):
        where = f"{path}: frames[{fi}]"
        if "t" not in fobj:
            raise SceneFormatError(f"{where}: missing 't'")
        if "ego_pose" not in fobj:
            raise SceneFormatError(f"{where}: missing 'ego_pose'")
        ep = fobj["ego_pose"]
        for key in ("x", "y", "theta"):
            if key not in ep:
                raise SceneFormatError(f"{where}: ego_pose missing {key!r}")
        pose = Pose2(float(ep["x"]), float(ep["y"]), float(ep["theta"]))
        gt_local = [
            _inst_parse(o, f"{where}.gt_local[{k}]", need_id=True)
            for k, o in enumerate(fobj.get("gt_local", []))
        ]
        dets = [
            _inst_parse(o, f"{where}.detections[{k}]", need_id=False)
            for k, o in enumerate(fobj.get("detections", []))
        ]
        frames.append(Frame(int(fobj["t"]), pose, gt_local, dets))
    rng = doc["range"]
    return Scene(str(doc["scene_id"]), (float(rng[0]), float(rng[1])), gt, frames)
