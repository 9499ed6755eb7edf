"""Temporal association of per-frame detections against a track buffer.

Per frame: build detection/track affinities from a geometric branch
(exp(-chamfer/tau), class gated) and a feature branch (shifted cosine of
embeddings), fuse them as a convex combination, drop pairs at or below the
threshold theta, solve the optimal one-to-one matching, inherit or issue
IDs, and update the buffer (unmatched tracks age out after max_age missed
frames).
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DuplicateId, MissingEmbedding, ShapeMismatch
from .geometry import EGO_TO_WORLD, WORLD_TO_EGO, Pose2, chamfer_distance, densify, resample_even
from .instance import MapInstance


@dataclass
class Track:
    instance: MapInstance  # world frame, id set
    last_seen: int
    age_missed: int = 0


@dataclass
class TrackBuffer:
    tracks: list[Track] = field(default_factory=list)
    next_id: int = 0


@dataclass(frozen=True)
class AssocConfig:
    tau: float = 2.0
    theta: float = 0.5
    w_geo: float = 0.7
    w_feat: float = 0.3
    max_age: int = 0
    geo_metric: str = "chamfer"  # or "ordered_l2"
    geo_densify: float = 1.0  # meters; 0 compares the raw point sets

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if not 0.0 <= self.theta < 1.0:
            raise ValueError("theta must lie in [0, 1)")
        if self.w_geo < 0 or self.w_feat < 0 or abs(self.w_geo + self.w_feat - 1.0) > 1e-9:
            raise ValueError("w_geo and w_feat must be non-negative and sum to 1")


def _dense_pts(inst: MapInstance, spacing: float) -> np.ndarray:
    # detector output is sparse (tens of points over ~100 m); comparing
    # densified curves keeps the distance about shape, not sample phase
    if spacing <= 0 or len(inst.points) < 2:
        return inst.points
    pts = inst.points
    if not inst.is_polyline:
        pts = np.vstack([pts, pts[:1]])
    return densify(pts, spacing)


def instance_chamfer(a: MapInstance, b: MapInstance, spacing: float = 1.0) -> float:
    """Chamfer distance between two instances' densified curves."""
    return chamfer_distance(_dense_pts(a, spacing), _dense_pts(b, spacing))


def _geo_dist(a: MapInstance, b: MapInstance, metric: str, spacing: float) -> float:
    if metric == "ordered_l2":
        p, q = a.points, b.points
        n = min(len(p), len(q))
        if len(p) != len(q):
            p = resample_even(p, n) if len(p) != n else p
            q = resample_even(q, n) if len(q) != n else q
        return float(np.linalg.norm(p - q, axis=1).mean())
    return instance_chamfer(a, b, spacing)


def geometric_affinity(dets, tracks, tau: float, metric: str = "chamfer",
                       densify_spacing: float = 1.0) -> np.ndarray:
    """exp(-distance/tau) for same-class pairs, 0 across classes."""
    h = np.zeros((len(dets), len(tracks)))
    for i, d in enumerate(dets):
        for j, t in enumerate(tracks):
            if d.cls == t.cls:
                h[i, j] = np.exp(-_geo_dist(d, t, metric, densify_spacing) / tau)
    return h


def feature_affinity(dets, tracks) -> np.ndarray:
    """(1 + cos(e_d, e_t)) / 2 over unit-norm embeddings."""
    for inst in list(dets) + list(tracks):
        if inst.embedding is None:
            raise MissingEmbedding("feature_affinity requires embeddings on every instance")
    h = np.zeros((len(dets), len(tracks)))
    for i, d in enumerate(dets):
        ed = d.embedding / np.linalg.norm(d.embedding)
        for j, t in enumerate(tracks):
            et = t.embedding / np.linalg.norm(t.embedding)
            h[i, j] = 0.5 * (1.0 + float(ed @ et))
    return np.clip(h, 0.0, 1.0)


def fuse_affinity(geo: np.ndarray, feat: np.ndarray, w_geo: float, w_feat: float) -> np.ndarray:
    if geo.shape != feat.shape:
        raise ShapeMismatch(f"affinity shapes differ: {geo.shape} vs {feat.shape}")
    return w_geo * geo + w_feat * feat


def threshold_filter(h: np.ndarray, theta: float) -> np.ndarray:
    """Eligibility mask: strictly above theta."""
    return h > theta


def optimal_match(h: np.ndarray, eligible: np.ndarray | None = None) -> list[tuple[int, int]]:
    """One-to-one matching over eligible pairs maximizing the total score.

    Ineligible pairs contribute nothing and are never returned; rows and
    columns may stay unmatched. The total equals the brute-force optimum
    because ineligible entries enter the rectangular assignment with zero
    score and are filtered from the solution.
    """
    if h.size == 0:
        return []
    if eligible is None:
        eligible = h > 0
    scores = np.where(eligible, h, 0.0)
    rows, cols = linear_sum_assignment(scores, maximize=True)
    return [(int(i), int(j)) for i, j in zip(rows, cols) if eligible[i, j]]


def allocate_ids(dets, matching, buffer: TrackBuffer) -> tuple[list[MapInstance], int]:
    """Matched detections inherit track IDs; the rest get fresh ones."""
    track_ids = [t.instance.id for t in buffer.tracks]
    by_det = {i: track_ids[j] for i, j in matching}
    next_id = buffer.next_id
    out = []
    for i, det in enumerate(dets):
        if i in by_det:
            out.append(replace(det, id=by_det[i]))
        else:
            out.append(replace(det, id=next_id))
            next_id += 1
    return out, next_id


def update_buffer(buffer: TrackBuffer, dets_with_ids, frame: int, max_age: int,
                  next_id: int | None = None) -> TrackBuffer:
    """Refresh matched tracks, age and prune unmatched ones, append new."""
    ids = [d.id for d in dets_with_ids]
    if len(ids) != len(set(ids)):
        raise DuplicateId("detections carry duplicate IDs")
    by_id = {d.id: d for d in dets_with_ids}
    tracks: list[Track] = []
    seen = set()
    for tr in buffer.tracks:
        det = by_id.get(tr.instance.id)
        if det is not None:
            tracks.append(Track(det, last_seen=frame, age_missed=0))
            seen.add(det.id)
        else:
            aged = Track(tr.instance, tr.last_seen, tr.age_missed + 1)
            if aged.age_missed <= max_age:
                tracks.append(aged)
    for det in dets_with_ids:
        if det.id not in seen and det.id not in {t.instance.id for t in tracks}:
            tracks.append(Track(det, last_seen=frame, age_missed=0))
    if next_id is None:
        next_id = max([buffer.next_id] + [d.id + 1 for d in dets_with_ids])
    return TrackBuffer(tracks, next_id)


@dataclass
class AssociationResult:
    dets: list[MapInstance]  # world frame, ids set
    buffer: TrackBuffer
    matches: list[tuple[int, int, float]]  # (det index, track id, affinity)
    new_ids: list[int]


def associate_frame(buffer: TrackBuffer, dets, pose: Pose2, config: AssocConfig,
                    frame: int) -> AssociationResult:
    """Assign IDs to one frame of ego-frame detections and update the buffer."""
    track_insts = [t.instance.transformed(pose, WORLD_TO_EGO) for t in buffer.tracks]
    geo = geometric_affinity(dets, track_insts, config.tau, config.geo_metric, config.geo_densify)
    have_emb = all(d.embedding is not None for d in dets) and all(
        t.embedding is not None for t in track_insts
    )
    if have_emb and config.w_feat > 0:
        fused = fuse_affinity(geo, feature_affinity(dets, track_insts), config.w_geo, config.w_feat)
    else:
        fused = geo
    same_class = np.array(
        [[d.cls == t.cls for t in track_insts] for d in dets], dtype=bool
    ).reshape(fused.shape)
    fused = np.where(same_class, fused, 0.0)
    eligible = threshold_filter(fused, config.theta)
    matching = optimal_match(fused, eligible)
    dets_ids, next_id = allocate_ids(dets, matching, buffer)
    world_dets = [d.transformed(pose, EGO_TO_WORLD) for d in dets_ids]
    new_buffer = update_buffer(buffer, world_dets, frame, config.max_age, next_id)
    track_ids = [t.instance.id for t in buffer.tracks]
    matches = [(i, track_ids[j], float(fused[i, j])) for i, j in matching]
    matched_det_idx = {i for i, _ in matching}
    new_ids = [d.id for k, d in enumerate(dets_ids) if k not in matched_det_idx]
    return AssociationResult(world_dets, new_buffer, matches, new_ids)


def post_track_baseline(frames, poses, dist_threshold: float = 2.0) -> list[list[MapInstance]]:
    """Greedy class-and-distance tracker over consecutive frames.

    Matches each frame's detections to the previous frame's outputs by
    ascending Chamfer distance within the gate; leftovers get fresh IDs.
    Doubles as the ground-truth ID labeler on noiseless clips.
    """
    out: list[list[MapInstance]] = []
    prev: list[MapInstance] = []
    next_id = 0
    for frame, pose in zip(frames, poses):
        world = [d.transformed(pose, EGO_TO_WORLD) for d in frame]
        pairs = []
        for i, d in enumerate(world):
            for j, p in enumerate(prev):
                if d.cls == p.cls:
                    dist = instance_chamfer(d, p)
                    if dist < dist_threshold:
                        pairs.append((dist, i, j))
        pairs.sort(key=lambda t: (t[0], t[1], t[2]))
        used_i: set[int] = set()
        used_j: set[int] = set()
        ids: dict[int, int] = {}
        for dist, i, j in pairs:
            if i in used_i or j in used_j:
                continue
            used_i.add(i)
            used_j.add(j)
            ids[i] = prev[j].id
        labeled = []
        for i, d in enumerate(world):
            if i in ids:
                labeled.append(replace(d, id=ids[i]))
            else:
                labeled.append(replace(d, id=next_id))
                next_id += 1
        out.append(labeled)
        prev = labeled
    return out
