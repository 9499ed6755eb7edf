import math
from functools import lru_cache

import numpy as np
import pytest

from icmap.association import (
    AssocConfig,
    Track,
    TrackBuffer,
    allocate_ids,
    associate_frame,
    feature_affinity,
    fuse_affinity,
    geometric_affinity,
    optimal_match,
    post_track_baseline,
    threshold_filter,
    update_buffer,
)
from icmap.errors import DuplicateId, MissingEmbedding, ShapeMismatch
from icmap.geometry import Pose2, transform_points
from icmap.instance import MapInstance
from icmap.synth import NoiseConfig, SceneConfig, make_scene


def line_instance(y=0.0, cls="divider", x0=0.0, x1=20.0, n=20, emb=None, id=None):
    xs = np.linspace(x0, x1, n)
    return MapInstance(cls, np.column_stack([xs, np.full(n, y)]), embedding=emb, id=id)


def unit(vals):
    v = np.asarray(vals, float)
    return v / np.linalg.norm(v)


def brute_force_best(scores, eligible):
    """Exhaustive optimum over all partial one-to-one assignments."""
    n, m = scores.shape

    @lru_cache(maxsize=None)
    def rec(i, mask):
        if i == n:
            return 0.0
        best = rec(i + 1, mask)
        for j in range(m):
            if eligible[i, j] and not (mask >> j) & 1:
                best = max(best, scores[i, j] + rec(i + 1, mask | (1 << j)))
        return best

    return rec(0, 0)


class TestGeometricAffinity:
    def test_identical_sets(self):
        d = [line_instance()]
        t = [line_instance()]
        assert geometric_affinity(d, t, tau=2.0)[0, 0] == pytest.approx(1.0)

    def test_class_gate(self):
        d = [line_instance(cls="divider")]
        t = [line_instance(cls="boundary")]
        assert geometric_affinity(d, t, tau=2.0)[0, 0] == 0.0

    def test_value_at_tau(self):
        # parallel lines offset by exactly tau: chamfer = tau -> e^-1
        tau = 2.0
        d = [line_instance(y=0.0)]
        t = [line_instance(y=tau)]
        h = geometric_affinity(d, t, tau=tau)
        assert h[0, 0] == pytest.approx(math.exp(-1), abs=1e-9)

    def test_rigid_invariance(self):
        rng = np.random.default_rng(0)
        d = [line_instance(y=0.3), line_instance(y=4.0, cls="boundary")]
        t = [line_instance(y=0.0), line_instance(y=3.5, cls="boundary")]
        base = geometric_affinity(d, t, tau=2.0)
        pose = Pose2(5.0, -2.0, 1.1)
        dm = [i.with_points(transform_points(pose, i.points)) for i in d]
        tm = [i.with_points(transform_points(pose, i.points)) for i in t]
        moved = geometric_affinity(dm, tm, tau=2.0)
        assert np.abs(moved - base).max() < 1e-9

    def test_ordered_l2_option(self):
        d = [line_instance(y=1.0)]
        t = [line_instance(y=0.0)]
        h = geometric_affinity(d, t, tau=2.0, metric="ordered_l2")
        assert h[0, 0] == pytest.approx(math.exp(-0.5))


class TestFeatureAffinity:
    def test_equal(self):
        e = unit([1, 2, 3, 4])
        h = feature_affinity([line_instance(emb=e)], [line_instance(emb=e)])
        assert h[0, 0] == pytest.approx(1.0)

    def test_opposite(self):
        e = unit([1, 0, 0, 0])
        h = feature_affinity([line_instance(emb=e)], [line_instance(emb=-e)])
        assert h[0, 0] == pytest.approx(0.0)

    def test_orthogonal(self):
        h = feature_affinity(
            [line_instance(emb=unit([1, 0]))], [line_instance(emb=unit([0, 1]))]
        )
        assert h[0, 0] == pytest.approx(0.5)

    def test_missing_raises(self):
        with pytest.raises(MissingEmbedding):
            feature_affinity([line_instance()], [line_instance(emb=unit([1, 0]))])


class TestFuse:
    def test_degenerate_weight(self):
        geo = np.array([[0.4, 0.9]])
        feat = np.array([[0.1, 0.1]])
        assert np.allclose(fuse_affinity(geo, feat, 1.0, 0.0), geo)

    def test_arithmetic(self):
        out = fuse_affinity(np.array([[0.8]]), np.array([[0.4]]), 0.5, 0.5)
        assert out[0, 0] == pytest.approx(0.6)

    def test_idempotent_geo_only(self):
        geo = np.array([[0.3, 0.7], [0.2, 0.9]])
        assert np.allclose(fuse_affinity(geo, geo, 0.7, 0.3), geo)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            fuse_affinity(np.zeros((2, 2)), np.zeros((2, 3)), 0.5, 0.5)


class TestThresholdAndMatch:
    def test_theta_zero_keeps_positive(self):
        h = np.array([[0.9, 0.0], [0.3, 0.2]])
        assert threshold_filter(h, 0.0).sum() == 3

    def test_all_below(self):
        h = np.full((3, 2), 0.2)
        elig = threshold_filter(h, 0.5)
        assert not elig.any()
        assert optimal_match(h, elig) == []

    def test_two_by_two(self):
        h = np.array([[0.9, 0.2], [0.3, 0.8]])
        elig = threshold_filter(h, 0.5)
        assert {(0, 0), (1, 1)} == {(i, j) for i, j in zip(*np.nonzero(elig))}

    def test_dominant_diagonal(self):
        h = np.array([[0.9, 0.2], [0.3, 0.8]])
        match = optimal_match(h, threshold_filter(h, 0.0))
        assert set(match) == {(0, 0), (1, 1)}
        assert sum(h[i, j] for i, j in match) == pytest.approx(1.7)

    def test_empty(self):
        assert optimal_match(np.zeros((0, 0))) == []

    def test_against_brute_force(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            n, m = rng.integers(1, 7, 2)
            h = np.round(rng.random((n, m)), 6)
            elig = threshold_filter(h, float(rng.random() * 0.7))
            match = optimal_match(h, elig)
            total = sum(h[i, j] for i, j in match)
            assert total == pytest.approx(brute_force_best(h, elig), abs=1e-12)

    def test_monotone_theta(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            h = rng.random((5, 5))
            sizes = []
            for theta in (0.0, 0.3, 0.6, 0.9):
                sizes.append(len(optimal_match(h, threshold_filter(h, theta))))
            assert all(a >= b for a, b in zip(sizes, sizes[1:]))


class TestIdsAndBuffer:
    def make_buffer(self, ids, frame=0):
        tracks = [Track(line_instance(y=float(i), id=i), last_seen=frame) for i in ids]
        return TrackBuffer(tracks, next_id=max(ids) + 1 if ids else 0)

    def test_all_matched_no_new(self):
        buf = self.make_buffer([0, 1])
        dets = [line_instance(y=0.0), line_instance(y=1.0)]
        out, next_id = allocate_ids(dets, [(0, 0), (1, 1)], buf)
        assert [d.id for d in out] == [0, 1]
        assert next_id == buf.next_id

    def test_empty_buffer_fresh_ids(self):
        buf = TrackBuffer(next_id=5)
        out, next_id = allocate_ids([line_instance()] * 3, [], buf)
        assert [d.id for d in out] == [5, 6, 7]
        assert next_id == 8

    def test_partial(self):
        buf = self.make_buffer([0, 1])
        dets = [line_instance()] * 3
        out, next_id = allocate_ids(dets, [(0, 1), (2, 0)], buf)
        assert [d.id for d in out] == [1, 2, 0]
        assert next_id == 3

    def test_unmatched_removed_at_zero_age(self):
        buf = self.make_buffer([0, 1])
        det = line_instance(y=0.0, id=0)
        out = update_buffer(buf, [det], frame=1, max_age=0)
        assert [t.instance.id for t in out.tracks] == [0]

    def test_all_matched_size_stable(self):
        buf = self.make_buffer([0, 1, 2])
        dets = [line_instance(y=float(i), id=i) for i in range(3)]
        out = update_buffer(buf, dets, frame=1, max_age=0)
        assert len(out.tracks) == 3

    def test_missed_twice_then_rematched(self):
        buf = self.make_buffer([7])
        buf = update_buffer(buf, [], frame=1, max_age=2)
        assert buf.tracks[0].age_missed == 1
        buf = update_buffer(buf, [], frame=2, max_age=2)
        assert buf.tracks[0].age_missed == 2
        det = line_instance(y=0.0, id=7)
        buf = update_buffer(buf, [det], frame=3, max_age=2)
        assert [t.instance.id for t in buf.tracks] == [7]
        assert buf.tracks[0].age_missed == 0

    def test_aged_out(self):
        buf = self.make_buffer([7])
        buf = update_buffer(buf, [], frame=1, max_age=1)
        buf = update_buffer(buf, [], frame=2, max_age=1)
        assert buf.tracks == []

    def test_duplicate_ids_rejected(self):
        buf = self.make_buffer([0])
        dets = [line_instance(id=3), line_instance(id=3)]
        with pytest.raises(DuplicateId):
            update_buffer(buf, dets, frame=1, max_age=0)


class TestAssociateFrame:
    def test_empty_frame_ages_buffer(self):
        tracks = [Track(line_instance(y=0.0, id=0), last_seen=0)]
        buf = TrackBuffer(tracks, next_id=1)
        res = associate_frame(buf, [], Pose2(0, 0, 0), AssocConfig(max_age=0), frame=1)
        assert res.dets == []
        assert res.buffer.tracks == []

    def test_static_scene_stable_ids(self):
        cfg = AssocConfig()
        dets = [line_instance(y=0.0), line_instance(y=3.5, cls="boundary")]
        buf = TrackBuffer()
        res1 = associate_frame(buf, dets, Pose2(0, 0, 0), cfg, frame=0)
        ids1 = [d.id for d in res1.dets]
        res2 = associate_frame(res1.buffer, dets, Pose2(0, 0, 0), cfg, frame=1)
        ids2 = [d.id for d in res2.dets]
        assert ids1 == ids2
        assert res2.new_ids == []

    def test_id_conservation(self):
        rng = np.random.default_rng(3)
        cfg = AssocConfig()
        buf = TrackBuffer()
        issued = set()
        unmatched_total = 0
        for frame in range(8):
            dets = [
                line_instance(y=float(k) * 4, x0=frame * 2.0, x1=frame * 2.0 + 20)
                for k in range(rng.integers(1, 4))
            ]
            res = associate_frame(buf, dets, Pose2(0, 0, 0), cfg, frame=frame)
            unmatched_total += len(res.new_ids)
            for d in res.dets:
                issued.add(d.id)
            buf = res.buffer
        assert buf.next_id == unmatched_total  # started at 0
        assert len(res.new_ids) == 0 or max(issued) < buf.next_id

    def test_jittered_drive_no_switches(self):
        # straight drive, sigma = 0.1 m jitter, known GT ids
        cfg = AssocConfig()
        rng = np.random.default_rng(4)
        buf = TrackBuffer()
        history = []
        for frame in range(10):
            pose = Pose2(frame * 3.0, 0.0, 0.0)
            dets = []
            for k, y in enumerate((-3.5, 0.0, 3.5)):
                xs = np.linspace(-20, 20, 20)
                pts = np.column_stack([xs, np.full(20, y)]) + rng.normal(0, 0.1, (20, 2))
                dets.append(MapInstance("divider" if k == 1 else "boundary", pts))
            res = associate_frame(buf, dets, pose, cfg, frame=frame)
            buf = res.buffer
            history.append([d.id for d in res.dets])
        first = history[0]
        assert all(ids == first for ids in history)

    def test_cross_class_never_matches(self):
        cfg = AssocConfig(theta=0.0)
        buf = TrackBuffer([Track(line_instance(cls="boundary", id=0), 0)], next_id=1)
        res = associate_frame(buf, [line_instance(cls="divider")], Pose2(0, 0, 0), cfg, 1)
        assert res.matches == []
        assert res.dets[0].id == 1


class TestPostTrack:
    def test_identical_frames_stable(self):
        frames = [[line_instance()], [line_instance()], [line_instance()]]
        poses = [Pose2(0, 0, 0)] * 3
        out = post_track_baseline(frames, poses)
        assert [d.id for fr in out for d in fr] == [0, 0, 0]

    def test_gap_creates_new_id(self):
        frames = [[line_instance()], [], [line_instance()]]
        poses = [Pose2(0, 0, 0)] * 3
        out = post_track_baseline(frames, poses)
        assert out[0][0].id == 0
        assert out[2][0].id == 1

    def test_recovers_generator_ids(self):
        scene = make_scene(
            SceneConfig(road_length=100.0, curvature="arc", radius=120.0,
                        noise=NoiseConfig.zero(), seed=2)
        )
        frames = [f.gt_local for f in scene.frames]
        poses = [f.ego_pose for f in scene.frames]
        out = post_track_baseline(frames, poses)
        mapping = {}
        for labeled, frame in zip(out, scene.frames):
            for det, gt in zip(labeled, frame.gt_local):
                mapping.setdefault(det.id, set()).add(gt.id)
        # bijection: every recovered id maps to exactly one generator id
        assert all(len(v) == 1 for v in mapping.values())
        gt_ids = [next(iter(v)) for v in mapping.values()]
        assert len(gt_ids) == len(set(gt_ids))
