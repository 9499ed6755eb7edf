"""Boolean union of simple polygons, plus a grid rasterization oracle.

The union walks the arrangement of the two boundaries: edges are split at
every crossing (and at T-junction touch points), fragments strictly inside
the other polygon are dropped, and the survivors are stitched back into the
outer boundary. Epsilon-based predicates are used throughout; inputs are
small, roughly convex rings, and the rasterization oracle cross-checks the
result in the test suite.
"""
from __future__ import annotations

import logging

import numpy as np

from ._kernels import inside_mask
from .errors import NonSimplePolygon
from .geometry import as_points, dedupe_points

log = logging.getLogger(__name__)

EPS = 1e-9


class Disjoint:
    """Marker returned by polygon_union when the inputs do not touch."""

    def __repr__(self):  # pragma: no cover
        return "Disjoint"


DISJOINT = Disjoint()


def _cross2(a, b) -> float:
    return float(a[0] * b[1] - a[1] * b[0])


def polygon_area(ring) -> float:
    """Shoelace area; positive for CCW rings."""
    r = as_points(ring)
    nxt = np.roll(r, -1, axis=0)
    return 0.5 * float((r[:, 0] * nxt[:, 1] - r[:, 1] * nxt[:, 0]).sum())


def ensure_ccw(ring) -> np.ndarray:
    r = as_points(ring)
    if polygon_area(r) < 0:
        r = r[::-1]
    return r


def _segments_properly_intersect(p1, p2, q1, q2) -> bool:
    d1 = p2 - p1
    d2 = q2 - q1
    den = _cross2(d1, d2)
    if abs(den) < 1e-14:
        return False
    t = _cross2(q1 - p1, d2) / den
    u = _cross2(q1 - p1, d1) / den
    return 1e-9 < t < 1 - 1e-9 and 1e-9 < u < 1 - 1e-9


def is_simple(ring) -> bool:
    """True when no two non-adjacent edges intersect and no vertex repeats."""
    r = dedupe_points(as_points(ring), EPS)
    n = len(r)
    if n < 3:
        return False
    if np.hypot(*(r[0] - r[-1])) <= EPS:
        return False
    for i in range(n):
        p1, p2 = r[i], r[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            q1, q2 = r[j], r[(j + 1) % n]
            if _segments_properly_intersect(p1, p2, q1, q2):
                return False
    return True


def _point_segment_dist(pt, a, b) -> float:
    d = b - a
    den = float(d @ d)
    if den == 0.0:
        return float(np.hypot(*(pt - a)))
    t = float((pt - a) @ d) / den
    t = min(1.0, max(0.0, t))
    return float(np.hypot(*(pt - (a + t * d))))


def classify_point(pt, ring, eps: float = EPS) -> int:
    """+1 strictly inside, 0 on the boundary (within eps), -1 outside."""
    r = as_points(ring)
    n = len(r)
    for i in range(n):
        if _point_segment_dist(pt, r[i], r[(i + 1) % n]) <= eps:
            return 0
    inside = False
    j = n - 1
    for i in range(n):
        yi, yj = r[i, 1], r[j, 1]
        if (yi > pt[1]) != (yj > pt[1]):
            xc = (r[j, 0] - r[i, 0]) * (pt[1] - yi) / (yj - yi) + r[i, 0]
            if pt[0] < xc:
                inside = not inside
        j = i
    return 1 if inside else -1


def _contained(a, b, eps: float = EPS) -> bool:
    """Every vertex and edge midpoint of `a` lies inside or on `b`."""
    n = len(a)
    for i in range(n):
        if classify_point(a[i], b, eps) < 0:
            return False
        mid = 0.5 * (a[i] + a[(i + 1) % n])
        if classify_point(mid, b, eps) < 0:
            return False
    return polygon_area(a) <= polygon_area(b) + eps


def _collect_nodes(a, b, eps: float) -> list[np.ndarray]:
    """Boundary crossing points plus vertices of one ring lying on the other."""
    nodes: list[np.ndarray] = []

    def add(pt):
        for q in nodes:
            if np.hypot(*(pt - q)) <= 10 * eps:
                return
        nodes.append(np.asarray(pt, dtype=np.float64))

    na, nb = len(a), len(b)
    for i in range(na):
        p1, p2 = a[i], a[(i + 1) % na]
        d1 = p2 - p1
        for j in range(nb):
            q1, q2 = b[j], b[(j + 1) % nb]
            d2 = q2 - q1
            den = _cross2(d1, d2)
            if abs(den) < 1e-14:
                continue
            t = _cross2(q1 - p1, d2) / den
            u = _cross2(q1 - p1, d1) / den
            if -eps <= t <= 1 + eps and -eps <= u <= 1 + eps:
                add(p1 + min(1.0, max(0.0, t)) * d1)
    for ring, other in ((a, b), (b, a)):
        n, m = len(ring), len(other)
        for i in range(n):
            for j in range(m):
                if _point_segment_dist(ring[i], other[j], other[(j + 1) % m]) <= eps:
                    add(ring[i])
                    break
    return nodes


def _split_edges(ring, nodes, eps: float) -> list[tuple[np.ndarray, np.ndarray]]:
    """Directed sub-edges of `ring` split at every node lying on an edge."""
    edges = []
    n = len(ring)
    for i in range(n):
        p, q = ring[i], ring[(i + 1) % n]
        d = q - p
        L2 = float(d @ d)
        cuts = [(0.0, p), (1.0, q)]
        for node in nodes:
            if _point_segment_dist(node, p, q) <= eps:
                t = float((node - p) @ d) / L2 if L2 > 0 else 0.0
                if eps < t < 1 - eps or (0 <= t <= 1 and min(
                    np.hypot(*(node - p)), np.hypot(*(node - q))
                ) > 10 * eps):
                    cuts.append((t, node))
        cuts.sort(key=lambda c: c[0])
        for k in range(len(cuts) - 1):
            u, v = cuts[k][1], cuts[k + 1][1]
            if np.hypot(*(v - u)) > 10 * eps:
                edges.append((np.asarray(u, float), np.asarray(v, float)))
    return edges


def _key(pt) -> tuple[int, int]:
    return (int(round(pt[0] * 1e7)), int(round(pt[1] * 1e7)))


def _stitch(edges) -> list[np.ndarray]:
    """Walk directed edges into closed loops, picking the most clockwise
    continuation at nodes with several outgoing edges (keeps the walk on the
    outer boundary at degenerate seams)."""
    out_map: dict[tuple[int, int], list[int]] = {}
    for idx, (u, _v) in enumerate(edges):
        out_map.setdefault(_key(u), []).append(idx)
    used = [False] * len(edges)
    loops = []
    for start in range(len(edges)):
        if used[start]:
            continue
        loop = [edges[start][0]]
        cur = start
        guard = 0
        while guard <= len(edges):
            guard += 1
            used[cur] = True
            u, v = edges[cur]
            loop.append(v)
            if _key(v) == _key(loop[0]) and guard > 1:
                loops.append(np.array(loop[:-1]))
                break
            cands = [i for i in out_map.get(_key(v), []) if not used[i]]
            if not cands:
                break  # open chain; discarded
            if len(cands) == 1:
                cur = cands[0]
            else:
                din = v - u
                ain = np.arctan2(din[1], din[0])

                def turn(i):
                    d = edges[i][1] - edges[i][0]
                    rel = (np.arctan2(d[1], d[0]) - ain + np.pi) % (2 * np.pi) - np.pi
                    return rel

                cur = min(cands, key=turn)
    return loops


def polygon_union(a, b, eps: float = EPS):
    """Outer boundary of the union of two simple CCW polygons.

    Returns a CCW ring, or the DISJOINT marker when the polygons neither
    touch nor contain one another.
    """
    a = ensure_ccw(dedupe_points(as_points(a), eps))
    b = ensure_ccw(dedupe_points(as_points(b), eps))
    if not is_simple(a) or not is_simple(b):
        raise NonSimplePolygon("polygon_union requires simple polygons")
    if _contained(a, b, eps):
        return b.copy()
    if _contained(b, a, eps):
        return a.copy()
    nodes = _collect_nodes(a, b, eps)
    if not nodes:
        return DISJOINT

    kept = []
    for u, v in _split_edges(a, nodes, eps):
        if classify_point(0.5 * (u + v), b, eps) <= 0:  # outside or on: keep
            kept.append((u, v))
    for u, v in _split_edges(b, nodes, eps):
        if classify_point(0.5 * (u + v), a, eps) < 0:  # strictly outside only
            kept.append((u, v))

    loops = _stitch(kept)
    best = None
    best_area = 0.0
    for loop in loops:
        area = abs(polygon_area(loop))
        if area > best_area:
            best, best_area = loop, area
    floor = max(abs(polygon_area(a)), abs(polygon_area(b)))
    if best is None or best_area < floor - 1e-6:
        # degenerate arrangement the traversal could not resolve
        log.warning("polygon union traversal failed; keeping larger input")
        return (a if abs(polygon_area(a)) >= abs(polygon_area(b)) else b).copy()
    ring = dedupe_points(best, eps)
    return ensure_ccw(ring)


def rasterize_oracle(rings, resolution: int = 1000, window=None) -> int:
    """Count grid-cell centers inside the union of `rings`.

    `rings` is a single ring or a list; `window` is ((xmin, ymin), (xmax,
    ymax)) and defaults to the joint bounding box. Used as the area oracle
    in tests.
    """
    if isinstance(rings, np.ndarray) or (len(rings) and np.ndim(rings[0]) == 1):
        rings = [rings]
    rings = [as_points(r) for r in rings]
    if window is None:
        allpts = np.vstack(rings)
        lo = allpts.min(axis=0)
        hi = allpts.max(axis=0)
    else:
        lo = np.asarray(window[0], float)
        hi = np.asarray(window[1], float)
    dx = (hi[0] - lo[0]) / resolution
    dy = (hi[1] - lo[1]) / resolution
    xs = lo[0] + dx * (np.arange(resolution) + 0.5)
    ys = lo[1] + dy * (np.arange(resolution) + 0.5)
    mask = np.zeros((resolution, resolution), dtype=bool)
    for r in rings:
        mask |= inside_mask(xs, ys, r)
    return int(mask.sum())


def rasterize_area(rings, resolution: int = 1000, window=None) -> float:
    """Area estimate from the rasterization oracle, in square meters."""
    if isinstance(rings, np.ndarray) or (len(rings) and np.ndim(rings[0]) == 1):
        rings = [rings]
    rings = [as_points(r) for r in rings]
    if window is None:
        allpts = np.vstack(rings)
        lo = allpts.min(axis=0)
        hi = allpts.max(axis=0)
        window = (lo, hi)
    lo = np.asarray(window[0], float)
    hi = np.asarray(window[1], float)
    count = rasterize_oracle(rings, resolution, (lo, hi))
    cell = (hi[0] - lo[0]) * (hi[1] - lo[1]) / (resolution * resolution)
    return count * cell
