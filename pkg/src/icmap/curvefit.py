"""Polyline merging by penalized least-squares spline fitting.

Two matched point sets are reordered into a single chain, a cubic B-spline
is fit over a chord-length parameterization by minimizing

    sum_i ||C(u_i) - p_i||^2  +  s * sum_k ||d2 c_k||^2

where d2 is the second difference of the control points (a P-spline style
roughness penalty, weight `s`), and the fitted curve is resampled at even
arc-length spacing. Larger `s` trades data fidelity for smoothness.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BSpline
from scipy.spatial.distance import cdist

from .errors import InsufficientPoints
from .geometry import as_points, chamfer_distance, dedupe_points, densify, resample_even

# resolution bounds, far beyond any desk-scale road; they keep degenerate
# low-s merges of noisy chains from inflating point counts across repeated
# merges instead of exhausting memory
MAX_MERGE_POINTS = 2500
MAX_CTRL_POINTS = 500


@dataclass(frozen=True)
class SmoothingFitParams:
    """Knobs of the merge fit.

    s: roughness penalty weight (>= 0)
    degree: spline degree, 2 or 3
    out_spacing: meters between resampled output points
    min_points: lower bound on output point count
    ctrl_spacing: meters of chord length per control point
    """

    s: float = 0.5
    degree: int = 3
    out_spacing: float = 1.0
    min_points: int = 20
    ctrl_spacing: float = 2.0

    def __post_init__(self):
        if self.s < 0:
            raise ValueError("smoothing weight s must be >= 0")
        if self.degree not in (2, 3):
            raise ValueError("spline degree must be 2 or 3")
        if self.out_spacing <= 0:
            raise ValueError("out_spacing must be positive")
        if self.ctrl_spacing <= 0:
            raise ValueError("ctrl_spacing must be positive")


def reorder_concat(global_pts, det_pts) -> np.ndarray:
    """Combine two matched polylines into one consistently ordered chain.

    The detection is flipped when its chord opposes the global chord, the
    pooled points are chained greedily by nearest neighbor from one end of
    the farthest-apart pair, and the result is oriented along the global
    polyline's direction. Every input point appears exactly once.
    """
    g = as_points(global_pts)
    d = as_points(det_pts)
    g_chord = g[-1] - g[0]
    d_chord = d[-1] - d[0]
    if float(g_chord @ d_chord) < 0:
        d = d[::-1]
    pool = np.vstack([g, d])
    n = len(pool)
    dist = cdist(pool, pool)
    i, j = np.unravel_index(np.argmax(dist), dist.shape)
    # start from whichever extreme sits nearer the global start
    start = i if np.hypot(*(pool[i] - g[0])) <= np.hypot(*(pool[j] - g[0])) else j
    order = [start]
    used = np.zeros(n, dtype=bool)
    used[start] = True
    for _ in range(n - 1):
        row = dist[order[-1]].copy()
        row[used] = np.inf
        nxt = int(np.argmin(row))
        order.append(nxt)
        used[nxt] = True
    chain = pool[order]
    if float((chain[-1] - chain[0]) @ g_chord) < 0:
        chain = chain[::-1]
    return chain


def _clamped_knots(n_ctrl: int, degree: int, u: np.ndarray) -> np.ndarray:
    # interior knots at parameter quantiles so every basis function keeps
    # data support (uniform data gives uniform knots; chains with long empty
    # spans would otherwise leave control points unconstrained)
    inner = np.quantile(u, np.linspace(0.0, 1.0, n_ctrl - degree + 1))
    inner[0], inner[-1] = u[0], u[-1]
    return np.concatenate([np.full(degree, u[0]), inner, np.full(degree, u[-1])])


def _solve_spline(points, params: SmoothingFitParams):
    """Penalized least-squares solve; returns (spline, data sites, data).

    The first and last control points are pinned to the chain's endpoints;
    otherwise the roughness penalty pushes them past the data extent and
    repeated merges would creep outward.
    """
    pts = dedupe_points(points, 1e-9)
    k = params.degree
    if len(pts) < k + 1:
        raise InsufficientPoints(f"need at least {k + 1} points, got {len(pts)}")
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    u = np.concatenate([[0.0], np.cumsum(seg)])
    n_ctrl = int(np.clip(int(u[-1] // params.ctrl_spacing) + 1, k + 1,
                         min(len(pts), MAX_CTRL_POINTS)))
    t = _clamped_knots(n_ctrl, k, u)
    B = BSpline.design_matrix(u, t, k).toarray()
    d2 = np.diff(np.eye(n_ctrl), n=2, axis=0) if n_ctrl > 2 else np.zeros((0, n_ctrl))

    free = slice(1, n_ctrl - 1)
    ends = np.array([0, n_ctrl - 1])
    y_ends = pts[[0, -1]]
    r = pts - B[:, ends] @ y_ends
    e = d2[:, ends] @ y_ends
    Bf = B[:, free]
    Df = d2[:, free]
    A = Bf.T @ Bf + params.s * (Df.T @ Df)
    A[np.diag_indices_from(A)] += 1e-12
    rhs = Bf.T @ r - params.s * (Df.T @ e)
    coef = np.empty((n_ctrl, 2))
    coef[0] = pts[0]
    coef[-1] = pts[-1]
    coef[free] = np.linalg.solve(A, rhs) if n_ctrl > 2 else np.zeros((0, 2))
    return BSpline(t, coef, k), u, pts


def fit_smoothing_spline(points, params: SmoothingFitParams) -> np.ndarray:
    """Fit the penalized spline to an ordered chain and resample it evenly."""
    spline, u, pts = _solve_spline(points, params)
    length = u[-1]
    # bound output resolution by spatial extent, not chain length: unpenalized
    # fits of noisy interleaved chains can oscillate, and resampling along
    # that inflated arc would let the point count grow across repeated merges
    diag = float(np.hypot(*(pts.max(axis=0) - pts.min(axis=0))))
    cap = min(int(4.0 * diag / params.out_spacing) + 2, MAX_MERGE_POINTS)
    n_out = max(params.min_points, min(int(round(length / params.out_spacing)) + 1, cap))
    dense = spline(np.linspace(0.0, length, max(200, 8 * n_out)))
    return resample_even(dense, n_out)


def merge_polylines(global_pts, det_pts, params: SmoothingFitParams) -> np.ndarray:
    """Merge a stored polyline with a matched detection into one smooth curve."""
    g = as_points(global_pts)
    if len(g) > MAX_MERGE_POINTS:
        g = resample_even(g, MAX_MERGE_POINTS)
    return fit_smoothing_spline(reorder_concat(g, det_pts), params)


def sweep_smoothing(observations, s_grid, params: SmoothingFitParams | None = None):
    """Fit-error sweep over the smoothing weight.

    `observations` maps class name -> list of cases, each a pair
    (reference_points, [observation_pointset, ...]); for each `s` the
    observations of a case are merged sequentially and the Chamfer distance
    of the result to the densified reference is recorded. Returns rows of
    (s, {class: mean_error}).
    """
    base = params or SmoothingFitParams()
    rows = []
    refs = {
        cls: [(densify(ref, 0.25), obs_list) for ref, obs_list in cases]
        for cls, cases in observations.items()
    }
    for s in s_grid:
        p = SmoothingFitParams(
            s=float(s),
            degree=base.degree,
            out_spacing=base.out_spacing,
            min_points=base.min_points,
            ctrl_spacing=base.ctrl_spacing,
        )
        errs: dict[str, float] = {}
        for cls, cases in refs.items():
            vals = []
            for ref_dense, obs_list in cases:
                merged = as_points(obs_list[0])
                for obs in obs_list[1:]:
                    merged = merge_polylines(merged, obs, p)
                if len(obs_list) == 1:
                    merged = fit_smoothing_spline(merged, p)
                vals.append(chamfer_distance(densify(merged, 0.25), ref_dense))
            errs[cls] = float(np.mean(vals)) if vals else float("nan")
        rows.append((float(s), errs))
    return rows


@dataclass
class SweepTable:
    """Plot-ready sweep result: one row per smoothing weight."""

    classes: list[str]
    rows: list[tuple[float, dict[str, float]]] = field(default_factory=list)

    def to_text(self) -> str:
        header = "s\t" + "\t".join(f"cd_{c}" for c in self.classes)
        lines = [header]
        for s, errs in self.rows:
            lines.append("\t".join([f"{s:.3f}"] + [f"{errs[c]:.6f}" for c in self.classes]))
        return "\n".join(lines) + "\n"

    def argmin(self, cls: str) -> float:
        return min(self.rows, key=lambda r: r[1][cls])[0]
