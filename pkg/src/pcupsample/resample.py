"""Point placement by recursive Delaunay edge-midpoint insertion.

New ``(o_bar, p_bar)`` positions are midpoints of Delaunay edges in a
block's modelling plane; their heights come from the fitted surface model.
``upsample_cloud`` runs the whole chain over every block of a normalized
cloud and splits the global point budget between blocks.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy.spatial import Delaunay, QhullError

from .cloud import PointCloud, normalize_unit_cube
from .partition import (
    LocalSamples,
    auto_grid_resolution,
    partition_blocks,
    select_model_axis,
    to_local_frame,
)
from .spectral import ModelConfig, SurfaceModel, eval_model, fit_model

log = logging.getLogger(__name__)

MAX_ROUNDS = 8
COLLINEAR_TOL = 1e-12


class NotTriangulable(ValueError):
    """Raised when points are too few or all collinear."""


@dataclass(frozen=True)
class Triangulation:
    vertices: np.ndarray  # (n, 2)
    triangles: np.ndarray  # (t, 3) vertex indices, counter-clockwise
    edges: np.ndarray  # (e, 2) unique undirected pairs, i < j, sorted


def _collinear(points: np.ndarray) -> bool:
    """True when every point lies on the line through the two most distant ones."""
    a = points[0]
    d = points - a
    far = int(np.argmax((d * d).sum(axis=1)))
    ref = d[far]
    scale = float((ref * ref).sum())
    if scale == 0.0:
        return True
    cross = ref[0] * d[:, 1] - ref[1] * d[:, 0]
    return bool(np.all(np.abs(cross) <= COLLINEAR_TOL * scale))


def delaunay(points) -> Triangulation:
    """Delaunay triangulation of 2-D points (Qhull, with triangulated output).

    Cocircular configurations are split by Qhull's deterministic triangulation
    of merged facets, so equal input yields equal output. Duplicate points are
    kept in ``vertices`` but belong to no triangle.
    """
    pts = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 2)
    if len(pts) < 3:
        raise NotTriangulable(f"need at least 3 points, got {len(pts)}")
    if _collinear(pts):
        raise NotTriangulable("all points are collinear")
    try:
        tri = Delaunay(pts)
    except QhullError as exc:
        raise NotTriangulable(str(exc)) from exc
    simplices = np.ascontiguousarray(tri.simplices, dtype=np.int64)
    e = np.concatenate([simplices[:, [0, 1]], simplices[:, [1, 2]], simplices[:, [2, 0]]])
    e.sort(axis=1)
    edges = np.unique(e, axis=0)
    return Triangulation(pts, simplices, edges)


def edge_midpoints(tri: Triangulation):
    """Midpoints of all distinct edges and the lengths of their parent edges.

    Rows are sorted lexicographically by ``(o_bar, p_bar)``.
    """
    a = tri.vertices[tri.edges[:, 0]]
    b = tri.vertices[tri.edges[:, 1]]
    mid = 0.5 * (a + b)
    length = np.linalg.norm(b - a, axis=1)
    order = np.lexsort((mid[:, 1], mid[:, 0]))
    return mid[order], length[order]


def plan_budget(
    block_counts: Sequence[int],
    total_in: int,
    scale: float,
    min_block_points: int = 3,
    eligible: Optional[Sequence[bool]] = None,
) -> List[int]:
    """Split ``round((scale - 1) * total_in)`` new points across blocks.

    Quotas are proportional to block size among eligible blocks, rounded by
    the largest-remainder rule (ties go to the lower block index). Blocks
    smaller than ``min_block_points`` or flagged ineligible get nothing.
    """
    counts = [int(c) for c in block_counts]
    if sum(counts) != total_in:
        raise ValueError("block counts do not sum to total_in")
    if not scale > 1:
        raise ValueError("scale must be > 1")
    if eligible is None:
        eligible = [True] * len(counts)
    ok = [bool(e) and c >= min_block_points for c, e in zip(counts, eligible)]
    target = int(np.floor((scale - 1.0) * total_in + 0.5))
    pool = sum(c for c, e in zip(counts, ok) if e)
    quotas = [0] * len(counts)
    if pool == 0 or target == 0:
        return quotas
    remainders = []
    for i, (c, e) in enumerate(zip(counts, ok)):
        if e:
            quotas[i], rem = divmod(target * c, pool)
            remainders.append((-rem, i))
    left = target - sum(quotas)
    for _, i in sorted(remainders)[:left]:
        quotas[i] += 1
    return quotas


@dataclass(frozen=True)
class UpsampleConfig:
    scale: float = 2.0
    model: ModelConfig = field(default_factory=ModelConfig)
    grid: Optional[int] = None  # None: auto_grid_resolution
    min_block_points: int = 3
    clamp_margin: float = 0.5

    def __post_init__(self):
        if not self.scale > 1:
            raise ValueError("scale must be > 1")
        if self.min_block_points < 3:
            raise ValueError("min_block_points must be >= 3")
        if self.clamp_margin < 0:
            raise ValueError("clamp_margin must be >= 0")
        if self.grid is not None and self.grid < 1:
            raise ValueError("grid must be >= 1")


def place_points(vertices: np.ndarray, quota: int):
    """Choose up to ``quota`` new plane positions by recursive midpoint insertion.

    Returns ``(positions, rounds)``. When a round yields at least the
    remaining quota, the midpoints of the longest edges are kept.
    """
    if quota <= 0:
        return np.empty((0, 2)), 0
    current = np.asarray(vertices, dtype=np.float64)
    chosen = []
    remaining = quota
    rounds = 0
    while remaining > 0 and rounds < MAX_ROUNDS:
        rounds += 1
        mid, length = edge_midpoints(delaunay(current))
        if len(mid) >= remaining:
            # midpoints are already lexicographic, so a stable sort on length
            # breaks equal-length ties by position
            pick = np.argsort(-length, kind="stable")[:remaining]
            chosen.append(mid[np.sort(pick)])
            remaining = 0
        else:
            chosen.append(mid)
            remaining -= len(mid)
            current = np.vstack([current, mid])
    out = np.vstack(chosen) if chosen else np.empty((0, 2))
    return out, rounds


def upsample_block(
    samples: LocalSamples, model: SurfaceModel, quota: int, cfg: UpsampleConfig = UpsampleConfig()
) -> np.ndarray:
    """New 3-D points for one block; at most ``quota`` rows."""
    if quota <= 0:
        return np.empty((0, 3))
    op, _ = place_points(samples.op, quota)
    q = eval_model(model, op)
    qmin, qmax = float(samples.q.min()), float(samples.q.max())
    margin = cfg.clamp_margin * (qmax - qmin)
    q = np.clip(q, qmin - margin, qmax + margin)
    return samples.to_global(op[:, 0], op[:, 1], q)


@dataclass
class BlockStats:
    cell: tuple
    points_in: int
    q_axis: str
    quota: int = 0
    achieved: int = 0
    iterations: int = 0
    residual_energy: float = 0.0
    status: str = "ok"

    def as_dict(self) -> dict:
        return {
            "cell": list(self.cell),
            "points_in": self.points_in,
            "q_axis": self.q_axis,
            "quota": self.quota,
            "achieved": self.achieved,
            "iterations": self.iterations,
            "residual_energy": self.residual_energy,
            "status": self.status,
        }


@dataclass
class UpsampleResult:
    cloud: PointCloud  # originals followed by new points
    new_points: np.ndarray
    grid: int
    requested: int
    blocks: List[BlockStats]

    @property
    def achieved(self) -> int:
        return len(self.new_points)

    @property
    def shortfall(self) -> int:
        return self.requested - self.achieved


def upsample_cloud(cloud: PointCloud, cfg: UpsampleConfig = UpsampleConfig()) -> UpsampleResult:
    """Upsample a unit-cube normalized cloud by ``cfg.scale``.

    Output keeps the input points untouched and in order, then appends new
    points block by block in linear cell order.
    """
    n = len(cloud)
    if n == 0:
        raise ValueError("cannot upsample an empty cloud")
    g = cfg.grid or auto_grid_resolution(n)
    grid = partition_blocks(cloud, g)
    blocks = grid.ordered()

    stats, local, eligible = [], [], []
    for block in blocks:
        frame = select_model_axis(block)
        samples = to_local_frame(block, frame)
        st = BlockStats(block.cell, len(block), str(frame))
        ok = len(block) >= cfg.min_block_points
        if not ok:
            st.status = "too_few_points"
        elif _collinear(samples.op):
            ok = False
            st.status = "collinear"
        stats.append(st)
        local.append(samples)
        eligible.append(ok)

    quotas = plan_budget(
        [len(b) for b in blocks], n, cfg.scale, cfg.min_block_points, eligible
    )
    requested = int(np.floor((cfg.scale - 1.0) * n + 0.5))
    if sum(quotas) < requested:
        log.warning("no eligible block can take the point budget")

    new = []
    for st, samples, quota, ok in zip(stats, local, quotas, eligible):
        st.quota = quota
        if not ok:
            continue
        model = fit_model(samples, cfg.model)
        st.iterations = model.iterations
        st.residual_energy = model.energies[-1]
        if model.status != "ok":
            st.status = model.status
        if quota == 0:
            continue
        try:
            pts = upsample_block(samples, model, quota, cfg)
        except NotTriangulable as exc:
            log.warning("block %s not triangulable: %s", st.cell, exc)
            st.status = "not_triangulable"
            continue
        st.achieved = len(pts)
        if st.achieved < quota:
            st.status = "shortfall"
        new.append(pts)

    new_pts = np.vstack(new) if new else np.empty((0, 3))
    out = PointCloud(np.vstack([cloud.points, new_pts]))
    return UpsampleResult(out, new_pts, g, requested, stats)


def upsample_original_units(cloud: PointCloud, cfg: UpsampleConfig = UpsampleConfig()):
    """Normalize, upsample and map new points back to the cloud's own units.

    The input points are copied through untouched (no normalization round
    trip), so they survive bit for bit. Returns ``(output_cloud, result)``.
    """
    normalized, t = normalize_unit_cube(PointCloud(cloud.points))
    result = upsample_cloud(normalized, cfg)
    out = PointCloud(np.vstack([cloud.points, t.inverse(result.new_points)]))
    return out, result
