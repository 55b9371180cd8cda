"""Point-to-point and point-to-plane geometric distortion between clouds."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.spatial import cKDTree

from .cloud import PointCloud

log = logging.getLogger(__name__)

AGGREGATIONS = ("mean-norm", "rms")
DEFAULT_NORMALS_K = 16
# extra neighbours fetched so exact distance ties can be resolved by index
_TIE_CANDIDATES = 4


def _as_points(cloud) -> np.ndarray:
    pts = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=np.float64)
    return pts.reshape(-1, 3)


class NearestNeighbors:
    """Exact nearest-neighbour index over a reference set.

    Ties in distance go to the lowest reference index, matching a plain
    linear scan with strict ``<`` comparison.
    """

    def __init__(self, ref):
        self.ref = _as_points(ref)
        if len(self.ref) == 0:
            raise ValueError("reference set is empty")
        self._tree = cKDTree(self.ref)

    def query(self, queries) -> Tuple[np.ndarray, np.ndarray]:
        """Return ``(indices, error_vectors)`` with ``error = nearest - query``."""
        q = np.asarray(queries, dtype=np.float64).reshape(-1, 3)
        k = min(_TIE_CANDIDATES, len(self.ref))
        _, cand = self._tree.query(q, k=k)
        cand = cand.reshape(len(q), k)
        diff = self.ref[cand] - q[:, None, :]
        d2 = (diff * diff).sum(axis=2)
        closest = d2 == d2.min(axis=1, keepdims=True)
        best = np.where(closest, cand, np.iinfo(np.int64).max).min(axis=1)
        return best, self.ref[best] - q


def nearest_neighbor(refset, query) -> Tuple[int, np.ndarray]:
    idx, err = NearestNeighbors(refset).query(np.asarray(query).reshape(1, 3))
    return int(idx[0]), err[0]


def _aggregate(d: np.ndarray, aggregation: str) -> float:
    if aggregation == "mean-norm":
        return float(np.mean(d))
    if aggregation == "rms":
        return float(np.sqrt(np.mean(d * d)))
    raise ValueError(f"unknown aggregation {aggregation!r}; expected one of {AGGREGATIONS}")


def p2point(test, ref, aggregation: str = "mean-norm", index: Optional[NearestNeighbors] = None) -> float:
    """Aggregate nearest-neighbour distance from each test point to ``ref``."""
    t = _as_points(test)
    if len(t) == 0:
        raise ValueError("test cloud is empty")
    index = index or NearestNeighbors(ref)
    _, err = index.query(t)
    return _aggregate(np.linalg.norm(err, axis=1), aggregation)


def p2plane(test, ref, ref_normals, aggregation: str = "mean-norm",
            index: Optional[NearestNeighbors] = None) -> float:
    """Like ``p2point`` but each error vector is projected on the nearest reference normal."""
    t = _as_points(test)
    if len(t) == 0:
        raise ValueError("test cloud is empty")
    index = index or NearestNeighbors(ref)
    normals = np.asarray(ref_normals, dtype=np.float64).reshape(-1, 3)
    if len(normals) != len(index.ref):
        raise ValueError(f"{len(normals)} normals for {len(index.ref)} reference points")
    idx, err = index.query(t)
    d = np.abs(np.einsum("ij,ij->i", err, normals[idx]))
    return _aggregate(d, aggregation)


def estimate_normals(cloud, k: int = DEFAULT_NORMALS_K, return_confidence: bool = False):
    """PCA normals from the ``k`` nearest neighbours (the point itself included).

    Each normal is the smallest principal direction of its neighbourhood,
    signed to point away from the neighbourhood centroid. When that sign is
    undecidable the largest-magnitude component is made positive. On
    line-like neighbourhoods the normal is ambiguous; the first of the z, y, x
    axes well separated from the line direction is projected onto the normal
    plane instead, and the point is reported as low confidence.
    """
    pts = _as_points(cloud)
    n = len(pts)
    if not 3 <= k < n:
        raise ValueError(f"k must satisfy 3 <= k < {n}, got {k}")
    _, nbr = cKDTree(pts).query(pts, k=k)
    hood = pts[nbr]
    centroid = hood.mean(axis=1)
    centered = hood - centroid[:, None, :]
    cov = np.einsum("nki,nkj->nij", centered, centered) / k
    evals, evecs = np.linalg.eigh(cov)
    normals = evecs[:, :, 0].copy()

    spread = np.maximum(evals[:, 2], np.finfo(float).tiny)
    low = (evals[:, 1] - evals[:, 0]) <= 1e-10 * spread
    for i in np.flatnonzero(low):
        line = evecs[i, :, 2]
        for axis in (2, 1, 0):
            e = np.zeros(3)
            e[axis] = 1.0
            v = e - line * line[axis]
            norm = np.linalg.norm(v)
            if norm >= 0.8:
                normals[i] = v / norm
                break

    side = np.einsum("ij,ij->i", normals, pts - centroid)
    tol = 1e-12 * np.sqrt(spread)
    flip = side < -tol
    undecided = np.abs(side) <= tol
    if undecided.any():
        rows = np.flatnonzero(undecided)
        dominant = normals[rows, np.argmax(np.abs(normals[rows]), axis=1)]
        flip[rows] = dominant < 0
    normals[flip] *= -1.0
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    if return_confidence:
        return normals, ~low
    return normals


@dataclass
class MetricReport:
    p2point_ab: float
    p2point_ba: float
    p2point_sym: float
    p2plane_ab: float
    p2plane_ba: float
    p2plane_sym: float
    aggregation: str
    normal_source: str
    n_test: int
    n_ref: int

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_text(self) -> str:
        return "".join(f"{k}: {v}\n" for k, v in self.to_dict().items())


def metric_report(test: PointCloud, ref: PointCloud, aggregation: str = "mean-norm",
                  normals_k: int = DEFAULT_NORMALS_K) -> MetricReport:
    """Both directions and their maxima for both metrics.

    ``ab`` is test to reference, ``ba`` the reverse. Each direction projects
    onto the normals of its own target cloud: provided normals when the cloud
    carries them, otherwise PCA estimates.
    """
    if len(test) == 0 or len(ref) == 0:
        raise ValueError("metric_report needs two non-empty clouds")
    _aggregate(np.zeros(1), aggregation)

    def normals_of(c: PointCloud):
        if c.normals is not None:
            return c.normals, "provided"
        k = min(normals_k, len(c) - 1)
        return estimate_normals(c, k), f"estimated, k={k}"

    ref_index, test_index = NearestNeighbors(ref), NearestNeighbors(test)
    ref_n, source = normals_of(ref)
    test_n, _ = normals_of(test) if len(test) > 3 else (None, None)

    ab_point = p2point(test, ref, aggregation, ref_index)
    ba_point = p2point(ref, test, aggregation, test_index)
    ab_plane = p2plane(test, ref, ref_n, aggregation, ref_index)
    if test_n is not None:
        ba_plane = p2plane(ref, test, test_n, aggregation, test_index)
    else:
        ba_plane = ba_point
    return MetricReport(
        p2point_ab=ab_point,
        p2point_ba=ba_point,
        p2point_sym=max(ab_point, ba_point),
        p2plane_ab=ab_plane,
        p2plane_ba=ba_plane,
        p2plane_sym=max(ab_plane, ba_plane),
        aggregation=aggregation,
        normal_source=source,
        n_test=len(test),
        n_ref=len(ref),
    )
