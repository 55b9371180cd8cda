"""Block partitioning of the unit cube and per-block modelling frames.

Points are grouped by the cell of a regular ``G x G x G`` grid they fall
into, but keep their real-valued positions. Each block then picks the axis
of smallest variance as the height ``q`` modelled over the other two.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

from .cloud import PointCloud

AXIS_NAMES = "xyz"
# preference when variances tie: z first, then y, then x
_TIE_ORDER = (2, 1, 0)

Cell = Tuple[int, int, int]


@dataclass(frozen=True)
class Block:
    cell: Cell
    indices: np.ndarray  # positions in the source cloud, ascending
    points: np.ndarray  # (n, 3)
    lower: np.ndarray  # dice minimum corner
    size: float  # dice side length

    def __len__(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class BlockGrid:
    resolution: int
    blocks: Dict[Cell, Block]

    @property
    def block_size(self) -> float:
        return 1.0 / self.resolution

    def ordered(self):
        """Blocks sorted by linear cell index ``(i * G + j) * G + k``."""
        return [self.blocks[c] for c in sorted(self.blocks)]


@dataclass(frozen=True)
class AxisFrame:
    q_axis: int
    o_axis: int
    p_axis: int

    def __post_init__(self):
        if sorted((self.q_axis, self.o_axis, self.p_axis)) != [0, 1, 2]:
            raise ValueError("frame axes must be a permutation of (0, 1, 2)")
        if self.o_axis > self.p_axis:
            raise ValueError("o_axis must precede p_axis")

    @classmethod
    def for_q(cls, q_axis: int) -> "AxisFrame":
        o, p = (a for a in range(3) if a != q_axis)
        return cls(q_axis, o, p)

    def __str__(self) -> str:
        return AXIS_NAMES[self.q_axis]


@dataclass(frozen=True)
class LocalSamples:
    """Block points as ``(o_bar, p_bar, q)`` in a block's axis frame.

    ``o_bar`` and ``p_bar`` are normalized to ``[0, 1]`` across the dice;
    ``q`` keeps the raw coordinate.
    """

    o: np.ndarray
    p: np.ndarray
    q: np.ndarray
    frame: AxisFrame
    lower: np.ndarray
    size: float

    def __len__(self) -> int:
        return len(self.q)

    @property
    def op(self) -> np.ndarray:
        return np.column_stack([self.o, self.p])

    def to_global(self, o, p, q) -> np.ndarray:
        """Map local ``(o_bar, p_bar, q)`` triples back to 3-D positions."""
        o = np.asarray(o, dtype=np.float64)
        out = np.empty((o.shape[0], 3))
        out[:, self.frame.o_axis] = self.lower[self.frame.o_axis] + o * self.size
        out[:, self.frame.p_axis] = self.lower[self.frame.p_axis] + np.asarray(p) * self.size
        out[:, self.frame.q_axis] = q
        return out


def auto_grid_resolution(n_points: int) -> int:
    """Blocks per axis targeting a few hundred points per occupied block."""
    if n_points < 1:
        raise ValueError("n_points must be >= 1")
    g = int(np.floor(np.sqrt(n_points / 512.0) + 0.5))
    return min(max(g, 4), 64)


def partition_blocks(cloud: PointCloud, resolution: int, tol: float = 1e-9) -> BlockGrid:
    if resolution < 1:
        raise ValueError(f"grid resolution must be >= 1, got {resolution}")
    pts = cloud.points
    if pts.size == 0:
        raise ValueError("cannot partition an empty cloud")
    if pts.min() < -tol or pts.max() > 1.0 + tol:
        raise ValueError("cloud is not normalized to the unit cube")
    g = resolution
    cells = np.clip(np.floor(pts * g).astype(np.int64), 0, g - 1)
    linear = (cells[:, 0] * g + cells[:, 1]) * g + cells[:, 2]
    # stable sort keeps cloud order within each block
    order = np.argsort(linear, kind="stable")
    uniq, starts = np.unique(linear[order], return_index=True)
    ends = np.append(starts[1:], len(order))
    size = 1.0 / g
    blocks = {}
    for lin, s, e in zip(uniq, starts, ends):
        idx = order[s:e]
        cell = tuple(int(c) for c in cells[idx[0]])
        blocks[cell] = Block(
            cell=cell,
            indices=idx,
            points=pts[idx],
            lower=np.array(cell, dtype=np.float64) * size,
            size=size,
        )
    return BlockGrid(g, blocks)


def axis_variances(points: np.ndarray) -> np.ndarray:
    """Population variance per axis, two-pass."""
    points = np.asarray(points, dtype=np.float64)
    centered = points - points.mean(axis=0)
    return (centered * centered).sum(axis=0) / points.shape[0]


def select_model_axis(block) -> AxisFrame:
    """Frame whose ``q`` axis is the coordinate of smallest variance."""
    points = block.points if isinstance(block, Block) else np.asarray(block)
    if len(points) == 0:
        raise ValueError("block has no points")
    var = axis_variances(points)
    best = min(var)
    q_axis = next(a for a in _TIE_ORDER if var[a] == best)
    return AxisFrame.for_q(q_axis)


def to_local_frame(block: Block, frame: AxisFrame) -> LocalSamples:
    pts = block.points
    lo = block.lower
    return LocalSamples(
        # clip absorbs last-ulp spill from the inexact 1/G cell size
        o=np.clip((pts[:, frame.o_axis] - lo[frame.o_axis]) / block.size, 0.0, 1.0),
        p=np.clip((pts[:, frame.p_axis] - lo[frame.p_axis]) / block.size, 0.0, 1.0),
        q=pts[:, frame.q_axis].copy(),
        frame=frame,
        lower=lo,
        size=block.size,
    )
