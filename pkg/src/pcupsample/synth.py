"""Analytic test surfaces sampled with exact normals."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cloud import PointCloud

SHAPES = ("plane", "cosine-surface", "sphere-patch")


@dataclass(frozen=True)
class SyntheticSpec:
    """Sampling recipe for one analytic surface.

    Plane and cosine surface are heights over ``[0, 1]^2``:
    ``z = height`` and ``z = offset + amplitude * cos(pi f x) cos(pi f y)``.
    The sphere patch is the cap of half-angle ``cap_angle`` (degrees) around
    +z on a sphere of ``radius`` about ``center``, sampled uniformly by area.
    """

    shape: str = "plane"
    n_points: int = 1000
    seed: int = 0
    height: float = 0.3
    offset: float = 0.25
    amplitude: float = 0.1
    frequency: float = 1.0
    radius: float = 0.5
    cap_angle: float = 60.0
    center: tuple = (0.5, 0.5, 0.0)

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"unknown shape {self.shape!r}; expected one of {SHAPES}")
        if self.n_points < 1:
            raise ValueError("n_points must be >= 1")
        if self.shape == "sphere-patch":
            if not self.radius > 0:
                raise ValueError("radius must be positive")
            if not 0 < self.cap_angle <= 180:
                raise ValueError("cap_angle must lie in (0, 180] degrees")
        if self.shape == "cosine-surface" and self.frequency < 0:
            raise ValueError("frequency must be >= 0")


def cosine_height(spec: SyntheticSpec, x, y):
    f = np.pi * spec.frequency
    return spec.offset + spec.amplitude * np.cos(f * x) * np.cos(f * y)


def cosine_normals(spec: SyntheticSpec, x, y) -> np.ndarray:
    f = np.pi * spec.frequency
    dzdx = -spec.amplitude * f * np.sin(f * x) * np.cos(f * y)
    dzdy = -spec.amplitude * f * np.cos(f * x) * np.sin(f * y)
    n = np.column_stack([-dzdx, -dzdy, np.ones_like(x)])
    return n / np.linalg.norm(n, axis=1, keepdims=True)


def generate(spec: SyntheticSpec) -> PointCloud:
    rng = np.random.default_rng(spec.seed)
    n = spec.n_points
    if spec.shape == "plane":
        xy = rng.random((n, 2))
        pts = np.column_stack([xy, np.full(n, spec.height)])
        normals = np.tile([0.0, 0.0, 1.0], (n, 1))
    elif spec.shape == "cosine-surface":
        xy = rng.random((n, 2))
        x, y = xy[:, 0], xy[:, 1]
        pts = np.column_stack([x, y, cosine_height(spec, x, y)])
        normals = cosine_normals(spec, x, y)
    else:
        cos_min = np.cos(np.radians(spec.cap_angle))
        u = rng.random((n, 2))
        cos_t = 1.0 - u[:, 0] * (1.0 - cos_min)
        sin_t = np.sqrt(np.maximum(0.0, 1.0 - cos_t * cos_t))
        phi = 2.0 * np.pi * u[:, 1]
        normals = np.column_stack([sin_t * np.cos(phi), sin_t * np.sin(phi), cos_t])
        normals /= np.linalg.norm(normals, axis=1, keepdims=True)
        pts = np.asarray(spec.center, dtype=np.float64) + spec.radius * normals
    return PointCloud(pts, normals)
