"""Axis-aligned boxes and voxel grids.

The service volume is discretized into a regular grid of voxels; all volume
integrals in the toolkit are midpoint sums over voxel centers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


def _as_point(value) -> np.ndarray:
    point = np.asarray(value, dtype=float).reshape(3)
    return point


@dataclass(frozen=True)
class Box:
    """Axis-aligned 3D region, corners in meters (or any consistent unit)."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lo", _as_point(self.lo))
        object.__setattr__(self, "hi", _as_point(self.hi))
        if not np.all(self.hi > self.lo):
            raise ValueError("box must have positive extent on every axis")

    @property
    def extent(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def volume(self) -> float:
        return float(np.prod(self.extent))

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Boolean mask of points inside the closed box. Accepts (3,) or (n, 3)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        inside = np.all((pts >= self.lo) & (pts <= self.hi), axis=1)
        return inside if pts.shape[0] > 1 else inside[0]


@dataclass(frozen=True)
class VoxelGrid:
    """Regular voxel discretization of a box.

    Voxels are indexed in C order with the x index slowest and z fastest:
    flat = (ix * ny + iy) * nz + iz.  All integrals computed on the grid are
    midpoint sums: sum(f(center) * voxel_volume).
    """

    box: Box
    shape: tuple[int, int, int]

    def __post_init__(self):
        shape = tuple(int(n) for n in self.shape)
        object.__setattr__(self, "shape", shape)
        if len(shape) != 3 or any(n < 2 for n in shape):
            raise ValueError("grid needs at least 2 voxels per axis")

    @property
    def n_voxels(self) -> int:
        return int(np.prod(self.shape))

    @property
    def voxel_size(self) -> np.ndarray:
        return self.box.extent / np.asarray(self.shape, dtype=float)

    @property
    def voxel_volume(self) -> float:
        return float(np.prod(self.voxel_size))

    def axis_centers(self, axis: int) -> np.ndarray:
        """Center coordinates along one axis (length shape[axis])."""
        n = self.shape[axis]
        step = (self.box.hi[axis] - self.box.lo[axis]) / n
        return self.box.lo[axis] + step * (np.arange(n) + 0.5)

    @cached_property
    def centers(self) -> np.ndarray:
        """All voxel centers, shape (n_voxels, 3), in flat-index order."""
        ax = [self.axis_centers(i) for i in range(3)]
        xs, ys, zs = np.meshgrid(*ax, indexing="ij")
        return np.stack([xs.ravel(), ys.ravel(), zs.ravel()], axis=1)

    def flatten_values(self, values: np.ndarray) -> np.ndarray:
        """Flatten an (nx, ny, nz) field into flat-index order."""
        arr = np.asarray(values)
        if arr.shape != self.shape:
            raise ValueError(f"expected field of shape {self.shape}, got {arr.shape}")
        return arr.ravel()

    def integrate(self, values: np.ndarray) -> float:
        """Midpoint-rule integral of per-voxel values over the box."""
        return float(np.sum(values) * self.voxel_volume)
