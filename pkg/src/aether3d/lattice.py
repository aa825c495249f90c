"""Drone base-station placement on a truncated-octahedron lattice.

Cell centers form a body-centered-cubic lattice: each station sits at the
center of one truncated-octahedron cell, indexed by an integer triple
(a, b, c).  The Cartesian position of index (a, b, c) with edge length R is

    reference + sqrt(2) * R * (a + b - c, -a + b + c, a - b + c).

A cell is the nearest-center region of its station, so membership queries
reduce to a nearest-neighbor search; no polyhedral meshes are kept.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .geometry import Box

# Columns map index steps (a, b, c) to Cartesian steps in units of sqrt(2)*R.
INDEX_TO_CARTESIAN = np.array(
    [
        [1, 1, -1],
        [-1, 1, 1],
        [1, -1, 1],
    ],
    dtype=float,
)

# First-tier index offsets: 8 across hexagonal faces, 6 across square faces.
HEX_FACE_STEPS = [(1, 0, 0), (0, 1, 0), (0, 0, 1), (1, 1, 1)]
SQUARE_FACE_STEPS = [(1, 1, 0), (1, 0, 1), (0, 1, 1)]

DEFAULT_INDEX_RANGES = ((-1, 1), (-1, 1), (0, 1))


@dataclass(frozen=True)
class LatticeSpec:
    """Lattice parameters: edge length R, reference point, index ranges, domain box."""

    edge_length: float
    reference: np.ndarray
    a_range: tuple[int, int] = DEFAULT_INDEX_RANGES[0]
    b_range: tuple[int, int] = DEFAULT_INDEX_RANGES[1]
    c_range: tuple[int, int] = DEFAULT_INDEX_RANGES[2]
    box: Box | None = None

    def __post_init__(self):
        if self.edge_length <= 0:
            raise ValueError("edge_length must be positive")
        object.__setattr__(self, "reference", np.asarray(self.reference, dtype=float).reshape(3))
        for name in ("a_range", "b_range", "c_range"):
            lo, hi = getattr(self, name)
            if hi < lo:
                raise ValueError(f"{name} is empty: ({lo}, {hi}); deployment would have no stations")
            object.__setattr__(self, name, (int(lo), int(hi)))

    @property
    def index_triples(self) -> list[tuple[int, int, int]]:
        return [
            (a, b, c)
            for a in range(self.a_range[0], self.a_range[1] + 1)
            for b in range(self.b_range[0], self.b_range[1] + 1)
            for c in range(self.c_range[0], self.c_range[1] + 1)
        ]


@dataclass(frozen=True)
class BasePosition:
    """One station: its lattice index triple and Cartesian position in meters."""

    index_triple: tuple[int, int, int]
    position: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).reshape(3))


def lattice_position(edge_length: float, reference, index_triple) -> np.ndarray:
    """Closed-form Cartesian position of one lattice index triple."""
    step = np.sqrt(2.0) * edge_length
    idx = np.asarray(index_triple, dtype=float)
    return np.asarray(reference, dtype=float) + step * (INDEX_TO_CARTESIAN @ idx)


def generate_positions(spec: LatticeSpec) -> list[BasePosition]:
    """All station positions for the spec's index ranges, in index order."""
    return [
        BasePosition(triple, lattice_position(spec.edge_length, spec.reference, triple))
        for triple in spec.index_triples
    ]


def neighbor_distances(spec: LatticeSpec) -> tuple[float, float]:
    """(hex-face, square-face) center-to-center distances: (sqrt(6) R, 2 sqrt(2) R)."""
    r = spec.edge_length
    return np.sqrt(6.0) * r, 2.0 * np.sqrt(2.0) * r


def first_tier_offsets(edge_length: float) -> np.ndarray:
    """Cartesian offsets to the 14 face-adjacent cell centers, shape (14, 3).

    Eight offsets have norm sqrt(6) R (hexagonal faces) and six have norm
    2 sqrt(2) R (square faces).
    """
    steps = []
    for s in HEX_FACE_STEPS + SQUARE_FACE_STEPS:
        steps.append(s)
        steps.append(tuple(-v for v in s))
    return np.array([lattice_position(edge_length, (0.0, 0.0, 0.0), s) for s in steps])


def nearest_cell(point, positions: list[BasePosition]) -> int:
    """Index of the station whose center is closest to the point; ties go low."""
    if not positions:
        raise ValueError("position list is empty")
    pts = np.array([p.position for p in positions])
    d2 = np.sum((pts - np.asarray(point, dtype=float)) ** 2, axis=1)
    return int(np.argmin(d2))


def nearest_cell_map(points: np.ndarray, positions: list[BasePosition]) -> np.ndarray:
    """Vectorized nearest_cell over (n, 3) points; ties broken by lowest index."""
    if not positions:
        raise ValueError("position list is empty")
    pts = np.array([p.position for p in positions])
    d2 = np.sum((np.asarray(points, dtype=float)[:, None, :] - pts[None, :, :]) ** 2, axis=2)
    return np.argmin(d2, axis=1)


def centered_reference(edge_length: float, a_range, b_range, c_range, box: Box) -> np.ndarray:
    """Reference point that centers the deployment's centroid at the box center."""
    triples = [
        (a, b, c)
        for a in range(a_range[0], a_range[1] + 1)
        for b in range(b_range[0], b_range[1] + 1)
        for c in range(c_range[0], c_range[1] + 1)
    ]
    if not triples:
        raise ValueError("index ranges are empty")
    mean_offset = np.mean(
        [lattice_position(edge_length, (0.0, 0.0, 0.0), t) for t in triples], axis=0
    )
    return box.center - mean_offset


def write_positions_csv(path, positions: list[BasePosition]) -> None:
    """Export stations as CSV with columns a,b,c,x,y,z."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["a", "b", "c", "x", "y", "z"])
        for p in positions:
            writer.writerow([*p.index_triple, *(repr(float(v)) for v in p.position)])
