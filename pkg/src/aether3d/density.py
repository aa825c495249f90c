"""Spatial density estimation of aerial users from sparse location reports.

Users report positions once per window; a Gaussian kernel density estimate
with per-axis bandwidths (variance-like, m^2) models the spatial probability
density over the service box.  Each kernel is

    (2*pi)^(-3/2) (hx hy hz)^(-1/2) exp(-(x-X)^2/(2 hx) - (y-Y)^2/(2 hy) - (z-Z)^2/(2 hz))

and the mixture is renormalized so it integrates to one over the box (the
kernels' mass outside the box is folded back in analytically).  Bandwidths are
selected by exact leave-one-out cross-validation; estimates are scored against
a known truth by mean integrated squared error.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import ndtr

from .geometry import Box, VoxelGrid

_GAUSS3_NORM = (2.0 * np.pi) ** -1.5


def _rng(seed_or_rng) -> np.random.Generator:
    return np.random.default_rng(seed_or_rng)


@dataclass(frozen=True)
class SampleSet:
    """Reported user locations (one row per user) within one report window."""

    points: np.ndarray
    window: float = 0.0  # report interval in seconds, informational

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError("points must have shape (n, 3)")
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class TruncatedGaussianSpec:
    """Axis-aligned Gaussian truncated to a box; ground truth for synthetic runs."""

    mean: np.ndarray
    std: np.ndarray
    box: Box
    drift_rate: float = 0.0  # meters per minute added to every mean component

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=float).reshape(3))
        object.__setattr__(self, "std", np.asarray(self.std, dtype=float).reshape(3))
        if np.any(self.std <= 0):
            raise ValueError("std must be positive componentwise")

    def drifted(self, minutes: float) -> "TruncatedGaussianSpec":
        """Distribution after `minutes` of drift: every mean component grows by rate*minutes."""
        return replace(self, mean=self.mean + self.drift_rate * minutes)

    def _axis_pdf(self, axis: int, coords: np.ndarray) -> np.ndarray:
        mu, sigma = self.mean[axis], self.std[axis]
        lo, hi = self.box.lo[axis], self.box.hi[axis]
        mass = ndtr((hi - mu) / sigma) - ndtr((lo - mu) / sigma)
        z = (coords - mu) / sigma
        dens = np.exp(-0.5 * z * z) / (sigma * np.sqrt(2.0 * np.pi) * mass)
        return np.where((coords >= lo) & (coords <= hi), dens, 0.0)

    def pdf(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.ones(pts.shape[0])
        for axis in range(3):
            out *= self._axis_pdf(axis, pts[:, axis])
        return out if np.asarray(points).ndim == 2 else out[0]

    def grid_pdf(self, grid: VoxelGrid) -> np.ndarray:
        """Density at all voxel centers, flat-index order (separable product)."""
        fx = self._axis_pdf(0, grid.axis_centers(0))
        fy = self._axis_pdf(1, grid.axis_centers(1))
        fz = self._axis_pdf(2, grid.axis_centers(2))
        return np.einsum("x,y,z->xyz", fx, fy, fz).ravel()


@dataclass(frozen=True)
class UniformDensity:
    """Uniform density over a box; handy baseline and test fixture."""

    box: Box

    def pdf(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.where(self.box.contains(pts), 1.0 / self.box.volume, 0.0)
        return out if np.asarray(points).ndim == 2 else out[0]

    def grid_pdf(self, grid: VoxelGrid) -> np.ndarray:
        return np.full(grid.n_voxels, 1.0 / self.box.volume)


@dataclass(frozen=True)
class DensityModel:
    """Fitted KDE: samples, per-axis bandwidths (m^2), and box renormalization."""

    samples: SampleSet
    bandwidths: np.ndarray
    box: Box
    normalization: float

    def __post_init__(self):
        object.__setattr__(self, "bandwidths", np.asarray(self.bandwidths, dtype=float).reshape(3))

    def pdf(self, points: np.ndarray) -> np.ndarray:
        return kde_evaluate(self, points)

    def grid_pdf(self, grid: VoxelGrid) -> np.ndarray:
        """Density at all voxel centers, flat-index order.

        Exploits kernel separability on the product grid: per-axis kernel
        tables are combined with one einsum instead of evaluating every
        (voxel, sample) pair.
        """
        pts = self.samples.points
        tables = []
        for axis in range(3):
            coords = grid.axis_centers(axis)
            h = self.bandwidths[axis]
            d = coords[:, None] - pts[None, :, axis]
            tables.append(np.exp(-0.5 * d * d / h))
        mix = np.einsum("xi,yi,zi->xyz", *tables, optimize=True).ravel()
        scale = self.normalization * _GAUSS3_NORM / (len(self.samples) * np.sqrt(np.prod(self.bandwidths)))
        return scale * mix


def fit_kde(samples: SampleSet, bandwidths, box: Box) -> DensityModel:
    """Build a box-renormalized KDE with the given bandwidth triple.

    The renormalization constant is exact: each kernel's mass inside the box
    is a product of one-dimensional Gaussian CDF differences.
    """
    h = np.asarray(bandwidths, dtype=float).reshape(3)
    if np.any(h <= 0):
        raise ValueError("bandwidths must be positive")
    if len(samples) < 1:
        raise ValueError("need at least one sample")
    if not np.all(box.contains(samples.points)):
        raise ValueError("samples must lie inside the domain box")
    sigma = np.sqrt(h)
    mass_per_axis = ndtr((box.hi - samples.points) / sigma) - ndtr((box.lo - samples.points) / sigma)
    mass = float(np.mean(np.prod(mass_per_axis, axis=1)))
    if mass <= 0.0:
        raise ValueError("kernel mixture has zero mass inside the box")
    return DensityModel(samples=samples, bandwidths=h, box=box, normalization=1.0 / mass)


def kde_evaluate(model: DensityModel, points: np.ndarray, chunk: int = 8192) -> np.ndarray:
    """Renormalized mixture density at arbitrary points ((n, 3) or (3,))."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    samples = model.samples.points
    h = model.bandwidths
    scale = model.normalization * _GAUSS3_NORM / (len(model.samples) * np.sqrt(np.prod(h)))
    out = np.empty(pts.shape[0])
    for start in range(0, pts.shape[0], chunk):
        block = pts[start : start + chunk]
        quad = np.zeros((block.shape[0], samples.shape[0]))
        for axis in range(3):
            d = block[:, axis, None] - samples[None, :, axis]
            quad += d * d / (2.0 * h[axis])
        out[start : start + block.shape[0]] = scale * np.exp(-quad).sum(axis=1)
    return out if np.asarray(points).ndim == 2 else out[0]


def loocv_score(samples: SampleSet, bandwidths) -> float:
    """Negative mean log-likelihood of each sample under the model fit without it.

    Returns +inf when some held-out point has zero leave-one-out density
    (the bandwidth is rejected).
    """
    if len(samples) < 2:
        raise ValueError("leave-one-out needs at least two samples")
    h = np.asarray(bandwidths, dtype=float).reshape(3)
    if np.any(h <= 0):
        raise ValueError("bandwidths must be positive")
    pts = samples.points
    n = len(samples)
    quad = np.zeros((n, n))
    for axis in range(3):
        d = pts[:, axis, None] - pts[None, :, axis]
        quad += d * d / (2.0 * h[axis])
    kernels = np.exp(-quad) * (_GAUSS3_NORM / np.sqrt(np.prod(h)))
    np.fill_diagonal(kernels, 0.0)
    held_out = kernels.sum(axis=1) / (n - 1)
    if np.any(held_out <= 0.0):
        return float("inf")
    return float(-np.mean(np.log(held_out)))


def default_bandwidth_grid(low: float = 1e2, high: float = 1e6, count: int = 15) -> list[np.ndarray]:
    """Symmetric (h, h, h) candidates, log-spaced; units m^2."""
    return [np.array([h, h, h]) for h in np.geomspace(low, high, count)]


def select_bandwidth(samples: SampleSet, candidates, box: Box) -> DensityModel:
    """Fit with the candidate minimizing the LOOCV score; ties keep list order."""
    candidates = list(candidates)
    if not candidates:
        raise ValueError("candidate list is empty")
    scores = [loocv_score(samples, h) for h in candidates]
    best = int(np.argmin(scores))
    if not np.isfinite(scores[best]):
        raise ValueError("every candidate bandwidth was rejected by cross-validation")
    return fit_kde(samples, candidates[best], box)


def mise(estimate, truth, mc_points: int = 20000, rng=0) -> float:
    """Monte-Carlo estimate of the integrated squared error over the truth's box.

    One call scores one fitted estimate; averaging over refitted sample sets
    gives the mean integrated squared error.  `estimate` and `truth` only need
    a .pdf(points) method.
    """
    box = truth.box
    gen = _rng(rng)
    u = gen.uniform(box.lo, box.hi, size=(int(mc_points), 3))
    diff = np.asarray(estimate.pdf(u)) - np.asarray(truth.pdf(u))
    return float(box.volume * np.mean(diff * diff))


def integrated_squared_error(estimate, truth, grid: VoxelGrid) -> float:
    """Midpoint-quadrature integrated squared error on a voxel grid."""
    fe = estimate.grid_pdf(grid) if hasattr(estimate, "grid_pdf") else estimate.pdf(grid.centers)
    ft = truth.grid_pdf(grid) if hasattr(truth, "grid_pdf") else truth.pdf(grid.centers)
    return grid.integrate((fe - ft) ** 2)


def sample_truncated_gaussian(spec: TruncatedGaussianSpec, count: int, rng=0) -> SampleSet:
    """Draw i.i.d. points by rejection of the componentwise Gaussian against the box."""
    if count < 1:
        raise ValueError("count must be positive")
    gen = _rng(rng)
    accepted = []
    remaining = count
    while remaining > 0:
        batch = max(2 * remaining, 128)
        draw = gen.normal(spec.mean, spec.std, size=(batch, 3))
        keep = draw[spec.box.contains(draw)]
        accepted.append(keep[:remaining])
        remaining -= len(keep[:remaining])
    return SampleSet(points=np.vstack(accepted))


def load_samples_csv(path, window: float = 0.0) -> SampleSet:
    """Read samples from a CSV with (at least) columns x,y,z in meters."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"x", "y", "z"} <= set(reader.fieldnames):
            raise ValueError(f"{path}: sample CSV needs x,y,z columns")
        rows = [(float(r["x"]), float(r["y"]), float(r["z"])) for r in reader]
    if not rows:
        raise ValueError(f"{path}: sample CSV is empty")
    return SampleSet(points=np.array(rows), window=window)


def model_to_json(model: DensityModel) -> str:
    payload = {
        "samples": model.samples.points.tolist(),
        "window": model.samples.window,
        "bandwidths": model.bandwidths.tolist(),
        "box": {"lo": model.box.lo.tolist(), "hi": model.box.hi.tolist()},
        "normalization": model.normalization,
    }
    return json.dumps(payload, indent=2, sort_keys=True)


def model_from_json(text: str) -> DensityModel:
    payload = json.loads(text)
    return DensityModel(
        samples=SampleSet(np.array(payload["samples"]), window=payload.get("window", 0.0)),
        bandwidths=np.array(payload["bandwidths"]),
        box=Box(payload["box"]["lo"], payload["box"]["hi"]),
        normalization=float(payload["normalization"]),
    )
