"""Weighted point clouds, their generators, and serialization.

All data in this package is a finitely supported probability measure: an
(n, d) array of atoms with strictly positive weights summing to one. The
generators cover the desk-scale datasets used by the verification suites:
a three-cluster disk mixture in the plane, a regular polygon on a circle,
and the canonical two-atom set {-1, +1} on the line.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

_WEIGHT_SUM_TOL = 1e-12

# (center, radius, count) for the planar disk mixture; 144 points total.
THREE_CLUSTER_SHAPE = (
    ((1.0, 2.5), 0.4, 80),
    ((2.0, 1.5), 0.3, 44),
    ((3.0, 3.0), 0.2, 20),
)


def philox_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator; distinct streams never overlap for one seed."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(stream,))))


@dataclass(frozen=True)
class DiscreteMeasure:
    """Immutable weighted point cloud.

    points : (n, d) float array, all entries finite.
    weights : (n,) float array, strictly positive, summing to 1 within 1e-12.
    """

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ValueError("points must be a nonempty (n, d) array")
        if w.shape != (pts.shape[0],):
            raise ValueError("weights must be a 1-D array matching the point count")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        if not np.all(np.isfinite(w)) or np.any(w <= 0.0):
            raise ValueError("weights must be positive and finite")
        if abs(float(w.sum()) - 1.0) > _WEIGHT_SUM_TOL:
            raise ValueError(f"weights must sum to 1 within {_WEIGHT_SUM_TOL}, got {w.sum()!r}")
        pts = pts.copy()
        w = w.copy()
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return int(self.points.shape[0])

    @property
    def d(self) -> int:
        return int(self.points.shape[1])

    def mean(self) -> np.ndarray:
        return self.weights @ self.points


@dataclass(frozen=True)
class SmoothedMeasure:
    """A discrete base measure convolved with an isotropic Gaussian of scale delta."""

    base: DiscreteMeasure
    delta: float

    def __post_init__(self):
        if not (self.delta >= 0.0 and math.isfinite(self.delta)):
            raise ValueError("delta must be nonnegative and finite")


@dataclass(frozen=True)
class ClusterSpec:
    """A subset of a measure's atoms with its cached diameter and weight."""

    indices: tuple
    diameter: float
    weight: float


def cluster_spec(measure: DiscreteMeasure, indices) -> ClusterSpec:
    """Build a :class:`ClusterSpec`, validating and caching its geometry."""
    idx = tuple(int(i) for i in indices)
    if len(idx) == 0:
        raise ValueError("cluster must contain at least one index")
    if len(set(idx)) != len(idx):
        raise ValueError("cluster indices must be distinct")
    if min(idx) < 0 or max(idx) >= measure.n:
        raise ValueError("cluster index out of range")
    sub = measure.points[list(idx)]
    return ClusterSpec(idx, diameter(sub), float(measure.weights[list(idx)].sum()))


def diameter(points) -> float:
    """Largest pairwise distance; 0 for a single point."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 1:
        raise ValueError("points must be a nonempty (n, d) array")
    if pts.shape[0] == 1:
        return 0.0
    sq = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=-1)
    return float(np.sqrt(sq.max()))


@dataclass(frozen=True)
class MeasureSummary:
    n: int
    d: int
    mean: tuple
    diameter: float
    second_moment: float


def summary(measure: DiscreteMeasure) -> MeasureSummary:
    """Size, dimension, mean, diameter, and second moment about the origin."""
    mu = measure.mean()
    moment = float(measure.weights @ (measure.points**2).sum(axis=1))
    return MeasureSummary(
        n=measure.n,
        d=measure.d,
        mean=tuple(float(v) for v in mu),
        diameter=diameter(measure.points),
        second_moment=moment,
    )


def gen_three_clusters(seed: int = 7) -> DiscreteMeasure:
    """Sample the 144-point planar disk mixture, uniform weights.

    Each disk is sampled uniformly by area: angle uniform on [0, 2*pi) and
    radius R*sqrt(u), drawn from the counter-based generator so a seed pins
    the dataset bit for bit.
    """
    rng = philox_rng(seed)
    blocks = []
    for (cx, cy), radius, count in THREE_CLUSTER_SHAPE:
        theta = rng.uniform(0.0, 2.0 * np.pi, size=count)
        r = radius * np.sqrt(rng.uniform(size=count))
        blocks.append(np.column_stack((cx + r * np.cos(theta), cy + r * np.sin(theta))))
    pts = np.vstack(blocks)
    return DiscreteMeasure(pts, np.full(len(pts), 1.0 / len(pts)))


def gen_circle(n: int = 2048, radius: float = 1.0) -> DiscreteMeasure:
    """n equally spaced points on the origin-centered circle, uniform weights."""
    if n < 3:
        raise ValueError("n must be at least 3")
    if not (radius > 0.0 and math.isfinite(radius)):
        raise ValueError("radius must be positive and finite")
    theta = 2.0 * np.pi * np.arange(n) / n
    pts = radius * np.column_stack((np.cos(theta), np.sin(theta)))
    return DiscreteMeasure(pts, np.full(n, 1.0 / n))


def gen_two_point() -> DiscreteMeasure:
    """The two-atom measure on {-1, +1} in one dimension, weights 1/2 each."""
    return DiscreteMeasure(np.array([[-1.0], [1.0]]), np.array([0.5, 0.5]))


# -- serialization -----------------------------------------------------------

def save_measure_csv(measure: DiscreteMeasure, path) -> None:
    """Write rows ``w,x0,...,x{d-1}`` with a header, full float precision."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["w"] + [f"x{j}" for j in range(measure.d)])
        for w, row in zip(measure.weights, measure.points):
            writer.writerow([repr(float(w))] + [repr(float(v)) for v in row])


def load_measure_csv(path) -> DiscreteMeasure:
    """Inverse of :func:`save_measure_csv`; the header row is mandatory."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) < 2 or header[0] != "w":
            raise ValueError(f"expected header w,x0,..., got {header}")
        if header[1:] != [f"x{j}" for j in range(len(header) - 1)]:
            raise ValueError(f"expected header w,x0,..., got {header}")
        rows = [[float(v) for v in row] for row in reader if row]
    if not rows:
        raise ValueError("measure file has no data rows")
    arr = np.asarray(rows, dtype=float)
    if arr.shape[1] != len(header):
        raise ValueError("row length does not match header")
    return DiscreteMeasure(arr[:, 1:], arr[:, 0])


def measure_to_json(measure: DiscreteMeasure) -> dict:
    """JSON document form: {d, n, points, weights}."""
    return {
        "d": measure.d,
        "n": measure.n,
        "points": [[float(v) for v in row] for row in measure.points],
        "weights": [float(w) for w in measure.weights],
    }


def measure_from_json(doc: dict) -> DiscreteMeasure:
    m = DiscreteMeasure(np.asarray(doc["points"], dtype=float), np.asarray(doc["weights"], dtype=float))
    if m.n != doc.get("n") or m.d != doc.get("d"):
        raise ValueError("n/d fields disagree with the points array")
    return m


def save_measure_json(measure: DiscreteMeasure, path) -> None:
    with open(path, "w") as fh:
        json.dump(measure_to_json(measure), fh, indent=1)
        fh.write("\n")


def load_measure_json(path) -> DiscreteMeasure:
    with open(path) as fh:
        return measure_from_json(json.load(fh))
