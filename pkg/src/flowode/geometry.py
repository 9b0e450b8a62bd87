"""Convex-hull projection, Voronoi membership, and separation statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .measure import ClusterSpec, DiscreteMeasure

_NN_REL_TOL = 1e-12


@dataclass(frozen=True)
class HullProjection:
    """Distance to a convex hull, the nearest hull point, and its weights."""

    distance: float
    projection: np.ndarray
    coefficients: np.ndarray
    iterations: int


def _affine_min_norm(block: np.ndarray) -> np.ndarray:
    """Weights of the min-norm affine combination of the rows of block.

    Solves min ||a @ block|| subject to sum(a) = 1 with free signs by
    eliminating the constraint: a = (1 - sum(t), t) turns the problem into
    an ordinary least-squares fit over the differences to the first row,
    which lstsq solves stably even when the rows are affinely dependent.
    """
    k = block.shape[0]
    if k == 1:
        return np.ones(1)
    base = block[0]
    diff = (block[1:] - base).T
    t = np.linalg.lstsq(diff, -base, rcond=None)[0]
    return np.concatenate(([1.0 - float(t.sum())], t))


def dist_conv_hull(points, x, tol: float = 1e-10, max_iter: int = 10000) -> HullProjection:
    """Project x onto conv(points) by the min-norm-point method of Wolfe.

    Maintains an affinely independent support set, solves the affine
    least-squares subproblem on it exactly, and walks between support sets
    until no atom improves the current point by more than ``tol`` in the
    duality gap <y - x, y - p_i>. The subproblems are exact, so the result
    is accurate to round-off: points inside the hull come back with a
    distance at machine scale rather than at sqrt(tol). Raises RuntimeError
    if the support set fails to settle within ``max_iter`` major cycles.
    """
    pts = np.asarray(points, dtype=float)
    q = np.asarray(x, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 1:
        raise ValueError("points must be a nonempty (n, d) array")
    if q.shape != (pts.shape[1],):
        raise ValueError("x must be a vector of the points' dimension")
    if not (np.all(np.isfinite(pts)) and np.all(np.isfinite(q))):
        raise ValueError("points and x must be finite")
    n = pts.shape[0]

    if n == 1:
        coeff = np.array([1.0])
        return HullProjection(float(np.linalg.norm(pts[0] - q)), pts[0].copy(), coeff, 0)

    shifted = pts - q
    support = [int(np.argmin((shifted**2).sum(axis=1)))]
    weights = np.array([1.0])
    iterations = 0
    norm_prev = math.inf
    for iterations in range(1, max_iter + 1):
        y = weights @ shifted[support]
        norm_sq = float(y @ y)
        if norm_sq >= norm_prev:
            break
        norm_prev = norm_sq
        scores = shifted @ y
        j = int(np.argmin(scores))
        gap = float(norm_sq - scores[j])
        if gap <= tol or j in support:
            break
        support.append(j)
        weights = np.append(weights, 0.0)
        # inner cycle: move toward the affine optimum of the support set,
        # dropping atoms whose weight hits zero, until it is a corral
        for _ in range(len(support) + 1):
            affine = _affine_min_norm(shifted[support])
            if np.all(affine > 1e-14):
                weights = affine
                break
            blocking = affine <= 1e-14
            with np.errstate(divide="ignore", invalid="ignore"):
                steps = weights / (weights - affine)
            theta = float(np.nanmin(np.where(blocking, steps, np.inf)))
            theta = min(max(theta, 0.0), 1.0)
            weights = (1.0 - theta) * weights + theta * affine
            weights[blocking & (weights <= 1e-14)] = 0.0
            keep = weights > 0.0
            if not np.any(keep):
                support = [j]
                weights = np.array([1.0])
                break
            support = [s for s, k in zip(support, keep) if k]
            weights = weights[keep]
            weights /= weights.sum()
    else:
        raise RuntimeError(f"hull projection did not settle in {max_iter} cycles (gap {gap:.3e})")

    coeff = np.zeros(n)
    np.add.at(coeff, support, weights)
    y = coeff @ pts
    return HullProjection(float(np.linalg.norm(y - q)), y, coeff, iterations)


def in_shrunk_voronoi(measure: DiscreteMeasure, i: int, eps: float, x) -> bool:
    """Membership of x in the eps-shrunk Voronoi cell of atom i.

    The cell keeps the points whose squared distance to atom i beats every
    competitor by at least eps^2; eps = 0 recovers the ordinary closed cell.
    """
    if not (0 <= i < measure.n):
        raise ValueError(f"atom index {i} out of range")
    if not (eps >= 0.0 and math.isfinite(eps)):
        raise ValueError("eps must be nonnegative and finite")
    q = np.asarray(x, dtype=float)
    if q.shape != (measure.d,):
        raise ValueError("x must be a vector of the measure's dimension")
    sq = ((measure.points - q) ** 2).sum(axis=1)
    own = sq[i]
    others = np.delete(sq, i)
    return bool(np.all(own <= others - eps * eps))


@dataclass(frozen=True)
class PointStats:
    """Nearest-atom statistics of a query point.

    nn_indices holds every argmin of the distance within 1e-12 relative
    tolerance on squared distances; gap is the difference of the two
    smallest squared distances, so gap = 0 exactly when the nearest atom
    is not unique.
    """

    nn_indices: tuple
    d1: float
    d2: float
    gap: float


def point_stats(measure: DiscreteMeasure, x) -> PointStats:
    """Nearest and second-nearest distances of x to the atoms; needs n >= 2."""
    if measure.n < 2:
        raise ValueError("point statistics need at least two atoms")
    q = np.asarray(x, dtype=float)
    if q.shape != (measure.d,):
        raise ValueError("x must be a vector of the measure's dimension")
    sq = ((measure.points - q) ** 2).sum(axis=1)
    order = np.argsort(sq, kind="stable")
    s1, s2 = float(sq[order[0]]), float(sq[order[1]])
    ties = np.nonzero(sq <= s1 * (1.0 + _NN_REL_TOL))[0] if s1 > 0.0 else np.nonzero(sq == 0.0)[0]
    return PointStats(
        nn_indices=tuple(int(j) for j in ties),
        d1=math.sqrt(s1),
        d2=math.sqrt(s2),
        gap=s2 - s1,
    )


def separation(measure: DiscreteMeasure, i: int) -> float:
    """Distance from atom i to its nearest other atom; needs n >= 2."""
    if measure.n < 2:
        raise ValueError("separation needs at least two atoms")
    if not (0 <= i < measure.n):
        raise ValueError(f"atom index {i} out of range")
    sq = ((measure.points - measure.points[i]) ** 2).sum(axis=1)
    sq[i] = np.inf
    return float(np.sqrt(sq.min()))


@dataclass(frozen=True)
class LocalClusterCheck:
    """Outcome of the isolation test of a cluster within its measure."""

    diameter: float
    weight: float
    worst_margin: float
    holds: bool


def validate_local_cluster(measure: DiscreteMeasure, spec: ClusterSpec) -> LocalClusterCheck:
    """Check that every outside atom sits farther than 2*diam(S) from conv(S).

    worst_margin is min over outside atoms of dist(atom, conv(S)) - 2*diam(S);
    the cluster qualifies as local exactly when that margin is positive.
    """
    inside = set(spec.indices)
    outside = [j for j in range(measure.n) if j not in inside]
    if not outside:
        raise ValueError("cluster covers the whole measure; nothing to isolate it from")
    sub = measure.points[list(spec.indices)]
    margins = [
        dist_conv_hull(sub, measure.points[j]).distance - 2.0 * spec.diameter for j in outside
    ]
    worst = float(min(margins))
    return LocalClusterCheck(
        diameter=spec.diameter, weight=spec.weight, worst_margin=worst, holds=worst > 0.0
    )
