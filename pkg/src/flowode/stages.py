"""Closed-form stage thresholds and per-node trajectory reports.

A trajectory over a descending sigma grid passes through three regimes,
each with a computable entry threshold and a decay envelope:

* mean attraction: above ``sigma_init`` the distance to the data mean
  contracts like ``(sigma^2 + delta^2)^((1 - zeta)/2)``;
* cluster absorption: below ``sigma_cluster`` an isolated cluster S traps
  the state in a shrunken neighborhood of conv(S), the denoiser staying
  within an exponentially small band of that hull;
* atom absorption: below ``sigma_terminal`` the shrunken Voronoi cell of a
  single atom becomes forward-invariant and the state collapses onto it.

The threshold functions are pure float arithmetic; ``stage_report`` ties
them to a concrete trajectory and measure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import geometry
from .integrate import Trajectory
from .measure import ClusterSpec, DiscreteMeasure, diameter


class InitThreshold(NamedTuple):
    """Raw mean-attraction threshold and its smoothing-adjusted form."""

    value: float
    applicability: float


def _check_weight(weight: float) -> None:
    if not (0.0 < weight < 1.0):
        raise ValueError(f"cluster weight must lie in (0, 1), got {weight}")


def sigma_init(diam: float, r0: float, zeta: float, delta: float = 0.0) -> InitThreshold:
    """Noise level above which the mean-attraction envelope applies.

    value = sqrt(2 * r0 * diam / log(1 + zeta * r0 / diam)); the
    applicability threshold of a delta-smoothed measure inflates it to
    sqrt(value^2 + delta^2).
    """
    if not (diam > 0.0 and math.isfinite(diam)):
        raise ValueError("diam must be positive and finite")
    if not (r0 > 0.0 and math.isfinite(r0)):
        raise ValueError("r0 must be positive and finite")
    if not (0.0 < zeta < 1.0):
        raise ValueError(f"zeta must lie in (0, 1), got {zeta}")
    if not (delta >= 0.0 and math.isfinite(delta)):
        raise ValueError("delta must be nonnegative and finite")
    value = math.sqrt(2.0 * r0 * diam / math.log1p(zeta * r0 / diam))
    return InitThreshold(value, math.hypot(value, delta))


def mean_bound(r0: float, sigma1: float, sigma: float, zeta: float, delta: float = 0.0) -> float:
    """Envelope of the distance to the mean at sigma, started at r0 at sigma1.

    r0 * ((sigma^2 + delta^2) / (sigma1^2 + delta^2))^((1 - zeta) / 2);
    equals r0 at sigma = sigma1 and decays as sigma drops.
    """
    if not (r0 > 0.0 and math.isfinite(r0)):
        raise ValueError("r0 must be positive and finite")
    if not (0.0 < sigma <= sigma1 and math.isfinite(sigma1)):
        raise ValueError("need 0 < sigma <= sigma1 < inf")
    if not (0.0 < zeta < 1.0):
        raise ValueError(f"zeta must lie in (0, 1), got {zeta}")
    if not (delta >= 0.0 and math.isfinite(delta)):
        raise ValueError("delta must be nonnegative and finite")
    ratio = (sigma * sigma + delta * delta) / (sigma1 * sigma1 + delta * delta)
    return r0 * ratio ** (0.5 * (1.0 - zeta))


def sigma_cluster(cluster_diam: float, eps: float, weight: float, diam_omega: float) -> float:
    """Absorption threshold of the eps-shrunken hull neighborhood of a cluster.

    With C = (D/2 - eps) / (diam_omega * sqrt((1 - a)/a)) for a cluster of
    diameter D and weight a, returns sqrt(-3 D eps / (2 log C)) when C < 1
    and +inf otherwise (the neighborhood is absorbing at every level).
    """
    _check_cluster_args(cluster_diam, eps, weight, diam_omega)
    c = (0.5 * cluster_diam - eps) / (diam_omega * math.sqrt((1.0 - weight) / weight))
    if c >= 1.0:
        return math.inf
    return math.sqrt(-3.0 * cluster_diam * eps / (2.0 * math.log(c)))


def cluster_denoiser_bound(
    cluster_diam: float, eps: float, weight: float, diam_omega: float, sigma: float
) -> float:
    """Band around conv(S) containing the denoiser inside the neighborhood.

    diam_omega * sqrt((1 - a)/a) * exp(-3 D eps / (2 sigma^2)); equals
    D/2 - eps exactly at sigma = sigma_cluster(D, eps, a, diam_omega).
    """
    _check_cluster_args(cluster_diam, eps, weight, diam_omega)
    if not (sigma > 0.0 and math.isfinite(sigma)):
        raise ValueError("sigma must be positive and finite")
    scale = diam_omega * math.sqrt((1.0 - weight) / weight)
    return scale * math.exp(-3.0 * cluster_diam * eps / (2.0 * sigma * sigma))


def _check_cluster_args(cluster_diam: float, eps: float, weight: float, diam_omega: float) -> None:
    if not (cluster_diam > 0.0 and math.isfinite(cluster_diam)):
        raise ValueError("cluster diameter must be positive and finite")
    if not (0.0 < eps < 0.5 * cluster_diam):
        raise ValueError(f"eps must lie in (0, D/2) = (0, {0.5 * cluster_diam}), got {eps}")
    _check_weight(weight)
    if not (diam_omega > 0.0 and math.isfinite(diam_omega)):
        raise ValueError("diam_omega must be positive and finite")


def sigma_terminal(sep: float, eps: float, weight: float, diam_omega: float) -> float:
    """Absorption threshold of an atom's eps-shrunken Voronoi cell.

    With C = (2 sep / (sep^2 - eps^2)) * sqrt((1 - a)/a) * diam_omega,
    returns (eps / 2) / sqrt(log C) when C > 1 and +inf otherwise.
    """
    if not (sep > 0.0 and math.isfinite(sep)):
        raise ValueError("separation must be positive and finite")
    if not (0.0 < eps < sep):
        raise ValueError(f"eps must lie in (0, sep) = (0, {sep}), got {eps}")
    _check_weight(weight)
    if not (diam_omega > 0.0 and math.isfinite(diam_omega)):
        raise ValueError("diam_omega must be positive and finite")
    c = 2.0 * sep / (sep * sep - eps * eps) * math.sqrt((1.0 - weight) / weight) * diam_omega
    if c <= 1.0:
        return math.inf
    return 0.5 * eps / math.sqrt(math.log(c))


def hull_decay_bound(d1: float, sigma1: float, sigma: float) -> float:
    """Linear-in-sigma envelope of the distance to the support hull."""
    if not (d1 >= 0.0 and math.isfinite(d1)):
        raise ValueError("d1 must be nonnegative and finite")
    if not (0.0 < sigma <= sigma1 and math.isfinite(sigma1)):
        raise ValueError("need 0 < sigma <= sigma1 < inf")
    return d1 * sigma / sigma1


# -- trajectory reports ------------------------------------------------------

@dataclass(frozen=True)
class ClusterThreshold:
    indices: tuple
    diameter: float
    weight: float
    eps: float
    sigma_cluster: float
    nearest_node: int | None


@dataclass(frozen=True)
class TerminalThreshold:
    index: int
    separation: float
    eps: float
    sigma_terminal: float
    nearest_node: int | None


@dataclass(frozen=True)
class StageThresholds:
    """All thresholds evaluated for one trajectory against one measure."""

    sigma_init: float
    applicability: float
    r0: float
    zeta: float
    delta: float
    nearest_node: int | None
    clusters: tuple
    terminal: TerminalThreshold | None


def _nearest_node(sigmas: np.ndarray, threshold: float):
    if not math.isfinite(threshold):
        return None
    return int(np.argmin(np.abs(sigmas - threshold)))


def stage_thresholds(
    trajectory: Trajectory,
    measure: DiscreteMeasure,
    clusters=(),
    zeta: float = 0.5,
    cluster_eps=None,
    terminal_eps: float | None = None,
    delta: float = 0.0,
) -> StageThresholds:
    """Evaluate every stage threshold for a trajectory.

    Cluster eps values default to D/4 per cluster; the terminal threshold
    is taken at the atom nearest the trajectory's end (snap output when
    present, last node otherwise) with eps defaulting to a third of that
    atom's separation.
    """
    diam = diameter(measure.points)
    r0 = float(np.linalg.norm(trajectory.states[0] - measure.mean()))
    if diam > 0.0 and r0 > 0.0:
        init = sigma_init(diam, r0, zeta, delta)
    else:
        # point mass, or a start sitting on the mean: the formula's limit is
        # zero, meaning the attraction envelope applies at every level
        init = InitThreshold(0.0, float(delta))
    sigmas = trajectory.sigmas

    if cluster_eps is None:
        cluster_eps = [0.25 * spec.diameter for spec in clusters]
    if len(cluster_eps) != len(clusters):
        raise ValueError("need one eps per cluster")
    cluster_rows = []
    for spec, eps in zip(clusters, cluster_eps):
        thr = sigma_cluster(spec.diameter, eps, spec.weight, diam)
        cluster_rows.append(
            ClusterThreshold(
                indices=spec.indices,
                diameter=spec.diameter,
                weight=spec.weight,
                eps=float(eps),
                sigma_cluster=thr,
                nearest_node=_nearest_node(sigmas, thr),
            )
        )

    terminal = None
    if measure.n >= 2:
        end = trajectory.terminal_state if trajectory.terminal_state is not None else trajectory.states[-1]
        idx = geometry.point_stats(measure, end).nn_indices[0]
        sep = geometry.separation(measure, idx)
        eps_t = terminal_eps if terminal_eps is not None else sep / 3.0
        thr = sigma_terminal(sep, eps_t, float(measure.weights[idx]), diam)
        terminal = TerminalThreshold(
            index=idx,
            separation=sep,
            eps=float(eps_t),
            sigma_terminal=thr,
            nearest_node=_nearest_node(sigmas, thr),
        )

    return StageThresholds(
        sigma_init=init.value,
        applicability=init.applicability,
        r0=r0,
        zeta=float(zeta),
        delta=float(delta),
        nearest_node=_nearest_node(sigmas, init.applicability),
        clusters=tuple(cluster_rows),
        terminal=terminal,
    )


def _jsonable(value):
    if isinstance(value, float) and math.isinf(value):
        return "inf"
    return value


def stage_report(
    trajectory: Trajectory,
    measure: DiscreteMeasure,
    clusters=(),
    zeta: float = 0.5,
    cluster_eps=None,
    terminal_eps: float | None = None,
    delta: float = 0.0,
) -> dict:
    """JSON-ready report: thresholds plus per-node distance diagnostics.

    Infinite thresholds serialize as the string "inf". Each node row
    carries the distance to the mean, to the support hull, to every
    requested cluster hull, and to the nearest atom.
    """
    thr = stage_thresholds(
        trajectory, measure, clusters, zeta=zeta, cluster_eps=cluster_eps,
        terminal_eps=terminal_eps, delta=delta,
    )
    mean = measure.mean()
    cluster_pts = [measure.points[list(spec.indices)] for spec in clusters]
    per_node = []
    for k, (sig, z) in enumerate(zip(trajectory.sigmas, trajectory.states)):
        stats = geometry.point_stats(measure, z) if measure.n >= 2 else None
        per_node.append(
            {
                "step": k,
                "sigma": float(sig),
                "d_mean": float(np.linalg.norm(z - mean)),
                "d_hull": geometry.dist_conv_hull(measure.points, z).distance,
                "d_cluster": [geometry.dist_conv_hull(pts, z).distance for pts in cluster_pts],
                "d_nn": stats.d1 if stats else float(np.linalg.norm(z - measure.points[0])),
                "nn_index": stats.nn_indices[0] if stats else 0,
            }
        )
    doc = {
        "thresholds": {
            "sigma_init": thr.sigma_init,
            "applicability": thr.applicability,
            "r0": thr.r0,
            "zeta": thr.zeta,
            "delta": thr.delta,
            "nearest_node": thr.nearest_node,
            "clusters": [
                {
                    "indices": list(row.indices),
                    "diameter": row.diameter,
                    "weight": row.weight,
                    "eps": row.eps,
                    "sigma_cluster": _jsonable(row.sigma_cluster),
                    "nearest_node": row.nearest_node,
                }
                for row in thr.clusters
            ],
            "terminal": None
            if thr.terminal is None
            else {
                "index": thr.terminal.index,
                "separation": thr.terminal.separation,
                "eps": thr.terminal.eps,
                "sigma_terminal": _jsonable(thr.terminal.sigma_terminal),
                "nearest_node": thr.terminal.nearest_node,
            },
        },
        "per_node": per_node,
    }
    return doc
