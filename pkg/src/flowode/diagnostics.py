"""Quantitative checks tying trajectories and posteriors to their theory.

Every check here reduces to a statistic compared against a bound, and
:func:`verdict_record` renders any of them as the JSON verdict consumed by
the command-line report: name, digest of the inputs, statistic, bound, and
whether the bound held.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np

from . import denoiser, geometry
from .integrate import Trajectory, integrate
from .measure import DiscreteMeasure, diameter, philox_rng
from .schedule import Schedule, SigmaGrid

BOUND_SLACK = 1e-12


@dataclass(frozen=True)
class SimilarityTransform:
    """x -> gamma * (O x + b) with O orthogonal within 1e-10."""

    matrix: np.ndarray
    offset: np.ndarray
    gamma: float = 1.0

    def __post_init__(self):
        o = np.asarray(self.matrix, dtype=float)
        b = np.asarray(self.offset, dtype=float)
        if o.ndim != 2 or o.shape[0] != o.shape[1]:
            raise ValueError("matrix must be square")
        if b.shape != (o.shape[0],):
            raise ValueError("offset must match the matrix dimension")
        if not (np.all(np.isfinite(o)) and np.all(np.isfinite(b))):
            raise ValueError("transform entries must be finite")
        if np.abs(o @ o.T - np.eye(o.shape[0])).max() > 1e-10:
            raise ValueError("matrix is not orthogonal within 1e-10")
        if not (self.gamma > 0.0 and math.isfinite(self.gamma)):
            raise ValueError("gamma must be positive and finite")
        o = o.copy()
        b = b.copy()
        o.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "matrix", o)
        object.__setattr__(self, "offset", b)

    @property
    def d(self) -> int:
        return int(self.matrix.shape[0])

    def apply(self, x) -> np.ndarray:
        return self.gamma * (self.matrix @ np.asarray(x, dtype=float) + self.offset)

    def apply_points(self, pts) -> np.ndarray:
        return self.gamma * (np.asarray(pts, dtype=float) @ self.matrix.T + self.offset)

    @classmethod
    def identity(cls, d: int) -> "SimilarityTransform":
        return cls(np.eye(d), np.zeros(d), 1.0)


@dataclass(frozen=True)
class RateFit:
    """Least-squares fit of log error against log sigma."""

    slope: float
    intercept: float
    r2: float
    n_used: int


@dataclass(frozen=True)
class BoundCheck:
    lhs: float
    rhs: float
    holds: bool


@dataclass(frozen=True)
class SmoothingEstimate:
    estimate: float
    bound: float
    n_samples: int
    within: bool


@dataclass(frozen=True)
class MemorizationResult:
    terminal: np.ndarray
    nn_index: int
    d_nn: float


@dataclass(frozen=True)
class SubspaceResidual:
    """Trailing-block deviation from exact decay; leading-block deviation
    from the intrinsic lower-dimensional run."""

    trailing: float
    leading: float


def w2_to_dirac(weights, points, y) -> float:
    """Quadratic transport cost from a weighted cloud to a single point."""
    w = np.asarray(weights, dtype=float)
    pts = np.asarray(points, dtype=float)
    q = np.asarray(y, dtype=float)
    if pts.ndim != 2 or w.shape != (pts.shape[0],) or q.shape != (pts.shape[1],):
        raise ValueError("need weights (n,), points (n, d), y (d,)")
    if np.any(w < 0.0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be nonnegative and finite")
    return float(np.sqrt(w @ ((pts - q) ** 2).sum(axis=1)))


def posterior_nn_bound_check(measure: DiscreteMeasure, x, sigma: float) -> BoundCheck:
    """Transport bound from the posterior to the nearest-atom point mass.

    For a unique nearest atom with prior mass A and squared-distance gap
    g, the cost to its point mass is at most
    diam * sqrt((1 - A)/A) * exp(-g / (4 sigma^2)). With a tied nearest
    set the left side becomes diam * sqrt(posterior mass off the set) and
    the exponential factor drops out. Holds is lhs <= rhs + 1e-12.
    """
    stats = geometry.point_stats(measure, x)
    ev = denoiser.denoise(measure, sigma, x)
    diam = diameter(measure.points)
    nn = list(stats.nn_indices)
    prior = float(measure.weights[nn].sum())
    rel = max((1.0 - prior) / prior, 0.0)
    if len(nn) == 1:
        lhs = w2_to_dirac(ev.weights, measure.points, measure.points[nn[0]])
        rhs = diam * math.sqrt(rel) * math.exp(-stats.gap / (4.0 * sigma * sigma))
    else:
        # sum the complement directly: 1 - sum(tied) turns the round-off of
        # normalized weights into a spurious sqrt-scale violation
        comp = np.ones(measure.n, dtype=bool)
        comp[nn] = False
        lhs = diam * math.sqrt(float(ev.weights[comp].sum()))
        rhs = diam * math.sqrt(rel)
    return BoundCheck(lhs=lhs, rhs=rhs, holds=bool(lhs <= rhs + BOUND_SLACK))


def convergence_slope(trajectory: Trajectory, reference, window: int) -> RateFit:
    """Fit the tail convergence rate toward a reference point.

    Takes the last ``window`` grid nodes, drops those within 1e-12 of the
    reference, and regresses log distance on log sigma. Fewer than 4
    usable nodes is an error: a rate from 3 points is noise.
    """
    ref = np.asarray(reference, dtype=float)
    if window < 4:
        raise ValueError("window must be at least 4")
    if window > len(trajectory):
        raise ValueError(f"window {window} exceeds the {len(trajectory)} grid nodes")
    sig = trajectory.sigmas[-window:]
    err = np.linalg.norm(trajectory.states[-window:] - ref, axis=1)
    keep = err >= 1e-12
    if int(keep.sum()) < 4:
        raise ValueError("fewer than 4 nodes with usable error above 1e-12")
    lx = np.log(sig[keep])
    ly = np.log(err[keep])
    slope, intercept = np.polyfit(lx, ly, 1)
    fitted = slope * lx + intercept
    ss_res = float(((ly - fitted) ** 2).sum())
    ss_tot = float(((ly - ly.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return RateFit(slope=float(slope), intercept=float(intercept), r2=r2, n_used=int(keep.sum()))


def equivariance_residual(
    measure: DiscreteMeasure,
    transform: SimilarityTransform,
    x0,
    schedule: Schedule,
    grid: SigmaGrid,
    method: str = "rk4",
    substeps: int = 16,
) -> float:
    """Commutation defect between transforming data and transforming paths.

    Runs the flow for the measure from x0 over ``grid``, and for the
    pushforward measure from the transformed start over the gamma-scaled
    grid; under the rescaled schedule (gamma^t alpha_t / gamma,
    gamma^t beta_t) both runs sit at the same clock values, and the
    transformed run should equal gamma^t (O x_t + alpha_t b) node for
    node in clock coordinates. Returns the largest node deviation,
    terminal snap included.
    """
    if transform.d != measure.d:
        raise ValueError("transform dimension does not match the measure")
    g = transform.gamma
    fn = denoiser.denoise_fn(measure)
    traj = integrate(fn, x0, grid, method=method, substeps=substeps, snap=True)
    pushed = DiscreteMeasure(transform.apply_points(measure.points), measure.weights)
    grid2 = SigmaGrid(grid.values * g, sigma_terminal=grid.sigma_terminal * g)
    traj2 = integrate(
        denoiser.denoise_fn(pushed), transform.apply(x0), grid2, method=method,
        substeps=substeps, snap=True,
    )
    worst = 0.0
    rows = [(float(s), traj.states[k], traj2.states[k]) for k, s in enumerate(grid.values)]
    rows.append((float(grid.sigma_terminal), traj.terminal_state, traj2.terminal_state))
    for sig, z, z2 in rows:
        t = schedule.t_of_sigma(sig)
        a = schedule.alpha(t)
        s_t = g ** t
        x_t = a * z
        xbar_t = (s_t * a / g) * z2
        target = s_t * (transform.matrix @ x_t + a * transform.offset)
        worst = max(worst, float(np.linalg.norm(xbar_t - target)))
    return worst


def subspace_residual(
    measure: DiscreteMeasure,
    x0,
    schedule: Schedule,
    grid: SigmaGrid,
    n_trailing: int,
    method: str = "rk4",
    substeps: int = 16,
) -> SubspaceResidual:
    """Exactness of the split into data coordinates and dead coordinates.

    The measure must have its last ``n_trailing`` coordinates identically
    zero. Along the flow those coordinates carry no data pull, so in clock
    coordinates they must decay as beta_t times their effective start
    (the sigma-space start block over the first node level), while the
    leading block must reproduce the intrinsic run of the projected
    measure from the projected start.
    """
    split = measure.d - int(n_trailing)
    if not (0 < split < measure.d):
        raise ValueError("n_trailing must leave at least one leading coordinate")
    if np.any(measure.points[:, split:] != 0.0):
        raise ValueError("data is not supported on the leading-coordinate subspace")
    start = np.asarray(x0, dtype=float)
    if start.shape != (measure.d,):
        raise ValueError("x0 must be a vector of the measure's dimension")

    traj = integrate(denoiser.denoise_fn(measure), start, grid, method=method,
                     substeps=substeps, snap=True)
    intrinsic = DiscreteMeasure(measure.points[:, :split], measure.weights)
    traj_in = integrate(denoiser.denoise_fn(intrinsic), start[:split], grid, method=method,
                        substeps=substeps, snap=True)

    y0 = start[split:] / float(grid.values[0])
    trailing = 0.0
    for sig, z in zip(traj.sigmas, traj.states):
        t = schedule.t_of_sigma(float(sig))
        dev = schedule.alpha(t) * z[split:] - schedule.beta(t) * y0
        trailing = max(trailing, float(np.linalg.norm(dev)))
    t_end = schedule.t_of_sigma(float(grid.sigma_terminal))
    dev = schedule.alpha(t_end) * traj.terminal_state[split:] - schedule.beta(t_end) * y0
    trailing = max(trailing, float(np.linalg.norm(dev)))

    lead = float(np.abs(traj.states[:, :split] - traj_in.states).max())
    lead = max(lead, float(np.abs(traj.terminal_state[:split] - traj_in.terminal_state).max()))
    return SubspaceResidual(trailing=trailing, leading=lead)


def smoothing_w2_estimate(smoothed, sigma: float, n_samples: int = 10000, seed: int = 0) -> SmoothingEstimate:
    """Monte Carlo transport cost of adding noise at level sigma.

    Couples X + sigma Z to X through shared X, so the cost estimate is
    sqrt(mean ||sigma Z_j||^2) with the dimension-law bound sigma*sqrt(d);
    ``within`` allows the 3/sqrt(n) relative sampling margin.
    """
    if not (sigma > 0.0 and math.isfinite(sigma)):
        raise ValueError("sigma must be positive and finite")
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    dim = smoothed.base.d
    z = philox_rng(seed, stream=2).standard_normal((n_samples, dim))
    estimate = float(sigma * np.sqrt((z ** 2).sum(axis=1).mean()))
    bound = sigma * math.sqrt(dim)
    return SmoothingEstimate(
        estimate=estimate,
        bound=bound,
        n_samples=int(n_samples),
        within=bool(estimate <= bound * (1.0 + 3.0 / math.sqrt(n_samples))),
    )


def manifold_rate_check(circle: DiscreteMeasure, x, sigmas, center=(0.0, 0.0), radius: float = 1.0):
    """Posterior spread around the circle projection, per unit sigma.

    For each level, evaluates the posterior at the probe and returns the
    transport cost to the point mass at the probe's radial projection,
    divided by sigma. The probe must be closer to the circle than half
    its radius and off the center.
    """
    if circle.d != 2:
        raise ValueError("circle data must be planar")
    q = np.asarray(x, dtype=float)
    c = np.asarray(center, dtype=float)
    r = float(np.linalg.norm(q - c))
    if r < 1e-12:
        raise ValueError("probe at the circle center has no projection")
    if abs(r - radius) >= 0.5 * radius:
        raise ValueError("probe must be within half a radius of the circle")
    proj = c + radius * (q - c) / r
    ratios = []
    for sigma in sigmas:
        if not (sigma > 0.0 and math.isfinite(sigma)):
            raise ValueError("sigma values must be positive and finite")
        ev = denoiser.denoise(circle, float(sigma), q)
        ratios.append(w2_to_dirac(ev.weights, circle.points, proj) / float(sigma))
    return np.asarray(ratios)


def memorization_run(pd, starts, grid: SigmaGrid, method: str = "rk4", substeps: int = 4):
    """Integrate the biased map from each start and report where it lands."""
    fn = denoiser.perturbed_denoise_fn(pd)
    results = []
    for start in starts:
        traj = integrate(fn, start, grid, method=method, substeps=substeps, snap=True)
        stats = geometry.point_stats(pd.measure, traj.terminal_state)
        results.append(
            MemorizationResult(
                terminal=traj.terminal_state,
                nn_index=stats.nn_indices[0],
                d_nn=stats.d1,
            )
        )
    return results


def verdict_record(name: str, inputs: dict, statistic: float, bound: float, holds: bool) -> dict:
    """JSON verdict with a stable digest of the named inputs."""
    blob = json.dumps(inputs, sort_keys=True, default=str).encode()
    return {
        "name": str(name),
        "inputs_digest": hashlib.sha256(blob).hexdigest()[:16],
        "statistic": float(statistic),
        "bound": float(bound),
        "holds": bool(holds),
    }
