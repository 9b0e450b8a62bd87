"""Closed-form posterior-mean denoisers over discrete and smoothed measures.

For a discrete measure with atoms x_i and weights a_i, the posterior weights
at noise level sigma and query x are

    w_i(x) = softmax_i( log a_i - ||x - x_i||^2 / (2 sigma^2) )

and the denoiser is the posterior mean m(sigma, x) = sum_i w_i(x) x_i. Its
Jacobian is the posterior covariance divided by sigma^2. Convolving the
measure with an isotropic Gaussian of scale delta changes nothing but the
bookkeeping: the smoothed denoiser is a sigma-dependent blend of the query
with the base denoiser evaluated at sqrt(sigma^2 + delta^2).

All weight arithmetic stays in log space; normalized weights below 1e-300
are flushed to exact zero so that far atoms cannot reintroduce rounding
noise at tiny sigma.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .measure import DiscreteMeasure, SmoothedMeasure

WEIGHT_FLUSH = 1e-300


@dataclass(frozen=True)
class DenoiserEval:
    """One denoiser evaluation: the mean, its weights, and their logs."""

    m: np.ndarray
    weights: np.ndarray
    log_weights: np.ndarray
    sigma: float


def _check_query(measure: DiscreteMeasure, sigma: float, x) -> np.ndarray:
    if not (sigma > 0.0 and math.isfinite(sigma)):
        raise ValueError(f"sigma must be positive and finite, got {sigma}")
    q = np.asarray(x, dtype=float)
    if q.shape != (measure.d,):
        raise ValueError(f"query must have shape ({measure.d},), got {q.shape}")
    if not np.all(np.isfinite(q)):
        raise ValueError("query must be finite")
    return q


def posterior_log_weights(measure: DiscreteMeasure, sigma: float, x) -> np.ndarray:
    """Normalized log posterior weights log w_i(x); always finite sums."""
    q = _check_query(measure, sigma, x)
    diff = measure.points - q
    sq = np.einsum("ij,ij->i", diff, diff)
    lw = np.log(measure.weights) - sq / (2.0 * sigma * sigma)
    return lw - logsumexp(lw)


def denoise(measure: DiscreteMeasure, sigma: float, x) -> DenoiserEval:
    """Posterior mean of the measure given the noisy query x at level sigma."""
    lw = posterior_log_weights(measure, sigma, x)
    w = np.exp(lw)
    w[w < WEIGHT_FLUSH] = 0.0
    return DenoiserEval(m=w @ measure.points, weights=w, log_weights=lw, sigma=float(sigma))


def denoise_smoothed(smoothed: SmoothedMeasure, sigma: float, x) -> DenoiserEval:
    """Denoiser of the Gaussian-smoothed measure.

    With sigma_b = sqrt(sigma^2 + delta^2),

        m(sigma, x) = x + (sigma^2 / sigma_b^2) (m_base(sigma_b, x) - x),

    so the smoothed denoiser reuses the base posterior at the inflated
    level. The returned weights are that base posterior.
    """
    q = _check_query(smoothed.base, sigma, x)
    base = denoise(smoothed.base, math.hypot(sigma, smoothed.delta), x)
    if smoothed.delta == 0.0:
        return DenoiserEval(m=base.m, weights=base.weights, log_weights=base.log_weights, sigma=float(sigma))
    shrink = sigma * sigma / (sigma * sigma + smoothed.delta * smoothed.delta)
    return DenoiserEval(
        m=q + shrink * (base.m - q),
        weights=base.weights,
        log_weights=base.log_weights,
        sigma=float(sigma),
    )


def jacobian(measure: DiscreteMeasure, sigma: float, x) -> np.ndarray:
    """Denoiser Jacobian: posterior covariance over sigma^2, symmetric PSD."""
    ev = denoise(measure, sigma, x)
    centered = (measure.points - ev.m) * np.sqrt(ev.weights)[:, None]
    cov = centered.T @ centered
    return (cov + cov.T) / (2.0 * sigma * sigma)


def posterior_entropy(weights) -> float:
    """Shannon entropy of a weight vector, zeros contributing nothing."""
    w = np.asarray(weights, dtype=float)
    pos = w[w > 0.0]
    return float(-(pos * np.log(pos)).sum())


@dataclass(frozen=True)
class PerturbedDenoiser:
    """Denoiser plus the noise-proportional bias sigma * epsilon."""

    measure: DiscreteMeasure
    epsilon: np.ndarray

    def __post_init__(self):
        eps = np.asarray(self.epsilon, dtype=float)
        if eps.shape != (self.measure.d,):
            raise ValueError("epsilon must be a vector of the measure's dimension")
        if not np.all(np.isfinite(eps)):
            raise ValueError("epsilon must be finite")
        eps = eps.copy()
        eps.setflags(write=False)
        object.__setattr__(self, "epsilon", eps)

    @property
    def drift_norm(self) -> float:
        """||epsilon||; the bias magnitude at level sigma is sigma times this."""
        return float(np.linalg.norm(self.epsilon))


def perturbed_denoise(pd: PerturbedDenoiser, sigma: float, x) -> np.ndarray:
    """m(sigma, x) + sigma * epsilon."""
    return denoise(pd.measure, sigma, x).m + sigma * pd.epsilon


# -- integrator adapters -----------------------------------------------------

def denoise_fn(measure: DiscreteMeasure):
    """(sigma, x) -> m callable for the integrator."""
    return lambda sigma, x: denoise(measure, sigma, x).m


def smoothed_denoise_fn(smoothed: SmoothedMeasure):
    return lambda sigma, x: denoise_smoothed(smoothed, sigma, x).m


def perturbed_denoise_fn(pd: PerturbedDenoiser):
    return lambda sigma, x: perturbed_denoise(pd, sigma, x)


def denoise_batch_csv(measure: DiscreteMeasure, sigma: float, src, dst) -> int:
    """Evaluate the denoiser over a CSV of query points.

    Reads the measure CSV format (header ``w,x0,...``), appends columns
    ``m0,...,m{d-1}`` and ``entropy`` per row, and returns the row count.
    """
    cols = [f"x{j}" for j in range(measure.d)]
    with open(src, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["w"] + cols:
            raise ValueError(f"expected header w,{','.join(cols)}, got {header}")
        rows = [[float(v) for v in row] for row in reader if row]
    out_header = header + [f"m{j}" for j in range(measure.d)] + ["entropy"]
    count = 0
    with open(dst, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(out_header)
        for row in rows:
            ev = denoise(measure, sigma, np.asarray(row[1:]))
            writer.writerow(
                [repr(v) for v in row]
                + [repr(float(v)) for v in ev.m]
                + [repr(posterior_entropy(ev.weights))]
            )
            count += 1
    return count
