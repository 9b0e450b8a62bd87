"""Noise schedules, coordinate changes, and sigma grids.

Three coordinate systems appear throughout the package:

* ``sigma`` is the noise-to-signal ratio, the native coordinate of the
  denoiser. Trajectories are stored at descending sigma nodes.
* ``lambda = -log(sigma)`` is the integration coordinate; in it the flow
  field takes the plain relaxation form ``dz/dlambda = m(sigma, z) - z``.
* ``t`` in [0, 1] is the clock of an interpolation schedule
  ``(alpha_t, beta_t)`` with ``sigma(t) = beta(t) / alpha(t)``. The
  rectified choice ``alpha = t``, ``beta = 1 - t`` gives
  ``sigma = (1 - t)/t`` and ``t = 1/(1 + sigma)``.

Tabulated schedules are interpolated with a shape-preserving cubic
(PCHIP), which keeps the samples' monotonicity between knots but is only
C^1; treat it as an approximation of a smooth schedule.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

_BISECT_TOL = 1e-12


def lambda_of_sigma(sigma: float) -> float:
    """Map a positive noise level to the integration coordinate -log(sigma)."""
    if not (sigma > 0.0 and math.isfinite(sigma)):
        raise ValueError(f"sigma must be positive and finite, got {sigma}")
    return -math.log(sigma)


def sigma_of_lambda(lam: float) -> float:
    """Inverse of :func:`lambda_of_sigma`."""
    if not math.isfinite(lam):
        raise ValueError(f"lambda must be finite, got {lam}")
    return math.exp(-lam)


class Schedule:
    """An interpolation schedule (alpha_t, beta_t) tying the clock t to sigma.

    Build one with :meth:`rectified` or :meth:`tabulated`. Invariants
    required of every schedule: alpha is nondecreasing with alpha(0) = 0 and
    alpha(1) = 1, beta is nonincreasing with beta(0) = 1 and beta(1) = 0,
    and sigma(t) = beta(t)/alpha(t) is strictly decreasing on (0, 1].
    """

    def __init__(self, kind, alpha_fn, beta_fn):
        self.kind = kind
        self._alpha_fn = alpha_fn
        self._beta_fn = beta_fn

    @classmethod
    def rectified(cls) -> "Schedule":
        """The linear schedule alpha = t, beta = 1 - t."""
        return cls("rectified", None, None)

    @classmethod
    def tabulated(cls, t, alpha, beta) -> "Schedule":
        """Schedule interpolating sampled (t, alpha, beta) triples.

        The samples must cover t = 0 and t = 1 with the exact endpoint
        values (within 1e-12), be strictly increasing in t, monotone in
        alpha and beta, and give a strictly decreasing sigma wherever
        alpha is positive.
        """
        t = np.asarray(t, dtype=float)
        alpha = np.asarray(alpha, dtype=float)
        beta = np.asarray(beta, dtype=float)
        if t.ndim != 1 or t.shape != alpha.shape or t.shape != beta.shape:
            raise ValueError("t, alpha, beta must be 1-D arrays of equal length")
        if t.size < 3:
            raise ValueError("need at least 3 samples")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(alpha)) and np.all(np.isfinite(beta))):
            raise ValueError("schedule samples must be finite")
        if np.any(np.diff(t) <= 0):
            raise ValueError("t samples must be strictly increasing")
        if abs(t[0]) > 1e-12 or abs(t[-1] - 1.0) > 1e-12:
            raise ValueError("t samples must span [0, 1]")
        if abs(alpha[0]) > 1e-12 or abs(alpha[-1] - 1.0) > 1e-12:
            raise ValueError("alpha must run from 0 to 1")
        if abs(beta[0] - 1.0) > 1e-12 or abs(beta[-1]) > 1e-12:
            raise ValueError("beta must run from 1 to 0")
        if np.any(np.diff(alpha) < 0) or np.any(np.diff(beta) > 0):
            raise ValueError("alpha must be nondecreasing and beta nonincreasing")
        pos = alpha > 0
        sig = beta[pos] / alpha[pos]
        if np.any(np.diff(sig) >= 0):
            raise ValueError("beta/alpha must be strictly decreasing where alpha > 0")
        return cls("tabulated", PchipInterpolator(t, alpha), PchipInterpolator(t, beta))

    def alpha(self, t: float) -> float:
        """Signal scale at clock t in [0, 1]."""
        _check_t(t, closed_left=True)
        if self.kind == "rectified":
            return float(t)
        return float(self._alpha_fn(t))

    def beta(self, t: float) -> float:
        """Noise scale at clock t in [0, 1]."""
        _check_t(t, closed_left=True)
        if self.kind == "rectified":
            return float(1.0 - t)
        return float(self._beta_fn(t))

    def sigma_of_t(self, t: float) -> float:
        """Noise-to-signal ratio beta(t)/alpha(t); requires t in (0, 1]."""
        _check_t(t, closed_left=False)
        if self.kind == "rectified":
            return (1.0 - t) / t
        return float(self._beta_fn(t)) / float(self._alpha_fn(t))

    def t_of_sigma(self, sigma: float) -> float:
        """Invert sigma(t). Closed form when rectified, else bisection.

        The returned t satisfies sigma_of_t(t) = sigma to within 1e-12
        relative; sigma = 0 maps to t = 1 exactly.
        """
        if not (sigma >= 0.0 and math.isfinite(sigma)):
            raise ValueError(f"sigma must be nonnegative and finite, got {sigma}")
        if self.kind == "rectified":
            return 1.0 / (1.0 + sigma)
        if sigma == 0.0:
            return 1.0
        lo, hi = 0.0, 1.0
        # sigma(t) decreases from +inf at t -> 0+ to 0 at t = 1, so the
        # bracket [lo, hi] always straddles the target.
        while hi - lo > _BISECT_TOL:
            mid = 0.5 * (lo + hi)
            if self.sigma_of_t(mid) > sigma:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)


def _check_t(t: float, closed_left: bool) -> None:
    if closed_left:
        ok = 0.0 <= t <= 1.0
        dom = "[0, 1]"
    else:
        ok = 0.0 < t <= 1.0
        dom = "(0, 1]"
    if not (ok and math.isfinite(t)):
        raise ValueError(f"t must lie in {dom}, got {t}")


@dataclass(frozen=True)
class SigmaGrid:
    """Strictly descending positive sigma nodes plus the terminal target.

    ``sigma_terminal`` labels the row the final snap writes (default 0.0,
    the clean-data limit); the snap itself always evaluates the denoiser at
    the last grid node.
    """

    values: np.ndarray
    sigma_terminal: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 1:
            raise ValueError("grid needs at least one node")
        if not np.all(np.isfinite(v)) or np.any(v <= 0.0):
            raise ValueError("grid nodes must be positive and finite")
        if v.size > 1 and not np.all(np.diff(v) < 0.0):
            raise ValueError("grid nodes must be strictly descending")
        if not (self.sigma_terminal >= 0.0 and math.isfinite(self.sigma_terminal)):
            raise ValueError("sigma_terminal must be nonnegative and finite")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return int(self.values.size)

    @property
    def lambdas(self) -> np.ndarray:
        """Ascending integration coordinates of the nodes."""
        return -np.log(self.values)


def edm_grid(sigma_max: float, sigma_min: float, rho: float = 7.0, n: int = 18) -> SigmaGrid:
    """Polynomially warped geometric grid with n + 1 nodes.

    Node i is ``(sigma_max^(1/rho) + (i/n) * (sigma_min^(1/rho) -
    sigma_max^(1/rho)))^rho``, so the endpoints hit sigma_max and
    sigma_min to within rounding and larger rho crowds nodes toward
    sigma_min.
    """
    if not (sigma_max > sigma_min > 0.0):
        raise ValueError("need sigma_max > sigma_min > 0")
    if not (rho > 0.0 and math.isfinite(rho)):
        raise ValueError("rho must be positive and finite")
    if n < 1:
        raise ValueError("n must be at least 1")
    ramp = np.arange(n + 1, dtype=float) / n
    a, b = sigma_max ** (1.0 / rho), sigma_min ** (1.0 / rho)
    return SigmaGrid((a + ramp * (b - a)) ** rho)


def load_schedule_csv(path) -> Schedule:
    """Read a tabulated schedule from a CSV file with header ``t,alpha,beta``."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["t", "alpha", "beta"]:
            raise ValueError(f"expected header t,alpha,beta, got {header}")
        rows = [[float(v) for v in row] for row in reader if row]
    if not rows:
        raise ValueError("schedule file has no data rows")
    arr = np.asarray(rows, dtype=float)
    if arr.shape[1] != 3:
        raise ValueError("each row must have exactly 3 fields")
    return Schedule.tabulated(arr[:, 0], arr[:, 1], arr[:, 2])
