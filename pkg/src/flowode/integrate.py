"""Fixed-grid integration of the flow ODE in the log-noise coordinate.

The state z lives in sigma-space; between grid nodes it follows

    dz/dlambda = f(lambda, z) = m(exp(-lambda), z) - z,

integrated with a fixed number of equal substeps per node interval. The
steppers are deliberately non-adaptive: node placement is part of the
protocol under study, so accuracy is controlled by the grid and the
substep count alone. An optional terminal snap appends one evaluation of
the same map at the last node, the sigma -> 0 limit of the dynamics.
"""

from __future__ import annotations

import csv
import math

import numpy as np

from .schedule import Schedule, SigmaGrid

METHODS = ("euler", "heun", "rk4")


class IntegrationError(RuntimeError):
    """Non-finite state during integration; ``step`` is the failing node index."""

    def __init__(self, step: int, message: str):
        super().__init__(message)
        self.step = step


class Trajectory:
    """Node states of one integration run, in sigma-space.

    Attributes
    ----------
    sigmas : (k,) descending node levels.
    states : (k, d) state at each node; row 0 is the start.
    denoiser_values : (k, d) map evaluations at the nodes, or None.
    terminal_state : the snap output, or None when snapping was off.
    sigma_terminal : the level the terminal row is labeled with.
    method, substeps : the stepper protocol.
    """

    def __init__(self, sigmas, states, denoiser_values, terminal_state, sigma_terminal, method, substeps):
        self.sigmas = sigmas
        self.states = states
        self.denoiser_values = denoiser_values
        self.terminal_state = terminal_state
        self.sigma_terminal = sigma_terminal
        self.method = method
        self.substeps = substeps

    @property
    def d(self) -> int:
        return int(self.states.shape[1])

    def __len__(self) -> int:
        return int(self.states.shape[0])


def _step_euler(f, lam, z, h):
    return z + h * f(lam, z)


def _step_heun(f, lam, z, h):
    k1 = f(lam, z)
    k2 = f(lam + h, z + h * k1)
    return z + 0.5 * h * (k1 + k2)


def _step_rk4(f, lam, z, h):
    k1 = f(lam, z)
    k2 = f(lam + 0.5 * h, z + 0.5 * h * k1)
    k3 = f(lam + 0.5 * h, z + 0.5 * h * k2)
    k4 = f(lam + h, z + h * k3)
    return z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


_STEPPERS = {"euler": _step_euler, "heun": _step_heun, "rk4": _step_rk4}


def integrate(
    denoiser,
    x_start,
    grid: SigmaGrid,
    method: str = "rk4",
    substeps: int | None = None,
    snap: bool = True,
    record_denoiser: bool = False,
) -> Trajectory:
    """Drive the state from the first grid node down to the last.

    Parameters
    ----------
    denoiser : callable (sigma, x) -> array, the map m in the flow field.
    x_start : state at the first (largest) node.
    grid : node levels; a single-node grid yields just the start.
    method : one of "euler", "heun", "rk4".
    substeps : equal substeps per node interval; defaults to 4 for rk4
        and 1 otherwise.
    snap : append terminal_state = denoiser(last node, last state).
    record_denoiser : also store the map value at every node.
    """
    if method not in _STEPPERS:
        raise ValueError(f"method must be one of {METHODS}, got {method!r}")
    if substeps is None:
        substeps = 4 if method == "rk4" else 1
    if substeps < 1:
        raise ValueError("substeps must be at least 1")
    z = np.array(x_start, dtype=float)
    if z.ndim != 1:
        raise ValueError("x_start must be a vector")
    if not np.all(np.isfinite(z)):
        raise IntegrationError(0, "start state is not finite")

    stepper = _STEPPERS[method]

    def field(lam, state):
        return denoiser(math.exp(-lam), state) - state

    sigmas = grid.values
    lambdas = grid.lambdas
    states = np.empty((len(sigmas), z.size))
    states[0] = z
    for k in range(len(sigmas) - 1):
        h = (lambdas[k + 1] - lambdas[k]) / substeps
        lam = lambdas[k]
        for _ in range(substeps):
            z = stepper(field, lam, z, h)
            lam += h
        if not np.all(np.isfinite(z)):
            raise IntegrationError(k + 1, f"state became non-finite at node {k + 1}")
        states[k + 1] = z

    values = None
    if record_denoiser:
        values = np.empty_like(states)
        for k, sig in enumerate(sigmas):
            values[k] = denoiser(float(sig), states[k])

    terminal = None
    if snap:
        terminal = np.asarray(denoiser(float(sigmas[-1]), states[-1]), dtype=float)
        if not np.all(np.isfinite(terminal)):
            raise IntegrationError(len(sigmas) - 1, "terminal snap is not finite")

    return Trajectory(
        sigmas=sigmas.copy(),
        states=states,
        denoiser_values=values,
        terminal_state=terminal,
        sigma_terminal=grid.sigma_terminal,
        method=method,
        substeps=substeps,
    )


def to_t_space(trajectory: Trajectory, schedule: Schedule):
    """Convert node states to clock coordinates: x_t = alpha(t(sigma)) * z.

    Returns (t, x) arrays over the nodes, with the terminal row appended at
    t = 1 when the trajectory was snapped (alpha(1) = 1 makes it the snap
    output itself as long as sigma_terminal is 0).
    """
    ts, xs = [], []
    for sig, z in zip(trajectory.sigmas, trajectory.states):
        t = schedule.t_of_sigma(float(sig))
        ts.append(t)
        xs.append(schedule.alpha(t) * z)
    if trajectory.terminal_state is not None:
        t = schedule.t_of_sigma(float(trajectory.sigma_terminal))
        ts.append(t)
        xs.append(schedule.alpha(t) * trajectory.terminal_state)
    return np.asarray(ts), np.asarray(xs)


def save_trajectory_csv(trajectory: Trajectory, path) -> None:
    """Write nodes as ``step,sigma,lambda,x0,...`` rows.

    Map-value columns ``m0,...`` are included when they were recorded. The
    terminal snap, if present, is the last row with step -1, the terminal
    sigma label, and lambda = inf when that label is 0.
    """
    d = trajectory.d
    header = ["step", "sigma", "lambda"] + [f"x{j}" for j in range(d)]
    with_m = trajectory.denoiser_values is not None
    if with_m:
        header += [f"m{j}" for j in range(d)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for k, (sig, z) in enumerate(zip(trajectory.sigmas, trajectory.states)):
            row = [str(k), repr(float(sig)), repr(-math.log(float(sig)))]
            row += [repr(float(v)) for v in z]
            if with_m:
                row += [repr(float(v)) for v in trajectory.denoiser_values[k]]
            writer.writerow(row)
        if trajectory.terminal_state is not None:
            sig_t = float(trajectory.sigma_terminal)
            lam_t = math.inf if sig_t == 0.0 else -math.log(sig_t)
            row = ["-1", repr(sig_t), repr(lam_t)]
            row += [repr(float(v)) for v in trajectory.terminal_state]
            if with_m:
                row += [repr(float(v)) for v in trajectory.terminal_state]
            writer.writerow(row)
