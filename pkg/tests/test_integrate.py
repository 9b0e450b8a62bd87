import math

import numpy as np
import pytest

from flowode.denoiser import denoise_fn, denoise_smoothed, smoothed_denoise_fn
from flowode.integrate import (
    IntegrationError,
    integrate,
    save_trajectory_csv,
    to_t_space,
)
from flowode.measure import DiscreteMeasure, SmoothedMeasure, philox_rng
from flowode.schedule import Schedule, SigmaGrid, edm_grid


def single_point(c=(1.0, -2.0)):
    return DiscreteMeasure(np.array([list(c)]), np.array([1.0]))


def test_single_point_closed_form():
    # exact solution is the straight line toward the atom, linear in sigma
    m = single_point()
    grid = edm_grid(10.0, 1.0, 7.0, 16)
    x0 = np.array([4.0, 3.0])
    traj = integrate(denoise_fn(m), x0, grid, method="rk4", substeps=16, snap=False)
    exact = m.points[0] + np.outer(traj.sigmas / 10.0, x0 - m.points[0])
    assert np.abs(traj.states - exact).max() <= 1e-8


def test_one_node_grid_is_identity(two_point):
    grid = SigmaGrid(np.array([2.0]))
    traj = integrate(denoise_fn(two_point), np.array([0.7]), grid, snap=False)
    assert len(traj) == 1
    assert np.array_equal(traj.states[0], [0.7])
    assert traj.terminal_state is None


def test_snap_applies_final_denoiser(two_point):
    grid = edm_grid(10.0, 0.002, 7.0, 12)
    traj = integrate(denoise_fn(two_point), np.array([5.0]), grid, snap=True)
    assert traj.terminal_state[0] == pytest.approx(1.0, abs=1e-9)
    bare = integrate(denoise_fn(two_point), np.array([5.0]), grid, snap=False)
    assert bare.terminal_state is None
    assert np.array_equal(bare.states, traj.states)


def test_blowup_reports_step_index():
    calls = {"n": 0}

    def exploding(sigma, x):
        calls["n"] += 1
        return x * np.nan if sigma < 1.0 else x * 0.0

    grid = edm_grid(5.0, 0.1, 7.0, 8)
    with pytest.raises(IntegrationError) as err:
        integrate(exploding, np.array([1.0]), grid)
    assert isinstance(err.value, RuntimeError)
    assert 1 <= err.value.step <= 8


@pytest.mark.parametrize(
    "method,lo,hi",
    [("euler", 1.7, 2.4), ("heun", 3.4, 4.8), ("rk4", 13.0, 20.0)],
)
def test_convergence_order(method, lo, hi):
    # halving the substep size must shrink the error by about 2/4/16
    m = single_point()
    grid = edm_grid(10.0, 1.0, 7.0, 16)
    x0 = np.array([4.0, 3.0])

    def err(sub):
        t = integrate(denoise_fn(m), x0, grid, method=method, substeps=sub, snap=False)
        exact = m.points[0] + np.outer(t.sigmas / 10.0, x0 - m.points[0])
        return np.abs(t.states - exact).max()

    ratio = err(8) / err(16)
    assert lo <= ratio <= hi


def test_substep_refinement_stable(three_clusters):
    grid = edm_grid(80.0, 0.002, 7.0, 18)
    start = 80.0 * philox_rng(41, 0).standard_normal(2)
    a = integrate(denoise_fn(three_clusters), start, grid, substeps=4)
    b = integrate(denoise_fn(three_clusters), start, grid, substeps=8)
    assert np.linalg.norm(a.terminal_state - b.terminal_state) < 1e-6


def test_grid_restart_consistency(three_clusters):
    grid = edm_grid(30.0, 0.01, 7.0, 14)
    start = 30.0 * philox_rng(42, 0).standard_normal(2)
    fn = denoise_fn(three_clusters)
    full = integrate(fn, start, grid, snap=False)
    k = 6
    first = integrate(fn, start, SigmaGrid(grid.values[: k + 1]), snap=False)
    second = integrate(fn, first.states[-1], SigmaGrid(grid.values[k:]), snap=False)
    stitched = np.vstack([first.states, second.states[1:]])
    assert np.abs(stitched - full.states).max() <= 1e-10


def test_gaussian_data_t_space_identity(rectified):
    # Dirac at 0 smoothed to a standard Gaussian: x_t = sqrt(alpha^2+beta^2) x_0
    origin = DiscreteMeasure(np.array([[0.0, 0.0]]), np.array([1.0]))
    sm = SmoothedMeasure(origin, 1.0)
    grid = edm_grid(80.0, 0.002, 7.0, 63)
    z0 = 80.0 * philox_rng(43, 0).standard_normal(2)
    traj = integrate(smoothed_denoise_fn(sm), z0, grid, method="rk4", substeps=16, snap=False)
    ts, xs = to_t_space(traj, rectified)
    x0 = z0 / math.sqrt(1.0 + 80.0**2)
    for t, x in zip(ts, xs):
        a, b = rectified.alpha(t), rectified.beta(t)
        assert np.linalg.norm(x - math.sqrt(a * a + b * b) * x0) <= 1e-6


def test_to_t_space_values(rectified, two_point):
    grid = SigmaGrid(np.array([4.0, 1.0]))
    traj = integrate(denoise_fn(two_point), np.array([2.0]), grid, snap=False)
    ts, xs = to_t_space(traj, rectified)
    assert ts[0] == pytest.approx(0.2, rel=1e-14)
    assert ts[-1] == pytest.approx(0.5, rel=1e-14)
    # x_t = alpha * z at sigma=1 means halving the state
    assert xs[-1][0] == pytest.approx(0.5 * traj.states[-1][0], rel=1e-14)


def test_to_t_space_round_trip(rectified, three_clusters):
    grid = edm_grid(20.0, 0.05, 7.0, 10)
    start = 20.0 * philox_rng(44, 0).standard_normal(2)
    traj = integrate(denoise_fn(three_clusters), start, grid, snap=False)
    ts, xs = to_t_space(traj, rectified)
    back = np.array([x / rectified.alpha(t) for t, x in zip(ts, xs)])
    assert np.abs(back - traj.states).max() <= 1e-12


def test_to_t_space_terminal_row(rectified, two_point):
    grid = edm_grid(10.0, 0.002, 7.0, 8)
    traj = integrate(denoise_fn(two_point), np.array([3.0]), grid, snap=True)
    ts, xs = to_t_space(traj, rectified)
    assert len(ts) == len(traj) + 1
    assert ts[-1] == 1.0
    assert np.array_equal(xs[-1], traj.terminal_state)


def test_trajectory_csv_format(tmp_path, two_point):
    grid = edm_grid(10.0, 0.002, 7.0, 5)
    traj = integrate(denoise_fn(two_point), np.array([3.0]), grid, record_denoiser=True)
    path = tmp_path / "t.csv"
    save_trajectory_csv(traj, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "step,sigma,lambda,x0,m0"
    assert len(lines) == 1 + 6 + 1  # header, nodes, terminal
    last = lines[-1].split(",")
    assert last[0] == "-1"
    assert last[1] == "0.0"
    assert last[2] == "inf"


def test_trajectory_csv_deterministic(tmp_path, three_clusters):
    grid = edm_grid(40.0, 0.01, 7.0, 9)
    start = 40.0 * philox_rng(45, 0).standard_normal(2)
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (p1, p2):
        traj = integrate(denoise_fn(three_clusters), start, grid)
        save_trajectory_csv(traj, p)
    assert p1.read_bytes() == p2.read_bytes()


def test_method_validation(two_point):
    grid = edm_grid(5.0, 0.5, 7.0, 4)
    with pytest.raises(ValueError):
        integrate(denoise_fn(two_point), np.array([1.0]), grid, method="rk5")
    with pytest.raises(ValueError):
        integrate(denoise_fn(two_point), np.array([1.0]), grid, substeps=0)


def test_default_substeps_by_method(two_point):
    grid = edm_grid(5.0, 0.5, 7.0, 4)
    t_rk4 = integrate(denoise_fn(two_point), np.array([1.0]), grid, method="rk4")
    t_eul = integrate(denoise_fn(two_point), np.array([1.0]), grid, method="euler")
    assert t_rk4.substeps == 4
    assert t_eul.substeps == 1


def test_heun_beats_euler(two_point):
    grid = edm_grid(10.0, 0.1, 7.0, 10)
    ref = integrate(denoise_fn(two_point), np.array([4.0]), grid, method="rk4", substeps=64)
    errs = {}
    for meth in ("euler", "heun"):
        t = integrate(denoise_fn(two_point), np.array([4.0]), grid, method=meth, substeps=2)
        errs[meth] = np.abs(t.states - ref.states).max()
    assert errs["heun"] < errs["euler"]
