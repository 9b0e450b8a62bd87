"""Command-line front end: dataset generation, trajectory runs, verification.

Exit codes form a stable contract: 0 on success, 1 when a verification
check fails or an integration blows up, 2 on usage, configuration, or I/O
errors. Every command is deterministic given its configuration and seed;
reruns produce byte-identical files.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import denoiser, diagnostics, geometry, stages
from .integrate import METHODS, IntegrationError, integrate, save_trajectory_csv
from .measure import (
    DiscreteMeasure,
    SmoothedMeasure,
    cluster_spec,
    diameter,
    gen_circle,
    gen_three_clusters,
    gen_two_point,
    load_measure_csv,
    philox_rng,
    save_measure_csv,
    summary,
)
from .schedule import Schedule, edm_grid

DATA_KINDS = ("three-clusters", "circle", "two-point", "custom-file")
SUITES = ("denoiser", "stages", "rates", "equivariance", "memorize", "all")

_TRAJECTORY_DEFAULTS = {
    "data": "three-clusters",
    "data_file": None,
    "seed": 0,
    "n": 2048,
    "radius": 1.0,
    "sigma_max": 80.0,
    "sigma_min": 0.002,
    "rho": 7.0,
    "steps": 18,
    "substeps": None,
    "method": "rk4",
    "snap": True,
    "svg": False,
    "experiment": "trajectory",
    "out": ".",
}


def _load_data(kind: str, seed: int, n: int, radius: float, file) -> DiscreteMeasure:
    if kind == "three-clusters":
        return gen_three_clusters(seed)
    if kind == "circle":
        return gen_circle(n, radius)
    if kind == "two-point":
        return gen_two_point()
    if kind == "custom-file":
        if file is None:
            raise ValueError("custom-file data needs a file path")
        return load_measure_csv(file)
    raise ValueError(f"unknown data kind {kind!r}")


def _cmd_gen_data(args) -> int:
    measure = _load_data(args.kind, args.seed, args.n, args.radius, args.file)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    name = args.kind.replace("-", "_")
    csv_path = out / f"{name}.csv"
    save_measure_csv(measure, csv_path)
    info = summary(measure)
    doc = {
        "n": info.n,
        "d": info.d,
        "mean": list(info.mean),
        "diameter": info.diameter,
        "second_moment": info.second_moment,
    }
    json_path = out / f"{name}.summary.json"
    with open(json_path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
    print(f"wrote {csv_path} ({info.n} rows) and {json_path}")
    return 0


def _merge_trajectory_config(args) -> dict:
    cfg = dict(_TRAJECTORY_DEFAULTS)
    if args.config is not None:
        with open(args.config) as fh:
            loaded = json.load(fh)
        if not isinstance(loaded, dict):
            raise ValueError("config must be a JSON object")
        unknown = sorted(set(loaded) - set(cfg))
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        cfg.update(loaded)
    for key in cfg:
        flag = getattr(args, key, None)
        if flag is not None:
            cfg[key] = flag
    if cfg["data"] not in DATA_KINDS:
        raise ValueError(f"data must be one of {DATA_KINDS}, got {cfg['data']!r}")
    if cfg["method"] not in METHODS:
        raise ValueError(f"method must be one of {METHODS}, got {cfg['method']!r}")
    return cfg


def _cmd_trajectory(args) -> int:
    cfg = _merge_trajectory_config(args)
    measure = _load_data(cfg["data"], int(cfg["seed"]), int(cfg["n"]), float(cfg["radius"]),
                         cfg["data_file"])
    grid = edm_grid(float(cfg["sigma_max"]), float(cfg["sigma_min"]), float(cfg["rho"]),
                    int(cfg["steps"]))
    rng = philox_rng(int(cfg["seed"]), stream=1)
    start = float(cfg["sigma_max"]) * rng.standard_normal(measure.d)
    substeps = cfg["substeps"]
    traj = integrate(
        denoiser.denoise_fn(measure), start, grid,
        method=cfg["method"],
        substeps=None if substeps is None else int(substeps),
        snap=bool(cfg["snap"]),
        record_denoiser=True,
    )
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{cfg['experiment']}.csv"
    save_trajectory_csv(traj, csv_path)
    wrote = [str(csv_path)]
    if cfg["svg"]:
        if measure.d == 2:
            from . import plotting

            svg_path = out / f"{cfg['experiment']}.svg"
            plotting.render_trajectory_svg(measure, traj, svg_path)
            wrote.append(str(svg_path))
        else:
            print(f"warning: --svg needs planar data, got d={measure.d}; plot skipped",
                  file=sys.stderr)
    end = traj.terminal_state if traj.terminal_state is not None else traj.states[-1]
    end_txt = "(" + ", ".join(f"{v:.6g}" for v in end) + ")"
    print(f"wrote {' and '.join(wrote)}: {len(traj)} nodes, end {end_txt}")
    return 0


# -- verification suites -----------------------------------------------------

def _fd_jacobian(measure: DiscreteMeasure, sigma: float, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    d = measure.d
    jac = np.empty((d, d))
    for j in range(d):
        e = np.zeros(d)
        e[j] = h
        hi = denoiser.denoise(measure, sigma, x + e).m
        lo = denoiser.denoise(measure, sigma, x - e).m
        jac[:, j] = (hi - lo) / (2.0 * h)
    return jac


def _suite_denoiser(seed: int) -> list:
    records = []
    two = gen_two_point()
    worst = 0.0
    sigmas = [0.3, 0.5, 1.0, 2.0]
    for sig in sigmas:
        for x in np.linspace(-3.0, 3.0, 61):
            got = denoiser.denoise(two, sig, np.array([x])).m[0]
            worst = max(worst, abs(got - math.tanh(x / (sig * sig))))
    records.append(diagnostics.verdict_record(
        "two_point_closed_form", {"sigmas": sigmas, "grid": 61, "span": 3.0},
        worst, 1e-12, worst <= 1e-12))

    rng = philox_rng(seed, stream=3)
    worst = 0.0
    for _ in range(10):
        n = int(rng.integers(2, 9))
        d = int(rng.integers(1, 4))
        pts = rng.standard_normal((n, d))
        w = rng.random(n) + 0.1
        m = DiscreteMeasure(pts, w / w.sum())
        sig = float(rng.uniform(0.5, 2.0))
        x = 1.5 * rng.standard_normal(d)
        worst = max(worst, float(np.abs(denoiser.jacobian(m, sig, x) - _fd_jacobian(m, sig, x)).max()))
    records.append(diagnostics.verdict_record(
        "jacobian_matches_finite_differences", {"cases": 10, "seed": seed, "h": 1e-5},
        worst, 1e-5, worst <= 1e-5))

    three = gen_three_clusters(7)
    worst = 0.0
    for k in range(12):
        x = three.mean() + 2.0 * rng.standard_normal(2)
        for sig in (0.05, 0.5, 5.0):
            ev = denoiser.denoise(three, sig, x)
            worst = max(worst, geometry.dist_conv_hull(three.points, ev.m, tol=1e-12).distance)
    records.append(diagnostics.verdict_record(
        "denoiser_stays_in_hull", {"queries": 12, "sigmas": [0.05, 0.5, 5.0], "seed": seed},
        worst, 1e-9, worst <= 1e-9))

    mu = three.mean()
    worst = 0.0
    for k in range(5):
        x = 10.0 * rng.standard_normal(2)
        worst = max(worst, float(np.linalg.norm(denoiser.denoise(three, 1e6, x).m - mu)))
    records.append(diagnostics.verdict_record(
        "high_noise_mean_limit", {"sigma": 1e6, "queries": 5, "seed": seed},
        worst, 1e-9, worst <= 1e-9))

    sm = SmoothedMeasure(three, 0.0)
    worst = 0.0
    for sig in (0.1, 1.0):
        x = three.mean() + rng.standard_normal(2)
        dev = denoiser.denoise_smoothed(sm, sig, x).m - denoiser.denoise(three, sig, x).m
        worst = max(worst, float(np.abs(dev).max()))
    records.append(diagnostics.verdict_record(
        "zero_smoothing_consistency", {"sigmas": [0.1, 1.0], "seed": seed},
        worst, 1e-14, worst <= 1e-14))
    return records


def _suite_stages(seed: int) -> list:
    records = []
    three = gen_three_clusters(7)
    diam = diameter(three.points)
    mu = three.mean()
    rng = philox_rng(seed, stream=4)
    fn = denoiser.denoise_fn(three)

    sigma1 = 100.0
    grid = edm_grid(sigma1, 0.002, 7.0, 18)
    worst = -math.inf
    for r0 in (60.0, 130.0):
        u = rng.standard_normal(2)
        start = mu + r0 * u / np.linalg.norm(u)
        traj = integrate(fn, start, grid, snap=False)
        r0_eff = float(np.linalg.norm(start - mu))
        thr = stages.sigma_init(diam, r0_eff, 0.5).applicability
        for sig, z in zip(traj.sigmas, traj.states):
            if sig > thr:
                excess = float(np.linalg.norm(z - mu)) - stages.mean_bound(r0_eff, sigma1, float(sig), 0.5)
                worst = max(worst, excess)
    records.append(diagnostics.verdict_record(
        "mean_attraction_envelope", {"sigma1": sigma1, "r0": [60.0, 130.0], "zeta": 0.5, "seed": seed},
        worst, 1e-9, worst <= 1e-9))

    grid = edm_grid(80.0, 0.002, 7.0, 18)
    worst = -math.inf
    for k in range(4):
        start = 80.0 * rng.standard_normal(2)
        traj = integrate(fn, start, grid, snap=False)
        d1 = geometry.dist_conv_hull(three.points, traj.states[0]).distance
        for sig, z in zip(traj.sigmas, traj.states):
            d = geometry.dist_conv_hull(three.points, z).distance
            worst = max(worst, d - stages.hull_decay_bound(d1, 80.0, float(sig)))
    records.append(diagnostics.verdict_record(
        "hull_distance_decay", {"starts": 4, "grid": [80.0, 0.002, 7.0, 18], "seed": seed},
        worst, 1e-6, worst <= 1e-6))

    spec = cluster_spec(three, range(124, 144))
    eps = 0.25 * spec.diameter
    thr = stages.sigma_cluster(spec.diameter, eps, spec.weight, diam)
    sigma1 = 0.9 * thr
    grid = edm_grid(sigma1, sigma1 / 50.0, 7.0, 12)
    sub = three.points[list(spec.indices)]
    radius_cap = 0.9 * (0.5 * spec.diameter - eps)
    worst_stay = -math.inf
    worst_land = -math.inf
    for k in range(2):
        w = rng.random(len(sub)) + 0.05
        anchor = (w / w.sum()) @ sub
        u = rng.standard_normal(2)
        start = anchor + radius_cap * rng.random() * u / np.linalg.norm(u)
        traj = integrate(fn, start, grid, snap=True)
        for z in traj.states:
            worst_stay = max(worst_stay,
                             geometry.dist_conv_hull(sub, z).distance - (0.5 * spec.diameter - eps))
        worst_land = max(worst_land, geometry.dist_conv_hull(sub, traj.terminal_state).distance)
    records.append(diagnostics.verdict_record(
        "cluster_neighborhood_absorbing",
        {"cluster": [124, 144], "eps": eps, "sigma1": sigma1, "seed": seed},
        worst_stay, 1e-8, worst_stay <= 1e-8))
    records.append(diagnostics.verdict_record(
        "cluster_terminal_lands_on_hull",
        {"cluster": [124, 144], "sigma_min": sigma1 / 50.0, "seed": seed},
        worst_land, 1e-3, worst_land <= 1e-3))
    return records


def _suite_rates(seed: int) -> list:
    records = []
    rng = philox_rng(seed, stream=5)
    single = DiscreteMeasure(np.array([[0.7, -0.4]]), np.array([1.0]))
    grid = edm_grid(80.0, 1e-4, 7.0, 64)
    traj = integrate(denoiser.denoise_fn(single), 80.0 * rng.standard_normal(2), grid,
                     substeps=16, snap=True)
    fit = diagnostics.convergence_slope(traj, traj.terminal_state, window=16)
    records.append(diagnostics.verdict_record(
        "single_point_linear_rate", {"window": 16, "substeps": 16, "seed": seed},
        abs(fit.slope - 1.0), 1e-6, abs(fit.slope - 1.0) <= 1e-6))

    three = gen_three_clusters(7)
    fn = denoiser.denoise_fn(three)
    worst_slope = 0.0
    worst_r2 = 1.0
    for k in range(4):
        traj = integrate(fn, 80.0 * rng.standard_normal(2), grid, snap=True)
        fit = diagnostics.convergence_slope(traj, traj.terminal_state, window=8)
        worst_slope = max(worst_slope, abs(fit.slope - 1.0))
        worst_r2 = min(worst_r2, fit.r2)
    records.append(diagnostics.verdict_record(
        "cluster_tail_linear_rate", {"starts": 4, "window": 8, "seed": seed},
        worst_slope, 0.1, worst_slope <= 0.1))
    records.append(diagnostics.verdict_record(
        "cluster_tail_fit_quality", {"starts": 4, "window": 8, "seed": seed},
        1.0 - worst_r2, 0.01, worst_r2 >= 0.99))
    return records


def _random_rotation(rng, d: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0.0:
        q[:, 0] = -q[:, 0]
    return q


def _suite_equivariance(seed: int) -> list:
    records = []
    three = gen_three_clusters(7)
    sched = Schedule.rectified()
    grid = edm_grid(80.0, 0.002, 7.0, 18)
    rng = philox_rng(seed, stream=6)
    worst = 0.0
    for k in range(4):
        tf = diagnostics.SimilarityTransform(_random_rotation(rng, 2), rng.standard_normal(2), 1.0)
        worst = max(worst, diagnostics.equivariance_residual(
            three, tf, 80.0 * rng.standard_normal(2), sched, grid))
    records.append(diagnostics.verdict_record(
        "rigid_equivariance", {"transforms": 4, "gamma": 1.0, "seed": seed},
        worst, 1e-6, worst <= 1e-6))

    worst = 0.0
    for g in (0.5, 2.0):
        tf = diagnostics.SimilarityTransform(_random_rotation(rng, 2), np.zeros(2), g)
        worst = max(worst, diagnostics.equivariance_residual(
            three, tf, 80.0 * rng.standard_normal(2), sched, grid))
    records.append(diagnostics.verdict_record(
        "scaled_equivariance", {"gammas": [0.5, 2.0], "seed": seed},
        worst, 1e-5, worst <= 1e-5))
    return records


def _suite_memorize(seed: int) -> list:
    records = []
    three = gen_three_clusters(7)
    diam = diameter(three.points)
    rng = philox_rng(seed, stream=7)
    cluster = range(124, 144)
    idx = max(cluster, key=lambda j: geometry.separation(three, j))
    sep = geometry.separation(three, idx)
    eps = sep / 3.0
    thr = stages.sigma_terminal(sep, eps, float(three.weights[idx]), diam)
    sigma1 = 0.9 * thr
    grid = edm_grid(sigma1, sigma1 / 50.0, 7.0, 10)
    starts = []
    for k in range(2):
        u = rng.standard_normal(2)
        starts.append(three.points[idx] + 0.2 * sep * u / np.linalg.norm(u))

    fn = denoiser.denoise_fn(three)
    violations = 0
    worst_end = 0.0
    for start in starts:
        traj = integrate(fn, start, grid, snap=True)
        for z in traj.states:
            if not geometry.in_shrunk_voronoi(three, idx, eps, z):
                violations += 1
        worst_end = max(worst_end, float(np.linalg.norm(traj.terminal_state - three.points[idx])))
    records.append(diagnostics.verdict_record(
        "voronoi_cell_absorbing", {"atom": idx, "eps": eps, "sigma1": sigma1, "seed": seed},
        float(violations), 0.0, violations == 0))
    records.append(diagnostics.verdict_record(
        "clean_terminal_hits_atom", {"atom": idx, "sigma_min": sigma1 / 50.0, "seed": seed},
        worst_end, 1e-6, worst_end <= 1e-6))

    u = rng.standard_normal(2)
    pd = denoiser.PerturbedDenoiser(three, 3.0 * u / np.linalg.norm(u))
    worst = 0.0
    for res in diagnostics.memorization_run(pd, starts, grid):
        worst = max(worst, float(np.linalg.norm(res.terminal - three.points[idx])))
    records.append(diagnostics.verdict_record(
        "perturbed_terminal_near_atom", {"atom": idx, "drift_norm": 3.0, "seed": seed},
        worst, 1e-2, worst <= 1e-2))
    return records


_SUITES = {
    "denoiser": _suite_denoiser,
    "stages": _suite_stages,
    "rates": _suite_rates,
    "equivariance": _suite_equivariance,
    "memorize": _suite_memorize,
}


def _cmd_verify(args) -> int:
    names = list(_SUITES) if args.suite == "all" else [args.suite]
    records = []
    for name in names:
        records.extend(_SUITES[name](args.seed))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"verdicts_{args.suite}.json"
    with open(path, "w") as fh:
        json.dump(records, fh, indent=1, sort_keys=True)
        fh.write("\n")
    ok = True
    for rec in records:
        mark = "ok  " if rec["holds"] else "FAIL"
        ok = ok and rec["holds"]
        print(f"{mark} {rec['name']}: statistic={rec['statistic']:.6e} bound={rec['bound']:.6e}")
    print(f"wrote {path}")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flowode",
        description="Flow ODE analysis over point-cloud data with exact denoisers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate or normalize a dataset")
    p.add_argument("kind", choices=DATA_KINDS)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--n", type=int, default=2048, help="circle point count")
    p.add_argument("--radius", type=float, default=1.0, help="circle radius")
    p.add_argument("--file", default=None, help="measure CSV for custom-file")
    p.add_argument("--out", default=".")
    p.set_defaults(func=_cmd_gen_data)

    p = sub.add_parser("trajectory", help="integrate one flow trajectory")
    p.add_argument("--config", default=None, help="JSON config; flags override its keys")
    p.add_argument("--data", choices=DATA_KINDS, default=None)
    p.add_argument("--data-file", dest="data_file", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--n", type=int, default=None, help="circle point count")
    p.add_argument("--radius", type=float, default=None, help="circle radius")
    p.add_argument("--sigma-max", dest="sigma_max", type=float, default=None)
    p.add_argument("--sigma-min", dest="sigma_min", type=float, default=None)
    p.add_argument("--rho", type=float, default=None)
    p.add_argument("--steps", type=int, default=None, help="grid intervals")
    p.add_argument("--substeps", type=int, default=None)
    p.add_argument("--method", choices=METHODS, default=None)
    p.add_argument("--snap", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--svg", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--experiment", default=None, help="output file basename")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_trajectory)

    p = sub.add_parser("verify", help="run a verification suite")
    p.add_argument("suite", choices=SUITES)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".")
    p.set_defaults(func=_cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else int(exc.code)
    try:
        return args.func(args)
    except RuntimeError as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
