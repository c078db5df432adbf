"""Command-line surface: coefficient preprocessing with caching,
exploration runs (Euclidean and 6D pose), strategy comparison suites,
and timing benchmarks. All outputs are #-headed delimited text plus a
manifest that reproduces the run.

Configuration comes from a YAML file (--config); command-line flags win
over file values. Every subcommand honors --seed and --out, writes only
inside its output directory, and drops a ``manifest.yaml`` whose
``params`` block can be fed back as a config to replay the run.
"""

import argparse
import sys
import time
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .basis import (
    BasisConfig,
    build_coefficients,
    load_coefficients,
    save_coefficients,
)
from .distributions import DomainMap, Gmm, IsotropicGaussian, Uniform, gmm_from_file
from .engine import ErgodicConfig, ErgodicEngine
from .quaternion import load_poses, pose_decode, qmean
from .sim import (
    STRATEGIES,
    SuiteConfig,
    TargetRegion,
    TrialSpec,
    bench_timing,
    cumulative_average_experiment,
    run_suite,
    summarize,
)
from .tt import ConvergenceError, num_params

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


# ---------------------------------------------------------------------------
# configuration plumbing


def _load_config(path):
    if path is None:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ValueError(f"{path}: config must be a mapping")
    # a manifest written by a previous run is also a valid config
    if "params" in data and isinstance(data["params"], dict):
        data = data["params"]
    return data


def _resolve(config, args, defaults):
    """Merge defaults < config file < explicit command-line flags.

    One config file can drive several subcommands; keys a subcommand
    does not know are ignored.
    """
    params = dict(defaults)
    for key in defaults:
        if key in config:
            params[key] = config[key]
    for key in defaults:
        flag = getattr(args, key, None)
        if flag is not None:
            params[key] = flag
    return params


def _make_distribution(config, dim, length):
    spec = config.get("distribution", {"kind": "gaussian", "var": 0.015})
    kind = spec.get("kind")
    if kind == "uniform":
        return Uniform(dim, length)
    if kind == "gaussian":
        var = float(spec.get("var", 0.015))
        mean = spec.get("mean", [length / 2.0] * dim)
        return IsotropicGaussian(np.asarray(mean, dtype=np.float64), var)
    if kind == "gmm":
        if "path" not in spec:
            raise ValueError("distribution kind 'gmm' needs a 'path'")
        gmm = gmm_from_file(spec["path"])
        if gmm.dim != dim:
            raise ValueError(f"GMM dimension {gmm.dim} does not match dim {dim}")
        return gmm
    raise ValueError(f"unknown distribution kind {kind!r}")


def _out_dir(args, command):
    out = Path(args.out) if args.out else Path(f"{command}_out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(out, command, params, config_path):
    manifest = {
        "tool": "ttergodic",
        "version": __version__,
        "command": command,
        "config": str(config_path) if config_path else None,
        "params": params,
    }
    with open(out / "manifest.yaml", "w", encoding="utf-8") as fh:
        yaml.safe_dump(manifest, fh, sort_keys=True)


def _write_table(path, header, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# " + ",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def _write_summary(path, pairs):
    with open(path, "w", encoding="utf-8") as fh:
        for key, value in pairs:
            fh.write(f"{key}: {_fmt(value)}\n")


# ---------------------------------------------------------------------------
# subcommands


def cmd_coeffs(args):
    config = _load_config(args.config)
    params = _resolve(
        config,
        args,
        {
            "dim": 2,
            "n_basis": 10,
            "length": 1.0,
            "quad_degree": 10,
            "cross_eps": 1e-2,
            "round_eps": 1e-2,
            "seed": 0,
        },
    )
    params["distribution"] = config.get(
        "distribution", {"kind": "gaussian", "var": 0.015}
    )
    out = _out_dir(args, "coeffs")
    cache = Path(args.cache) if args.cache else out / "coeffs.bin"
    t0 = time.perf_counter()
    if cache.exists():
        coeffs = load_coefficients(cache)
        source = "cache"
    else:
        cfg = BasisConfig(
            int(params["dim"]),
            int(params["n_basis"]),
            float(params["length"]),
            int(params["quad_degree"]),
        )
        dist = _make_distribution(params, cfg.dim, cfg.length)
        coeffs = build_coefficients(
            dist,
            cfg,
            cross_eps=float(params["cross_eps"]),
            round_eps=float(params["round_eps"]),
            seed=int(params["seed"]),
        )
        save_coefficients(coeffs, cache)
        source = "computed"
    elapsed = time.perf_counter() - t0
    pairs = [
        ("source", source),
        ("cache", str(cache)),
        ("elapsed_s", elapsed),
        ("dim", coeffs.config.dim),
        ("n_basis", coeffs.config.n_basis),
        ("w_hat_params", num_params(coeffs.w_hat)),
        ("w_hat_ranks", " ".join(map(str, coeffs.w_hat.ranks))),
        ("lambda_params", num_params(coeffs.lam)),
        ("lambda_ranks", " ".join(map(str, coeffs.lam.ranks))),
        ("grad_phi_params", coeffs.config.dim * coeffs.config.n_basis),
    ]
    _write_summary(out / "summary.txt", pairs)
    for key, value in pairs:
        print(f"{key}: {value}")
    _write_manifest(out, "coeffs", params, args.config)
    return EXIT_OK


def _coeffs_for_run(params, args, out):
    cfg = BasisConfig(
        int(params["dim"]),
        int(params["n_basis"]),
        float(params["length"]),
        int(params["quad_degree"]),
    )
    cache = Path(args.cache) if args.cache else None
    if cache and cache.exists():
        coeffs = load_coefficients(cache)
        if coeffs.config != cfg:
            raise ValueError(
                f"cache {cache} holds {coeffs.config}, run wants {cfg}"
            )
        return coeffs
    dist = _make_distribution(params, cfg.dim, cfg.length)
    coeffs = build_coefficients(
        dist,
        cfg,
        cross_eps=float(params["cross_eps"]),
        round_eps=float(params["round_eps"]),
        seed=int(params["seed"]),
    )
    save_coefficients(coeffs, cache if cache else out / "coeffs.bin")
    return coeffs


def _occupancy(out, x, length, bins):
    d = x.shape[1]
    rows = []
    for i in range(d):
        for j in range(i + 1, d):
            hist, _, _ = np.histogram2d(
                x[:, i], x[:, j], bins=bins, range=[[0, length], [0, length]]
            )
            for bi in range(bins):
                for bj in range(bins):
                    rows.append((i + 1, j + 1, bi + 1, bj + 1, int(hist[bi, bj])))
    _write_table(
        out / "occupancy.csv",
        ["axis_i", "axis_j", "bin_i", "bin_j", "count"],
        rows,
    )


def cmd_explore(args):
    config = _load_config(args.config)
    params = _resolve(
        config,
        args,
        {
            "dim": 2,
            "n_basis": 10,
            "length": 1.0,
            "quad_degree": 10,
            "cross_eps": 1e-2,
            "round_eps": 1e-2,
            "u_max": 0.1,
            "dt": 0.01,
            "duration": 100.0,
            "seed": 0,
            "x0": None,
            "w_rank_cap": None,
            "occupancy_bins": 30,
        },
    )
    params["distribution"] = config.get(
        "distribution", {"kind": "gaussian", "var": 0.015}
    )
    out = _out_dir(args, "explore")
    coeffs = _coeffs_for_run(params, args, out)
    cfg = ErgodicConfig(
        basis=coeffs.config,
        u_max=float(params["u_max"]),
        dt=float(params["dt"]),
        seed=int(params["seed"]),
        w_rank_cap=params["w_rank_cap"],
    )
    x0 = params["x0"]
    if x0 is None:
        x0 = [coeffs.config.length / 2.0] * coeffs.config.dim
        params["x0"] = x0
    engine = ErgodicEngine(cfg, coeffs, np.asarray(x0, dtype=np.float64))
    traj = engine.run(float(params["duration"]))
    traj.save(out / "trajectory.csv")
    _write_table(
        out / "metric.csv",
        ["t", "xi"],
        engine.metric_history,
    )
    _occupancy(out, traj.x, coeffs.config.length, int(params["occupancy_bins"]))
    _write_manifest(out, "explore", params, args.config)
    print(f"explored {traj.t.size} steps; xi(T) = {traj.xi[-1]:.6g}")
    print(f"outputs in {out}")
    return EXIT_OK


def cmd_compare(args):
    config = _load_config(args.config)
    params = _resolve(
        config,
        args,
        {
            "dim": 2,
            "n_gmms": 10,
            "n_trials": 10,
            "n_components": 6,
            "component_var": 0.01,
            "time_limit": 1000.0,
            "u_max": 0.1,
            "dt": 0.01,
            "length": 1.0,
            "n_basis": 5,
            "quad_degree": 15,
            "volume_fraction": 0.005,
            "seed": 0,
            "n_workers": None,
            "strategies": list(STRATEGIES),
            "cumulative_attempts": 0,
        },
    )
    out = _out_dir(args, "compare")
    suite = SuiteConfig(
        dim=int(params["dim"]),
        strategies=tuple(params["strategies"]),
        n_gmms=int(params["n_gmms"]),
        n_trials=int(params["n_trials"]),
        n_components=int(params["n_components"]),
        component_var=float(params["component_var"]),
        time_limit=float(params["time_limit"]),
        u_max=float(params["u_max"]),
        dt=float(params["dt"]),
        length=float(params["length"]),
        n_basis=int(params["n_basis"]),
        quad_degree=int(params["quad_degree"]),
        volume_fraction=float(params["volume_fraction"]),
        seed=int(params["seed"]),
        n_workers=params["n_workers"],
    )
    rows = run_suite(suite)
    _write_table(
        out / "trials.csv",
        ["strategy", "gmm", "trial", "success", "time_to_reach", "path_length"],
        [
            (
                r.strategy,
                r.gmm,
                r.trial,
                int(r.success),
                r.time_to_reach if r.time_to_reach is not None else float("nan"),
                r.path_length,
            )
            for r in rows
        ],
    )
    stats = summarize(rows)
    _write_table(
        out / "summary.csv",
        ["strategy", "trials", "successes", "mean_time_s", "std_time_s"],
        [
            (s, v["trials"], v["successes"], v["mean_time"], v["std_time"])
            for s, v in sorted(stats.items())
        ],
    )
    for s, v in sorted(stats.items()):
        print(
            f"{s:11s} success {v['successes']:3d}/{v['trials']:3d}  "
            f"mean {v['mean_time']:7.1f} s  std {v['std_time']:6.1f} s"
        )
    n_attempts = int(params["cumulative_attempts"])
    if n_attempts > 0:
        cum_rows = []
        rng = np.random.default_rng(suite.seed * 7919)
        from .distributions import random_spherical_gmm

        gmm = random_spherical_gmm(
            suite.dim, suite.n_components, suite.component_var, rng, suite.length
        )
        trng = np.random.default_rng(suite.seed * 104729)
        target = TargetRegion.from_fraction(
            gmm.sample(trng), suite.dim, suite.length, suite.volume_fraction
        )
        for strategy in suite.strategies:
            if strategy == "gmm_spiral":
                continue
            spec = TrialSpec(
                strategy=strategy,
                distribution=gmm,
                target=target,
                x0=suite.x0(),
                time_limit=suite.time_limit,
                u_max=suite.u_max,
                dt=suite.dt,
                seed=suite.seed,
                length=suite.length,
                n_basis=suite.n_basis,
                quad_degree=suite.quad_degree,
            )
            res = cumulative_average_experiment(spec, n_attempts)
            for a, t_a, c_a in zip(res.attempts, res.times, res.cumulative_avg):
                cum_rows.append((strategy, int(a), t_a, c_a, int(res.completed)))
        _write_table(
            out / "cumulative.csv",
            ["strategy", "attempt", "time_s", "cumulative_avg_s", "completed"],
            cum_rows,
        )
    _write_manifest(out, "compare", params, args.config)
    print(f"outputs in {out}")
    return EXIT_OK


def cmd_bench(args):
    config = _load_config(args.config)
    params = _resolve(
        config,
        args,
        {
            "dims": [2, 3, 4, 5, 6, 7, 8, 9, 10],
            "n_basis": 5,
            "quad_degree": 10,
            "var": 0.015,
            "n_steps": 1000,
            "warmup": 50,
            "dense_upto": 5,
            "repetitions": 3,
            "seed": 0,
        },
    )
    out = _out_dir(args, "bench")
    rows = bench_timing(
        [int(d) for d in params["dims"]],
        n_basis=int(params["n_basis"]),
        quad_degree=int(params["quad_degree"]),
        var=float(params["var"]),
        n_steps=int(params["n_steps"]),
        warmup=int(params["warmup"]),
        dense_upto=int(params["dense_upto"]),
        repetitions=int(params["repetitions"]),
        seed=int(params["seed"]),
    )
    header = [
        "dim",
        "n_basis",
        "preprocess_s",
        "step_median_s",
        "step_mean_s",
        "params_grad_phi",
        "params_lambda",
        "params_w_hat",
        "w_hat_max_rank",
        "dense_step_median_s",
    ]
    _write_table(
        out / "bench.csv",
        header,
        [
            (
                r.dim,
                r.n_basis,
                r.preprocess_s,
                r.step_median_s,
                r.step_mean_s,
                r.params_grad_phi,
                r.params_lambda,
                r.params_w_hat,
                r.w_hat_max_rank,
                r.dense_step_median_s if r.dense_step_median_s is not None else float("nan"),
            )
            for r in rows
        ],
    )
    for r in rows:
        dense = (
            f"{r.dense_step_median_s * 1e3:8.3f} ms"
            if r.dense_step_median_s is not None
            else "       -"
        )
        print(
            f"d={r.dim:2d}  pre {r.preprocess_s:7.3f} s  step {r.step_median_s * 1e3:8.3f} ms  "
            f"dense {dense}  params(grad_phi/lambda/w_hat) "
            f"{r.params_grad_phi}/{r.params_lambda}/{r.params_w_hat}"
        )
    _write_manifest(out, "bench", params, args.config)
    print(f"outputs in {out}")
    return EXIT_OK


def cmd_pose_explore(args):
    config = _load_config(args.config)
    params = _resolve(
        config,
        args,
        {
            "poses": None,
            "gmm": None,
            "gmm_frame": "omega",  # omega: already in box coords; task: map it
            "margin": 0.1,  # box margin as a fraction of the data range
            "n_basis": 10,
            "length": 1.0,
            "quad_degree": 10,
            "cross_eps": 1e-2,
            "round_eps": 1e-2,
            "u_max": 0.1,
            "dt": 0.01,
            "duration": 100.0,
            "seed": 0,
            "w_rank_cap": None,
        },
    )
    if not params["poses"] or not params["gmm"]:
        raise ValueError("pose-explore needs 'poses' and 'gmm' paths")
    out = _out_dir(args, "pose-explore")
    positions, quats = load_poses(params["poses"])
    anchor = qmean(quats)
    encoded = np.column_stack(
        [positions, np.array([_tangent(anchor, q) for q in quats])]
    )
    lo, hi = encoded.min(axis=0), encoded.max(axis=0)
    margin = float(params["margin"]) * np.maximum(hi - lo, 1e-6)
    dmap = DomainMap(lo - margin, hi + margin, float(params["length"]))
    gmm = gmm_from_file(params["gmm"])
    if gmm.dim != 6:
        raise ValueError(f"pose GMM must be 6-dimensional, got {gmm.dim}")
    if params["gmm_frame"] == "task":
        gmm = dmap.map_gmm(gmm)
    elif params["gmm_frame"] != "omega":
        raise ValueError("gmm_frame must be 'omega' or 'task'")
    cfg_b = BasisConfig(
        6, int(params["n_basis"]), float(params["length"]), int(params["quad_degree"])
    )
    coeffs = build_coefficients(
        gmm,
        cfg_b,
        cross_eps=float(params["cross_eps"]),
        round_eps=float(params["round_eps"]),
        seed=int(params["seed"]),
    )
    cfg = ErgodicConfig(
        basis=cfg_b,
        u_max=float(params["u_max"]),
        dt=float(params["dt"]),
        seed=int(params["seed"]),
        w_rank_cap=params["w_rank_cap"],
    )
    x0 = dmap.forward(encoded.mean(axis=0))
    x0 = np.clip(x0, 0.0, cfg_b.length)
    engine = ErgodicEngine(cfg, coeffs, x0)
    traj = engine.run(float(params["duration"]))
    traj.save(out / "trajectory.csv")
    rows = []
    worst = 0.0
    for t, x in zip(traj.t, traj.x):
        p, q = pose_decode(dmap.inverse(x), anchor)
        worst = max(worst, abs(np.linalg.norm(q) - 1.0))
        rows.append((t, *p, *q))
    _write_table(
        out / "poses.csv",
        ["t", "px", "py", "pz", "qw", "qx", "qy", "qz"],
        rows,
    )
    _write_table(out / "metric.csv", ["t", "xi"], engine.metric_history)
    _write_manifest(out, "pose-explore", params, args.config)
    print(f"explored {traj.t.size} pose steps; max quaternion norm error {worst:.3g}")
    print(f"outputs in {out}")
    return EXIT_OK


def _tangent(anchor, q):
    from .quaternion import qlog_at

    return qlog_at(anchor, q)


# ---------------------------------------------------------------------------
# argument parsing


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ttergodic",
        description="Tensor-train ergodic exploration toolkit",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="YAML config file (or a manifest)")
        p.add_argument("--seed", type=int, help="override the RNG seed")
        p.add_argument("--out", help="output directory")
        p.add_argument("--cache", help="coefficient cache file")

    p = sub.add_parser("coeffs", help="precompute and cache coefficient tensors")
    common(p)
    p.set_defaults(func=cmd_coeffs)

    p = sub.add_parser("explore", help="run an ergodic exploration")
    common(p)
    p.add_argument("--duration", type=float, help="exploration time in seconds")
    p.set_defaults(func=cmd_explore)

    p = sub.add_parser("compare", help="run the strategy comparison suite")
    common(p)
    p.add_argument("--dim", type=int, help="state dimension (2 or 3)")
    p.add_argument("--n-gmms", dest="n_gmms", type=int, help="number of mixtures")
    p.add_argument("--n-trials", dest="n_trials", type=int, help="trials per mixture")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("bench", help="time preprocessing and the control loop")
    common(p)
    p.add_argument("--dims", type=int, nargs="+", help="dimensions to benchmark")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("pose-explore", help="explore 6D end-effector poses")
    common(p)
    p.add_argument("--poses", help="pose dataset file")
    p.add_argument("--gmm", help="6D GMM file")
    p.add_argument("--duration", type=float, help="exploration time in seconds")
    p.set_defaults(func=cmd_pose_explore)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConvergenceError as exc:
        print(f"numerical convergence failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, KeyError, OSError, yaml.YAMLError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
