"""Target-reach experiments comparing exploration strategies.

Four strategies search a box for a small spherical detection region
whose location is known only through the reference density:

  * ``ergodic``     coverage control over TT coefficients,
  * ``sampling``    constant-speed pursuit of successive density samples,
  * ``spiral``      Archimedean spiral (2D) / stacked spiral passes (3D),
  * ``gmm_spiral``  per-component ellipsoidal sweeps, heaviest first.

All strategies move at the same fixed speed with the same step size, so
trials differ only in where they choose to go. Everything is seeded;
identical specs reproduce identical trajectories bit for bit. Trials
are independent and the suite runner distributes them over a process
pool.
"""

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .basis import BasisConfig, build_coefficients
from .distributions import Gmm, random_spherical_gmm
from .engine import DenseErgodicEngine, ErgodicConfig, ErgodicEngine
from .tt import num_params, tt_norm

DEFAULT_VOLUME_FRACTION = 0.005  # detection ball: 0.5% of the box volume

STRATEGIES = ("ergodic", "sampling", "spiral", "gmm_spiral")


def ball_radius(volume_fraction, dim, length=1.0):
    """Radius of a d-ball holding the given fraction of the box volume."""
    unit = math.pi ** (dim / 2) / math.gamma(dim / 2 + 1)
    return (volume_fraction * length**dim / unit) ** (1.0 / dim)


@dataclass(frozen=True)
class TargetRegion:
    center: np.ndarray
    radius: float

    @classmethod
    def from_fraction(
        cls, center, dim, length=1.0, volume_fraction=DEFAULT_VOLUME_FRACTION
    ):
        """Ball of the given volume fraction, center nudged off the walls
        so the whole ball sits inside the box."""
        r = ball_radius(volume_fraction, dim, length)
        center = np.clip(np.asarray(center, dtype=np.float64), r, length - r)
        return cls(center, r)

    def contains(self, x):
        return float(np.linalg.norm(x - self.center)) <= self.radius


@dataclass
class TrialSpec:
    strategy: str
    distribution: object
    target: TargetRegion
    x0: np.ndarray
    time_limit: float = 1000.0
    u_max: float = 0.1
    dt: float = 0.01
    seed: int = 0
    length: float = 1.0
    n_basis: int = 10
    quad_degree: int = 10
    w_rank_cap: int | None = None
    coeffs: object = None  # precomputed CoefficientSet shared across trials
    record: bool = False
    max_record: int = 200_000


@dataclass
class TrialResult:
    success: bool
    time_to_reach: float | None
    path_length: float
    trajectory: np.ndarray | None = None


# ---------------------------------------------------------------------------
# scripted strategies as waypoint streams


class _PathWalker:
    """Constant-speed walk along a lazy polyline; parks when it ends."""

    def __init__(self, start, waypoints):
        self.x = np.asarray(start, dtype=np.float64).copy()
        self._iter = iter(waypoints)
        self._goal = next(self._iter, None)

    def step(self, ds):
        remaining = ds
        while remaining > 1e-15 and self._goal is not None:
            delta = self._goal - self.x
            gap = np.linalg.norm(delta)
            if gap > remaining:
                self.x = self.x + delta * (remaining / gap)
                remaining = 0.0
            else:
                self.x = self._goal.copy()
                remaining -= gap
                self._goal = next(self._iter, None)
        return self.x


def _sampling_waypoints(spec, rng):
    length = spec.length
    while True:
        yield np.clip(spec.distribution.sample(rng), 0.0, length)


def _planar_spiral(center2, pitch, r_max, ds):
    """Archimedean spiral r = c * theta walked at arclength resolution ds."""
    c = pitch / (2.0 * math.pi)
    theta = 0.0
    yield center2.copy()
    while True:
        r = c * theta
        if r > r_max:
            return
        yield center2 + r * np.array([math.cos(theta), math.sin(theta)])
        theta += ds / math.hypot(r, c)


def _spiral_waypoints(spec):
    """Uniform sweep: planar spiral in 2D, stacked spiral passes in 3D.

    The ring pitch equals the target radius (rings overlap by half the
    detection diameter, the usual hedge against uncertain detection
    tolerances); in 3D the planar passes are stacked with the same
    vertical pitch. Points are clamped to the box.
    """
    dim = spec.x0.size
    if dim not in (2, 3):
        raise ValueError(f"spiral sweeps support d in (2, 3), got {dim}")
    length = spec.length
    pitch = spec.target.radius
    center2 = np.full(2, length / 2.0)
    r_max = length * math.sqrt(2.0) / 2.0
    ds = max(spec.u_max * spec.dt, 1e-4)
    plane = [p for p in _planar_spiral(center2, pitch, r_max, ds)]
    if dim == 2:
        for p in plane:
            yield np.clip(p, 0.0, length)
        return
    z = float(np.clip(spec.x0[2], 0.0, length))
    up = True
    while 0.0 <= z <= length:
        pass_pts = plane if up else plane[::-1]
        for p in pass_pts:
            yield np.clip(np.array([p[0], p[1], z]), 0.0, length)
        up = not up
        z += pitch
    # one full stack of passes; the walker parks afterwards


def _unit_circle_points(radius, n=720):
    ang = 2.0 * math.pi * np.arange(n + 1) / n
    return radius * np.column_stack([np.cos(ang), np.sin(ang)])


def _component_sweep_2d(mean, axes, step_unit):
    """Growing rings in the unit disk, scaled by 2-sigma principal axes.

    The final ring sits exactly on the unit circle, so the sweep extent
    reaches two standard deviations along every principal axis.
    """
    radii = list(np.arange(step_unit, 1.0, step_unit)) + [1.0]
    yield mean.copy()
    for r in radii:
        for u in _unit_circle_points(r):
            yield mean + axes @ u


def _component_sweep_3d(mean, axes, step_unit):
    """Growing spherical shells of latitude rings (equator included), so
    the final shell touches every principal axis at exactly 2 sigma."""
    radii = list(np.arange(step_unit, 1.0, step_unit)) + [1.0]
    n_lat = 6  # even: ring at the equator, points at both poles
    yield mean.copy()
    for r in radii:
        for l in range(n_lat + 1):
            phi = math.pi * l / n_lat
            ring_r = r * math.sin(phi)
            z = r * math.cos(phi)
            if ring_r < 1e-12:
                yield mean + axes @ np.array([0.0, 0.0, z])
                continue
            for u in _unit_circle_points(ring_r):
                yield mean + axes @ np.array([u[0], u[1], z])


def _gmm_spiral_waypoints(spec):
    """Component sweeps in descending weight order with straight transits."""
    dist = spec.distribution
    if not isinstance(dist, Gmm):
        raise ValueError("gmm_spiral needs a GMM reference distribution")
    dim = spec.x0.size
    if dim not in (2, 3):
        raise ValueError(f"gmm_spiral supports d in (2, 3), got {dim}")
    length = spec.length
    order = np.argsort(-dist.weights, kind="stable")
    for c in order:
        evals, evecs = np.linalg.eigh(dist.covariances[c])
        axes = 2.0 * evecs @ np.diag(np.sqrt(np.maximum(evals, 0.0)))
        # ring gap along the widest axis matches the target diameter
        widest = 2.0 * math.sqrt(float(np.max(evals)))
        step_unit = min(spec.target.radius / widest, 0.5)
        sweep = _component_sweep_2d if dim == 2 else _component_sweep_3d
        for p in sweep(dist.means[c], axes, step_unit):
            yield np.clip(p, 0.0, length)


# ---------------------------------------------------------------------------
# trials


def _ergodic_coeffs(spec):
    if spec.coeffs is not None:
        return spec.coeffs
    cfg_b = BasisConfig(spec.x0.size, spec.n_basis, spec.length, spec.quad_degree)
    return build_coefficients(spec.distribution, cfg_b, seed=spec.seed)


def run_trial(spec):
    """Simulate one seeded trial until the detection ball is hit or the
    time budget runs out; first-hit semantics."""
    if spec.strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {spec.strategy!r}; pick from {STRATEGIES}")
    x0 = np.asarray(spec.x0, dtype=np.float64)
    target = spec.target
    record = [x0.copy()] if spec.record else None
    if target.contains(x0):
        return TrialResult(True, 0.0, 0.0, _pack(record))

    n_steps = int(round(spec.time_limit / spec.dt))
    ds = spec.u_max * spec.dt
    path = 0.0

    if spec.strategy == "ergodic":
        coeffs = _ergodic_coeffs(spec)
        cfg = ErgodicConfig(
            basis=coeffs.config,
            u_max=spec.u_max,
            dt=spec.dt,
            seed=spec.seed,
            w_rank_cap=spec.w_rank_cap,
            track_metric=False,
        )
        eng = ErgodicEngine(cfg, coeffs, x0)
        prev = x0.copy()
        for i in range(n_steps):
            t, x, _, _, _ = eng.step()
            path += float(np.linalg.norm(x - prev))
            prev = x
            if record is not None and len(record) < spec.max_record:
                record.append(x.copy())
            if target.contains(x):
                return TrialResult(True, t, path, _pack(record))
        return TrialResult(False, None, path, _pack(record))

    rng = np.random.default_rng(spec.seed)
    if spec.strategy == "sampling":
        walker = _PathWalker(x0, _sampling_waypoints(spec, rng))
    elif spec.strategy == "spiral":
        walker = _PathWalker(x0, _spiral_waypoints(spec))
    else:
        walker = _PathWalker(x0, _gmm_spiral_waypoints(spec))
    prev = x0.copy()
    for i in range(n_steps):
        x = walker.step(ds)
        path += float(np.linalg.norm(x - prev))
        prev = x.copy()
        if record is not None and len(record) < spec.max_record:
            record.append(x.copy())
        if target.contains(x):
            return TrialResult(True, (i + 1) * spec.dt, path, _pack(record))
    return TrialResult(False, None, path, _pack(record))


def _pack(record):
    return np.array(record) if record is not None else None


# ---------------------------------------------------------------------------
# the comparison suite


@dataclass
class SuiteConfig:
    dim: int
    strategies: tuple = STRATEGIES
    n_gmms: int = 10
    n_trials: int = 10
    n_components: int = 6
    component_var: float = 0.01
    time_limit: float = 1000.0
    u_max: float = 0.1
    dt: float = 0.01
    length: float = 1.0
    n_basis: int = 10
    quad_degree: int = 10
    volume_fraction: float = DEFAULT_VOLUME_FRACTION
    seed: int = 0
    n_workers: int | None = None

    def x0(self):
        if self.dim == 2:
            return np.array([0.5, 0.5]) * self.length
        if self.dim == 3:
            return np.array([0.5, 0.5, 0.0]) * self.length
        return np.full(self.dim, 0.5 * self.length)


@dataclass
class TrialRow:
    strategy: str
    gmm: int
    trial: int
    success: bool
    time_to_reach: float | None
    path_length: float


def _suite_task(args):
    cfg, strategy, gmm_idx = args
    rng = np.random.default_rng(cfg.seed * 7919 + gmm_idx)
    gmm = random_spherical_gmm(
        cfg.dim, cfg.n_components, cfg.component_var, rng, cfg.length
    )
    coeffs = None
    if strategy == "ergodic":
        cfg_b = BasisConfig(cfg.dim, cfg.n_basis, cfg.length, cfg.quad_degree)
        coeffs = build_coefficients(gmm, cfg_b, seed=cfg.seed)
    rows = []
    for trial in range(cfg.n_trials):
        # target placement is shared across strategies: it depends only on
        # the suite seed, the mixture, and the trial index
        trng = np.random.default_rng(cfg.seed * 104729 + gmm_idx * 1009 + trial)
        target = TargetRegion.from_fraction(
            gmm.sample(trng), cfg.dim, cfg.length, cfg.volume_fraction
        )
        spec = TrialSpec(
            strategy=strategy,
            distribution=gmm,
            target=target,
            x0=cfg.x0(),
            time_limit=cfg.time_limit,
            u_max=cfg.u_max,
            dt=cfg.dt,
            seed=cfg.seed * 31 + gmm_idx * 17 + trial,
            length=cfg.length,
            n_basis=cfg.n_basis,
            quad_degree=cfg.quad_degree,
            coeffs=coeffs,
        )
        res = run_trial(spec)
        rows.append(
            TrialRow(strategy, gmm_idx, trial, res.success, res.time_to_reach,
                     res.path_length)
        )
    return rows


def run_suite(cfg):
    """All strategies over seeded mixtures; returns flat trial rows.

    Tasks (one mixture, one strategy) are independent; results do not
    depend on the worker count.
    """
    tasks = [(cfg, s, g) for s in cfg.strategies for g in range(cfg.n_gmms)]
    n_workers = cfg.n_workers or min(os.cpu_count() or 1, len(tasks))
    rows = []
    if n_workers <= 1:
        for task in tasks:
            rows.extend(_suite_task(task))
    else:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            for chunk in pool.map(_suite_task, tasks):
                rows.extend(chunk)
    return rows


def summarize(rows):
    """Per-strategy success counts and reach-time statistics."""
    out = {}
    for strategy in {r.strategy for r in rows}:
        sel = [r for r in rows if r.strategy == strategy]
        times = np.array([r.time_to_reach for r in sel if r.success])
        out[strategy] = {
            "trials": len(sel),
            "successes": int(sum(r.success for r in sel)),
            "mean_time": float(times.mean()) if times.size else float("nan"),
            "std_time": float(times.std()) if times.size else float("nan"),
        }
    return out


# ---------------------------------------------------------------------------
# cumulative-average re-initialization experiment


@dataclass
class CumulativeResult:
    attempts: np.ndarray      # 1..c
    times: np.ndarray         # per-attempt reach times
    cumulative_avg: np.ndarray  # T_c / c
    completed: bool           # False when an attempt timed out


def cumulative_average_experiment(spec, n_attempts):
    """Reach the target repeatedly, teleporting back to x0 on every hit.

    The ergodic controller keeps its coefficient memory and clock across
    re-initializations, so later attempts head for the never-visited
    target region directly. Scripted strategies restart their script;
    the sampling strategy keeps consuming its sample stream.
    """
    if n_attempts < 1:
        raise ValueError("n_attempts must be >= 1")
    x0 = np.asarray(spec.x0, dtype=np.float64)
    target = spec.target
    ds = spec.u_max * spec.dt
    max_steps = int(round(spec.time_limit / spec.dt))
    times = []

    if spec.strategy == "ergodic":
        coeffs = _ergodic_coeffs(spec)
        cfg = ErgodicConfig(
            basis=coeffs.config,
            u_max=spec.u_max,
            dt=spec.dt,
            seed=spec.seed,
            w_rank_cap=spec.w_rank_cap,
            track_metric=False,
        )
        eng = ErgodicEngine(cfg, coeffs, x0)
        for _ in range(n_attempts):
            start = eng.t
            steps = 0
            while steps < max_steps:
                _, x, _, _, _ = eng.step()
                steps += 1
                if target.contains(x):
                    break
            else:
                return _cumulative_pack(times, False)
            times.append(eng.t - start)
            eng.reset_position(x0)
        return _cumulative_pack(times, True)

    rng = np.random.default_rng(spec.seed)
    if spec.strategy == "sampling":
        stream = _sampling_waypoints(spec, rng)
        make_walker = lambda: _PathWalker(x0, stream)  # shared stream
    elif spec.strategy == "spiral":
        make_walker = lambda: _PathWalker(x0, _spiral_waypoints(spec))
    else:
        make_walker = lambda: _PathWalker(x0, _gmm_spiral_waypoints(spec))
    for _ in range(n_attempts):
        walker = make_walker()
        for step in range(1, max_steps + 1):
            x = walker.step(ds)
            if target.contains(x):
                times.append(step * spec.dt)
                break
        else:
            return _cumulative_pack(times, False)
    return _cumulative_pack(times, True)


def _cumulative_pack(times, completed):
    times = np.asarray(times, dtype=np.float64)
    attempts = np.arange(1, times.size + 1)
    cum = np.cumsum(times) / np.maximum(attempts, 1)
    return CumulativeResult(attempts, times, cum, completed)


# ---------------------------------------------------------------------------
# timing benchmark


@dataclass
class BenchRow:
    dim: int
    n_basis: int
    preprocess_s: float
    step_median_s: float
    step_mean_s: float
    params_grad_phi: int
    params_lambda: int
    params_w_hat: int
    w_hat_max_rank: int
    dense_step_median_s: float | None


def bench_timing(
    dims,
    n_basis=5,
    quad_degree=10,
    var=0.015,
    n_steps=1000,
    warmup=50,
    dense_upto=5,
    repetitions=3,
    seed=0,
    distribution_factory=None,
):
    """Preprocessing and per-step timings across dimensions.

    The reference density defaults to a centered isotropic Gaussian.
    Wall-clock medians over ``repetitions`` preprocessing runs and over
    ``n_steps`` control steps (after ``warmup`` discarded steps); the
    dense twin loop runs wherever the coefficient tensors materialize
    within the oracle-scale guard and ``dim <= dense_upto``. Runs
    single-threaded; parameter counts are deterministic, times are not.
    """
    from .distributions import IsotropicGaussian
    from .basis import lambda_weights

    rows = []
    for d in dims:
        if d < 2:
            raise ValueError("bench_timing needs d >= 2")
        cfg_b = BasisConfig(d, n_basis, 1.0, quad_degree)
        if distribution_factory is None:
            dist = IsotropicGaussian(np.full(d, 0.5), var)
        else:
            dist = distribution_factory(d)
        pre_times = []
        coeffs = None
        for _ in range(repetitions):
            t0 = time.perf_counter()
            coeffs = build_coefficients(dist, cfg_b, seed=seed)
            pre_times.append(time.perf_counter() - t0)
        cfg = ErgodicConfig(basis=cfg_b, seed=seed)
        eng = ErgodicEngine(cfg, coeffs, np.full(d, 0.4))
        for _ in range(warmup):
            eng.step()
        samples = np.empty(n_steps)
        for i in range(n_steps):
            t0 = time.perf_counter()
            eng.step()
            samples[i] = time.perf_counter() - t0
        dense_med = None
        if d <= dense_upto and n_basis**d <= 10**7:
            dense = DenseErgodicEngine(cfg, coeffs, np.full(d, 0.4))
            for _ in range(warmup):
                dense.step()
            ds_samples = np.empty(n_steps)
            for i in range(n_steps):
                t0 = time.perf_counter()
                dense.step()
                ds_samples[i] = time.perf_counter() - t0
            dense_med = float(np.median(ds_samples))
        rows.append(
            BenchRow(
                dim=d,
                n_basis=n_basis,
                preprocess_s=float(np.median(pre_times)),
                step_median_s=float(np.median(samples)),
                step_mean_s=float(np.mean(samples)),
                params_grad_phi=d * n_basis,
                params_lambda=num_params(coeffs.lam),
                params_w_hat=num_params(coeffs.w_hat),
                w_hat_max_rank=max(coeffs.w_hat.ranks),
                dense_step_median_s=dense_med,
            )
        )
    return rows
