"""Online ergodic control for a velocity-limited point mass.

Each step advances the clock, integrates the position under the previous
command, folds the new position into the running basis average W(t)
(Euler update followed by rank-capped rounding), and recomputes the
steering vector

    b_i = <Lam (.) (W(t) - W_hat), grad_i Phi(x)>,

all in TT form. b is the spatial gradient of the weighted coefficient
mismatch, so the velocity command descends it: u = -u_max * b / |b|
(a seeded random unit direction stands in when b degenerates). Positions
are clamped to the box; the cosine basis has zero derivative at the
walls, so clamping does not fight the controller.

``DenseErgodicEngine`` runs the identical loop on fully materialized
tensors; it is the small-dimension oracle for tests and the baseline for
timing comparisons.
"""

from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from . import backend
from .basis import BasisConfig, basis_grad_table, basis_table
from .tt import (
    TtTensor,
    tt_add,
    tt_hadamard,
    tt_inner3,
    tt_round,
    tt_scale,
    tt_to_dense,
    tt_zeros,
)


@dataclass
class ErgodicConfig:
    """Control-loop knobs around a basis configuration."""

    basis: BasisConfig
    u_max: float = 0.1
    dt: float = 0.01
    w_rank_cap: int | None = None  # default: dim * max interior rank of W_hat
    b_epsilon: float = 1e-12
    seed: int = 0
    steer_round_eps: float = 1e-2  # accuracy for the mid-loop residual rounding
    track_metric: bool = True  # drop to skip the per-step metric evaluation

    def __post_init__(self):
        if self.u_max <= 0 or self.dt <= 0:
            raise ValueError("u_max and dt must be positive")
        if self.w_rank_cap is not None and self.w_rank_cap < 1:
            raise ValueError("w_rank_cap must be >= 1")


@dataclass
class Trajectory:
    """Per-step samples (the t=0 state lives in the metric history)."""

    t: np.ndarray
    x: np.ndarray
    u: np.ndarray
    xi: np.ndarray

    def save(self, path):
        d = self.x.shape[1]
        cols = (
            ["t"]
            + [f"x_{i + 1}" for i in range(d)]
            + [f"u_{i + 1}" for i in range(d)]
            + ["xi"]
        )
        data = np.column_stack([self.t, self.x, self.u, self.xi])
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("# " + ",".join(cols) + "  (seconds, box units, units/s, -)\n")
            for row in data:
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def _unit_vector(rng, dim):
    v = rng.standard_normal(dim)
    n = np.linalg.norm(v)
    while n < 1e-300:  # essentially impossible; keeps the draw well defined
        v = rng.standard_normal(dim)
        n = np.linalg.norm(v)
    return v / n


class ErgodicEngine:
    """One exploration session; owns its state and RNG, not shareable."""

    def __init__(self, cfg, coeffs, x0):
        if cfg.basis != coeffs.config:
            raise ValueError("engine and coefficient basis configs differ")
        self.cfg = cfg
        self.coeffs = coeffs
        self.dim = cfg.basis.dim
        self.length = cfg.basis.length
        x0 = np.asarray(x0, dtype=np.float64)
        if x0.shape != (self.dim,) or np.any(x0 < 0) or np.any(x0 > self.length):
            raise ValueError(f"x0 {x0} outside the box [0, {self.length}]^{self.dim}")
        r_what = max(coeffs.w_hat.ranks)
        self.w_rank_cap = cfg.w_rank_cap or self.dim * r_what
        self.rng = np.random.default_rng(cfg.seed)
        self.t = 0.0
        self.x = x0.copy()
        self.w = tt_zeros(coeffs.w_hat.mode_sizes)
        self.b, self.xi = self._steering(*self._tables())
        self.u = self._command(self.b)
        self.metric_history = [(0.0, self.xi)]

    # -- core computations -------------------------------------------------

    def _tables(self):
        cfg = self.cfg.basis
        return (
            basis_table(self.x, cfg.n_basis, cfg.length),
            basis_grad_table(self.x, cfg.n_basis, cfg.length),
        )

    def _residual(self):
        return tt_add(self.w, tt_scale(-1.0, self.coeffs.w_hat))

    def metric(self):
        """Weighted squared coefficient mismatch Sum_k Lam_k (W_k - W_hat_k)^2."""
        resid = self._residual()
        return tt_inner3(self.coeffs.lam, resid, resid)

    def compute_b(self):
        """Steering vector at the current state (recomputed from scratch)."""
        return self._steering(*self._tables())[0]

    def _steering(self, phi, dphi):
        """Steering vector and metric from the current W(t).

        Builds the weighted residual Lam (.) (W - W_hat) once, then takes
        its inner product with each rank-1 gradient tensor; prefix/suffix
        chains share the per-mode contractions between components.
        """
        resid = self._residual()
        steer = tt_hadamard(self.coeffs.lam, resid)
        if max(steer.interior_ranks, default=1) > 4 * self.w_rank_cap:
            steer = tt_round(steer, eps=self.cfg.steer_round_eps)
        m_phi = [backend.weighted_slices(c, phi[i]) for i, c in enumerate(steer.cores)]
        m_dphi = [backend.weighted_slices(c, dphi[i]) for i, c in enumerate(steer.cores)]
        d = self.dim
        prefix = [np.ones((1, 1))] * (d + 1)
        suffix = [np.ones((1, 1))] * (d + 1)
        for i in range(d - 1):
            prefix[i + 1] = prefix[i] @ m_phi[i]
        for i in range(d - 1, 0, -1):
            suffix[i] = m_phi[i] @ suffix[i + 1]
        b = np.array(
            [(prefix[i] @ m_dphi[i] @ suffix[i + 1])[0, 0] for i in range(d)]
        )
        if self.cfg.track_metric:
            xi = tt_inner3(self.coeffs.lam, resid, resid)
        else:
            xi = np.nan
        return b, xi

    def _command(self, b):
        norm = np.linalg.norm(b)
        if norm > self.cfg.b_epsilon:
            return -self.cfg.u_max * b / norm
        return self.cfg.u_max * _unit_vector(self.rng, self.dim)

    def _update_w(self, t_old, t_new, phi):
        """Running average (t_old * W + dt * Phi(x)) / t_new, rank-capped.

        The sum is assembled block-diagonally in place of going through
        the generic add/scale ops; same elements, fewer temporaries.
        """
        w = self.w
        d = w.order
        a = t_old / t_new
        c = self.cfg.dt / t_new
        if d == 1:
            core = a * w.cores[0] + c * phi[0].reshape(1, 1, -1)
            self.w = TtTensor._unchecked([core])
            return
        cores = [
            np.concatenate([a * w.cores[0], c * phi[0].reshape(1, 1, -1)], axis=1)
        ]
        for i in range(1, d - 1):
            ci = w.cores[i]
            r0, r1, k = ci.shape
            blk = np.zeros((r0 + 1, r1 + 1, k))
            blk[:r0, :r1] = ci
            blk[r0, r1] = phi[i]
            cores.append(blk)
        cores.append(
            np.concatenate([w.cores[-1], phi[-1].reshape(1, 1, -1)], axis=0)
        )
        self.w = tt_round(TtTensor._unchecked(cores), max_rank=self.w_rank_cap)

    # -- public stepping ----------------------------------------------------

    def step(self):
        """Advance one control period; returns (t, x, u, b, xi) at the new state."""
        dt = self.cfg.dt
        t_new = self.t + dt
        self.x = np.clip(self.x + self.u * dt, 0.0, self.length)
        phi, dphi = self._tables()
        self._update_w(self.t, t_new, phi)
        self.t = t_new
        self.b, self.xi = self._steering(phi, dphi)
        self.u = self._command(self.b)
        self.metric_history.append((self.t, self.xi))
        return self.t, self.x.copy(), self.u.copy(), self.b.copy(), self.xi

    def reset_position(self, x0):
        """Teleport to x0 keeping the clock and W(t) (re-initialization
        between attempts); the command is recomputed at the new state."""
        x0 = np.asarray(x0, dtype=np.float64)
        if np.any(x0 < 0) or np.any(x0 > self.length):
            raise ValueError(f"reset position {x0} outside the box")
        self.x = x0.copy()
        self.b, self.xi = self._steering(*self._tables())
        self.u = self._command(self.b)

    def run(self, duration):
        """Step until the clock reaches ``duration``; one row per step."""
        if duration <= 0:
            raise ValueError("duration must be positive")
        n = int(np.ceil(duration / self.cfg.dt - 1e-9))
        ts = np.empty(n)
        xs = np.empty((n, self.dim))
        us = np.empty((n, self.dim))
        xis = np.empty(n)
        for i in range(n):
            t, x, u, _, xi = self.step()
            ts[i] = t
            xs[i] = x
            us[i] = u
            xis[i] = xi
        return Trajectory(ts, xs, us, xis)


def run_exploration(cfg, coeffs, x0, duration):
    """Convenience wrapper: fresh engine, one run."""
    return ErgodicEngine(cfg, coeffs, x0).run(duration)


# ---------------------------------------------------------------------------
# dense twin (oracle / baseline)


class DenseErgodicEngine:
    """The identical control loop on fully materialized tensors.

    Densifies the coefficient tensors once at construction, so it agrees
    with the TT engine step for step when the TT rank caps are generous.
    Only feasible at oracle scale.
    """

    def __init__(self, cfg, coeffs, x0):
        self.cfg = cfg
        self.dim = cfg.basis.dim
        self.length = cfg.basis.length
        x0 = np.asarray(x0, dtype=np.float64)
        if x0.shape != (self.dim,) or np.any(x0 < 0) or np.any(x0 > self.length):
            raise ValueError(f"x0 {x0} outside the box")
        self.w_hat = tt_to_dense(coeffs.w_hat).values
        self.lam = tt_to_dense(coeffs.lam).values
        self.rng = np.random.default_rng(cfg.seed)
        self.t = 0.0
        self.x = x0.copy()
        self.w = np.zeros_like(self.w_hat)
        self.b, self.xi = self._steering()
        self.u = self._command(self.b)
        self.metric_history = [(0.0, self.xi)]

    def _phi_outer(self, rows):
        return reduce(np.multiply.outer, rows)

    def _steering(self):
        cfg = self.cfg.basis
        weighted = self.lam * (self.w - self.w_hat)
        phi = basis_table(self.x, cfg.n_basis, cfg.length)
        dphi = basis_grad_table(self.x, cfg.n_basis, cfg.length)
        b = np.empty(self.dim)
        for i in range(self.dim):
            acc = weighted
            for j in range(self.dim):
                row = dphi[i] if j == i else phi[j]
                acc = np.tensordot(acc, row, axes=([0], [0]))
            b[i] = float(acc)
        if self.cfg.track_metric:
            xi = float(np.sum(self.lam * (self.w - self.w_hat) ** 2))
        else:
            xi = np.nan
        return b, xi

    def _command(self, b):
        norm = np.linalg.norm(b)
        if norm > self.cfg.b_epsilon:
            return -self.cfg.u_max * b / norm
        return self.cfg.u_max * _unit_vector(self.rng, self.dim)

    def step(self):
        cfg = self.cfg.basis
        dt = self.cfg.dt
        t_new = self.t + dt
        self.x = np.clip(self.x + self.u * dt, 0.0, self.length)
        phi_t = self._phi_outer(basis_table(self.x, cfg.n_basis, cfg.length))
        self.w = (self.t / t_new) * self.w + (dt / t_new) * phi_t
        self.t = t_new
        self.b, self.xi = self._steering()
        self.u = self._command(self.b)
        self.metric_history.append((self.t, self.xi))
        return self.t, self.x.copy(), self.u.copy(), self.b.copy(), self.xi

    def run(self, duration):
        if duration <= 0:
            raise ValueError("duration must be positive")
        n = int(np.ceil(duration / self.cfg.dt - 1e-9))
        ts = np.empty(n)
        xs = np.empty((n, self.dim))
        us = np.empty((n, self.dim))
        xis = np.empty(n)
        for i in range(n):
            t, x, u, _, xi = self.step()
            ts[i] = t
            xs[i] = x
            us[i] = u
            xis[i] = xi
        return Trajectory(ts, xs, us, xis)
