"""Rank-adaptive TT cross approximation from a black-box element oracle.

The oracle is called with an ``(n, d)`` integer array of 1-based index
tuples and must return ``n`` values; it must be pure and re-entrant.
Pivots are chosen by maxvol (quasi-maximal-volume square submatrix) on
QR-orthogonalized unfoldings, alternating left-to-right and
right-to-left half sweeps. Ranks grow by one random enrichment index
per interior boundary after every non-converged full sweep, until the
held-out error estimate drops below the requested accuracy or the sweep
budget runs out.
"""

from typing import NamedTuple

import numpy as np
import scipy.linalg

from . import backend
from .tt import ConvergenceError, TtTensor

MAXVOL_SWAP_TOL = 1e-2
MAXVOL_MAX_ITER = 200


def maxvol(a, swap_tol=MAXVOL_SWAP_TOL, max_iter=MAXVOL_MAX_ITER):
    """Rows of a tall matrix forming a quasi-maximal-volume square block.

    Column-pivoted QR picks the starting rows; greedy row swaps then run
    until no swap grows |det| by more than the factor ``1 + swap_tol``.
    """
    n, r = a.shape
    if n < r:
        raise ValueError(f"maxvol needs a tall matrix, got {a.shape}")
    if n == r:
        return np.arange(r, dtype=np.int64)
    _, _, piv = scipy.linalg.qr(a.T, pivoting=True, mode="economic")
    piv = np.ascontiguousarray(piv[:r], dtype=np.int64)
    try:
        b = np.linalg.solve(a[piv].T, a.T).T
    except np.linalg.LinAlgError:
        b = a @ np.linalg.pinv(a[piv])
    b = np.ascontiguousarray(b)
    backend.maxvol_sweep(b, piv, 1.0 + swap_tol, max_iter)
    return piv


class CrossInfo(NamedTuple):
    n_evals: int          # oracle calls made by the sweeps
    n_holdout_evals: int  # oracle calls spent on the held-out sample
    n_sweeps: int         # full sweeps completed
    est_error: float      # relative RMS error on the held-out sample
    converged: bool


def tt_cross(
    f,
    mode_sizes,
    eps,
    *,
    max_sweeps=40,
    seed=0,
    holdout=1000,
    rank_cap=None,
    full_output=False,
):
    """Approximate the tensor backed by oracle ``f`` in TT form.

    ``f`` maps an (n, d) array of 1-based indices to n values. The error
    is estimated as the relative RMS deviation on ``holdout`` uniformly
    random indices drawn once per run from ``seed``. Raises
    ConvergenceError when ``max_sweeps`` full sweeps leave the estimate
    above ``eps``.
    """
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    mode_sizes = tuple(int(k) for k in mode_sizes)
    if not mode_sizes or any(k < 1 for k in mode_sizes):
        raise ValueError(f"bad mode sizes {mode_sizes}")
    d = len(mode_sizes)
    rng = np.random.default_rng(seed)

    n_evals = 0

    def call(idx0):
        nonlocal n_evals
        n_evals += idx0.shape[0]
        return np.asarray(f(idx0 + 1), dtype=np.float64).reshape(idx0.shape[0])

    if d == 1:
        vals = call(np.arange(mode_sizes[0], dtype=np.int64)[:, None])
        t = TtTensor([vals.reshape(1, 1, -1)])
        info = CrossInfo(n_evals, 0, 0, 0.0, True)
        return (t, info) if full_output else t

    test_idx = np.column_stack(
        [rng.integers(0, k, size=holdout) for k in mode_sizes]
    ).astype(np.int64)
    test_vals = call(test_idx)
    n_holdout = n_evals
    n_evals = 0
    test_rms = float(np.sqrt(np.mean(test_vals**2)))

    def estimate(t):
        pred = backend.gather(list(t.cores), test_idx)
        rmse = float(np.sqrt(np.mean((pred - test_vals) ** 2)))
        return rmse / test_rms if test_rms > 0 else rmse

    # index sets: left_sets[i] covers modes [0, i), right_sets[i] covers [i, d)
    left_sets = [np.zeros((1, 0), dtype=np.int64)] + [None] * d
    right_sets = [None] * d + [np.zeros((1, 0), dtype=np.int64)]
    for i in range(d - 1, 0, -1):
        pick = np.array([[rng.integers(0, k) for k in mode_sizes[i:]]], dtype=np.int64)
        right_sets[i] = pick

    def eval_block(rows, k_mode, cols):
        nl, nr = rows.shape[0], cols.shape[0]
        ia = np.repeat(np.arange(nl), k_mode * nr)
        ik = np.tile(np.repeat(np.arange(k_mode), nr), nl)
        ib = np.tile(np.arange(nr), nl * k_mode)
        idx = np.concatenate(
            [rows[ia], ik[:, None].astype(np.int64), cols[ib]], axis=1
        )
        return call(idx).reshape(nl * k_mode, nr)

    def interp_basis(q, piv):
        try:
            return np.linalg.solve(q[piv].T, q.T).T
        except np.linalg.LinAlgError:
            return q @ np.linalg.pinv(q[piv])

    def sweep_lr():
        cores = [None] * d
        for i in range(d):
            rows, cols = left_sets[i], right_sets[i + 1]
            nl = rows.shape[0]
            k = mode_sizes[i]
            a = eval_block(rows, k, cols)  # (nl*k, nr)
            if i == d - 1:
                cores[i] = a.reshape(nl, k, 1).transpose(0, 2, 1)
                break
            q, _ = np.linalg.qr(a)
            piv = maxvol(q)
            r = piv.size
            cores[i] = interp_basis(q, piv).reshape(nl, k, r).transpose(0, 2, 1)
            pa, pk = np.divmod(piv, k)
            left_sets[i + 1] = np.concatenate([rows[pa], pk[:, None]], axis=1)
        return TtTensor(cores)

    def sweep_rl():
        cores = [None] * d
        for i in range(d - 1, -1, -1):
            rows, cols = left_sets[i], right_sets[i + 1]
            nl, nr = rows.shape[0], cols.shape[0]
            k = mode_sizes[i]
            a = eval_block(rows, k, cols).reshape(nl, k * nr)
            if i == 0:
                cores[i] = a.reshape(1, k, nr).transpose(0, 2, 1)
                break
            q, _ = np.linalg.qr(a.T)  # (k*nr, r)
            piv = maxvol(q)
            r = piv.size
            cores[i] = interp_basis(q, piv).T.reshape(r, k, nr).transpose(0, 2, 1)
            pk, pb = np.divmod(piv, nr)
            right_sets[i] = np.concatenate([pk[:, None], cols[pb]], axis=1)
        return TtTensor(cores)

    def enrich():
        grown = False
        for i in range(1, d):
            cols = right_sets[i]
            if rank_cap is not None and cols.shape[0] >= rank_cap:
                continue
            sizes = mode_sizes[i:]
            for _ in range(20):
                cand = np.array([[rng.integers(0, k) for k in sizes]], dtype=np.int64)
                if not (cols == cand).all(axis=1).any():
                    right_sets[i] = np.concatenate([cols, cand], axis=0)
                    grown = True
                    break
        return grown

    err = np.inf
    for sweep in range(1, max_sweeps + 1):
        t = sweep_lr()
        err = estimate(t)
        if err <= eps:
            info = CrossInfo(n_evals, n_holdout, sweep, err, True)
            return (t, info) if full_output else t
        t = sweep_rl()
        err = estimate(t)
        if err <= eps:
            info = CrossInfo(n_evals, n_holdout, sweep, err, True)
            return (t, info) if full_output else t
        enrich()

    raise ConvergenceError(
        f"tt_cross did not reach eps={eps:g} within {max_sweeps} sweeps", err
    )
