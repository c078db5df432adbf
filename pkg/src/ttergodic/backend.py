"""Hot numerical kernels, JIT-compiled with numba when available.

Every kernel exists in two variants: ``<name>_numpy`` (vectorized numpy,
always available) and ``<name>_numba`` (except where numpy already
delegates to BLAS). The public name is bound to the numba variant unless
the environment variable ``TTERGODIC_NO_NUMBA`` is set to a non-empty
value or numba cannot be imported. ``benchmarks/backend_bench.py``
compares the two paths.

Kernels operate on raw cores (C-contiguous float64 arrays of shape
``(r_prev, r_next, K)``) and 0-based indices; the public TT layer owns
the 1-based index convention.
"""

import os

import numpy as np

USE_NUMBA = not os.environ.get("TTERGODIC_NO_NUMBA", "")
if USE_NUMBA:
    try:
        import numba
        from numba import njit
        from numba.typed import List as _NumbaList
    except ImportError:  # pragma: no cover - numba is a declared dependency
        USE_NUMBA = False


# ---------------------------------------------------------------------------
# batch element evaluation


def gather_numpy(cores, idx):
    """Evaluate TT elements at many indices at once.

    idx is an (n, d) int array of 0-based indices; returns (n,) values.
    """
    v = cores[0][0, :, idx[:, 0]]  # advanced index lands first: (n, r1)
    for i in range(1, len(cores)):
        sl = cores[i][:, :, idx[:, i]]  # (r_prev, r_next, n)
        v = np.einsum("na,abn->nb", v, sl)
    return v[:, 0]


if USE_NUMBA:

    @njit(cache=True)
    def _gather_jit(cores, idx):
        n = idx.shape[0]
        d = len(cores)
        out = np.empty(n)
        for t in range(n):
            v = cores[0][0, :, idx[t, 0]].copy()
            for i in range(1, d):
                c = cores[i]
                k = idx[t, i]
                r2 = c.shape[1]
                w = np.zeros(r2)
                for a in range(c.shape[0]):
                    va = v[a]
                    if va != 0.0:
                        for b in range(r2):
                            w[b] += va * c[a, b, k]
                v = w
            out[t] = v[0]
        return out

    def gather_numba(cores, idx):
        packed = _NumbaList()
        for c in cores:
            packed.append(c)
        return _gather_jit(packed, np.ascontiguousarray(idx, dtype=np.int64))


# ---------------------------------------------------------------------------
# per-mode Hadamard core: slice-wise Kronecker product


def kron_slices_numpy(a, b):
    """C[:, :, k] = kron(A[:, :, k], B[:, :, k]) for every slice k."""
    pa, qa, kk = a.shape
    pb, qb, _ = b.shape
    c = np.einsum("ijk,pqk->ipjqk", a, b)
    return np.ascontiguousarray(c.reshape(pa * pb, qa * qb, kk))


if USE_NUMBA:

    @njit(cache=True)
    def kron_slices_numba(a, b):
        pa, qa, kk = a.shape
        pb, qb, _ = b.shape
        c = np.empty((pa * pb, qa * qb, kk))
        for i in range(pa):
            for p in range(pb):
                for j in range(qa):
                    for q in range(qb):
                        for k in range(kk):
                            c[i * pb + p, j * qb + q, k] = a[i, j, k] * b[p, q, k]
        return c


# ---------------------------------------------------------------------------
# weighted sum of slices (rank-1 contraction along one mode)


def weighted_slices_numpy(core, v):
    """Sum_k v[k] * core[:, :, k] -> (r_prev, r_next)."""
    return core @ v


if USE_NUMBA:

    @njit(cache=True)
    def weighted_slices_numba(core, v):
        p, q, kk = core.shape
        out = np.zeros((p, q))
        for i in range(p):
            for j in range(q):
                acc = 0.0
                for k in range(kk):
                    acc += core[i, j, k] * v[k]
                out[i, j] = acc
        return out


# ---------------------------------------------------------------------------
# transfer-matrix update for inner products


def inner_update_numpy(m, a, b):
    """M' = Sum_k A_k^T M B_k with A (p,q,K), M (p,s), B (s,t,K)."""
    t1 = np.tensordot(m, a, axes=([0], [0]))  # (s, q, K)
    return np.einsum("sqk,stk->qt", t1, b)


if USE_NUMBA:

    @njit(cache=True)
    def inner_update_numba(m, a, b):
        p, q, kk = a.shape
        s, t, _ = b.shape
        out = np.zeros((q, t))
        tmp = np.empty((s, q))
        for k in range(kk):
            for ss in range(s):
                for qq in range(q):
                    acc = 0.0
                    for pp in range(p):
                        acc += m[pp, ss] * a[pp, qq, k]
                    tmp[ss, qq] = acc
            for qq in range(q):
                for tt in range(t):
                    acc = 0.0
                    for ss in range(s):
                        acc += tmp[ss, qq] * b[ss, tt, k]
                    out[qq, tt] += acc
        return out


# ---------------------------------------------------------------------------
# three-tensor transfer update (for Sum_k A_k B_k C_k inner products)


def inner3_update_numpy(m, a, b, c):
    """M'[i,j,l] = Sum_k Sum_{p,s,u} A[p,i,k] B[s,j,k] C[u,l,k] M[p,s,u]."""
    t1 = np.einsum("psu,pik->suik", m, a)
    t2 = np.einsum("suik,sjk->uijk", t1, b)
    return np.einsum("uijk,ulk->ijl", t2, c)


if USE_NUMBA:

    @njit(cache=True)
    def inner3_update_numba(m, a, b, c):
        p, qi, kk = a.shape
        s, qj, _ = b.shape
        u, ql, _ = c.shape
        out = np.zeros((qi, qj, ql))
        t1 = np.empty((s, u, qi))
        t2 = np.empty((u, qi, qj))
        for k in range(kk):
            for ss in range(s):
                for uu in range(u):
                    for i in range(qi):
                        acc = 0.0
                        for pp in range(p):
                            acc += m[pp, ss, uu] * a[pp, i, k]
                        t1[ss, uu, i] = acc
            for uu in range(u):
                for i in range(qi):
                    for j in range(qj):
                        acc = 0.0
                        for ss in range(s):
                            acc += t1[ss, uu, i] * b[ss, j, k]
                        t2[uu, i, j] = acc
            for i in range(qi):
                for j in range(qj):
                    for ll in range(ql):
                        acc = 0.0
                        for uu in range(u):
                            acc += t2[uu, i, j] * c[uu, ll, k]
                        out[i, j, ll] += acc
        return out


# ---------------------------------------------------------------------------
# maxvol pivot refinement


def maxvol_sweep_numpy(b, piv, swap_tol, max_iter):
    """Greedy row swaps on B = A @ inv(A[piv]) until no swap grows |det|.

    Mutates ``b`` and ``piv`` in place, returns the number of swaps.
    """
    n_swaps = 0
    for _ in range(max_iter):
        flat = np.argmax(np.abs(b))
        i, j = divmod(flat, b.shape[1])
        if abs(b[i, j]) <= swap_tol:
            break
        col = b[:, j].copy()
        row = b[i, :].copy()
        row[j] -= 1.0
        b -= np.outer(col, row / b[i, j])
        piv[j] = i
        n_swaps += 1
    return n_swaps


if USE_NUMBA:

    @njit(cache=True)
    def maxvol_sweep_numba(b, piv, swap_tol, max_iter):
        n, r = b.shape
        n_swaps = 0
        for _ in range(max_iter):
            best = 0.0
            bi = 0
            bj = 0
            for i in range(n):
                for j in range(r):
                    v = abs(b[i, j])
                    if v > best:
                        best = v
                        bi = i
                        bj = j
            if best <= swap_tol:
                break
            pivot = b[bi, bj]
            col = b[:, bj].copy()
            row = b[bi, :].copy()
            row[bj] -= 1.0
            for i in range(n):
                ci = col[i] / pivot
                if ci != 0.0:
                    for j in range(r):
                        b[i, j] -= ci * row[j]
            piv[bj] = bi
            n_swaps += 1
        return n_swaps


# ---------------------------------------------------------------------------
# public bindings

if USE_NUMBA:
    gather = gather_numba
    kron_slices = kron_slices_numba
    weighted_slices = weighted_slices_numba
    inner_update = inner_update_numba
    inner3_update = inner3_update_numba
    maxvol_sweep = maxvol_sweep_numba
else:
    gather = gather_numpy
    kron_slices = kron_slices_numpy
    weighted_slices = weighted_slices_numpy
    inner_update = inner_update_numpy
    inner3_update = inner3_update_numpy
    maxvol_sweep = maxvol_sweep_numpy
