"""Tensor-train container and numerical kernels.

A d-th order tensor is stored as d third-order cores; core ``i`` has
shape ``(r_prev, r_next, K_i)`` and the element at the (1-based) index
tuple ``k`` is the chained product of one frontal slice per core::

    T[k] = C1[:, :, k1-1] @ C2[:, :, k2-1] @ ... @ Cd[:, :, kd-1]

Boundary ranks are 1, so the product is a scalar. All operations are
pure functions returning new tensors; cores are never mutated after
construction, so tensors are safe to share across threads.

Element indices are 1-based at this API boundary (0-based everywhere
internally). Dimension/mode axes are 0-based as usual in Python.
"""

import math

import numpy as np

from . import backend

MAX_DENSE_ELEMENTS = 10**7


class ConvergenceError(RuntimeError):
    """An iterative routine exhausted its budget; carries the last residual."""

    def __init__(self, message, residual):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


class TtTensor:
    """Immutable tensor-train value.

    Parameters
    ----------
    cores : sequence of 3-D arrays
        Core ``i`` shaped ``(r_prev, r_next, K_i)``; adjacent ranks must
        chain and the boundary ranks must be 1.
    """

    __slots__ = ("cores", "order", "mode_sizes", "ranks")

    def __init__(self, cores):
        cores = tuple(np.ascontiguousarray(c, dtype=np.float64) for c in cores)
        if not cores:
            raise ValueError("a tensor train needs at least one core")
        for i, c in enumerate(cores):
            if c.ndim != 3:
                raise ValueError(f"core {i} must be a third-order array, got ndim={c.ndim}")
        if cores[0].shape[0] != 1 or cores[-1].shape[1] != 1:
            raise ValueError("boundary ranks must be 1")
        for i in range(len(cores) - 1):
            if cores[i].shape[1] != cores[i + 1].shape[0]:
                raise ValueError(
                    f"rank mismatch between cores {i} and {i + 1}: "
                    f"{cores[i].shape[1]} vs {cores[i + 1].shape[0]}"
                )
        self._bind(cores)

    def _bind(self, cores):
        self.cores = cores
        self.order = len(cores)
        self.mode_sizes = tuple(c.shape[2] for c in cores)
        self.ranks = (1,) + tuple(c.shape[1] for c in cores)

    @classmethod
    def _unchecked(cls, cores):
        # hot-path constructor for float64 cores already known to chain
        t = object.__new__(cls)
        t._bind(tuple(np.ascontiguousarray(c) for c in cores))
        return t

    @property
    def interior_ranks(self):
        return self.ranks[1:-1]

    @property
    def max_rank(self):
        return max(self.ranks)

    def __repr__(self):
        return (
            f"TtTensor(order={self.order}, mode_sizes={self.mode_sizes}, "
            f"ranks={self.ranks})"
        )


class DenseTensor:
    """Fully materialized tensor, used as the small-scale oracle.

    Refuses to hold more than ``MAX_DENSE_ELEMENTS`` values.
    """

    __slots__ = ("values", "mode_sizes")

    def __init__(self, values):
        values = np.asarray(values, dtype=np.float64)
        if values.size > MAX_DENSE_ELEMENTS:
            raise ValueError(
                f"dense tensor with {values.size} elements exceeds the "
                f"{MAX_DENSE_ELEMENTS} oracle-scale guard"
            )
        self.values = values
        self.mode_sizes = values.shape

    def element(self, k):
        return float(self.values[tuple(ki - 1 for ki in k)])

    def norm(self):
        return float(np.linalg.norm(self.values))


def _check_same_shape(a, b):
    if a.mode_sizes != b.mode_sizes:
        raise ValueError(f"mode sizes differ: {a.mode_sizes} vs {b.mode_sizes}")


def _to_internal_index(t, k):
    k = np.asarray(k, dtype=np.int64)
    if k.ndim != 1 or k.size != t.order:
        raise IndexError(f"index tuple must have {t.order} entries, got {k.size}")
    if np.any(k < 1) or np.any(k > np.asarray(t.mode_sizes)):
        raise IndexError(f"index {tuple(int(v) for v in k)} out of bounds for {t.mode_sizes}")
    return k - 1


# ---------------------------------------------------------------------------
# constructors


def tt_zeros(mode_sizes):
    """Rank-1 all-zero tensor."""
    return TtTensor._unchecked([np.zeros((1, 1, k)) for k in mode_sizes])


def tt_rank1(vectors):
    """Outer product of d vectors as a rank-1 tensor train."""
    vectors = [np.asarray(v, dtype=np.float64) for v in vectors]
    if not vectors:
        raise ValueError("tt_rank1 needs at least one vector")
    for v in vectors:
        if v.ndim != 1 or v.size == 0:
            raise ValueError("tt_rank1 takes nonempty 1-D arrays")
    return TtTensor([v.reshape(1, 1, -1) for v in vectors])


def tt_random(mode_sizes, ranks, rng, scale=1.0):
    """Random tensor with prescribed interior ranks (test corpuses)."""
    full = [1] + list(ranks) + [1]
    if len(full) != len(mode_sizes) + 1:
        raise ValueError("need one interior rank per adjacent core pair")
    cores = [
        scale * rng.standard_normal((full[i], full[i + 1], k))
        for i, k in enumerate(mode_sizes)
    ]
    return TtTensor(cores)


# ---------------------------------------------------------------------------
# element access


def tt_element(t, k):
    """Element at the 1-based index tuple ``k``."""
    k0 = _to_internal_index(t, k)
    m = t.cores[0][:, :, k0[0]]
    for i in range(1, t.order):
        m = m @ t.cores[i][:, :, k0[i]]
    return float(m[0, 0])


def tt_gather(t, idx):
    """Elements at many 1-based index tuples; idx is (n, d)."""
    idx = np.asarray(idx, dtype=np.int64)
    if idx.ndim != 2 or idx.shape[1] != t.order:
        raise IndexError(f"index array must be (n, {t.order})")
    if np.any(idx < 1) or np.any(idx > np.asarray(t.mode_sizes)[None, :]):
        raise IndexError("gather index out of bounds")
    return backend.gather(list(t.cores), idx - 1)


# ---------------------------------------------------------------------------
# algebra


def tt_add(a, b):
    """Elementwise sum; interior ranks add."""
    _check_same_shape(a, b)
    if a.order == 1:
        return TtTensor([a.cores[0] + b.cores[0]])
    cores = [np.concatenate([a.cores[0], b.cores[0]], axis=1)]
    for i in range(1, a.order - 1):
        ca, cb = a.cores[i], b.cores[i]
        ra0, ra1, k = ca.shape
        rb0, rb1, _ = cb.shape
        c = np.zeros((ra0 + rb0, ra1 + rb1, k))
        c[:ra0, :ra1] = ca
        c[ra0:, ra1:] = cb
        cores.append(c)
    cores.append(np.concatenate([a.cores[-1], b.cores[-1]], axis=0))
    return TtTensor._unchecked(cores)


def tt_scale(c, a):
    """Scalar multiple; only the first core is scaled, ranks unchanged."""
    cores = list(a.cores)
    cores[0] = c * cores[0]
    return TtTensor._unchecked(cores)


def tt_hadamard(a, b):
    """Elementwise product; interior ranks multiply."""
    _check_same_shape(a, b)
    return TtTensor._unchecked(
        [backend.kron_slices(ca, cb) for ca, cb in zip(a.cores, b.cores)]
    )


def tt_inner(a, b):
    """Sum of elementwise products by sequential core contraction."""
    _check_same_shape(a, b)
    m = np.ones((1, 1))
    for ca, cb in zip(a.cores, b.cores):
        m = backend.inner_update(m, ca, cb)
    return float(m[0, 0])


def tt_inner3(a, b, c):
    """Sum_k A_k * B_k * C_k without materializing any Hadamard product."""
    _check_same_shape(a, b)
    _check_same_shape(a, c)
    m = np.ones((1, 1, 1))
    for ca, cb, cc in zip(a.cores, b.cores, c.cores):
        m = backend.inner3_update(m, ca, cb, cc)
    return float(m[0, 0, 0])


def tt_norm(a):
    """Frobenius norm; tiny negative self-inner noise clamps to zero."""
    return math.sqrt(max(tt_inner(a, a), 0.0))


def num_params(t):
    """Stored scalar count: Sum_i r_prev * r_next * K_i."""
    return int(sum(c.size for c in t.cores))


# ---------------------------------------------------------------------------
# rounding


def _rank_cut(s, delta):
    # smallest r with sqrt(sum(s[r:]^2)) <= delta
    tail = np.cumsum(s[::-1] ** 2)
    n_drop = int(np.searchsorted(tail, delta * delta, side="right"))
    return max(len(s) - n_drop, 1)


def tt_round(t, eps=None, max_rank=None):
    """Recompress to smaller ranks.

    Accuracy mode (``eps``) guarantees ``|result - t| <= eps * |t|``;
    rank mode (``max_rank``) caps every interior rank and keeps the best
    truncation under the cap. Right-to-left QR orthogonalization followed
    by a left-to-right truncated SVD sweep; in accuracy mode the error
    budget is split as ``eps * |t| / sqrt(d - 1)`` per mode.
    """
    if eps is None and max_rank is None:
        raise ValueError("tt_round needs an accuracy eps or a max_rank")
    if eps is not None and eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if max_rank is not None and max_rank < 1:
        raise ValueError(f"max_rank must be >= 1, got {max_rank}")
    d = t.order
    if d == 1:
        return TtTensor([t.cores[0]])

    cores = [c for c in t.cores]
    # right-to-left orthogonalization; cores 1..d-1 get orthonormal rows
    for i in range(d - 1, 0, -1):
        c = cores[i]
        r0, r1, k = c.shape
        m = c.transpose(0, 2, 1).reshape(r0, k * r1)
        q, rr = np.linalg.qr(m.T)
        rnew = q.shape[1]
        cores[i] = q.T.reshape(rnew, k, r1).transpose(0, 2, 1)
        cores[i - 1] = np.tensordot(cores[i - 1], rr.T, axes=([1], [0])).swapaxes(1, 2)

    norm = float(np.linalg.norm(cores[0]))
    if norm == 0.0:
        return tt_zeros(t.mode_sizes)
    delta = 0.0 if eps is None else eps * norm / math.sqrt(d - 1)

    # left-to-right truncation sweep
    for i in range(d - 1):
        c = cores[i]
        r0, r1, k = c.shape
        m = c.transpose(0, 2, 1).reshape(r0 * k, r1)
        u, s, vt = np.linalg.svd(m, full_matrices=False)
        r = _rank_cut(s, delta)
        if max_rank is not None:
            r = min(r, max_rank)
        cores[i] = u[:, :r].reshape(r0, k, r).transpose(0, 2, 1)
        sv = s[:r, None] * vt[:r]
        cores[i + 1] = np.tensordot(sv, cores[i + 1], axes=([1], [0]))
    return TtTensor._unchecked(cores)


# ---------------------------------------------------------------------------
# dense conversions (oracle scale only)


def tt_to_dense(t):
    """Materialize as a DenseTensor; guarded to oracle scale."""
    n_elems = int(np.prod([float(k) for k in t.mode_sizes]))
    if n_elems > MAX_DENSE_ELEMENTS:
        raise ValueError(
            f"refusing to densify {t.mode_sizes}: {n_elems} > {MAX_DENSE_ELEMENTS}"
        )
    x = t.cores[0][0].T  # (K1, r1)
    for core in t.cores[1:]:
        x = np.tensordot(x, core, axes=([-1], [0]))  # (..., r_next, K)
        x = x.swapaxes(-1, -2)
    return DenseTensor(x.reshape(t.mode_sizes))


def tt_from_dense(values, eps=0.0):
    """Exact (eps=0) or truncated TT of a small dense tensor via sequential SVD."""
    x = np.asarray(values, dtype=np.float64)
    if x.size > MAX_DENSE_ELEMENTS:
        raise ValueError("dense input exceeds the oracle-scale guard")
    dims = x.shape
    d = len(dims)
    if d == 1:
        return TtTensor([x.reshape(1, 1, -1)])
    delta = eps * np.linalg.norm(x) / math.sqrt(d - 1) if eps > 0 else 0.0
    cores = []
    r_prev = 1
    m = x.reshape(dims[0], -1)
    for i in range(d - 1):
        u, s, vt = np.linalg.svd(m, full_matrices=False)
        r = _rank_cut(s, delta)
        cores.append(u[:, :r].reshape(r_prev, dims[i], r).transpose(0, 2, 1))
        m = s[:r, None] * vt[:r]
        if i < d - 2:
            m = m.reshape(r * dims[i + 1], -1)
        r_prev = r
    cores.append(m.reshape(r_prev, dims[-1], 1).transpose(0, 2, 1))
    return TtTensor(cores)


# ---------------------------------------------------------------------------
# binary serialization
#
# wire format (all little-endian): int64 order d, int64 mode sizes (d of
# them), int64 ranks (d + 1), then each core as float64 row-major in
# (r_prev, r_next, K) order.


def tt_save(t, f):
    """Write to a path or binary file object."""
    if hasattr(f, "write"):
        _write_tt(t, f)
    else:
        with open(f, "wb") as fh:
            _write_tt(t, fh)


def tt_load(f):
    """Read a tensor written by tt_save."""
    if hasattr(f, "read"):
        return _read_tt(f)
    with open(f, "rb") as fh:
        return _read_tt(fh)


def _write_tt(t, fh):
    header = np.array([t.order, *t.mode_sizes, *t.ranks], dtype="<i8")
    fh.write(header.tobytes())
    for c in t.cores:
        fh.write(c.astype("<f8").tobytes())


def _read_tt(fh):
    (d,) = np.frombuffer(fh.read(8), dtype="<i8")
    d = int(d)
    if d < 1:
        raise ValueError(f"corrupt tensor header: order {d}")
    sizes = np.frombuffer(fh.read(8 * d), dtype="<i8")
    ranks = np.frombuffer(fh.read(8 * (d + 1)), dtype="<i8")
    cores = []
    for i in range(d):
        shape = (int(ranks[i]), int(ranks[i + 1]), int(sizes[i]))
        n = shape[0] * shape[1] * shape[2]
        buf = np.frombuffer(fh.read(8 * n), dtype="<f8")
        if buf.size != n:
            raise ValueError("truncated tensor file")
        cores.append(buf.reshape(shape))
    return TtTensor(cores)
