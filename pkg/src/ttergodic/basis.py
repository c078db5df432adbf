"""Cosine basis on the exploration box, frequency weights, and Fourier
coefficients of a reference density assembled directly in TT form.

The per-dimension basis is the Neumann cosine family

    phi_k(x) = cos(2 pi (k - 1) x / L) / h_k,   k = 1..K,

normalized by h_1 = sqrt(L), h_k = sqrt(L / 2) so the family is
orthonormal on [0, L]. Coefficient tensors are built without any
multidimensional integration: the density is cross-approximated on a
Gauss-Legendre tensor grid and each TT core is contracted against the
quadrature-weighted basis table, which leaves the TT ranks untouched.
"""

from dataclasses import dataclass

import numpy as np

from .cross import tt_cross
from .tt import DenseTensor, TtTensor, tt_round


@dataclass(frozen=True)
class BasisConfig:
    """Domain and basis sizes: dimension, per-dimension basis count K,
    box edge length L, and Gauss-Legendre degree N."""

    dim: int
    n_basis: int
    length: float = 1.0
    quad_degree: int = 10

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        if self.n_basis < 1:
            raise ValueError(f"n_basis must be >= 1, got {self.n_basis}")
        if self.length <= 0:
            raise ValueError(f"length must be positive, got {self.length}")
        if self.quad_degree < 1:
            raise ValueError(f"quad_degree must be >= 1, got {self.quad_degree}")


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray


def quadrature_rule(n, length):
    """Gauss-Legendre nodes and weights mapped to [0, length].

    Exact for polynomials of degree <= 2n - 1; the weights sum to the
    interval length.
    """
    x, w = np.polynomial.legendre.leggauss(n)
    return QuadratureRule(0.5 * length * (x + 1.0), 0.5 * length * w)


def _norms(n_basis, length):
    h = np.full(n_basis, np.sqrt(length / 2.0))
    h[0] = np.sqrt(length)
    return h


def basis_table(xs, n_basis, length):
    """phi_k(x) for a batch of points: rows are points, columns k."""
    xs = np.atleast_1d(np.asarray(xs, dtype=np.float64))
    k = np.arange(n_basis)
    return np.cos(2.0 * np.pi / length * np.outer(xs, k)) / _norms(n_basis, length)


def basis_grad_table(xs, n_basis, length):
    """d phi_k / dx for a batch of points."""
    xs = np.atleast_1d(np.asarray(xs, dtype=np.float64))
    k = np.arange(n_basis)
    freq = 2.0 * np.pi * k / length
    return -freq * np.sin(np.outer(xs, freq)) / _norms(n_basis, length)


def _check_domain(x, length):
    if np.any(np.asarray(x) < 0) or np.any(np.asarray(x) > length):
        raise ValueError(f"point {x} outside [0, {length}]")


def basis_eval(x, cfg):
    """Vector (phi_1(x), ..., phi_K(x)) at a scalar coordinate."""
    _check_domain(x, cfg.length)
    return basis_table(x, cfg.n_basis, cfg.length)[0]


def basis_grad(x, cfg):
    """Entrywise derivative of basis_eval; vanishes at both walls."""
    _check_domain(x, cfg.length)
    return basis_grad_table(x, cfg.n_basis, cfg.length)[0]


def phi_rank1(x, cfg):
    """Rank-1 basis tensor Phi(x) = phi(x_1) o ... o phi(x_d)."""
    x = np.asarray(x, dtype=np.float64)
    _check_domain(x, cfg.length)
    rows = basis_table(x, cfg.n_basis, cfg.length)
    return TtTensor([row.reshape(1, 1, -1) for row in rows])


def grad_phi_rank1(x, axis, cfg):
    """Rank-1 gradient tensor: phi rows with the derivative row at ``axis``.

    Stores exactly K*d scalars. ``axis`` is 0-based.
    """
    x = np.asarray(x, dtype=np.float64)
    if not 0 <= axis < cfg.dim:
        raise ValueError(f"axis {axis} out of range for dim {cfg.dim}")
    _check_domain(x, cfg.length)
    rows = basis_table(x, cfg.n_basis, cfg.length)
    rows[axis] = basis_grad_table(x[axis], cfg.n_basis, cfg.length)[0]
    return TtTensor([row.reshape(1, 1, -1) for row in rows])


def lambda_weights(cfg, eps=1e-2, rank_cap=2, seed=0):
    """Frequency-weight tensor (1 + |k - 1|^2)^(-(d+1)/2) in TT form.

    The weight of the entry at index tuple k depends on the frequency
    vector k - 1 of the basis functions it multiplies (index 1 is the
    constant mode), so large-scale agreement is prioritized before fine
    detail. Built by cross approximation and compressed to ``rank_cap``.
    """
    d = cfg.dim
    expo = -(d + 1) / 2.0

    def oracle(idx):
        freq = idx.astype(np.float64) - 1.0
        return (1.0 + np.sum(freq**2, axis=1)) ** expo

    t = tt_cross(oracle, (cfg.n_basis,) * d, eps, seed=seed)
    if rank_cap is not None:
        t = tt_round(t, max_rank=rank_cap)
    return t


def discretize_density(dist, cfg, eps=1e-2, seed=0, full_output=False):
    """Cross-approximate the density on the Gauss-Legendre tensor grid."""
    rule = quadrature_rule(cfg.quad_degree, cfg.length)
    nodes = rule.nodes

    def oracle(idx):
        return dist.pdf(nodes[idx - 1])

    return tt_cross(
        oracle,
        (cfg.quad_degree,) * cfg.dim,
        eps,
        seed=seed,
        full_output=full_output,
    )


def grid_mass(p_tt, rule):
    """Quadrature-weighted total mass of a discretized density."""
    from .tt import tt_inner, tt_rank1

    alpha = tt_rank1([rule.weights] * p_tt.order)
    return tt_inner(p_tt, alpha)


def coefficient_tensor(p_tt, rule, cfg):
    """Fourier coefficients of the density behind ``p_tt``, core by core.

    Each core of the discretized density is contracted against the
    quadrature-weighted basis table, so the result inherits the TT ranks
    of ``p_tt`` exactly.
    """
    if p_tt.mode_sizes != (rule.nodes.size,) * cfg.dim:
        raise ValueError(
            f"density grid {p_tt.mode_sizes} does not match quadrature "
            f"degree {rule.nodes.size}"
        )
    table = rule.weights[:, None] * basis_table(rule.nodes, cfg.n_basis, cfg.length)
    return TtTensor(
        [np.tensordot(c, table, axes=([2], [0])) for c in p_tt.cores]
    )


def coefficient_oracle(dist, cfg, n_quad=None):
    """Brute-force dense coefficient tensor for d <= 3 (test oracle).

    Deliberately naive: every coefficient re-evaluates the density over
    the whole tensor grid with scalar nested quadrature, the way a
    per-entry multidimensional-integration call would.
    """
    if cfg.dim > 3:
        raise ValueError(f"dense coefficient oracle is limited to d <= 3, got {cfg.dim}")
    n = n_quad if n_quad is not None else cfg.quad_degree
    rule = quadrature_rule(n, cfg.length)
    nodes, weights = rule.nodes, rule.weights
    phi = basis_table(nodes, cfg.n_basis, cfg.length)  # (n, K)
    d, k_total = cfg.dim, cfg.n_basis
    out = np.empty((k_total,) * d)
    point = np.empty(d)
    for k_idx in np.ndindex(*out.shape):
        acc = 0.0
        for j_idx in np.ndindex(*(n,) * d):
            w = 1.0
            for i in range(d):
                point[i] = nodes[j_idx[i]]
                w *= weights[j_idx[i]] * phi[j_idx[i], k_idx[i]]
            acc += w * dist.pdf(point)
        out[k_idx] = acc
    return DenseTensor(out)


# ---------------------------------------------------------------------------
# coefficient bundles


@dataclass(frozen=True)
class CoefficientSet:
    """Everything the control loop needs about a reference density."""

    w_hat: TtTensor
    lam: TtTensor
    config: BasisConfig

    def __post_init__(self):
        shape = (self.config.n_basis,) * self.config.dim
        if self.w_hat.mode_sizes != shape or self.lam.mode_sizes != shape:
            raise ValueError("coefficient tensors do not match the basis config")


def build_coefficients(dist, cfg, cross_eps=1e-2, round_eps=1e-2, seed=0):
    """Preprocessing pipeline: discretize, contract, compress.

    ``round_eps`` controls the final low-energy cleanup of the
    coefficient tensor; pass None to keep the raw contraction.
    """
    p_tt = discretize_density(dist, cfg, eps=cross_eps, seed=seed)
    rule = quadrature_rule(cfg.quad_degree, cfg.length)
    w_hat = coefficient_tensor(p_tt, rule, cfg)
    if round_eps is not None:
        w_hat = tt_round(w_hat, eps=round_eps)
    lam = lambda_weights(cfg, seed=seed)
    return CoefficientSet(w_hat, lam, cfg)


# cache file: little-endian header (dim, n_basis, quad_degree int64,
# length float64) followed by the two tensors in the TT wire format.


def save_coefficients(cs, path):
    from .tt import tt_save

    with open(path, "wb") as fh:
        cfg = cs.config
        fh.write(np.array([cfg.dim, cfg.n_basis, cfg.quad_degree], dtype="<i8").tobytes())
        fh.write(np.array([cfg.length], dtype="<f8").tobytes())
        tt_save(cs.w_hat, fh)
        tt_save(cs.lam, fh)


def load_coefficients(path):
    from .tt import tt_load

    with open(path, "rb") as fh:
        dim, n_basis, quad_degree = np.frombuffer(fh.read(24), dtype="<i8")
        (length,) = np.frombuffer(fh.read(8), dtype="<f8")
        cfg = BasisConfig(int(dim), int(n_basis), float(length), int(quad_degree))
        w_hat = tt_load(fh)
        lam = tt_load(fh)
    return CoefficientSet(w_hat, lam, cfg)
