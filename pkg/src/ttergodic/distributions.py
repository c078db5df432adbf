"""Reference densities on the exploration box and the task-space mapping.

All densities are evaluable pointwise (vectorized over row-stacked
points) and samplable with an explicit RNG. They are immutable after
construction; ``pdf`` is pure and re-entrant so cross approximation may
evaluate it from several workers.
"""

import numpy as np
import scipy.linalg


class Uniform:
    """Constant density 1 / L^d on the box [0, L]^d."""

    def __init__(self, dim, length=1.0):
        if dim < 1 or length <= 0:
            raise ValueError(f"bad uniform parameters dim={dim}, length={length}")
        self.dim = int(dim)
        self.length = float(length)
        self._value = self.length**-self.dim

    def pdf(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            return self._value
        return np.full(x.shape[0], self._value)

    def sample(self, rng, n=None):
        size = (self.dim,) if n is None else (n, self.dim)
        return rng.uniform(0.0, self.length, size=size)


class IsotropicGaussian:
    """Spherical normal with scalar variance."""

    def __init__(self, mean, var):
        mean = np.asarray(mean, dtype=np.float64)
        if mean.ndim != 1 or var <= 0:
            raise ValueError("mean must be a vector and var positive")
        self.mean = mean
        self.var = float(var)
        self.dim = mean.size
        self._lognorm = -0.5 * self.dim * np.log(2.0 * np.pi * self.var)

    def pdf(self, x):
        x = np.asarray(x, dtype=np.float64)
        scalar = x.ndim == 1
        pts = x[None, :] if scalar else x
        q = np.sum((pts - self.mean) ** 2, axis=1) / self.var
        out = np.exp(self._lognorm - 0.5 * q)
        return float(out[0]) if scalar else out

    def sample(self, rng, n=None):
        size = (self.dim,) if n is None else (n, self.dim)
        return self.mean + np.sqrt(self.var) * rng.standard_normal(size)


class Gmm:
    """Gaussian mixture with full covariances.

    Weights must be positive and sum to one (within 1e-9); every
    covariance must factor as symmetric positive-definite.
    """

    def __init__(self, weights, means, covariances):
        weights = np.asarray(weights, dtype=np.float64)
        means = np.asarray(means, dtype=np.float64)
        covariances = np.asarray(covariances, dtype=np.float64)
        if weights.ndim != 1 or np.any(weights <= 0):
            raise ValueError("mixture weights must be positive")
        if abs(weights.sum() - 1.0) > 1e-9:
            raise ValueError(f"mixture weights sum to {weights.sum()!r}, not 1")
        if means.ndim != 2 or means.shape[0] != weights.size:
            raise ValueError("need one mean vector per component")
        d = means.shape[1]
        if covariances.shape != (weights.size, d, d):
            raise ValueError(f"covariances must be ({weights.size}, {d}, {d})")
        self._chol = []
        for m, cov in enumerate(covariances):
            if not np.allclose(cov, cov.T, atol=1e-10):
                raise ValueError(f"covariance of component {m} is not symmetric")
            try:
                low = np.linalg.cholesky(cov)
            except np.linalg.LinAlgError:
                raise ValueError(
                    f"covariance of component {m} is not positive definite"
                ) from None
            if np.min(np.diag(low)) ** 2 < 1e-10 * np.max(np.diag(low)) ** 2:
                raise ValueError(f"covariance of component {m} is nearly singular")
            self._chol.append(low)
        self.weights = weights
        self.means = means
        self.covariances = covariances
        self.dim = d
        self.n_components = weights.size
        self._lognorms = np.array(
            [
                -0.5 * d * np.log(2.0 * np.pi) - np.sum(np.log(np.diag(low)))
                for low in self._chol
            ]
        )

    def pdf(self, x):
        x = np.asarray(x, dtype=np.float64)
        scalar = x.ndim == 1
        pts = x[None, :] if scalar else x
        out = np.zeros(pts.shape[0])
        for w, mu, low, ln in zip(self.weights, self.means, self._chol, self._lognorms):
            z = scipy.linalg.solve_triangular(low, (pts - mu).T, lower=True)
            out += w * np.exp(ln - 0.5 * np.sum(z * z, axis=0))
        return float(out[0]) if scalar else out

    def sample(self, rng, n=None):
        count = 1 if n is None else n
        comps = rng.choice(self.n_components, size=count, p=self.weights)
        z = rng.standard_normal((count, self.dim))
        out = self.means[comps] + np.einsum(
            "nij,nj->ni", np.stack([self._chol[c] for c in comps]), z
        )
        return out[0] if n is None else out

    @property
    def mean(self):
        return self.weights @ self.means


def random_spherical_gmm(dim, n_components, var, rng, length=1.0, margin_sigmas=3.0):
    """Equally weighted spherical mixture with centers kept off the walls."""
    margin = margin_sigmas * np.sqrt(var)
    if 2 * margin >= length:
        raise ValueError("margin leaves no room for component centers")
    centers = rng.uniform(margin, length - margin, size=(n_components, dim))
    weights = np.full(n_components, 1.0 / n_components)
    covs = np.tile(var * np.eye(dim), (n_components, 1, 1))
    return Gmm(weights, centers, covs)


class DomainMap:
    """Componentwise affine bijection between a task-space box and [0, L]^d."""

    def __init__(self, lower, upper, length=1.0):
        lower = np.asarray(lower, dtype=np.float64)
        upper = np.asarray(upper, dtype=np.float64)
        if lower.shape != upper.shape or np.any(upper <= lower):
            raise ValueError("need upper > lower componentwise")
        self.lower = lower
        self.upper = upper
        self.length = float(length)
        self._scale = self.length / (upper - lower)

    @property
    def dim(self):
        return self.lower.size

    def forward(self, y):
        return (np.asarray(y, dtype=np.float64) - self.lower) * self._scale

    def inverse(self, x):
        return np.asarray(x, dtype=np.float64) / self._scale + self.lower

    def map_gmm(self, gmm):
        """Image of a mixture under the map (means shifted, covariances scaled)."""
        scale = self._scale
        means = (gmm.means - self.lower) * scale
        covs = gmm.covariances * scale[None, :, None] * scale[None, None, :]
        return Gmm(gmm.weights, means, covs)


# ---------------------------------------------------------------------------
# GMM text format: `gmm <M> <d>` then, per component, records
# `w <weight>`, `mu <d scalars>`, `cov <d*d scalars row-major>`.
# Whitespace-delimited; `#` starts a comment.


def gmm_from_file(path):
    """Parse and validate a mixture from the text format above."""
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if line:
                records.append((lineno, line.split()))

    def fail(lineno, msg):
        raise ValueError(f"{path}:{lineno}: {msg}")

    if not records:
        raise ValueError(f"{path}: empty GMM file")
    lineno, head = records[0]
    if len(head) != 3 or head[0] != "gmm":
        fail(lineno, f"expected 'gmm <M> <d>', got {' '.join(head)!r}")
    try:
        m, d = int(head[1]), int(head[2])
    except ValueError:
        fail(lineno, "component count and dimension must be integers")
    if m < 1 or d < 1:
        fail(lineno, f"bad GMM header: M={m}, d={d}")
    expected = [("w", 1), ("mu", d), ("cov", d * d)]
    body = records[1:]
    if len(body) != 3 * m:
        raise ValueError(
            f"{path}: expected {3 * m} component records for {m} components, "
            f"got {len(body)}"
        )
    weights, means, covs = [], [], []
    for c in range(m):
        parsed = {}
        for (key, count), (lineno, toks) in zip(expected, body[3 * c : 3 * c + 3]):
            if toks[0] != key:
                fail(lineno, f"expected '{key}' record, got {toks[0]!r}")
            if len(toks) - 1 != count:
                fail(lineno, f"'{key}' needs {count} values, got {len(toks) - 1}")
            try:
                parsed[key] = [float(v) for v in toks[1:]]
            except ValueError:
                fail(lineno, f"non-numeric value in '{key}' record")
        weights.append(parsed["w"][0])
        means.append(parsed["mu"])
        covs.append(np.reshape(parsed["cov"], (d, d)))
    return Gmm(weights, means, covs)


def gmm_to_file(gmm, path, comment=None):
    """Write a mixture in the text format read by gmm_from_file."""
    with open(path, "w", encoding="utf-8") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        fh.write(f"gmm {gmm.n_components} {gmm.dim}\n")
        for w, mu, cov in zip(gmm.weights, gmm.means, gmm.covariances):
            fh.write(f"w {w:.17g}\n")
            fh.write("mu " + " ".join(f"{v:.17g}" for v in mu) + "\n")
            fh.write("cov " + " ".join(f"{v:.17g}" for v in cov.ravel()) + "\n")
