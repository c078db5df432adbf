"""Unit-quaternion geometry for 6D pose exploration.

Quaternions are length-4 arrays ``(qs, qx, qy, qz)`` with the scalar
part first. The logarithmic map sends a quaternion to a 3-vector in the
tangent chart of an anchor point, the exponential map brings it back,
and poses are encoded as 6-vectors (position + tangent coordinates) so
the ergodic engine can explore positions and orientations jointly.

The double cover is resolved by flipping any quaternion with negative
scalar part before taking the log, so q and -q always map to the same
tangent vector.
"""

import numpy as np

from .tt import ConvergenceError

_V_EPS = 1e-12


def qnormalize(q):
    q = np.asarray(q, dtype=np.float64)
    n = np.linalg.norm(q)
    if n < 1e-9:
        raise ValueError("cannot normalize a near-zero quaternion")
    return q / n


def qconj(q):
    return np.array([q[0], -q[1], -q[2], -q[3]])


def qmul(a, b):
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def qlog(q):
    """Tangent vector at the identity; sign-canonicalized arccos form.

    q and -q map to the same vector, so the chart covers geodesic radius
    pi/2 (rotations up to pi) and always returns the short representative.
    """
    q = np.asarray(q, dtype=np.float64)
    if q[0] < 0:
        q = -q
    vn = np.linalg.norm(q[1:])
    if vn < _V_EPS:
        return np.zeros(3)
    angle = np.arccos(min(q[0], 1.0))
    return angle * q[1:] / vn


def qexp(v):
    """Quaternion reached from the identity along tangent vector v."""
    v = np.asarray(v, dtype=np.float64)
    n = np.linalg.norm(v)
    if n < _V_EPS:
        return np.array([1.0, 0.0, 0.0, 0.0])
    return np.concatenate([[np.cos(n)], np.sin(n) * v / n])


def qlog_at(g, q):
    """Tangent image of q in the chart anchored at g."""
    return qlog(qmul(qconj(g), q))


def qexp_at(g, v):
    """Quaternion reached from g along tangent vector v (in g's chart)."""
    return qmul(g, qexp(v))


def qdist(a, b):
    """Geodesic distance (angle in the double-cover-resolved chart)."""
    return float(np.linalg.norm(qlog_at(a, b)))


def qmean(quats, tol=1e-9, max_iter=100):
    """Riemannian mean: fixed point of iterated tangent-space averaging.

    Initialized at the first element; requires the data to sit inside a
    geodesic ball of radius < pi/2 around the mean (raises otherwise,
    rather than silently picking one of several local means).
    """
    quats = [qnormalize(q) for q in quats]
    if not quats:
        raise ValueError("qmean needs at least one quaternion")
    mu = quats[0]
    residual = np.inf
    for _ in range(max_iter):
        tangents = np.array([qlog_at(mu, q) for q in quats])
        v = tangents.mean(axis=0)
        residual = np.linalg.norm(v)
        if residual <= tol:
            radii = np.linalg.norm(tangents, axis=1)
            if np.any(radii >= np.pi / 2):
                raise ValueError(
                    "orientations straddle the half-sphere: max geodesic "
                    f"radius {radii.max():.3f} >= pi/2, mean is not unique"
                )
            return mu
        mu = qnormalize(qexp_at(mu, v))
    raise ConvergenceError("Riemannian mean did not converge", residual)


# ---------------------------------------------------------------------------
# pose <-> 6-vector encoding


def pose_encode(p, q, anchor):
    """6-vector: position followed by the tangent image of q at the anchor."""
    return np.concatenate([np.asarray(p, dtype=np.float64), qlog_at(anchor, q)])


def pose_decode(x6, anchor):
    """Inverse of pose_encode: position and a unit quaternion."""
    x6 = np.asarray(x6, dtype=np.float64)
    return x6[:3].copy(), qexp_at(anchor, x6[3:])


def load_poses(path):
    """Pose dataset: rows ``px py pz qw qx qy qz``, ``#`` comments.

    Quaternions are renormalized; rows whose norm deviates from 1 by
    more than 1e-3 are rejected.
    """
    positions, quats = [], []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            toks = line.split()
            if len(toks) != 7:
                raise ValueError(f"{path}:{lineno}: expected 7 values, got {len(toks)}")
            vals = np.array([float(v) for v in toks])
            q = vals[3:]
            n = np.linalg.norm(q)
            if abs(n - 1.0) > 1e-3:
                raise ValueError(
                    f"{path}:{lineno}: quaternion norm {n:.6f} deviates from 1"
                )
            positions.append(vals[:3])
            quats.append(q / n)
    if not positions:
        raise ValueError(f"{path}: no pose rows found")
    return np.array(positions), np.array(quats)


def save_poses(path, positions, quats, comment=None):
    with open(path, "w", encoding="utf-8") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        fh.write("# px py pz qw qx qy qz\n")
        for p, q in zip(positions, quats):
            fh.write(" ".join(f"{v:.17g}" for v in (*p, *q)) + "\n")
