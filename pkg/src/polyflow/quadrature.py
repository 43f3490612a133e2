"""Quadrature rules on intervals, triangles and star-shaped polygons."""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import nnls
from scipy.special import roots_jacobi

MAX_DEGREE = 20


@lru_cache(maxsize=None)
def gauss_legendre(n):
    """n-point Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def gauss_lobatto(n):
    """n-point Gauss-Lobatto nodes and weights on [0, 1] (endpoints included)."""
    if n < 2:
        raise ValueError("Gauss-Lobatto needs at least 2 points")
    p = np.polynomial.legendre.Legendre.basis(n - 1)
    interior = np.sort(p.deriv().roots().real)
    x = np.concatenate(([-1.0], interior, [1.0]))
    w = 2.0 / (n * (n - 1) * p(x) ** 2)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def triangle_rule(degree):
    """Conical-product rule on the reference triangle (0,0), (1,0), (0,1).

    Collapsed coordinates x = s(1-t), y = t with Gauss-Legendre in s and
    Gauss-Jacobi (weight 1-t) in t. Exact for total degree <= degree.
    """
    k = degree // 2 + 1
    s, ws = gauss_legendre(k)
    xj, wj = roots_jacobi(k, 1.0, 0.0)
    t = 0.5 * (xj + 1.0)
    wt = 0.25 * wj
    S, T = np.meshgrid(s, t, indexing="ij")
    W = np.outer(ws, wt)
    pts = np.column_stack(((S * (1.0 - T)).ravel(), T.ravel()))
    return pts, W.ravel()


def _scaled_vandermonde(pts, center, h, degree):
    X = (pts[:, 0] - center[0]) / h
    Y = (pts[:, 1] - center[1]) / h
    cols = []
    for d in range(degree + 1):
        for a in range(d, -1, -1):
            cols.append(X ** a * Y ** (d - a))
    return np.column_stack(cols)


def fan_rule(vertices, center, degree):
    """Interior rule from the fan of triangles (center, v_i, v_i+1)."""
    ref_pts, ref_w = triangle_rule(degree)
    v = np.asarray(vertices, dtype=float)
    a = np.asarray(center, dtype=float)
    b = v
    c = np.roll(v, -1, axis=0)
    e1 = b - a
    e2 = c - a
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    pts = a[None, None, :] + ref_pts[None, :, 0:1] * e1[:, None, :] \
        + ref_pts[None, :, 1:2] * e2[:, None, :]
    w = ref_w[None, :] * det[:, None]
    return pts.reshape(-1, 2), w.ravel()


def compress_rule(pts, w, center, h, degree, rtol=1e-13):
    """Positive sub-rule with the same moments up to ``degree`` (Tchakaloff/NNLS).

    Returns the original rule when the compressed moments do not match to
    ``rtol`` relative.
    """
    V = _scaled_vandermonde(pts, center, h, degree)
    # orthogonalize the columns so the NNLS system is well scaled
    Q, R = np.linalg.qr(V * np.sqrt(w)[:, None])
    Vo = np.linalg.solve(R.T, V.T)  # rows: orthonormal basis at the points
    moments = Vo @ w
    wc, _ = nnls(Vo, moments, maxiter=50 * V.shape[0])
    keep = wc > 0.0
    if keep.sum() >= len(w):
        return pts, w
    res = np.abs(Vo[:, keep] @ wc[keep] - moments).max()
    if res > rtol * np.abs(moments).max():
        return pts, w
    return pts[keep], wc[keep]


@dataclass(frozen=True)
class CellQuadrature:
    """Quadrature data for one polygonal cell.

    ``edge_points``/``edge_weights`` hold Gauss-Legendre rules per edge with
    shape (Ne, ng, 2) and (Ne, ng); ``lobatto_points`` has shape (Ne, N+1, 2),
    running from vertex i to vertex i+1.
    """

    points: np.ndarray
    weights: np.ndarray
    degree: int
    edge_points: np.ndarray
    edge_weights: np.ndarray
    lobatto_points: np.ndarray
    lobatto_weights: np.ndarray


def edge_rule(vertices, npts):
    v = np.asarray(vertices, dtype=float)
    nxt = np.roll(v, -1, axis=0)
    s, ws = gauss_legendre(npts)
    length = np.hypot(*(nxt - v).T)
    pts = v[:, None, :] + s[None, :, None] * (nxt - v)[:, None, :]
    return pts, length[:, None] * ws[None, :]


def lobatto_rule(vertices, npts):
    v = np.asarray(vertices, dtype=float)
    nxt = np.roll(v, -1, axis=0)
    s, ws = gauss_lobatto(npts)
    length = np.hypot(*(nxt - v).T)
    pts = v[:, None, :] + s[None, :, None] * (nxt - v)[:, None, :]
    return pts, length[:, None] * ws[None, :]


def build_quadrature(vertices, degree, n_lobatto=2, center=None, h=None,
                     compress=True):
    """Interior, edge and Lobatto rules for a star-shaped polygon.

    The interior rule is exact for polynomials up to ``degree``; the edge
    Gauss rule uses ceil((degree+1)/2) points.
    """
    if degree < 0 or degree > MAX_DEGREE:
        raise ValueError(f"unsupported quadrature degree {degree} (0..{MAX_DEGREE})")
    v = np.asarray(vertices, dtype=float)
    if center is None:
        center = v.mean(axis=0)
    pts, w = fan_rule(v, center, degree)
    if compress and degree > 0:
        if h is None:
            h = np.sqrt(abs(w.sum()))
        pts, w = compress_rule(pts, w, center, h, degree)
    ng = -(-(degree + 1) // 2)
    ep, ew = edge_rule(v, max(ng, 1))
    lp, lw = lobatto_rule(v, max(n_lobatto, 2))
    return CellQuadrature(pts, w, degree, ep, ew, lp, lw)
