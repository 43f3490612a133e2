"""Per-cell virtual element basis: scaled monomials, DOFs and projectors.

Every cell carries the matrices needed to evaluate the L2-projected virtual
basis. The same container also serves the modal Taylor basis, for which the
degrees of freedom are the polynomial coefficients themselves.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .mesh import cell_geometry
from .quadrature import build_quadrature


class DegenerateCellError(ValueError):
    pass


def n_monomials(N):
    return (N + 1) * (N + 2) // 2 if N >= 0 else 0


class MonomialLayout:
    """Scaled monomials ((x-x_P)/h_P)^a ((y-y_P)/h_P)^b up to total degree N,
    degree by degree with the x exponent descending."""

    def __init__(self, N):
        self.N = N
        self.exps = [(a, d - a) for d in range(N + 1) for a in range(d, -1, -1)]
        self.n = len(self.exps)
        self.index = {e: i for i, e in enumerate(self.exps)}

    def __repr__(self):
        return f"MonomialLayout(N={self.N}, n={self.n})"


def eval_monomials(layout, center, h, pts, grad=False):
    """Values (npts, n) and, with ``grad``, x and y derivatives of the scaled
    monomials at ``pts`` (npts, 2)."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    X = (pts[:, 0] - center[0]) / h
    Y = (pts[:, 1] - center[1]) / h
    N = layout.N
    px = [np.ones_like(X)]
    py = [np.ones_like(Y)]
    for _ in range(N):
        px.append(px[-1] * X)
        py.append(py[-1] * Y)
    V = np.empty((len(X), layout.n))
    for i, (a, b) in enumerate(layout.exps):
        V[:, i] = px[a] * py[b]
    if not grad:
        return V
    Vx = np.zeros_like(V)
    Vy = np.zeros_like(V)
    for i, (a, b) in enumerate(layout.exps):
        if a:
            Vx[:, i] = a * px[a - 1] * py[b] / h
        if b:
            Vy[:, i] = b * px[a] * py[b - 1] / h
    return V, Vx, Vy


@dataclass(frozen=True)
class DofLayout:
    """Vertex values, interior Gauss-Lobatto values per edge, scaled moments."""

    N: int
    ne: int

    @property
    def n_vertex(self):
        return self.ne

    @property
    def n_edge(self):
        return (self.N - 1) * self.ne

    @property
    def n_moment(self):
        return n_monomials(self.N - 2)

    @property
    def ndof(self):
        return self.N * self.ne + self.N * (self.N - 1) // 2

    @property
    def moment_start(self):
        return self.N * self.ne

    def node_index(self, edge, j):
        """DOF index of Lobatto node j (0..N) on edge ``edge``."""
        if j == 0:
            return edge
        if j == self.N:
            return (edge + 1) % self.ne
        return self.ne + edge * (self.N - 1) + (j - 1)


def _checked_factor(A, what):
    A = np.asarray(A, dtype=float)
    lu, piv = sla.lu_factor(A, check_finite=True)
    if np.abs(np.diag(lu)).min() < 1e-14 * np.abs(A).max():
        raise DegenerateCellError(f"{what} is singular")
    return lu, piv


def solve_checked(A, B, what="matrix"):
    return sla.lu_solve(_checked_factor(A, what), B)


def condition_number(A):
    """Frobenius-norm condition number, +inf for singular matrices."""
    A = np.asarray(A, dtype=float)
    try:
        Ai = np.linalg.inv(A)
    except np.linalg.LinAlgError:
        return np.inf
    k = np.linalg.norm(A, "fro") * np.linalg.norm(Ai, "fro")
    return float(k) if np.isfinite(k) else np.inf


def orthogonalize(H):
    """Eigen-decomposition R H R^T = Lambda and Z = Lambda^{-1/2} R."""
    lam, V = np.linalg.eigh(H)
    if lam.min() <= 0.0:
        raise DegenerateCellError("H is not positive definite")
    R = V.T
    Z = R / np.sqrt(lam)[:, None]
    return Z, lam, R


class CellBasis:
    """Projector data of one cell.

    Coefficient conventions: ``Pi0`` maps DOFs to coefficients in the active
    polynomial basis b = T m (T = Z when orthogonalized, identity otherwise);
    ``Pi0_m`` and ``Pinabla`` are the same maps in the raw monomials; ``Pix``
    and ``Piy`` give derivative coefficients in the monomials of degree N-1.
    """

    kind = "vem"

    def __init__(self, verts, N, ortho=None, quad_degree=None, compress=True):
        if N < 1:
            raise ValueError("polynomial degree must be at least 1")
        self.verts = np.asarray(verts, dtype=float)
        self.N = N
        self.ortho = (N >= 3) if ortho is None else bool(ortho)
        xp, area, h, normals, lengths = cell_geometry(self.verts)
        self.center, self.area, self.h = xp, area, h
        self.normals, self.lengths = normals, lengths
        self.ne = len(self.verts)
        self.layout = MonomialLayout(N)
        self.layout1 = MonomialLayout(N - 1)
        self.nN = self.layout.n
        self.n1 = self.layout1.n
        qd = max(2 * N + 2, quad_degree or 0)
        self.quad = build_quadrature(self.verts, qd, n_lobatto=N + 1, center=xp, h=h,
                                     compress=compress)
        self._build()

    # -- helpers -------------------------------------------------------------
    def monomials(self, pts, grad=False):
        return eval_monomials(self.layout, self.center, self.h, pts, grad)

    def monomials1(self, pts):
        return eval_monomials(self.layout1, self.center, self.h, pts)

    def polys(self, pts):
        """Active polynomial basis b = T m at ``pts``."""
        return self.monomials(pts) @ self.T.T

    # -- construction --------------------------------------------------------
    def _build(self):
        N, ne, area, h = self.N, self.ne, self.area, self.h
        lay = self.layout
        dl = DofLayout(N, ne)
        self.dofs = dl
        nd = dl.ndof
        self.ndof = nd
        q = self.quad
        V, Vx, Vy = self.monomials(q.points, grad=True)
        w = q.weights
        H = (V * w[:, None]).T @ V
        K = (Vx * w[:, None]).T @ Vx + (Vy * w[:, None]).T @ Vy

        G = K.copy()
        if N == 1:
            G[0] = self.monomials(self.verts).mean(axis=0)
        else:
            G[0] = H[0] / area
        B = np.zeros((self.nN, nd))
        if N == 1:
            B[0, :ne] = 1.0 / ne
        else:
            B[0, dl.moment_start] = 1.0
        lay_m = MonomialLayout(N - 2) if N >= 2 else None
        for al, (a, b) in enumerate(lay.exps):
            if al == 0:
                continue
            # -int Laplacian(m_alpha) v, read from the moment DOFs
            for (da, db, c) in ((a - 2, b, a * (a - 1)), (a, b - 2, b * (b - 1))):
                if c and da >= 0 and db >= 0:
                    B[al, dl.moment_start + lay_m.index[(da, db)]] -= area * c / h ** 2
        # boundary term with the Lobatto nodes
        lp, lw = q.lobatto_points, q.lobatto_weights
        for k in range(ne):
            _, gx, gy = self.monomials(lp[k], grad=True)
            dn = gx * self.normals[k, 0] + gy * self.normals[k, 1]
            for j in range(N + 1):
                B[1:, dl.node_index(k, j)] += lw[k, j] * dn[j, 1:]
        Pinabla = solve_checked(G, B, "G")

        C = np.zeros((self.nN, nd))
        nm = dl.n_moment
        C[nm:] = (H @ Pinabla)[nm:]
        for al in range(nm):
            C[al, dl.moment_start + al] = area
        Pi0 = solve_checked(H, C, "H")

        # derivative projectors
        n1 = self.n1
        Hh = H[:n1, :n1]
        Ex = np.zeros((nd, n1))
        Ey = np.zeros((nd, n1))
        for al, (a, b) in enumerate(self.layout1.exps):
            if a:
                Ex[dl.moment_start + lay_m.index[(a - 1, b)], al] -= area * a / h
            if b:
                Ey[dl.moment_start + lay_m.index[(a, b - 1)], al] -= area * b / h
        for k in range(ne):
            m1 = self.monomials1(lp[k])
            for j in range(N + 1):
                idx = dl.node_index(k, j)
                Ex[idx] += lw[k, j] * m1[j] * self.normals[k, 0]
                Ey[idx] += lw[k, j] * m1[j] * self.normals[k, 1]
        Hh_f = _checked_factor(Hh, "H-hat")
        self.Pix = sla.lu_solve(Hh_f, Ex.T)
        self.Piy = sla.lu_solve(Hh_f, Ey.T)

        # DOF functionals applied to the monomials
        D = np.zeros((nd, self.nN))
        D[:ne] = self.monomials(self.verts)
        for k in range(ne):
            mv = self.monomials(lp[k])
            for j in range(1, N):
                D[dl.node_index(k, j)] = mv[j]
        if nm:
            D[dl.moment_start:] = H[:nm] / area

        self.G, self.B, self.Pinabla_m = G, B, Pinabla
        self.H, self.C, self.Pi0_m = H, C, Pi0
        self.Hhat, self.Ex, self.Ey = Hh, Ex, Ey
        self.D_m = D
        self._activate_basis()

    def _activate_basis(self):
        if self.ortho:
            self.Z, self.Lam, self.R = orthogonalize(self.H)
            T = self.Z
        else:
            self.Z = self.Lam = self.R = None
            T = np.eye(self.nN)
        self.T = T
        if self.ortho:
            # in the z basis the L2 system has identity matrix
            self.Pi0 = T @ self.C
            self.Pinabla = solve_checked(self.G @ T.T, self.B, "G")
        else:
            self.Pi0 = self.Pi0_m
            self.Pinabla = self.Pinabla_m
        self.Hb = T @ self.H @ T.T
        self.Db = self.D_m @ T.T

    # -- derived quantities ----------------------------------------------------
    @property
    def Hmix(self):
        """int b_alpha m_beta for beta in the degree N-1 monomials."""
        return self.T @ self.H[:, :self.n1]

    def stabilization(self):
        P = np.eye(self.ndof) - self.Db @ self.Pi0
        return P.T @ P

    def consistency_mass(self):
        return self.Pi0.T @ self.Hb @ self.Pi0

    def eval_basis(self, pts, grad=False):
        """phi_l at ``pts``: (npts, ndof); with ``grad`` also x/y derivatives."""
        phi = self.polys(pts) @ self.Pi0
        if not grad:
            return phi
        m1 = self.monomials1(pts)
        return phi, m1 @ self.Pix, m1 @ self.Piy

    def eval_poly_gradient(self, pts):
        """Exact x/y derivatives of the polynomials Pi0 phi_l at ``pts``."""
        _, mx, my = self.monomials(pts, grad=True)
        TT = self.T.T
        return mx @ TT @ self.Pi0, my @ TT @ self.Pi0

    def interpolate(self, f):
        """DOFs of a field f(points (n,2)) -> values (n,) or (n, k)."""
        dl, q = self.dofs, self.quad
        pts = [self.verts]
        for k in range(self.ne):
            pts.append(q.lobatto_points[k, 1:self.N])
        nodes = np.vstack(pts)
        vals = np.asarray(f(nodes), dtype=float)
        out = np.zeros((self.ndof,) + vals.shape[1:])
        out[:len(nodes)] = vals
        nm = dl.n_moment
        if nm:
            fq = np.asarray(f(q.points), dtype=float)
            m = self.monomials(q.points)[:, :nm]
            wq = q.weights[:, None] * m / self.area
            out[dl.moment_start:] = np.tensordot(wq, fq, axes=(0, 0))
        return out

    def dofs_of_poly(self, coeffs):
        """DOFs of the polynomial with monomial coefficients ``coeffs``."""
        return self.D_m @ coeffs


class ModalBasis(CellBasis):
    """Modal DG basis of scaled Taylor monomials; DOFs are coefficients."""

    kind = "taylor"

    def __init__(self, verts, N, ortho=False, quad_degree=None, compress=True):
        super().__init__(verts, N, ortho=ortho, quad_degree=quad_degree, compress=compress)

    def _build(self):
        self.ndof = self.nN
        q = self.quad
        V = self.monomials(q.points)
        self.H = (V * q.weights[:, None]).T @ V
        Dx = np.zeros((self.n1, self.nN))
        Dy = np.zeros((self.n1, self.nN))
        for al, (a, b) in enumerate(self.layout.exps):
            if a:
                Dx[self.layout1.index[(a - 1, b)], al] = a / self.h
            if b:
                Dy[self.layout1.index[(a, b - 1)], al] = b / self.h
        self._Dx, self._Dy = Dx, Dy
        self.G = self.B = self.C = None
        self.Hhat = self.H[:self.n1, :self.n1]
        self.dofs = None
        self._activate_basis()

    def _activate_basis(self):
        if self.ortho:
            self.Z, self.Lam, self.R = orthogonalize(self.H)
            T = self.Z
        else:
            self.Z = self.Lam = self.R = None
            T = np.eye(self.nN)
        self.T = T
        # DOFs are coefficients in b = T m, so monomial coefficients are T^T c
        self.Pi0 = np.eye(self.nN)
        self.Pi0_m = T.T.copy()
        self.Pinabla = self.Pi0
        self.Pinabla_m = self.Pi0_m
        self.Pix = self._Dx @ T.T
        self.Piy = self._Dy @ T.T
        self.Hb = T @ self.H @ T.T
        self.Db = np.eye(self.nN)
        self.D_m = np.linalg.inv(T.T)

    def interpolate(self, f):
        q = self.quad
        fq = np.asarray(f(q.points), dtype=float)
        b = self.polys(q.points) * q.weights[:, None]
        rhs = np.tensordot(b, fq, axes=(0, 0))
        return np.linalg.solve(self.Hb, rhs)


def build_basis(verts, N, kind="vem", ortho=None, **kw):
    if kind == "vem":
        return CellBasis(verts, N, ortho=ortho, **kw)
    if kind in ("taylor", "modal"):
        return ModalBasis(verts, N, ortho=bool(ortho), **kw)
    raise ValueError(f"unknown basis kind {kind!r}")
