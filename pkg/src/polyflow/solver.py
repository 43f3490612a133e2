"""Time marching: ADER predictor-corrector and Runge-Kutta on VEM-DG cells.

Cells are grouped by their number of degrees of freedom so every per-cell
operation becomes a stacked matrix product over the group. Half-edge trace
points are numbered globally; faces gather left/right traces from that
numbering and scatter the numerical fluxes back.
"""

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import mesh as pm
from .gas import AdmissibilityError, max_viscous_speed, prim_to_cons, sound_speed
from .kernels import cell_flux
from .quadrature import gauss_legendre
from .rk import get_tableau
from .spacetime import TimeBasis, assemble_mass, spatial_derivative_matrices
from .vem import build_basis

log = logging.getLogger(__name__)

GBAR = 0.1
FLAG_THRESHOLD = 1e-10


def worker_count():
    env = os.environ.get("POLYFLOW_THREADS")
    n = os.cpu_count() or 1
    if env:
        try:
            n = max(1, min(n, int(env)))
        except ValueError:
            log.warning("ignoring POLYFLOW_THREADS=%r", env)
    return n


def pmap(fn, items):
    """Map over items with up to POLYFLOW_THREADS worker threads."""
    items = list(items)
    nw = min(worker_count(), len(items))
    if nw <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(nw) as ex:
        return list(ex.map(fn, items))


@dataclass
class SolverOptions:
    basis: str = "vem"  # vem | taylor
    ortho: object = None  # None: on for N >= 3
    stab_scale: float = 1.0  # multiplier of the K1 stabilization
    flux_moments: object = None  # pointwise | quadrature; None: quadrature for N >= 3
    cfl_local_h: bool = True
    tol: float = 1e-12
    max_iter: object = None  # None: 2N + 2
    limiter: str = "off"  # off | detect | on
    compress: bool = True
    volume_degree: object = None  # None: 2N + 2
    volume_gradient: str = "polynomial"  # polynomial | projector (test-function gradients)


class Group:
    """Stacked per-cell arrays for all cells sharing one DOF count."""

    def __init__(self, cells, bases, disc):
        self.cells = np.asarray(cells)
        n = len(cells)
        self.n = n
        b0 = bases[0]
        self.nd = nd = b0.ndof
        self.ne = b0.ne if b0.kind == "vem" else None
        self.kind = b0.kind
        N = disc.N
        tb = disc.tb

        def stack(fn):
            return np.stack([fn(b) for b in bases])

        M = stack(assemble_mass)
        self.Minv = np.linalg.inv(M)
        self.M = M
        self.Pi0 = stack(lambda b: b.Pi0)
        self.Pix = stack(lambda b: b.Pix)
        self.Piy = stack(lambda b: b.Piy)

        # predictor operators, Kronecker factored: K1 = T1 (x) A
        Mc = stack(lambda b: b.consistency_mass())
        S = stack(lambda b: b.stabilization())
        SxSy = [spatial_derivative_matrices(b) for b in bases]
        A = Mc + disc.opts.stab_scale * S
        Ainv = np.linalg.inv(A)
        self.P0 = Ainv @ Mc
        self.PS = disc.opts.stab_scale * (Ainv @ S)
        # DOFs of the constant 1; derivative operators annihilate it exactly
        self.one = np.stack([b.interpolate(lambda X: np.ones(len(X))) for b in bases])
        self.PX = Ainv @ np.stack([s[0] for s in SxSy])
        self.PY = Ainv @ np.stack([s[1] for s in SxSy])
        self.PXY = np.concatenate((self.PX, self.PY), axis=2)

        # volume quadrature (padded)
        vd = disc.opts.volume_degree
        qsets = []
        for b in bases:
            if vd is None or vd == b.quad.degree:
                qsets.append((b.quad.points, b.quad.weights))
            else:
                from .quadrature import build_quadrature
                q = build_quadrature(b.verts, vd, center=b.center, h=b.h,
                                     compress=disc.opts.compress)
                qsets.append((q.points, q.weights))
        nq = max(len(w) for _, w in qsets)
        self.nq = nq
        self.qpts = np.zeros((n, nq, 2))
        self.qw = np.zeros((n, nq))
        self.Vq = np.zeros((n, nq, nd))
        self.Vqx = np.zeros((n, nq, nd))
        self.Vqy = np.zeros((n, nq, nd))
        for i, (b, (p, w)) in enumerate(zip(bases, qsets)):
            k = len(w)
            self.qpts[i, :k] = p
            self.qpts[i, k:] = b.center
            self.qw[i, :k] = w
            # padded points sit at the center with zero weight but must stay admissible
            pp = np.vstack([p, np.repeat(b.center[None], nq - k, axis=0)])
            self.Vq[i], self.Vqx[i], self.Vqy[i] = b.eval_basis(pp, grad=True)
        if disc.opts.volume_gradient == "projector":
            Tx, Ty = self.Vqx, self.Vqy
        elif disc.opts.volume_gradient == "polynomial":
            Tx = np.zeros_like(self.Vqx)
            Ty = np.zeros_like(self.Vqy)
            for i, (b, (p, w)) in enumerate(zip(bases, qsets)):
                Tx[i, :len(w)], Ty[i, :len(w)] = b.eval_poly_gradient(p)  # padded rows unused
        else:
            raise ValueError(f"unknown volume gradient {disc.opts.volume_gradient!r}")
        self.WX = np.ascontiguousarray((Tx * self.qw[..., None]).transpose(0, 2, 1))
        self.WY = np.ascontiguousarray((Ty * self.qw[..., None]).transpose(0, 2, 1))
        # stacked copies: one batched product instead of several
        self.Vq3 = np.concatenate((self.Vq, self.Vqx, self.Vqy), axis=1)
        self.WXY = np.concatenate((self.WX, self.WY), axis=2)

        # mean and integral rows
        self.irow = np.stack([(b.quad.weights @ b.polys(b.quad.points)) @ b.Pi0 for b in bases])
        self.area = np.array([b.area for b in bases])
        self.h = np.array([b.h for b in bases])
        self.mrow = self.irow / self.area[:, None]

        # half-edge Gauss points
        s, _ = gauss_legendre(N + 1)
        self.ng = len(s)
        ne_list = [b.ne for b in bases]
        npt = max(ne_list) * self.ng
        if len(set(ne_list)) != 1:
            raise AssertionError("group mixes edge counts")
        self.Et = np.zeros((n, npt, nd))
        self.Etx = np.zeros((n, npt, nd))
        self.Ety = np.zeros((n, npt, nd))
        for i, b in enumerate(bases):
            v = b.verts
            nxt = np.roll(v, -1, axis=0)
            pts = (v[:, None, :] + s[None, :, None] * (nxt - v)[:, None, :]).reshape(-1, 2)
            self.Et[i], self.Etx[i], self.Ety[i] = b.eval_basis(pts, grad=True)
        self.EtT = np.ascontiguousarray(self.Et.transpose(0, 2, 1))
        self.Et3 = np.concatenate((self.Et, self.Etx, self.Ety), axis=1)
        self.he_points = np.stack([disc.he_offset[c] * self.ng + np.arange(npt) for c in cells])

        # flux DOFs inside the predictor
        if self.kind == "vem":
            D1 = []
            for b in bases:
                d = np.zeros((nd, b.n1))
                nodes = [b.verts] + [b.quad.lobatto_points[k, 1:N] for k in range(b.ne)]
                nodes = np.vstack(nodes)
                d[:len(nodes)] = b.monomials1(nodes)
                nm = b.dofs.n_moment
                if nm:
                    d[b.dofs.moment_start:] = b.H[:nm, :b.n1] / b.area
                D1.append(d)
            D1 = np.stack(D1)
            self.Gxd = D1 @ self.Pix
            self.Gyd = D1 @ self.Piy
            self.Gd2 = np.concatenate((self.Gxd, self.Gyd), axis=1)
            self.mstart = bases[0].dofs.moment_start
            self.nm = bases[0].dofs.n_moment
            mode = disc.flux_moments
            self.moment_quadrature = self.nm > 0 and mode == "quadrature"
            if self.moment_quadrature:
                Wm = np.zeros((n, self.nm, nq))
                for i, b in enumerate(bases):
                    Wm[i] = (b.monomials(self.qpts[i])[:, :self.nm] * self.qw[i][:, None]).T / b.area
                self.Wm = Wm
        else:
            # modal: L2 projection of the flux onto the polynomial basis
            proj = np.zeros((n, nd, nq))
            for i, b in enumerate(bases):
                bq = b.polys(self.qpts[i]) * self.qw[i][:, None]
                proj[i] = np.linalg.solve(b.Hb, bq.T)
            self.Proj = proj


def rusanov_flux(QL, GxL, GyL, QR, GxR, GyR, n, hL, hR, N, gas, muL, kL, muR, kR):
    """Rusanov flux with the viscous penalty eta lambda_v.

    Arrays share leading shapes; ``n`` has the leading shape plus (2,).
    ``GxL`` etc. may be None for inviscid evaluations.
    """
    fL, gL = cell_flux(QL, GxL, GyL, gas, muL, kL)
    fR, gR = cell_flux(QR, GxR, GyR, gas, muR, kR)
    nx = n[..., 0:1]
    ny = n[..., 1:2]
    cL = np.hypot(QL[..., 1], QL[..., 2]) / QL[..., 0] + _safe_c(QL, gas)
    cR = np.hypot(QR[..., 1], QR[..., 2]) / QR[..., 0] + _safe_c(QR, gas)
    lam_c = np.maximum(cL, cR)
    lam_v = np.maximum(max_viscous_speed(QL[..., 0], gas, _bcast(muL, QL), _bcast(kL, QL)),
                       max_viscous_speed(QR[..., 0], gas, _bcast(muR, QR), _bcast(kR, QR)))
    eta = (2 * N + 1) / ((hL + hR) * np.sqrt(0.5 * np.pi))
    smax = lam_c + 2.0 * eta * lam_v
    # in place on the fresh flux arrays:
    # 0.5 * ((fL + fR) nx + (gL + gR) ny - smax (QR - QL))
    fL += fR
    fL *= nx
    gL += gR
    gL *= ny
    fL += gL
    jump = QR - QL
    jump *= smax[..., None]
    fL -= jump
    fL *= 0.5
    return fL


def _bcast(a, Q):
    """Per-face coefficient reshaped to broadcast against Q[..., 0]."""
    a = np.asarray(a, dtype=float)
    return a if a.ndim == 0 else a.reshape(a.shape + (1,) * (Q.ndim - 1 - a.ndim))


def _safe_c(Q, gas):
    # the wave speed bound must stay finite at trace points with slightly negative pressure
    p = (gas.gamma - 1.0) * (Q[..., 3] - 0.5 * (Q[..., 1] ** 2 + Q[..., 2] ** 2) / Q[..., 0])
    return np.sqrt(gas.gamma * np.abs(p / Q[..., 0]))


def rusanov_eta(N, hL, hR):
    return (2 * N + 1) / ((hL + hR) * np.sqrt(0.5 * np.pi))


@dataclass
class Field:
    """DOFs per group, shape (n_g, nd_g, 4), plus time and step counter."""

    dofs: list
    t: float = 0.0
    step: int = 0
    mu: np.ndarray = None
    kappa: np.ndarray = None
    beta: np.ndarray = None
    troubled: np.ndarray = None

    def copy(self):
        return Field([u.copy() for u in self.dofs], self.t, self.step,
                     None if self.mu is None else self.mu.copy(),
                     None if self.kappa is None else self.kappa.copy(),
                     None if self.beta is None else self.beta.copy(),
                     None if self.troubled is None else self.troubled.copy())


@dataclass
class StepInfo:
    step: int
    t: float
    dt: float
    troubled: int
    mass: float
    energy: float
    iterations: int = 0
    residual: float = 0.0
    predictor_failures: int = 0

    def line(self):
        return (f"step={self.step} t={self.t:.10g} dt={self.dt:.6e} troubled={self.troubled} "
                f"mass={self.mass:.15e} energy={self.energy:.15e}")


class Discretization:
    """Mesh, per-cell bases and stacked operators for a given degree N."""

    def __init__(self, mesh, N, gas, opts=None, boundary_state=None):
        self.mesh = mesh
        self.N = N
        self.gas = gas
        self.opts = opts or SolverOptions()
        self.boundary_state = boundary_state
        self.tb = TimeBasis(N)
        fm = self.opts.flux_moments
        self.flux_moments = fm if fm is not None else ("quadrature" if N >= 3 else "pointwise")
        if self.flux_moments not in ("pointwise", "quadrature"):
            raise ValueError(f"unknown flux moment rule {self.flux_moments!r}")
        self.max_iter = self.opts.max_iter or 2 * N + 2
        self.Tw = np.linalg.inv(self.tb.T1) * self.tb.weights[None, :]
        nc = mesh.n_cells
        self.he_offset = np.concatenate(([0], np.cumsum(mesh.cell_nv)[:-1]))
        kind = self.opts.basis
        vd = self.opts.volume_degree

        def mk(i):
            return build_basis(mesh.cell_vertices(i), N, kind, ortho=self.opts.ortho,
                               compress=self.opts.compress,
                               quad_degree=vd if (vd or 0) > 2 * N + 2 else None)

        self.bases = pmap(mk, range(nc))
        keys = {}
        for i, b in enumerate(self.bases):
            keys.setdefault((b.ndof, b.ne), []).append(i)
        self.groups = []
        self.cell_group = np.zeros(nc, dtype=np.int64)
        self.cell_pos = np.zeros(nc, dtype=np.int64)
        built = pmap(lambda kv: Group(kv[1], [self.bases[i] for i in kv[1]], self),
                     sorted(keys.items()))
        for g, grp in enumerate(built):
            self.groups.append(grp)
            self.cell_group[grp.cells] = g
            self.cell_pos[grp.cells] = np.arange(grp.n)
        self.ng = N + 1
        self.n_he_points = int(mesh.cell_nv.sum()) * self.ng
        self._build_faces()

    def _build_faces(self):
        m = self.mesh
        ng = self.ng
        s, ws = gauss_legendre(ng)
        ar = np.arange(ng)
        L = m.face_cells[:, 0]
        R = m.face_cells[:, 1]
        self.fL_pts = (self.he_offset[L] + m.face_local[:, 0])[:, None] * ng + ar[None, :]
        inner = R >= 0
        self.inner = np.flatnonzero(inner)
        self.bnd = np.flatnonzero(~inner)
        Ri = R[inner]
        self.fR_pts = (self.he_offset[Ri] + m.face_local[inner, 1])[:, None] * ng + ar[::-1][None, :]
        self.f_w = m.face_length[:, None] * ws[None, :]
        self.f_n = m.face_normal
        self.f_xy = m.face_xa[:, None, :] + s[None, :, None] * (m.face_xb - m.face_xa)[:, None, :]
        self.f_hL = m.h[L]
        self.f_hR = np.where(inner, m.h[np.maximum(R, 0)], m.h[L])
        self.bkind = m.face_kind[self.bnd]

    # -- helpers -----------------------------------------------------------
    def project(self, prim_fn):
        """DOFs of the conserved variables of a primitive field f(x, y)."""
        gas = self.gas
        out = []
        for g in self.groups:
            u = np.zeros((g.n, g.nd, 4))
            for i, c in enumerate(g.cells):
                b = self.bases[c]
                u[i] = b.interpolate(
                    lambda X: prim_to_cons(prim_fn(X[:, 0], X[:, 1]), gas))
            out.append(u)
        return Field(out)

    def to_global(self, per_group):
        """Scatter per-group arrays (n_g, ...) to one array over cells."""
        first = per_group[0]
        out = np.zeros((self.mesh.n_cells,) + first.shape[1:], dtype=first.dtype)
        for g, a in zip(self.groups, per_group):
            out[g.cells] = a
        return out

    def cell_means(self, field):
        return self.to_global([(g.mrow[:, None, :] @ u)[:, 0, :]
                               for g, u in zip(self.groups, field.dofs)])

    def totals(self, field):
        """Integral of each conserved variable over the domain."""
        tot = np.zeros(4)
        for g, u in zip(self.groups, field.dofs):
            tot += np.einsum("nd,ndv->v", g.irow, u)
        return tot

    def evaluate(self, field, cell, pts, grad=False):
        b = self.bases[cell]
        g = self.cell_group[cell]
        u = field.dofs[g][self.cell_pos[cell]]
        if not grad:
            return b.eval_basis(pts) @ u
        phi, dx, dy = b.eval_basis(pts, grad=True)
        return phi @ u, dx @ u, dy @ u


class Solver:
    """ADER or Runge-Kutta time marching on a Discretization."""

    def __init__(self, disc, integrator="ader"):
        self.disc = disc
        self.integrator = integrator
        if integrator.startswith("rk:"):
            self.tableau = get_tableau(integrator[3:])
            self.tableau.check()
        elif integrator != "ader":
            raise ValueError(f"unknown integrator {integrator!r}")
        self.last_predictor = None
        self.predictor_cells = None

    # -- physics parameters per cell --------------------------------------
    def _viscosity(self, field):
        d = self.disc
        nc = d.mesh.n_cells
        mu = field.mu if field.mu is not None else np.full(nc, d.gas.mu)
        kappa = field.kappa if field.kappa is not None else np.full(nc, d.gas.kappa)
        return mu, kappa

    # -- time step -------------------------------------------------------------
    def compute_dt(self, field, cfl, tf=None):
        d = self.disc
        means = d.cell_means(field)
        mu, kappa = self._viscosity(field)
        return compute_dt(means, d.mesh.h, d.gas, d.N, cfl, mu, kappa, field.t, tf,
                          local_h=d.opts.cfl_local_h)

    # -- predictor -------------------------------------------------------------
    def predict(self, field, dt):
        """Space-time DOFs per group, shape (n, nd, nt*4) (time-major inside)."""
        d = self.disc
        mu, kappa = self._viscosity(field)
        viscous = bool(np.any(mu) or np.any(kappa))
        out, iters, res, fails = [], 0, 0.0, []
        nc = d.mesh.n_cells
        counts = np.zeros(nc, dtype=int)
        finals = np.zeros(nc)
        for g, u in zip(d.groups, field.dofs):
            q, it, r, bad, cnt, fin = ader_predict_group(g, d, u, dt, mu[g.cells],
                                                         kappa[g.cells], viscous)
            out.append(q)
            counts[g.cells] = cnt
            finals[g.cells] = fin
            iters = max(iters, it)
            res = max(res, r)
            fails.extend(g.cells[bad].tolist())
        self.last_predictor = (iters, res, fails)
        self.predictor_cells = (counts, finals)
        return out

    # -- spatial residual ---------------------------------------------------------
    def residual(self, qs, field, tnodes, twts, dt):
        """Right-hand side per group: dt * time-weighted spatial operator.

        ``qs`` holds (n, nd, nt*4) arrays; ``tnodes`` are absolute times of the
        nt slices and ``twts`` the temporal weights (summing to one).
        """
        d = self.disc
        gas = d.gas
        nt = len(twts)
        mu, kappa = self._viscosity(field)
        viscous = bool(np.any(mu) or np.any(kappa))
        npts = d.n_he_points
        TR = np.empty((npts, nt, 4))
        TX = np.zeros((npts, nt, 4)) if viscous else None
        TY = np.zeros((npts, nt, 4)) if viscous else None
        rhs = []
        for g, q in zip(d.groups, qs):
            idx = g.he_points.ravel()
            gm, gk = mu[g.cells], kappa[g.cells]
            vis = (gm != 0) | (gk != 0)
            Qx = Qy = None
            if viscous and vis.all():
                npt = g.he_points.shape[1]
                E = (g.Et3 @ q).reshape(g.n, 3, npt, nt, 4)
                TR[idx] = E[:, 0].reshape(-1, nt, 4)
                TX[idx] = E[:, 1].reshape(-1, nt, 4)
                TY[idx] = E[:, 2].reshape(-1, nt, 4)
                V = (g.Vq3 @ q).reshape(g.n, 3, g.nq, nt, 4)
                Qv, Qx, Qy = V[:, 0], V[:, 1], V[:, 2]
            else:
                TR[idx] = (g.Et @ q).reshape(-1, nt, 4)
                Qv = (g.Vq @ q).reshape(g.n, g.nq, nt, 4)
            if viscous and not vis.all() and vis.any():
                # gradients only where viscosity or conductivity is active
                qv = q[vis]
                ix = g.he_points[vis].ravel()
                TX[ix] = (g.Etx[vis] @ qv).reshape(-1, nt, 4)
                TY[ix] = (g.Ety[vis] @ qv).reshape(-1, nt, 4)
                Qx = np.zeros_like(Qv)
                Qy = np.zeros_like(Qv)
                Qx[vis] = (g.Vqx[vis] @ qv).reshape(-1, g.nq, nt, 4)
                Qy[vis] = (g.Vqy[vis] @ qv).reshape(-1, g.nq, nt, 4)
            fg = np.empty((g.n, 2) + Qv.shape[1:])
            cell_flux(Qv, Qx, Qy, gas, gm, gk, out=(fg[:, 0], fg[:, 1]))
            fgs = _time_sum(fg.reshape(g.n, 2 * g.nq, nt, 4), twts)
            rhs.append(dt * (g.WXY @ fgs))

        # faces
        m = d.mesh
        nf = m.n_faces
        ng = d.ng
        FL = d.fL_pts
        QL = TR[FL]  # (nf, ng, nt, 4)
        QR = np.empty_like(QL)
        QR[d.inner] = TR[d.fR_pts]
        if viscous:
            XL, YL = TX[FL], TY[FL]
            XR = np.empty_like(XL)
            YR = np.empty_like(YL)
            XR[d.inner] = TX[d.fR_pts]
            YR[d.inner] = TY[d.fR_pts]
        else:
            XL = YL = XR = YR = None
        b = d.bnd
        if len(b):
            QR[b] = QL[b]
            if viscous:
                XR[b] = XL[b]
                YR[b] = YL[b]
            ext = np.isin(d.bkind, (pm.INFLOW, pm.DIRICHLET))
            if np.any(ext):
                if d.boundary_state is None:
                    raise ValueError("case provides no boundary state for inflow/dirichlet edges")
                fb = b[ext]
                xy = d.f_xy[fb]  # (nb, ng, 2)
                X = np.broadcast_to(xy[:, :, None, 0], (len(fb), ng, nt))
                Y = np.broadcast_to(xy[:, :, None, 1], (len(fb), ng, nt))
                T = np.broadcast_to(np.asarray(tnodes)[None, None, :], X.shape)
                QR[fb] = prim_to_cons(d.boundary_state(X, Y, T), gas)
        L = m.face_cells[:, 0]
        R = np.where(m.face_cells[:, 1] >= 0, m.face_cells[:, 1], L)
        n = np.broadcast_to(d.f_n[:, None, None, :], (nf, ng, nt, 2))
        hL = d.f_hL[:, None, None]
        hR = d.f_hR[:, None, None]
        muL, kL, muR, kR = mu[L], kappa[L], mu[R], kappa[R]
        Gn = rusanov_flux(QL, XL, YL, QR, XR, YR, n, hL, hR, d.N, gas, muL, kL, muR, kR)
        Fw = dt * _time_sum(Gn, twts) * d.f_w[:, :, None]
        HE = np.empty((npts, 4))
        HE[FL] = -Fw
        HE[d.fR_pts] = Fw[d.inner]
        for k, (g, q) in enumerate(zip(d.groups, qs)):
            rhs[k] += g.EtT @ HE[g.he_points]
        return rhs

    # -- steps -------------------------------------------------------------
    def _check_means(self, field, step):
        d = self.disc
        means = d.cell_means(field)
        rho = means[:, 0]
        p = (d.gas.gamma - 1.0) * (means[:, 3] - 0.5 * (means[:, 1] ** 2 + means[:, 2] ** 2) / rho)
        bad = ~((rho > 0) & (p > 0))
        if np.any(bad):
            c = int(np.flatnonzero(bad)[0])
            raise AdmissibilityError(
                f"inadmissible cell mean in cell {c} at step {step}: rho={rho[c]:.4e} p={p[c]:.4e}",
                means[c])
        return means

    def update_limiter(self, field):
        d = self.disc
        mode = d.opts.limiter
        nc = d.mesh.n_cells
        if mode == "off":
            field.beta = np.zeros(nc)
            field.troubled = np.zeros(nc, dtype=bool)
            field.mu = field.kappa = None
            return
        from .limiter import apply_artificial_viscosity, detect_troubled
        means = d.cell_means(field)
        beta, flags = detect_troubled(means, d.mesh, d.gas, d.boundary_state, field.t)
        field.beta = beta
        field.troubled = flags
        if mode == "on":
            field.mu, field.kappa = apply_artificial_viscosity(flags, means, d.mesh, d.gas)
        else:
            field.mu = field.kappa = None

    def step(self, field, dt):
        """Advance ``field`` by dt; returns a new Field."""
        d = self.disc
        self.update_limiter(field)
        tb = d.tb
        if self.integrator == "ader":
            qs = self.predict(field, dt)
            rhs = self.residual(qs, field, field.t + tb.nodes * dt, tb.weights, dt)
            new = [u + g.Minv @ r for g, u, r in zip(d.groups, field.dofs, rhs)]
            fails = self.last_predictor[2]
        else:
            tab = self.tableau
            ks = []
            for i in range(tab.stages):
                us = [u.copy() for u in field.dofs]
                for j in range(i):
                    if tab.beta[i, j]:
                        for k in range(len(us)):
                            us[k] += dt * tab.beta[i, j] * ks[j][k]
                qs = [u.reshape(u.shape[0], u.shape[1], 4) for u in us]
                r = self.residual(qs, field, [field.t + tab.alpha[i] * dt], np.ones(1), 1.0)
                ks.append([g.Minv @ rr for g, rr in zip(d.groups, r)])
            new = [u.copy() for u in field.dofs]
            for i in range(tab.stages):
                for k in range(len(new)):
                    new[k] += dt * tab.c[i] * ks[i][k]
            fails = []
        out = Field(new, field.t + dt, field.step + 1, field.mu, field.kappa, field.beta,
                    None if field.troubled is None else field.troubled.copy())
        if fails:
            if out.troubled is None:
                out.troubled = np.zeros(d.mesh.n_cells, dtype=bool)
            out.troubled[fails] = True
            log.warning("predictor diverged in %d cells at step %d", len(fails), out.step)
        self._check_means(out, out.step)
        return out

    def run(self, field, tf, cfl, max_steps=None, callback=None, log_steps=True):
        """March to ``tf``; returns (final field, list of StepInfo)."""
        history = []
        self._check_means(field, field.step)
        while field.t < tf * (1 - 1e-14):
            if max_steps is not None and len(history) >= max_steps:
                break
            dt = self.compute_dt(field, cfl, tf)
            field = self.step(field, dt)
            tot = self.disc.totals(field)
            it, res, fails = self.last_predictor if self.integrator == "ader" else (0, 0.0, [])
            info = StepInfo(field.step, field.t, dt,
                            int(field.troubled.sum()) if field.troubled is not None else 0,
                            tot[0], tot[3], it, res, len(fails))
            history.append(info)
            if log_steps:
                log.info(info.line())
            if callback is not None:
                callback(field, info)
        return field, history


def compute_dt(means, h, gas, N, cfl, mu, kappa, t=0.0, tf=None, local_h=True):
    """CFL time step from cell means."""
    rho = means[:, 0]
    c = sound_speed(means, gas)
    lam_c = np.hypot(means[:, 1], means[:, 2]) / rho + c
    lam_v = max_viscous_speed(rho, gas, mu, kappa)
    hh = h if local_h else np.full_like(h, h.min())
    speed = np.max(lam_c + 2.0 * (2 * N + 1) / hh * lam_v)
    dt = cfl / (2 * N + 1) * h.min() / speed
    if not dt > 0.0 or not np.isfinite(dt):
        raise ValueError(f"non-positive time step {dt}")
    if tf is not None and t + dt > tf:
        dt = tf - t
    return dt


def ader_predict_group(g, d, u, dt, mu, kappa, viscous):
    """Fixed-point iteration of the local space-time problems of one group.

    Each cell iterates until its relative update falls below the tolerance
    or the iteration cap is reached; converged cells drop out of the active
    set. Returns q (n, nd, nt*4), the largest iteration count, the largest
    final residual, the mask of cells whose iteration diverged (those fall
    back to the initial guess), and per-cell iteration counts and residuals.
    """
    nt = d.N + 1
    n, nd = g.n, g.nd
    # A^-1 Mc u = u - A^-1 S u, and S annihilates constants
    base = u - g.PS @ (u - g.one[:, :, None] * u[:, :1])
    q0 = np.repeat(u[:, :, None, :], nt, axis=2)  # (n, nd, nt, 4)
    q = q0.copy()
    vis = ((mu != 0) | (kappa != 0)) if viscous else np.zeros(n, dtype=bool)
    prev = np.full(n, np.inf)
    grow = np.zeros(n, dtype=int)
    bad = np.zeros(n, dtype=bool)
    final = np.zeros(n)
    act = np.arange(n)
    count = np.zeros(n, dtype=int)
    it_max = 0
    with np.errstate(all="ignore"):
        for it in range(1, d.max_iter + 1):
            sub = None if len(act) == n else act
            qa = q if sub is None else q[sub]
            qn = _predictor_sweep(g, sub, qa, base if sub is None else base[sub],
                                  vis if sub is None else vis[sub],
                                  mu if sub is None else mu[sub],
                                  kappa if sub is None else kappa[sub], dt, d)
            na = len(act)
            diff = np.abs(qn - qa).reshape(na, -1).max(axis=1)
            scale = np.abs(qn).reshape(na, -1).max(axis=1)
            res = diff / np.maximum(scale, 1e-300)
            res[~np.isfinite(res)] = np.inf
            grow[act] = np.where(res > prev[act], grow[act] + 1, 0)
            prev[act] = res
            final[act] = res
            count[act] = it
            bad[act] |= grow[act] >= 3
            q[act] = qn
            it_max = it
            keep = (res >= d.opts.tol) & ~bad[act]
            act = act[keep]
            if len(act) == 0:
                break
    bad |= ~np.isfinite(q.reshape(n, -1)).all(axis=1)
    if np.any(bad):
        q[bad] = q0[bad]
    ok = ~bad
    rmax = float(final[ok].max()) if np.any(ok) else 0.0
    return q.reshape(n, nd, nt * 4), it_max, rmax, bad, count, final


def _time_sum(a, w):
    """sum_t w_t a[:, :, t] for arrays shaped (n, m, nt, 4)."""
    return np.einsum("imtk,t->imk", a, w)


def _take(a, sub):
    return a if sub is None else a[sub]


def _predictor_sweep(g, sub, q, base, vis, mu, kappa, dt, d):
    """One fixed-point update for the cells ``sub`` of a group (all if None)."""
    n, nd, nt = q.shape[0], g.nd, q.shape[2]
    gas = d.gas
    qf = q.reshape(n, nd, nt * 4)
    viscous = bool(vis.any())
    fg = np.empty((n, 2, nd, nt, 4))
    if g.kind == "vem":
        qx = qy = None
        if viscous and vis.all():
            G = (_take(g.Gd2, sub) @ qf).reshape(n, 2, nd, nt, 4)
            qx, qy = G[:, 0], G[:, 1]
        elif viscous:
            qx = np.zeros_like(q)
            qy = np.zeros_like(q)
            qx[vis] = (_take(g.Gxd, sub)[vis] @ qf[vis]).reshape(-1, nd, nt, 4)
            qy[vis] = (_take(g.Gyd, sub)[vis] @ qf[vis]).reshape(-1, nd, nt, 4)
        f, gg = cell_flux(q, qx, qy, gas, mu, kappa, out=(fg[:, 0], fg[:, 1]))
        if g.moment_quadrature:
            fq, gq = _quad_flux(g, sub, qf, nt, gas, mu, kappa, vis)
            s = g.mstart
            Wm = _take(g.Wm, sub)
            f[:, s:] = (Wm @ fq.reshape(n, g.nq, -1)).reshape(n, g.nm, nt, 4)
            gg[:, s:] = (Wm @ gq.reshape(n, g.nq, -1)).reshape(n, g.nm, nt, 4)
    else:
        fq, gq = _quad_flux(g, sub, qf, nt, gas, mu, kappa, vis)
        P = _take(g.Proj, sub)
        f, gg = fg[:, 0], fg[:, 1]
        f[:] = (P @ fq.reshape(n, g.nq, -1)).reshape(n, nd, nt, 4)
        gg[:] = (P @ gq.reshape(n, g.nq, -1)).reshape(n, nd, nt, 4)
    # subtracting a constant flux removes round-off that would spoil uniform states
    one = _take(g.one, sub)[:, :, None, None]
    f -= one * f[:, :1]
    gg -= one * gg[:, :1]
    r = (_take(g.PXY, sub) @ fg.reshape(n, 2 * nd, -1)).reshape(n, nd, nt, 4)
    # q_b = base - dt sum_a Tw_ba r_a  (T1^-1 psi0 is the vector of ones)
    return base[:, :, None, :] - dt * (d.Tw @ r)


def _quad_flux(g, sub, qf, nt, gas, mu, kappa, vis):
    n = qf.shape[0]
    Qv = (_take(g.Vq, sub) @ qf).reshape(n, g.nq, nt, 4)
    Qx = Qy = None
    if vis.all():
        Qx = (_take(g.Vqx, sub) @ qf).reshape(n, g.nq, nt, 4)
        Qy = (_take(g.Vqy, sub) @ qf).reshape(n, g.nq, nt, 4)
    elif vis.any():
        Qx = np.zeros_like(Qv)
        Qy = np.zeros_like(Qv)
        Qx[vis] = (_take(g.Vqx, sub)[vis] @ qf[vis]).reshape(-1, g.nq, nt, 4)
        Qy[vis] = (_take(g.Vqy, sub)[vis] @ qf[vis]).reshape(-1, g.nq, nt, 4)
    return cell_flux(Qv, Qx, Qy, gas, mu, kappa)
