"""Error norms, convergence tables and conditioning studies."""

import csv
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .gas import cons_to_prim
from .mesh import cells_for_h
from .solver import Discretization, Solver, SolverOptions
from .spacetime import TimeBasis, assemble_K1_stabilized, assemble_mass
from .vem import build_basis, condition_number

log = logging.getLogger(__name__)

VARIABLES = ("rho", "u", "v", "p")


def l2_error(disc, field, exact, t=None):
    """L2 norm over the domain of (exact - u_h) for (rho, u, v, p).

    ``exact(x, y, t)`` returns primitive states; the cell quadrature is
    exact to degree at least 2N + 2.
    """
    t = field.t if t is None else t
    acc = np.zeros(4)
    for g, u in zip(disc.groups, field.dofs):
        for i, c in enumerate(g.cells):
            b = disc.bases[c]
            pts, w = b.quad.points, b.quad.weights
            Ph = cons_to_prim(b.eval_basis(pts) @ u[i], disc.gas, check=False)
            Pe = exact(pts[:, 0], pts[:, 1], t)
            acc += w @ (Pe - Ph) ** 2
    return np.sqrt(acc)


def fitted_order(h, err):
    """Least-squares slope of log(err) against log(h); nan for one point."""
    h = np.asarray(h, dtype=float)
    err = np.asarray(err, dtype=float)
    if len(h) < 2:
        return float("nan")
    return float(np.polyfit(np.log(h), np.log(err), 1)[0])


@dataclass
class ConvergenceRow:
    N: int
    n_cells: int
    h: float
    errors: np.ndarray
    order: float
    cpu: float
    basis: str = "vem"


@dataclass
class ConvergenceTable:
    rows: list = field(default_factory=list)

    def orders(self, N, basis="vem", var=0):
        rs = [r for r in self.rows if r.N == N and r.basis == basis]
        return fitted_order([r.h for r in rs], [r.errors[var] for r in rs])

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["basis", "N", "order", "n_cells", "h", "err_rho", "err_u", "err_v",
                        "err_p", "observed_order_rho", "cpu_s"])
            for r in self.rows:
                w.writerow([r.basis, r.N, r.N + 1, r.n_cells, f"{r.h:.6e}",
                            *(f"{e:.6e}" for e in r.errors),
                            "" if np.isnan(r.order) else f"{r.order:.4f}", f"{r.cpu:.3f}"])


def run_case(case, mesh, N, opts=None, integrator=None, cfl=None, tf=None, log_steps=False):
    """Run ``case`` on ``mesh`` at degree N; returns (disc, field, history)."""
    opts = opts or SolverOptions(limiter=case.limiter)
    disc = Discretization(mesh, N, case.gas, opts, case.boundary_state)
    solver = Solver(disc, integrator or case.integrator)
    field = disc.project(case.initial)
    field, hist = solver.run(field, case.t_final if tf is None else tf,
                             case.cfl if cfl is None else cfl, log_steps=log_steps)
    return disc, field, hist


def convergence(case, degrees, meshes, opts=None, integrator="ader", bases=("vem",),
                cfl=None, tf=None):
    """Errors at the final time for each degree, basis and mesh."""
    table = ConvergenceTable()
    for basis in bases:
        for N in degrees:
            hs, errs = [], []
            for mesh in meshes:
                o = opts or SolverOptions()
                o = SolverOptions(**{**o.__dict__, "basis": basis})
                t0 = time.process_time()
                disc, fld, _ = run_case(case, mesh, N, o, integrator, cfl, tf)
                cpu = time.process_time() - t0
                err = l2_error(disc, fld, case.exact_solution)
                hs.append(mesh.h_omega)
                errs.append(err[0])
                order = fitted_order(hs[-2:], errs[-2:]) if len(hs) > 1 else float("nan")
                table.rows.append(ConvergenceRow(N, mesh.n_cells, mesh.h_omega, err, order,
                                                 cpu, basis))
                log.info("basis=%s N=%d cells=%d h=%.4f err_rho=%.4e order=%.3f", basis, N,
                         mesh.n_cells, mesh.h_omega, err[0], order)
    return table


@dataclass
class CondRow:
    N: int
    kM: np.ndarray
    kK1: np.ndarray

    def summary(self):
        return {"N": self.N,
                "M_min": float(self.kM.min()), "M_max": float(self.kM.max()),
                "M_avg": float(self.kM.mean()),
                "K1_min": float(self.kK1.min()), "K1_max": float(self.kK1.max()),
                "K1_avg": float(self.kK1.mean()),
                "K1_worse_fraction": float(np.mean(self.kK1 > self.kM))}


def condition_study(mesh, degrees, ortho=None, basis="vem", stab_scale=1.0):
    """Per-cell Frobenius condition numbers of M and K1 for each degree."""
    out = []
    for N in degrees:
        tb = TimeBasis(N)
        kM = np.empty(mesh.n_cells)
        kK = np.empty(mesh.n_cells)
        for i in range(mesh.n_cells):
            b = build_basis(mesh.cell_vertices(i), N, basis, ortho=ortho)
            kM[i] = condition_number(assemble_mass(b))
            kK[i] = condition_number(assemble_K1_stabilized(b, tb, stab_scale))
        out.append(CondRow(N, kM, kK))
    return out


def write_condition_csv(rows, path):
    with open(path, "w", newline="") as fh:
        keys = list(rows[0].summary())
        w = csv.DictWriter(fh, fieldnames=keys)
        w.writeheader()
        for r in rows:
            w.writerow({k: (f"{v:.6e}" if isinstance(v, float) else v)
                        for k, v in r.summary().items()})


def write_condition_cells_csv(rows, mesh, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["cell", "x", "y", *(f"log10_kM_N{r.N}" for r in rows),
                    *(f"log10_kK1_N{r.N}" for r in rows)])
        for i in range(mesh.n_cells):
            w.writerow([i, f"{mesh.centers[i, 0]:.6e}", f"{mesh.centers[i, 1]:.6e}",
                        *(f"{np.log10(r.kM[i]):.6f}" for r in rows),
                        *(f"{np.log10(r.kK1[i]):.6f}" for r in rows)])


def meshes_for(case, hs, seed=0):
    return [case.mesh(cells_for_h(case.domain, h), seed=seed) for h in hs]
