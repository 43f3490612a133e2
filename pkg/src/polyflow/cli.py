"""Command line interface: run, converge, condnum and cut."""

import argparse
import csv
import json
import logging
import os
import sys
import time

import numpy as np

from . import export
from .cases import init_case
from .config import RunConfig, read_section, run_config
from .drivers import (condition_study, convergence, l2_error,
                      write_condition_cells_csv, write_condition_csv)
from .gas import AdmissibilityError
from .mesh import MeshError, load_mesh
from .solver import Discretization, Solver, SolverOptions
from .spacetime import TimeBasis, assemble_K1_stabilized, assemble_mass
from .vem import build_basis, condition_number, orthogonalize

log = logging.getLogger("polyflow")


def _floats(text, n=None):
    vals = [float(t) for t in text.split(",")]
    if n is not None and len(vals) != n:
        raise argparse.ArgumentTypeError(f"expected {n} comma-separated numbers, got {text!r}")
    return vals


def _ints(text):
    return [int(t) for t in text.split(",") if t.strip()]


def make_mesh(spec, case, seed=0):
    """Mesh from a file path, ``gen:<nx>`` (nx*nx generators) or the case default."""
    if spec is None or spec == "default":
        return case.mesh(seed=seed)
    if spec.startswith("gen:"):
        nx = int(spec[4:])
        if nx < 1:
            raise ValueError("gen:<nx> needs nx >= 1")
        return case.mesh(nx * nx, seed=seed)
    return load_mesh(spec)


# -- dumps -------------------------------------------------------------------------
def _write_matrix_rows(w, label, A):
    A = np.atleast_2d(A)
    for i, row in enumerate(A):
        w.writerow([label, i, *(f"{v:.17e}" for v in row)])


def dump_basis(mesh, cell, N, path, ortho=None):
    """Per-cell VEM matrices as CSV rows labelled by matrix name."""
    b = build_basis(mesh.cell_vertices(cell), N, "vem", ortho=ortho)
    Z = b.Z if b.Z is not None else orthogonalize(b.H)[0]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["matrix", "row", "values..."])
        for label, A in (("G", b.G), ("B", b.B), ("H", b.H), ("C", b.C),
                         ("PI_NABLA", b.Pinabla_m), ("PI_0", b.Pi0_m), ("Z", Z)):
            _write_matrix_rows(w, label, A)


def dump_operators(mesh, cell, N, path, ortho=None, stab_scale=1.0):
    b = build_basis(mesh.cell_vertices(cell), N, "vem", ortho=ortho)
    M = assemble_mass(b)
    K1 = assemble_K1_stabilized(b, TimeBasis(N), stab_scale)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["matrix", "row", "values..."])
        _write_matrix_rows(w, "M", M)
        _write_matrix_rows(w, "K1", K1)
        w.writerow(["COND_M", 0, f"{condition_number(M):.17e}"])
        w.writerow(["COND_K1", 0, f"{condition_number(K1):.17e}"])


# -- subcommands ---------------------------------------------------------------------
def cmd_run(args):
    flags = {k: getattr(args, k, None) for k in RunConfig.__dataclass_fields__}
    if args.no_ortho:
        flags["ortho"] = False
    cfg = run_config(flags, args.config)
    case = init_case(cfg.case)
    N = cfg.order if cfg.order is not None else case.N
    os.makedirs(cfg.out, exist_ok=True)
    mesh = make_mesh(cfg.mesh, case, cfg.seed)
    if cfg.dump_basis is not None:
        dump_basis(mesh, cfg.dump_basis, N, os.path.join(cfg.out, "basis.csv"), cfg.ortho)
    if cfg.dump_operators is not None:
        dump_operators(mesh, cfg.dump_operators, N, os.path.join(cfg.out, "operators.csv"),
                       cfg.ortho)
    opts = SolverOptions(basis=cfg.basis, ortho=cfg.ortho,
                         limiter=cfg.limiter or case.limiter)
    integrator = cfg.integrator or case.integrator
    tf = cfg.tf if cfg.tf is not None else case.t_final
    cfl = cfg.cfl if cfg.cfl is not None else case.cfl
    t0 = time.time()
    disc = Discretization(mesh, N, case.gas, opts, case.boundary_state)
    solver = Solver(disc, integrator)
    field = disc.project(case.initial)
    hist_path = os.path.join(cfg.out, "history.csv")
    with open(hist_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "t", "dt", "troubled", "mass", "energy", "iterations"])

        def record(f, info):
            w.writerow([info.step, f"{info.t:.12e}", f"{info.dt:.12e}", info.troubled,
                        f"{info.mass:.15e}", f"{info.energy:.15e}", info.iterations])

        try:
            field, hist = solver.run(field, tf, cfl, callback=record)
        except AdmissibilityError as exc:
            log.error("%s", exc)
            return 3
    wall = time.time() - t0
    export.write_vtk(os.path.join(cfg.out, "final.vtk"), disc, field, title=case.name)
    summary = {"case": case.name, "N": N, "cells": mesh.n_cells, "h": mesh.h_omega,
               "steps": len(hist), "t": field.t, "wall_s": wall, "integrator": integrator,
               "basis": cfg.basis}
    if case.exact is not None:
        err = l2_error(disc, field, case.exact_solution)
        summary["l2_error"] = dict(zip(("rho", "u", "v", "p"), map(float, err)))
    with open(os.path.join(cfg.out, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2)
    log.info("done: %s", json.dumps(summary))
    return 0


def cmd_converge(args):
    file_values = read_section(args.config, "converge") if args.config else {}
    case = init_case(args.case or file_values.get("case", "vortex"))
    orders = _ints(args.orders or file_values.get("orders", "2,3,4"))
    mesh_specs = (args.meshes or file_values.get("meshes", "")).split(",")
    mesh_specs = [m for m in mesh_specs if m]
    if not mesh_specs:
        raise ValueError("converge needs --meshes")
    bases = (args.bases or file_values.get("bases", "vem")).split(",")
    integrator = args.integrator or file_values.get("integrator", "ader")
    out = args.out or file_values.get("out", "out")
    seed = int(file_values.get("seed", 0))
    os.makedirs(out, exist_ok=True)
    meshes = [make_mesh(s, case, seed) for s in mesh_specs]
    # accuracy orders: degree N = order - 1
    table = convergence(case, [o - 1 for o in orders], meshes, integrator=integrator,
                        bases=tuple(bases))
    table.write_csv(os.path.join(out, "convergence.csv"))
    for b in bases:
        for o in orders:
            log.info("basis=%s order=%d fitted rho order=%.3f", b, o, table.orders(o - 1, b))
    return 0


def cmd_condnum(args):
    file_values = read_section(args.config, "condnum") if args.config else {}
    mesh_path = args.mesh or file_values.get("mesh")
    if not mesh_path:
        raise ValueError("condnum needs --mesh")
    degrees = _ints(args.orders or file_values.get("orders", "1,2,3"))
    out = args.out or file_values.get("out", "out")
    os.makedirs(out, exist_ok=True)
    case = init_case(file_values.get("case", "vortex"))
    mesh = make_mesh(mesh_path, case, int(file_values.get("seed", 0)))
    rows = condition_study(mesh, degrees)
    write_condition_csv(rows, os.path.join(out, "condnum.csv"))
    write_condition_cells_csv(rows, mesh, os.path.join(out, "condnum_cells.csv"))
    for r in rows:
        log.info("N=%d %s", r.N, json.dumps(r.summary()))
    return 0


def cmd_cut(args):
    file_values = read_section(args.config, "cut") if args.config else {}
    src = args.input or file_values.get("in")
    dst = args.out or file_values.get("out")
    if not src or not dst:
        raise ValueError("cut needs --in and --out")
    p0 = _floats(args.from_ or file_values.get("from"), 2)
    p1 = _floats(args.to or file_values.get("to"), 2)
    n = args.n or int(file_values.get("n", 200))
    s, xy, vals, names = export.cut_from_vtk(src, p0, p1, n)
    export.write_cut_csv(dst, s, xy, vals, names)
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="polyflow", description=__doc__)
    p.add_argument("-v", "--verbose", action="count", default=0)
    p.add_argument("--config", help="INI file whose sections mirror the subcommands")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one case")
    r.add_argument("--case")
    r.add_argument("--order", type=int, help="polynomial degree N")
    r.add_argument("--mesh", help="mesh file or gen:<nx>")
    r.add_argument("--cfl", type=float)
    r.add_argument("--tf", type=float)
    r.add_argument("--integrator", help="ader, rk:ssprk3, rk:rk4 or rk:euler")
    r.add_argument("--basis", choices=("vem", "taylor"))
    r.add_argument("--no-ortho", action="store_true")
    r.add_argument("--limiter", choices=("off", "detect", "on"))
    r.add_argument("--seed", type=int)
    r.add_argument("--out")
    r.add_argument("--dump-basis", type=int, metavar="CELL")
    r.add_argument("--dump-operators", type=int, metavar="CELL")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("converge", help="convergence table")
    c.add_argument("--case")
    c.add_argument("--orders", help="accuracy orders, degree N = order - 1")
    c.add_argument("--meshes", help="comma-separated mesh files or gen:<nx>")
    c.add_argument("--bases", help="vem, taylor or both")
    c.add_argument("--integrator")
    c.add_argument("--out")
    c.set_defaults(func=cmd_converge)

    k = sub.add_parser("condnum", help="condition numbers of M and K1")
    k.add_argument("--mesh")
    k.add_argument("--orders", help="polynomial degrees N")
    k.add_argument("--out")
    k.set_defaults(func=cmd_condnum)

    x = sub.add_parser("cut", help="sample a VTK file along a segment")
    x.add_argument("--in", dest="input")
    x.add_argument("--from", dest="from_")
    x.add_argument("--to")
    x.add_argument("--n", type=int)
    x.add_argument("--out")
    x.set_defaults(func=cmd_cut)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING if args.verbose < 0 else (
        logging.INFO if args.verbose <= 1 else logging.DEBUG)
    logging.basicConfig(level=level, format="%(message)s", stream=sys.stdout)
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError, MeshError) as exc:
        log.error("error: %s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
