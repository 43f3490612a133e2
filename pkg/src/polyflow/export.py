"""VTK legacy output and one-dimensional cuts."""

import csv

import numpy as np

from .gas import cons_to_prim

VTK_POLYGON = 7
PRIMITIVE_NAMES = ("rho", "u", "v", "p")


def inside_convex(verts, pts, tol=1e-12):
    """Points inside (or on) a counter-clockwise convex polygon."""
    v = np.asarray(verts, dtype=float)
    e = np.roll(v, -1, axis=0) - v
    d = pts[:, None, :] - v[None, :, :]
    cross = e[None, :, 0] * d[..., 1] - e[None, :, 1] * d[..., 0]
    scale = tol * max(1.0, np.abs(v).max())
    return np.all(cross >= -scale * np.linalg.norm(e, axis=1)[None, :], axis=1)


def _prim(Q, gas):
    return cons_to_prim(Q, gas, check=False)


def write_vtk(path, disc, field, title="polyflow"):
    """Legacy ASCII UNSTRUCTURED_GRID with one polygon per cell.

    Cell data: primitive cell means, flattener beta and effective viscosity.
    Point data: vertex values of u_h averaged over the cells sharing them.
    """
    mesh = disc.mesh
    gas = disc.gas
    nc = mesh.n_cells
    means = _prim(disc.cell_means(field), gas)
    nv = len(mesh.vertices)
    acc = np.zeros((nv, 4))
    cnt = np.zeros(nv)
    for c in range(nc):
        ids = mesh.cells[c]
        vals = _prim(disc.evaluate(field, c, mesh.vertices[ids]), gas)
        acc[ids] += vals
        cnt[ids] += 1
    pts = acc / np.maximum(cnt, 1)[:, None]
    beta = field.beta if field.beta is not None else np.zeros(nc)
    mu = field.mu if field.mu is not None else np.full(nc, gas.mu)
    size = sum(len(c) + 1 for c in mesh.cells)
    with open(path, "w") as fh:
        fh.write(f"# vtk DataFile Version 3.0\n{title} t={field.t:.10g}\nASCII\n")
        fh.write("DATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {nv} double\n")
        for x, y in mesh.vertices:
            fh.write(f"{x:.16e} {y:.16e} 0\n")
        fh.write(f"CELLS {nc} {size}\n")
        for c in mesh.cells:
            fh.write(f"{len(c)} " + " ".join(map(str, c)) + "\n")
        fh.write(f"CELL_TYPES {nc}\n")
        fh.write((f"{VTK_POLYGON}\n") * nc)
        fh.write(f"CELL_DATA {nc}\n")
        for k, name in enumerate(PRIMITIVE_NAMES):
            _scalars(fh, name, means[:, k])
        _scalars(fh, "beta", beta)
        _scalars(fh, "mu_eff", mu)
        fh.write(f"POINT_DATA {nv}\n")
        for k, name in enumerate(PRIMITIVE_NAMES):
            _scalars(fh, name, pts[:, k])


def _scalars(fh, name, values):
    fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
    fh.write("\n".join(f"{v:.16e}" for v in values) + "\n")


class VtkPolyData:
    """Minimal reader for files produced by :func:`write_vtk`."""

    def __init__(self, path):
        with open(path) as fh:
            tokens = fh.read().split("\n")
        self.points = None
        self.cells = []
        self.cell_data = {}
        self.point_data = {}
        i = 0
        section = None
        while i < len(tokens):
            line = tokens[i].strip()
            i += 1
            if not line:
                continue
            head = line.split()
            if head[0] == "POINTS":
                n = int(head[1])
                self.points = np.array([list(map(float, tokens[i + k].split()[:2]))
                                        for k in range(n)])
                i += n
            elif head[0] == "CELLS":
                n = int(head[1])
                self.cells = [list(map(int, tokens[i + k].split()[1:])) for k in range(n)]
                i += n
            elif head[0] == "CELL_TYPES":
                i += int(head[1])
            elif head[0] == "CELL_DATA":
                section = self.cell_data
                count = int(head[1])
            elif head[0] == "POINT_DATA":
                section = self.point_data
                count = int(head[1])
            elif head[0] == "SCALARS":
                i += 1  # lookup table line
                section[head[1]] = np.array([float(tokens[i + k]) for k in range(count)])
                i += count
        if self.points is None:
            raise ValueError(f"{path}: no POINTS section")

    def locate(self, xy):
        """Index of the cell containing each point (-1 outside)."""
        xy = np.atleast_2d(xy)
        out = np.full(len(xy), -1)
        for c, ids in enumerate(self.cells):
            inside = inside_convex(self.points[ids], xy)
            out[(out < 0) & inside] = c
        return out


def cut_points(p0, p1, n):
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    s = np.linspace(0.0, 1.0, n)
    return p0[None, :] + s[:, None] * (p1 - p0)[None, :], s * np.linalg.norm(p1 - p0)


def _periods(mesh):
    """Translations to try for points of a periodic mesh."""
    x0, x1, y0, y1 = mesh.domain
    axes = np.abs(mesh.face_shift).max(axis=0) > 0 if mesh.n_faces else np.zeros(2, bool)
    sx = (0.0, x1 - x0, x0 - x1) if axes[0] else (0.0,)
    sy = (0.0, y1 - y0, y0 - y1) if axes[1] else (0.0,)
    return [np.array((a, b)) for a in sx for b in sy]


def locate_cells(mesh, xy, return_points=False):
    """Cell index containing each point; boundary points go to any adjacent cell.

    Cells of periodic meshes may straddle the domain edge, so points are also
    tried at their periodic images; ``return_points`` gives the image used.
    """
    xy = np.atleast_2d(np.asarray(xy, dtype=float))
    out = np.full(len(xy), -1)
    pts = xy.copy()
    for shift in _periods(mesh):
        todo = out < 0
        if not todo.any():
            break
        q = xy + shift
        for c in range(mesh.n_cells):
            if not todo.any():
                break
            v = mesh.cell_vertices(c)
            lo, hi = v.min(axis=0) - 1e-12, v.max(axis=0) + 1e-12
            cand = todo & np.all((q >= lo) & (q <= hi), axis=1)
            if cand.any():
                inside = inside_convex(v, q[cand])
                idx = np.flatnonzero(cand)[inside]
                out[idx] = c
                pts[idx] = q[idx]
                todo[idx] = False
    return (out, pts) if return_points else out


def sample_cut(disc, field, p0, p1, n=200):
    """Primitive u_h at n equidistant points on the segment p0-p1.

    Returns (arc length, points, (n, 4) primitive values)."""
    xy, s = cut_points(p0, p1, n)
    cells, pts = locate_cells(disc.mesh, xy, return_points=True)
    if np.any(cells < 0):
        raise ValueError("cut leaves the mesh")
    vals = np.empty((n, 4))
    for c in np.unique(cells):
        sel = cells == c
        vals[sel] = _prim(disc.evaluate(field, c, pts[sel]), disc.gas)
    return s, xy, vals


def cut_from_vtk(path, p0, p1, n=200, data="cell"):
    """Cut through a VTK file using the piecewise-constant cell data."""
    vtk = VtkPolyData(path)
    xy, s = cut_points(p0, p1, n)
    cells = vtk.locate(xy)
    if np.any(cells < 0):
        raise ValueError("cut leaves the mesh")
    src = vtk.cell_data if data == "cell" else vtk.point_data
    names = [k for k in PRIMITIVE_NAMES if k in src]
    vals = np.stack([src[k][cells] for k in names], axis=1)
    return s, xy, vals, names


def write_cut_csv(path, s, xy, vals, names=PRIMITIVE_NAMES):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["s", "x", "y", *names])
        for k in range(len(s)):
            w.writerow([f"{s[k]:.10e}", f"{xy[k, 0]:.10e}", f"{xy[k, 1]:.10e}",
                        *(f"{v:.12e}" for v in vals[k])])
