"""Polygonal meshes: Voronoi generation, geometry, connectivity, file I/O."""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import Voronoi, cKDTree

log = logging.getLogger(__name__)

# face kinds
INTERIOR = 0
PERIODIC = 1
TRANSMISSIVE = 2
INFLOW = 3
OUTFLOW = 4
DIRICHLET = 5

BOUNDARY_TAGS = {
    "transmissive": TRANSMISSIVE,
    "inflow": INFLOW,
    "outflow": OUTFLOW,
    "dirichlet": DIRICHLET,
}
SIDES = ("xmin", "xmax", "ymin", "ymax")


class MeshError(ValueError):
    pass


class MeshParseError(MeshError):
    def __init__(self, lineno, msg):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


def cell_geometry(verts):
    """Return (x_P, area, h_P, outward unit normals, edge lengths).

    x_P is the vertex mean and h_P = 2|P| / perimeter.
    """
    v = np.asarray(verts, dtype=float)
    if len(v) < 3:
        raise MeshError("polygon needs at least 3 vertices")
    nxt = np.roll(v, -1, axis=0)
    area = 0.5 * np.sum(v[:, 0] * nxt[:, 1] - nxt[:, 0] * v[:, 1])
    if not area > 0.0:
        raise MeshError(f"polygon has non-positive area {area:.3e}")
    d = nxt - v
    lengths = np.hypot(d[:, 0], d[:, 1])
    if np.any(lengths == 0.0):
        raise MeshError("polygon has a zero-length edge")
    normals = np.column_stack((d[:, 1], -d[:, 0])) / lengths[:, None]
    h = 2.0 * area / lengths.sum()
    return v.mean(axis=0), area, h, normals, lengths


def polygon_centroid(verts):
    v = np.asarray(verts, dtype=float)
    nxt = np.roll(v, -1, axis=0)
    cr = v[:, 0] * nxt[:, 1] - nxt[:, 0] * v[:, 1]
    a = 0.5 * cr.sum()
    cx = np.sum((v[:, 0] + nxt[:, 0]) * cr) / (6.0 * a)
    cy = np.sum((v[:, 1] + nxt[:, 1]) * cr) / (6.0 * a)
    return np.array([cx, cy])


@dataclass
class RegularityReport:
    rho: float
    failing: dict = field(default_factory=dict)  # cell id -> list of reasons

    @property
    def passed(self):
        return not self.failing

    def __str__(self):
        if self.passed:
            return f"regularity(rho={self.rho}): all cells pass"
        ids = sorted(self.failing)
        head = ", ".join(f"{i}: {'/'.join(self.failing[i])}" for i in ids[:10])
        return f"regularity(rho={self.rho}): {len(ids)} failing cells ({head})"


class PolyMesh:
    """Immutable polygonal tessellation.

    ``boundary`` maps directed vertex pairs (a, b), oriented counter-clockwise
    with respect to the owning cell, to a tag string. Faces are unique edges;
    for a face the left cell owns the listed orientation and ``face_normal``
    points out of it. Periodic faces connect two cells whose copies of the edge
    differ by ``face_shift`` (right-cell point = left-cell point - shift).
    """

    def __init__(self, vertices, cells, boundary=None, domain=None):
        self.vertices = np.array(vertices, dtype=float)
        self.cells = [np.array(c, dtype=np.int64) for c in cells]
        self.boundary = dict(boundary or {})
        if domain is None:
            lo = self.vertices.min(axis=0)
            hi = self.vertices.max(axis=0)
            domain = (lo[0], hi[0], lo[1], hi[1])
        self.domain = tuple(float(d) for d in domain)
        self._build()
        self.vertices.setflags(write=False)

    # -- construction -----------------------------------------------------
    def _build(self):
        nv = len(self.vertices)
        nc = len(self.cells)
        self.n_cells = nc
        self.cell_nv = np.array([len(c) for c in self.cells])
        self.centers = np.zeros((nc, 2))
        self.areas = np.zeros(nc)
        self.h = np.zeros(nc)
        self.perimeters = np.zeros(nc)
        self.cell_normals = []
        self.cell_lengths = []
        for i, c in enumerate(self.cells):
            if c.min() < 0 or c.max() >= nv:
                raise MeshError(f"cell {i} references a vertex outside 0..{nv - 1}")
            try:
                xp, a, h, n, ln = cell_geometry(self.vertices[c])
            except MeshError as exc:
                raise MeshError(f"cell {i}: {exc}") from None
            self.centers[i], self.areas[i], self.h[i] = xp, a, h
            self.perimeters[i] = ln.sum()
            self.cell_normals.append(n)
            self.cell_lengths.append(ln)

        # edges shared by two cells
        owner = {}
        faces = []
        for i, c in enumerate(self.cells):
            for k in range(len(c)):
                a, b = int(c[k]), int(c[(k + 1) % len(c)])
                key = (b, a)
                if key in owner:
                    j, kj = owner.pop(key)
                    faces.append((j, kj, i, k, INTERIOR, 0.0, 0.0))
                else:
                    if (a, b) in owner:
                        raise MeshError(f"edge {a}-{b} used twice with the same orientation")
                    owner[(a, b)] = (i, k)
        # remaining edges are boundary edges; periodic ones get paired
        pending = {}
        for (a, b), (i, k) in sorted(owner.items(), key=lambda kv: kv[1]):
            tag = self.boundary.get((a, b))
            if tag is None:
                raise MeshError(
                    f"edge {a}-{b} of cell {i} has one neighbour and no boundary tag")
            if tag.startswith("periodic:"):
                pending.setdefault(tag, []).append((i, k, a, b))
            elif tag in BOUNDARY_TAGS:
                faces.append((i, k, -1, -1, BOUNDARY_TAGS[tag], 0.0, 0.0))
            else:
                raise MeshError(f"unknown boundary tag {tag!r}")
        for tag, members in pending.items():
            if len(members) != 2:
                raise MeshError(f"periodic tag {tag} has {len(members)} edges, expected 2")
            (i, k, a, b), (j, kj, c, d) = members
            s = 0.5 * (self.vertices[a] + self.vertices[b]) \
                - 0.5 * (self.vertices[c] + self.vertices[d])
            la = np.hypot(*(self.vertices[b] - self.vertices[a]))
            lc = np.hypot(*(self.vertices[d] - self.vertices[c]))
            if abs(la - lc) > 1e-10 * max(la, lc):
                raise MeshError(f"periodic pair {tag}: lengths {la} and {lc} differ")
            if np.abs(self.vertices[a] - s - self.vertices[d]).max() > 1e-8 * max(la, 1.0):
                raise MeshError(f"periodic pair {tag}: edges are not translates")
            faces.append((i, k, j, kj, PERIODIC, s[0], s[1]))

        nf = len(faces)
        F = np.array(faces, dtype=float).reshape(nf, 7)
        self.n_faces = nf
        self.face_cells = F[:, [0, 2]].astype(np.int64)
        self.face_local = F[:, [1, 3]].astype(np.int64)
        self.face_kind = F[:, 4].astype(np.int64)
        self.face_shift = F[:, 5:7].copy()
        L, kL = self.face_cells[:, 0], self.face_local[:, 0]
        self.face_normal = np.array([self.cell_normals[i][k] for i, k in zip(L, kL)]).reshape(nf, 2)
        self.face_length = np.array([self.cell_lengths[i][k] for i, k in zip(L, kL)])
        self.face_xa = np.array([self.vertices[self.cells[i][k]] for i, k in zip(L, kL)]).reshape(nf, 2)
        self.face_xb = np.array([self.vertices[self.cells[i][(k + 1) % len(self.cells[i])]]
                                 for i, k in zip(L, kL)]).reshape(nf, 2)
        # per-cell, per-local-edge face id and side
        self.cell_faces = [np.full(len(c), -1, dtype=np.int64) for c in self.cells]
        self.cell_face_side = [np.zeros(len(c), dtype=np.int64) for c in self.cells]
        for f in range(nf):
            for side in (0, 1):
                i, k = self.face_cells[f, side], self.face_local[f, side]
                if i >= 0:
                    self.cell_faces[i][k] = f
                    self.cell_face_side[i][k] = side

    # -- accessors --------------------------------------------------------
    def cell_vertices(self, i):
        return self.vertices[self.cells[i]]

    @property
    def h_omega(self):
        return float(self.h.max())

    @property
    def lengths(self):
        x0, x1, y0, y1 = self.domain
        return np.array([x1 - x0, y1 - y0])

    def neighbours(self, i):
        out = []
        for f, side in zip(self.cell_faces[i], self.cell_face_side[i]):
            j = self.face_cells[f, 1 - side]
            if j >= 0:
                out.append(int(j))
        return out

    def periodic_pairs(self):
        return int(np.sum(self.face_kind == PERIODIC))

    def __repr__(self):
        return (f"PolyMesh(cells={self.n_cells}, vertices={len(self.vertices)}, "
                f"faces={self.n_faces}, h={self.h_omega:.4g})")


# -- regularity -----------------------------------------------------------
def check_regularity(mesh, rho=0.05):
    """Kernel-disk and edge-length checks for every cell."""
    rep = RegularityReport(rho)
    for i in range(mesh.n_cells):
        v = mesh.cell_vertices(i)
        xp, h = mesh.centers[i], mesh.h[i]
        n = mesh.cell_normals[i]
        dist = np.einsum("ij,ij->i", v - xp[None, :], n)
        reasons = []
        if dist.min() < rho * h:
            reasons.append("kernel")
        if mesh.cell_lengths[i].min() < rho * h:
            reasons.append("edge")
        if reasons:
            rep.failing[i] = reasons
    return rep


# -- Voronoi generation ---------------------------------------------------
def _tile(points, domain, periodic):
    """3x3 copies of the generators: translated along periodic axes and
    mirrored across the domain sides otherwise. Returns points, tile ids."""
    x0, x1, y0, y1 = domain
    L = (x1 - x0, y1 - y0)
    lo = (x0, y0)
    hi = (x1, y1)
    out, tiles = [], []
    for ix in (0, -1, 1):
        for iy in (0, -1, 1):
            p = points.copy()
            for ax, it in ((0, ix), (1, iy)):
                if it == 0:
                    continue
                if periodic[ax]:
                    p[:, ax] += it * L[ax]
                elif it < 0:
                    p[:, ax] = 2.0 * lo[ax] - p[:, ax]
                else:
                    p[:, ax] = 2.0 * hi[ax] - p[:, ax]
            out.append(p)
            tiles.append((ix, iy))
    return np.vstack(out), tiles


def _raw_cells(points, domain, periodic):
    n = len(points)
    allp, _ = _tile(points, domain, periodic)
    vor = Voronoi(allp)
    polys = []
    for i in range(n):
        reg = vor.regions[vor.point_region[i]]
        if -1 in reg or len(reg) < 3:
            raise MeshError(f"generator {i} has an unbounded Voronoi cell")
        polys.append(np.array(reg, dtype=np.int64))
    return vor, polys


def _ccw(vor, reg, gen):
    p = vor.vertices[reg]
    ang = np.arctan2(p[:, 1] - gen[1], p[:, 0] - gen[0])
    return reg[np.argsort(ang)]


def _wrap(points, domain, periodic):
    x0, x1, y0, y1 = domain
    p = points.copy()
    if periodic[0]:
        p[:, 0] = x0 + np.mod(p[:, 0] - x0, x1 - x0)
    if periodic[1]:
        p[:, 1] = y0 + np.mod(p[:, 1] - y0, y1 - y0)
    return p


def lloyd_step(points, domain, periodic):
    vor, polys = _raw_cells(points, domain, periodic)
    cen = np.array([polygon_centroid(vor.vertices[_ccw(vor, r, points[i])])
                    for i, r in enumerate(polys)])
    x0, x1, y0, y1 = domain
    cen = _wrap(cen, domain, periodic)
    # keep generators strictly inside along mirrored axes
    eps = 1e-9 * max(x1 - x0, y1 - y0)
    cen[:, 0] = np.clip(cen[:, 0], x0 + eps, x1 - eps)
    cen[:, 1] = np.clip(cen[:, 1], y0 + eps, y1 - eps)
    return cen


def _dedup(lab):
    keep = lab != np.roll(lab, 1)
    return lab[keep] if keep.any() else lab[:1]


def _class_positions(V, label, onwall, domain, periodic):
    x0, x1, y0, y1 = domain
    cnt = np.bincount(label).astype(float)
    pos = np.column_stack([np.bincount(label, weights=V[:, d]) for d in (0, 1)]) / cnt[:, None]
    for ax in (0, 1):
        if periodic[ax]:
            continue
        for val in ((x0, x1), (y0, y1))[ax]:
            m = onwall[:, ax] & (V[:, ax] == val)
            pos[label[m], ax] = val
    return pos


def _collapse_short_edges(V, loops, onwall, domain, periodic, collapse, max_rounds=8):
    """Merge endpoints of edges shorter than ``collapse`` times the larger
    adjacent h_P, repeating until no short edge is left. Along periodic axes
    the translated copies of a merged edge are merged too."""
    x0, x1, y0, y1 = domain
    diag = np.hypot(x1 - x0, y1 - y0)
    nV = len(V)
    rows, cols = [], []
    label = np.arange(nV)
    pos = V.copy()
    shifts = _shifts(domain, periodic)
    for _ in range(max_rounds):
        thr = {}
        for lp in loops:
            lab = _dedup(label[lp])
            if len(lab) < 3:
                continue
            hc = cell_geometry(pos[lab])[2]
            for k in range(len(lab)):
                a, b = lab[k], lab[(k + 1) % len(lab)]
                e = (min(a, b), max(a, b))
                thr[e] = max(thr.get(e, 0.0), collapse * hc)
        new = [(a, b) for (a, b), t in thr.items()
               if np.hypot(*(pos[a] - pos[b])) < max(t, 1e-12 * diag)]
        if not new:
            break
        if shifts:
            reps = np.unique(label)
            tree = cKDTree(pos[reps])
            for a, b in list(new):
                for s in shifts:
                    da, ia = tree.query(pos[a] + s)
                    db, ib = tree.query(pos[b] + s)
                    if da < 1e-9 * diag and db < 1e-9 * diag:
                        new.append((reps[ia], reps[ib]))
        rep = np.zeros(label.max() + 1, dtype=np.int64)
        rep[label[::-1]] = np.arange(nV)[::-1]
        for a, b in new:
            rows.append(rep[a])
            cols.append(rep[b])
        g = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(nV, nV))
        _, label = connected_components(g, directed=False)
        pos = _class_positions(V, label, onwall, domain, periodic)
    return label, pos


def build_voronoi(generators, domain, lloyd_iters=0, periodic=(False, False),
                  tags=None, collapse=0.1, rho=0.05, check=True):
    """Voronoi mesh of ``generators`` clipped to the rectangle ``domain``.

    ``domain`` is (x0, x1, y0, y1); ``tags`` maps 'xmin'/'xmax'/'ymin'/'ymax'
    to a boundary tag (default transmissive). Along a periodic axis the mesh
    is the Voronoi diagram of the torus and the boundary is not straight.
    Edges shorter than ``collapse`` times the smaller adjacent h_P are
    collapsed to a point.
    """
    pts = np.array(generators, dtype=float)
    x0, x1, y0, y1 = domain
    diag = np.hypot(x1 - x0, y1 - y0)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 1:
        raise MeshError("need at least one generator")
    if np.any(pts[:, 0] <= x0) or np.any(pts[:, 0] >= x1) \
            or np.any(pts[:, 1] <= y0) or np.any(pts[:, 1] >= y1):
        raise MeshError("generators must lie strictly inside the domain")
    if len(pts) > 1:
        dmin, _ = cKDTree(pts).query(pts, k=2)
        if dmin[:, 1].min() <= 1e-12 * diag:
            raise MeshError("duplicate generators")
    for _ in range(lloyd_iters):
        pts = lloyd_step(pts, domain, periodic)

    n = len(pts)
    vor, polys = _raw_cells(pts, domain, periodic)
    loops = [_ccw(vor, r, pts[i]) for i, r in enumerate(polys)]
    V = vor.vertices.copy()

    # snap vertices onto mirrored walls
    tolw = 1e-9 * diag
    onwall = np.zeros((len(V), 2), dtype=bool)
    for ax, (lo, hi) in enumerate(((x0, x1), (y0, y1))):
        if periodic[ax]:
            continue
        for val in (lo, hi):
            m = np.abs(V[:, ax] - val) < tolw
            V[m, ax] = val
            onwall[m, ax] = True

    label, pos = _collapse_short_edges(V, loops, onwall, domain, periodic, collapse)
    used = {}
    cells = []
    for i, lp in enumerate(loops):
        lab = _dedup(label[lp])
        if len(lab) < 3:
            raise MeshError(f"cell {i} degenerated while collapsing short edges")
        cells.append([used.setdefault(int(c), len(used)) for c in lab])
    verts = np.zeros((len(used), 2))
    for c, k in used.items():
        verts[k] = pos[c]

    # classify unshared edges
    tags = dict(tags or {})
    sidetag = {s: tags.get(s, "transmissive") for s in SIDES}
    shared = set()
    for c in cells:
        for k in range(len(c)):
            shared.add((c[k], c[(k + 1) % len(c)]))
    boundary = {}
    open_edges = []
    for c in cells:
        for k in range(len(c)):
            a, b = c[k], c[(k + 1) % len(c)]
            if (b, a) in shared:
                continue
            pa, pb = verts[a], verts[b]
            side = None
            if not periodic[0]:
                if pa[0] == x0 and pb[0] == x0:
                    side = "xmin"
                elif pa[0] == x1 and pb[0] == x1:
                    side = "xmax"
            if side is None and not periodic[1]:
                if pa[1] == y0 and pb[1] == y0:
                    side = "ymin"
                elif pa[1] == y1 and pb[1] == y1:
                    side = "ymax"
            if side is not None:
                boundary[(a, b)] = sidetag[side]
            else:
                open_edges.append((a, b))
    if open_edges:
        if not (periodic[0] or periodic[1]):
            raise MeshError(f"{len(open_edges)} unmatched edges off the domain boundary")
        boundary.update(_pair_edges(verts, open_edges, domain, periodic))
    mesh = PolyMesh(verts, cells, boundary, domain=domain)
    if check:
        rep = check_regularity(mesh, rho)
        if not rep.passed:
            raise MeshError(str(rep))
    log.debug("built %r", mesh)
    return mesh


def _shifts(domain, periodic):
    x0, x1, y0, y1 = domain
    out = []
    for sx in ((-1, 0, 1) if periodic[0] else (0,)):
        for sy in ((-1, 0, 1) if periodic[1] else (0,)):
            if sx or sy:
                out.append(np.array([sx * (x1 - x0), sy * (y1 - y0)]))
    return out


def _pair_edges(verts, edges, domain, periodic, start_id=0):
    """Match directed boundary edges that are translates of each other."""
    x0, x1, y0, y1 = domain
    tol = 1e-8 * max(x1 - x0, y1 - y0)
    mids = np.array([0.5 * (verts[a] + verts[b]) for a, b in edges]).reshape(-1, 2)
    tree = cKDTree(mids)
    out = {}
    done = np.zeros(len(edges), dtype=bool)
    pid = start_id
    for e, (a, b) in enumerate(edges):
        if done[e]:
            continue
        found = False
        for s in _shifts(domain, periodic):
            d, j = tree.query(mids[e] - s)
            if d > tol or done[j] or j == e:
                continue
            c, dd = edges[j]
            if np.abs(verts[a] - s - verts[dd]).max() < tol and \
                    np.abs(verts[b] - s - verts[c]).max() < tol:
                out[(a, b)] = f"periodic:{pid}"
                out[(c, dd)] = f"periodic:{pid}"
                done[e] = done[j] = True
                pid += 1
                found = True
                break
        if not found:
            raise MeshError(
                f"unmatched periodic edge ({verts[a][0]:.6g},{verts[a][1]:.6g})-"
                f"({verts[b][0]:.6g},{verts[b][1]:.6g})")
    return out


def pair_periodic(mesh, axes):
    """Return a copy of ``mesh`` with boundary edges on opposite sides paired
    along the given axes ('x', 'y' or 0, 1)."""
    periodic = [False, False]
    for ax in axes:
        periodic[{"x": 0, "y": 1}.get(ax, ax)] = True
    cand = []
    boundary = {}
    x0, x1, y0, y1 = mesh.domain
    tol = 1e-8 * mesh.h_omega
    for (a, b), tag in mesh.boundary.items():
        pa, pb = mesh.vertices[a], mesh.vertices[b]
        on_x = periodic[0] and (max(abs(pa[0] - x0), abs(pb[0] - x0)) < tol
                                or max(abs(pa[0] - x1), abs(pb[0] - x1)) < tol)
        on_y = periodic[1] and (max(abs(pa[1] - y0), abs(pb[1] - y0)) < tol
                                or max(abs(pa[1] - y1), abs(pb[1] - y1)) < tol)
        if (on_x or on_y) and not tag.startswith("periodic:"):
            cand.append((a, b))
        else:
            boundary[(a, b)] = tag
    used = [int(t.split(":")[1]) for t in boundary.values() if t.startswith("periodic:")]
    start = max(used) + 1 if used else 0
    boundary.update(_pair_edges(mesh.vertices, cand, mesh.domain, periodic, start))
    return PolyMesh(mesh.vertices, mesh.cells, boundary, domain=mesh.domain)


def generate_mesh(domain, n, periodic=(False, False), tags=None, seed=0,
                  lloyd_iters=10, **kw):
    """Seeded random generators, ``n`` of them, relaxed by Lloyd iterations."""
    rng = np.random.default_rng(seed)
    x0, x1, y0, y1 = domain
    pts = np.column_stack((rng.uniform(x0, x1, n), rng.uniform(y0, y1, n)))
    return build_voronoi(pts, domain, lloyd_iters, periodic, tags, **kw)


def cells_for_h(domain, h):
    """Generator count giving a relaxed Voronoi mesh of characteristic size ~h."""
    x0, x1, y0, y1 = domain
    area = (x1 - x0) * (y1 - y0)
    # regular hexagon of area a has h_P = a / (3 s), s = sqrt(2a / (3 sqrt 3))
    a = (h / 0.62) ** 2
    return max(3, int(round(area / a)))


def cells_for_nominal_h(domain, h):
    """Generator count for a nominal mesh size equal to the distance between
    opposite edges of a regular hexagonal cell (twice its inradius)."""
    x0, x1, y0, y1 = domain
    area = (x1 - x0) * (y1 - y0)
    a = 2.0 * np.sqrt(3.0) * (0.5 * h) ** 2
    return max(3, int(round(area / a)))


# -- text format ------------------------------------------------------------
def save_mesh(mesh, path):
    x0, x1, y0, y1 = mesh.domain
    with open(path, "w") as f:
        f.write("polymesh 1\n")
        f.write("# domain " + " ".join(repr(float(v)) for v in (x0, x1, y0, y1)) + "\n")
        f.write(f"vertices {len(mesh.vertices)}\n")
        for x, y in mesh.vertices:
            f.write(f"{float(x)!r} {float(y)!r}\n")
        f.write(f"cells {mesh.n_cells}\n")
        for c in mesh.cells:
            f.write(f"{len(c)} " + " ".join(str(int(i)) for i in c) + "\n")
        f.write(f"boundary {len(mesh.boundary)}\n")
        for (a, b), tag in sorted(mesh.boundary.items()):
            f.write(f"{int(a)} {int(b)} {tag}\n")


def load_mesh(path):
    with open(path) as f:
        lines = f.readlines()
    domain = None
    items = []
    for no, raw in enumerate(lines, 1):
        s = raw.strip()
        if s.startswith("# domain"):
            domain = tuple(float(t) for t in s.split()[2:6])
            continue
        if not s or s.startswith("#"):
            continue
        items.append((no, s.split()))
    it = iter(items)

    def nxt(what):
        try:
            return next(it)
        except StopIteration:
            raise MeshParseError(len(lines), f"unexpected end of file, expected {what}")

    no, tok = nxt("header")
    if tok != ["polymesh", "1"]:
        raise MeshParseError(no, "expected header 'polymesh 1'")

    def section(name):
        no, tok = nxt(name)
        if len(tok) != 2 or tok[0] != name:
            raise MeshParseError(no, f"expected '{name} <count>'")
        try:
            cnt = int(tok[1])
        except ValueError:
            raise MeshParseError(no, f"bad count {tok[1]!r}")
        if cnt < 0:
            raise MeshParseError(no, "negative count")
        return cnt

    nv = section("vertices")
    verts = np.zeros((nv, 2))
    for k in range(nv):
        no, tok = nxt("vertex")
        try:
            if len(tok) != 2:
                raise ValueError
            verts[k] = float(tok[0]), float(tok[1])
        except ValueError:
            raise MeshParseError(no, "expected 'x y'")
    nc = section("cells")
    cells = []
    for k in range(nc):
        no, tok = nxt("cell")
        try:
            ids = [int(t) for t in tok]
        except ValueError:
            raise MeshParseError(no, f"cell {k}: non-integer entry")
        if len(ids) < 4 or ids[0] != len(ids) - 1:
            raise MeshParseError(no, f"cell {k}: vertex count does not match")
        loop = ids[1:]
        bad = [i for i in loop if i < 0 or i >= nv]
        if bad:
            raise MeshParseError(no, f"cell {k} references vertex {bad[0]} beyond count {nv}")
        p = verts[loop]
        area = 0.5 * np.sum(p[:, 0] * np.roll(p[:, 1], -1) - np.roll(p[:, 0], -1) * p[:, 1])
        if area <= 0:
            raise MeshParseError(no, f"cell {k} is not counter-clockwise")
        cells.append(loop)
    nb = section("boundary")
    boundary = {}
    for k in range(nb):
        no, tok = nxt("boundary edge")
        if len(tok) != 3:
            raise MeshParseError(no, "expected 'a b tag'")
        try:
            a, b = int(tok[0]), int(tok[1])
        except ValueError:
            raise MeshParseError(no, "non-integer edge vertex")
        tag = tok[2]
        if tag not in BOUNDARY_TAGS and not tag.startswith("periodic:"):
            raise MeshParseError(no, f"unknown tag {tag!r}")
        boundary[(a, b)] = tag
    try:
        return PolyMesh(verts, cells, boundary, domain=domain)
    except MeshError as exc:
        raise MeshParseError(len(lines), str(exc))
