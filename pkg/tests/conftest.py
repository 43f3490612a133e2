import numpy as np
import pytest

from polyflow.mesh import generate_mesh


def regular_polygon(n, radius=1.0, center=(0.0, 0.0), angle=0.0):
    t = angle + 2 * np.pi * np.arange(n) / n
    return np.column_stack((center[0] + radius * np.cos(t), center[1] + radius * np.sin(t)))


def square(side=1.0, center=(0.0, 0.0), angle=0.0):
    return regular_polygon(4, side / np.sqrt(2.0), center, angle + np.pi / 4)


def fixture_polygons():
    """50 cells: 10 squares, 10 regular hexagons and 30 relaxed Voronoi cells."""
    rng = np.random.default_rng(1234)
    polys = []
    for k in range(10):
        polys.append(square(10 ** rng.uniform(-2, 1), rng.uniform(-5, 5, 2), rng.uniform(0, np.pi)))
    for k in range(10):
        polys.append(regular_polygon(6, 10 ** rng.uniform(-2, 1), rng.uniform(-5, 5, 2),
                                     rng.uniform(0, np.pi)))
    mesh = generate_mesh((0.0, 1.0, 0.0, 1.0), 60, seed=7, lloyd_iters=4)
    on_wall = set(mesh.face_cells[mesh.face_cells[:, 1] < 0, 0].tolist())
    interior = [c for c in range(mesh.n_cells) if c not in on_wall]
    for c in interior[:15]:
        polys.append(mesh.cell_vertices(c))
    raw = generate_mesh((0.0, 3.0, 0.0, 2.0), 40, seed=11, lloyd_iters=0)
    for c in range(15):
        polys.append(raw.cell_vertices(c))
    return polys


@pytest.fixture(scope="session")
def polygons():
    return fixture_polygons()


@pytest.fixture(scope="session")
def small_periodic_mesh():
    return generate_mesh((0.0, 10.0, 0.0, 10.0), 64, periodic=(True, True), seed=3)


ACCEPTANCE = []


@pytest.fixture
def report():
    """Record one pass/fail line per acceptance criterion."""
    def emit(k, ok, detail):
        line = f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        ACCEPTANCE.append(line)
        return ok
    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
