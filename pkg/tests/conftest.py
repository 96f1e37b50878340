import numpy as np
import pytest
from hypothesis import settings

from meshsizer.mesh import HybridMesh
from meshsizer.synthetic import SyntheticCase, box_mesh, synthesize_case

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def grid20():
    return box_mesh((0.0, 0.0, 1.0, 1.0), 20, 20)


@pytest.fixture(scope="session")
def small_case():
    return SyntheticCase(n_wall=40, n_layers=8, n_rings=16)


@pytest.fixture(scope="session")
def hybrid(small_case):
    """Small ellipse O-grid with an inflation layer and its analytic fields."""
    return synthesize_case(small_case)


@pytest.fixture
def jittered_hybrid():
    """4x4 cells alternating quads and triangle pairs, interior nodes perturbed."""
    rng = np.random.default_rng(0)
    n = 5
    X, Y = np.meshgrid(np.linspace(0, 1, n), np.linspace(0, 1, n))
    nodes = np.c_[X.ravel(), Y.ravel()]
    inner = (X.ravel() > 0) & (X.ravel() < 1) & (Y.ravel() > 0) & (Y.ravel() < 1)
    nodes[inner] += rng.uniform(-0.05, 0.05, (inner.sum(), 2))
    tris, quads = [], []
    for j in range(n - 1):
        for i in range(n - 1):
            a = j * n + i
            b, c, d = a + 1, a + n + 1, a + n
            if (i + j) % 2 == 0:
                quads.append([a, b, c, d])
            else:
                tris += [[a, b, c], [a, c, d]]
    # checkerboard quads are not an inflation layer, so bypass the column checks
    return HybridMesh(nodes, np.array(tris), np.array(quads), {})


ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
