import os

import numpy as np
import pytest

os.environ.setdefault("MPLBACKEND", "Agg")

from dtnlab import assembly, mesh  # noqa: E402
from dtnlab.coefficients import preset  # noqa: E402


@pytest.fixture(scope="session")
def square_coarse():
    return mesh.generate("square", 0.25)


@pytest.fixture(scope="session")
def square_01():
    return mesh.generate("square", 0.1)


@pytest.fixture(scope="session")
def disk_02():
    return mesh.generate("disk", 0.2)


@pytest.fixture(scope="session")
def disk_01():
    return mesh.generate("disk", 0.1)


@pytest.fixture(scope="session")
def disk_005():
    return mesh.generate("disk", 0.05)


@pytest.fixture(scope="session")
def unit_triangle():
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    tris = np.array([[0, 1, 2]])
    return mesh._make_mesh(verts, tris, "square")


@pytest.fixture
def laplace_disk_sys(disk_01):
    return assembly.assemble(disk_01, preset("laplace"))


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS.values():
            terminalreporter.write_line(line)
