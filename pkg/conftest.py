"""Shared lattice-domain fixtures."""
import numpy as np
import pytest

from loewnerlab.lattice import BoundaryEdge, approximate_domain, from_cells


def square_cells(n: int):
    return [(i, j) for i in range(n) for j in range(n)]


@pytest.fixture
def square8():
    """Unit square at n=8 with the default marks on the left and right sides."""
    return from_cells(8, square_cells(8), (0.5, 0.5), name="square8")


@pytest.fixture
def square6():
    return from_cells(6, square_cells(6), (0.5, 0.5), name="square6")


@pytest.fixture
def corridor():
    """One-cell-high corridor [0,1]×[0,1/6] at n=6."""
    return from_cells(
        6,
        [(i, 0) for i in range(6)],
        (0.5, 1 / 12),
        BoundaryEdge(0, 0, "W"),
        BoundaryEdge(5, 0, "E"),
        name="corridor",
    )


@pytest.fixture
def slot_domain():
    """Unit square at n=32 with a one-cell-wide, 8-cell-deep slot hanging from the bottom."""
    n = 32
    cells = square_cells(n) + [(16, -k) for k in range(1, 9)]
    return from_cells(n, cells, (0.5, 0.5), name="slot")


@pytest.fixture
def lattice_disc():
    """Lattice approximation of the unit disc at n=16 around 0."""
    theta = 2 * np.pi * np.arange(256) / 256
    polygon = [(float(np.cos(t)), float(np.sin(t))) for t in theta]
    return approximate_domain(polygon, (0.0, 0.0), 16, a_point=(-1.0, 0.0), b_point=(1.0, 0.0))
