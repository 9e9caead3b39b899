import math

import numpy as np
import pytest

from superrad import (
    build_angular_grid,
    build_kernel,
    build_lattice,
    diagonalize,
    mode_projection,
)
from superrad.geometry import SampleGeometry

PAPER_DIMS = (7, 7, 20)
PAPER_SPACING = 0.37
REFERENCE_GRID = (64, 64)


def random_sample(n, seed, box=1.5, wavelength=0.795, gamma1=18.5, min_dist=0.05):
    """Uniform random atoms in a cube of side ``box`` um with a random k0 direction."""
    rng = np.random.default_rng(seed)
    pts = []
    while len(pts) < n:
        p = rng.uniform(-box / 2, box / 2, 3)
        if all(np.linalg.norm(p - q) >= min_dist for q in pts):
            pts.append(p)
    direction = rng.normal(size=3)
    return SampleGeometry(np.array(pts), 2 * math.pi / wavelength, direction, gamma1)


@pytest.fixture(scope="session")
def paper_sample():
    return build_lattice(PAPER_DIMS, PAPER_SPACING)


@pytest.fixture(scope="session")
def paper_kernel(paper_sample):
    return build_kernel(paper_sample)


@pytest.fixture(scope="session")
def paper_eigen(paper_kernel):
    return diagonalize(paper_kernel)


@pytest.fixture(scope="session")
def reference_grid(paper_sample):
    return build_angular_grid(*REFERENCE_GRID, axis=paper_sample.k0_direction, split_angle=0.3)


@pytest.fixture(scope="session")
def paper_modefn(paper_sample, paper_eigen, reference_grid):
    return mode_projection(paper_sample, paper_eigen, reference_grid)
