import numpy as np
import pytest
from app.models.measures import AtomicMeasure1D
from app.services.construction import ConstructionService

# Small desk parameters: alpha = 0, middle thirds, ω resolved to generation 10, σ to 8
DEPTH_OMEGA = 10
DEPTH_SIGMA = 8


@pytest.fixture(scope="session")
def params():
    return ConstructionService.make_params(0.0, 1.0 / 3.0, depth_omega=DEPTH_OMEGA, depth_sigma=DEPTH_SIGMA)


@pytest.fixture(scope="session")
def tree(params):
    return ConstructionService.build_tree(params, DEPTH_OMEGA)


@pytest.fixture(scope="session")
def omega(tree):
    return ConstructionService.cantor_weights(tree, level=DEPTH_OMEGA, tol=1e-3)


@pytest.fixture(scope="session")
def sigma(tree):
    return ConstructionService.sigma_atoms(tree, DEPTH_SIGMA)


@pytest.fixture
def unit_atom():
    """One unit mass at the origin"""
    return AtomicMeasure1D(np.array([0.0]), np.array([1.0]))
