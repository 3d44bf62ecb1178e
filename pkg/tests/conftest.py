import numpy as np
import pytest

from fhm.models.domain import DomainSpec
from fhm.models.options import SyntheticSpec
from fhm.services.fields import BoundaryData, MetricField
from fhm.services.grid_domain import build_grid
from fhm.services.verification import synthetic_flat
from fhm.utils.linalg import expm_hermitian

ANNULUS = DomainSpec.annulus(0.5, 1.0)
DISC = DomainSpec.disc(1.0)


@pytest.fixture
def annulus_grid():
    return build_grid(ANNULUS, 12, 16)


@pytest.fixture
def disc_grid():
    return build_grid(DISC, 12, 16)


@pytest.fixture
def synthetic_spec():
    return SyntheticSpec(dim=2, degree=1, exponents=[0.25, -0.1], seed=7)


@pytest.fixture
def synthetic(synthetic_spec):
    """(P, F, truth) on a 16x32 annulus grid"""
    return synthetic_flat(synthetic_spec, build_grid(ANNULUS, 16, 32))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def scalar_boundary(grid, amplitude=0.4):
    """n = 1 annulus data: exp(amplitude cos theta) outside, 1 inside"""

    def sample(circle, theta):
        values = np.exp(amplitude * np.cos(theta)) if circle.value == "outer" else np.ones_like(theta)
        return values[:, None, None]

    return BoundaryData.from_function(grid.domain, grid.n_ang, sample)


def exp_cos_boundary(grid):
    """n = 1 disc data exp(cos theta)"""
    return BoundaryData.from_function(grid.domain, grid.n_ang, lambda circle, theta: np.exp(np.cos(theta))[:, None, None])


def curved_metric(grid):
    """exp(X) for a Hermitian X that is not pluriharmonic; far from flat"""
    s = grid.rad_of_node
    theta = grid.ang_of_node
    X = np.zeros((grid.n_nodes, 2, 2), dtype=np.complex128)
    X[:, 0, 0] = np.sin(3.0 * s) * np.cos(theta)
    X[:, 1, 1] = -0.5 * s ** 2
    X[:, 0, 1] = 0.4 * np.sin(theta) * s
    X[:, 1, 0] = np.conj(X[:, 0, 1])
    return MetricField(grid=grid, values=expm_hermitian(X))
