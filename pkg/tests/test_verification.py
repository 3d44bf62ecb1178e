import numpy as np
import pytest

from fhm.models.options import SyntheticSpec
from fhm.services.fields import BoundaryData, HermitianField, MetricField, sup_norm
from fhm.services.grid_domain import build_grid
from fhm.services.linear_elliptic import barrier
from fhm.services.verification import (
    SyntheticTruth,
    c0_trials,
    gauge_identity_check,
    max_principle_check,
    max_principle_trials,
    observed_order,
    random_hermitian_field,
    random_psd_field,
    s_field,
    scalar_oracle,
    synthetic_flat,
)
from fhm.utils.errors import InputError
from fhm.utils.linalg import min_eigenvalues

from .conftest import ANNULUS, DISC

NILPOTENT = np.array([[0.0, 1.0], [0.0, 0.0]])


def test_s_field_largest_relative_eigenvalue(annulus_grid):
    identity = MetricField.identity(annulus_grid, 2)
    S = s_field(identity, HermitianField.constant(annulus_grid, np.diag([3.0, -1.0])))
    assert np.allclose(S.values, 3.0)

    P = MetricField.constant(annulus_grid, np.diag([4.0, 1.0]))
    S = s_field(P, HermitianField.constant(annulus_grid, np.diag([4.0, 3.0])))
    assert np.allclose(S.values, 3.0)

    S = s_field(P, HermitianField.constant(annulus_grid, np.zeros((2, 2))))
    assert np.allclose(S.values, 0.0)


def test_max_principle_on_constant_field(annulus_grid):
    C = np.diag([4.0, 1.0])
    P = MetricField.constant(annulus_grid, C)
    report = max_principle_check(P, HermitianField.constant(annulus_grid, 2.0 * C))
    assert report.applicable
    assert report.passes
    assert report.gap == pytest.approx(0.0, abs=1e-12)
    assert report.boundary_max == pytest.approx(2.0)


def test_max_principle_inapplicable_for_barrier(annulus_grid):
    P = MetricField.identity(annulus_grid, 2)
    phi = barrier(annulus_grid).values
    h = HermitianField(grid=annulus_grid, values=phi[:, None, None] * np.eye(2))
    report = max_principle_check(P, h)
    assert not report.applicable
    assert not report.passes
    assert report.lh_min_eigenvalue == pytest.approx(-1.0, abs=1e-9)
    assert report.interior_max > report.boundary_max


def test_scalar_oracle_constant_data(annulus_grid):
    F = BoundaryData.constant(ANNULUS, annulus_grid.n_ang, np.eye(1))
    P = scalar_oracle(F, annulus_grid)
    assert np.allclose(P.values, 1.0)


def test_scalar_oracle_power_of_radius(annulus_grid):
    def sample(circle, theta):
        value = 0.5 ** 0.6 if circle.value == "inner" else 1.0
        return np.full((theta.size, 1, 1), value)

    F = BoundaryData.from_function(ANNULUS, annulus_grid.n_ang, sample)
    P = scalar_oracle(F, annulus_grid)
    assert np.allclose(P.values[:, 0, 0].real, np.exp(0.6 * annulus_grid.rad_of_node), atol=1e-10)


def test_scalar_oracle_on_disc():
    grid = build_grid(DISC, 12, 32)
    F = BoundaryData.from_function(DISC, grid.n_ang, lambda circle, theta: np.exp(np.cos(theta))[:, None, None])
    u = np.log(scalar_oracle(F, grid).values[:, 0, 0].real)
    assert np.all(np.abs(u) <= 1.0 + 1e-12)
    assert np.allclose(u, grid.w.real, atol=5e-2)


def test_scalar_oracle_rejects_matrix_data(annulus_grid):
    F = BoundaryData.constant(ANNULUS, annulus_grid.n_ang, np.eye(2))
    with pytest.raises(InputError):
        scalar_oracle(F, annulus_grid)


def test_trivial_generator_gives_identity(annulus_grid):
    P, F, truth = synthetic_flat(SyntheticSpec(dim=1, degree=0, exponents=[0.0]), annulus_grid)
    assert np.allclose(P.values, 1.0)
    assert np.allclose(truth.a_true, 0.0)
    assert F.dim == 1


def test_synthetic_truth_metric_and_connection():
    truth = SyntheticTruth(coefficients={0: np.eye(2), 1: 0.3 * NILPOTENT}, a_true=np.diag([0.25, -0.1]))
    assert truth.dim == 2
    assert np.allclose(truth.metric(np.array([0.0])), [[[1.0, 0.3], [0.3, 1.09]]])
    G = np.eye(2) + 0.3 * NILPOTENT
    expected = np.linalg.solve(G, np.diag([0.25, -0.1]) @ G + 0.3 * NILPOTENT)
    assert np.allclose(truth.connection(np.array([0.0])), expected[None])


def test_synthetic_flat_is_seeded(synthetic_spec, annulus_grid):
    first, _, _ = synthetic_flat(synthetic_spec, annulus_grid)
    second, _, _ = synthetic_flat(synthetic_spec, annulus_grid)
    other, _, _ = synthetic_flat(synthetic_spec.model_copy(update={"seed": 8}), annulus_grid)
    assert np.array_equal(first.values, second.values)
    assert not np.allclose(first.values, other.values)


def test_synthetic_flat_needs_annulus(disc_grid, synthetic_spec):
    with pytest.raises(InputError):
        synthetic_flat(synthetic_spec, disc_grid)


@pytest.mark.parametrize(
    "fields",
    [
        dict(dim=0, exponents=[]),
        dict(dim=2, exponents=[0.1]),
        dict(dim=1, exponents=[0.7]),
        dict(dim=1, exponents=[-0.5]),
        dict(dim=1, exponents=[0.0], degree=-1),
        dict(dim=1, exponents=[0.0], scale=-0.1),
    ],
)
def test_synthetic_spec_validation(fields):
    with pytest.raises(InputError):
        SyntheticSpec(**fields)


def test_gauge_identity_for_identity_metric(annulus_grid, rng):
    P = MetricField.identity(annulus_grid, 2)
    h = random_hermitian_field(annulus_grid, 2, rng)
    assert gauge_identity_check(P, h) <= 1e-10
    zero = HermitianField.constant(annulus_grid, np.zeros((2, 2)))
    assert gauge_identity_check(P, zero) == 0.0


def test_gauge_identity_converges_on_flat_metric(synthetic_spec):
    defects = []
    for n_rad, n_ang in ((16, 32), (32, 64), (64, 128)):
        grid = build_grid(ANNULUS, n_rad, n_ang)
        P, _, truth = synthetic_flat(synthetic_spec, grid)
        h = random_hermitian_field(grid, 2, np.random.default_rng(5))
        defects.append(gauge_identity_check(P, h, j_start=3, exact_connection=truth.connection))
    assert defects[0] < 5e-2
    assert defects[1] < defects[0] / 2.0
    assert defects[2] < defects[1] / 2.5
    assert defects[2] < 2e-3


def test_observed_order():
    assert observed_order([0.1, 0.05], [0.04, 0.01]) == pytest.approx(2.0)
    with pytest.raises(InputError):
        observed_order([0.1], [0.01])
    with pytest.raises(InputError):
        observed_order([0.1, 0.05], [0.01, 0.0])


def test_random_fields(annulus_grid, rng):
    psd = random_psd_field(annulus_grid, 3, rng)
    assert sup_norm(psd) == pytest.approx(1.0)
    assert np.all(min_eigenvalues(psd.values) >= -1e-12)

    bumped = random_psd_field(annulus_grid, 3, rng, zero_boundary=True)
    assert not np.any(bumped.values[annulus_grid.boundary_index])

    h = random_hermitian_field(annulus_grid, 2, rng)
    assert sup_norm(h) <= 1.0 + 1e-12
    assert not np.any(h.values[annulus_grid.boundary_index])
    assert np.allclose(h.values, np.conj(np.swapaxes(h.values, -1, -2)))


def test_random_fields_on_disc(disc_grid, rng):
    psd = random_psd_field(disc_grid, 2, rng, zero_boundary=True)
    assert not np.any(psd.values[disc_grid.boundary_index])
    assert np.all(min_eigenvalues(psd.values) >= -1e-12)


def test_max_principle_trials_small():
    summary = max_principle_trials(build_grid(ANNULUS, 12, 24), trials=3, seed=1)
    assert summary.trials == 3
    assert summary.applicable == 3
    assert summary.all_passed
    assert summary.worst_interior_max <= 1e-8


def test_c0_trials_small():
    summary = c0_trials(build_grid(ANNULUS, 12, 24), trials=3, seed=2)
    assert summary.passed == 3
    assert summary.worst_certificate_margin <= 1e-8
    assert np.isnan(summary.worst_interior_max)


@pytest.mark.slow
def test_max_principle_hundred_trials():
    summary = max_principle_trials(build_grid(ANNULUS, 32, 64), trials=100, seed=0)
    assert summary.all_passed, summary.failures
