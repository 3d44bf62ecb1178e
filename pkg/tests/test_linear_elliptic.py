import numpy as np
import pytest

from fhm.models.domain import DomainSpec
from fhm.models.options import SyntheticSpec
from fhm.services.fields import HermitianField, MatrixField, MetricField, boundary_values, sup_norm
from fhm.services.grid_domain import build_grid
from fhm.services.linear_elliptic import LinearizedContext, apply_L, barrier, c0_certificate, solve_dirichlet_L
from fhm.services.operator_calculus import curvature_residual, d_mixed
from fhm.services.verification import observed_order, random_hermitian_field, random_psd_field, synthetic_flat
from fhm.utils.errors import InputError
from fhm.utils.linalg import dagger

from .conftest import ANNULUS


@pytest.mark.parametrize("domain", [ANNULUS, DomainSpec.disc(1.0)])
def test_barrier_has_unit_negative_laplacian(domain):
    grid = build_grid(domain, 12, 16)
    phi = barrier(grid)
    assert np.all(phi.values[grid.boundary_index] == 0.0)
    assert np.all(phi.values[grid.interior_index] > 0.0)
    mixed = d_mixed(MatrixField(grid=grid, values=phi.values[:, None, None])).values[:, 0, 0]
    assert np.allclose(mixed[grid.interior_index], -1.0, atol=1e-9)


def test_identity_background_reduces_to_laplacian(annulus_grid, rng):
    ctx = LinearizedContext(MetricField.identity(annulus_grid, 2))
    h = random_hermitian_field(annulus_grid, 2, rng)
    interior = annulus_grid.interior_index
    assert np.allclose(apply_L(ctx, h).values[interior], d_mixed(h).values[interior], atol=1e-10)
    assert np.allclose(apply_L(ctx, h).values[annulus_grid.boundary_index], h.values[annulus_grid.boundary_index])


def test_linearization_matches_finite_differences(synthetic, rng):
    P, _, _ = synthetic
    h = random_hermitian_field(P.grid, 2, rng)
    lh = apply_L(LinearizedContext(P), h).values
    base = curvature_residual(P).values
    defects = []
    for eps in (1e-3, 1e-4):
        moved = curvature_residual(MetricField(grid=P.grid, values=P.values + eps * h.values)).values
        defects.append(sup_norm(moved - base - eps * lh))
    assert 50.0 < defects[0] / defects[1] < 200.0


def test_scalar_multiple_of_flat_metric():
    """L(u P) = u_{zeta zetabar} P for flat P, up to truncation error"""
    hs, defects = [], []
    for n_rad, n_ang in ((16, 32), (32, 64)):
        grid = build_grid(ANNULUS, n_rad, n_ang)
        P, _, _ = synthetic_flat(SyntheticSpec(dim=2, exponents=[0.25, -0.1], seed=7), grid)
        u = np.cos(grid.ang_of_node) * np.sin(np.pi * (grid.rad_of_node - grid.radial[0]) / np.ptp(grid.radial))
        uP = MatrixField(grid=grid, values=u[:, None, None] * P.values)
        lhs = apply_L(LinearizedContext(P), uP).values
        u_mixed = d_mixed(MatrixField(grid=grid, values=u[:, None, None])).values
        rhs = u_mixed * P.values
        interior = grid.interior_index
        defects.append(sup_norm(lhs[interior] - rhs[interior]))
        hs.append(grid.h)
    assert observed_order(hs, defects) > 1.5


def test_dirichlet_solve_recovers_known_field(synthetic, rng):
    P, _, _ = synthetic
    ctx = LinearizedContext(P)
    h_true = random_hermitian_field(P.grid, 2, rng, zero_boundary=False)
    f1 = apply_L(ctx, h_true)
    h = solve_dirichlet_L(ctx, f1, boundary_values(h_true))
    assert sup_norm(h.values - h_true.values) < 1e-7
    assert np.array_equal(boundary_values(h), boundary_values(h_true))


def test_dirichlet_solve_on_disc(disc_grid, rng):
    w = disc_grid.w
    G = np.zeros((disc_grid.n_nodes, 2, 2), dtype=np.complex128)
    G[:, 0, 0] = G[:, 1, 1] = 1.0
    G[:, 0, 1] = 0.3 * w
    P = MetricField(grid=disc_grid, values=np.conj(np.swapaxes(G, -1, -2)) @ G)
    ctx = LinearizedContext(P)
    h_true = random_hermitian_field(disc_grid, 2, rng)
    h = solve_dirichlet_L(ctx, apply_L(ctx, h_true))
    assert sup_norm(h.values - h_true.values) < 1e-7


def test_homogeneous_problem_returns_zero(annulus_grid):
    ctx = LinearizedContext(MetricField.identity(annulus_grid, 2))
    h = solve_dirichlet_L(ctx, HermitianField.constant(annulus_grid, np.zeros((2, 2))))
    assert not np.any(h.values)


def test_dirichlet_rejects_mismatched_data(annulus_grid):
    ctx = LinearizedContext(MetricField.identity(annulus_grid, 2))
    with pytest.raises(InputError):
        solve_dirichlet_L(ctx, HermitianField.identity(annulus_grid, 1))
    with pytest.raises(InputError):
        solve_dirichlet_L(ctx, HermitianField.identity(annulus_grid, 2), np.zeros((3, 2, 2)))


def test_c0_certificate_on_solved_field(synthetic, rng):
    P, _, _ = synthetic
    ctx = LinearizedContext(P)
    h = solve_dirichlet_L(ctx, random_psd_field(P.grid, 2, rng, zero_boundary=True))
    report = c0_certificate(ctx, h)
    assert report.passes
    assert report.lh_norm > 0.0
    assert report.p_inv_norm > 0.0


def test_c0_certificate_fails_on_nonzero_boundary(annulus_grid):
    ctx = LinearizedContext(MetricField.identity(annulus_grid, 2))
    report = c0_certificate(ctx, HermitianField.identity(annulus_grid, 2))
    assert not report.passes
    assert report.worst_margin == pytest.approx(1.0)
    assert report.worst_node in set(annulus_grid.boundary_index.tolist())
    zero = c0_certificate(ctx, HermitianField.constant(annulus_grid, np.zeros((2, 2))))
    assert zero.passes
    assert zero.worst_margin == 0.0


def test_unit_source_gives_closed_form_barrier():
    grid = build_grid(ANNULUS, 13, 16)
    ctx = LinearizedContext(MetricField.identity(grid, 2))
    h = solve_dirichlet_L(ctx, HermitianField.constant(grid, -np.eye(2)))
    s1, s2 = grid.radial[0], grid.radial[-1]
    sigma = grid.rad_of_node
    phi = 2.0 * (sigma - s1) * (s2 - sigma)
    assert np.allclose(h.values, phi[:, None, None] * np.eye(2), atol=1e-8)
    middle = grid.index(6, 0)
    assert h.values[middle, 0, 0].real == pytest.approx(np.log(0.5) ** 2 / 2.0, abs=1e-8)
    assert h.values[middle, 0, 0].real == pytest.approx(0.2402, abs=1e-4)
    assert c0_certificate(ctx, h).passes


def test_constant_gauge_covariance(synthetic, rng):
    P, _, _ = synthetic
    T = np.eye(2) + 0.3 * (rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2)))
    moved = MetricField(grid=P.grid, values=dagger(T) @ P.values @ T)
    h = random_hermitian_field(P.grid, 2, rng)
    h_moved = HermitianField(grid=P.grid, values=dagger(T) @ h.values @ T)
    lh = apply_L(LinearizedContext(P), h).values
    lh_moved = apply_L(LinearizedContext(moved), h_moved).values
    assert sup_norm(lh_moved - dagger(T) @ lh @ T) <= 1e-10 * (1.0 + sup_norm(lh))
