import numpy as np
import pytest

from fhm.models.options import SyntheticSpec
from fhm.services.dirichlet_solver import solve
from fhm.services.fields import MatrixField, MetricField, sup_norm
from fhm.services.gauge_factorization import (
    factorize_annulus,
    frame_defect,
    frame_gauge,
    function_sampler,
    integrate_frame,
    local_factorization,
    monodromy,
    normalize_frame,
    reconstruct,
    relative_curvature,
    spectral_distance,
    unitary_log,
)
from fhm.services.grid_domain import build_grid
from fhm.services.verification import flat_metric, scalar_oracle, synthetic_flat
from fhm.utils.errors import BranchAmbiguityError, InputError, MonodromyError
from fhm.utils.linalg import dagger

from .conftest import ANNULUS, DISC, curved_metric, exp_cos_boundary

NILPOTENT = np.array([[0.0, 1.0], [0.0, 0.0]])


def _diagonal_power_metric(grid, exponents):
    """diag(|w|^{2 a_k}) with constant connection diag(a_k)"""
    return MetricField(grid=grid, values=np.exp(2.0 * np.outer(grid.rad_of_node, exponents))[:, :, None] * np.eye(len(exponents)))


def _disc_metric(grid):
    G = np.eye(2) + 0.3 * grid.w[:, None, None] * NILPOTENT
    return MetricField(grid=grid, values=dagger(G) @ G)


def test_unitary_log_principal_branch():
    U = np.diag(np.exp(1j * np.array([0.3, -1.0])))
    assert np.allclose(unitary_log(U), np.diag([0.3, -1.0]), atol=1e-12)


def test_unitary_log_of_rotated_unitary(rng):
    Q, _ = np.linalg.qr(rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3)))
    phases = np.array([2.0, -0.5, 0.1])
    U = (Q * np.exp(1j * phases)) @ dagger(Q)
    Ahat = unitary_log(U)
    assert np.allclose(np.linalg.eigvalsh(Ahat), np.sort(phases), atol=1e-10)
    assert np.allclose(Ahat, dagger(Ahat))


def test_unitary_log_branch_ambiguity():
    with pytest.raises(BranchAmbiguityError) as excinfo:
        unitary_log(np.diag([-1.0, 1.0]).astype(complex))
    assert excinfo.value.exit_code == 3
    assert any(abs(abs(p) - np.pi) < 1e-12 for p in excinfo.value.phases)


def test_unitary_log_rejects_non_unitary():
    with pytest.raises(InputError):
        unitary_log(np.diag([2.0, 1.0]).astype(complex))


def test_monodromy_of_power_metric():
    grid = build_grid(ANNULUS, 12, 32)
    a = np.array([0.2, -0.15])
    P = _diagonal_power_metric(grid, a)
    U, defect = monodromy(P, exact_connection=lambda zeta: np.broadcast_to(np.diag(a), zeta.shape + (2, 2)))
    assert defect < 1e-8
    assert np.allclose(U, np.diag(np.exp(2j * np.pi * a)), atol=1e-8)


def test_factorization_of_power_metric_from_grid_connection():
    grid = build_grid(ANNULUS, 24, 64)
    a = np.array([0.2, -0.15])
    fact = factorize_annulus(_diagonal_power_metric(grid, a), tol_unitary=1e-4)
    assert np.allclose(fact.exponents, np.sort(a), atol=1e-3)


def test_synthetic_factorization_round_trip():
    grid = build_grid(ANNULUS, 16, 64)
    spec = SyntheticSpec(dim=2, degree=1, exponents=[0.25, -0.1], seed=3)
    P, _, truth = synthetic_flat(spec, grid)
    fact = factorize_annulus(P, exact_connection=truth.connection, tol_unitary=1e-4)
    assert fact.monodromy_unitarity_defect < 1e-4
    assert fact.periodicity_defect < 1e-4
    assert np.allclose(fact.exponents, [-0.1, 0.25], atol=1e-4)
    rebuilt = reconstruct(fact, grid)
    assert sup_norm(rebuilt.values - P.values) / sup_norm(P) < 1e-4


def test_base_choice_changes_k_not_metric():
    grid = build_grid(ANNULUS, 16, 64)
    spec = SyntheticSpec(dim=2, degree=1, exponents=[0.2, 0.05], seed=5)
    P, _, truth = synthetic_flat(spec, grid)
    first = factorize_annulus(P, exact_connection=truth.connection, tol_unitary=1e-4)
    second = factorize_annulus(
        P, exact_connection=truth.connection, base_sigma=grid.radial[2], base_theta_index=9, tol_unitary=1e-4
    )
    assert first.base_node != second.base_node
    assert np.allclose(first.exponents, second.exponents, atol=1e-4)
    assert sup_norm(reconstruct(second, grid).values - P.values) / sup_norm(P) < 1e-4


def test_reconstruct_rejects_other_grid(synthetic):
    P, _, truth = synthetic
    fact = factorize_annulus(P, exact_connection=truth.connection, tol_unitary=1e-3)
    with pytest.raises(InputError):
        reconstruct(fact, build_grid(ANNULUS, 12, 32))


def test_curved_metric_gives_non_holomorphic_k(synthetic):
    grid = build_grid(ANNULUS, 16, 32)
    curved = curved_metric(grid)
    assert relative_curvature(curved) > 0.05
    fact = factorize_annulus(curved, tol_unitary=1.0, branch_guard=1e-6)
    assert fact.holomorphy_defect > 0.05
    P, _, truth = synthetic
    assert relative_curvature(P) < 0.05
    flat = factorize_annulus(P, exact_connection=truth.connection, tol_unitary=1e-3)
    assert flat.holomorphy_defect < 2e-2


def test_monodromy_tolerance_enforced(synthetic):
    P, _, _ = synthetic
    with pytest.raises(MonodromyError) as excinfo:
        factorize_annulus(P, tol_unitary=1e-15)
    assert excinfo.value.defect > 1e-15
    assert excinfo.value.exit_code == 4


def test_eigenphase_at_pi_is_ambiguous_from_grid_connection():
    grid = build_grid(ANNULUS, 16, 64)
    spec = SyntheticSpec(dim=2, degree=1, exponents=[0.5, -0.1], seed=3)
    P, _, truth = synthetic_flat(spec, grid)
    with pytest.raises(BranchAmbiguityError) as excinfo:
        factorize_annulus(P, tol_unitary=0.1)
    assert excinfo.value.exit_code == 3
    with pytest.raises(BranchAmbiguityError):
        factorize_annulus(P, exact_connection=truth.connection, tol_unitary=1e-3)


def test_spectral_distance(rng):
    Q, _ = np.linalg.qr(rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2)))
    D = np.diag([1.0, -1.0]).astype(complex)
    assert spectral_distance(D, Q @ D @ dagger(Q)) < 1e-12
    assert spectral_distance(D, np.diag([1.0, 1j])) == pytest.approx(np.sqrt(2.0))


def test_factorization_needs_annulus(disc_grid):
    with pytest.raises(InputError):
        factorize_annulus(_disc_metric(disc_grid))


def test_integrate_frame_on_constant_metric(annulus_grid):
    C = np.array([[2.0, 0.5], [0.5, 1.0]])
    P = MetricField.constant(annulus_grid, C)
    path = [-0.5 + 0.1j, -0.3 + 1.0j, -0.1 + 2.0j]
    H0 = np.linalg.cholesky(C).conj().T
    frames = integrate_frame(P, path, H0)
    assert np.allclose(frames.frames, H0[None], atol=1e-12)
    assert frames.consistency_defect(P) < 1e-10


def test_integrate_frame_checks_input(annulus_grid):
    P = MetricField.identity(annulus_grid, 2)
    with pytest.raises(InputError):
        integrate_frame(P, [-0.5, -0.4], np.eye(3))
    with pytest.raises(InputError):
        integrate_frame(P, [-0.5, 0.5], np.eye(2))
    with pytest.raises(InputError, match="not flat"):
        integrate_frame(curved_metric(annulus_grid), [-0.5, -0.4], np.eye(2))


def test_local_factorization_on_disc():
    grid = build_grid(DISC, 12, 32)
    P = _disc_metric(grid)
    sampler = function_sampler(grid, lambda w: np.broadcast_to(0.3 * NILPOTENT, w.shape + (2, 2)))
    H = local_factorization(P, sampler=sampler)
    assert frame_defect(H, P) < 1e-6
    H_grid = local_factorization(P)
    assert frame_defect(H_grid, P) < 5e-2


def test_local_factorization_of_disc_solve():
    grid = build_grid(DISC, 16, 32)
    F = exp_cos_boundary(grid)
    P, _ = solve(F, grid)
    H = local_factorization(P)
    assert frame_defect(H, P) < 2e-2
    oracle = scalar_oracle(F, grid).values
    assert sup_norm(np.abs(H.values) ** 2 - oracle) / sup_norm(oracle) < 2e-2


def test_disc_frame_path_through_centre():
    grid = build_grid(DISC, 12, 32)
    P = _disc_metric(grid)

    def G(w):
        return np.eye(2) + 0.3 * w * NILPOTENT

    path = integrate_frame(P, [0.5, 0j, -0.5j], G(0.5))
    assert np.allclose(path.frames[1], G(0.0), atol=5e-2)
    assert np.allclose(path.frames[-1], G(-0.5j), atol=5e-2)
    assert path.consistency_defect(P) < 5e-2


def test_normalize_and_gauge(synthetic, rng):
    P, _, truth = synthetic
    grid = P.grid
    G = MatrixField(grid=grid, values=truth.G(grid.w))
    Q, _ = np.linalg.qr(rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2)))
    rotated = G.with_values(Q[None] @ G.values)
    U, defect = frame_gauge(rotated, G)
    assert defect < 1e-10
    assert np.allclose(U, Q)
    base = grid.index(3, 5)
    normalized = normalize_frame(rotated, base)
    Hb = normalized.values[base]
    assert np.allclose(Hb, dagger(Hb))
    assert np.all(np.linalg.eigvalsh(Hb) > 0)
    assert np.allclose(dagger(normalized.values) @ normalized.values, dagger(G.values) @ G.values)


@pytest.mark.slow
def test_factorization_acceptance_scale():
    grid = build_grid(ANNULUS, 128, 256)
    spec = SyntheticSpec(dim=2, degree=1, exponents=[0.25, -0.1], seed=11)
    P, _, truth = synthetic_flat(spec, grid)
    fact = factorize_annulus(P, exact_connection=truth.connection)
    assert fact.monodromy_unitarity_defect <= 1e-6
    assert fact.periodicity_defect <= 1e-5
    assert np.allclose(fact.exponents, [-0.1, 0.25], atol=1e-6)
    assert sup_norm(reconstruct(fact, grid).values - flat_metric(truth, grid).values) / sup_norm(P) <= 1e-5
