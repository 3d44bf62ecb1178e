"""The linearized curvature operator at a background metric and its Dirichlet problem.

For A = P^{-1} P_zeta and A* = P_zetabar P^{-1}:

    L h = h_{zeta zetabar} - A* h_zeta - h_zetabar A + A* h A

which is the exact derivative of the discrete curvature residual at P.
"""

import logging
from typing import List, Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, gmres, splu

from ..models.reports import CertificateReport
from ..utils.config import settings
from ..utils.errors import InputError, LinearSolverError
from ..utils.linalg import dagger, hermitian_to_params, hermitize, inv_sqrt_pd, max_eigenvalues, params_to_hermitian
from .fields import HermitianField, MatrixField, MetricField, ScalarField, min_eigenvalue, sup_norm
from .grid_domain import Grid
from .operator_calculus import ConnectionField, Stencils, apply_stencil, connection, stencils

logger = logging.getLogger(__name__)

JACOBI_WEIGHT = 2.0 / 3.0
MAX_KRYLOV_ROUNDS = 8


class BarrierField(ScalarField):
    """Phi >= 0, zero on the boundary rings, discrete Phi_{zeta zetabar} = -1 inside"""


class LinearizedContext:
    """Background metric with the coefficient fields of L precomputed"""

    def __init__(self, P: MetricField):
        if not isinstance(P, MetricField):
            P = MetricField(grid=P.grid, values=P.values)
        self.P = P
        self.grid = P.grid
        self.dim = P.dim
        self.ops: Stencils = stencils(P.grid)
        self.A: ConnectionField = connection(P)
        self.P_zetabar = MatrixField(grid=P.grid, values=apply_stencil(self.ops.d_zetabar, P.values))
        self.A_star = dagger(np.linalg.solve(P.values, dagger(self.P_zetabar.values)))
        self._preconditioner = None

    @property
    def interior(self) -> np.ndarray:
        return self.grid.interior_index

    def apply_values(self, h: np.ndarray) -> np.ndarray:
        """L h on raw values; boundary rows carry h itself"""
        ops = self.ops
        h_z = apply_stencil(ops.d_zeta, h)
        h_zb = apply_stencil(ops.d_zetabar, h)
        A, A_star = self.A.values, self.A_star
        out = apply_stencil(ops.d_mixed, h) - A_star @ h_z - h_zb @ A + A_star @ h @ A
        out[self.grid.boundary_index] = h[self.grid.boundary_index]
        return hermitize(out)

    def preconditioner(self):
        """Sparse LU of the scalar interior d_zeta d_zetabar"""
        if self._preconditioner is None:
            interior = self.interior
            block = sp.csc_matrix(self.ops.d_mixed[interior][:, interior].real)
            self._preconditioner = splu(block)
        return self._preconditioner


def apply_L(ctx: LinearizedContext, h: MatrixField) -> HermitianField:
    if h.grid != ctx.grid or h.dim != ctx.dim:
        raise InputError(
            f"direction {h.grid.describe()} n={h.dim} does not match background {ctx.grid.describe()} n={ctx.dim}"
        )
    return HermitianField(grid=ctx.grid, values=ctx.apply_values(hermitize(h.values)))


def _interior_residual(ctx: LinearizedContext, h: np.ndarray, f1: np.ndarray) -> float:
    interior = ctx.interior
    return sup_norm(ctx.apply_values(h)[interior] - f1[interior])


def _jacobi_sweeps(
    ctx: LinearizedContext, h: np.ndarray, f1: np.ndarray, target: float, budget: int, history: List[float]
) -> Optional[np.ndarray]:
    interior = ctx.interior
    diag = ctx.ops.d_mixed.diagonal().real[interior]
    h = h.copy()
    for sweep in range(budget):
        residual = f1[interior] - ctx.apply_values(h)[interior]
        size = sup_norm(residual)
        if sweep % 50 == 0:
            history.append(size)
        if size <= target:
            history.append(size)
            return h
        h[interior] = hermitize(h[interior] + JACOBI_WEIGHT * residual / diag[:, None, None])
    return None


def solve_dirichlet_L(
    ctx: LinearizedContext,
    f1: MatrixField,
    f2: Optional[np.ndarray] = None,
    tol: Optional[float] = None,
    max_iters: Optional[int] = None,
) -> HermitianField:
    """Solve L h = f1 at interior nodes with h = f2 on the boundary rings.

    f2 holds boundary values in boundary_nodes order (None means zero). The
    result satisfies sup ||L h - f1|| <= tol * (1 + sup ||f1||) over interior
    nodes, or LinearSolverError is raised with the residual history.
    """
    grid, n = ctx.grid, ctx.dim
    if f1.grid != grid or f1.dim != n:
        raise InputError(f"right-hand side {f1.grid.describe()} n={f1.dim} does not match {grid.describe()} n={n}")
    boundary, interior = grid.boundary_index, ctx.interior
    rhs_values = hermitize(f1.values)
    lift = np.zeros((grid.n_nodes, n, n), dtype=np.complex128)
    if f2 is not None:
        f2 = np.asarray(f2, dtype=np.complex128)
        if f2.shape != (boundary.size, n, n):
            raise InputError(f"boundary values must have shape ({boundary.size}, {n}, {n}), got {f2.shape}")
        lift[boundary] = hermitize(f2)

    tol = settings.TOL_LIN if tol is None else tol
    target = tol * (1.0 + sup_norm(rhs_values[interior]))
    unknowns = interior.size * n * n
    budget = settings.max_lin_iters(unknowns) if max_iters is None else max_iters
    history: List[float] = []

    lifted_rhs = rhs_values - ctx.apply_values(lift)
    b = hermitian_to_params(lifted_rhs[interior]).ravel()
    if not np.any(b):
        logger.debug("Homogeneous linearized problem, returning the lift")
        return HermitianField(grid=grid, values=lift)

    def expand(x: np.ndarray) -> np.ndarray:
        h = np.zeros((grid.n_nodes, n, n), dtype=np.complex128)
        h[interior] = params_to_hermitian(x.reshape(interior.size, n * n), n)
        return h

    def matvec(x: np.ndarray) -> np.ndarray:
        return hermitian_to_params(ctx.apply_values(expand(np.asarray(x).ravel()))[interior]).ravel()

    lu = ctx.preconditioner()

    def precondition(x: np.ndarray) -> np.ndarray:
        return lu.solve(np.asarray(x).reshape(interior.size, n * n)).ravel()

    operator = LinearOperator((unknowns, unknowns), matvec=matvec, dtype=np.float64)
    M = LinearOperator((unknowns, unknowns), matvec=precondition, dtype=np.float64)
    restart = min(settings.GMRES_RESTART, unknowns)

    x = np.zeros(unknowns)
    atol = 0.5 * target * np.sqrt(interior.size)
    floor = 1e-15 * float(np.linalg.norm(b))
    used = 0
    for round_index in range(MAX_KRYLOV_ROUNDS):
        if used >= budget:
            break
        counter = {"n": 0}

        def count(_):
            counter["n"] += 1

        cycles = max(1, int(np.ceil((budget - used) / restart)))
        x, info = gmres(
            operator, b, x0=x, rtol=0.0, atol=max(atol, floor), restart=restart,
            maxiter=cycles, M=M, callback=count, callback_type="pr_norm",
        )
        used += counter["n"]
        residual = _interior_residual(ctx, lift + expand(x), rhs_values)
        history.append(residual)
        logger.debug("Krylov round %d: %d iterations, residual %.3e (target %.3e)", round_index, counter["n"], residual, target)
        if residual <= target:
            return HermitianField(grid=grid, values=hermitize(lift + expand(x)))
        if atol <= floor:
            break
        atol = max(floor, atol * 0.5 * target / residual)

    logger.warning("Krylov solve stagnated at %.3e after %d iterations, trying Jacobi sweeps", history[-1] if history else np.nan, used)
    h = _jacobi_sweeps(ctx, lift + expand(x), rhs_values, target, max(budget - used, budget // 2), history)
    if h is None:
        raise LinearSolverError(
            f"linearized Dirichlet solve did not reach {target:.3e} within {budget} iterations",
            residual_history=history,
        )
    return HermitianField(grid=grid, values=hermitize(h))


def barrier(grid: Grid) -> BarrierField:
    """Phi = 2 (sigma - sigma_1)(sigma_2 - sigma) on the annulus, r_outer^2 - |w|^2 on the disc"""
    rad = grid.rad_of_node
    if grid.is_annulus:
        sigma_1, sigma_2 = grid.radial[0], grid.radial[-1]
        values = 2.0 * (rad - sigma_1) * (sigma_2 - rad)
    else:
        values = grid.domain.r_outer ** 2 - rad ** 2
    values[grid.boundary_index] = 0.0
    return BarrierField(grid=grid, values=values)


def c0_certificate(ctx: LinearizedContext, h: MatrixField, tol: Optional[float] = None) -> CertificateReport:
    """Check +-h <= Phi ||P^{-1}||_0 ||L h||_0 P as quadratic forms at every node.

    Phi vanishes on the boundary, so h with nonzero boundary values fails there.
    """
    tol = settings.TOL_CERT if tol is None else tol
    grid = ctx.grid
    h_values = hermitize(h.values)
    edge = sup_norm(h_values[grid.boundary_index])
    if edge > settings.TOL_HERM * max(1.0, sup_norm(h_values)):
        logger.warning("C0 certificate on a field with boundary values up to %.3e", edge)
    lh_norm = sup_norm(ctx.apply_values(h_values)[ctx.interior])
    p_inv_norm = 1.0 / min_eigenvalue(ctx.P)
    phi = barrier(grid).values
    scaled = inv_sqrt_pd(ctx.P.values)
    core = scaled @ h_values @ scaled
    bound = lh_norm * p_inv_norm * phi
    margins = np.maximum(max_eigenvalues(hermitize(core)), max_eigenvalues(hermitize(-core))) - bound
    worst = int(np.argmax(margins))
    report = CertificateReport(
        passes=bool(margins[worst] <= tol),
        worst_margin=float(margins[worst]),
        lh_norm=lh_norm,
        p_inv_norm=p_inv_norm,
        worst_node=worst,
    )
    logger.info("C0 certificate: passes=%s worst margin %.3e", report.passes, report.worst_margin)
    return report
