"""Chart-level differential operators on matrix fields.

All operators are sparse matrices over the node index applied entrywise to the
matrix values. Annulus (log-polar chart): d_zeta = (d_sigma - i d_theta) / 2 and
d_zeta d_zetabar = (d_sigma^2 + d_theta^2) / 4. Disc (polar chart of w):
d_w = e^{-i theta} (d_r - (i/r) d_theta) / 2 and
d_w d_wbar = (d_rr + (1/r) d_r + (1/r^2) d_theta^2) / 4, with the radial line
through the origin closed by the node at (r_0, theta + pi).
"""

import logging
from functools import lru_cache
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from ..utils.errors import InputError
from ..utils.linalg import hermitize
from .fields import HermitianField, MatrixField, MetricField, sup_norm
from .grid_domain import Grid

logger = logging.getLogger(__name__)


class ConnectionField(MatrixField):
    """A = P^{-1} d_zeta P, the d_zeta coefficient of the Chern connection"""


class Stencils(NamedTuple):
    d_rad: sp.csr_matrix
    d_ang: sp.csr_matrix
    d_zeta: sp.csr_matrix
    d_zetabar: sp.csr_matrix
    d_mixed: sp.csr_matrix


def _radial_first(n: int, step: float) -> sp.lil_matrix:
    d = sp.lil_matrix(sp.diags([-1.0, 1.0], [-1, 1], shape=(n, n)) / (2.0 * step))
    d[0, [0, 1, 2]] = [-1.5 / step, 2.0 / step, -0.5 / step]
    d[n - 1, [n - 3, n - 2, n - 1]] = [0.5 / step, -2.0 / step, 1.5 / step]
    return d


def _radial_second(n: int, step: float) -> sp.lil_matrix:
    d = sp.lil_matrix(sp.diags([1.0, -2.0, 1.0], [-1, 0, 1], shape=(n, n)) / step ** 2)
    d[0, [0, 1, 2, 3]] = [2.0 / step ** 2, -5.0 / step ** 2, 4.0 / step ** 2, -1.0 / step ** 2]
    d[n - 1, [n - 4, n - 3, n - 2, n - 1]] = [-1.0 / step ** 2, 4.0 / step ** 2, -5.0 / step ** 2, 2.0 / step ** 2]
    return d


def _periodic_first(n: int, step: float) -> sp.csr_matrix:
    d = sp.lil_matrix(sp.diags([-1.0, 1.0], [-1, 1], shape=(n, n)))
    d[0, n - 1] = -1.0
    d[n - 1, 0] = 1.0
    return (d / (2.0 * step)).tocsr()


def _periodic_second(n: int, step: float) -> sp.csr_matrix:
    d = sp.lil_matrix(sp.diags([1.0, -2.0, 1.0], [-1, 0, 1], shape=(n, n)))
    d[0, n - 1] = 1.0
    d[n - 1, 0] = 1.0
    return (d / step ** 2).tocsr()


@lru_cache(maxsize=16)
def stencils(grid: Grid) -> Stencils:
    """Second-order finite-difference operators for the grid (cached per grid)"""
    n_rad, n_ang = grid.n_rad, grid.n_ang
    i_rad, i_ang = sp.identity(n_rad, format="csr"), sp.identity(n_ang, format="csr")
    h_rad, h_ang = grid.d_rad, grid.d_ang
    d1_rad, d2_rad = _radial_first(n_rad, h_rad), _radial_second(n_rad, h_rad)
    d_ang = sp.kron(i_rad, _periodic_first(n_ang, h_ang), format="csr")
    d2_ang = sp.kron(i_rad, _periodic_second(n_ang, h_ang), format="csr")

    if grid.is_annulus:
        d_rad = sp.kron(d1_rad, i_ang, format="csr")
        d2 = sp.kron(d2_rad, i_ang, format="csr")
        d_zeta = 0.5 * (d_rad - 1j * d_ang)
        d_zetabar = 0.5 * (d_rad + 1j * d_ang)
        d_mixed = 0.25 * (d2 + d2_ang)
    else:
        # first ring: the missing inner neighbour is the node across the origin
        d1_rad[0, [0, 1, 2]] = [0.0, 0.5 / h_rad, 0.0]
        d2_rad[0, [0, 1, 2, 3]] = [-2.0 / h_rad ** 2, 1.0 / h_rad ** 2, 0.0, 0.0]
        first = sp.csr_matrix(([1.0], ([0], [0])), shape=(n_rad, n_rad))
        across = sp.csr_matrix(
            (np.ones(n_ang), (np.arange(n_ang), (np.arange(n_ang) + n_ang // 2) % n_ang)), shape=(n_ang, n_ang)
        )
        ghost = sp.kron(first, across, format="csr")
        d_rad = sp.kron(d1_rad, i_ang, format="csr") - ghost / (2.0 * h_rad)
        d2 = sp.kron(d2_rad, i_ang, format="csr") + ghost / h_rad ** 2
        r = grid.rad_of_node
        theta = grid.ang_of_node
        inv_r = sp.diags(1.0 / r)
        d_zeta = 0.5 * sp.diags(np.exp(-1j * theta)) @ (d_rad - 1j * (inv_r @ d_ang))
        d_zetabar = 0.5 * sp.diags(np.exp(1j * theta)) @ (d_rad + 1j * (inv_r @ d_ang))
        d_mixed = 0.25 * (d2 + inv_r @ d_rad + sp.diags(1.0 / r ** 2) @ d2_ang)

    logger.debug("Assembled stencils for %s", grid.describe())
    return Stencils(
        d_rad=sp.csr_matrix(d_rad),
        d_ang=sp.csr_matrix(d_ang),
        d_zeta=sp.csr_matrix(d_zeta),
        d_zetabar=sp.csr_matrix(d_zetabar),
        d_mixed=sp.csr_matrix(d_mixed),
    )


def apply_stencil(op: sp.csr_matrix, values: np.ndarray) -> np.ndarray:
    """Apply a node-index operator entrywise to an (n_nodes, n, n) stack"""
    n_nodes, n, _ = values.shape
    return np.asarray(op @ values.reshape(n_nodes, n * n)).reshape(n_nodes, n, n)


def _checked(field: MatrixField) -> Stencils:
    if field.grid.n_rad < 4 or field.grid.n_ang < 4:
        raise InputError(f"grid too small for the stencils: {field.grid.describe()}")
    return stencils(field.grid)


def d_zeta(field: MatrixField) -> MatrixField:
    return MatrixField(grid=field.grid, values=apply_stencil(_checked(field).d_zeta, field.values))


def d_zetabar(field: MatrixField) -> MatrixField:
    return MatrixField(grid=field.grid, values=apply_stencil(_checked(field).d_zetabar, field.values))


def d_mixed(field: MatrixField) -> MatrixField:
    """d_zeta d_zetabar; radial boundary rings use one-sided stencils"""
    return MatrixField(grid=field.grid, values=apply_stencil(_checked(field).d_mixed, field.values))


def connection(P: MetricField) -> ConnectionField:
    if not isinstance(P, MetricField):
        P = MetricField(grid=P.grid, values=P.values)
    dP = apply_stencil(_checked(P).d_zeta, P.values)
    return ConnectionField(grid=P.grid, values=np.linalg.solve(P.values, dP))


def curvature_values(P: MetricField) -> np.ndarray:
    """P_{zeta zetabar} - P_{zetabar} P^{-1} P_zeta at every node, boundary rings set to zero.

    Not re-Hermitized.
    """
    ops = _checked(P)
    values = P.values
    P_z = apply_stencil(ops.d_zeta, values)
    P_zb = apply_stencil(ops.d_zetabar, values)
    residual = apply_stencil(ops.d_mixed, values) - P_zb @ np.linalg.solve(values, P_z)
    residual[P.grid.boundary_index] = 0.0
    return residual


def curvature_residual(P: MetricField) -> HermitianField:
    """Un-normalized curvature residual; zero iff P is flat in the working chart.

    Boundary rows carry zero (the Dirichlet condition replaces the equation there).
    """
    if not isinstance(P, MetricField):
        P = MetricField(grid=P.grid, values=P.values)
    return HermitianField(grid=P.grid, values=hermitize(curvature_values(P)))


def flatness_residual(P: MetricField) -> float:
    """sup-norm of the curvature residual over interior nodes"""
    return sup_norm(curvature_residual(P))


def holomorphy_defect(A: MatrixField) -> float:
    return sup_norm(d_zetabar(A))
