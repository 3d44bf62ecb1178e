"""Independent oracles and property checks.

The scalar oracle assembles its own five-point Laplacian and solves it
directly; it shares no machinery with the linearized solver.
"""

import logging
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from pydantic import BaseModel, ConfigDict, field_validator
from scipy.sparse.linalg import spsolve
from scipy.stats import unitary_group

from ..models.options import SyntheticSpec
from ..models.reports import MaxPrincipleReport, TrialSummary
from ..utils.config import settings
from ..utils.errors import FhmError, InputError
from ..utils.linalg import dagger, hermitize, inv_sqrt_pd, max_eigenvalues, min_eigenvalues
from .fields import BoundaryData, HermitianField, MatrixField, MetricField, ScalarField, restrict_boundary, sup_norm
from .gauge_factorization import sector_frame
from .grid_domain import Grid
from .linear_elliptic import LinearizedContext, apply_L, barrier, c0_certificate, solve_dirichlet_L

logger = logging.getLogger(__name__)


class SyntheticTruth(BaseModel):
    """Laurent generator G(w) = sum_k C_k w^k and exponent a_true of P = G* exp(a log|w|^2) G"""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    coefficients: Dict[int, np.ndarray]
    a_true: np.ndarray

    @field_validator("coefficients", mode="before")
    @classmethod
    def coerce_coefficients(cls, coefficients) -> Dict[int, np.ndarray]:
        return {int(k): np.array(c, dtype=np.complex128, copy=True) for k, c in coefficients.items()}

    @field_validator("a_true", mode="before")
    @classmethod
    def coerce_exponent(cls, a) -> np.ndarray:
        return hermitize(np.atleast_2d(np.array(a, dtype=np.complex128, copy=True)))

    @property
    def dim(self) -> int:
        return self.a_true.shape[0]

    def G(self, w: np.ndarray) -> np.ndarray:
        w = np.asarray(w, dtype=np.complex128)
        return sum(np.power.outer(w, k)[..., None, None] * C for k, C in self.coefficients.items())

    def dG(self, w: np.ndarray) -> np.ndarray:
        w = np.asarray(w, dtype=np.complex128)
        terms = [k * np.power.outer(w, k - 1)[..., None, None] * C for k, C in self.coefficients.items() if k != 0]
        return sum(terms) if terms else np.zeros(w.shape + (self.dim, self.dim), dtype=np.complex128)

    def metric(self, zeta: np.ndarray) -> np.ndarray:
        zeta = np.asarray(zeta, dtype=np.complex128)
        G = self.G(np.exp(zeta))
        lam, V = np.linalg.eigh(self.a_true)
        middle = (V * np.exp(np.multiply.outer(2.0 * zeta.real, lam))[..., None, :]) @ dagger(V)
        return hermitize(dagger(G) @ middle @ G)

    def connection(self, zeta: np.ndarray) -> np.ndarray:
        """A = G^{-1} a G + w G^{-1} G'(w), the zeta-chart connection of the metric"""
        zeta = np.asarray(zeta, dtype=np.complex128)
        w = np.exp(zeta)
        G = self.G(w)
        return np.linalg.solve(G, self.a_true @ G + w[..., None, None] * self.dG(w))


def s_field(P: MetricField, h: MatrixField) -> ScalarField:
    """Largest eigenvalue of P^{-1/2} h P^{-1/2} at every node"""
    P.check_compatible(h)
    scaled = inv_sqrt_pd(P.values)
    return ScalarField(grid=P.grid, values=max_eigenvalues(hermitize(scaled @ h.values @ scaled)))


def max_principle_check(
    P: MetricField, h: MatrixField, ctx: Optional[LinearizedContext] = None, tol: Optional[float] = None
) -> MaxPrincipleReport:
    """Boundary maximum of S_{P,h} when L h is positive semidefinite inside"""
    tol = settings.TOL_MP if tol is None else tol
    ctx = LinearizedContext(P) if ctx is None else ctx
    grid = P.grid
    lh = apply_L(ctx, h).values[grid.interior_index]
    lh_min = float(np.min(min_eigenvalues(lh))) if lh.size else 0.0
    applicable = lh_min >= -tol
    S = s_field(P, h).values
    interior_max = float(np.max(S[grid.interior_index]))
    boundary_max = float(np.max(S[grid.boundary_index]))
    gap = max(interior_max, boundary_max) - boundary_max
    return MaxPrincipleReport(
        applicable=applicable,
        passes=bool(applicable and gap <= tol),
        interior_max=interior_max,
        boundary_max=boundary_max,
        gap=gap,
        lh_min_eigenvalue=lh_min,
    )


def _five_point(grid: Grid) -> sp.csr_matrix:
    """Scalar Laplacian (times the chart Jacobian) with identity rows on the boundary"""
    n_rad, n_ang = grid.n_rad, grid.n_ang
    i, j = np.divmod(np.arange(grid.n_nodes), n_ang)
    inside = ~grid.is_boundary
    rows, cols, vals = [], [], []

    def add(mask, col, weight):
        rows.append(np.flatnonzero(mask))
        cols.append(col[mask])
        vals.append(np.broadcast_to(weight, mask.shape)[mask])

    d_rad, d_ang = grid.d_rad, grid.d_ang
    east, west = i * n_ang + (j + 1) % n_ang, i * n_ang + (j - 1) % n_ang
    north, south = (i + 1) * n_ang + j, (i - 1) * n_ang + j
    if grid.is_annulus:
        add(inside, np.arange(grid.n_nodes), -2.0 / d_rad ** 2 - 2.0 / d_ang ** 2)
        add(inside, north, 1.0 / d_rad ** 2)
        add(inside, south, 1.0 / d_rad ** 2)
        add(inside, east, 1.0 / d_ang ** 2)
        add(inside, west, 1.0 / d_ang ** 2)
    else:
        r = grid.rad_of_node
        across = (j + n_ang // 2) % n_ang
        south = np.where(i == 0, across, south)
        add(inside, np.arange(grid.n_nodes), -2.0 / d_rad ** 2 - 2.0 / (r * d_ang) ** 2)
        add(inside, north, 1.0 / d_rad ** 2 + 1.0 / (2.0 * d_rad * r))
        add(inside, south, 1.0 / d_rad ** 2 - 1.0 / (2.0 * d_rad * r))
        add(inside, east, 1.0 / (r * d_ang) ** 2)
        add(inside, west, 1.0 / (r * d_ang) ** 2)
    add(~inside, np.arange(grid.n_nodes), 1.0)
    return sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(grid.n_nodes, grid.n_nodes)
    ).tocsr()


def scalar_oracle(F: BoundaryData, grid: Grid) -> MetricField:
    """exp(u) with u discretely harmonic and u = log F on the boundary (n = 1 only)"""
    if F.dim != 1:
        raise InputError(f"scalar oracle needs n = 1 boundary data, got n = {F.dim}")
    F.check_grid(grid)
    rhs = np.zeros(grid.n_nodes)
    for i_rad, circle in grid.boundary_rings:
        rhs[grid.ring(i_rad)] = np.log(F.circles[circle][:, 0, 0].real)
    u = spsolve(_five_point(grid).tocsc(), rhs)
    if not np.all(np.isfinite(u)):
        raise FhmError("scalar oracle solve produced non-finite values")
    return MetricField(grid=grid, values=np.exp(u)[:, None, None])


def _draw_truth(spec: SyntheticSpec, grid: Grid, rng: np.random.Generator) -> SyntheticTruth:
    n = spec.dim
    Q = unitary_group.rvs(n, random_state=rng) if spec.mixing and n > 1 else np.eye(n)
    a_true = (Q * np.asarray(spec.exponents)) @ dagger(Q)
    r_min, r_max = grid.domain.r_inner, grid.domain.r_outer
    coefficients = {0: np.eye(n, dtype=np.complex128)}
    for k in range(-spec.degree, spec.degree + 1):
        if k == 0:
            continue
        X = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        reach = max(r_min ** k, r_max ** k)
        coefficients[k] = spec.scale * X / (np.linalg.norm(X, 2) * reach)
    return SyntheticTruth(coefficients=coefficients, a_true=a_true)


def flat_metric(truth: SyntheticTruth, grid: Grid) -> MetricField:
    """G* exp(a log|w|^2) G evaluated at every annulus node"""
    if not grid.is_annulus:
        raise InputError("synthetic flat metrics are generated on annulus grids")
    return MetricField(grid=grid, values=truth.metric(grid.zeta))


def synthetic_flat(spec: SyntheticSpec, grid: Grid) -> Tuple[MetricField, BoundaryData, SyntheticTruth]:
    """Flat metric from a random invertible Laurent generator (seeded), with its boundary data"""
    if not grid.is_annulus:
        raise InputError("synthetic flat metrics are generated on annulus grids")
    rng = np.random.default_rng(spec.seed)
    for draw in range(settings.MAX_SYNTHETIC_DRAWS):
        truth = _draw_truth(spec, grid, rng)
        smallest = float(np.min(np.linalg.svd(truth.G(grid.w), compute_uv=False)))
        if smallest >= settings.MIN_SINGULAR_SYNTHETIC:
            P = flat_metric(truth, grid)
            logger.info("Synthetic generator accepted on draw %d (min singular value %.3f)", draw, smallest)
            return P, restrict_boundary(P), truth
        logger.debug("Synthetic draw %d rejected: min singular value %.3e", draw, smallest)
    raise InputError(
        f"no generator with singular values >= {settings.MIN_SINGULAR_SYNTHETIC} in {settings.MAX_SYNTHETIC_DRAWS} draws"
    )


def _sector_mixed(grid: Grid, X: np.ndarray) -> np.ndarray:
    """Centered d_zeta d_zetabar of sector values X (n_rad, width + 1, n, n) at sector-interior nodes"""
    d_rad, d_ang = grid.d_rad, grid.d_ang
    centre = X[1:-1, 1:-1]
    rr = (X[2:, 1:-1] - 2.0 * centre + X[:-2, 1:-1]) / d_rad ** 2
    tt = (X[1:-1, 2:] - 2.0 * centre + X[1:-1, :-2]) / d_ang ** 2
    if grid.is_annulus:
        return 0.25 * (rr + tt)
    r = grid.radial[1:-1, None, None, None]
    r_first = (X[2:, 1:-1] - X[:-2, 1:-1]) / (2.0 * d_rad)
    return 0.25 * (rr + r_first / r + tt / r ** 2)


def gauge_identity_check(
    P: MetricField,
    h: MatrixField,
    j_start: int = 0,
    width: Optional[int] = None,
    exact_connection=None,
) -> float:
    """sup ||(H* h H)_{zeta zetabar} - H* (L h) H|| over the interior of an angular sector.

    H is the inverse of a holomorphic frame G of P (G* G = P), so H* P H = I on the
    sector. The identity holds for flat P.
    """
    grid = P.grid
    P.check_compatible(h)
    width = grid.n_ang // 4 if width is None else width
    H = np.linalg.inv(sector_frame(P, j_start, width, exact_connection=exact_connection))
    cols = (j_start + np.arange(width + 1)) % grid.n_ang
    h_sector = hermitize(h.values).reshape(grid.n_rad, grid.n_ang, P.dim, P.dim)[:, cols]
    lh = apply_L(LinearizedContext(P), h).values.reshape(grid.n_rad, grid.n_ang, P.dim, P.dim)[:, cols]
    lhs = _sector_mixed(grid, dagger(H) @ h_sector @ H)
    rhs = (dagger(H) @ lh @ H)[1:-1, 1:-1]
    defect = float(np.max(np.linalg.norm(lhs - rhs, ord=2, axis=(-2, -1)))) if lhs.size else 0.0
    logger.debug("Gauge identity defect on sector [%d, %d]: %.3e", j_start, j_start + width, defect)
    return defect


def observed_order(hs: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of log(error) against log(h)"""
    hs, errors = np.asarray(hs, dtype=np.float64), np.asarray(errors, dtype=np.float64)
    if hs.size < 2 or hs.size != errors.size or np.any(hs <= 0) or np.any(errors <= 0):
        raise InputError("observed order needs at least two positive (h, error) pairs")
    slope, _ = np.polyfit(np.log(hs), np.log(errors), 1)
    return float(slope)


def _smooth_matrix(grid: Grid, dim: int, rng: np.random.Generator) -> np.ndarray:
    """X(node) = sum of random matrices times low-frequency modes"""
    rad = grid.rad_of_node
    span = grid.radial[-1] - grid.radial[0]
    s = (rad - grid.radial[0]) / span if span > 0 else np.zeros_like(rad)
    theta = grid.ang_of_node
    if grid.is_annulus:
        modes = [np.ones_like(s), s, np.cos(theta), np.sin(theta)]
    else:
        # x and y are smooth across the origin, cos(theta) alone is not
        x, y = grid.w.real / grid.domain.r_outer, grid.w.imag / grid.domain.r_outer
        modes = [np.ones_like(x), x, y, x * y]
    X = np.zeros((grid.n_nodes, dim, dim), dtype=np.complex128)
    for mode in modes:
        C = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        X += mode[:, None, None] * C
    return X


def _bump(grid: Grid) -> np.ndarray:
    phi = barrier(grid).values
    return phi / np.max(phi)


def random_psd_field(grid: Grid, dim: int, rng: np.random.Generator, zero_boundary: bool = False) -> HermitianField:
    """Smooth X* X scaled to unit sup-norm, times the normalized barrier when zero_boundary"""
    X = _smooth_matrix(grid, dim, rng)
    values = hermitize(dagger(X) @ X)
    values /= sup_norm(values)
    if zero_boundary:
        values = values * _bump(grid)[:, None, None]
    return HermitianField(grid=grid, values=values)


def random_hermitian_field(grid: Grid, dim: int, rng: np.random.Generator, zero_boundary: bool = True) -> HermitianField:
    """Smooth indefinite Hermitian field with unit sup-norm"""
    values = hermitize(_smooth_matrix(grid, dim, rng))
    values /= sup_norm(values)
    if zero_boundary:
        values = values * _bump(grid)[:, None, None]
    return HermitianField(grid=grid, values=values)


def _background(grid: Grid, dim: int, seed: int) -> MetricField:
    spec = SyntheticSpec(dim=dim, exponents=list(np.linspace(-0.2, 0.25, dim)) if dim > 1 else [0.2], seed=seed)
    P, _, _ = synthetic_flat(spec, grid)
    return P


def max_principle_trials(grid: Grid, trials: int = 100, dim: int = 2, seed: int = 0) -> TrialSummary:
    """Solve L h = psd field with zero boundary on seeded flat backgrounds; check S <= tol and the C0 certificate"""
    rng = np.random.default_rng(seed)
    failures, applicable, passed = [], 0, 0
    worst_s, worst_margin = -np.inf, -np.inf
    for trial in range(trials):
        P = _background(grid, dim, seed + trial)
        ctx = LinearizedContext(P)
        f1 = random_psd_field(grid, dim, rng, zero_boundary=True)
        h = solve_dirichlet_L(ctx, f1)
        report = max_principle_check(P, h, ctx)
        certificate = c0_certificate(ctx, h)
        applicable += report.applicable
        worst_s = max(worst_s, report.interior_max)
        worst_margin = max(worst_margin, certificate.worst_margin)
        if report.passes and certificate.passes and report.interior_max <= settings.TOL_MP:
            passed += 1
        else:
            failures.append(trial)
    summary = TrialSummary(
        trials=trials,
        applicable=applicable,
        passed=passed,
        worst_interior_max=float(worst_s),
        worst_certificate_margin=float(worst_margin),
        failures=failures,
    )
    logger.info("Max principle trials: %d/%d passed", passed, trials)
    return summary


def c0_trials(grid: Grid, trials: int = 20, dim: int = 2, seed: int = 0) -> TrialSummary:
    """C0 certificate on smooth indefinite fields with zero boundary over seeded flat backgrounds"""
    rng = np.random.default_rng(seed)
    failures, passed = [], 0
    worst_margin = -np.inf
    for trial in range(trials):
        P = _background(grid, dim, seed + trial)
        h = random_hermitian_field(grid, dim, rng, zero_boundary=True)
        certificate = c0_certificate(LinearizedContext(P), h)
        worst_margin = max(worst_margin, certificate.worst_margin)
        if certificate.passes:
            passed += 1
        else:
            failures.append(trial)
    return TrialSummary(
        trials=trials,
        applicable=trials,
        passed=passed,
        worst_interior_max=float("nan"),
        worst_certificate_margin=float(worst_margin),
        failures=failures,
    )
