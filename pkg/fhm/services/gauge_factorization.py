"""Holomorphic frames of flat metrics and the annulus factorization.

A holomorphic frame H with H* H = P solves d_zeta H = H A, A = P^{-1} P_zeta.
On the annulus one angular loop gives the unitary monodromy U with
H(zeta + 2 pi i) = U H(zeta). Writing U = exp(i Ahat) and a = Ahat / 2 pi,
K = exp(-Ahat zeta / 2 pi) H is single valued and

    P = K* exp(a log|w|^2) K.
"""

import logging
from typing import Callable, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator
from scipy.linalg import polar, schur

from ..utils.config import settings
from ..utils.errors import BranchAmbiguityError, InputError, IntegrationError, MonodromyError
from ..utils.linalg import dagger, hermitize, inv_sqrt_pd, op_norm, sqrt_pd
from .fields import FieldInterpolator, MatrixField, MetricField, sup_norm
from .grid_domain import Grid
from .operator_calculus import connection, curvature_residual, d_zetabar

logger = logging.getLogger(__name__)

# sampler(rad, ang) -> connection values (m, n, n) at native coordinates
Sampler = Callable[[np.ndarray, np.ndarray], np.ndarray]

MAX_CONDITION = 1e12


class FramePath(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    points: np.ndarray
    connection: np.ndarray
    frames: np.ndarray

    def consistency_defect(self, P: MetricField) -> float:
        """max ||H* H - P|| / ||P|| along the path, P interpolated at the points"""
        P_path = FieldInterpolator(P).at_chart(self.points)
        gram = dagger(self.frames) @ self.frames
        return float(np.max(op_norm(gram - P_path) / op_norm(P_path)))


class FactorizationResult(BaseModel):
    """K periodic holomorphic frame, a self-adjoint exponent, P = K* exp(a log|w|^2) K"""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    K: MatrixField
    a: np.ndarray
    base_node: int
    monodromy: np.ndarray
    monodromy_unitarity_defect: float
    periodicity_defect: float
    holomorphy_defect: float

    @field_validator("a", mode="before")
    @classmethod
    def symmetrize(cls, a) -> np.ndarray:
        a = hermitize(np.array(a, dtype=np.complex128, copy=True))
        a.setflags(write=False)
        return a

    @field_validator("monodromy", mode="before")
    @classmethod
    def freeze(cls, U) -> np.ndarray:
        U = np.array(U, dtype=np.complex128, copy=True)
        U.setflags(write=False)
        return U

    @property
    def grid(self) -> Grid:
        return self.K.grid

    @property
    def exponents(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.a)


class Monodromy(NamedTuple):
    unitary: np.ndarray
    defect: float
    spread: float
    ring: np.ndarray


def _velocity(annulus: bool, rad: np.ndarray, ang: np.ndarray, d_rad: np.ndarray, d_ang: np.ndarray) -> np.ndarray:
    """d(chart point)/ds along a segment linear in the native coordinates"""
    if annulus:
        return d_rad + 1j * d_ang
    return (d_rad + 1j * rad * d_ang) * np.exp(1j * ang)


def _rk4_segment(
    H: np.ndarray,
    start: Tuple[np.ndarray, np.ndarray],
    end: Tuple[np.ndarray, np.ndarray],
    sampler: Sampler,
    annulus: bool,
    substeps: int,
) -> np.ndarray:
    rad0, ang0 = (np.broadcast_to(np.asarray(x, dtype=np.float64), (H.shape[0],)) for x in start)
    d_rad = np.asarray(end[0], dtype=np.float64) - rad0
    d_ang = np.asarray(end[1], dtype=np.float64) - ang0
    ds = 1.0 / substeps

    def rate(s: float, frame: np.ndarray) -> np.ndarray:
        rad, ang = rad0 + s * d_rad, ang0 + s * d_ang
        speed = _velocity(annulus, rad, ang, d_rad, d_ang)
        return frame @ (sampler(rad, ang) * speed[:, None, None])

    for k in range(substeps):
        s = k * ds
        k1 = rate(s, H)
        k2 = rate(s + 0.5 * ds, H + 0.5 * ds * k1)
        k3 = rate(s + 0.5 * ds, H + 0.5 * ds * k2)
        k4 = rate(s + ds, H + ds * k3)
        H = H + (ds / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return H


def _check_frames(H: np.ndarray, where: str) -> None:
    if not np.all(np.isfinite(H)):
        raise IntegrationError(f"frame blew up {where}")
    cond = np.linalg.cond(H)
    if np.any(cond > MAX_CONDITION):
        raise IntegrationError(f"frame became singular {where}: condition number {np.max(cond):.3e}")


def field_sampler(A: MatrixField) -> Sampler:
    return FieldInterpolator(A).at_native


def function_sampler(grid: Grid, func: Callable[[np.ndarray], np.ndarray]) -> Sampler:
    """Sampler from a function of chart points (zeta on the annulus, w on the disc)"""
    if grid.is_annulus:
        return lambda rad, ang: func(rad + 1j * ang)
    return lambda rad, ang: func(rad * np.exp(1j * ang))


def _native(grid: Grid, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    if grid.is_annulus:
        return points.real, points.imag
    return np.abs(points), np.angle(points)


def relative_curvature(P: MetricField) -> float:
    """sup ||P^{-1/2} R(P) P^{-1/2}||: scale-free distance from flatness"""
    scaled = inv_sqrt_pd(P.values)
    return sup_norm(scaled @ curvature_residual(P).values @ scaled)


def _check_flat(P: MetricField) -> None:
    curvature = relative_curvature(P)
    if curvature > settings.TOL_FLAT_INPUT:
        raise InputError(
            f"metric is not flat: relative curvature {curvature:.3e} exceeds {settings.TOL_FLAT_INPUT:.1e}"
        )


def integrate_frame(
    P: MetricField,
    path: Sequence[complex],
    H0: np.ndarray,
    substeps: Optional[int] = None,
    sampler: Optional[Sampler] = None,
) -> FramePath:
    """Integrate H' = H A along a polyline of chart points starting from H0.

    Segments are straight in the native (radial, angular) coordinates.
    """
    grid = P.grid
    points = np.asarray(path, dtype=np.complex128).ravel()
    if points.size < 1:
        raise InputError("frame path needs at least one point")
    H0 = np.asarray(H0, dtype=np.complex128)
    if H0.shape != (P.dim, P.dim):
        raise InputError(f"initial frame must be {P.dim}x{P.dim}, got {H0.shape}")
    _check_frames(H0[None], "at the start point")
    if sampler is None:
        _check_flat(P)
        sampler = field_sampler(connection(P))
    substeps = settings.INTEGRATION_SUBSTEPS if substeps is None else substeps

    rad, ang = _native(grid, points)
    if not grid.is_annulus:
        # shortest angular turn between consecutive disc points
        ang = np.concatenate([ang[:1], ang[0] + np.cumsum(np.angle(np.exp(1j * np.diff(ang))))])
    lo, hi = (grid.radial[0] if grid.is_annulus else 0.0), grid.radial[-1]
    if np.any(rad < lo - 1e-12) or np.any(rad > hi + 1e-12):
        raise InputError(f"path leaves the radial range [{lo:.6g}, {hi:.6g}]")

    frames = [H0]
    H = H0[None]
    for k in range(points.size - 1):
        H = _rk4_segment(H, (rad[k], ang[k]), (rad[k + 1], ang[k + 1]), sampler, grid.is_annulus, substeps)
        _check_frames(H, f"on segment {k}")
        frames.append(H[0])
    samples = sampler(rad, ang)
    return FramePath(points=points, connection=samples, frames=np.stack(frames))


def _sweep_ring(
    grid: Grid,
    H0: np.ndarray,
    i_rad: int,
    j_start: int,
    sampler: Sampler,
    substeps: int,
    count: int,
) -> np.ndarray:
    """Frames at count + 1 successive angular nodes of one ring (cover angles, not wrapped)"""
    rad = grid.radial[i_rad]
    frames = [H0]
    H = H0[None]
    for k in range(count):
        ang0 = (j_start + k) * grid.d_ang
        H = _rk4_segment(H, (rad, ang0), (rad, ang0 + grid.d_ang), sampler, grid.is_annulus, substeps)
        _check_frames(H, f"on ring {i_rad}")
        frames.append(H[0])
    return np.stack(frames)


def _sweep_columns(
    grid: Grid, H_base: np.ndarray, i_base: int, angles: np.ndarray, sampler: Sampler, substeps: int
) -> np.ndarray:
    """Frames on every ring along radial columns at the given angles, from ring i_base"""
    out = np.empty((grid.n_rad,) + H_base.shape, dtype=np.complex128)
    out[i_base] = H_base
    for direction in (1, -1):
        H = H_base
        i = i_base
        while 0 <= i + direction < grid.n_rad:
            H = _rk4_segment(
                H, (grid.radial[i], angles), (grid.radial[i + direction], angles), sampler, grid.is_annulus, substeps
            )
            _check_frames(H, f"between rings {i} and {i + direction}")
            i += direction
            out[i] = H
    return out


def _resolve_sampler(P: MetricField, exact_connection: Optional[Callable[[np.ndarray], np.ndarray]]) -> Sampler:
    if exact_connection is not None:
        return function_sampler(P.grid, exact_connection)
    return field_sampler(connection(P))


def _base_ring(grid: Grid, base_sigma: Optional[float]) -> int:
    if base_sigma is None:
        return grid.n_rad // 2
    if not grid.radial[0] <= base_sigma <= grid.radial[-1]:
        raise InputError(f"base sigma {base_sigma} outside [{grid.radial[0]:.6g}, {grid.radial[-1]:.6g}]")
    return grid.nearest_ring(base_sigma)


def _annulus_only(P: MetricField) -> None:
    if not P.grid.is_annulus:
        raise InputError(f"monodromy needs an annulus metric, got {P.grid.describe()}")


def sector_frame(
    P: MetricField,
    j_start: int,
    width: int,
    exact_connection: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    base_ring: Optional[int] = None,
) -> np.ndarray:
    """Frame on the angular sector j_start..j_start + width (all rings), shape (n_rad, width + 1, n, n).

    Starts from P(base)^{1/2} at the base ring, sweeps the sector along that
    ring, then integrates every column radially.
    """
    grid = P.grid
    if not 2 <= width < grid.n_ang:
        raise InputError(f"sector width must lie in [2, {grid.n_ang}), got {width}")
    sampler = _resolve_sampler(P, exact_connection)
    i_base = grid.n_rad // 2 if base_ring is None else base_ring
    substeps = settings.INTEGRATION_SUBSTEPS
    H0 = sqrt_pd(P.values[grid.index(i_base, j_start)])
    ring = _sweep_ring(grid, H0, i_base, j_start, sampler, substeps, width)
    angles = (j_start + np.arange(width + 1)) * grid.d_ang
    return _sweep_columns(grid, ring, i_base, angles, sampler, substeps)


def _loop(
    P: MetricField, i_rad: int, j_base: int, sampler: Sampler, substeps: int
) -> Tuple[np.ndarray, np.ndarray]:
    """(ring frames, raw monodromy) for one angular loop on ring i_rad"""
    H0 = sqrt_pd(P.values[P.grid.index(i_rad, j_base)])
    ring = _sweep_ring(P.grid, H0, i_rad, j_base, sampler, substeps, P.grid.n_ang)
    return ring, ring[-1] @ np.linalg.inv(ring[0])


def spectral_distance(U1: np.ndarray, U2: np.ndarray) -> float:
    """Hausdorff distance between the eigenvalue sets of two square matrices"""
    gaps = np.abs(np.linalg.eigvals(U1)[:, None] - np.linalg.eigvals(U2)[None, :])
    return float(max(gaps.min(axis=1).max(), gaps.min(axis=0).max()))


def _monodromy(
    P: MetricField, i_base: int, j_base: int, sampler: Sampler, substeps: int, tol_unitary: float
) -> Monodromy:
    """Loop monodromy at ring i_base.

    Loops on different rings are conjugate for flat P, so the spectral distance
    to the loop on the farthest ring estimates the error in the eigenphases.
    """
    grid = P.grid
    ring, raw = _loop(P, i_base, j_base, sampler, substeps)
    defect = float(op_norm(dagger(raw) @ raw - np.eye(P.dim)))
    logger.info("Monodromy at ring %d: unitarity defect %.3e", i_base, defect)
    if defect > tol_unitary:
        raise MonodromyError(
            f"monodromy unitarity defect {defect:.3e} exceeds {tol_unitary:.1e}", defect=defect
        )
    i_far = 0 if i_base >= grid.n_rad // 2 else grid.n_rad - 1
    _, far = _loop(P, i_far, j_base, sampler, substeps)
    spread = spectral_distance(raw, far)
    logger.debug("Monodromy spectra at rings %d and %d differ by %.3e", i_base, i_far, spread)
    unitary, _ = polar(raw)
    return Monodromy(unitary=unitary, defect=defect, spread=spread, ring=ring)


def monodromy(
    P: MetricField,
    base_sigma: Optional[float] = None,
    base_theta_index: int = 0,
    exact_connection: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    tol_unitary: Optional[float] = None,
) -> Tuple[np.ndarray, float]:
    """(unitary polar factor of the loop monodromy, ||U* U - I|| of the raw monodromy)"""
    _annulus_only(P)
    tol_unitary = settings.TOL_UNITARY if tol_unitary is None else tol_unitary
    result = _monodromy(
        P, _base_ring(P.grid, base_sigma), base_theta_index, _resolve_sampler(P, exact_connection),
        settings.INTEGRATION_SUBSTEPS, tol_unitary,
    )
    return result.unitary, result.defect


def unitary_log(U: np.ndarray, branch_guard: Optional[float] = None) -> np.ndarray:
    """Self-adjoint Ahat with exp(i Ahat) = U, eigenphases in (-pi, pi]"""
    U = np.asarray(U, dtype=np.complex128)
    n = U.shape[0]
    if U.shape != (n, n):
        raise InputError(f"expected a square matrix, got {U.shape}")
    defect = float(op_norm(dagger(U) @ U - np.eye(n)))
    if defect > settings.TOL_UNITARY:
        raise InputError(f"matrix is not unitary: ||U* U - I|| = {defect:.3e}")
    guard = settings.BRANCH_GUARD if branch_guard is None else branch_guard
    T, Z = schur(U, output="complex")
    phases = np.angle(np.diag(T))
    near_pi = np.abs(phases) > np.pi - guard
    if np.any(near_pi):
        raise BranchAmbiguityError(
            f"eigenphase within {guard:.1e} of pi; the principal logarithm is ambiguous",
            phases=phases.tolist(),
        )
    return hermitize((Z * phases) @ dagger(Z))


def factorize_annulus(
    P: MetricField,
    exact_connection: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    base_sigma: Optional[float] = None,
    base_theta_index: int = 0,
    tol_unitary: Optional[float] = None,
    branch_guard: Optional[float] = None,
) -> FactorizationResult:
    """K, a with P = K* exp(a log|w|^2) K on the annulus grid.

    exact_connection, when given, maps zeta points to the connection values and
    replaces the interpolated discrete connection. Unless branch_guard is given,
    eigenphases closer to pi than max(BRANCH_GUARD, tol_unitary,
    BRANCH_GUARD_SCALE * spread) are reported as ambiguous, where spread is the
    spectral distance between loops on two rings.
    """
    _annulus_only(P)
    grid, n = P.grid, P.dim
    tol_unitary = settings.TOL_UNITARY if tol_unitary is None else tol_unitary
    substeps = settings.INTEGRATION_SUBSTEPS
    sampler = _resolve_sampler(P, exact_connection)
    i_base = _base_ring(grid, base_sigma)
    j_base = base_theta_index % grid.n_ang

    loop = _monodromy(P, i_base, j_base, sampler, substeps, tol_unitary)
    if branch_guard is None:
        branch_guard = max(settings.BRANCH_GUARD, tol_unitary, settings.BRANCH_GUARD_SCALE * loop.spread)
    Ahat = unitary_log(loop.unitary, branch_guard=branch_guard)
    lam, V = np.linalg.eigh(Ahat)

    # cover angles theta_b + k d_theta, k = 0..n_ang (the last column is the wrap)
    k = np.arange(grid.n_ang + 1)
    angles = (j_base + k) * grid.d_ang
    frames = _sweep_columns(grid, loop.ring, i_base, angles, sampler, substeps)

    sigma = grid.radial[:, None]
    zeta = sigma + 1j * angles[None, :]
    phase = np.exp(-zeta[..., None] * lam / (2.0 * np.pi))
    gauge = (V * phase[..., None, :]) @ dagger(V)
    K_cover = gauge @ frames

    K = np.empty((grid.n_rad, grid.n_ang, n, n), dtype=np.complex128)
    K[:, (j_base + k[:-1]) % grid.n_ang] = K_cover[:, :-1]
    K_field = MatrixField(grid=grid, values=K.reshape(grid.n_nodes, n, n))
    periodicity = sup_norm(K_cover[:, -1] - K_cover[:, 0]) / sup_norm(K_field)

    result = FactorizationResult(
        K=K_field,
        a=Ahat / (2.0 * np.pi),
        base_node=grid.index(i_base, j_base),
        monodromy=loop.unitary,
        monodromy_unitarity_defect=loop.defect,
        periodicity_defect=periodicity,
        holomorphy_defect=sup_norm(d_zetabar(K_field)) / sup_norm(K_field),
    )
    logger.info(
        "Factorized %s: exponents %s, periodicity defect %.3e, holomorphy defect %.3e",
        grid.describe(), np.array2string(result.exponents, precision=6), periodicity, result.holomorphy_defect,
    )
    return result


def reconstruct(fact: FactorizationResult, grid: Grid) -> MetricField:
    """K* exp(a (zeta + zetabar)) K at every node"""
    if fact.grid != grid:
        raise InputError(f"factorization lives on {fact.grid.describe()}, not {grid.describe()}")
    lam, V = np.linalg.eigh(fact.a)
    two_sigma = 2.0 * grid.rad_of_node
    middle = (V[None] * np.exp(np.outer(two_sigma, lam))[:, None, :]) @ dagger(V)
    K = fact.K.values
    return MetricField(grid=grid, values=hermitize(dagger(K) @ middle @ K))


def local_factorization(P: MetricField, sampler: Optional[Sampler] = None) -> MatrixField:
    """Holomorphic H with H* H = P on the disc, H(base) = P(base)^{1/2} at the innermost ring, theta = 0"""
    grid = P.grid
    if grid.is_annulus:
        raise InputError("local factorization runs on disc grids; use factorize_annulus on the annulus")
    if sampler is None:
        _check_flat(P)
        sampler = field_sampler(connection(P))
    substeps = settings.INTEGRATION_SUBSTEPS
    H0 = sqrt_pd(P.values[grid.index(0, 0)])

    column = _sweep_columns(grid, H0[None], 0, np.zeros(1), sampler, substeps)[:, 0]
    H = np.empty((grid.n_rad, grid.n_ang, P.dim, P.dim), dtype=np.complex128)
    H[:, 0] = column
    half = grid.n_ang // 2
    # all rings at once, half a turn each way from theta = 0
    for direction, count in ((1, half), (-1, grid.n_ang - half - 1)):
        frames = column
        step = direction * grid.d_ang
        for k in range(count):
            frames = _rk4_segment(
                frames, (grid.radial, k * step), (grid.radial, (k + 1) * step), sampler, False, substeps
            )
            _check_frames(frames, f"at angular step {(k + 1) * direction}")
            H[:, ((k + 1) * direction) % grid.n_ang] = frames
    field = MatrixField(grid=grid, values=H.reshape(grid.n_nodes, P.dim, P.dim))
    logger.info("Local factorization on %s", grid.describe())
    return field


def frame_defect(H: MatrixField, P: MetricField) -> float:
    """sup ||H* H - P|| / sup ||P||"""
    H.check_compatible(P)
    return sup_norm(dagger(H.values) @ H.values - P.values) / sup_norm(P)


def normalize_frame(H: MatrixField, base: int) -> MatrixField:
    """Left-multiply by the constant unitary making H(base) positive; H* H is unchanged"""
    Hb = H.values[base]
    Q = sqrt_pd(dagger(Hb) @ Hb) @ np.linalg.inv(Hb)
    return H.with_values(Q[None] @ H.values)


def frame_gauge(H1: MatrixField, H2: MatrixField, base: int = 0) -> Tuple[np.ndarray, float]:
    """Constant unitary U with H1 = U H2 and its defect (variation over nodes plus non-unitarity)"""
    H1.check_compatible(H2)
    U = H1.values @ np.linalg.inv(H2.values)
    Ub = U[base]
    defect = sup_norm(U - Ub[None]) + float(op_norm(dagger(Ub) @ Ub - np.eye(H1.dim)))
    return Ub, defect
