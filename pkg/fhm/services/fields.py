"""Matrix-valued fields over a grid, boundary data, norms and interpolation."""

import logging
from typing import Callable, Dict, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator
from scipy.interpolate import RectBivariateSpline

from ..models.domain import Circle, DomainKind, DomainSpec
from ..utils.config import settings
from ..utils.errors import InputError
from ..utils.linalg import dagger, hermitize, min_eigenvalues, op_norm
from .grid_domain import Grid

logger = logging.getLogger(__name__)

ANGULAR_PAD = 3


def _frozen_complex(values) -> np.ndarray:
    array = np.array(values, dtype=np.complex128, copy=True)
    array.setflags(write=False)
    return array


def _check_hermitian(values: np.ndarray, what: str) -> None:
    if values.size == 0:
        return
    scale = op_norm(values)
    defect = op_norm(values - dagger(values))
    floor = 1e-14 * float(np.max(scale))
    bad = defect > settings.TOL_HERM * scale + floor
    if np.any(bad):
        node = int(np.flatnonzero(bad)[0])
        raise InputError(
            f"{what} is not Hermitian at node {node}: defect {defect[node]:.3e} vs norm {scale[node]:.3e}"
        )


def _check_positive(values: np.ndarray, what: str) -> None:
    lam = min_eigenvalues(values)
    if np.any(~np.isfinite(lam)) or np.any(lam <= 0):
        node = int(np.argmin(np.nan_to_num(lam, nan=-np.inf)))
        raise InputError(f"{what} is not positive definite at node {node}: lambda_min = {lam[node]:.3e}")


class MatrixField(BaseModel):
    """One complex n x n matrix per grid node, values of shape (n_nodes, n, n)"""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    grid: Grid
    values: np.ndarray

    @field_validator("values", mode="before")
    @classmethod
    def coerce_complex(cls, values) -> np.ndarray:
        return _frozen_complex(values)

    @model_validator(mode="after")
    def check_shape(self) -> "MatrixField":
        v = self.values
        if v.ndim != 3 or v.shape[0] != self.grid.n_nodes or v.shape[1] != v.shape[2] or v.shape[1] < 1:
            raise InputError(
                f"field values must have shape ({self.grid.n_nodes}, n, n), got {v.shape}"
            )
        return self

    @property
    def dim(self) -> int:
        return self.values.shape[-1]

    @classmethod
    def constant(cls, grid: Grid, matrix) -> "MatrixField":
        matrix = np.atleast_2d(np.asarray(matrix, dtype=np.complex128))
        return cls(grid=grid, values=np.broadcast_to(matrix, (grid.n_nodes,) + matrix.shape))

    @classmethod
    def identity(cls, grid: Grid, dim: int) -> "MatrixField":
        return cls.constant(grid, np.eye(dim))

    @classmethod
    def zeros(cls, grid: Grid, dim: int) -> "MatrixField":
        return cls.constant(grid, np.zeros((dim, dim)))

    @classmethod
    def from_function(cls, grid: Grid, func: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> "MatrixField":
        """Evaluate func(zeta, w) -> (n_nodes, n, n) on all nodes at once"""
        return cls(grid=grid, values=func(grid.zeta, grid.w))

    def with_values(self, values: np.ndarray) -> "MatrixField":
        return type(self)(grid=self.grid, values=values)

    def check_compatible(self, other: "MatrixField") -> None:
        if self.grid != other.grid or self.dim != other.dim:
            raise InputError(
                f"field mismatch: {self.grid.describe()} n={self.dim} vs {other.grid.describe()} n={other.dim}"
            )


class HermitianField(MatrixField):
    """Hermitian to TOL_HERM at every node; positivity not required"""

    @model_validator(mode="after")
    def check_hermitian(self) -> "HermitianField":
        _check_hermitian(self.values, "field")
        return self


class MetricField(HermitianField):
    """Hermitian positive definite at every node"""

    @model_validator(mode="after")
    def check_positive(self) -> "MetricField":
        _check_positive(self.values, "metric")
        return self


class ScalarField(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    grid: Grid
    values: np.ndarray

    @field_validator("values", mode="before")
    @classmethod
    def coerce_real(cls, values) -> np.ndarray:
        array = np.array(values, dtype=np.float64, copy=True)
        array.setflags(write=False)
        return array

    @model_validator(mode="after")
    def check_shape(self) -> "ScalarField":
        if self.values.shape != (self.grid.n_nodes,):
            raise InputError(f"scalar field must have shape ({self.grid.n_nodes},), got {self.values.shape}")
        return self


class BoundaryData(BaseModel):
    """Angular samples of positive Hermitian matrices on every boundary circle"""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    domain: DomainSpec
    dim: int
    circles: Dict[Circle, np.ndarray]

    @field_validator("circles", mode="before")
    @classmethod
    def coerce_arrays(cls, circles) -> Dict[Circle, np.ndarray]:
        return {Circle(key): _frozen_complex(value) for key, value in circles.items()}

    @model_validator(mode="after")
    def check_samples(self) -> "BoundaryData":
        expected = set(self.domain.circles)
        if set(self.circles) != expected:
            raise InputError(
                f"{self.domain.kind.value} boundary needs circles {sorted(c.value for c in expected)}, "
                f"got {sorted(c.value for c in self.circles)}"
            )
        counts = {samples.shape[0] for samples in self.circles.values()}
        if len(counts) != 1:
            raise InputError(f"boundary circles carry different sample counts: {sorted(counts)}")
        for circle, samples in self.circles.items():
            if samples.ndim != 3 or samples.shape[1:] != (self.dim, self.dim):
                raise InputError(f"{circle.value} samples must have shape (n_ang, {self.dim}, {self.dim}), got {samples.shape}")
            _check_hermitian(samples, f"{circle.value} boundary data")
            _check_positive(samples, f"{circle.value} boundary data")
        return self

    @property
    def n_ang(self) -> int:
        return next(iter(self.circles.values())).shape[0]

    @classmethod
    def from_function(
        cls, domain: DomainSpec, n_ang: int, func: Callable[[Circle, np.ndarray], np.ndarray]
    ) -> "BoundaryData":
        """Sample func(circle, theta) -> (n_ang, n, n) on every circle"""
        theta = np.arange(n_ang) * (2.0 * np.pi / n_ang)
        circles = {circle: np.asarray(func(circle, theta)) for circle in domain.circles}
        dim = next(iter(circles.values())).shape[-1]
        return cls(domain=domain, dim=dim, circles=circles)

    @classmethod
    def constant(cls, domain: DomainSpec, n_ang: int, matrix) -> "BoundaryData":
        matrix = np.atleast_2d(np.asarray(matrix, dtype=np.complex128))
        return cls.from_function(domain, n_ang, lambda circle, theta: np.broadcast_to(matrix, theta.shape + matrix.shape))

    def map_samples(self, func: Callable[[np.ndarray], np.ndarray]) -> "BoundaryData":
        return BoundaryData(
            domain=self.domain, dim=self.dim, circles={c: func(s) for c, s in self.circles.items()}
        )

    def sup_norm(self) -> float:
        return max(float(np.max(op_norm(s))) for s in self.circles.values())

    def check_grid(self, grid: Grid) -> None:
        if grid.domain != self.domain or grid.n_ang != self.n_ang:
            raise InputError(
                f"boundary data ({self.domain.kind.value}, {self.n_ang} samples) does not fit grid {grid.describe()}"
            )


def sup_norm(field: Union[MatrixField, np.ndarray]) -> float:
    """Max over nodes of the operator norm"""
    values = field.values if isinstance(field, MatrixField) else field
    if values.shape[0] == 0:
        return 0.0
    return float(np.max(op_norm(values)))


def min_eigenvalue(field: MatrixField) -> float:
    if not isinstance(field, HermitianField):
        _check_hermitian(field.values, "field")
    return float(np.min(min_eigenvalues(hermitize(field.values))))


def hermitize_field(field: MatrixField) -> MatrixField:
    return field.with_values(hermitize(field.values))


def boundary_values(field: MatrixField) -> np.ndarray:
    """Nodal values on the boundary rings, in boundary_nodes order"""
    return field.values[field.grid.boundary_index]


def restrict_boundary(field: MatrixField) -> BoundaryData:
    grid = field.grid
    circles = {circle: field.values[grid.ring(i_rad)] for i_rad, circle in grid.boundary_rings}
    return BoundaryData(domain=grid.domain, dim=field.dim, circles=circles)


def boundary_array(grid: Grid, data: BoundaryData) -> np.ndarray:
    """Boundary samples stacked in boundary_nodes order"""
    data.check_grid(grid)
    return np.concatenate([data.circles[circle] for _, circle in grid.boundary_rings])


def embed_boundary(grid: Grid, data: BoundaryData, fill: Optional[np.ndarray] = None) -> MetricField:
    """Metric field carrying the samples on boundary nodes and `fill` (default identity) inside"""
    fill = np.eye(data.dim) if fill is None else fill
    values = np.broadcast_to(np.asarray(fill, dtype=np.complex128), (grid.n_nodes, data.dim, data.dim)).copy()
    values[grid.boundary_index] = boundary_array(grid, data)
    return MetricField(grid=grid, values=values)


class FieldInterpolator:
    """Entrywise bicubic spline interpolation of a matrix field in native (radial, angular) coordinates.

    Periodic in the angle (the node set is padded by wrapped copies). On the
    annulus the radial range is clamped at the boundary rings; on the disc the
    rings are continued across the origin, the sample at (-r, theta) being the
    node at (r, theta + pi). Reproduces nodal values.
    """

    def __init__(self, field: MatrixField):
        self.field = field
        grid = field.grid
        self.grid = grid
        self.dim = field.dim
        k = np.arange(-ANGULAR_PAD, grid.n_ang + ANGULAR_PAD)
        ang = k * grid.d_ang
        cube = field.values.reshape(grid.n_rad, grid.n_ang, self.dim * self.dim)
        radial = grid.radial
        if grid.is_annulus:
            cube = np.take(cube, k, axis=1, mode="wrap")
        else:
            across = np.take(cube, k + grid.n_ang // 2, axis=1, mode="wrap")[::-1]
            cube = np.concatenate([across, np.take(cube, k, axis=1, mode="wrap")], axis=0)
            radial = np.concatenate([-radial[::-1], radial])
        self.rad_min = float(grid.radial[0]) if grid.is_annulus else 0.0
        self.rad_max = float(grid.radial[-1])
        self._splines = []
        for entry in range(self.dim * self.dim):
            self._splines.append(
                (
                    RectBivariateSpline(radial, ang, cube[:, :, entry].real, kx=3, ky=3, s=0),
                    RectBivariateSpline(radial, ang, cube[:, :, entry].imag, kx=3, ky=3, s=0),
                )
            )

    def at_native(self, rad: np.ndarray, ang: np.ndarray) -> np.ndarray:
        rad = np.atleast_1d(np.asarray(rad, dtype=np.float64))
        ang = np.mod(np.atleast_1d(np.asarray(ang, dtype=np.float64)), 2.0 * np.pi)
        slack = 1e-9 * max(1.0, abs(self.rad_max - self.rad_min))
        if np.any(rad < self.rad_min - slack) or np.any(rad > self.rad_max + slack):
            raise InputError(
                f"interpolation point outside [{self.rad_min:.6g}, {self.rad_max:.6g}] in the radial coordinate"
            )
        rad = np.clip(rad, self.rad_min, self.rad_max)
        out = np.empty(rad.shape + (self.dim * self.dim,), dtype=np.complex128)
        for entry, (re, im) in enumerate(self._splines):
            out[..., entry] = re.ev(rad, ang) + 1j * im.ev(rad, ang)
        return out.reshape(rad.shape + (self.dim, self.dim))

    def at_chart(self, points) -> np.ndarray:
        points = np.atleast_1d(np.asarray(points, dtype=np.complex128))
        if self.grid.domain.kind == DomainKind.annulus:
            return self.at_native(points.real, points.imag)
        return self.at_native(np.abs(points), np.angle(points))


def interpolate(field: MatrixField, point: complex) -> np.ndarray:
    """Matrix value at a chart point (zeta on the annulus, w on the disc)"""
    return FieldInterpolator(field).at_chart(point)[0]
