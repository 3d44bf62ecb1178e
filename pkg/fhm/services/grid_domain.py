"""Computational domains, their working charts and structured grids.

Annulus nodes live in the log-polar chart zeta = sigma + i*theta with
sigma in [log r1, log r2] (both ends are boundary rings). Disc nodes live on a
half-offset polar ladder r_j = (j + 1/2) * h, h = r_outer / (n_rad - 1/2), so the
outermost ring sits exactly on r_outer and no node sits at the origin.
Node index = i_rad * n_ang + i_ang.
"""

import logging
from functools import lru_cache
from typing import List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from ..models.domain import Chart, Circle, DomainKind, DomainSpec
from ..utils.errors import InputError

logger = logging.getLogger(__name__)

MIN_NODES = 8


class Grid(BaseModel):
    model_config = ConfigDict(frozen=True)

    domain: DomainSpec
    n_rad: int
    n_ang: int

    @model_validator(mode="after")
    def check_counts(self) -> "Grid":
        if self.n_rad < MIN_NODES or self.n_ang < MIN_NODES:
            raise InputError(f"grid needs at least {MIN_NODES}x{MIN_NODES} nodes, got {self.n_rad}x{self.n_ang}")
        if self.n_ang % 2:
            raise InputError(f"n_ang must be even, got {self.n_ang}")
        return self

    @property
    def chart(self) -> Chart:
        return self.domain.chart

    @property
    def is_annulus(self) -> bool:
        return self.domain.kind == DomainKind.annulus

    @property
    def n_nodes(self) -> int:
        return self.n_rad * self.n_ang

    @property
    def radial(self) -> np.ndarray:
        """sigma values (annulus) or r values (disc), one per ring"""
        return _radial(self.domain, self.n_rad)

    @property
    def angular(self) -> np.ndarray:
        return _angular(self.n_ang)

    @property
    def d_rad(self) -> float:
        return float(self.radial[1] - self.radial[0])

    @property
    def d_ang(self) -> float:
        return 2.0 * np.pi / self.n_ang

    @property
    def h(self) -> float:
        """Mesh size max(d_rad, d_ang) used in truncation-error statements"""
        return max(self.d_rad, self.d_ang)

    @property
    def zeta(self) -> np.ndarray:
        return _coordinates(self.domain, self.n_rad, self.n_ang)[0]

    @property
    def w(self) -> np.ndarray:
        return _coordinates(self.domain, self.n_rad, self.n_ang)[1]

    @property
    def rad_of_node(self) -> np.ndarray:
        """Radial coordinate (sigma or r) of every node"""
        return np.repeat(self.radial, self.n_ang)

    @property
    def ang_of_node(self) -> np.ndarray:
        return np.tile(self.angular, self.n_rad)

    @property
    def boundary_rings(self) -> List[Tuple[int, Circle]]:
        if self.is_annulus:
            return [(0, Circle.inner), (self.n_rad - 1, Circle.outer)]
        return [(self.n_rad - 1, Circle.outer)]

    @property
    def boundary_index(self) -> np.ndarray:
        return _boundary_index(self.domain, self.n_rad, self.n_ang)

    @property
    def interior_index(self) -> np.ndarray:
        return _interior_index(self.domain, self.n_rad, self.n_ang)

    @property
    def is_boundary(self) -> np.ndarray:
        mask = np.zeros(self.n_nodes, dtype=bool)
        mask[self.boundary_index] = True
        return mask

    def ring(self, i_rad: int) -> np.ndarray:
        return i_rad * self.n_ang + np.arange(self.n_ang)

    def index(self, i_rad: int, i_ang: int) -> int:
        return i_rad * self.n_ang + (i_ang % self.n_ang)

    def nearest_ring(self, radial_value: float) -> int:
        return int(np.argmin(np.abs(self.radial - radial_value)))

    def describe(self) -> str:
        return f"{self.domain.kind.value} {self.n_rad}x{self.n_ang} ({self.chart.value})"


@lru_cache(maxsize=32)
def _radial(domain: DomainSpec, n_rad: int) -> np.ndarray:
    if domain.kind == DomainKind.annulus:
        values = np.linspace(np.log(domain.r_inner), np.log(domain.r_outer), n_rad)
    else:
        step = domain.r_outer / (n_rad - 0.5)
        values = (np.arange(n_rad) + 0.5) * step
        values[-1] = domain.r_outer
    values.setflags(write=False)
    return values


@lru_cache(maxsize=32)
def _angular(n_ang: int) -> np.ndarray:
    values = np.arange(n_ang) * (2.0 * np.pi / n_ang)
    values.setflags(write=False)
    return values


@lru_cache(maxsize=32)
def _coordinates(domain: DomainSpec, n_rad: int, n_ang: int) -> Tuple[np.ndarray, np.ndarray]:
    rad = np.repeat(_radial(domain, n_rad), n_ang)
    ang = np.tile(_angular(n_ang), n_rad)
    if domain.kind == DomainKind.annulus:
        zeta = rad + 1j * ang
        w = np.exp(zeta)
    else:
        w = rad * np.exp(1j * ang)
        zeta = w
    zeta.setflags(write=False)
    w.setflags(write=False)
    return zeta, w


@lru_cache(maxsize=32)
def _boundary_index(domain: DomainSpec, n_rad: int, n_ang: int) -> np.ndarray:
    rings = [0, n_rad - 1] if domain.kind == DomainKind.annulus else [n_rad - 1]
    index = np.concatenate([i * n_ang + np.arange(n_ang) for i in rings])
    index.setflags(write=False)
    return index


@lru_cache(maxsize=32)
def _interior_index(domain: DomainSpec, n_rad: int, n_ang: int) -> np.ndarray:
    mask = np.ones(n_rad * n_ang, dtype=bool)
    mask[_boundary_index(domain, n_rad, n_ang)] = False
    index = np.flatnonzero(mask)
    index.setflags(write=False)
    return index


def build_grid(domain: DomainSpec, n_rad: int, n_ang: int) -> Grid:
    """Structured grid over the domain in its working chart"""
    grid = Grid(domain=domain, n_rad=n_rad, n_ang=n_ang)
    logger.debug("Built grid %s", grid.describe())
    return grid


def parse_grid_size(text: str) -> Tuple[int, int]:
    """Parse the command-line form 'RxA' into (n_rad, n_ang)"""
    try:
        n_rad, n_ang = (int(part) for part in text.lower().split("x"))
    except ValueError:
        raise InputError(f"invalid grid '{text}', expected RxA such as 64x128")
    return n_rad, n_ang


def node_coordinates(grid: Grid, index: int) -> Tuple[complex, complex]:
    """(zeta, w) of a node: w = exp(zeta) on the annulus, zeta = w on the disc"""
    if not 0 <= index < grid.n_nodes:
        raise InputError(f"node index {index} out of range [0, {grid.n_nodes})")
    return complex(grid.zeta[index]), complex(grid.w[index])


def boundary_nodes(grid: Grid) -> List[Tuple[int, Circle]]:
    """Boundary node indices with their circle, inner ring first, angular order within a ring"""
    entries = []
    for i_rad, circle in grid.boundary_rings:
        entries.extend((int(index), circle) for index in grid.ring(i_rad))
    return entries
