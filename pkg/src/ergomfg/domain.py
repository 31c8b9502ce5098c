"""Domains, node-centred grids on the truncated set {d > eps}, and the
finite-volume measures shared by every solver.

Two geometries are supported: an interval ``(a, b)`` and a disk/ball of
radius ``R`` in ``n >= 2`` dimensions, reduced to its radial profile.
Fields on a grid are plain ``numpy`` arrays with one entry per node.  A
"vector field" stores the signed 1D component: the x-component on an
interval, the radial component on a disk.

Every grid is a grid of ``Omega_eps``.  The extreme nodes sit exactly at
distance ``eps`` from the boundary (for the disk, the node ``r = R - eps``;
the other extreme is the centre ``r = 0``).  Nodes carry dual cells whose
volumes are the quadrature weights: on an interval this is the trapezoid
rule, on a disk the exact volume of each radial shell (so the weights include
the ``r**(n-1)`` Jacobian and the sphere area).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Union

import numpy as np
import scipy.sparse as sp

__all__ = [
    "Interval",
    "RadialDisk",
    "DomainSpec",
    "Grid",
    "GridError",
    "build_grid",
    "oriented_distance",
    "laplacian_matrix",
    "centered_gradient",
    "mass_inside",
    "sphere_area",
]


class GridError(ValueError):
    """Invalid domain or grid parameters."""


@dataclass(frozen=True)
class Interval:
    a: float
    b: float

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise GridError(f"interval bounds must be finite, got ({self.a}, {self.b})")
        if not self.a < self.b:
            raise GridError(f"interval needs a < b, got ({self.a}, {self.b})")

    @property
    def width(self) -> float:
        return self.b - self.a

    @property
    def center(self) -> float:
        return 0.5 * (self.a + self.b)


@dataclass(frozen=True)
class RadialDisk:
    radius: float
    dim: int = 2

    def __post_init__(self):
        if not (math.isfinite(self.radius) and self.radius > 0):
            raise GridError(f"disk radius must be positive and finite, got {self.radius}")
        if int(self.dim) != self.dim or self.dim < 2:
            raise GridError(f"ambient dimension must be an integer >= 2, got {self.dim}")

    @property
    def width(self) -> float:
        return 2.0 * self.radius


DomainSpec = Union[Interval, RadialDisk]


def sphere_area(dim: int) -> float:
    """Surface area of the unit sphere in R^dim."""
    return 2.0 * math.pi ** (dim / 2) / math.gamma(dim / 2)


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform node-centred grid of ``Omega_eps``.

    Build it with :func:`build_grid`; the constructor does no validation.
    """

    spec: DomainSpec
    n_cells: int
    eps: float
    nodes: np.ndarray = field(repr=False)
    h: float
    d: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return self.nodes.size

    @property
    def is_disk(self) -> bool:
        return isinstance(self.spec, RadialDisk)

    @cached_property
    def faces(self) -> np.ndarray:
        """Face measures at the midpoints ``x_{i+1/2}``, ``i = 0..N-1``."""
        if not self.is_disk:
            return np.ones(self.n_cells)
        mid = 0.5 * (self.nodes[:-1] + self.nodes[1:])
        return sphere_area(self.spec.dim) * mid ** (self.spec.dim - 1)

    @cached_property
    def volumes(self) -> np.ndarray:
        """Dual-cell volumes; these are the quadrature weights."""
        h = self.h
        if not self.is_disk:
            w = np.full(self.size, h)
            w[0] = w[-1] = 0.5 * h
            return w
        n = self.spec.dim
        edges = np.concatenate(([0.0], 0.5 * (self.nodes[:-1] + self.nodes[1:]), [self.nodes[-1]]))
        return sphere_area(n) / n * (edges[1:] ** n - edges[:-1] ** n)

    @cached_property
    def boundary_nodes(self) -> tuple[int, ...]:
        """Nodes lying on ``{d = eps}``."""
        if self.is_disk:
            return (self.size - 1,)
        return (0, self.size - 1)

    @cached_property
    def boundary_faces(self) -> np.ndarray:
        """Measure of ``{d = eps}`` attached to each node (zero off the boundary)."""
        area = np.zeros(self.size)
        if self.is_disk:
            area[-1] = sphere_area(self.spec.dim) * self.nodes[-1] ** (self.spec.dim - 1)
        else:
            area[0] = area[-1] = 1.0
        return area

    @cached_property
    def grad_d(self) -> np.ndarray:
        """Signed 1D component of the gradient of ``d`` (``= -nu`` near the boundary)."""
        if self.is_disk:
            return -np.ones(self.size)
        return np.sign(self.spec.center - self.nodes)

    @cached_property
    def laplacian_d(self) -> np.ndarray:
        """``Delta d`` at the nodes (``-inf`` at the disk centre)."""
        if not self.is_disk:
            return np.zeros(self.size)
        with np.errstate(divide="ignore"):
            return -(self.spec.dim - 1) / self.nodes

    @cached_property
    def center_index(self) -> int:
        if self.is_disk:
            return 0
        return int(np.argmin(np.abs(self.nodes - self.spec.center)))

    @property
    def total_volume(self) -> float:
        return float(self.volumes.sum())

    def integrate(self, values: np.ndarray) -> float:
        return float(np.dot(self.volumes, values))

    def distance_at(self, x: np.ndarray) -> np.ndarray:
        """Distance to the true boundary for arbitrary coordinates."""
        x = np.asarray(x, dtype=float)
        if self.is_disk:
            return self.spec.radius - np.abs(x)
        return np.minimum(x - self.spec.a, self.spec.b - x)

    def same_as(self, other: "Grid") -> bool:
        return (
            self.spec == other.spec
            and self.n_cells == other.n_cells
            and self.eps == other.eps
        )


def build_grid(spec: DomainSpec, n_cells: int, eps: float, *, min_cells: int = 16) -> Grid:
    """Uniform grid of ``Omega_eps = {d > eps}``.

    ``min_cells`` exists for tiny illustrative grids; solvers assume the
    default.
    """
    if int(n_cells) != n_cells or n_cells < min_cells:
        raise GridError(f"n_cells must be an integer >= {min_cells}, got {n_cells}")
    n_cells = int(n_cells)
    if not (math.isfinite(eps) and 0.0 < eps < spec.width / 4):
        raise GridError(f"eps must lie in (0, {spec.width / 4:g}), got {eps}")

    if isinstance(spec, Interval):
        lo, hi = spec.a + eps, spec.b - eps
    else:
        lo, hi = 0.0, spec.radius - eps
    nodes = np.linspace(lo, hi, n_cells + 1)
    h = (hi - lo) / n_cells
    grid = Grid(spec=spec, n_cells=n_cells, eps=float(eps), nodes=nodes, h=h, d=np.empty(0))
    object.__setattr__(grid, "d", oriented_distance(grid))
    return grid


def oriented_distance(grid: Grid) -> np.ndarray:
    """Distance of each node to the boundary of the full domain.

    On an interval the distance is built from the node index, so mirror
    nodes get bit-identical values and the extremes sit exactly at ``eps``.
    """
    if grid.is_disk:
        d = grid.spec.radius - grid.nodes
        d[-1] = grid.eps
        return d
    i = np.arange(grid.size)
    return grid.eps + np.minimum(i, grid.n_cells - i) * grid.h


def laplacian_matrix(grid: Grid) -> sp.csr_matrix:
    """Finite-volume ``-Delta`` with zero-flux closure on ``{d = eps}``.

    Row ``i`` is ``(1/V_i) * sum_faces A/h (u_i - u_nbr)``; on the disk the
    centre row has a single face, which encodes ``u'(0) = 0``.
    """
    n = grid.size
    k = grid.faces / grid.h
    vol = grid.volumes
    main = np.zeros(n)
    main[:-1] += k
    main[1:] += k
    rows = np.concatenate((np.arange(n), np.arange(n - 1), np.arange(1, n)))
    cols = np.concatenate((np.arange(n), np.arange(1, n), np.arange(n - 1)))
    vals = np.concatenate((main / vol, -k / vol[:-1], -k / vol[1:]))
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def centered_gradient(u: np.ndarray, grid: Grid) -> np.ndarray:
    """Second-order gradient: centred inside, one-sided at the extremes.

    On the disk the centre value is zero by symmetry.
    """
    u = np.asarray(u, dtype=float)
    h = grid.h
    g = np.empty_like(u)
    g[1:-1] = (u[2:] - u[:-2]) / (2 * h)
    g[-1] = (3 * u[-1] - 4 * u[-2] + u[-3]) / (2 * h)
    if grid.is_disk:
        g[0] = 0.0
    else:
        g[0] = (-3 * u[0] + 4 * u[1] - u[2]) / (2 * h)
    return g


def mass_inside(grid: Grid, density: np.ndarray, eta: float) -> float:
    """Mass of ``density`` in ``{d > eta}``, density constant on dual cells."""
    density = np.asarray(density, dtype=float)
    h = grid.h
    lo = grid.nodes - 0.5 * h
    hi = grid.nodes + 0.5 * h
    if grid.is_disk:
        lo[0] = 0.0
        hi[-1] = grid.nodes[-1]
        cut = grid.spec.radius - eta
        lo_c = np.clip(lo, 0.0, cut)
        hi_c = np.clip(hi, 0.0, cut)
        n = grid.spec.dim
        vol = sphere_area(n) / n * (hi_c**n - lo_c**n)
    else:
        lo[0] = grid.nodes[0]
        hi[-1] = grid.nodes[-1]
        a, b = grid.spec.a + eta, grid.spec.b - eta
        vol = np.clip(np.minimum(hi, b) - np.maximum(lo, a), 0.0, None)
    return float(np.dot(vol, density))
