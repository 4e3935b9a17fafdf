"""Truncated exterior domain on a uniform grid.

The unbounded exterior of a union of disks is cut off at a square box of
half-width ``R_box`` carrying homogeneous Dirichlet values. Obstacles are
discretized by staircase masking: every node inside a disk is pinned to zero.

Fields are plain numpy arrays shaped like ``GridMask.shape``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import SpecInvalid

INTERIOR = 0
OBSTACLE = 1
OUTER_BOUNDARY = 2


@dataclass(frozen=True)
class Disk:
    center: tuple[float, ...]
    radius: float


@dataclass(frozen=True)
class DomainSpec:
    dim: int
    R_box: float
    h: float
    obstacles: tuple[Disk, ...] = ()
    r0: float = 1.0
    r1: float = 2.0

    def validate(self) -> None:
        if self.dim not in (1, 2):
            raise SpecInvalid(f"dimension must be 1 or 2, got {self.dim}")
        if not self.h > 0:
            raise SpecInvalid(f"grid spacing must be positive, got {self.h}")
        if not self.r0 > 0 or not self.r1 > 0:
            raise SpecInvalid("r0 and r1 must be positive")
        if not (self.R_box > self.r0 and self.R_box > self.r1):
            raise SpecInvalid(f"R_box={self.R_box} must exceed r0={self.r0} and r1={self.r1}")
        if self.dim == 1 and self.obstacles:
            raise SpecInvalid("obstacles are only supported for dim=2")
        for disk in self.obstacles:
            if len(disk.center) != self.dim:
                raise SpecInvalid(f"obstacle center {disk.center} has wrong dimension")
            if not disk.radius > 0:
                raise SpecInvalid(f"obstacle radius must be positive, got {disk.radius}")
            if math.hypot(*disk.center) + disk.radius >= self.r0:
                raise SpecInvalid(f"obstacle {disk} is not strictly inside B_r0 (r0={self.r0})")


def nodes_per_half_axis(R_box: float, h: float) -> int:
    # tolerance guards 30/0.1 = 299.99999999999994
    return int(math.floor(R_box / h + 1e-9))


@dataclass(frozen=True, eq=False)
class GridMask:
    """Node classification of a ``(2n+1)**dim`` grid with spacing ``h``."""

    dim: int
    h: float
    n: int
    kind: np.ndarray = field(repr=False)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.kind.shape

    @cached_property
    def axis(self) -> np.ndarray:
        return np.arange(-self.n, self.n + 1) * self.h

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*([self.axis] * self.dim), indexing="ij"))

    @cached_property
    def radius(self) -> np.ndarray:
        return np.sqrt(sum(c * c for c in self.coords))

    @cached_property
    def interior(self) -> np.ndarray:
        return self.kind == INTERIOR

    @property
    def num_interior(self) -> int:
        return int(self.interior.sum())

    @property
    def cell_volume(self) -> float:
        return self.h**self.dim

    def zeros(self, dtype=float) -> np.ndarray:
        return np.zeros(self.shape, dtype=dtype)

    def mask(self, values: np.ndarray) -> np.ndarray:
        """Return a copy of ``values`` with masked nodes set to zero."""
        out = np.array(values, copy=True)
        out[~self.interior] = 0
        return out

    def index_of(self, point) -> tuple[int, ...]:
        """Grid index of the node nearest to ``point``."""
        return tuple(int(round(p / self.h)) + self.n for p in np.atleast_1d(point))


def build_grid(spec: DomainSpec) -> GridMask:
    spec.validate()
    n = nodes_per_half_axis(spec.R_box, spec.h)
    if n < 1:
        raise SpecInvalid("grid has no interior node")
    kind = np.full((2 * n + 1,) * spec.dim, INTERIOR, dtype=np.int8)
    grid = GridMask(spec.dim, spec.h, n, kind)
    for disk in spec.obstacles:
        d2 = sum((c - c0) ** 2 for c, c0 in zip(grid.coords, disk.center))
        kind[d2 <= disk.radius**2] = OBSTACLE
    for ax in range(spec.dim):
        edge = [slice(None)] * spec.dim
        for i in (0, -1):
            edge[ax] = i
            kind[tuple(edge)] = OUTER_BOUNDARY
    if not (kind == INTERIOR).any():
        raise SpecInvalid("no interior node remains")
    kind.flags.writeable = False
    return grid


# -- dampers ---------------------------------------------------------------

@dataclass(frozen=True)
class ConstantOne:
    pass


@dataclass(frozen=True)
class Zero:
    pass


@dataclass(frozen=True)
class ExteriorSmooth:
    inner_radius: float


@dataclass(frozen=True)
class ExteriorWithHole:
    """a = 1 except inside the listed axis-aligned boxes, where a = 0.

    Each hole is ``(lo_0, hi_0, lo_1, hi_1, ...)`` and must lie in B_r0.
    """

    holes: tuple[tuple[float, ...], ...]


@dataclass(frozen=True)
class Table:
    values: np.ndarray = field(repr=False)


def exterior_profile(r, r0: float, inner_radius: float) -> np.ndarray:
    """Radial damper: 0 for r <= inner_radius, 1 for r >= r0."""
    r = np.asarray(r, dtype=float)
    q = (r0 - r) / (r0 - inner_radius)
    out = np.zeros_like(r)
    out[r >= r0] = 1.0
    # q rounds to 1 just above inner_radius; the profile is 0 there anyway
    mid = (r < r0) & (q * q < 1.0)
    qm = q[mid]
    out[mid] = np.exp(1.0 - 1.0 / (1.0 - qm * qm))
    return out


def smooth_step(r, lo: float, hi: float) -> np.ndarray:
    """C-infinity step: 0 for r <= lo, 1 for r >= hi."""
    r = np.asarray(r, dtype=float)
    x = np.clip((r - lo) / (hi - lo), 0.0, 1.0)

    def psi(y):
        out = np.zeros_like(y)
        pos = y > 0
        out[pos] = np.exp(-1.0 / y[pos])
        return out

    up, down = psi(x), psi(1.0 - x)
    return up / (up + down)


def sample_damper(kind, spec: DomainSpec, grid: GridMask) -> np.ndarray:
    if isinstance(kind, ConstantOne):
        a = np.ones(grid.shape)
    elif isinstance(kind, Zero):
        a = np.zeros(grid.shape)
    elif isinstance(kind, ExteriorSmooth):
        if not 0 <= kind.inner_radius < spec.r0:
            raise SpecInvalid(f"inner radius {kind.inner_radius} must lie in [0, r0={spec.r0})")
        a = exterior_profile(grid.radius, spec.r0, kind.inner_radius)
    elif isinstance(kind, ExteriorWithHole):
        a = np.ones(grid.shape)
        for hole in kind.holes:
            if len(hole) != 2 * spec.dim:
                raise SpecInvalid(f"hole {hole} needs {2 * spec.dim} bounds")
            corners = np.array(hole, dtype=float).reshape(spec.dim, 2)
            if np.sqrt((np.abs(corners).max(axis=1) ** 2).sum()) > spec.r0:
                raise SpecInvalid(f"hole {hole} leaves B_r0; a must be 1 outside r0")
            inside = np.ones(grid.shape, dtype=bool)
            for c, (lo, hi) in zip(grid.coords, corners):
                inside &= (c >= lo) & (c <= hi)
            a[inside] = 0.0
    elif isinstance(kind, Table):
        a = np.asarray(kind.values, dtype=float)
        if a.shape != grid.shape:
            raise SpecInvalid(f"damper table shape {a.shape} != grid shape {grid.shape}")
        if (a < 0).any() or not np.isfinite(a).all():
            raise SpecInvalid("damper table has negative or non-finite values")
    else:
        raise SpecInvalid(f"unknown damper kind {kind!r}")
    return grid.mask(a)


# -- initial data ----------------------------------------------------------

class BumpKind(enum.Enum):
    BUMP_U0 = "bump_u0"
    BUMP_U1 = "bump_u1"
    BUMP_BOTH = "bump_both"


def bump(grid: GridMask, center, width: float) -> np.ndarray:
    """exp(-1/(1-(|x-c|/w)^2)) inside the ball of radius w about c."""
    d2 = sum((c - c0) ** 2 for c, c0 in zip(grid.coords, np.atleast_1d(center)))
    q = d2 / width**2
    out = np.zeros(grid.shape)
    inside = q < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - q[inside]))
    return out


def initial_data(kind: BumpKind, spec: DomainSpec, grid: GridMask,
                 center=None, width: float = 0.5, amplitude: float = 1.0):
    """Compactly supported C-infinity data ``(u0, u1)`` inside B_r1."""
    kind = BumpKind(kind)
    if center is None:
        center = (0.5 * (spec.r0 + spec.r1),) + (0.0,) * (spec.dim - 1)
    center = tuple(float(c) for c in np.atleast_1d(center))
    if len(center) != spec.dim:
        raise SpecInvalid(f"bump center {center} has wrong dimension")
    if not width > 0:
        raise SpecInvalid("bump width must be positive")
    if math.hypot(*center) + width > spec.r1:
        raise SpecInvalid(f"bump support (center {center}, width {width}) exits B_r1 (r1={spec.r1})")
    for disk in spec.obstacles:
        if math.dist(center, disk.center) < width + disk.radius:
            raise SpecInvalid(f"bump support intersects obstacle {disk}")
    b = grid.mask(amplitude * bump(grid, center, width))
    zero = grid.zeros()
    if kind is BumpKind.BUMP_U0:
        return b, zero
    if kind is BumpKind.BUMP_U1:
        return zero, b
    return b, b.copy()
