"""Box domains, tensor grids, sub-boxes and the anisotropic distance.

Coordinates are ordered ``z = (x_1, ..., x_N, y_1, ..., y_l)``; every array
indexed by node uses ``indexing="ij"`` so axis ``k`` of a field array is
coordinate ``z_k``.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .exceptions import DomainRangeError

__all__ = [
    "GrushinGeometry",
    "Grid",
    "Face",
    "SubBox",
    "outward_normal",
    "grushin_normal",
    "anisotropic_distance",
    "delta_shell",
]


@dataclass(frozen=True)
class GrushinGeometry:
    """Operator family parameters.

    Parameters
    ----------
    N : int
        Number of ``x`` coordinates (the ones entering the weight ``|x|^gamma``).
    l : int
        Number of ``y`` coordinates.
    gamma : float
        Degeneracy exponent, ``gamma >= 0``.
    p : float
        Growth exponent of the p-sub-Laplacian, ``p > 1``.
    """

    N: int
    l: int
    gamma: float
    p: float

    def __post_init__(self):
        if int(self.N) != self.N or int(self.l) != self.l:
            raise ValueError("N and l must be integers")
        if self.N < 1 or self.l < 1:
            raise ValueError(f"N and l must be >= 1, got N={self.N}, l={self.l}")
        if self.N + self.l < 3:
            raise ValueError(f"N + l must be >= 3, got {self.N + self.l}")
        if not np.isfinite(self.gamma) or self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if not np.isfinite(self.p) or self.p <= 1:
            raise ValueError(f"p must be > 1, got {self.p}")

    @property
    def ndim(self):
        return self.N + self.l

    def x_norm(self, z):
        """Euclidean norm of the ``x`` block of points ``z`` (last axis)."""
        z = np.asarray(z, dtype=float)
        return np.sqrt(np.sum(z[..., : self.N] ** 2, axis=-1))

    def weight(self, z):
        """``|x|^gamma`` at points ``z``; ``0**0`` is taken as 1."""
        return self.x_norm(z) ** self.gamma


@dataclass(frozen=True)
class Grid:
    """Uniform tensor grid on the box ``prod_k [a_k, b_k]``.

    Node ``i`` on axis ``k`` sits exactly at ``a_k + i * h_k``.
    """

    bounds: tuple
    resolution: tuple

    def __post_init__(self):
        bounds = tuple((float(a), float(b)) for a, b in self.bounds)
        resolution = tuple(int(m) for m in self.resolution)
        if len(bounds) != len(resolution):
            raise ValueError("bounds and resolution must have the same length")
        for k, ((a, b), m) in enumerate(zip(bounds, resolution)):
            if not b > a:
                raise ValueError(f"axis {k}: empty interval [{a}, {b}]")
            if m < 3:
                raise ValueError(f"axis {k}: need at least 3 nodes, got {m}")
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "resolution", resolution)

    @classmethod
    def uniform(cls, lower, upper, m, ndim):
        """Cube ``[lower, upper]^ndim`` with ``m`` nodes per axis."""
        return cls(((lower, upper),) * ndim, (m,) * ndim)

    def refined(self, k):
        """Same box with every cell split ``k`` times per axis."""
        return Grid(self.bounds, tuple((m - 1) * int(k) + 1 for m in self.resolution))

    @property
    def ndim(self):
        return len(self.resolution)

    @property
    def shape(self):
        return self.resolution

    @property
    def node_count(self):
        return int(np.prod(self.resolution))

    @cached_property
    def spacing(self):
        return tuple((b - a) / (m - 1) for (a, b), m in zip(self.bounds, self.resolution))

    @property
    def h(self):
        """Largest spacing over all axes."""
        return max(self.spacing)

    @cached_property
    def axes(self):
        return tuple(
            a + np.arange(m) * hk
            for (a, _), m, hk in zip(self.bounds, self.resolution, self.spacing)
        )

    @cached_property
    def points(self):
        """Node coordinates, shape ``shape + (ndim,)``."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack(mesh, axis=-1)

    @cached_property
    def boundary_mask(self):
        mask = np.zeros(self.shape, dtype=bool)
        for k in range(self.ndim):
            idx = [slice(None)] * self.ndim
            idx[k] = 0
            mask[tuple(idx)] = True
            idx[k] = -1
            mask[tuple(idx)] = True
        return mask

    @property
    def interior_mask(self):
        return ~self.boundary_mask

    @property
    def volume(self):
        return float(np.prod([b - a for a, b in self.bounds]))

    def index_of(self, coord, axis):
        """Node index of coordinate ``coord`` on ``axis``; must be a grid line."""
        a = self.bounds[axis][0]
        hk = self.spacing[axis]
        s = (coord - a) / hk
        i = int(round(s))
        if abs(s - i) > 1e-8 or not 0 <= i < self.resolution[axis]:
            raise DomainRangeError(
                f"coordinate {coord} is not a node of axis {axis} "
                f"(h={hk:g}, range {self.bounds[axis]})"
            )
        return i

    def contains(self, z, tol=1e-12):
        z = np.asarray(z, dtype=float)
        lo = np.array([a for a, _ in self.bounds])
        hi = np.array([b for _, b in self.bounds])
        return np.all((z >= lo - tol) & (z <= hi + tol), axis=-1)


@dataclass(frozen=True)
class Face:
    """One face of a sub-box: ``axis``, ``side`` (+1 or -1) and the node
    index of the face plane on that axis."""

    box: "SubBox" = field(repr=False)
    axis: int
    side: int
    index: int

    @property
    def slices(self):
        """Index tuple selecting the face nodes (the face axis is dropped)."""
        idx = [slice(lo, hi + 1) for lo, hi in zip(self.box.lo, self.box.hi)]
        idx[self.axis] = self.index
        return tuple(idx)

    @property
    def name(self):
        return f"{'+' if self.side > 0 else '-'}z{self.axis + 1}"

    @property
    def area(self):
        ext = self.box.extent
        return float(np.prod([e for k, e in enumerate(ext) if k != self.axis]))

    @property
    def normal(self):
        return outward_normal(self)


@dataclass(frozen=True)
class SubBox:
    """Axis-aligned sub-box ``D`` given by inclusive node indices ``lo..hi``.

    ``D`` must keep at least one node layer of clearance from the grid
    boundary unless ``allow_boundary`` is set (used for ``D = Omega``).
    """

    grid: Grid = field(repr=False)
    lo: tuple
    hi: tuple
    allow_boundary: bool = False

    def __post_init__(self):
        lo = tuple(int(i) for i in self.lo)
        hi = tuple(int(i) for i in self.hi)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if len(lo) != self.grid.ndim or len(hi) != self.grid.ndim:
            raise ValueError("lo/hi must have one index per axis")
        clearance = 0 if self.allow_boundary else 1
        for k, (a, b, m) in enumerate(zip(lo, hi, self.grid.shape)):
            if not a < b:
                raise ValueError(f"axis {k}: need lo < hi, got {a}, {b}")
            if a < clearance or b > m - 1 - clearance:
                raise DomainRangeError(
                    f"axis {k}: sub-box indices [{a}, {b}] leave no clearance "
                    f"inside 0..{m - 1}"
                )

    @classmethod
    def from_bounds(cls, grid, lower, upper, allow_boundary=False):
        lo = tuple(grid.index_of(c, k) for k, c in enumerate(lower))
        hi = tuple(grid.index_of(c, k) for k, c in enumerate(upper))
        return cls(grid, lo, hi, allow_boundary)

    @classmethod
    def whole(cls, grid):
        return cls(grid, (0,) * grid.ndim, tuple(m - 1 for m in grid.shape), True)

    @property
    def lower(self):
        return np.array([ax[i] for ax, i in zip(self.grid.axes, self.lo)])

    @property
    def upper(self):
        return np.array([ax[i] for ax, i in zip(self.grid.axes, self.hi)])

    @property
    def extent(self):
        return tuple(self.upper - self.lower)

    @property
    def volume(self):
        return float(np.prod(self.extent))

    @property
    def surface_area(self):
        return sum(f.area for f in self.faces)

    @property
    def slices(self):
        return tuple(slice(a, b + 1) for a, b in zip(self.lo, self.hi))

    @property
    def faces(self):
        out = []
        for k in range(self.grid.ndim):
            out.append(Face(self, k, -1, self.lo[k]))
            out.append(Face(self, k, +1, self.hi[k]))
        return out

    def contains_index_box(self, other):
        return all(a <= c for a, c in zip(self.lo, other.lo)) and all(
            b >= d for b, d in zip(self.hi, other.hi)
        )

    def closure_mask(self):
        mask = np.zeros(self.grid.shape, dtype=bool)
        mask[self.slices] = True
        return mask


def outward_normal(face):
    """Unit outward normal ``±e_k`` of a sub-box face."""
    nu = np.zeros(face.box.grid.ndim)
    nu[face.axis] = float(face.side)
    return nu


def grushin_normal(nu, z, geo):
    """``nu_gamma = (nu_x, |x|^gamma nu_y)`` at points ``z``.

    ``nu`` and ``z`` broadcast over leading axes; the last axis has length
    ``N + l``.
    """
    nu = np.asarray(nu, dtype=float)
    w = geo.weight(z)
    out = np.broadcast_to(nu, np.broadcast_shapes(nu.shape, np.shape(z))).copy()
    out[..., geo.N :] *= np.asarray(w)[..., None]
    return out


def _nearest_in_box(z, lower, upper):
    return np.clip(z, lower, upper)


def anisotropic_distance(z, D, geo):
    """Anisotropic distance from ``z`` to the closed box ``D``.

    ``d = (|x - xb|^(2+2g) / (1+g)^2 + |y - yb|^2)^(1/(2+2g))`` where
    ``(xb, yb)`` is the Euclidean projection of ``z`` onto ``D``.

    ``D`` may be a :class:`SubBox` or a ``(lower, upper)`` pair.
    """
    lower, upper = (D.lower, D.upper) if isinstance(D, SubBox) else map(np.asarray, D)
    z = np.asarray(z, dtype=float)
    dz = z - _nearest_in_box(z, lower, upper)
    g = geo.gamma
    dx2 = np.sum(dz[..., : geo.N] ** 2, axis=-1)
    dy2 = np.sum(dz[..., geo.N :] ** 2, axis=-1)
    s = dx2 ** (1.0 + g) / (1.0 + g) ** 2 + dy2
    return s ** (1.0 / (2.0 + 2.0 * g))


def delta_shell(D, delta, geo):
    """Smallest sub-box containing every node with ``d(z, D) < delta``.

    Raises
    ------
    DomainRangeError
        If the shell would reach the grid boundary.
    """
    if not delta > 0:
        raise ValueError(f"delta must be > 0, got {delta}")
    grid = D.grid
    d = anisotropic_distance(grid.points, D, geo)
    inside = (d < delta) | D.closure_mask()
    lo, hi = [], []
    for k in range(grid.ndim):
        other = tuple(j for j in range(grid.ndim) if j != k)
        hit = np.nonzero(np.any(inside, axis=other))[0]
        lo.append(int(hit[0]))
        hi.append(int(hit[-1]))
    for k, (a, b, m) in enumerate(zip(lo, hi, grid.shape)):
        if a < 1 or b > m - 2:
            raise DomainRangeError(
                f"delta={delta:g} shell reaches the boundary of the grid on axis {k}"
            )
    return SubBox(grid, tuple(lo), tuple(hi))
