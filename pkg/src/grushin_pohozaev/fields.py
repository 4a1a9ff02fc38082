"""Nodal fields on a :class:`~grushin_pohozaev.geometry.Grid` and the
discrete Grushin differential operators.

All derivatives use ``numpy.gradient`` with ``edge_order=2``: centered
differences at interior nodes, second-order one-sided differences on the
grid boundary.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .exceptions import SingularWeightError

__all__ = [
    "ScalarField",
    "VectorField",
    "grushin_gradient",
    "grushin_divergence",
    "grushin_weight",
    "p_sublaplacian",
    "regularized_weight",
]


@dataclass(frozen=True, eq=False)
class ScalarField:
    """One real per grid node.

    ``dirichlet=True`` marks a field that vanishes on the grid boundary;
    the constructor enforces it by zeroing boundary values.
    """

    grid: object = field(repr=False)
    values: np.ndarray = field(repr=False)
    dirichlet: bool = False

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != self.grid.shape:
            if v.size != self.grid.node_count:
                raise ValueError(
                    f"{v.size} values for a grid with {self.grid.node_count} nodes"
                )
            v = v.reshape(self.grid.shape)
        if self.dirichlet:
            v[self.grid.boundary_mask] = 0.0
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, grid, dirichlet=True):
        return cls(grid, np.zeros(grid.shape), dirichlet)

    @classmethod
    def from_function(cls, grid, func, dirichlet=False):
        """Sample ``func(points)`` where ``points`` has shape ``shape + (ndim,)``."""
        return cls(grid, np.broadcast_to(func(grid.points), grid.shape), dirichlet)

    def with_values(self, values, dirichlet=None):
        return ScalarField(self.grid, values, self.dirichlet if dirichlet is None else dirichlet)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def max_norm(self):
        return float(np.max(np.abs(self.values)))

    def to_csv(self, path, name="u"):
        """Write one row per node: coordinates then value."""
        pts = self.grid.points.reshape(-1, self.grid.ndim)
        vals = self.values.reshape(-1)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"z{k + 1}" for k in range(self.grid.ndim)] + [name])
            for row, v in zip(pts, vals):
                w.writerow([repr(float(c)) for c in row] + [repr(float(v))])


@dataclass(frozen=True, eq=False)
class VectorField:
    """An ``(N+l)``-vector per node; ``values`` has shape ``(ndim,) + grid.shape``."""

    grid: object = field(repr=False)
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        expected = (self.grid.ndim,) + tuple(self.grid.shape)
        if v.shape != expected:
            raise ValueError(f"vector field shape {v.shape}, expected {expected}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __getitem__(self, k):
        return self.values[k]

    def norm(self):
        return np.sqrt(np.sum(self.values**2, axis=0))

    def to_csv(self, path, name="P"):
        pts = self.grid.points.reshape(-1, self.grid.ndim)
        comps = self.values.reshape(self.grid.ndim, -1).T
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(
                [f"z{k + 1}" for k in range(self.grid.ndim)]
                + [f"{name}{k + 1}" for k in range(self.grid.ndim)]
            )
            for row, c in zip(pts, comps):
                w.writerow([repr(float(a)) for a in row] + [repr(float(b)) for b in c])


def _check_dims(grid, geo):
    if grid.ndim != geo.ndim:
        raise ValueError(f"grid has {grid.ndim} axes but N + l = {geo.ndim}")


def grushin_weight(grid, geo):
    """Nodal ``|x|^gamma`` (nodes on ``x = 0`` get 0 when gamma > 0)."""
    _check_dims(grid, geo)
    return geo.weight(grid.points)


def _values(u):
    return u.values if isinstance(u, ScalarField) else np.asarray(u, dtype=float)


def euclidean_gradient(values, grid):
    """Plain nodal gradient, shape ``(ndim,) + grid.shape``."""
    return np.stack(np.gradient(values, *grid.spacing, edge_order=2), axis=0)


def grushin_gradient(u, geo):
    """``(grad_x u, |x|^gamma grad_y u)`` as a :class:`VectorField`."""
    grid = u.grid
    _check_dims(grid, geo)
    g = euclidean_gradient(u.values, grid)
    g[geo.N :] *= grushin_weight(grid, geo)
    return VectorField(grid, g)


def grushin_divergence(P, geo):
    """``sum_i d p_i/dx_i + |x|^gamma sum_j d q_j/dy_j``."""
    grid = P.grid
    _check_dims(grid, geo)
    div_x = np.zeros(grid.shape)
    div_y = np.zeros(grid.shape)
    for k in range(grid.ndim):
        dk = np.gradient(P.values[k], grid.spacing[k], axis=k, edge_order=2)
        if k < geo.N:
            div_x += dk
        else:
            div_y += dk
    return ScalarField(grid, div_x + grushin_weight(grid, geo) * div_y)


def regularized_weight(norm2, p, eps_w):
    """``(|xi|^2 + eps_w^2)^((p-2)/2)``, the p-Laplacian coefficient.

    Raises :class:`SingularWeightError` when ``p < 2``, ``eps_w == 0`` and
    some ``|xi|`` vanishes.
    """
    norm2 = np.asarray(norm2, dtype=float)
    if p == 2:
        return np.ones_like(norm2)
    if eps_w == 0 and p < 2 and np.any(norm2 == 0):
        raise SingularWeightError(
            f"|grad u|^(p-2) is singular at {int(np.sum(norm2 == 0))} node(s) "
            f"with p={p} < 2 and eps_w=0; pass eps_w > 0"
        )
    return (norm2 + eps_w**2) ** ((p - 2.0) / 2.0)


def p_sublaplacian(u, geo, eps_w=0.0):
    """Nodal ``div_gamma(w grad_gamma u)`` with the regularized coefficient ``w``."""
    G = grushin_gradient(u, geo)
    w = regularized_weight(np.sum(G.values**2, axis=0), geo.p, eps_w)
    return grushin_divergence(VectorField(u.grid, G.values * w), geo)
