"""Refinement, growing-domain and stationarity studies.

Every study returns a :class:`StudyTable`, a list of rows plus named summary
values, which writes itself as CSV.  Studies that solve on a sequence of
grids stop at the first failed solve and raise :class:`StudyAborted`
carrying the rows computed so far.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DivergenceError, DomainRangeError, GrushinError
from .fields import ScalarField
from .geometry import Grid, SubBox
from .pohozaev import (
    scaling_identity_global,
    scaling_identity_local,
    translating_identity_x,
    translating_identity_y,
    whole_space_residual,
)
from .solver import SolverConfig, picard_solve
from .variation import Cutoff, VariationMap, stationarity_check

__all__ = [
    "StudyTable",
    "StudyAborted",
    "observed_order",
    "identity_report",
    "refinement_study",
    "whole_space_study",
    "stationarity_study",
]


@dataclass
class StudyTable:
    columns: list
    rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def column(self, name):
        k = self.columns.index(name)
        return [r[k] for r in self.rows]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.columns)
            for r in self.rows:
                w.writerow([_fmt(v) for v in r])

    def to_dict(self):
        return {
            "columns": list(self.columns),
            "rows": [[_fmt(v) for v in r] for r in self.rows],
            "summary": {k: _fmt(v) for k, v in self.summary.items()},
        }


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(v)
    return v


class StudyAborted(GrushinError):
    """A solve failed part way through a study; ``table`` holds the rows so far."""

    def __init__(self, message, table):
        super().__init__(message)
        self.table = table


def observed_order(hs, values):
    """Least-squares slope of ``log|value|`` against ``log h``.

    Returns ``nan`` when fewer than two points are given or any value is zero.
    """
    hs = np.asarray(hs, dtype=float)
    v = np.abs(np.asarray(values, dtype=float))
    if len(hs) < 2 or np.any(v == 0) or not np.all(np.isfinite(v)):
        return float("nan")
    return float(np.polyfit(np.log(hs), np.log(v), 1)[0])


def identity_report(kind, u, nl, geo, D=None, index=None):
    """Dispatch to one identity assembler.

    ``kind`` is ``translate-x``, ``translate-y``, ``scale-local`` or
    ``scale-global``; ``index`` is the 1-based axis of translating kinds.
    """
    if kind == "translate-x":
        return translating_identity_x(u, nl, geo, D, _axis(index))
    if kind == "translate-y":
        return translating_identity_y(u, nl, geo, D, _axis(index))
    if kind == "scale-local":
        return scaling_identity_local(u, nl, geo, D)
    if kind == "scale-global":
        return scaling_identity_global(u, nl, geo)
    raise ValueError(f"unknown identity kind {kind!r}")


def _axis(index):
    if index is None:
        raise ValueError("translating identities need an axis index")
    return int(index) - 1


def _solve(nl, geo, grid, cfg, table):
    try:
        u, trace, reports = picard_solve(nl, geo, grid, cfg)
    except DivergenceError as exc:
        raise StudyAborted(f"solve diverged on grid {grid.resolution}: {exc}", table) from exc
    if not reports[-1].converged:
        raise StudyAborted(
            f"solver did not converge on grid {grid.resolution} "
            f"(gradient norm {reports[-1].grad_norm:.3e})",
            table,
        )
    return u


def refinement_study(kind, nl, geo, bounds, levels, D_bounds=None, index=None, cfg=None):
    """Identity residuals over a sequence of grids.

    Parameters
    ----------
    kind, index
        Identity selector, see :func:`identity_report`.
    nl : Nonlinearity
    geo : GrushinGeometry
    bounds : sequence of (a, b)
        The box Omega.
    levels : sequence of int
        Nodes per axis on each level.
    D_bounds : (lower, upper), optional
        Corners of the sub-box; required for local identities.  Both corners
        must be grid nodes on every level.
    cfg : SolverConfig, optional

    Returns
    -------
    StudyTable
        Columns ``h, residual, relative_residual`` plus ``aux_residual`` for
        ``scale-local`` (the integration-by-parts check) and
        ``collapse_residual`` for ``scale-global``.  Summary holds the fitted
        orders.
    """
    extra = {"scale-local": "aux_residual", "scale-global": "collapse_residual"}.get(kind)
    cols = ["h", "residual", "relative_residual"] + ([extra] if extra else [])
    table = StudyTable(cols)
    for m in levels:
        grid = Grid(bounds, (m,) * len(bounds))
        u = _solve(nl, geo, grid, cfg, table)
        D = SubBox.from_bounds(grid, *D_bounds) if D_bounds is not None else None
        rep = identity_report(kind, u, nl, geo, D, index)
        row = [grid.h, rep.residual, rep.relative_residual]
        if kind == "scale-local":
            row.append(rep.extras["aux.relative_residual"])
        elif kind == "scale-global":
            row.append(rep.extras["collapse.residual"])
        table.rows.append(row)
    hs = table.column("h")
    table.summary["order"] = observed_order(hs, table.column("relative_residual"))
    if kind == "scale-local":
        table.summary["aux_order"] = observed_order(hs, table.column("aux_residual"))
    return table


def whole_space_study(nl, geo, radii, h, cfg=None):
    """Global identity on growing cubes ``[-R, R]^(N+l)`` at fixed spacing.

    For each radius the problem is solved and two numbers are recorded: the
    boundary term of the global identity, and the residual of the identity
    with that boundary term dropped (the whole-space form).  With forcing
    supported in a fixed inner box both should shrink as ``R`` grows.
    """
    table = StudyTable(["R", "h", "boundary_term", "whole_space_residual", "relative_residual"])
    n = geo.ndim
    for R in radii:
        m = int(round(2 * R / h)) + 1
        if abs((m - 1) * h - 2 * R) > 1e-9 * R:
            raise ValueError(f"radius {R} is not a multiple of h/2 = {h / 2}")
        grid = Grid(((-R, R),) * n, (m,) * n)
        u = _solve(nl, geo, grid, cfg, table)
        rep = scaling_identity_global(u, nl, geo)
        table.rows.append(
            [float(R), grid.h, rep.terms["lhs.t2"], whole_space_residual(rep), rep.relative_residual]
        )
    return table


def _check_support(cut, grid):
    mask = grid.boundary_mask
    if np.any(cut(grid.points[mask]) > 0):
        raise DomainRangeError(
            f"the cutoff shell of width delta={cut.delta:g} reaches the boundary of Omega; "
            "shrink delta or move the sub-box inward"
        )


def stationarity_study(
    nl,
    geo,
    bounds,
    levels,
    D_bounds,
    delta,
    kind="translate",
    axis=0,
    steps=(0.005, 0.0025, 0.00125, 0.000625),
    oversample=3,
    perturbation=None,
    cfg=None,
):
    """Fitted slope of ``t -> I(u o Phi_t)`` at ``t = 0`` on each level.

    ``axis`` is 0-based.  ``perturbation``, if given, is a callable of the
    node coordinates added to the interior of every solution before the
    check; it serves as a control that must produce a clearly nonzero slope.
    """
    table = StudyTable(["h", "slope"])
    cut = Cutoff(D_bounds[0], D_bounds[1], delta, geo)
    for m in levels:
        grid = Grid(bounds, (m,) * len(bounds))
        _check_support(cut, grid)
        u = _solve(nl, geo, grid, cfg, table)
        if perturbation is not None:
            bump = np.where(grid.interior_mask, perturbation(grid.points), 0.0)
            u = ScalarField(grid, u.values + bump, dirichlet=True)
        g = nl.f(grid.points, u.values)
        vmap = VariationMap(kind, cut, axis=axis if kind == "translate" else None, bounds=grid.bounds)
        res = stationarity_check(u, vmap, steps, g, geo, oversample=oversample)
        table.rows.append([grid.h, res.slope])
    return table
