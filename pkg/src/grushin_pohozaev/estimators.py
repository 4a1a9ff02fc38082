"""Estimator-style front ends for the solver and the identity checks."""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .exceptions import DomainRangeError
from .geometry import SubBox
from .nonlinearity import parse_nonlinearity
from .solver import SolverConfig, energy, picard_solve
from .studies import identity_report
from .validation import check_geometry, check_grid, check_points
from .variation import resample

__all__ = ["GrushinPLaplaceSolver", "PohozaevVerifier"]


class GrushinPLaplaceSolver(BaseEstimator):
    """Solve ``-div_gamma(|grad_gamma u|^(p-2) grad_gamma u) = f(z, u)`` on a
    box with ``u = 0`` on the boundary.

    Parameters
    ----------
    N, l : int
        Numbers of ``x`` and ``y`` coordinates.
    gamma : float
        Degeneracy exponent.
    p : float
        Growth exponent.
    bounds : sequence of (a, b), or a single pair for every axis
    resolution : int or sequence of int
        Nodes per axis.
    nonlinearity : str
        Right-hand side in the expression grammar, e.g. ``"1"`` or
        ``"x1*u + 2"``.
    tol_grad, max_iter, eps_w, picard_max, picard_tol, init, seed
        Passed to :class:`SolverConfig`.

    Attributes
    ----------
    geometry_, grid_, nonlinearity_
        Validated inputs.
    solution_ : ScalarField
    report_ : EnergyReport
        Report of the last inner minimization.
    picard_trace_ : list of float
    energy_ : float
        Energy of the solution with ``g = f(z, u)`` frozen.
    """

    def __init__(
        self,
        N=1,
        l=2,
        gamma=0.0,
        p=2.0,
        bounds=(-1.0, 1.0),
        resolution=17,
        nonlinearity="1",
        tol_grad=None,
        max_iter=20000,
        eps_w=None,
        picard_max=50,
        picard_tol=1e-7,
        init="zeros",
        seed=0,
    ):
        self.N = N
        self.l = l
        self.gamma = gamma
        self.p = p
        self.bounds = bounds
        self.resolution = resolution
        self.nonlinearity = nonlinearity
        self.tol_grad = tol_grad
        self.max_iter = max_iter
        self.eps_w = eps_w
        self.picard_max = picard_max
        self.picard_tol = picard_tol
        self.init = init
        self.seed = seed

    def _config(self):
        return SolverConfig(
            tol_grad=self.tol_grad,
            max_iter=self.max_iter,
            eps_w=self.eps_w,
            picard_max=self.picard_max,
            picard_tol=self.picard_tol,
            init=self.init,
            seed=self.seed,
        )

    def fit(self, X=None, y=None):
        """Solve the problem.  ``X`` and ``y`` are ignored."""
        geo = check_geometry(self.N, self.l, self.gamma, self.p)
        grid = check_grid(self.bounds, self.resolution, geo.ndim)
        nl = parse_nonlinearity(self.nonlinearity, geo.N, geo.l)
        u, trace, reports = picard_solve(nl, geo, grid, self._config())
        self.geometry_, self.grid_, self.nonlinearity_ = geo, grid, nl
        self.solution_ = u
        self.report_ = reports[-1]
        self.picard_trace_ = trace
        self.energy_ = energy(u, nl.f(grid.points, u.values), geo, eps_w=self._config().eps_w)
        return self

    @property
    def converged_(self):
        check_is_fitted(self, "solution_")
        return bool(self.report_.converged)

    def predict(self, X):
        """Multilinear interpolation of the solution at the rows of ``X``."""
        check_is_fitted(self, "solution_")
        Z = check_points(X, self.geometry_.ndim)
        if not np.all(self.grid_.contains(Z)):
            raise DomainRangeError("query points outside the computational box")
        return resample(self.solution_, Z)


class PohozaevVerifier(BaseEstimator):
    """Evaluate one identity on a fitted :class:`GrushinPLaplaceSolver`.

    Parameters
    ----------
    identity : {"translate-x", "translate-y", "scale-local", "scale-global"}
    index : int, optional
        1-based axis for the translating identities.
    lower, upper : sequence of float, optional
        Corners of the sub-box ``D`` (grid nodes); unused for
        ``scale-global``.
    threshold : float
        Bound on the relative residual used by :meth:`passed`.
    """

    def __init__(self, identity="scale-local", index=None, lower=None, upper=None, threshold=0.1):
        self.identity = identity
        self.index = index
        self.lower = lower
        self.upper = upper
        self.threshold = threshold

    def fit(self, X, y=None):
        """``X`` is a fitted solver."""
        check_is_fitted(X, "solution_")
        D = None
        if self.identity != "scale-global":
            if self.lower is None or self.upper is None:
                raise ValueError(f"{self.identity} needs the sub-box corners lower and upper")
            D = SubBox.from_bounds(X.grid_, self.lower, self.upper)
        self.report_ = identity_report(
            self.identity, X.solution_, X.nonlinearity_, X.geometry_, D, self.index
        )
        self.relative_residual_ = self.report_.relative_residual
        return self

    def passed(self):
        check_is_fitted(self, "report_")
        return bool(self.relative_residual_ <= self.threshold)
