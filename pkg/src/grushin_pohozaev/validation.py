"""Input checks shared by the estimators and the command line."""

import numbers

import numpy as np
from sklearn.utils.validation import check_array

from .geometry import Grid, GrushinGeometry

__all__ = ["check_geometry", "check_bounds", "check_resolution", "check_grid", "check_points"]


def check_geometry(N, l, gamma, p):
    """Build a :class:`GrushinGeometry`, rejecting non-integral dimensions."""
    for name, v in (("N", N), ("l", l)):
        if isinstance(v, bool) or not isinstance(v, numbers.Integral):
            raise ValueError(f"{name} must be an integer, got {v!r}")
    for name, v in (("gamma", gamma), ("p", p)):
        if isinstance(v, bool) or not isinstance(v, numbers.Real):
            raise ValueError(f"{name} must be a real number, got {v!r}")
    return GrushinGeometry(int(N), int(l), float(gamma), float(p))


def check_bounds(bounds, ndim):
    """``bounds`` as a tuple of ``ndim`` increasing ``(a, b)`` pairs.

    A single pair is repeated on every axis.
    """
    arr = np.asarray(bounds, dtype=float)
    if arr.shape == (2,):
        arr = np.tile(arr, (ndim, 1))
    if arr.shape != (ndim, 2):
        raise ValueError(f"bounds must have shape ({ndim}, 2), got {arr.shape}")
    if not np.all(np.isfinite(arr)) or np.any(arr[:, 1] <= arr[:, 0]):
        raise ValueError(f"bounds must be finite increasing intervals, got {arr.tolist()}")
    return tuple((float(a), float(b)) for a, b in arr)


def check_resolution(resolution, ndim):
    """Per-axis node counts; an integer is repeated on every axis."""
    if isinstance(resolution, numbers.Integral):
        resolution = (int(resolution),) * ndim
    resolution = tuple(resolution)
    if len(resolution) != ndim:
        raise ValueError(f"resolution needs {ndim} entries, got {len(resolution)}")
    for m in resolution:
        if isinstance(m, bool) or not isinstance(m, numbers.Integral) or m < 3:
            raise ValueError(f"resolution entries must be integers >= 3, got {m!r}")
    return tuple(int(m) for m in resolution)


def check_grid(bounds, resolution, ndim):
    return Grid(check_bounds(bounds, ndim), check_resolution(resolution, ndim))


def check_points(Z, ndim):
    """2-D float array of query points with ``ndim`` columns."""
    Z = check_array(Z, dtype=np.float64, ensure_2d=True)
    if Z.shape[1] != ndim:
        raise ValueError(f"points need {ndim} columns, got {Z.shape[1]}")
    return Z
