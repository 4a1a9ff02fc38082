"""Tensor trapezoid quadrature over sub-boxes and their faces.

Reductions flatten the weighted integrand and call ``numpy.sum``, which uses
pairwise summation on contiguous data; the summation tree depends only on
the array shape, so results are reproducible run to run.
"""

import numpy as np

from .fields import ScalarField

__all__ = [
    "trapezoid_weights_1d",
    "volume_weights",
    "volume_integral",
    "face_integral",
    "surface_integral",
    "nodal_weights",
    "MissingFaceError",
]


class MissingFaceError(KeyError):
    """Face data were not supplied for one face of the sub-box."""


def trapezoid_weights_1d(n, h):
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return w


def _tensor(weights):
    out = weights[0]
    for w in weights[1:]:
        out = np.multiply.outer(out, w)
    return out


def volume_weights(D):
    """Trapezoid weights on the nodes of ``D`` (shape of ``D``'s node block)."""
    h = D.grid.spacing
    return _tensor([trapezoid_weights_1d(b - a + 1, hk) for a, b, hk in zip(D.lo, D.hi, h)])


def nodal_weights(grid):
    """Trapezoid weights over the whole grid."""
    return _tensor([trapezoid_weights_1d(m, hk) for m, hk in zip(grid.shape, grid.spacing)])


def _sum(a):
    return float(np.sum(np.ascontiguousarray(a).reshape(-1)))


def volume_integral(field, D):
    """Integrate a nodal field over the closed sub-box ``D``.

    ``field`` may be a :class:`ScalarField`, an array of the grid shape, or
    a callable receiving node coordinates (shape ``shape + (ndim,)``).
    """
    if callable(field) and not isinstance(field, (ScalarField, np.ndarray)):
        vals = field(D.grid.points[D.slices])
    else:
        vals = np.asarray(field.values if isinstance(field, ScalarField) else field)
        if vals.shape == tuple(D.grid.shape):
            vals = vals[D.slices]
    return _sum(volume_weights(D) * vals)


def face_integral(values, face):
    """Trapezoid rule over one face; ``values`` has the face-node shape."""
    D = face.box
    h = D.grid.spacing
    ws = [
        trapezoid_weights_1d(b - a + 1, hk)
        for k, (a, b, hk) in enumerate(zip(D.lo, D.hi, h))
        if k != face.axis
    ]
    w = _tensor(ws)
    values = np.asarray(values, dtype=float)
    if values.shape != w.shape:
        raise ValueError(f"face {face.name}: values shape {values.shape}, expected {w.shape}")
    return _sum(w * values)


def surface_integral(face_values, D):
    """Sum of face integrals over every face of ``D``.

    ``face_values`` maps face names (``"+z1"``, ``"-z3"``, ...) to arrays, or
    is a callable ``face -> array``.
    """
    total = []
    for face in D.faces:
        if callable(face_values):
            vals = face_values(face)
        else:
            if face.name not in face_values:
                raise MissingFaceError(f"no data for face {face.name}")
            vals = face_values[face.name]
        total.append(face_integral(vals, face))
    return float(np.sum(total))
