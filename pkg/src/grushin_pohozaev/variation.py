"""Domain variations ``Phi_t``, their Jacobians, and the stationarity probe.

Two families are provided: translation ``Phi_t(z) = z + t phi(z) e_j`` and
scaling ``Phi_t(z) = (1 + t phi(z)) z``, both localized by a cutoff ``phi``
that equals 1 on ``D`` and vanishes outside the shell ``D_delta``.
"""

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .exceptions import DomainRangeError
from .fields import ScalarField, euclidean_gradient
from .geometry import anisotropic_distance, outward_normal
from .solver import energy, energy_difference

__all__ = [
    "Cutoff",
    "VariationMap",
    "apply_map",
    "jacobian_det",
    "ddet_dt_at_zero",
    "resample",
    "stationarity_check",
    "StationarityResult",
    "normal_alignment",
    "smoothstep",
]


def smoothstep(s):
    """``B(s) = 1 - 3 s^2 + 2 s^3`` clipped to ``[0, 1]`` (1 at s <= 0)."""
    s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
    return 1.0 - 3.0 * s**2 + 2.0 * s**3


@dataclass(frozen=True)
class Cutoff:
    """``phi = B((d(z, D) / delta)^(1 + gamma))`` with ``d`` the anisotropic
    distance.

    ``phi = 1`` on the closed box ``D`` and ``phi = 0`` where ``d >= delta``.
    Near ``D`` the distance grows like ``|y - y_D|^(1/(1+gamma))``, so
    blending ``d / delta`` directly would leave ``grad phi`` unbounded for
    ``gamma > 1``; the power restores a C^1 cutoff and is the identity for
    ``gamma = 0``.  ``D`` is stored by its coordinate corners so the cutoff
    can be evaluated at arbitrary points.
    """

    lower: tuple
    upper: tuple
    delta: float
    geo: object = field(repr=False)

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError(f"delta must be > 0, got {self.delta}")
        object.__setattr__(self, "lower", tuple(float(v) for v in self.lower))
        object.__setattr__(self, "upper", tuple(float(v) for v in self.upper))

    @classmethod
    def for_box(cls, D, delta, geo):
        return cls(tuple(D.lower), tuple(D.upper), delta, geo)

    @property
    def box(self):
        return np.array(self.lower), np.array(self.upper)

    def distance(self, z):
        return anisotropic_distance(z, self.box, self.geo)

    def _gauge(self, z):
        # S = d^(2 + 2 gamma) and its gradient, both polynomial in the offsets
        z = np.asarray(z, dtype=float)
        lo, hi = self.box
        dz = z - np.clip(z, lo, hi)
        g, N = self.geo.gamma, self.geo.N
        dx2 = np.sum(dz[..., :N] ** 2, axis=-1)
        S = dx2 ** (1 + g) / (1 + g) ** 2 + np.sum(dz[..., N:] ** 2, axis=-1)
        dS = np.empty(z.shape)
        dS[..., :N] = (2 * dx2**g / (1 + g))[..., None] * dz[..., :N]
        dS[..., N:] = 2 * dz[..., N:]
        return S, dS

    def __call__(self, z):
        S, _ = self._gauge(z)
        return smoothstep(np.sqrt(S) / self.delta ** (1 + self.geo.gamma))

    def gradient(self, z):
        """Analytic ``grad phi`` (last axis); zero on ``D`` and outside the shell."""
        S, dS = self._gauge(z)
        scale = self.delta ** (2 + 2 * self.geo.gamma)
        r = np.sqrt(S / scale)
        # B'(r) grad r = -6 r (1 - r) grad S / (2 r scale)
        factor = np.where(r < 1, -3.0 * (1.0 - r) / scale, 0.0)
        return factor[..., None] * dS

    def on_grid(self, grid):
        return ScalarField(grid, self(grid.points))


@dataclass(frozen=True)
class VariationMap:
    """``kind`` is ``"translate"`` (needs ``axis``, 0-based) or ``"scale"``.

    ``bounds`` (the box of Omega) enables the range check in
    :func:`apply_map`.
    """

    kind: str
    cutoff: Cutoff
    axis: int = None
    bounds: tuple = None

    def __post_init__(self):
        if self.kind not in ("translate", "scale"):
            raise ValueError(f"unknown variation kind {self.kind!r}")
        if self.kind == "translate" and self.axis is None:
            raise ValueError("translation needs an axis")


def apply_map(vmap, t, z):
    """``Phi_t(z)``; raises :class:`DomainRangeError` if an image leaves Omega."""
    z = np.asarray(z, dtype=float)
    phi = vmap.cutoff(z)
    if vmap.kind == "translate":
        out = z.copy()
        out[..., vmap.axis] += t * phi
    else:
        out = (1.0 + t * phi)[..., None] * z
    if vmap.bounds is not None:
        lo = np.array([a for a, _ in vmap.bounds])
        hi = np.array([b for _, b in vmap.bounds])
        tol = 1e-12 * np.max(np.abs(np.concatenate([lo, hi])))
        if np.any(out < lo - tol) or np.any(out > hi + tol):
            raise DomainRangeError(f"Phi_t with t={t:g} maps points outside Omega")
    return out


def jacobian_det(vmap, t, z):
    """Closed-form ``det Jac Phi_t(z)``."""
    z = np.asarray(z, dtype=float)
    grad = vmap.cutoff.gradient(z)
    if vmap.kind == "translate":
        return 1.0 + t * grad[..., vmap.axis]
    n = z.shape[-1]
    s = 1.0 + t * vmap.cutoff(z)
    return s**n + s ** (n - 1) * t * np.sum(z * grad, axis=-1)


def ddet_dt_at_zero(vmap, z):
    """``d/dt (1 / det Jac Phi_t(z))`` at ``t = 0``."""
    z = np.asarray(z, dtype=float)
    grad = vmap.cutoff.gradient(z)
    if vmap.kind == "translate":
        return -grad[..., vmap.axis]
    n = z.shape[-1]
    return -(n * vmap.cutoff(z) + np.sum(z * grad, axis=-1))


def resample(u, points):
    """Multilinear interpolation of nodal ``u`` at ``points``."""
    grid = u.grid
    interp = RegularGridInterpolator(grid.axes, u.values, method="linear", bounds_error=False, fill_value=None)
    if not np.all(grid.contains(points)):
        raise DomainRangeError("resampling point outside Omega")
    return interp(points.reshape(-1, grid.ndim)).reshape(points.shape[:-1])


@dataclass
class StationarityResult:
    slope: float
    samples: list
    odd_quotients: list

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "energy"])
            for t, e in self.samples:
                w.writerow([repr(float(t)), repr(float(e))])


def stationarity_check(u, vmap, steps, g, geo, eps_w=None, oversample=1):
    """Slope of ``t -> I(u o Phi_t)`` at ``t = 0``.

    For each ``t`` in ``steps`` the energy change ``I(u o Phi_t) - I(u)`` is
    evaluated at ``+t`` and ``-t`` with the right-hand side ``g`` frozen.
    Multilinear resampling makes ``I`` smooth on each side of ``t = 0`` but
    not across it, so the odd quotients ``(I(t) - I(-t)) / 2t`` carry every
    power of ``t``.  They are fitted by a polynomial of degree
    ``min(len(steps) - 1, 3)`` whose constant term is the slope.

    Parameters
    ----------
    u : ScalarField
        Converged solution.
    vmap : VariationMap
    steps : sequence of float
        Positive step sizes; each is used with both signs.
    g : ScalarField or ndarray
        Frozen right-hand side on ``u.grid``.
    geo : GrushinGeometry
    eps_w : float, optional
    oversample : int
        Evaluate the energy on ``u.grid.refined(oversample)``.  With 1 the
        energy is the one the solver minimized, so the slope only measures
        the solver residual.  Larger values approximate the continuum energy
        of the interpolant and expose the discretization error.

    Returns
    -------
    StationarityResult
        ``slope``, the ``(t, I)`` samples sorted by ``t`` and the quotients.
    """
    grid = u.grid
    steps = sorted({abs(float(t)) for t in steps if t != 0}, reverse=True)
    if not steps:
        raise ValueError("need at least one nonzero step")
    gv = g.values if isinstance(g, ScalarField) else np.asarray(g, dtype=float)
    if oversample > 1:
        fine = grid.refined(oversample)
        pts = fine.points
        base = resample(u, pts)
        gv = resample(ScalarField(grid, gv), pts)
    else:
        fine, pts, base = grid, grid.points, u.values
    e0 = energy(base, gv, geo, grid=fine, eps_w=eps_w)
    samples, quotients = [(0.0, e0)], []
    for t in steps:
        diffs = []
        for s in (t, -t):
            ut = resample(u, apply_map(vmap, s, pts))
            de = energy_difference(base, ut - base, 1.0, gv, geo, grid=fine, eps_w=eps_w)
            samples.append((s, e0 + de))
            diffs.append(de)
        quotients.append((diffs[0] - diffs[1]) / (2 * t))
    deg = min(len(steps) - 1, 3)
    A = np.vander(np.array(steps), deg + 1, increasing=True)
    slope = float(np.linalg.lstsq(A, np.array(quotients), rcond=None)[0][0])
    samples.sort()
    return StationarityResult(slope, samples, quotients)


def normal_alignment(cutoff, D):
    """Mean cosine similarity between the nodal ``-grad phi`` and the outward
    normal over the face nodes of ``D`` (edges and corners excluded)."""
    grid = D.grid
    G = euclidean_gradient(cutoff(grid.points), grid)
    cos = []
    for face in D.faces:
        nu = outward_normal(face)
        s = list(face.slices)
        for k in range(grid.ndim):
            if k != face.axis:
                a, b = D.lo[k], D.hi[k]
                s[k] = slice(a + 1, b)
        s = tuple(s)
        v = -G[(slice(None),) + s]
        v = np.moveaxis(v, 0, -1).reshape(-1, grid.ndim)
        norms = np.linalg.norm(v, axis=-1)
        ok = norms > 0
        cos.extend((v[ok] @ nu) / norms[ok])
    return float(np.mean(cos)) if cos else float("nan")
