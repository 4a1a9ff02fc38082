"""Term-by-term assembly of the Pohozaev identities on boxes.

Every report lists its integral terms in reading order, ``lhs.t1, lhs.t2,
...`` then ``rhs.t1, ...``; :data:`TERM_LABELS` gives the integrand of each.
Gradients come from :func:`~grushin_pohozaev.fields.grushin_gradient`
(centered on faces of an interior sub-box, one-sided second order on the
grid boundary).  Surface terms use the Euclidean measure ``dS``; all
weights live inside the integrands.
"""

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .exceptions import SingularSlabError
from .fields import euclidean_gradient, grushin_gradient
from .geometry import SubBox, grushin_normal, outward_normal
from .quadrature import face_integral, surface_integral, volume_integral

__all__ = [
    "IdentityReport",
    "TERM_LABELS",
    "translating_identity_x",
    "translating_identity_y",
    "scaling_identity_local",
    "scaling_identity_global",
    "check_singular_slab",
]

TERM_LABELS = {
    "translate-x": {
        "lhs.t1": "(1/p) oint |grad_g u|^p nu_x^i dS",
        "lhs.t2": "-oint |grad_g u|^(p-2) du/dx_i <grad_g u, nu_g> dS",
        "lhs.t3": "-int_D |grad_g u|^(p-2) gamma |x|^(2(gamma-1)) x_i |grad_y u|^2 dz",
        "rhs.t1": "oint F nu_x^i dS",
        "rhs.t2": "-int_D dF/dx_i dz",
    },
    "translate-y": {
        "lhs.t1": "(1/p) oint |grad_g u|^p nu_y^j dS",
        "lhs.t2": "-oint |grad_g u|^(p-2) du/dy_j <grad_g u, nu_g> dS",
        "rhs.t1": "oint F nu_y^j dS",
        "rhs.t2": "-int_D dF/dy_j dz",
    },
    "scale-local": {
        "lhs.t1": "(1-(N+l)/p) int_D f u dz",
        "lhs.t2": "(1-(N+l)/p) oint |grad_g u|^(p-2) u <grad_g u, nu_g> dS",
        "lhs.t3": "(1/p) oint |grad_g u|^p <z, nu> dS",
        "lhs.t4": "-oint |grad_g u|^(p-2) <grad u, z> <grad_g u, nu_g> dS",
        "lhs.t5": "-int_D |grad_g u|^(p-2) gamma |x|^(2 gamma) |grad_y u|^2 dz",
        "rhs.t1": "oint F <z, nu> dS",
        "rhs.t2": "-(N+l) int_D F dz",
        "rhs.t3": "-int_D <grad_z F, z> dz",
    },
    "scale-global": {
        "lhs.t1": "(1-(N+l)/p) int f u dz",
        "lhs.t2": "(1/p-1) oint_{dOmega} |grad_g u|^p <z, nu> dS",
        "lhs.t3": "-int |grad_g u|^(p-2) gamma |x|^(2 gamma) |grad_y u|^2 dz",
        "rhs.t1": "-(N+l) int F dz",
        "rhs.t2": "-int <grad_z F, z> dz",
    },
}


@dataclass
class IdentityReport:
    """Per-term values and residual of one identity on one domain."""

    kind: str
    h: tuple
    terms: dict
    lhs: float = 0.0
    rhs: float = 0.0
    residual: float = 0.0
    relative_residual: float = 0.0
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        self.lhs = float(sum(v for k, v in self.terms.items() if k.startswith("lhs.")))
        self.rhs = float(sum(v for k, v in self.terms.items() if k.startswith("rhs.")))
        self.residual = self.lhs - self.rhs
        scale = float(sum(abs(v) for v in self.terms.values()))
        self.relative_residual = abs(self.residual) / scale if scale > 0 else 0.0

    def to_dict(self):
        return {
            "kind": self.kind,
            "grid": {"h": [float(v) for v in self.h]},
            "terms": {k: float(v) for k, v in self.terms.items()},
            "lhs": self.lhs,
            "rhs": self.rhs,
            "residual": self.residual,
            "relative_residual": self.relative_residual,
            **({"extras": {k: float(v) for k, v in self.extras.items()}} if self.extras else {}),
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    def csv_header(self):
        return ["kind", "h"] + list(self.terms) + ["lhs", "rhs", "residual", "relative_residual"] + list(self.extras)

    def csv_row(self):
        return (
            [self.kind, repr(max(self.h))]
            + [repr(float(v)) for v in self.terms.values()]
            + [repr(v) for v in (self.lhs, self.rhs, self.residual, self.relative_residual)]
            + [repr(float(v)) for v in self.extras.values()]
        )

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(self.csv_header())
        w.writerow(self.csv_row())
        return buf.getvalue()


class _Fields:
    """Nodal quantities shared by all identities for one solution."""

    def __init__(self, u, nl, geo):
        grid = u.grid
        self.grid, self.geo, self.nl = grid, geo, nl
        self.u = u.values
        self.z = grid.points
        self.G = grushin_gradient(u, geo).values
        self.E = euclidean_gradient(u.values, grid)
        self.n2 = np.sum(self.G**2, axis=0)
        self.normp = self.n2 ** (geo.p / 2)
        self.a = _pow_weight(self.n2, geo.p)
        self.grad_y2 = np.sum(self.E[geo.N :] ** 2, axis=0)
        self.xnorm = geo.x_norm(self.z)
        self.f = nl.f(self.z, self.u)
        self.F = nl.F(self.z, self.u)
        self.dFz = np.moveaxis(nl.dF_dz(self.z, self.u), -1, 0)

    def face(self, face):
        """Face-restricted quantities plus the normals there."""
        s = face.slices
        z = self.z[s]
        nu = outward_normal(face)
        nug = grushin_normal(nu, z, self.geo)
        G = self.G[(slice(None),) + s]
        flux = np.sum(G * np.moveaxis(nug, -1, 0), axis=0)
        return {
            "z": z,
            "nu": nu,
            "u": self.u[s],
            "G": G,
            "E": self.E[(slice(None),) + s],
            "a": self.a[s],
            "normp": self.normp[s],
            "F": self.F[s],
            "flux": flux,
            "z_nu": z @ nu,
        }


def _pow_weight(n2, p):
    """``|xi|^(p-2)`` with the convention ``0`` where ``xi = 0`` and ``p < 2``.

    Every identity integrand multiplies this weight by a quadratic form in
    ``xi``, so the product is continuous with value 0 there.
    """
    if p == 2:
        return np.ones_like(n2)
    with np.errstate(divide="ignore"):
        return np.where(n2 > 0, n2 ** ((p - 2) / 2), 0.0)


def _h(grid):
    return tuple(grid.spacing)


def check_singular_slab(D, geo):
    """Reject ``D`` meeting ``|x| < h`` when ``0 < gamma < 1``."""
    if not 0 < geo.gamma < 1:
        return
    grid = D.grid
    hx = min(grid.spacing[: geo.N])
    xn = geo.x_norm(grid.points[D.slices])
    if np.min(xn) < hx * (1 - 1e-9):
        raise SingularSlabError(
            f"gamma={geo.gamma} < 1 makes |x|^(2(gamma-1)) singular on x = 0; "
            f"the sub-box reaches |x|={np.min(xn):.3g} < h={hx:.3g}. Choose D with "
            f"at least one grid cell of clearance from the plane x = 0."
        )


def _check_axis(axis, count, label):
    if not 0 <= axis < count:
        raise ValueError(f"{label} axis index {axis} out of range 0..{count - 1}")


def _translating_common(F, D, k, p):
    def t1(face):
        d = F.face(face)
        return d["normp"] * d["nu"][k] / p

    def t2(face):
        d = F.face(face)
        return -d["a"] * d["E"][k] * d["flux"]

    def r1(face):
        d = F.face(face)
        return d["F"] * d["nu"][k]

    return {
        "lhs.t1": surface_integral(t1, D),
        "lhs.t2": surface_integral(t2, D),
        "rhs.t1": surface_integral(r1, D),
        "rhs.t2": -volume_integral(F.dFz[k], D),
    }


def translating_identity_x(u, nl, geo, D, i):
    """Translating identity along ``x_i`` (``i`` is 0-based, ``i < N``)."""
    _check_axis(i, geo.N, "x")
    check_singular_slab(D, geo)
    F = _Fields(u, nl, geo)
    terms = _translating_common(F, D, i, geo.p)
    if geo.gamma == 0:
        vol = 0.0
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            xw = np.where(F.xnorm > 0, F.xnorm ** (2 * (geo.gamma - 1)), 0.0)
        integrand = F.a * geo.gamma * xw * F.z[..., i] * F.grad_y2
        vol = -volume_integral(integrand, D)
    ordered = {"lhs.t1": terms["lhs.t1"], "lhs.t2": terms["lhs.t2"], "lhs.t3": vol,
               "rhs.t1": terms["rhs.t1"], "rhs.t2": terms["rhs.t2"]}
    return IdentityReport(f"translate-x({i + 1})", _h(u.grid), ordered)


def translating_identity_y(u, nl, geo, D, j):
    """Translating identity along ``y_j`` (``j`` is 0-based, ``j < l``)."""
    _check_axis(j, geo.l, "y")
    F = _Fields(u, nl, geo)
    terms = _translating_common(F, D, geo.N + j, geo.p)
    return IdentityReport(f"translate-y({j + 1})", _h(u.grid), terms)


def scaling_identity_local(u, nl, geo, D):
    """Local scaling identity on ``D`` plus the auxiliary energy identity
    ``int_D |grad_g u|^p = int_D f u + oint |grad_g u|^(p-2) u <grad_g u, nu_g>``
    reported in ``extras``."""
    F = _Fields(u, nl, geo)
    n, p = geo.ndim, geo.p
    c = 1.0 - n / p

    def boundary_u_flux(face):
        d = F.face(face)
        return d["a"] * d["u"] * d["flux"]

    def t3(face):
        d = F.face(face)
        return d["normp"] * d["z_nu"] / p

    def t4(face):
        d = F.face(face)
        zgrad = np.sum(d["E"] * np.moveaxis(d["z"], -1, 0), axis=0)
        return -d["a"] * zgrad * d["flux"]

    def r1(face):
        d = F.face(face)
        return d["F"] * d["z_nu"]

    int_fu = volume_integral(F.f * F.u, D)
    bflux = surface_integral(boundary_u_flux, D)
    z_dFz = np.sum(F.dFz * np.moveaxis(F.z, -1, 0), axis=0)
    terms = {
        "lhs.t1": c * int_fu,
        "lhs.t2": c * bflux,
        "lhs.t3": surface_integral(t3, D),
        "lhs.t4": surface_integral(t4, D),
        "lhs.t5": -volume_integral(F.a * geo.gamma * F.xnorm ** (2 * geo.gamma) * F.grad_y2, D)
        if geo.gamma != 0
        else 0.0,
        "rhs.t1": surface_integral(r1, D),
        "rhs.t2": -n * volume_integral(F.F, D),
        "rhs.t3": -volume_integral(z_dFz, D),
    }
    aux_lhs = volume_integral(F.normp, D)
    aux_rhs = int_fu + bflux
    aux_scale = abs(aux_lhs) + abs(int_fu) + abs(bflux)
    extras = {
        "aux.lhs": aux_lhs,
        "aux.rhs": aux_rhs,
        "aux.residual": aux_lhs - aux_rhs,
        "aux.relative_residual": abs(aux_lhs - aux_rhs) / aux_scale if aux_scale > 0 else 0.0,
    }
    return IdentityReport("scale-local", _h(u.grid), terms, extras=extras)


def boundary_traces(u, geo):
    """Constructed gradient traces on every face of the grid boundary.

    On ``dOmega`` the solution vanishes, so the trace is built as
    ``(du/dnu) nu`` with ``du/dnu`` from the second-order one-sided stencil
    along the face normal.  Returns ``{face name: (face, grad trace)}``.
    """
    grid = u.grid
    W = SubBox.whole(grid)
    E = euclidean_gradient(u.values, grid)
    out = {}
    for face in W.faces:
        nu = outward_normal(face)
        dnu = E[face.axis][face.slices] * face.side
        trace = dnu[None, ...] * nu.reshape((-1,) + (1,) * dnu.ndim)
        out[face.name] = (face, trace)
    return out


def scaling_identity_global(u, nl, geo):
    """Global scaling identity on the whole grid box.

    ``extras`` holds both sides of the boundary collapse
    ``oint |grad_g u|^(p-2) <grad u, z> <grad_g u, nu_g> = oint |grad_g u|^p <z, nu>``
    evaluated on the constructed traces.
    """
    grid = u.grid
    W = SubBox.whole(grid)
    F = _Fields(u, nl, geo)
    n, p = geo.ndim, geo.p
    traces = boundary_traces(u, geo)
    pts = grid.points
    collapse_l, collapse_r = [], []
    for name, (face, Et) in traces.items():
        z = pts[face.slices]
        zc = np.moveaxis(z, -1, 0)
        nu = outward_normal(face)
        nug = np.moveaxis(grushin_normal(nu, z, geo), -1, 0)
        w = geo.weight(z)
        Gt = Et.copy()
        Gt[geo.N :] *= w
        n2 = np.sum(Gt**2, axis=0)
        a = _pow_weight(n2, p)
        flux = np.sum(Gt * nug, axis=0)
        zgrad = np.sum(Et * zc, axis=0)
        collapse_l.append(face_integral(a * zgrad * flux, face))
        collapse_r.append(face_integral(n2 ** (p / 2) * (z @ nu), face))
    collapse_lhs = float(np.sum(collapse_l))
    collapse_rhs = float(np.sum(collapse_r))
    z_dFz = np.sum(F.dFz * np.moveaxis(F.z, -1, 0), axis=0)
    terms = {
        "lhs.t1": (1.0 - n / p) * volume_integral(F.f * F.u, W),
        "lhs.t2": (1.0 / p - 1.0) * collapse_rhs,
        "lhs.t3": -volume_integral(F.a * geo.gamma * F.xnorm ** (2 * geo.gamma) * F.grad_y2, W)
        if geo.gamma != 0
        else 0.0,
        "rhs.t1": -n * volume_integral(F.F, W),
        "rhs.t2": -volume_integral(z_dFz, W),
    }
    extras = {
        "collapse.lhs": collapse_lhs,
        "collapse.rhs": collapse_rhs,
        "collapse.residual": collapse_lhs - collapse_rhs,
    }
    return IdentityReport("scale-global", _h(grid), terms, extras=extras)


def whole_space_residual(report):
    """Residual of the whole-space identity: the global report without its
    boundary term."""
    lhs = report.lhs - report.terms["lhs.t2"]
    return lhs - report.rhs
