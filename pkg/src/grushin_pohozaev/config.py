"""JSON run configuration.

Example::

    {
      "geometry": {"N": 1, "l": 2, "gamma": 1.0, "p": 2},
      "domain": {"bounds": [-1, 1], "resolution": 17},
      "nonlinearity": "1",
      "subdomain": {"lower": [0.25, -0.5, -0.25], "upper": [0.75, 0.25, 0.5]},
      "solver": {"tol_grad": 1e-6},
      "threshold": 0.1,
      "study": {"levels": [9, 17, 33]}
    }

``geometry`` (all four entries), ``domain`` and ``nonlinearity`` are
required; nothing physical has a default.  Errors carry the line of the
offending key when it can be located.
"""

import json
import re
from dataclasses import dataclass, field

from .exceptions import ConfigError, NonlinearityParseError
from .nonlinearity import parse_nonlinearity
from .solver import SolverConfig
from .validation import check_bounds, check_geometry, check_resolution

__all__ = ["RunConfig", "load_config", "parse_config"]

_TOP = {"geometry", "domain", "nonlinearity", "subdomain", "solver", "threshold", "study"}
_SOLVER = {"tol_grad", "max_iter", "eps_w", "picard_max", "picard_tol", "init", "seed"}
_STUDY = {
    "levels", "identity", "index", "radii", "h", "delta", "steps", "oversample",
    "variation", "axis", "perturbation",
}


@dataclass
class RunConfig:
    geometry: object
    bounds: tuple
    resolution: tuple
    nonlinearity: object
    nonlinearity_text: str
    solver: SolverConfig
    subdomain: tuple = None
    threshold: float = 0.1
    study: dict = field(default_factory=dict)

    def levels(self, count=None):
        """Refinement levels: ``study.levels`` unless ``count`` is given, in
        which case the base resolution is doubled ``count - 1`` times."""
        if count is None and "levels" in self.study:
            return [int(m) for m in self.study["levels"]]
        count = 3 if count is None else int(count)
        if count < 1:
            raise ConfigError("need at least one refinement level")
        m0 = self.resolution[0]
        return [(m0 - 1) * 2**k + 1 for k in range(count)]


def _line_of(text, key):
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _require(obj, key, where, text):
    if not isinstance(obj, dict) or key not in obj:
        raise ConfigError(f"missing required entry {where}{key}", _line_of(text, where.rstrip(".")) if where else None)
    return obj[key]


def _unknown(obj, allowed, where, text):
    for k in obj:
        if k not in allowed:
            raise ConfigError(f"unknown entry {where}{k}", _line_of(text, k))


def parse_config(text):
    """Parse and validate a JSON document into a :class:`RunConfig`."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", exc.lineno) from None
    if not isinstance(doc, dict):
        raise ConfigError("the configuration must be a JSON object", 1)
    _unknown(doc, _TOP, "", text)

    g = _require(doc, "geometry", "", text)
    vals = [_require(g, k, "geometry.", text) for k in ("N", "l", "gamma", "p")]
    try:
        geo = check_geometry(*vals)
    except ValueError as exc:
        raise ConfigError(f"geometry: {exc}", _line_of(text, "geometry")) from None

    dom = _require(doc, "domain", "", text)
    try:
        bounds = check_bounds(_require(dom, "bounds", "domain.", text), geo.ndim)
    except ValueError as exc:
        raise ConfigError(f"domain.bounds: {exc}", _line_of(text, "bounds")) from None
    try:
        resolution = check_resolution(_require(dom, "resolution", "domain.", text), geo.ndim)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"domain.resolution: {exc}", _line_of(text, "resolution")) from None

    nl_text = _require(doc, "nonlinearity", "", text)
    if not isinstance(nl_text, str):
        raise ConfigError("nonlinearity must be a string", _line_of(text, "nonlinearity"))
    try:
        nl = parse_nonlinearity(nl_text, geo.N, geo.l)
    except NonlinearityParseError as exc:
        raise ConfigError(f"nonlinearity: {exc}", _line_of(text, "nonlinearity")) from None

    s = doc.get("solver", {})
    _unknown(s, _SOLVER, "solver.", text)
    try:
        solver = SolverConfig(**s)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"solver: {exc}", _line_of(text, "solver")) from None

    sub = doc.get("subdomain")
    subdomain = None
    if sub is not None:
        lo = _require(sub, "lower", "subdomain.", text)
        hi = _require(sub, "upper", "subdomain.", text)
        if len(lo) != geo.ndim or len(hi) != geo.ndim:
            raise ConfigError(f"subdomain corners need {geo.ndim} entries", _line_of(text, "subdomain"))
        subdomain = (tuple(float(v) for v in lo), tuple(float(v) for v in hi))

    threshold = doc.get("threshold", 0.1)
    if not isinstance(threshold, (int, float)) or threshold < 0:
        raise ConfigError("threshold must be a nonnegative number", _line_of(text, "threshold"))

    study = doc.get("study", {})
    _unknown(study, _STUDY, "study.", text)
    return RunConfig(geo, bounds, resolution, nl, nl_text, solver, subdomain, float(threshold), dict(study))


def load_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text)
