"""Right-hand sides ``f(z, u)`` from a closed catalog with exact antiderivatives.

Every term has the form ``a(z) * g(u)`` with ``a`` a polynomial in the
coordinates (optionally times a compactly supported bump) and
``g in {1, u, |u|^(q-1) u}``.  Because the catalog is closed, ``F(z, u)``
and its explicit-``z`` gradient are evaluated in closed form.

Grammar (ASCII)::

    EXPR   := ['+'|'-'] TERM (('+'|'-') TERM)*
    TERM   := POWER ('*' POWER)*
    POWER  := ATOM [('^'|'**') INT]
    ATOM   := NUM | COORD | 'u' | 'abspow(u,' NUM ')' | 'bump(' NUM ')'
            | '(' EXPR ')'

``COORD`` is one of ``x1..xN, y1..yl``.  ``bump(a)`` is the C^1 function
``prod_k (1 - (z_k/a)^2)^2`` on ``|z_k| < a`` (zero elsewhere), used for
compactly supported forcing.
"""

import re
from dataclasses import dataclass

import numpy as np

from .exceptions import NonlinearityParseError

__all__ = [
    "Nonlinearity",
    "Term",
    "parse_nonlinearity",
    "eval_f",
    "eval_F",
    "eval_dF_dz",
]

MAX_DEGREE = 4


# ---------------------------------------------------------------- polynomials

def _poly_clean(poly):
    return {e: c for e, c in poly.items() if c != 0.0}


def _poly_add(a, b):
    out = dict(a)
    for e, c in b.items():
        out[e] = out.get(e, 0.0) + c
    return _poly_clean(out)


def _poly_mul(a, b):
    out = {}
    for ea, ca in a.items():
        for eb, cb in b.items():
            e = tuple(i + j for i, j in zip(ea, eb))
            out[e] = out.get(e, 0.0) + ca * cb
    return _poly_clean(out)


def _poly_eval(poly, z):
    z = np.asarray(z, dtype=float)
    out = np.zeros(z.shape[:-1])
    for e, c in poly.items():
        term = np.full(z.shape[:-1], c)
        for k, ek in enumerate(e):
            if ek:
                term = term * z[..., k] ** ek
        out = out + term
    return out


def _poly_diff(poly, k):
    out = {}
    for e, c in poly.items():
        if e[k] > 0:
            e2 = list(e)
            e2[k] -= 1
            out[tuple(e2)] = out.get(tuple(e2), 0.0) + c * e[k]
    return _poly_clean(out)


def _poly_degree(poly):
    return max((sum(e) for e in poly), default=0)


# ------------------------------------------------------------------- bump

def _bump(z, a):
    z = np.asarray(z, dtype=float)
    s = 1.0 - (z / a) ** 2
    inside = np.all(s > 0, axis=-1)
    return np.where(inside, np.prod(np.clip(s, 0.0, None) ** 2, axis=-1), 0.0)


def _bump_grad(z, a):
    z = np.asarray(z, dtype=float)
    s = np.clip(1.0 - (z / a) ** 2, 0.0, None)
    inside = np.all(s > 0, axis=-1)
    n = z.shape[-1]
    out = np.zeros(z.shape)
    for k in range(n):
        rest = np.prod(np.delete(s, k, axis=-1) ** 2, axis=-1)
        dk = 2.0 * s[..., k] * (-2.0 * z[..., k] / a**2) * rest
        out[..., k] = np.where(inside, dk, 0.0)
    return out


# ------------------------------------------------------------------- terms

@dataclass(frozen=True)
class Term:
    """``poly(z) * [bump(z)] * g(u)``.

    ``kind`` is ``"one"``, ``"u"`` or ``"abspow"`` (with exponent ``q``).
    ``poly`` is a tuple of ``(exponents, coefficient)`` pairs.
    """

    poly: tuple
    kind: str = "one"
    q: float = 1.0
    bump: float = None

    @property
    def key(self):
        return (self.kind, self.q if self.kind == "abspow" else None, self.bump)

    def poly_dict(self):
        return dict(self.poly)

    def a(self, z):
        val = _poly_eval(self.poly_dict(), z)
        if self.bump is not None:
            val = val * _bump(z, self.bump)
        return val

    def grad_a(self, z):
        z = np.asarray(z, dtype=float)
        poly = self.poly_dict()
        n = z.shape[-1]
        grad = np.stack([_poly_eval(_poly_diff(poly, k), z) for k in range(n)], axis=-1)
        if self.bump is not None:
            b = _bump(z, self.bump)[..., None]
            grad = grad * b + _poly_eval(poly, z)[..., None] * _bump_grad(z, self.bump)
        return grad

    def g(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "one":
            return np.ones_like(u)
        if self.kind == "u":
            return u
        return np.abs(u) ** (self.q - 1.0) * u

    def G(self, u):
        """Antiderivative of ``g`` vanishing at 0."""
        u = np.asarray(u, dtype=float)
        if self.kind == "one":
            return u
        if self.kind == "u":
            return 0.5 * u * u
        return np.abs(u) ** (self.q + 1.0) / (self.q + 1.0)


def _fmt_num(c):
    r = repr(float(c))
    return f"({r})" if r.startswith("-") else r


def _fmt_poly(poly, names):
    parts = []
    for e, c in sorted(poly.items()):
        factors = [_fmt_num(c)]
        for k, ek in enumerate(e):
            if ek == 1:
                factors.append(names[k])
            elif ek > 1:
                factors.append(f"{names[k]}^{ek}")
        parts.append("*".join(factors))
    return "(" + " + ".join(parts) + ")"


class Nonlinearity:
    """Parsed right-hand side ``f(z, u) = sum_k a_k(z) g_k(u)``.

    Instances are immutable; evaluation is vectorized over leading axes of
    ``z`` (last axis = coordinates) and ``u``.
    """

    def __init__(self, terms, N, l):
        self.N = int(N)
        self.l = int(l)
        merged = {}
        for t in terms:
            key = t.key
            merged[key] = _poly_add(merged.get(key, {}), t.poly_dict())
        out = []
        for (kind, q, bump), poly in sorted(
            merged.items(), key=lambda kv: (kv[0][0], kv[0][1] or 0.0, kv[0][2] or 0.0)
        ):
            if poly:
                out.append(Term(tuple(sorted(poly.items())), kind, q if q is not None else 1.0, bump))
        self.terms = tuple(out)

    @property
    def ndim(self):
        return self.N + self.l

    @property
    def names(self):
        return [f"x{i + 1}" for i in range(self.N)] + [f"y{j + 1}" for j in range(self.l)]

    @property
    def depends_on_u(self):
        return any(t.kind != "one" for t in self.terms)

    @property
    def is_zero(self):
        return not self.terms

    def f(self, z, u):
        z = np.asarray(z, dtype=float)
        out = np.zeros(np.broadcast_shapes(z.shape[:-1], np.shape(u)))
        for t in self.terms:
            out = out + t.a(z) * t.g(u)
        return out

    def F(self, z, u):
        z = np.asarray(z, dtype=float)
        out = np.zeros(np.broadcast_shapes(z.shape[:-1], np.shape(u)))
        for t in self.terms:
            out = out + t.a(z) * t.G(u)
        return out

    def dF_dz(self, z, u):
        """Explicit-``z`` gradient of ``F`` with ``u`` held fixed."""
        z = np.asarray(z, dtype=float)
        shape = np.broadcast_shapes(z.shape[:-1], np.shape(u)) + (self.ndim,)
        out = np.zeros(shape)
        for t in self.terms:
            out = out + t.grad_a(z) * np.asarray(t.G(u))[..., None]
        return out

    def to_string(self):
        if not self.terms:
            return "0"
        parts = []
        for t in self.terms:
            s = _fmt_poly(t.poly_dict(), self.names)
            if t.bump is not None:
                s += f"*bump({t.bump!r})"
            if t.kind == "u":
                s += "*u"
            elif t.kind == "abspow":
                s += f"*abspow(u,{t.q!r})"
            parts.append(s)
        return " + ".join(parts)

    def __str__(self):
        return self.to_string()

    def __repr__(self):
        return f"Nonlinearity({self.to_string()!r}, N={self.N}, l={self.l})"

    def __eq__(self, other):
        return (
            isinstance(other, Nonlinearity)
            and (self.N, self.l) == (other.N, other.l)
            and self.terms == other.terms
        )

    def __hash__(self):
        return hash((self.N, self.l, self.terms))


def eval_f(nl, z, u):
    return nl.f(z, u)


def eval_F(nl, z, u):
    return nl.F(z, u)


def eval_dF_dz(nl, z, u):
    return nl.dF_dz(z, u)


# ------------------------------------------------------------------ parser

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|[-+*^(),]))"
)


class _Parser:
    def __init__(self, text, N, l):
        self.text = text
        self.N, self.l = N, l
        self.n = N + l
        self.coords = {f"x{i + 1}": i for i in range(N)}
        self.coords.update({f"y{j + 1}": N + j for j in range(l)})
        self.tokens = self._tokenize(text)
        self.i = 0

    def _tokenize(self, text):
        toks, pos = [], 0
        while pos < len(text):
            if text[pos:].strip() == "":
                break
            m = _TOKEN.match(text, pos)
            if m is None or m.end() == pos:
                j = pos
                while j < len(text) and text[j].isspace():
                    j += 1
                raise NonlinearityParseError("unexpected character", j, text[j])
            kind = m.lastgroup
            toks.append((kind, m.group(kind), m.start(kind)))
            pos = m.end()
        toks.append(("end", "", len(text)))
        return toks

    def peek(self):
        return self.tokens[self.i]

    def take(self, value=None, kind=None):
        tok = self.tokens[self.i]
        if (value is not None and tok[1] != value) or (kind is not None and tok[0] != kind):
            want = value if value is not None else kind
            raise NonlinearityParseError(f"expected {want!r}", tok[2], tok[1])
        self.i += 1
        return tok

    # each value is a list of Terms (with plain dict polys during parsing)
    def const(self, c):
        return [("one", 1.0, None, {(0,) * self.n: float(c)})] if c != 0 else []

    def parse(self):
        if self.peek()[0] == "end":
            raise NonlinearityParseError("empty expression", 0, "")
        val = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise NonlinearityParseError("unexpected token", tok[2], tok[1])
        terms = [Term(tuple(sorted(p.items())), k, q, b) for k, q, b, p in val]
        return Nonlinearity(terms, self.N, self.l)

    def expr(self):
        sign = 1.0
        if self.peek()[1] in "+-" and self.peek()[0] == "op":
            sign = -1.0 if self.take()[1] == "-" else 1.0
        val = self.scale(self.term(), sign)
        while self.peek()[0] == "op" and self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            rhs = self.term()
            val = val + self.scale(rhs, -1.0 if op == "-" else 1.0)
        return val

    def scale(self, val, c):
        return [(k, q, b, {e: c * v for e, v in p.items()}) for k, q, b, p in val]

    def term(self):
        start = self.peek()
        val = self.power()
        while self.peek()[0] == "op" and self.peek()[1] == "*":
            tok = self.take()
            val = self.mul(val, self.power(), tok)
        self._check_degree(val, start)
        return val

    def power(self):
        start = self.peek()
        val = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] in ("^", "**"):
            self.take()
            tok = self.take(kind="num")
            e = float(tok[1])
            if e != int(e) or e < 0:
                raise NonlinearityParseError("exponent must be a non-negative integer", tok[2], tok[1])
            if any(k != "one" or b is not None for k, _, b, _ in val):
                raise NonlinearityParseError(
                    "powers are only allowed on polynomial factors; use abspow(u,q)",
                    start[2],
                    start[1],
                )
            out = self.const(1.0)
            for _ in range(int(e)):
                out = self.mul(out, val, tok)
            val = out
        return val

    def mul(self, a, b, tok):
        out = []
        for ka, qa, ba, pa in a:
            for kb, qb, bb, pb in b:
                if ka != "one" and kb != "one":
                    raise NonlinearityParseError(
                        "product of u-dependent factors is outside the catalog", tok[2], tok[1]
                    )
                if ba is not None and bb is not None:
                    raise NonlinearityParseError("at most one bump factor per term", tok[2], tok[1])
                kind, q = (ka, qa) if ka != "one" else (kb, qb)
                bump = ba if ba is not None else bb
                poly = _poly_mul(pa, pb)
                if poly:
                    out.append((kind, q, bump, poly))
        return out

    def _check_degree(self, val, tok):
        for _, _, _, p in val:
            if _poly_degree(p) > MAX_DEGREE:
                raise NonlinearityParseError(
                    f"polynomial degree exceeds {MAX_DEGREE}", tok[2], tok[1]
                )

    def number(self):
        tok = self.peek()
        sign = 1.0
        if tok[0] == "op" and tok[1] == "-":
            self.take()
            sign = -1.0
        tok = self.take(kind="num")
        return sign * float(tok[1]), tok

    def atom(self):
        tok = self.peek()
        kind, text, pos = tok
        if kind == "num":
            self.take()
            return self.const(float(text))
        if kind == "op" and text == "(":
            self.take()
            val = self.expr()
            self.take(")")
            return val
        if kind == "name":
            self.take()
            if text == "u":
                return [("u", 1.0, None, {(0,) * self.n: 1.0})]
            if text == "abspow":
                self.take("(")
                self.take("u")
                self.take(",")
                q, qtok = self.number()
                if q <= 0:
                    raise NonlinearityParseError("abspow exponent q must be > 0", qtok[2], qtok[1])
                self.take(")")
                return [("abspow", q, None, {(0,) * self.n: 1.0})]
            if text == "bump":
                self.take("(")
                a, atok = self.number()
                if a <= 0:
                    raise NonlinearityParseError("bump half-width must be > 0", atok[2], atok[1])
                self.take(")")
                return [("one", 1.0, a, {(0,) * self.n: 1.0})]
            if text in self.coords:
                e = [0] * self.n
                e[self.coords[text]] = 1
                return [("one", 1.0, None, {tuple(e): 1.0})]
            raise NonlinearityParseError("unknown coordinate name", pos, text)
        raise NonlinearityParseError("unexpected token", pos, text)


def parse_nonlinearity(text, N, l):
    """Parse ``text`` into a :class:`Nonlinearity` over ``x1..xN, y1..yl``.

    >>> nl = parse_nonlinearity("x1*u + 2", 1, 2)
    >>> float(nl.F([[0.5, 0.0, 0.0]], 2.0)[0])
    5.0
    """
    return _Parser(str(text), int(N), int(l)).parse()
