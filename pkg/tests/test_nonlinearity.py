import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from grushin_pohozaev.exceptions import NonlinearityParseError
from grushin_pohozaev.nonlinearity import eval_dF_dz, eval_F, eval_f, parse_nonlinearity

CATALOG = [
    "1",
    "-2.5",
    "abspow(u,3)",
    "-0.7*abspow(u,1.5)",
    "x1*u + 2",
    "x1^2*y2 - 3*y1*u",
    "(x1 + y1)^2*u + 0.5*abspow(u,2)",
    "x1*y1*y2^2 + u",
    "2*bump(0.5)",
    "x1*bump(0.75)*u",
]


@pytest.fixture
def samples():
    rng = np.random.default_rng(0)
    return rng.uniform(-1, 1, size=(1000, 3)), rng.uniform(-2, 2, size=1000)


def test_constant():
    nl = parse_nonlinearity("1", 1, 2)
    z = np.array([0.3, -0.2, 0.1])
    assert eval_f(nl, z, 0.7) == 1.0
    assert eval_F(nl, z, 0.7) == pytest.approx(0.7)
    np.testing.assert_array_equal(eval_dF_dz(nl, z, 0.7), 0.0)
    assert not nl.depends_on_u


def test_abspow():
    nl = parse_nonlinearity("abspow(u,3)", 1, 2)
    z = np.zeros(3)
    for u in (-1.5, 0.0, 2.0):
        assert eval_f(nl, z, u) == pytest.approx(abs(u) ** 2 * u)
        assert eval_F(nl, z, u) == pytest.approx(abs(u) ** 4 / 4)


def test_separable_example():
    nl = parse_nonlinearity("x1*u + 2", 1, 2)
    z = np.array([0.3, 0.1, 0.2])
    assert eval_f(nl, z, 2.0) == pytest.approx(0.3 * 2 + 2)
    assert eval_F(nl, z, 2.0) == pytest.approx(0.3 * 4 / 2 + 4)
    np.testing.assert_allclose(eval_dF_dz(nl, z, 2.0), [2.0, 0, 0], atol=1e-15)
    nl = parse_nonlinearity("x1*u", 1, 2)
    np.testing.assert_allclose(eval_dF_dz(nl, z, -3.0), [4.5, 0, 0], atol=1e-15)


@pytest.mark.parametrize("text", CATALOG)
def test_F_vanishes_at_zero(text, samples):
    nl = parse_nonlinearity(text, 1, 2)
    z, _ = samples
    np.testing.assert_array_equal(nl.F(z, np.zeros(len(z))), 0.0)


@pytest.mark.parametrize("text", CATALOG)
def test_F_derivative_in_u(text, samples):
    nl = parse_nonlinearity(text, 1, 2)
    z, u = samples
    eps = 1e-5
    fd = (nl.F(z, u + eps) - nl.F(z, u - eps)) / (2 * eps)
    f = nl.f(z, u)
    np.testing.assert_allclose(fd, f, rtol=1e-6, atol=1e-6 * np.max(np.abs(f)))


@pytest.mark.parametrize("text", CATALOG)
def test_dF_dz_matches_differences(text, samples):
    nl = parse_nonlinearity(text, 1, 2)
    z, u = samples
    eps = 1e-5
    g = nl.dF_dz(z, u)
    for k in range(3):
        e = np.zeros(3)
        e[k] = eps
        fd = (nl.F(z + e, u) - nl.F(z - e, u)) / (2 * eps)
        scale = max(np.max(np.abs(g[:, k])), 1.0)
        np.testing.assert_allclose(fd, g[:, k], rtol=1e-6, atol=1e-6 * scale)


@pytest.mark.parametrize("text", CATALOG)
def test_chain_rule_along_curve(text):
    nl = parse_nonlinearity(text, 1, 2)
    z = np.array([0.2, -0.4, 0.3])
    s = np.linspace(-1, 1, 41)
    u, du = np.sin(2 * s) + 0.3, 2 * np.cos(2 * s)
    eps = 1e-6
    fd = (nl.F(z, np.sin(2 * (s + eps)) + 0.3) - nl.F(z, np.sin(2 * (s - eps)) + 0.3)) / (2 * eps)
    np.testing.assert_allclose(fd, nl.f(z, u) * du, rtol=1e-6, atol=1e-8)


@pytest.mark.parametrize("text", CATALOG)
def test_round_trip(text):
    nl = parse_nonlinearity(text, 1, 2)
    again = parse_nonlinearity(nl.to_string(), 1, 2)
    assert again == nl
    rng = np.random.default_rng(1)
    z, u = rng.uniform(-1, 1, (50, 3)), rng.uniform(-2, 2, 50)
    np.testing.assert_allclose(again.F(z, u), nl.F(z, u), rtol=1e-14, atol=1e-14)


def test_zero_times_u_drops_dependence():
    nl = parse_nonlinearity("u*0 + 1", 1, 2)
    assert not nl.depends_on_u
    assert nl == parse_nonlinearity("1", 1, 2)


@pytest.mark.parametrize(
    "text, token",
    [
        ("1 $ 2", "$"),
        ("z1", "z1"),
        ("y3", "y3"),
        ("abspow(u,0)", "0"),
        ("abspow(u,-1)", "1"),
        ("x1^5", "x1"),
        ("x1*u*u", "*"),
        ("3*(u", ""),
    ],
)
def test_parse_errors_name_token(text, token):
    with pytest.raises(NonlinearityParseError) as info:
        parse_nonlinearity(text, 1, 2)
    assert info.value.token == token
    assert "position" in str(info.value)


@settings(max_examples=60, deadline=None)
@given(
    coef=st.lists(st.floats(-5, 5, allow_nan=False), min_size=3, max_size=3),
    q=st.floats(0.5, 4.0),
    degs=st.lists(st.integers(0, 2), min_size=2, max_size=2),
)
def test_generated_round_trip(coef, q, degs):
    a, b, c = (repr(float(x)) for x in coef)
    text = f"{a}*x1^{degs[0]}*y1^{degs[1]}*u + ({b})*abspow(u,{q!r}) + ({c})"
    nl = parse_nonlinearity(text, 1, 2)
    assert parse_nonlinearity(nl.to_string(), 1, 2) == nl
    z, u = np.array([0.3, -0.6, 0.2]), -1.3
    ref = float(coef[0]) * 0.3 ** degs[0] * (-0.6) ** degs[1] * u + coef[1] * abs(u) ** (q - 1) * u + coef[2]
    assert nl.f(z, u) == pytest.approx(ref, rel=1e-12, abs=1e-12)
