import csv

import numpy as np
import pytest

from grushin_pohozaev.exceptions import UndefinedRatioError
from grushin_pohozaev.fields import ScalarField, grushin_gradient, p_sublaplacian
from grushin_pohozaev.geometry import Grid, GrushinGeometry
from grushin_pohozaev.nonlinearity import parse_nonlinearity
from grushin_pohozaev.solver import (
    SolverConfig,
    empirical_poincare_constant,
    energy,
    energy_gradient,
    inner,
    minimize,
    oracle_torsion,
    picard_solve,
    poincare_ratio,
    random_dirichlet_field,
)


@pytest.fixture
def grid():
    return Grid.uniform(-1.0, 1.0, 7, 3)


def test_config_rejects_bad_tolerances():
    with pytest.raises(ValueError):
        SolverConfig(tol_grad=0.0)
    with pytest.raises(ValueError):
        SolverConfig(picard_tol=-1.0)
    with pytest.raises(ValueError):
        SolverConfig(init="ones")


def test_default_tolerance_scales_with_nodes(grid):
    assert SolverConfig().resolved_tol(grid) == pytest.approx(1e-8 * np.sqrt(grid.node_count))


def test_energy_trivial_cases(grid):
    geo = GrushinGeometry(1, 2, 1.0, 3.0)
    zero = ScalarField.zeros(grid)
    assert energy(zero, np.ones(grid.shape), geo) == 0.0
    rng = np.random.default_rng(0)
    for _ in range(5):
        u = random_dirichlet_field(grid, rng)
        assert energy(u, np.zeros(grid.shape), geo) >= 0.0
    np.testing.assert_array_equal(energy_gradient(zero, np.zeros(grid.shape), geo).values, 0.0)


def test_energy_of_torsion_oracle_converges():
    # |grad u|^2 = r^2/9 and u = (1 - r^2)/6 on [-1/2, 1/2]^3 where int r^2 = 1/4
    geo = GrushinGeometry(1, 2, 0.0, 2.0)
    orc = oracle_torsion(geo, 1.0)
    exact = 0.5 * 0.25 / 9 - (1 - 0.25) / 6
    errs = []
    for m in (5, 9, 17):
        grid = Grid.uniform(-0.5, 0.5, m, 3)
        errs.append(abs(energy(orc(grid.points), np.ones(grid.shape), geo, grid=grid) - exact))
    order = np.polyfit(np.log([1 / 4, 1 / 8, 1 / 16]), np.log(errs), 1)[0]
    assert order >= 1.9


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0, 4.0])
@pytest.mark.parametrize("gamma", [0.0, 0.5, 1.0, 2.0])
def test_gradient_matches_finite_differences(p, gamma, grid):
    geo = GrushinGeometry(1, 2, gamma, p)
    rng = np.random.default_rng(int(10 * p + gamma))
    eps = 1e-5
    for _ in range(3):
        u = random_dirichlet_field(grid, rng)
        v = random_dirichlet_field(grid, rng)
        g = rng.normal(size=grid.shape)
        fd = (energy(u.values + eps * v.values, g, geo, grid) - energy(u.values - eps * v.values, g, geo, grid)) / (2 * eps)
        an = inner(energy_gradient(u, g, geo).values, v.values, grid)
        assert abs(fd - an) <= 1e-5 * abs(an)


def test_zero_forcing_stops_immediately(grid):
    geo = GrushinGeometry(1, 2, 1.0, 3.0)
    u, rep = minimize(np.zeros(grid.shape), geo, grid)
    assert rep.converged and rep.iterations <= 1
    np.testing.assert_array_equal(u.values, 0.0)


def test_energy_non_increasing_and_trace_csv(grid, tmp_path):
    geo = GrushinGeometry(1, 2, 1.0, 3.0)
    u, rep = minimize(np.ones(grid.shape), geo, grid)
    assert rep.converged
    E = [row[1] for row in rep.trace]
    assert all(b <= a for a, b in zip(E, E[1:]))
    assert rep.grad_norm <= SolverConfig().resolved_tol(grid)
    path = tmp_path / "trace.csv"
    rep.to_csv(path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["iteration", "energy", "grad_norm", "step"]
    assert len(rows) == len(rep.trace) + 1


def test_non_convergence_reported(grid):
    geo = GrushinGeometry(1, 2, 1.0, 3.0)
    _, rep = minimize(np.ones(grid.shape), geo, grid, SolverConfig(max_iter=2))
    assert not rep.converged
    assert rep.iterations == 2


@pytest.mark.parametrize("p, gamma", [(2.0, 1.0), (3.0, 0.5), (1.5, 0.0)])
def test_discrete_weak_form(p, gamma):
    grid = Grid.uniform(-1.0, 1.0, 9, 3)
    geo = GrushinGeometry(1, 2, gamma, p)
    g = np.ones(grid.shape)
    cfg = SolverConfig()
    u, rep = minimize(g, geo, grid, cfg)
    assert rep.converged
    rng = np.random.default_rng(7)
    r = energy_gradient(u, g, geo).values
    for _ in range(20):
        phi = random_dirichlet_field(grid, rng).values
        # the weak-form defect in direction phi is <r, phi>_omega
        assert abs(inner(r, phi, grid)) <= cfg.resolved_tol(grid) * np.sqrt(inner(phi, phi, grid))


def test_initialization_independence():
    grid = Grid.uniform(-1.0, 1.0, 9, 3)
    for p in (2.0, 3.0):
        geo = GrushinGeometry(1, 2, 1.0, p)
        a, _ = minimize(np.ones(grid.shape), geo, grid)
        b, _ = minimize(np.ones(grid.shape), geo, grid, SolverConfig(init="random", seed=5))
        assert np.max(np.abs(a.values - b.values)) <= 10 * SolverConfig().resolved_tol(grid)


def test_oracle_solve_p3_converges():
    geo = GrushinGeometry(1, 2, 0.0, 3.0)
    orc = oracle_torsion(geo, 1.0)
    errs = []
    for m in (5, 9, 17):
        grid = Grid.uniform(-0.5, 0.5, m, 3)
        ex = orc(grid.points)
        u, rep = minimize(np.ones(grid.shape), geo, grid, boundary=ex)
        assert rep.converged
        errs.append(np.max(np.abs(u.values - ex)))
    assert errs[0] > errs[1] > errs[2]


def test_picard_u_independent_single_call(grid):
    geo = GrushinGeometry(1, 2, 1.0, 2.0)
    u, trace, reports = picard_solve(parse_nonlinearity("1", 1, 2), geo, grid)
    assert len(trace) == 1 and len(reports) == 1
    v, _ = minimize(np.ones(grid.shape), geo, grid)
    np.testing.assert_array_equal(u.values, v.values)
    w, _, _ = picard_solve(parse_nonlinearity("u*0 + 1", 1, 2), geo, grid)
    np.testing.assert_array_equal(w.values, v.values)


def test_picard_damped_contraction(grid):
    geo = GrushinGeometry(1, 2, 1.0, 2.0)
    nl = parse_nonlinearity("-abspow(u,1) + 1", 1, 2)
    u, trace, reports = picard_solve(nl, geo, grid)
    assert len(trace) > 2
    assert all(b < a for a, b in zip(trace, trace[1:]))
    assert trace[-1] <= SolverConfig().picard_tol


def test_poincare_ratio(grid):
    geo = GrushinGeometry(1, 2, 1.0, 3.0)
    rng = np.random.default_rng(2)
    u = random_dirichlet_field(grid, rng)
    r = poincare_ratio(u, geo)
    assert np.isfinite(r) and r > 0
    assert poincare_ratio(ScalarField(grid, -2.5 * u.values, dirichlet=True), geo) == pytest.approx(r, rel=1e-12)
    with pytest.raises(UndefinedRatioError):
        poincare_ratio(ScalarField.zeros(grid), geo)


def test_empirical_constant_shrinks_with_domain():
    geo = GrushinGeometry(1, 2, 0.0, 2.0)
    big = empirical_poincare_constant(geo, Grid.uniform(-1, 1, 9, 3))
    small = empirical_poincare_constant(geo, Grid.uniform(-0.5, 0.5, 9, 3))
    assert small < big


def test_oracle_torsion():
    geo = GrushinGeometry(1, 2, 0.0, 2.0)
    orc = oracle_torsion(geo, 1.5)
    z = np.array([[1.5, 0, 0], [0.3, -0.4, 0.2]])
    np.testing.assert_allclose(orc(z), (1.5**2 - np.sum(z**2, axis=-1)) / 6, atol=1e-15)
    with pytest.raises(ValueError):
        oracle_torsion(GrushinGeometry(1, 2, 1.0, 2.0), 1.0)


def test_oracle_torsion_substitution():
    geo = GrushinGeometry(1, 2, 0.0, 3.0)
    orc = oracle_torsion(geo, 1.0)
    errs = []
    for m in (9, 17, 33):
        grid = Grid.uniform(-0.5, 0.5, m, 3)
        lap = p_sublaplacian(ScalarField(grid, orc(grid.points)), geo, eps_w=0.0).values
        inner_nodes = np.linalg.norm(grid.points, axis=-1) >= 0.2
        errs.append(np.max(np.abs(lap + 1.0)[inner_nodes & grid.interior_mask]))
    assert errs[0] > errs[1] > errs[2]


def test_gradient_of_solution_is_finite(grid):
    geo = GrushinGeometry(1, 2, 1.0, 1.5)
    u, rep = minimize(np.ones(grid.shape), geo, grid)
    assert np.all(np.isfinite(grushin_gradient(u, geo).values))
