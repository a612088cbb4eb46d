import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from probmeshless.collocation import Design
from probmeshless.errors import ConfigurationError, DomainError, MultiplicityError, OracleError
from probmeshless.experiments import observation_grid, synthetic_observations
from probmeshless.geometry import Box
from probmeshless.problems import (_fd_setup, _newton, allen_cahn_2d, allen_cahn_boundary_points,
                                   allen_cahn_boundary_value, crude_solutions, discrete_residual, get_problem,
                                   parametric_poisson_1d, poisson_1d)


@pytest.fixture(scope="module")
def branches():
    return crude_solutions(None, 0.04, 20, seed=0)


# --------------------------------------------------------------------------- 1D Poisson

def test_poisson_exact_solution_examples():
    p = poisson_1d()
    assert p.exact_solution(np.array([[0.0]]))[0] == 0.0
    assert p.exact_solution(np.array([[0.25]]))[0] == pytest.approx(0.0253303, abs=1e-7)
    assert p.exact_solution(np.array([[0.25]]))[0] == pytest.approx((2 * np.pi) ** -2, abs=1e-15)
    assert p.solution_count == 1 and not p.is_semi_linear


def test_poisson_exact_solution_satisfies_boundary_conditions():
    p = poisson_1d()
    assert np.all(np.abs(p.exact_solution(np.array([[0.0], [1.0]]))) < 1e-10)
    q = parametric_poisson_1d()
    for theta in (0.3, 1.0, 7.0):
        assert np.all(np.abs(q.exact_solution(np.array([[0.0], [1.0]]), theta)) < 1e-10)


def second_difference(f, x, h=1e-4):
    return (f(x + h) - 2 * f(x) + f(x - h)) / h ** 2


def test_poisson_pde_residual_by_finite_differences():
    p = poisson_1d()
    x = np.random.default_rng(0).uniform(0.01, 0.99, 100)
    u = lambda s: p.exact_solution(s[:, None])  # noqa: E731
    residual = second_difference(u, x) - p.forcing(x[:, None])
    assert np.max(np.abs(residual)) < 1e-6


@pytest.mark.parametrize("theta", [0.5, 1.0, 3.0])
def test_parametric_pde_residual_by_finite_differences(theta):
    p = parametric_poisson_1d()
    x = np.random.default_rng(1).uniform(0.01, 0.99, 100)
    u = lambda s: p.exact_solution(s[:, None], theta)  # noqa: E731
    residual = theta * second_difference(u, x) - p.forcing(x[:, None], theta)
    assert np.max(np.abs(residual)) < 1e-6


@given(st.floats(0.0, 1.0))
def test_parametric_at_unit_theta_reduces_to_poisson(x):
    X = np.array([[x]])
    assert parametric_poisson_1d().exact_solution(X, 1.0)[0] == poisson_1d().exact_solution(X)[0]


@given(st.floats(0.0, 1.0))
def test_doubling_theta_halves_the_solution(x):
    X = np.array([[x]])
    q = parametric_poisson_1d()
    assert q.exact_solution(X, 2.0)[0] == pytest.approx(0.5 * q.exact_solution(X, 1.0)[0], abs=1e-17)


@pytest.mark.parametrize("theta", [0.0, -1.0])
def test_nonpositive_theta_rejected(theta):
    with pytest.raises(DomainError):
        parametric_poisson_1d().exact_solution(np.array([[0.5]]), theta)


def test_inverse_data_setup():
    obs = synthetic_observations(parametric_poisson_1d(), [0.25, 0.75], 1.0, 0.001, seed=0)
    assert np.array_equal(obs.gamma, 0.001 ** 2 * np.eye(2))
    clean = np.array([1.0, -1.0]) * (2 * np.pi) ** -2
    assert np.all(np.abs(obs.values - clean) < 5 * 0.001)


def test_problem_registry():
    assert get_problem("poisson_1d").name == "poisson_1d"
    with pytest.raises(ConfigurationError):
        get_problem("heat_equation")


# --------------------------------------------------------------------------- Allen-Cahn definition

def test_allen_cahn_split_inverts_pointwise():
    split = allen_cahn_2d().operators.split
    u = np.array([-1.5, 0.0, 2.0])
    for theta in (0.02, 0.04, 0.15):
        assert np.allclose(split.inverse(split.forward(u, theta), theta), u, atol=1e-14)


def test_constant_states_solve_the_interior_equation():
    split = allen_cahn_2d().operators.split
    theta = 0.04
    for c in (-1.0, 1.0):
        # Laplacian of a constant vanishes, so A1 u = -u/theta
        assert -c / theta + split.forward(c, theta) == pytest.approx(0.0, abs=1e-12)


def test_allen_cahn_boundary_values_and_corners():
    X = allen_cahn_boundary_points(3)
    b = allen_cahn_boundary_value(X)
    vertical = (X[:, 0] == 0) | (X[:, 0] == 1)
    assert np.all(b[vertical] == 1.0) and np.all(b[~vertical] == -1.0)
    for corner in ([0, 0], [0, 1], [1, 0], [1, 1]):
        with pytest.raises(DomainError):
            allen_cahn_boundary_value(np.array([corner], dtype=float))
    with pytest.raises(DomainError):
        allen_cahn_boundary_value(np.array([[0.5, 0.5]]))


def test_boundary_sampler_excludes_corners():
    X = allen_cahn_boundary_points(5)
    assert X.shape == (20, 2)
    assert Design(np.array([[0.5, 0.5]]), X, Box.unit(2)).m_boundary == 20
    on_x = np.isin(X[:, 0], [0.0, 1.0])
    on_y = np.isin(X[:, 1], [0.0, 1.0])
    assert not np.any(on_x & on_y)


def test_allen_cahn_declares_three_solutions_and_no_exact_solution():
    p = allen_cahn_2d()
    assert p.solution_count == 3 and p.is_semi_linear and p.exact_solution is None


def test_observation_grid_is_four_by_four_interior_lattice():
    X = observation_grid(4)
    assert X.shape == (16, 2)
    assert np.allclose(np.unique(X[:, 0]), [0.2, 0.4, 0.6, 0.8])


# --------------------------------------------------------------------------- crude solutions

def test_three_distinct_branches_with_expected_signs(branches):
    assert [b.label for b in branches] == ["negative stable", "unstable", "positive stable"]
    neg, mid, pos = branches
    assert neg.mean() < 0 < pos.mean()
    assert np.all(pos.interior > -1) and np.all(pos.interior <= 1 + 1e-12)
    assert np.all(neg.interior >= -1 - 1e-12) and np.all(neg.interior < 1)
    for i in range(3):
        for j in range(i + 1, 3):
            assert np.sqrt(np.mean((branches[i].interior - branches[j].interior) ** 2)) > 0.1


def test_branches_satisfy_the_discrete_equation(branches):
    for b in branches:
        assert discrete_residual(b) < 1e-6
        assert b.residual < 1e-8


def test_unstable_branch_is_antisymmetric_under_swapping_axes(branches):
    # swapping x1 and x2 swaps the +1 and -1 edges
    mid = branches[1].interior
    assert np.allclose(mid, -mid.T, atol=1e-6)


def test_crude_solutions_are_deterministic(branches):
    again = crude_solutions(None, 0.04, 20, seed=0)
    for a, b in zip(branches, again):
        assert np.array_equal(a.values, b.values)


@pytest.mark.parametrize("theta", [0.02, 0.15])
def test_three_branches_at_ends_of_prior_range(theta):
    sols = crude_solutions(None, theta, 20, seed=0)
    assert len(sols) == 3
    assert all(discrete_residual(s) < 1e-6 for s in sols)


def test_interpolated_field_matches_grid_values(branches):
    b = branches[2]
    i, j = 5, 13
    X = np.array([[b.nodes[i], b.nodes[j]]])
    assert b(X)[0] == pytest.approx(b.values[i, j], abs=1e-10)


def test_linear_part_is_consistent_with_the_equation(branches):
    # A1 u + u^3/theta = 0 at the grid nodes
    b = branches[0]
    inner = b.nodes[1:-1]
    X = np.array([[inner[4], inner[9]], [inner[12], inner[2]]])
    vals = np.array([b.values[5, 10], b.values[13, 3]])
    assert np.allclose(b.linear_part(X) + vals ** 3 / b.theta, 0.0, atol=1e-6)


def test_non_convergent_newton_raises_oracle_error():
    nodes, lap, bc, _ = _fd_setup(10)
    with pytest.raises(OracleError):
        _newton(np.zeros(100), 0.04, lap, bc, maxiter=1)


def test_coincident_branches_raise_multiplicity_error():
    with pytest.raises(MultiplicityError):
        crude_solutions(None, 0.04, 12, min_separation=10.0)


def test_crude_solutions_reject_other_problems_and_bad_theta():
    with pytest.raises(ConfigurationError):
        crude_solutions(poisson_1d(), 0.04)
    with pytest.raises(DomainError):
        crude_solutions(None, 0.0)
