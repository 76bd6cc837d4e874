import math

import numpy as np
import pytest

from lpmink.print_ import NumericalError
from lpmink.spectral import build_h_simplex
from lpmink.sphere_geometry import make_grid, sphere_area
from lpmink.support_function import FourierBasis, SupportFunction
from lpmink.symmetry import simplex_vertices
from lpmink.variational import (
    audit_identity,
    gradient_fd_error,
    instability_threshold,
    is_trivial_constant,
    make_problem,
    minimize,
    normalize,
    objective,
    second_variation_fd,
    second_variation_formula,
    seed_coeffs,
    to_dual,
)


def witness(n):
    return build_h_simplex(simplex_vertices(n))


# =============================================================================
# Single-function operations
# =============================================================================


def test_normalize_constant():
    for n, res in ((1, 24), (2, 8)):
        grid = make_grid(n, res)
        u = normalize(SupportFunction.constant(n, 2.0, grid), -5.0)
        assert np.allclose(u.values, 1.0)
        assert math.isclose(grid.integrate(u.values**-5.0), sphere_area(n))


def test_normalize_rejects_nonpositive():
    grid = make_grid(1, 24)
    u = SupportFunction(FourierBasis(1), [0.5, 1.0, 0.0], grid)
    with pytest.raises(ValueError):
        normalize(u, -4.0)


def test_objective_constant():
    for n, res in ((1, 24), (2, 8)):
        grid = make_grid(n, res)
        assert math.isclose(objective(SupportFunction.constant(n, 1.0, grid)), -sphere_area(n))
        # I is homogeneous of degree n+1
        assert math.isclose(
            objective(SupportFunction.constant(n, 2.0, grid)), -(2.0 ** (n + 1)) * sphere_area(n)
        )


def test_to_dual():
    grid = make_grid(1, 24)
    p = -8.0
    v, lam = to_dual(SupportFunction.constant(1, 1.0, grid), p)
    assert math.isclose(-objective(v) / 2.0, 1.0)
    assert np.allclose(v.values, 1.0 / math.sqrt(math.pi))
    assert math.isclose(lam, 2.0 / grid.integrate(v.values**p))


def test_is_trivial_constant():
    grid = make_grid(1, 24)
    assert is_trivial_constant(SupportFunction.constant(1, 1.0, grid))
    assert not is_trivial_constant(SupportFunction(FourierBasis(3), [1.0, 0, 0, 0, 0, 0.01, 0], grid))


# =============================================================================
# Second variation
# =============================================================================


def test_instability_threshold():
    assert instability_threshold(1) == -7.0
    assert instability_threshold(2) == -9.0


@pytest.mark.parametrize("n, res", [(1, 128), (2, 32)])
def test_second_variation_sign(n, res):
    grid = make_grid(n, res)
    xi = witness(n)
    P = -2.0 * n - 5.0
    assert second_variation_formula(xi, P - 0.1, grid) < 0.0
    assert second_variation_formula(xi, P + 0.1, grid) > 0.0
    scale = grid.integrate(xi.evaluate(grid.nodes) ** 2)
    assert abs(second_variation_formula(xi, P, grid)) < 1e-9 * scale


def test_second_variation_prefactor():
    grid = make_grid(2, 16)
    xi = witness(2)
    corrected = second_variation_formula(xi, -10.0, grid)
    displayed = second_variation_formula(xi, -10.0, grid, prefactor="displayed")
    assert math.isclose(displayed / corrected, 4.0 / 3.0)
    with pytest.raises(ValueError):
        second_variation_formula(xi, -10.0, grid, prefactor="other")
    with pytest.raises(ValueError):
        second_variation_formula(np.ones(grid.size), -10.0, grid)


@pytest.mark.parametrize("n, p, res", [(1, -8.0, 128), (1, -5.0, 128), (2, -10.0, 32)])
def test_second_variation_fd(n, p, res):
    grid = make_grid(n, res)
    xi = witness(n)
    formula = second_variation_formula(xi, p, grid)
    fd = second_variation_fd(xi, p, grid)
    assert abs(fd - formula) <= 1e-3 * abs(formula)


def test_second_variation_fd_leaves_cone():
    grid = make_grid(1, 64)
    xi = SupportFunction(FourierBasis(3), [0, 0, 0, 0, 0, 50.0, 0], grid)
    with pytest.raises(NumericalError):
        second_variation_fd(xi, -8.0, grid, eps_list=(1e-2,))


# =============================================================================
# Problem
# =============================================================================


def test_problem_validation():
    with pytest.raises(ValueError):
        make_problem(1, -0.5, 48)
    with pytest.raises(ValueError):
        make_problem(1, -8.0, 48, eps_c=0.0)
    with pytest.raises(ValueError):
        make_problem(2, -10.0, 32, L=16)


def test_problem_basis():
    prob = make_problem(1, -8.0, 48)
    # 1 and cos/sin of 3k t for k = 1..5
    assert prob.basis.size == 11
    assert sorted(set(prob.basis.degrees)) == [0, 3, 6, 9, 12, 15]


def test_constant_is_critical():
    for n, p, res in ((1, -8.0, 48), (2, -10.0, 16)):
        prob = make_problem(n, p, res, L=6 if n == 2 else None)
        c = prob.normalize(prob.constant_coeffs())
        u = prob.state(c)[0]
        assert np.allclose(u, 1.0)
        J, dJ, _, _ = prob.functional(c)
        assert math.isclose(J, -sphere_area(n))
        assert np.max(np.abs(dJ)) < 1e-10
        residual, lam = prob.el_residual(c)
        assert residual < 1e-12
        assert math.isclose(lam, 1.0)


def test_gradient_matches_finite_differences():
    prob = make_problem(1, -8.0, 192)
    assert gradient_fd_error(prob, seed_coeffs(prob, 0.05)) <= 1e-6


def test_barrier_gradient():
    prob = make_problem(1, -8.0, 96)
    c = seed_coeffs(prob, 0.05)
    _, _, B, dB = prob.functional(c, 1e-2)
    for k in range(c.size):
        # Step scaled to the curvature of basis function k
        h = 1e-6 / max(1.0, np.max(np.abs(prob.W_basis[k])))
        e = np.zeros_like(c)
        e[k] = h
        fd = (prob.functional(c + e, 1e-2)[2] - prob.functional(c - e, 1e-2)[2]) / (2.0 * h)
        assert abs(fd - dB[k]) <= 1e-6 * max(1.0, np.max(np.abs(dB)))


def test_tangent_gradient():
    prob = make_problem(1, -8.0, 96)
    c = seed_coeffs(prob, 0.05)
    _, _, _, dB = prob.functional(c, 1e-2)
    g = prob.tangent_gradient(c, dB)
    # Orthogonal to the scaling direction
    assert abs(g @ c) <= 1e-10 * np.max(np.abs(g))

    def barrier(x):
        return prob.functional(prob.normalize(x), 1e-2)[2]

    for k in range(c.size):
        h = 1e-6 / max(1.0, np.max(np.abs(prob.W_basis[k])))
        e = np.zeros_like(c)
        e[k] = h
        fd = (barrier(c + e) - barrier(c - e)) / (2.0 * h)
        assert abs(fd - g[k]) <= 1e-6 * max(1.0, np.max(np.abs(g)))


# =============================================================================
# Minimizer
# =============================================================================


@pytest.fixture(scope="module")
def planar_critical_point():
    return minimize(make_problem(1, -8.0, 192), 0.05)


def test_minimize_stable_range_returns_constant():
    cp = minimize(make_problem(1, -6.0, 192), 0.05)
    assert cp.non_constancy < 1e-6
    assert is_trivial_constant(cp.u)
    assert math.isclose(cp.value, -2.0 * math.pi, rel_tol=1e-10)


def test_minimize_non_constant(planar_critical_point):
    cp = planar_critical_point
    assert cp.non_constancy > 1e-3
    assert cp.value < -2.0 * math.pi - 1e-4
    assert cp.el_residual < 1e-6
    assert cp.eig_min > 0.0
    assert cp.history.shape[1] == 8
    assert cp.to_dict()["iterations"] == cp.iterations


def test_audit_identity(planar_critical_point):
    audit = audit_identity(planar_critical_point, -8.0, np.random.default_rng(90053))
    assert len(audit) == 5
    assert max(abs(v) for v in audit) <= 1e-5


def test_minimize_rejects_seed_outside_cone():
    prob = make_problem(1, -8.0, 48)
    c = prob.constant_coeffs()
    c[1] = 0.9 / np.max(np.abs(prob.phi[1]))
    with pytest.raises(NumericalError):
        minimize(prob, c0=c)
