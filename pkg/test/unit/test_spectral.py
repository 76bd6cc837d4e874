import math

import numpy as np
import pytest
import sympy

from lpmink.constant import MODE_FULL, MODE_SPECIAL
from lpmink.print_ import NumericalError
from lpmink.spectral import (
    HomoPoly,
    ball_moment,
    build_h_simplex,
    degree_two_system,
    exponents,
    first_invariant,
    harmonic_basis,
    harmonic_dimension,
    invariant_dimension,
    lambda1,
    rayleigh_quotient,
    sphere_moment,
    symmetrize_poly,
)
from lpmink.sphere_geometry import make_grid
from lpmink.symmetry import build_group, simplex_vertices


def group(n, mode=MODE_SPECIAL):
    return build_group(simplex_vertices(n), mode)


# =============================================================================
# Moments and polynomial algebra
# =============================================================================


def test_exponents():
    assert exponents(2, 2) == [(2, 0), (1, 1), (0, 2)]
    assert len(exponents(3, 3)) == 10
    assert exponents(2, -1) == []


def test_sphere_moments():
    assert math.isclose(sphere_moment((0, 0)), 2.0 * math.pi)
    assert math.isclose(sphere_moment((2, 0, 0)), 4.0 * math.pi / 3.0)
    assert math.isclose(sphere_moment((2, 2, 0)), 4.0 * math.pi / 15.0)
    assert sphere_moment((1, 1)) == 0.0
    assert sphere_moment((2, 0, 0), exact=True) == 4 * sympy.pi / 3
    assert math.isclose(ball_moment((0, 0, 0)), 4.0 * math.pi / 3.0)
    assert ball_moment((0, 0), exact=True) == sympy.pi


def test_homo_poly_construction():
    y1, y2, y3 = sympy.symbols("y1:4")
    poly = HomoPoly.from_expr(y1 * y2 * y3 + 2 * y1**3, 3)
    assert poly.degree == 3
    assert poly.exact
    assert poly.coeffs[(3, 0, 0)] == 2
    with pytest.raises(ValueError):
        HomoPoly.from_expr(y1 + y2**2, 3)
    with pytest.raises(ValueError):
        HomoPoly(2, 2, {(1, 0): 1})


def test_homo_poly_evaluation():
    y1, y2, y3 = sympy.symbols("y1:4")
    poly = HomoPoly.from_expr(y1**2 * y2 - y3**3, 3)
    X = make_grid(2, 8).nodes
    assert np.allclose(poly.evaluate(X), X[:, 0] ** 2 * X[:, 1] - X[:, 2] ** 3)
    grad = poly.gradient(X)
    assert np.allclose(grad[:, 0], 2.0 * X[:, 0] * X[:, 1])
    assert np.allclose(grad[:, 2], -3.0 * X[:, 2] ** 2)
    hess = poly.hessian(X)
    assert np.allclose(hess[:, 0, 1], 2.0 * X[:, 0])
    assert np.allclose(hess[:, 2, 2], -6.0 * X[:, 2])


def test_compose_float_and_exact():
    poly = harmonic_basis(2, 3)[0]
    g = group(2)
    X = make_grid(2, 8).nodes
    for M, E in zip(g.matrices, g.exact_matrices):
        expected = poly.evaluate(X @ M.T)
        assert np.allclose(poly.compose(E).evaluate(X), expected)
        assert np.allclose(poly.to_float().compose(M).evaluate(X), expected)


# =============================================================================
# Harmonic polynomials
# =============================================================================


def test_harmonic_basis():
    for n in (1, 2, 3):
        for mu in range(6):
            basis = harmonic_basis(n, mu)
            assert len(basis) == harmonic_dimension(n, mu)
            for poly in basis:
                assert poly.exact
                assert poly.is_harmonic()
    assert harmonic_dimension(1, 4) == 2
    assert harmonic_dimension(2, 4) == 9
    with pytest.raises(ValueError):
        harmonic_basis(2, -1)


def test_harmonic_rayleigh_quotient():
    grid = make_grid(2, 16)
    for mu in (1, 2, 3, 4):
        for poly in harmonic_basis(2, mu):
            assert math.isclose(rayleigh_quotient(poly, grid), mu * (mu + 1), rel_tol=1e-10)


# =============================================================================
# Invariant subspaces and lambda_1
# =============================================================================


def test_first_invariant_spatial():
    for mode in (MODE_SPECIAL, MODE_FULL):
        mu1, sub, dims = first_invariant(2, group(2, mode))
        assert mu1 == 3
        assert dims == {1: 0, 2: 0, 3: 1}
        assert sub.exact
        assert sub.eigenvalue(2) == 12


def test_first_invariant_planar():
    _, sub, dims = first_invariant(1, group(1, MODE_SPECIAL))
    assert dims == {1: 0, 2: 0, 3: 2}
    _, sub, dims = first_invariant(1, group(1, MODE_FULL))
    assert dims[3] == 1


def test_lambda1():
    assert lambda1(1, group(1)) == 9.0
    assert lambda1(2, group(2), grid=make_grid(2, 16)) == 12.0
    assert lambda1(2, group(2, MODE_FULL)) == 12.0
    with pytest.raises(ValueError):
        lambda1(2, group(2), mu_max=0)
    with pytest.raises(NumericalError):
        first_invariant(2, group(2), mu_max=2)


def test_float_fallback_rank():
    g = group(2)
    assert invariant_dimension(2, 3, g, exact=False).dimension == 1
    assert invariant_dimension(2, 2, g, exact=False).dimension == 0
    assert invariant_dimension(2, 4, g, exact=False).dimension == 1


def test_invariant_basis_orthonormal_and_spectral():
    grid = make_grid(2, 16)
    g = group(2)
    sub = invariant_dimension(2, 4, g)
    for i, a in enumerate(sub.basis):
        for j, b in enumerate(sub.basis):
            assert math.isclose(a.sphere_inner(b), float(i == j), abs_tol=1e-10)
        assert math.isclose(rayleigh_quotient(a, grid), sub.eigenvalue(2), rel_tol=1e-10)


# =============================================================================
# Simplex witness
# =============================================================================


@pytest.mark.parametrize("n", [1, 2])
def test_simplex_witness(n):
    frame = simplex_vertices(n)
    g = build_group(frame, MODE_FULL)
    h = build_h_simplex(frame)
    grid = make_grid(n, 128)
    X = grid.nodes

    assert h.degree == 3
    assert h.exact
    assert h.is_harmonic()
    for M in g.matrices:
        assert np.max(np.abs(h.evaluate(X @ M.T) - h.evaluate(X))) < 1e-12
    assert abs(grid.integrate(h.evaluate(X))) < 1e-12
    assert h.ball_mean() == 0
    assert math.isclose(rayleigh_quotient(h, grid), 3.0 * (n + 2), rel_tol=1e-8)


def test_witness_symmetrization_is_identity():
    frame = simplex_vertices(2)
    g = build_group(frame)
    h = build_h_simplex(frame)
    X = make_grid(2, 8).nodes
    assert np.allclose(symmetrize_poly(h, g.exact_matrices).evaluate(X), h.evaluate(X))


def test_ball_mean():
    y1, y2 = sympy.symbols("y1:3")
    assert HomoPoly.from_expr(y1**2, 2).ball_mean() == sympy.Rational(1, 4)
    assert HomoPoly.from_expr(y1**2 - y2**2, 2).ball_mean() == 0
    assert math.isclose(HomoPoly(2, 2, {(2, 0): 1.0}).ball_mean(), 0.25)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_degree_two_system(n):
    A, rank, vector = degree_two_system(simplex_vertices(n))
    assert A.shape == (n + 2, n + 2)
    assert rank == n + 1
    assert np.allclose(vector, [1.0] * (n + 1) + [-1.0])
