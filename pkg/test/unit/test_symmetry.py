import math

import numpy as np
import pytest

from hypothesis import given, settings
from hypothesis import strategies as st

from lpmink.constant import MODE_FULL, MODE_SPECIAL, MODE_TRIVIAL
from lpmink.print_ import NumericalError
from lpmink.sphere_geometry import make_grid
from lpmink.support_function import FourierBasis, SupportFunction, make_basis
from lpmink.symmetry import (
    SimplexFrame,
    build_group,
    check_closure,
    invariant_basis,
    simplex_vertices,
    symmetrize,
)


# =============================================================================
# Simplex frame
# =============================================================================


def test_simplex_vertices():
    for n in (1, 2, 3, 4):
        frame = simplex_vertices(n)
        q = frame.vertices
        assert q.shape == (n + 2, n + 1)
        assert np.allclose(np.linalg.norm(q, axis=1), 1.0)
        assert np.allclose(q.sum(axis=0), 0.0)
        gram = frame.gram()
        assert np.allclose(gram[~np.eye(n + 2, dtype=bool)], -1.0 / (n + 1))


def test_simplex_planar():
    q = simplex_vertices(1).vertices
    assert np.allclose(q[0], [1.0, 0.0])
    assert np.allclose(sorted(q[1:, 1]), [-math.sqrt(0.75), math.sqrt(0.75)])


def test_simplex_exact_vertices():
    frame = simplex_vertices(2)
    assert np.allclose(np.array(frame.exact_vertices, dtype=np.float64), frame.vertices)


def test_simplex_errors():
    with pytest.raises(ValueError):
        simplex_vertices(0)
    q = simplex_vertices(1).vertices.copy()
    q[1] = q[0]
    with pytest.raises(NumericalError):
        SimplexFrame(1, q).check()


# =============================================================================
# Group
# =============================================================================


@pytest.mark.parametrize(
    "n, mode, order",
    [(1, MODE_SPECIAL, 3), (1, MODE_FULL, 6), (2, MODE_SPECIAL, 12), (2, MODE_FULL, 24)],
)
def test_group_order(n, mode, order):
    g = build_group(simplex_vertices(n), mode)
    assert g.order == order
    assert check_closure(g)
    for M, det in zip(g.matrices, g.determinants):
        assert np.allclose(M.T @ M, np.eye(n + 1))
        assert np.isclose(np.linalg.det(M), det)
    if mode == MODE_SPECIAL:
        assert set(g.determinants) == {1}


def test_group_exact_matrices():
    g = build_group(simplex_vertices(2))
    assert len(g.exact_matrices) == g.order
    for M, E in zip(g.matrices, g.exact_matrices):
        assert np.allclose(np.array(E, dtype=np.float64), M)


def test_group_permutes_vertices():
    frame = simplex_vertices(2)
    g = build_group(frame, MODE_FULL)
    q = frame.vertices
    for M, perm in zip(g.matrices, g.permutations):
        assert np.allclose(q @ M.T, q[list(perm)])


def test_trivial_group():
    g = build_group(simplex_vertices(2), MODE_TRIVIAL)
    assert g.order == 1
    assert np.array_equal(g.matrices[0], np.eye(3))
    assert g.to_dict()["order"] == 1


def test_unknown_mode():
    with pytest.raises(ValueError):
        build_group(simplex_vertices(1), "dihedral")


def test_closure_detects_missing_element():
    g = build_group(simplex_vertices(1), MODE_SPECIAL)
    g.matrices.pop()
    assert not check_closure(g)


# =============================================================================
# Symmetrization
# =============================================================================


def test_symmetrize_callable():
    X = make_grid(2, 8).nodes
    for mode in (MODE_SPECIAL, MODE_FULL):
        g = build_group(simplex_vertices(2), mode)
        square = symmetrize(lambda Y: Y[:, 0] ** 2, g)
        assert np.allclose(square(X), 1.0 / 3.0)
    g = build_group(simplex_vertices(1), MODE_SPECIAL)
    linear = symmetrize(lambda Y: Y[:, 0], g)
    assert np.allclose(linear(make_grid(1, 12).nodes), 0.0)


def test_symmetrize_support_function():
    grid = make_grid(1, 24)
    g = build_group(simplex_vertices(1), MODE_FULL)
    h = SupportFunction.ellipsoid(np.diag([1.3, 1.0 / 1.3]), grid)
    sym = symmetrize(h, g)
    expected = symmetrize(h.evaluate, g)(grid.nodes)
    assert np.allclose(sym.values, expected)
    assert np.allclose(symmetrize(h.values, g, grid), expected)


def test_symmetrize_nodal_errors():
    g = build_group(simplex_vertices(2), MODE_SPECIAL)
    grid = make_grid(2, 8)
    with pytest.raises(ValueError):
        symmetrize(np.ones(grid.size), g, grid)
    with pytest.raises(ValueError):
        symmetrize(np.ones(grid.size), g)
    with pytest.raises(ValueError):
        symmetrize(np.ones(5), g, grid)
    with pytest.raises(ValueError):
        symmetrize("h", g)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-10.0, 10.0), min_size=12, max_size=12))
def test_symmetrize_is_projector(values):
    grid = make_grid(1, 12)
    g = build_group(simplex_vertices(1), MODE_FULL)
    once = symmetrize(np.array(values), g, grid)
    assert np.allclose(symmetrize(once, g, grid), once, atol=1e-12)
    for M in g.matrices:
        assert np.allclose(once[grid.node_permutation(M)], once, atol=1e-12)


def test_invariant_basis_planar():
    grid = make_grid(1, 48)
    basis = FourierBasis(6)
    special = invariant_basis(basis, build_group(simplex_vertices(1), MODE_SPECIAL), grid)
    full = invariant_basis(basis, build_group(simplex_vertices(1), MODE_FULL), grid)
    # 1, cos 3t, sin 3t, cos 6t, sin 6t; reflections drop the sines
    assert special.size == 5
    assert full.size == 3
    assert sorted(full.degrees) == [0, 3, 6]


def test_invariant_basis_spatial():
    grid = make_grid(2, 12)
    g = build_group(simplex_vertices(2), MODE_SPECIAL)
    basis = invariant_basis(make_basis(2, 4), g, grid)
    # constant, xyz and the quartic invariant
    assert basis.size == 3
    B = basis.values(grid.nodes)
    for M in g.matrices:
        assert np.allclose(basis.values(grid.nodes @ M.T), B, atol=1e-10)
