"""
Regular simplices inscribed in S^n, the finite orthogonal groups permuting
their vertices, and group averaging of functions, nodal data, support
functions and polynomials.
"""

import itertools, math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import sympy

import lpmink.spectral as spectral

from lpmink.constant import MODE_FULL, MODE_SPECIAL, MODE_TRIVIAL, TOL_NORM, TOL_ORTHOGONAL
from lpmink.print_ import NumericalError
from lpmink.support_function import LinearCombinationBasis, SupportFunction, TransformedBasis


# =============================================================================
# Simplex frame
# =============================================================================


@dataclass(frozen=True, eq=False)
class SimplexFrame:
    n: int
    vertices: np.ndarray
    exact_vertices: object = None  # sympy Matrix, rows are vertices

    def gram(self):
        return self.vertices @ self.vertices.T

    def check(self):
        """Raise NumericalError unless the vertices form a regular simplex."""
        q = self.vertices
        n = self.n
        if q.shape != (n + 2, n + 1):
            raise NumericalError("Simplex frame has shape %s" % str(q.shape))
        target = np.full((n + 2, n + 2), -1.0 / (n + 1))
        np.fill_diagonal(target, 1.0)
        error = max(np.max(np.abs(self.gram() - target)), np.max(np.abs(q.sum(axis=0))))
        if error > 10 * TOL_NORM:
            raise NumericalError("Broken simplex frame: Gram error %.3e" % error)
        for drop in range(n + 2):
            rows = np.delete(q, drop, axis=0)
            if abs(np.linalg.det(rows)) < 1e-8:
                raise NumericalError("Simplex vertices without q_%i are dependent" % (drop + 1))
        return True

    def to_dict(self):
        return {"n": self.n, "vertices": self.vertices.tolist()}


def _recursive_vertices(n, exact):
    """q_1 = e_1, q_j = -e_1/(n+1) + sqrt(1 - 1/(n+1)^2) (0, p_j)."""
    if n == 0:
        return [[sympy.Integer(1)], [sympy.Integer(-1)]] if exact else [[1.0], [-1.0]]
    lower = _recursive_vertices(n - 1, exact)
    if exact:
        a = sympy.Rational(-1, n + 1)
        b = sympy.sqrt(1 - a**2)
        zero, one = sympy.Integer(0), sympy.Integer(1)
    else:
        a = -1.0 / (n + 1)
        b = math.sqrt(1.0 - a * a)
        zero, one = 0.0, 1.0
    return [[one] + [zero] * n] + [[a] + [b * c for c in p] for p in lower]


def _is_power_of_two(m):
    return m > 0 and m & (m - 1) == 0


def simplex_vertices(n):
    """
    Regular simplex with n+2 unit vertices in R^{n+1}. When n+2 is a power
    of two the vertices are the rows of a Sylvester-Hadamard matrix without
    its first column, scaled by 1/sqrt(n+1); otherwise q_1 = e_1 and the
    remaining vertices are a scaled lower simplex.
    """
    if n < 1:
        raise ValueError("Simplex dimension must be positive, got %s" % str(n))
    if _is_power_of_two(n + 2):
        H = scipy.linalg.hadamard(n + 2)[:, 1:]
        vertices = H / math.sqrt(n + 1)
        exact = sympy.Matrix(H.tolist()) / sympy.sqrt(n + 1)
    else:
        vertices = np.array(_recursive_vertices(n, False), dtype=np.float64)
        exact = sympy.Matrix(_recursive_vertices(n, True))
    frame = SimplexFrame(n, np.ascontiguousarray(vertices, dtype=np.float64), exact)
    frame.check()
    return frame


# =============================================================================
# Group
# =============================================================================


@dataclass(frozen=True, eq=False)
class SymmetryGroup:
    n: int
    mode: str
    matrices: list
    permutations: list
    determinants: list
    exact_matrices: object = None

    @property
    def order(self):
        return len(self.matrices)

    def to_dict(self):
        return {
            "n": self.n,
            "mode": self.mode,
            "order": self.order,
            "matrices": [M.tolist() for M in self.matrices],
            "permutations": [list(p) for p in self.permutations],
            "determinants": list(self.determinants),
        }


def _exact_simplify(M):
    return M.applyfunc(lambda c: sympy.nsimplify(sympy.radsimp(sympy.expand(c))))


def build_group(frame, mode=MODE_SPECIAL):
    """
    For every permutation pi of the vertices, M = Q_pi Q^-1 over the first
    n+1 vertices; kept when orthogonal and, in special mode, of determinant
    +1. Exact matrices accompany the float ones for n <= 2.
    """
    if mode not in (MODE_SPECIAL, MODE_FULL, MODE_TRIVIAL):
        raise ValueError("Unknown symmetry mode %s" % str(mode))
    n = frame.n
    dim = n + 1
    if mode == MODE_TRIVIAL:
        identity = [sympy.eye(dim)] if n <= 2 else None
        return SymmetryGroup(n, mode, [np.eye(dim)], [tuple(range(n + 2))], [1], identity)

    q = frame.vertices
    Q_inv = np.linalg.inv(q[:dim].T)
    exact = n <= 2 and frame.exact_vertices is not None
    if exact:
        Qe = frame.exact_vertices
        Qe_inv = Qe[:dim, :].T.inv()

    matrices, permutations, determinants, exact_matrices = [], [], [], []
    for perm in itertools.permutations(range(n + 2)):
        M = q[list(perm[:dim])].T @ Q_inv
        if np.max(np.abs(M.T @ M - np.eye(dim))) > TOL_ORTHOGONAL:
            raise NumericalError(
                "Vertex permutation %s induces a non-orthogonal map" % str(perm)
            )
        images = q @ M.T
        if np.max(np.abs(images - q[list(perm)])) > TOL_ORTHOGONAL:
            raise NumericalError("Vertex permutation %s is not realized linearly" % str(perm))
        det = int(round(np.linalg.det(M)))
        if mode == MODE_SPECIAL and det != 1:
            continue
        matrices.append(M)
        permutations.append(perm)
        determinants.append(det)
        if exact:
            rows = Qe.extract(list(perm[:dim]), list(range(dim)))
            exact_matrices.append(_exact_simplify(rows.T * Qe_inv))

    return SymmetryGroup(
        n, mode, matrices, permutations, determinants, exact_matrices if exact else None
    )


def check_closure(g, tol=TOL_ORTHOGONAL):
    """True when g contains the identity and is closed under products and inverses."""

    def index(M):
        for k, G in enumerate(g.matrices):
            if np.max(np.abs(G - M)) < tol:
                return k
        return None

    if index(np.eye(g.n + 1)) is None:
        return False
    for A in g.matrices:
        if index(A.T) is None:
            return False
        for B in g.matrices:
            if index(A @ B) is None:
                return False
    return True


# =============================================================================
# Symmetrization
# =============================================================================


def symmetrize(data, g, grid=None):
    """
    Group average (1/|g|) sum_phi data o phi of
      - nodal values on a grid closed under g,
      - a SupportFunction (through an averaged basis),
      - a HomoPoly (exactly when both are exact),
      - a callable on unit vectors (N, n+1).
    """
    if isinstance(data, SupportFunction):
        basis = TransformedBasis(data.basis, g.matrices)
        return SupportFunction(basis, data.coeffs, data.grid if grid is None else grid)

    if isinstance(data, spectral.HomoPoly):
        if data.exact and g.exact_matrices is not None:
            return spectral.symmetrize_poly(data, g.exact_matrices)
        return spectral.symmetrize_poly(data.to_float(), g.matrices)

    if isinstance(data, np.ndarray):
        if grid is None:
            raise ValueError("Nodal data needs its grid")
        if data.shape[0] != grid.size:
            raise ValueError("Nodal data of length %i on a grid of %i nodes" % (data.shape[0], grid.size))
        total = np.zeros(data.shape)
        for M in g.matrices:
            perm = grid.node_permutation(M)
            if perm is None:
                raise ValueError("Grid is not closed under the symmetry group")
            total += data[perm]
        return total / g.order

    if callable(data):
        matrices = list(g.matrices)

        def averaged(X):
            X = np.atleast_2d(X)
            return sum(data(X @ M.T) for M in matrices) / len(matrices)

        return averaged

    raise ValueError("Cannot symmetrize data of type %s" % type(data).__name__)


def invariant_basis(basis, g, grid):
    """
    Invariant subspace of span(basis) as a LinearCombinationBasis. The
    averaging projector is assembled in coefficient space by weighted least
    squares on the grid, one harmonic degree at a time, and its range is read
    off the singular vectors.
    """
    nodes = grid.nodes
    w = np.sqrt(grid.weights)
    B = basis.values(nodes)
    SB = TransformedBasis(basis, g.matrices).values(nodes)
    degrees = basis.degrees
    groups = [np.arange(basis.size)] if degrees is None else [
        np.flatnonzero(degrees == d) for d in np.unique(degrees)
    ]
    columns = []
    for index in groups:
        P, *_ = np.linalg.lstsq((B[index] * w).T, (SB[index] * w).T, rcond=None)
        U, sigma, _ = np.linalg.svd(P)
        for k in np.flatnonzero(sigma > 0.5):
            column = np.zeros(basis.size)
            column[index] = U[:, k]
            columns.append(column)
    if not columns:
        raise NumericalError("No invariant function in the basis")
    return LinearCombinationBasis(basis, np.column_stack(columns))
