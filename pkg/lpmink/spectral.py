"""
Homogeneous harmonic polynomials, invariant subspaces under the simplex
group, and the first symmetric eigenvalue of -Laplace on S^n.

Polynomial algebra is exact (sympy rationals, or algebraic numbers when the
group matrices carry square roots) up to degree 6 and in floats beyond;
sphere evaluation is always in floats.
"""

import itertools, math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import sympy

from lpmink.constant import MU_EXACT_MAX, MU_MAX_DEFAULT, TOL_RANK
from lpmink.print_ import NumericalError


def exponents(nvars, degree):
    """All exponent tuples of the given total degree, in descending lex order."""
    if degree < 0:
        return []
    if nvars == 1:
        return [(degree,)]
    out = []
    for first in range(degree, -1, -1):
        for rest in exponents(nvars - 1, degree - first):
            out.append((first,) + rest)
    return out


def variables(nvars):
    return sympy.symbols("y1:%i" % (nvars + 1))


def _is_exact(c):
    return isinstance(c, (int, sympy.Basic)) and not isinstance(c, sympy.Float)


def _simplify(c):
    if isinstance(c, sympy.Rational):
        return c
    if isinstance(c, sympy.Basic):
        return sympy.nsimplify(sympy.radsimp(sympy.expand(c)))
    return c


def _is_zero(c):
    if isinstance(c, sympy.Basic):
        return _simplify(c) == 0
    return c == 0


# =============================================================================
# Sphere and ball moments
# =============================================================================


def sphere_moment(alpha, exact=False):
    """
    Integral of y^alpha over the unit sphere in R^{len(alpha)}:
    2 prod Gamma((a_i+1)/2) / Gamma((|a| + nvars)/2) for even a, else 0.
    """
    if any(a % 2 for a in alpha):
        return sympy.Integer(0) if exact else 0.0
    nvars = len(alpha)
    if exact:
        num = sympy.Integer(2)
        for a in alpha:
            num *= sympy.gamma(sympy.Rational(a + 1, 2))
        return sympy.simplify(num / sympy.gamma(sympy.Rational(sum(alpha) + nvars, 2)))
    log = math.log(2.0) + sum(math.lgamma((a + 1) / 2.0) for a in alpha)
    return math.exp(log - math.lgamma((sum(alpha) + nvars) / 2.0))


def ball_moment(alpha, exact=False):
    """Integral of y^alpha over the unit ball: sphere moment / (|alpha| + nvars)."""
    denominator = sum(alpha) + len(alpha)
    if exact:
        return sphere_moment(alpha, True) / denominator
    return sphere_moment(alpha) / denominator


# =============================================================================
# Homogeneous polynomial
# =============================================================================


class HomoPoly:
    """
    Homogeneous polynomial sum_alpha a^alpha y^alpha on R^{nvars}.

    Coefficients are sympy numbers (exact) or Python floats. Evaluation
    helpers treat the polynomial as a function on the unit sphere.
    """

    def __init__(self, nvars, degree, coeffs=None):
        self.nvars = int(nvars)
        self.degree = int(degree)
        self.coeffs = {}
        for alpha, c in (coeffs or {}).items():
            alpha = tuple(int(a) for a in alpha)
            if len(alpha) != self.nvars or sum(alpha) != self.degree:
                raise ValueError(
                    "Monomial %s is not of degree %i in %i variables"
                    % (str(alpha), self.degree, self.nvars)
                )
            if not _is_zero(c):
                self.coeffs[alpha] = c
        self._arrays = None

    # -------------------------------------------------------------------------
    # Construction and conversion
    # -------------------------------------------------------------------------

    @classmethod
    def from_expr(cls, expr, nvars):
        syms = variables(nvars)
        poly = sympy.Poly(sympy.expand(expr), *syms)
        terms = poly.terms()
        if not terms or poly.is_zero:
            return cls(nvars, 0, {})
        degrees = {sum(m) for m, _ in terms}
        if len(degrees) != 1:
            raise ValueError("Expression is not homogeneous: %s" % str(expr))
        return cls(nvars, degrees.pop(), {m: c for m, c in terms})

    @classmethod
    def monomial(cls, alpha, coeff=1):
        return cls(len(alpha), sum(alpha), {tuple(alpha): sympy.sympify(coeff)})

    def to_expr(self):
        syms = variables(self.nvars)
        return sum(
            (c * sympy.Mul(*[s**a for s, a in zip(syms, alpha)]) for alpha, c in self.coeffs.items()),
            sympy.Integer(0),
        )

    def to_float(self):
        return HomoPoly(self.nvars, self.degree, {a: float(c) for a, c in self.coeffs.items()})

    def to_dict(self):
        return {
            "nvars": self.nvars,
            "degree": self.degree,
            "terms": [[list(a), str(c) if self.exact else float(c)] for a, c in sorted(self.coeffs.items(), reverse=True)],
        }

    @property
    def exact(self):
        return all(_is_exact(c) for c in self.coeffs.values())

    @property
    def is_zero(self):
        return len(self.coeffs) == 0

    def vector(self, basis_exponents=None):
        """Coefficients over `basis_exponents` (default: all monomials of the degree)."""
        if basis_exponents is None:
            basis_exponents = exponents(self.nvars, self.degree)
        return [self.coeffs.get(alpha, 0) for alpha in basis_exponents]

    # -------------------------------------------------------------------------
    # Algebra
    # -------------------------------------------------------------------------

    def _check(self, other):
        if other.nvars != self.nvars or (other.degree != self.degree and not other.is_zero and not self.is_zero):
            raise ValueError("Polynomials of different shape cannot be added")

    def __add__(self, other):
        self._check(other)
        degree = self.degree if not self.is_zero else other.degree
        coeffs = dict(self.coeffs)
        for alpha, c in other.coeffs.items():
            coeffs[alpha] = _simplify(coeffs.get(alpha, 0) + c)
        return HomoPoly(self.nvars, degree, coeffs)

    def __neg__(self):
        return HomoPoly(self.nvars, self.degree, {a: -c for a, c in self.coeffs.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, scalar):
        if isinstance(scalar, HomoPoly):
            return self.multiply(scalar)
        return HomoPoly(self.nvars, self.degree, {a: _simplify(c * scalar) for a, c in self.coeffs.items()})

    __rmul__ = __mul__

    def multiply(self, other):
        coeffs = {}
        for a, c in self.coeffs.items():
            for b, d in other.coeffs.items():
                key = tuple(i + j for i, j in zip(a, b))
                coeffs[key] = coeffs.get(key, 0) + c * d
        return HomoPoly(
            self.nvars, self.degree + other.degree, {k: _simplify(v) for k, v in coeffs.items()}
        )

    def derivative(self, i):
        coeffs = {}
        for alpha, c in self.coeffs.items():
            if alpha[i] > 0:
                beta = list(alpha)
                beta[i] -= 1
                coeffs[tuple(beta)] = c * alpha[i]
        return HomoPoly(self.nvars, max(self.degree - 1, 0), coeffs)

    def laplacian(self, skip=()):
        """Sum of second derivatives over all variables not in `skip`."""
        out = HomoPoly(self.nvars, max(self.degree - 2, 0), {})
        for i in range(self.nvars):
            if i in skip:
                continue
            out = out + self.derivative(i).derivative(i)
        return out

    def is_harmonic(self, tol=1e-12):
        lap = self.laplacian()
        if self.exact:
            return all(_is_zero(c) for c in lap.coeffs.values())
        return all(abs(float(c)) <= tol for c in lap.coeffs.values())

    def compose(self, M):
        """The polynomial y -> h(M y)."""
        perm = signed_permutation(M)
        if perm is not None:
            cols, signs = perm
            coeffs = {}
            for alpha, c in self.coeffs.items():
                beta = [0] * self.nvars
                sign = 1
                for i, a in enumerate(alpha):
                    beta[cols[i]] += a
                    if signs[i] < 0 and a % 2:
                        sign = -sign
                coeffs[tuple(beta)] = c * sign if sign > 0 else -c
            return HomoPoly(self.nvars, self.degree, coeffs)

        if self.exact and isinstance(M, sympy.MatrixBase):
            # Substitute and expand
            syms = variables(self.nvars)
            image = M * sympy.Matrix(syms)
            expr = sympy.expand(
                self.to_expr().subs(list(zip(syms, image)), simultaneous=True)
            )
            return HomoPoly.from_expr(expr, self.nvars) if expr != 0 else HomoPoly(self.nvars, self.degree, {})

        # Float path: expand products of the linear forms (M y)_i
        M = np.asarray(M, dtype=np.float64)
        forms = [
            {tuple(int(k == j) for k in range(self.nvars)): M[i, j] for j in range(self.nvars) if M[i, j] != 0.0}
            for i in range(self.nvars)
        ]
        powers = [[{(0,) * self.nvars: 1.0}] for _ in range(self.nvars)]
        for i in range(self.nvars):
            for _ in range(self.degree):
                powers[i].append(_dict_multiply(powers[i][-1], forms[i]))
        coeffs = {}
        for alpha, c in self.coeffs.items():
            term = {(0,) * self.nvars: float(c)}
            for i, a in enumerate(alpha):
                if a:
                    term = _dict_multiply(term, powers[i][a])
            for beta, d in term.items():
                coeffs[beta] = coeffs.get(beta, 0.0) + d
        return HomoPoly(self.nvars, self.degree, coeffs)

    # -------------------------------------------------------------------------
    # Integrals
    # -------------------------------------------------------------------------

    def sphere_integral(self, exact=None):
        exact = self.exact if exact is None else exact
        total = sympy.Integer(0) if exact else 0.0
        for alpha, c in self.coeffs.items():
            total += c * sphere_moment(alpha, exact) if exact else float(c) * sphere_moment(alpha)
        return sympy.simplify(total) if exact else total

    def ball_integral(self, exact=None):
        exact = self.exact if exact is None else exact
        total = sympy.Integer(0) if exact else 0.0
        for alpha, c in self.coeffs.items():
            total += c * ball_moment(alpha, exact) if exact else float(c) * ball_moment(alpha)
        return sympy.simplify(total) if exact else total

    def ball_mean(self, exact=None):
        """Average over the unit ball; zero for every non-constant harmonic."""
        exact = self.exact if exact is None else exact
        volume = ball_moment((0,) * self.nvars, exact)
        return sympy.simplify(self.ball_integral(exact) / volume) if exact else self.ball_integral(False) / volume

    def sphere_inner(self, other, exact=None):
        return self.multiply(other).sphere_integral(exact)

    # -------------------------------------------------------------------------
    # Float evaluation
    # -------------------------------------------------------------------------

    def arrays(self):
        if self._arrays is None:
            if self.coeffs:
                exps = np.array(list(self.coeffs.keys()), dtype=np.int64)
                coef = np.array([float(c) for c in self.coeffs.values()])
            else:
                exps = np.zeros((1, self.nvars), dtype=np.int64)
                coef = np.zeros(1)
            self._arrays = (exps, coef)
        return self._arrays

    def evaluate(self, X):
        exps, coef = self.arrays()
        return monomials(np.atleast_2d(X), exps) @ coef

    def gradient(self, X):
        """Ambient gradient, shape (N, nvars)."""
        exps, coef = self.arrays()
        X = np.atleast_2d(X)
        out = np.empty(X.shape)
        for i in range(self.nvars):
            shift = np.zeros(self.nvars, dtype=np.int64)
            shift[i] = 1
            out[:, i] = monomials(X, exps - shift) @ (coef * exps[:, i])
        return out

    def hessian(self, X):
        """Ambient Hessian, shape (N, nvars, nvars)."""
        exps, coef = self.arrays()
        X = np.atleast_2d(X)
        out = np.empty((X.shape[0], self.nvars, self.nvars))
        for i in range(self.nvars):
            for j in range(i, self.nvars):
                shift = np.zeros(self.nvars, dtype=np.int64)
                shift[i] += 1
                shift[j] += 1
                factor = exps[:, i] * (exps[:, j] - (1 if i == j else 0))
                out[:, i, j] = monomials(X, exps - shift) @ (coef * factor)
                out[:, j, i] = out[:, i, j]
        return out

    def sphere_gradient(self, X):
        X = np.atleast_2d(X)
        grad = self.gradient(X)
        return grad - np.sum(grad * X, axis=1, keepdims=True) * X

    def __repr__(self):
        return "HomoPoly(%s)" % str(self.to_expr())


def _dict_multiply(a, b):
    out = {}
    for ka, va in a.items():
        for kb, vb in b.items():
            key = tuple(i + j for i, j in zip(ka, kb))
            out[key] = out.get(key, 0.0) + va * vb
    return out


def monomials(X, exps):
    """Table X^alpha of shape (N, T); negative exponents only occur with zero weight."""
    return np.prod(X[:, None, :] ** np.maximum(exps, 0)[None, :, :], axis=2)


def signed_permutation(M):
    """(columns, signs) when every row of M holds a single +-1, else None."""
    rows = [[M[i, j] for j in range(M.shape[1])] for i in range(M.shape[0])]
    cols, signs = [], []
    for row in rows:
        nonzero = [j for j, v in enumerate(row) if not _is_zero(v)]
        if len(nonzero) != 1:
            return None
        v = row[nonzero[0]]
        if v == 1:
            signs.append(1)
        elif v == -1:
            signs.append(-1)
        else:
            return None
        cols.append(nonzero[0])
    return cols, signs


# =============================================================================
# Harmonic basis
# =============================================================================


def harmonic_basis(n, mu):
    """
    Basis of the homogeneous harmonic polynomials of degree mu on R^{n+1}.

    Each monomial P of degree mu in y_2..y_{n+1} gives
    sum_k (-1)^k y_1^{2k} Lap'^k P / (2k)!, and each monomial Q of degree
    mu-1 gives sum_k (-1)^k y_1^{2k+1} Lap'^k Q / (2k+1)!, where Lap' skips
    y_1. The dimension is binom(mu+n-1, n-1) + binom(mu+n-2, n-1).
    """
    if mu < 0:
        raise ValueError("Harmonic degree must be non-negative, got %i" % mu)
    nvars = n + 1
    basis = []
    for start, length in [(0, mu), (1, mu - 1)]:
        for tail in exponents(n, length):
            term = HomoPoly.monomial((0,) + tail)
            total = HomoPoly(nvars, mu, {})
            k = 0
            while not term.is_zero:
                power = 2 * k + start
                lifted = term.multiply(HomoPoly.monomial((power,) + (0,) * n))
                scale = sympy.Rational((-1) ** k, math.factorial(power))
                total = total + lifted * scale
                term = term.laplacian(skip=(0,))
                k += 1
            basis.append(total)
    return basis


def harmonic_dimension(n, mu):
    return math.comb(mu + n, n) - (math.comb(mu + n - 2, n) if mu >= 2 else 0)


# =============================================================================
# Invariant subspaces
# =============================================================================


@dataclass(frozen=True, eq=False)
class InvariantSubspace:
    degree: int
    basis: list
    dimension: int
    exact: bool

    def eigenvalue(self, n):
        return self.degree * (n + self.degree - 1)


def symmetrize_poly(poly, matrices):
    """Group average (1/|G|) sum_g poly o g."""
    total = HomoPoly(poly.nvars, poly.degree, {})
    for M in matrices:
        total = total + poly.compose(M)
    return total * (sympy.Rational(1, len(matrices)) if total.exact else 1.0 / len(matrices))


def moment_matrix(nvars, degree):
    """Float Gram matrix of the degree-`degree` monomials on the unit sphere."""
    exps = exponents(nvars, degree)
    G = np.empty((len(exps), len(exps)))
    for i, a in enumerate(exps):
        for j, b in enumerate(exps):
            G[i, j] = sphere_moment(tuple(x + y for x, y in zip(a, b)))
    return exps, G


def orthonormalize(polys):
    """Float orthonormal basis of span(polys) in the sphere inner product."""
    if not polys:
        return []
    nvars, degree = polys[0].nvars, polys[0].degree
    exps, G = moment_matrix(nvars, degree)
    B = np.array([[float(c) for c in p.vector(exps)] for p in polys]).T
    gram = B.T @ G @ B
    L = np.linalg.cholesky(0.5 * (gram + gram.T))
    C = B @ np.linalg.inv(L).T
    return [
        HomoPoly(nvars, degree, {a: C[i, k] for i, a in enumerate(exps) if C[i, k] != 0.0})
        for k in range(C.shape[1])
    ]


def invariant_dimension(n, mu, g, exact=None):
    """
    Rank of the group-averaging projector on the harmonic polynomials of
    degree mu, with an orthonormal basis of its image.
    """
    nvars = n + 1
    harmonics = harmonic_basis(n, mu)
    if exact is None:
        exact = mu <= MU_EXACT_MAX and g.exact_matrices is not None
    exps = exponents(nvars, mu)

    if exact:
        images = [symmetrize_poly(h, g.exact_matrices) for h in harmonics]
        S = sympy.Matrix([[_simplify(c) for c in img.vector(exps)] for img in images]).T
        _, pivots = S.rref(iszerofunc=_is_zero, simplify=True)
        rank = len(pivots)
        invariant = [images[k] for k in pivots]
        if any(not p.is_harmonic() for p in invariant):
            raise NumericalError("Averaged polynomial of degree %i lost harmonicity" % mu)
        return InvariantSubspace(mu, orthonormalize(invariant), rank, True)

    # Singular values are measured against the unaveraged harmonics
    floats = orthonormalize(harmonics)
    H = np.array([[float(c) for c in h.vector(exps)] for h in floats]).T
    scale = scipy.linalg.svdvals(H)[0]
    images = [symmetrize_poly(h, g.matrices) for h in floats]
    S = np.array([[float(c) for c in img.vector(exps)] for img in images]).T
    U, sigma, _ = scipy.linalg.svd(S, full_matrices=False)
    rank = int(np.sum(sigma > TOL_RANK * scale))
    if rank == 0:
        return InvariantSubspace(mu, [], 0, False)
    invariant = [
        HomoPoly(nvars, mu, {a: U[i, k] for i, a in enumerate(exps)}) for k in range(rank)
    ]
    return InvariantSubspace(mu, orthonormalize(invariant), rank, False)


def first_invariant(n, g, mu_max=MU_MAX_DEFAULT):
    """(mu_1, subspace, dims_by_degree) for the lowest invariant degree mu_1 >= 1."""
    dims = {}
    for mu in range(1, mu_max + 1):
        sub = invariant_dimension(n, mu, g)
        dims[mu] = sub.dimension
        if sub.dimension > 0:
            return mu, sub, dims
    raise NumericalError(
        "No invariant harmonic polynomial up to degree %i (dims %s)" % (mu_max, str(dims))
    )


def lambda1(n, g, mu_max=MU_MAX_DEFAULT, grid=None):
    """
    First nonzero eigenvalue mu_1 (n + mu_1 - 1) of -Laplace on invariant
    functions. With a grid, the zero mean of the eigenfunctions is also
    asserted by quadrature.
    """
    if mu_max < 1:
        raise ValueError("mu_max must be positive, got %i" % mu_max)
    mu1, sub, _ = first_invariant(n, g, mu_max)
    if grid is not None:
        for poly in sub.basis:
            mean = grid.integrate(poly.evaluate(grid.nodes))
            if abs(mean) > 1e-10:
                raise NumericalError("Invariant eigenfunction has mean %.3e" % mean)
    return float(mu1 * (n + mu1 - 1))


# =============================================================================
# Simplex witness and spectral checks
# =============================================================================


def build_h_simplex(frame):
    """
    h(y) = sum over ordered distinct triples l_i l_j l_k with l_i = <q_i, y>,
    i.e. 6 e_3(l_1, ..., l_{n+2}).
    """
    nvars = frame.n + 1
    syms = variables(nvars)
    Q = frame.exact_vertices if frame.exact_vertices is not None else sympy.Matrix(frame.vertices)
    forms = [sum((Q[i, j] * syms[j] for j in range(nvars)), sympy.Integer(0)) for i in range(Q.shape[0])]
    e3 = sympy.Integer(0)
    for i, j, k in itertools.combinations(range(len(forms)), 3):
        e3 += forms[i] * forms[j] * forms[k]
    poly = HomoPoly.from_expr(6 * e3, nvars)
    poly = HomoPoly(nvars, 3, {a: _simplify(c) for a, c in poly.coeffs.items()})
    if poly.is_zero:
        raise NumericalError("Degenerate simplex frame: the cubic witness vanishes")
    return poly


def rayleigh_quotient(poly, grid):
    """int |grad xi|^2 / int xi^2 for xi = poly restricted to the sphere."""
    values = poly.evaluate(grid.nodes)
    grad = poly.sphere_gradient(grid.nodes)
    return grid.integrate(np.sum(grad**2, axis=1)) / grid.integrate(values**2)


def degree_two_system(frame):
    """
    Matrix of the linear system sum_i lambda_i <q_j, e_i>^2 + d = 0 (rows j),
    with e_i the Gram-Schmidt basis of q_1, ..., q_{n+1}; returns
    (matrix, rank, null vector scaled to last entry -1).
    """
    q = np.asarray(frame.vertices)
    n = frame.n
    E, _ = np.linalg.qr(q[: n + 1].T)
    coords = q @ E
    A = np.column_stack([coords**2, np.ones(n + 2)])
    rank = np.linalg.matrix_rank(A, tol=1e-10)
    null = scipy.linalg.null_space(A, rcond=1e-10)
    vector = null[:, 0] / -null[-1, 0] if null.shape[1] == 1 else None
    return A, int(rank), vector
