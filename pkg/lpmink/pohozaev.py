"""
Projective vector fields on S^n and the integral identity
int (grad_xi f + beta f) h^p = 0 satisfied by solutions of
det(grad^2 h + h I) = f h^{p-1} with p <= -n-1.

The field with parameters (A, B, C, D) is the tangential part of the linear
map M = [[A - D I, B], [C^T, 0]],
    V(X) = M X - <M X, X> X,
whose south-chart expression is xi = (C.x) x + (A - D I) x - B; the north
hemisphere follows from V(-X) = -V(X). The weight is
    beta(X) = (p+n+1) (tr M/(n+1) - X^T M X).
"""

from dataclasses import dataclass

import numpy as np

import lpmink.kernel as kernel

from lpmink.constant import TOL_NORM
from lpmink.sphere_geometry import make_grid
from lpmink.support_function import as_weight


@dataclass(frozen=True, eq=False)
class ProjectiveField:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: float

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=np.float64))
        B = np.atleast_1d(np.asarray(self.B, dtype=np.float64))
        C = np.atleast_1d(np.asarray(self.C, dtype=np.float64))
        n = A.shape[0]
        if A.shape != (n, n) or B.shape != (n,) or C.shape != (n,):
            raise ValueError("Projective field parameters have inconsistent shapes")
        if abs(np.trace(A)) > TOL_NORM * max(1.0, np.max(np.abs(A))):
            raise ValueError("Projective field needs trace-free A, got tr A = %.3e" % np.trace(A))
        if np.max(np.abs(A - A.T)) > TOL_NORM * max(1.0, np.max(np.abs(A))):
            raise ValueError("Projective field needs symmetric A")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "D", float(self.D))

    @property
    def n(self):
        return self.A.shape[0]

    @classmethod
    def scaling(cls, n, D=1.0):
        """xi = -D x in the south chart."""
        return cls(np.zeros((n, n)), np.zeros(n), np.zeros(n), D)

    def matrix(self):
        n = self.n
        M = np.zeros((n + 1, n + 1))
        M[:n, :n] = self.A - self.D * np.eye(n)
        M[:n, n] = self.B
        M[n, :n] = self.C
        return M

    def __add__(self, other):
        return ProjectiveField(self.A + other.A, self.B + other.B, self.C + other.C, self.D + other.D)

    def __mul__(self, c):
        return ProjectiveField(c * self.A, c * self.B, c * self.C, c * self.D)

    __rmul__ = __mul__

    def to_dict(self):
        return {"A": self.A.tolist(), "B": self.B.tolist(), "C": self.C.tolist(), "D": self.D}


def random_field(n, rng, scale=1.0):
    """Gaussian draw; A is symmetrized and projected to trace zero."""
    A = rng.normal(size=(n, n))
    A = 0.5 * (A + A.T)
    A -= np.trace(A) / n * np.eye(n)
    B = rng.normal(size=n)
    C = rng.normal(size=n)
    D = rng.normal()
    return ProjectiveField(scale * A, scale * B, scale * C, scale * D)


def _points(X):
    return np.atleast_2d(np.asarray(X, dtype=np.float64))


# =============================================================================
# Field and weight
# =============================================================================


def field_on_sphere(pf, X):
    """Tangent vector at a single point from the chart of its hemisphere."""
    X = np.asarray(X, dtype=np.float64)
    if abs(X[-1]) <= 0.0:
        raise ValueError("Point lies on the equator X_{n+1} = 0")
    return kernel.field_at(pf.A, pf.B, pf.C, pf.D, X)


def beta_weight(pf, X, p):
    X = np.asarray(X, dtype=np.float64)
    if abs(X[-1]) <= 0.0:
        raise ValueError("Point lies on the equator X_{n+1} = 0")
    return kernel.beta_at(pf.A, pf.B, pf.C, pf.D, X, float(p))


def field_values(pf, X):
    """V at many points (N, n+1) through the global linear form."""
    X = _points(X)
    MX = X @ pf.matrix().T
    return MX - np.sum(MX * X, axis=1, keepdims=True) * X


def beta_values(pf, X, p):
    X = _points(X)
    M = pf.matrix()
    quadratic = np.einsum("ni,ij,nj->n", X, M, X)
    return (p + pf.n + 1.0) * (np.trace(M) / (pf.n + 1.0) - quadratic)


def K_values(f, pf, p, X):
    """K_f = grad_xi f + beta f at points X."""
    f = as_weight(f)
    X = _points(X)
    return np.sum(f.gradient(X) * field_values(pf, X), axis=1) + beta_values(pf, X, p) * f(X)


def identity_integral(f, h, p, pf, grid):
    """int K_f h^p over the grid."""
    if pf.n != grid.n or h.n != grid.n:
        raise ValueError("Dimension mismatch between field, support function and grid")
    values = h.values if h.grid is grid else h.evaluate(grid.nodes)
    if np.any(values <= 0.0):
        raise ValueError("Support function must be positive on the grid")
    return float(grid.integrate(K_values(f, pf, p, grid.nodes) * values**p))


def refinement(f, h, p, pf, n, resolutions):
    """Identity integrals for a sequence of grid resolutions."""
    return [identity_integral(f, h, p, pf, make_grid(n, res)) for res in resolutions]


def equator_jump(pf, p, height=1e-10):
    """
    Largest jump of the chart-evaluated field and weight across the equator,
    comparing (sqrt(1-t^2) e_i, -t) with (sqrt(1-t^2) e_i, t) for each axis.
    """
    n = pf.n
    jump_field = 0.0
    jump_beta = 0.0
    for i in range(n):
        south = np.zeros(n + 1)
        south[i] = np.sqrt(1.0 - height**2)
        south[n] = -height
        north = south.copy()
        north[n] = height
        jump_field = max(
            jump_field, np.max(np.abs(field_on_sphere(pf, south) - field_on_sphere(pf, north)))
        )
        jump_beta = max(jump_beta, abs(beta_weight(pf, south, p) - beta_weight(pf, north, p)))
    return jump_field, jump_beta
