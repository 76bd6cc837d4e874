"""
Support functions on S^n and their Monge-Ampere data.

A support function is stored as coefficients over a basis of functions whose
1-homogeneous extensions H have analytic jets. On the unit sphere the matrix
W = grad^2 h + h I in an orthonormal tangent frame F equals F^T D^2H F, and
the gnomonic chart gives the same matrix through v(y) = H(y, sigma):
D^2v = (1/s) G^T W G with G = F^T E, E = [I; 0], so that
det W = s^{n+2} det D^2v.
"""

import functools, math
from dataclasses import dataclass

import numpy as np

import lpmink.spectral as spectral

from lpmink.constant import (
    L_MAX_SPHERE,
    POLE_FALLBACK_ANGLE,
    SOUTH,
    TOL_ASYMMETRY,
    TOL_CONVEX,
)
from lpmink.print_ import NumericalError, print_warning
from lpmink.sphere_geometry import lift, project
import lpmink.type_ as type_


def _nodes(X):
    return np.atleast_2d(np.asarray(X, dtype=np.float64))


# =============================================================================
# Tangent frames
# =============================================================================


def tangent_frame(X):
    """
    Orthonormal tangent frames, shape (N, n+1, n).

    n = 1 uses t = (-X_2, X_1). n = 2 uses u_1 = a x X/|a x X|, u_2 = X x u_1
    with a = e_3, or a = e_1 within the polar fallback cap.
    """
    X = _nodes(X)
    N, dim = X.shape
    if dim == 2:
        return np.stack([-X[:, 1], X[:, 0]], axis=1)[:, :, None]
    if dim != 3:
        raise ValueError("Tangent frames are implemented for n = 1, 2")
    a = np.zeros((N, 3))
    polar = np.abs(X[:, 2]) > math.cos(POLE_FALLBACK_ANGLE)
    a[~polar, 2] = 1.0
    a[polar, 0] = 1.0
    u1 = np.cross(a, X)
    u1 /= np.linalg.norm(u1, axis=1, keepdims=True)
    u2 = np.cross(X, u1)
    return np.stack([u1, u2], axis=2)


def frame_matrix(frame, D2H):
    """F^T D^2H F for stacked frames and ambient Hessians."""
    return np.einsum("nai,nab,nbj->nij", frame, D2H, frame)


def cofactor(W):
    """Cofactor matrices of stacked n x n matrices, n = 1, 2."""
    n = W.shape[-1]
    if n == 1:
        return np.ones_like(W)
    if n == 2:
        U = np.empty_like(W)
        U[..., 0, 0] = W[..., 1, 1]
        U[..., 1, 1] = W[..., 0, 0]
        U[..., 0, 1] = -W[..., 1, 0]
        U[..., 1, 0] = -W[..., 0, 1]
        return U
    return np.linalg.det(W)[..., None, None] * np.linalg.inv(W).swapaxes(-1, -2)


# =============================================================================
# Bases
# =============================================================================
# Every basis evaluates, at unit vectors X (N, n+1), per-function values
# (K, N), tangential sphere gradients (K, N, n+1) and ambient Hessians of the
# 1-homogeneous extensions (K, N, n+1, n+1).


class Basis:
    n = None
    size = None

    def jets(self, X):
        raise NotImplementedError

    def values(self, X):
        return self.jets(X)[0]

    def combined_jets(self, X, c):
        value, grad, hess = self.jets(X)
        return (
            np.tensordot(c, value, axes=1),
            np.tensordot(c, grad, axes=1),
            np.tensordot(c, hess, axes=1),
        )

    @property
    def degrees(self):
        """Harmonic degree of each basis function (None when not graded)."""
        return None

    def to_dict(self):
        return {"type": type(self).__name__, "n": self.n, "size": self.size}


class FourierBasis(Basis):
    """1, cos k theta, sin k theta for k = 1..L on S^1."""

    def __init__(self, L):
        self.n = 1
        self.L = int(L)
        self.size = 2 * self.L + 1

    @property
    def degrees(self):
        return np.array([0] + [k for k in range(1, self.L + 1) for _ in range(2)])

    def _profiles(self, theta):
        N = theta.shape[0]
        k = np.arange(1, self.L + 1)
        ct = np.cos(np.outer(k, theta))
        st = np.sin(np.outer(k, theta))
        value = np.empty((self.size, N))
        d1 = np.empty((self.size, N))
        d2 = np.empty((self.size, N))
        value[0], d1[0], d2[0] = 1.0, 0.0, 0.0
        value[1::2], value[2::2] = ct, st
        d1[1::2], d1[2::2] = -k[:, None] * st, k[:, None] * ct
        d2[1::2], d2[2::2] = -(k**2)[:, None] * ct, -(k**2)[:, None] * st
        return value, d1, d2

    def jets(self, X):
        X = _nodes(X)
        theta = np.arctan2(X[:, 1], X[:, 0])
        t = np.stack([-X[:, 1], X[:, 0]], axis=1)
        value, d1, d2 = self._profiles(theta)
        grad = d1[:, :, None] * t[None]
        hess = (d2 + value)[:, :, None, None] * (t[:, :, None] * t[:, None, :])[None]
        return value, grad, hess

    def combined_jets(self, X, c):
        X = _nodes(X)
        theta = np.arctan2(X[:, 1], X[:, 0])
        t = np.stack([-X[:, 1], X[:, 0]], axis=1)
        value, d1, d2 = (c @ a for a in self._profiles(theta))
        return value, d1[:, None] * t, (d2 + value)[:, None, None] * (t[:, :, None] * t[:, None, :])

    def coefficient_function(self, c):
        """Callable theta -> sum of the modes, used by the ODE lift."""
        c = np.asarray(c)
        return lambda theta: self._profiles(np.atleast_1d(theta))[0].T @ c

    def to_dict(self):
        return {"type": "FourierBasis", "n": 1, "L": self.L}


class PolyBasis(Basis):
    """
    Restrictions of homogeneous polynomials P_k to S^n. With a = 1 - l for
    degree l, the 1-homogeneous extension |y|^a P has, on the sphere,
      grad_S = grad P - l P X,
      D^2H  = a(a-2) P X X^T + a (P I + X grad P^T + grad P X^T) + D^2P.
    Polynomials of one degree share a monomial table.
    """

    def __init__(self, n, polys):
        self.n = int(n)
        self.polys = list(polys)
        self.size = len(self.polys)
        nvars = self.n + 1
        self._groups = {}
        for k, poly in enumerate(self.polys):
            if poly.nvars != nvars:
                raise ValueError("Polynomial in %i variables for n = %i" % (poly.nvars, self.n))
            self._groups.setdefault(poly.degree, []).append(k)
        self._tables = {}
        for degree, index in self._groups.items():
            exps = spectral.exponents(nvars, degree)
            matrix = np.array(
                [[float(c) for c in self.polys[k].vector(exps)] for k in index]
            ).T
            self._tables[degree] = (np.array(exps, dtype=np.int64).reshape(-1, nvars), matrix)

    @classmethod
    def harmonic(cls, n, L):
        """Sphere-orthonormal harmonics of degree 0..L."""
        return cls(n, _harmonic_polys(n, L))

    @property
    def degrees(self):
        return np.array([poly.degree for poly in self.polys])

    def _poly_jets(self, X, degree, C):
        """Value (N, M), gradient (N, M, d), Hessian (N, M, d, d) of the polynomials X^exps @ C."""
        exps, _ = self._tables[degree]
        N, d = X.shape
        M = C.shape[1]
        value = spectral.monomials(X, exps) @ C
        grad = np.zeros((N, M, d))
        hess = np.zeros((N, M, d, d))
        if degree >= 1:
            for i in range(d):
                shift = np.zeros(d, dtype=np.int64)
                shift[i] = 1
                grad[:, :, i] = spectral.monomials(X, exps - shift) @ (C * exps[:, i : i + 1])
        if degree >= 2:
            for i in range(d):
                for j in range(i, d):
                    shift = np.zeros(d, dtype=np.int64)
                    shift[i] += 1
                    shift[j] += 1
                    factor = (exps[:, i] * (exps[:, j] - (i == j)))[:, None]
                    hess[:, :, i, j] = spectral.monomials(X, exps - shift) @ (C * factor)
                    hess[:, :, j, i] = hess[:, :, i, j]
        return value, grad, hess

    def _extend(self, X, degree, value, grad, hess):
        a = 1.0 - degree
        d = X.shape[1]
        XX = X[:, None, :, None] * X[:, None, None, :]
        Xg = X[:, None, :, None] * grad[:, :, None, :]
        D2H = (
            a * (a - 2.0) * value[:, :, None, None] * XX
            + a * value[:, :, None, None] * np.eye(d)
            + a * (Xg + Xg.swapaxes(-1, -2))
            + hess
        )
        grad_S = grad - degree * value[:, :, None] * X[:, None, :]
        return grad_S, D2H

    def jets(self, X):
        X = _nodes(X)
        N, d = X.shape
        value = np.empty((self.size, N))
        grad = np.empty((self.size, N, d))
        hess = np.empty((self.size, N, d, d))
        for degree, index in self._groups.items():
            _, matrix = self._tables[degree]
            v, g, h = self._poly_jets(X, degree, matrix)
            g_S, D2H = self._extend(X, degree, v, g, h)
            value[index] = v.T
            grad[index] = g_S.swapaxes(0, 1)
            hess[index] = D2H.swapaxes(0, 1)
        return value, grad, hess

    def combined_jets(self, X, c):
        X = _nodes(X)
        N, d = X.shape
        value = np.zeros(N)
        grad = np.zeros((N, d))
        hess = np.zeros((N, d, d))
        c = np.asarray(c, dtype=np.float64)
        for degree, index in self._groups.items():
            _, matrix = self._tables[degree]
            C = (matrix @ c[index])[:, None]
            v, g, h = self._poly_jets(X, degree, C)
            g_S, D2H = self._extend(X, degree, v, g, h)
            value += v[:, 0]
            grad += g_S[:, 0]
            hess += D2H[:, 0]
        return value, grad, hess

    def to_dict(self):
        return {
            "type": "PolyBasis",
            "n": self.n,
            "polys": [poly.to_float().to_dict() for poly in self.polys],
        }


class EllipsoidBasis(Basis):
    """The single function |Lambda X|, support function of Lambda^T B^{n+1}."""

    def __init__(self, Lam):
        self.Lam = np.asarray(Lam, dtype=np.float64)
        if self.Lam.ndim != 2 or self.Lam.shape[0] != self.Lam.shape[1]:
            raise ValueError("Ellipsoid matrix must be square")
        self.n = self.Lam.shape[0] - 1
        self.size = 1

    def jets(self, X):
        X = _nodes(X)
        G = self.Lam.T @ self.Lam
        h = np.linalg.norm(X @ self.Lam.T, axis=1)
        GX = X @ G
        grad = GX / h[:, None]
        grad = grad - np.sum(grad * X, axis=1, keepdims=True) * X
        hess = (G[None] - GX[:, :, None] * GX[:, None, :] / (h**2)[:, None, None]) / h[:, None, None]
        return h[None], grad[None], hess[None]

    def to_dict(self):
        return {"type": "EllipsoidBasis", "n": self.n, "Lambda": self.Lam.tolist()}


class TransformedBasis(Basis):
    """
    Average over orthogonal maps g of the parent functions composed with g:
    value h(gX), gradient g^T grad(gX), Hessian g^T D^2H(gX) g. A single
    matrix is a rotation.
    """

    def __init__(self, parent, matrices):
        self.parent = parent
        self.matrices = [np.asarray(M, dtype=np.float64) for M in matrices]
        self.n = parent.n
        self.size = parent.size

    @property
    def degrees(self):
        return self.parent.degrees

    def jets(self, X):
        X = _nodes(X)
        value = grad = hess = 0.0
        for M in self.matrices:
            v, g, h = self.parent.jets(X @ M.T)
            value = value + v
            grad = grad + g @ M
            hess = hess + np.einsum("ai,knab,bj->knij", M, h, M)
        m = len(self.matrices)
        return value / m, grad / m, hess / m

    def combined_jets(self, X, c):
        X = _nodes(X)
        value = grad = hess = 0.0
        for M in self.matrices:
            v, g, h = self.parent.combined_jets(X @ M.T, c)
            value = value + v
            grad = grad + g @ M
            hess = hess + np.einsum("ai,nab,bj->nij", M, h, M)
        m = len(self.matrices)
        return value / m, grad / m, hess / m

    def to_dict(self):
        return {
            "type": "TransformedBasis",
            "parent": self.parent.to_dict(),
            "matrices": [M.tolist() for M in self.matrices],
        }


class LinearCombinationBasis(Basis):
    """Functions phi_j = sum_k R[k, j] psi_k of a parent basis psi."""

    def __init__(self, parent, R):
        self.parent = parent
        self.R = np.asarray(R, dtype=np.float64)
        if self.R.ndim != 2 or self.R.shape[0] != parent.size:
            raise ValueError("Combination matrix must have %i rows" % parent.size)
        self.n = parent.n
        self.size = self.R.shape[1]

    @property
    def degrees(self):
        parent = self.parent.degrees
        if parent is None:
            return None
        return np.array(
            [parent[np.abs(self.R[:, j]) > 1e-12].max(initial=0) for j in range(self.size)]
        )

    def jets(self, X):
        X = _nodes(X)
        N, d = X.shape
        value = np.empty((self.size, N))
        grad = np.empty((self.size, N, d))
        hess = np.empty((self.size, N, d, d))
        for j in range(self.size):
            value[j], grad[j], hess[j] = self.parent.combined_jets(X, self.R[:, j])
        return value, grad, hess

    def combined_jets(self, X, c):
        return self.parent.combined_jets(X, self.R @ np.asarray(c))

    def to_dict(self):
        return {
            "type": "LinearCombinationBasis",
            "parent": self.parent.to_dict(),
            "R": self.R.tolist(),
        }


@functools.lru_cache(maxsize=None)
def _harmonic_polys(n, L):
    polys = []
    for mu in range(L + 1):
        polys += spectral.orthonormalize(spectral.harmonic_basis(n, mu))
    return tuple(polys)


def default_L(n, resolution):
    """resolution/2, capped for n = 2."""
    if n == 1:
        return resolution // 2
    L = min(resolution // 2, L_MAX_SPHERE)
    if resolution // 2 > L_MAX_SPHERE:
        print_warning("Harmonic degree truncated to %i" % L_MAX_SPHERE)
    return L


def make_basis(n, L):
    if n == 1:
        return FourierBasis(L)
    if n == 2:
        if L > L_MAX_SPHERE:
            raise ValueError("Harmonic degree %i exceeds the cap %i" % (L, L_MAX_SPHERE))
        return PolyBasis.harmonic(n, L)
    raise ValueError("Unsupported sphere dimension n = %s" % str(n))


# =============================================================================
# Support function
# =============================================================================


@dataclass(frozen=True, eq=False)
class FrameHessian:
    X: np.ndarray
    frame: np.ndarray
    W: np.ndarray

    @property
    def det(self):
        return float(np.linalg.det(self.W))

    @property
    def eigenvalues(self):
        return np.linalg.eigvalsh(self.W)

    @property
    def cofactor(self):
        return cofactor(self.W[None])[0]


class SupportFunction:
    """
    h = sum_k c_k phi_k over a basis, with nodal caches (values, sphere
    gradient, W, det W, smallest eigenvalue of W) when a grid is attached.
    """

    def __init__(self, basis, coeffs, grid=None):
        self.basis = basis
        self.n = basis.n
        self.coeffs = np.array(coeffs, dtype=np.float64).reshape(basis.size)
        if not np.all(np.isfinite(self.coeffs)):
            raise ValueError("Support function coefficients must be finite")
        self.coeffs.flags.writeable = False
        self.grid = None
        if grid is not None:
            self._attach(grid)

    def _attach(self, grid):
        if grid.n != self.n:
            raise ValueError("Grid dimension %i does not match n = %i" % (grid.n, self.n))
        self.grid = grid
        value, grad, D2H = self.basis.combined_jets(grid.nodes, self.coeffs)
        frame = tangent_frame(grid.nodes)
        W = frame_matrix(frame, D2H)
        asymmetry = np.max(np.abs(W - W.swapaxes(-1, -2)))
        if asymmetry > TOL_ASYMMETRY * max(1.0, np.max(np.abs(W))):
            print_warning("Frame Hessian asymmetry %.3e" % asymmetry)
        W = 0.5 * (W + W.swapaxes(-1, -2))
        self.values = value
        self.gradient = grad
        self.W = W
        self.det = np.linalg.det(W)
        self.eig_min = np.linalg.eigvalsh(W)[:, 0]
        for array in (self.values, self.gradient, self.W, self.det, self.eig_min):
            array.flags.writeable = False

    # -------------------------------------------------------------------------
    # Construction
    # -------------------------------------------------------------------------

    @classmethod
    def constant(cls, n, value=1.0, grid=None):
        basis = FourierBasis(0) if n == 1 else PolyBasis.harmonic(n, 0)
        phi0 = basis.values(np.eye(n + 1)[-1:])[0, 0]
        return cls(basis, [value / phi0], grid)

    @classmethod
    def ellipsoid(cls, Lam, grid=None):
        return cls(EllipsoidBasis(Lam), [1.0], grid)

    @classmethod
    def from_function(cls, func, n, L, grid, basis=None):
        """
        Least-squares projection of func(nodes) onto the basis in the
        quadrature norm. L = None takes the cutoff from the grid resolution.
        """
        if basis is None:
            basis = make_basis(n, default_L(n, grid.resolution) if L is None else L)
        B = basis.values(grid.nodes)
        w = np.sqrt(grid.weights)
        values = np.asarray(func(grid.nodes), dtype=np.float64)
        c, *_ = np.linalg.lstsq((B * w).T, values * w, rcond=None)
        return cls(basis, c, grid)

    def with_grid(self, grid):
        return SupportFunction(self.basis, self.coeffs, grid)

    def rotate(self, R):
        """h o R"""
        return SupportFunction(TransformedBasis(self.basis, [R]), self.coeffs, self.grid)

    def scale(self, c):
        return SupportFunction(self.basis, c * self.coeffs, self.grid)

    # -------------------------------------------------------------------------
    # Evaluation
    # -------------------------------------------------------------------------

    def evaluate(self, X):
        return self.basis.combined_jets(_nodes(X), self.coeffs)[0]

    def __call__(self, X):
        return self.evaluate(X)

    def sphere_gradient(self, X):
        return self.basis.combined_jets(_nodes(X), self.coeffs)[1]

    def ambient_hessian(self, X):
        return self.basis.combined_jets(_nodes(X), self.coeffs)[2]

    def require_grid(self):
        if self.grid is None:
            raise ValueError("Support function has no attached grid")
        return self.grid

    def certify_convex(self, tol=TOL_CONVEX):
        self.require_grid()
        worst = int(np.argmin(self.eig_min))
        if self.eig_min[worst] < tol or self.values[worst] <= 0.0:
            raise NumericalError(
                "Convexity certificate failed: smallest eigenvalue %.6e of W at node %i (X = %s), h = %.6e"
                % (self.eig_min[worst], worst, np.array2string(self.grid.nodes[worst]), self.values[worst])
            )

    def to_rows(self):
        grid = self.require_grid()
        rows = np.zeros(grid.size, dtype=type_.make_type_support_row(self.n))
        for i in range(self.n + 1):
            rows["X%i" % (i + 1)] = grid.nodes[:, i]
        rows["h"] = self.values
        rows["det_W"] = self.det
        rows["eig_min"] = self.eig_min
        return rows

    def to_dict(self):
        return {"n": self.n, "basis": self.basis.to_dict(), "coeffs": self.coeffs.tolist()}


# =============================================================================
# Weights
# =============================================================================


@dataclass(frozen=True)
class Weight:
    """A positive function on S^n with its tangential gradient."""

    value: object
    gradient: object
    name: str = "weight"

    def __call__(self, X):
        return self.value(_nodes(X))


def constant_weight(c=1.0):
    return Weight(
        value=lambda X: np.full(X.shape[0], float(c)),
        gradient=lambda X: np.zeros_like(X),
        name="constant",
    )


def linear_weight(c0, a):
    """f = c0 + a.X"""
    a = np.asarray(a, dtype=np.float64)
    return Weight(
        value=lambda X: c0 + X @ a,
        gradient=lambda X: a[None, :] - (X @ a)[:, None] * X,
        name="linear",
    )


def power_weight(h, exponent, scale=1.0):
    """f = scale * h^exponent for a support function h."""

    def value(X):
        return scale * h.evaluate(X) ** exponent

    def gradient(X):
        v, g, _ = h.basis.combined_jets(X, h.coeffs)
        return (scale * exponent * v ** (exponent - 1.0))[:, None] * g

    return Weight(value=value, gradient=gradient, name="power")


def as_weight(f):
    if isinstance(f, Weight):
        return f
    if np.isscalar(f):
        return constant_weight(f)
    raise ValueError("Weight must be a Weight or a positive scalar")


def ellipsoid_solution(Lam, p, grid=None):
    """
    (h, f) with h = |Lambda X|, det Lambda = 1 and f = h^{-(n+1+p)}; since
    det W = h^{-(n+2)} the pair solves det W = f h^{p-1} for every p.
    """
    Lam = np.asarray(Lam, dtype=np.float64)
    det = np.linalg.det(Lam)
    if det <= 0.0:
        raise ValueError("Ellipsoid matrix must have positive determinant")
    Lam = Lam / det ** (1.0 / Lam.shape[0])
    h = SupportFunction.ellipsoid(Lam, grid)
    n = Lam.shape[0] - 1
    return h, power_weight(h, -(n + 1.0 + p))


# =============================================================================
# Operations
# =============================================================================


def hessian_frame(h, X):
    """W at one sphere point through the gnomonic chart of its hemisphere."""
    point = project(X)
    n = h.n
    s = point.s
    y = np.append(point.x, float(point.hemisphere))
    # D^2v(x) = E^T D^2H(y) E and D^2H(y) = D^2H(X)/s
    D2v = h.ambient_hessian(y / np.linalg.norm(y))[0][:n, :n] / s
    frame = tangent_frame(point.X)[0]
    # G^T = F[:n, :]
    Gt_inv = np.linalg.inv(frame[:n, :])
    W = s * Gt_inv @ D2v @ Gt_inv.T
    return FrameHessian(X=point.X, frame=frame, W=0.5 * (W + W.T))


def chart_hessian(h, x, hemisphere=SOUTH):
    """D^2 v at chart coordinate x with v(y) = sqrt(1+|y|^2) h(lift(y))."""
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    X = lift(x, hemisphere)
    s = math.sqrt(1.0 + x @ x)
    return h.ambient_hessian(X)[0][: h.n, : h.n] / s


def chart_residual(h, f, p, x, hemisphere=SOUTH):
    """det D^2v - (1+|x|^2)^{-(n+1+p)/2} f v^{p-1} at chart coordinate x."""
    f = as_weight(f)
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    X = lift(x, hemisphere)
    s = math.sqrt(1.0 + x @ x)
    v = s * h.evaluate(X)[0]
    rhs = s ** (-(h.n + 1.0 + p)) * f(X)[0] * v ** (p - 1.0)
    return np.linalg.det(chart_hessian(h, x, hemisphere)) - rhs


def volume(h, grid=None):
    """V = (1/(n+1)) int h det W"""
    if grid is not None and h.grid is not grid:
        h = h.with_grid(grid)
    h.certify_convex()
    return h.grid.integrate(h.values * h.det) / (h.n + 1)


def lp_integral(h, p, grid=None):
    if grid is not None and h.grid is not grid:
        h = h.with_grid(grid)
    grid = h.require_grid()
    if np.any(h.values <= 0.0):
        worst = int(np.argmin(h.values))
        raise ValueError(
            "Non-positive support function value %.6e at node %i" % (h.values[worst], worst)
        )
    return grid.integrate(h.values**p)


def ma_residual(h, f, p, grid=None):
    """max |det W - f h^{p-1}| / (1 + |f h^{p-1}|) over the grid nodes."""
    if grid is not None and h.grid is not grid:
        h = h.with_grid(grid)
    grid = h.require_grid()
    f = as_weight(f)
    rhs = f(grid.nodes) * h.values ** (p - 1.0)
    return float(np.max(np.abs(h.det - rhs) / (1.0 + np.abs(rhs))))


def cofactor_divergence(h, grid=None, test=None):
    """
    Weak divergence check of the cofactor matrix U of W(h): for test
    functions phi, int tr(U grad^2 phi) = int tr(U W(phi)) - int phi tr U
    vanishes when div U = 0. Returns the largest relative value over the
    test basis (harmonics of degree <= 4 by default).
    """
    if grid is not None and h.grid is not grid:
        h = h.with_grid(grid)
    grid = h.require_grid()
    test = make_basis(h.n, 4) if test is None else test
    value, _, D2H = test.jets(grid.nodes)
    frame = tangent_frame(grid.nodes)
    U = cofactor(h.W)
    trU = np.trace(U, axis1=1, axis2=2)
    scale = grid.integrate(np.abs(trU))
    worst = 0.0
    for k in range(test.size):
        Wk = frame_matrix(frame, D2H[k])
        integral = grid.integrate(np.einsum("nij,nji->n", U, Wk) - value[k] * trU)
        worst = max(worst, abs(integral) / (scale * max(np.max(np.abs(value[k])), 1.0)))
    return worst
