"""
Quadrature grids on S^n and the gnomonic hemisphere charts.

A node X off the equator has chart coordinate x = X'/|X_{n+1}| and conformal
factor s = sqrt(1 + |x|^2) = 1/|X_{n+1}|; the chart measure satisfies
dsigma = s^-(n+1) dx.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

import lpmink.kernel as kernel

from lpmink.constant import EQUATOR_TOL, NORTH, PI, RESOLUTION_MIN, SOUTH


def sphere_area(n):
    """alpha_n = |S^n|"""
    if n == 1:
        return 2.0 * PI
    if n == 2:
        return 4.0 * PI
    raise ValueError("Unsupported sphere dimension n = %s" % str(n))


def _freeze(array):
    array = np.ascontiguousarray(array, dtype=np.float64)
    array.flags.writeable = False
    return array


# =============================================================================
# Grid
# =============================================================================


@dataclass(frozen=True, eq=False)
class SphereGrid:
    n: int
    resolution: int
    nodes: np.ndarray
    weights: np.ndarray
    hemisphere: np.ndarray = field(init=False)
    chart: np.ndarray = field(init=False)
    conformal: np.ndarray = field(init=False)

    def __post_init__(self):
        nodes = _freeze(self.nodes)
        weights = _freeze(self.weights)
        last = nodes[:, -1]
        if np.any(np.abs(last) <= EQUATOR_TOL):
            raise ValueError("Grid has a node on the equator")
        hemisphere = np.where(last > 0.0, NORTH, SOUTH).astype(np.int64)
        hemisphere.flags.writeable = False
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "hemisphere", hemisphere)
        object.__setattr__(self, "chart", _freeze(nodes[:, :-1] / np.abs(last)[:, None]))
        object.__setattr__(self, "conformal", _freeze(1.0 / np.abs(last)))

    @property
    def size(self):
        return self.weights.shape[0]

    @property
    def area(self):
        return sphere_area(self.n)

    def integrate(self, values):
        """Quadrature of nodal values along the first axis."""
        values = np.asarray(values, dtype=np.float64)
        return np.tensordot(self.weights, values, axes=(0, 0))

    def inner(self, a, b):
        return self.integrate(np.asarray(a) * np.asarray(b))

    def mean(self, values):
        return self.integrate(values) / self.area

    def node_permutation(self, matrix, tol=1e-10):
        """
        Index map perm with nodes[perm[i]] = matrix @ nodes[i], or None when
        the grid is not closed under the map.
        """
        images = self.nodes @ np.asarray(matrix).T
        distance, perm = cKDTree(self.nodes).query(images)
        if np.max(distance) > tol:
            return None
        return perm

    def to_dict(self):
        return {
            "n": self.n,
            "resolution": self.resolution,
            "nodes": self.nodes.tolist(),
            "weights": self.weights.tolist(),
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            n=int(data["n"]),
            resolution=int(data.get("resolution", len(data["weights"]))),
            nodes=np.array(data["nodes"], dtype=np.float64),
            weights=np.array(data["weights"], dtype=np.float64),
        )


def make_grid(n, resolution):
    """
    Build the quadrature grid.

    n = 1 uses N = resolution equispaced angles theta_k = 2 pi (k + 1/2)/N with
    weights 2 pi/N, exact for e^{i k theta}, |k| < N. n = 2 uses a
    Gauss-Legendre rule of order `resolution` in cos(colatitude) times
    2*resolution equispaced longitudes, exact for harmonics of degree below
    2*resolution in each factor. The half offset and even orders keep every
    node off the equator.
    """
    if n not in (1, 2):
        raise ValueError("Unsupported sphere dimension n = %s, expected 1 or 2" % str(n))
    if resolution < RESOLUTION_MIN:
        raise ValueError(
            "Grid resolution %i is below the minimum %i" % (resolution, RESOLUTION_MIN)
        )

    if n == 1:
        theta = 2.0 * PI * (np.arange(resolution) + 0.5) / resolution
        nodes = np.column_stack([np.cos(theta), np.sin(theta)])
        weights = np.full(resolution, 2.0 * PI / resolution)
        return SphereGrid(1, resolution, nodes, weights)

    if resolution % 2 != 0:
        raise ValueError("Gauss-Legendre order must be even, got %i" % resolution)
    t, w = np.polynomial.legendre.leggauss(resolution)
    N_phi = 2 * resolution
    phi = 2.0 * PI * (np.arange(N_phi) + 0.5) / N_phi
    T, PHI = np.meshgrid(t, phi, indexing="ij")
    rho = np.sqrt(1.0 - T**2)
    nodes = np.column_stack(
        [(rho * np.cos(PHI)).ravel(), (rho * np.sin(PHI)).ravel(), T.ravel()]
    )
    weights = np.outer(w, np.full(N_phi, 2.0 * PI / N_phi)).ravel()
    return SphereGrid(2, resolution, nodes, weights)


def chart_quadrature(n, resolution, radius):
    """
    Quadrature on the chart ball |x| < radius: Gauss-Legendre in x for n = 1,
    Gauss-Legendre in the polar radius times uniform angles for n = 2.
    Returns nodes (M, n) and weights (M,) including the polar Jacobian.
    """
    t, w = np.polynomial.legendre.leggauss(resolution)
    if n == 1:
        return (radius * t)[:, None], radius * w
    if n == 2:
        r = 0.5 * radius * (t + 1.0)
        wr = 0.5 * radius * w * r
        N_phi = 2 * resolution
        phi = 2.0 * PI * np.arange(N_phi) / N_phi
        R, PHI = np.meshgrid(r, phi, indexing="ij")
        nodes = np.column_stack([(R * np.cos(PHI)).ravel(), (R * np.sin(PHI)).ravel()])
        weights = np.outer(wr, np.full(N_phi, 2.0 * PI / N_phi)).ravel()
        return nodes, weights
    raise ValueError("Unsupported chart dimension n = %s" % str(n))


# =============================================================================
# Charts
# =============================================================================


@dataclass(frozen=True, eq=False)
class ChartPoint:
    X: np.ndarray
    x: np.ndarray
    s: float
    hemisphere: int


def project(X):
    """Chart point of X in its own hemisphere."""
    X = np.asarray(X, dtype=np.float64)
    if abs(abs(np.linalg.norm(X)) - 1.0) > 1e-12:
        raise ValueError("Point is not on the unit sphere: |X| = %.16g" % np.linalg.norm(X))
    if abs(X[-1]) <= EQUATOR_TOL:
        raise ValueError("Point lies on the equator X_{n+1} = 0")
    x, s, sigma = kernel.project(X)
    return ChartPoint(X=X, x=x, s=s, hemisphere=int(sigma))


def project_south(X):
    """x = -X'/X_{n+1}, s = -1/X_{n+1} for X in the open south hemisphere."""
    X = np.asarray(X, dtype=np.float64)
    if X[-1] >= 0.0:
        raise ValueError(
            "project_south needs X_{n+1} < 0, got %.16g" % X[-1]
        )
    return project(X)


def lift(x, hemisphere=SOUTH):
    """X = (x, sigma)/sqrt(1 + |x|^2)"""
    return kernel.lift(np.atleast_1d(np.asarray(x, dtype=np.float64)), float(hemisphere))


def pullback_vector(x, xi, hemisphere=SOUTH):
    """
    Push the chart vector xi at x to a tangent vector of S^n:
    (xi/s - (x.xi) x/s^3, -sigma (x.xi)/s^3).
    """
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    xi = np.atleast_1d(np.asarray(xi, dtype=np.float64))
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(xi))):
        raise ValueError("Chart point and vector must be finite")
    return kernel.pullback(x, xi, float(hemisphere))


def tangent_part(X, v):
    """Remove the radial component of ambient vectors v at sphere points X."""
    X = np.asarray(X)
    v = np.asarray(v)
    return v - np.sum(v * X, axis=-1, keepdims=True) * X
