"""
The volume functional I(u) = -(n+1) V(Omega_u) = -int u det W(u) on positive
symmetric support functions normalized by int u^p = |S^n|.

With E(c) = int u det W and Q(c) = int u^p for u = sum c_k phi_k, the
normalized functional is
    J(c) = I(normalize(u)) = -(alpha/Q)^{(n+1)/p} E,
which is invariant under scaling of c. W(u) is linear in c, so the frame
matrices of the basis functions are assembled once per grid.
"""

import math
from dataclasses import dataclass, field

import numpy as np

import lpmink.spectral as spectral

from lpmink.constant import (
    ARMIJO_C,
    ARMIJO_ROUNDOFF,
    BARRIER_DECAY,
    BARRIER_SWITCH,
    BARRIER_WEIGHT_INIT,
    EPS_CONVEX_DEFAULT,
    L_MAX_VARIATIONAL,
    MODE_SPECIAL,
    STEP_MIN,
)
from lpmink.pohozaev import identity_integral, random_field
from lpmink.print_ import (
    NumericalError,
    print_header_minimize,
    print_minimize_exit,
    print_progress_minimize,
    print_warning,
)
from lpmink.sphere_geometry import make_grid
from lpmink.support_function import (
    FourierBasis,
    PolyBasis,
    SupportFunction,
    constant_weight,
    frame_matrix,
    tangent_frame,
)
from lpmink.symmetry import build_group, invariant_basis, simplex_vertices


# =============================================================================
# Single-function operations
# =============================================================================


def normalize(u, p, grid=None):
    """c u with int (c u)^p = |S^n|"""
    if grid is not None and u.grid is not grid:
        u = u.with_grid(grid)
    grid = u.require_grid()
    if np.any(u.values <= 0.0):
        raise ValueError("normalize needs a positive function")
    Q = grid.integrate(u.values**p)
    if not np.isfinite(Q) or Q <= 0.0:
        raise NumericalError("Non-finite integral of u^p: %s" % str(Q))
    return u.scale((grid.area / Q) ** (1.0 / p))


def objective(u, grid=None):
    """I(u) = -int u det W(u)"""
    if grid is not None and u.grid is not grid:
        u = u.with_grid(grid)
    u.certify_convex()
    return -u.grid.integrate(u.values * u.det)


def to_dual(u, p, grid=None):
    """
    (v, lambda) with v = u / V^{1/(n+1)}, V(Omega_v) = 1 and
    lambda = (n+1)/int v^p; a critical point satisfies det W(v) = lambda v^{p-1}.
    """
    if grid is not None and u.grid is not grid:
        u = u.with_grid(grid)
    V = -objective(u) / (u.n + 1)
    v = u.scale(V ** (-1.0 / (u.n + 1)))
    return v, (u.n + 1) / v.grid.integrate(v.values**p)


def is_trivial_constant(u, tol=1e-6):
    """A normalized constant critical point is u = 1."""
    return bool(np.max(np.abs(u.values - 1.0)) < tol)


def _as_support(xi, grid):
    if isinstance(xi, spectral.HomoPoly):
        return SupportFunction(PolyBasis(grid.n, [xi.to_float()]), [1.0], grid)
    if isinstance(xi, SupportFunction):
        return xi if xi.grid is grid else xi.with_grid(grid)
    raise ValueError("Perturbation must be a HomoPoly or a SupportFunction")


def second_variation_formula(xi, p, grid, prefactor="corrected"):
    """
    (n+1) int |grad xi|^2 - (n+1)(n+1-p) int |xi - mean xi|^2, the second
    derivative of eps -> I(normalize(1 + eps xi)) at 0. `prefactor="displayed"`
    uses n+2 in both terms instead.
    """
    xi = _as_support(xi, grid)
    n = grid.n
    if prefactor == "corrected":
        c = n + 1.0
    elif prefactor == "displayed":
        c = n + 2.0
    else:
        raise ValueError("Unknown prefactor %s" % str(prefactor))
    mean = grid.mean(xi.values)
    dirichlet = grid.integrate(np.sum(xi.gradient**2, axis=1))
    variance = grid.integrate((xi.values - mean) ** 2)
    return c * dirichlet - c * (n + 1.0 - p) * variance


def _normalized_I(values, W, p, grid):
    eig = np.linalg.eigvalsh(W)[:, 0]
    if np.min(values) <= 0.0 or np.min(eig) <= 0.0:
        raise NumericalError(
            "Perturbation leaves the convex cone: min u %.3e, min eigenvalue %.3e"
            % (np.min(values), np.min(eig))
        )
    E = grid.integrate(values * np.linalg.det(W))
    Q = grid.integrate(values**p)
    return -((grid.area / Q) ** ((grid.n + 1.0) / p)) * E


def second_variation_fd(xi, p, grid, eps_list=(1e-2, 5e-3)):
    """Central second differences of eps -> I(normalize(1 + eps xi)), Richardson-extrapolated."""
    xi = _as_support(xi, grid)
    n = grid.n
    I0 = -grid.area
    eye = np.eye(n)[None]
    estimates = []
    for eps in eps_list:
        plus = _normalized_I(1.0 + eps * xi.values, eye + eps * xi.W, p, grid)
        minus = _normalized_I(1.0 - eps * xi.values, eye - eps * xi.W, p, grid)
        estimates.append((plus - 2.0 * I0 + minus) / eps**2)
    if len(eps_list) == 1:
        return estimates[0]
    e1, e2 = eps_list[-2], eps_list[-1]
    d1, d2 = estimates[-2], estimates[-1]
    return (e1**2 * d2 - e2**2 * d1) / (e1**2 - e2**2)


def instability_threshold(n, mu_max=None):
    """P_n = n + 1 - lambda_1(n), which equals -2n - 5."""
    g = build_group(simplex_vertices(n), MODE_SPECIAL)
    lam = spectral.lambda1(n, g, spectral.MU_MAX_DEFAULT if mu_max is None else mu_max)
    threshold = n + 1.0 - lam
    if threshold != -2.0 * n - 5.0:
        raise NumericalError(
            "Instability threshold %.6f differs from -2n-5 = %i" % (threshold, -2 * n - 5)
        )
    return threshold


# =============================================================================
# Problem
# =============================================================================


@dataclass(eq=False)
class VariationalProblem:
    n: int
    p: float
    grid: object
    group: object
    basis: object
    eps_c: float = EPS_CONVEX_DEFAULT
    step: float = 1.0
    max_iter: int = 2000
    tol: float = 1e-8
    momentum: float = 0.0
    progress: bool = False
    phi: np.ndarray = field(init=False, repr=False)
    W_basis: np.ndarray = field(init=False, repr=False)
    precondition: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.p > -self.n:
            raise ValueError("The variational scheme needs p <= -n, got p = %g" % self.p)
        if not 0.0 < self.eps_c <= 0.5:
            raise ValueError("Convexity margin must lie in (0, 0.5], got %g" % self.eps_c)
        nodes = self.grid.nodes
        value, _, D2H = self.basis.jets(nodes)
        frame = tangent_frame(nodes)
        self.phi = value
        self.W_basis = np.stack([frame_matrix(frame, D2H[k]) for k in range(self.basis.size)])
        self.W_basis = 0.5 * (self.W_basis + self.W_basis.swapaxes(-1, -2))
        degrees = self.basis.degrees
        if degrees is None:
            degrees = np.zeros(self.basis.size)
        self.precondition = 1.0 / (1.0 + degrees * (degrees + self.n - 1.0))

    @property
    def alpha(self):
        return self.grid.area

    # -------------------------------------------------------------------------
    # Coefficient-space evaluation
    # -------------------------------------------------------------------------

    def state(self, c):
        u = c @ self.phi
        W = np.tensordot(c, self.W_basis, axes=1)
        eig, vec = np.linalg.eigh(W)
        return u, W, eig[:, 0], vec[:, :, 0]

    def constant_coeffs(self):
        w = np.sqrt(self.grid.weights)
        c, *_ = np.linalg.lstsq((self.phi * w).T, w, rcond=None)
        return c

    def normalize(self, c):
        u = c @ self.phi
        if np.min(u) <= 0.0:
            raise NumericalError("Coefficients give a non-positive function")
        Q = self.grid.integrate(u**self.p)
        return c * (self.alpha / Q) ** (1.0 / self.p)

    def functional(self, c, barrier=0.0):
        """(J, dJ, barrier value, barrier gradient) at coefficients c."""
        grid, p, n = self.grid, self.p, self.n
        u, W, eig_min, v = self.state(c)
        det = np.linalg.det(W)
        U = _cofactor(W)
        E = grid.integrate(u * det)
        Q = grid.integrate(u**p)
        J = -((self.alpha / Q) ** ((n + 1.0) / p)) * E
        dE = self.phi @ (grid.weights * det) + np.einsum(
            "n,nij,knji->k", grid.weights * u, U, self.W_basis
        )
        dQ = p * (self.phi @ (grid.weights * u ** (p - 1.0)))
        dJ = J * (dE / E - (n + 1.0) / p * dQ / Q)

        B = 0.0
        dB = np.zeros_like(c)
        if barrier > 0.0:
            gap = eig_min - self.eps_c
            B = -barrier * grid.integrate(np.log(gap))
            deig = np.einsum("ni,knij,nj->kn", v, self.W_basis, v)
            dB = -barrier * (deig @ (grid.weights / gap))
        return J, dJ, B, dB

    def tangent_gradient(self, c, g):
        """Gradient of a function composed with `normalize`, from its gradient g at c."""
        p = self.p
        u = c @ self.phi
        Q = self.grid.integrate(u**p)
        dQ = p * (self.phi @ (self.grid.weights * u ** (p - 1.0)))
        s = (self.alpha / Q) ** (1.0 / p)
        return s * (g - (c @ g) / (p * Q) * dQ)

    def admissible(self, c):
        u, _, eig_min, _ = self.state(c)
        return np.min(u) > 0.0 and np.min(eig_min) > self.eps_c

    def support_function(self, c):
        return SupportFunction(self.basis, c, self.grid)

    def el_residual(self, c):
        u, W, _, _ = self.state(c)
        det = np.linalg.det(W)
        lam = self.grid.integrate(u * det) / self.alpha
        return float(np.max(np.abs(det - lam * u ** (self.p - 1.0))) / lam), lam


def make_problem(n, p, resolution, L=None, mode=MODE_SPECIAL, **kw):
    """Grid, simplex group and invariant basis up to degree L."""
    grid = make_grid(n, resolution)
    group = build_group(simplex_vertices(n), mode)
    if n == 1:
        L = min(resolution // 3, 36) if L is None else L
        parent = FourierBasis(L)
    else:
        L = min(resolution // 2, L_MAX_VARIATIONAL) if L is None else L
        if L > L_MAX_VARIATIONAL:
            raise ValueError("Variational degree %i exceeds the cap %i" % (L, L_MAX_VARIATIONAL))
        parent = PolyBasis.harmonic(n, L)
    basis = invariant_basis(parent, group, grid)
    return VariationalProblem(n=n, p=p, grid=grid, group=group, basis=basis, **kw)


def _cofactor(W):
    n = W.shape[-1]
    if n == 1:
        return np.ones_like(W)
    U = np.empty_like(W)
    U[:, 0, 0] = W[:, 1, 1]
    U[:, 1, 1] = W[:, 0, 0]
    U[:, 0, 1] = -W[:, 1, 0]
    U[:, 1, 0] = -W[:, 0, 1]
    return U


# =============================================================================
# Minimizer
# =============================================================================


@dataclass(eq=False)
class CriticalPoint:
    coeffs: np.ndarray
    u: SupportFunction
    value: float
    lambda_inf: float
    el_residual: float
    non_constancy: float
    iterations: int
    grad_norm: float
    eig_min: float
    bound: float
    history: np.ndarray = field(repr=False, default=None)

    def to_dict(self):
        return {
            "coefficients": self.coeffs.tolist(),
            "I": self.value,
            "lambda_inf": self.lambda_inf,
            "el_residual": self.el_residual,
            "non_constancy": self.non_constancy,
            "iterations": self.iterations,
            "grad_norm": self.grad_norm,
            "eig_min": self.eig_min,
            "a_priori_bound": self.bound,
        }


def seed_coeffs(prob, seed_amplitude):
    """normalize(1 + a xi) with xi the lowest non-constant invariant function, sup |xi| = 1."""
    c = prob.constant_coeffs()
    degrees = prob.basis.degrees
    if seed_amplitude != 0.0:
        candidates = np.flatnonzero(degrees > 0) if degrees is not None else np.arange(1, prob.basis.size)
        if candidates.size == 0:
            raise NumericalError("Invariant basis has no non-constant function")
        j = candidates[np.argmin(degrees[candidates])] if degrees is not None else candidates[0]
        c = c.copy()
        c[j] += seed_amplitude / np.max(np.abs(prob.phi[j]))
    return prob.normalize(c)


def minimize(prob, seed_amplitude=0.05, c0=None):
    """
    Preconditioned backtracking descent of J plus a log barrier on the
    smallest eigenvalue of W, renormalizing after every step.
    """
    c = seed_coeffs(prob, seed_amplitude) if c0 is None else prob.normalize(np.asarray(c0, dtype=np.float64))
    if not prob.admissible(c):
        raise NumericalError("Seed lies outside the convex cone with margin %g" % prob.eps_c)

    barrier = BARRIER_WEIGHT_INIT
    step = prob.step
    velocity = np.zeros_like(c)
    history = []
    bound = 1.0
    J, dJ, B, dB = prob.functional(c, barrier)
    grad_norm = float(np.max(np.abs(dJ)))
    converged = False
    if prob.progress:
        print_header_minimize()

    for it in range(1, prob.max_iter + 1):
        u, _, eig_min, _ = prob.state(c)
        bound = max(bound, float(np.max(u)), 1.0 / float(np.min(u)))
        history.append((it, J, grad_norm, step, barrier, np.min(u), np.max(u), np.min(eig_min)))
        if prob.progress:
            print_progress_minimize(it, J, grad_norm, step, barrier, np.min(u), np.max(u), np.min(eig_min))
        if grad_norm < prob.tol and barrier == 0.0:
            converged = True
            break

        # dJ is already tangent; B is not scale invariant
        g = dJ + prob.tangent_gradient(c, dB)
        direction = -prob.precondition * g + prob.momentum * velocity
        slope = g @ direction
        if slope >= 0.0:
            direction = -prob.precondition * g
            slope = g @ direction

        # Backtracking with Armijo condition, up to round-off in J + B
        t = step
        slack = ARMIJO_ROUNDOFF * (abs(J) + abs(B))
        while True:
            trial = c + t * direction
            if np.min(trial @ prob.phi) > 0.0:
                trial = prob.normalize(trial)
                if prob.admissible(trial):
                    J_t, dJ_t, B_t, dB_t = prob.functional(trial, barrier)
                    if J_t + B_t <= J + B + ARMIJO_C * t * slope + slack:
                        break
            t *= 0.5
            if t < STEP_MIN:
                raise NumericalError(
                    "Line search failed at iteration %i: |grad| %.3e, barrier %.3e" % (it, grad_norm, barrier)
                )

        velocity = trial - c
        c, J, dJ = trial, J_t, dJ_t
        step = min(2.0 * t, prob.step)
        grad_norm = float(np.max(np.abs(dJ)))

        if barrier > 0.0 and prob.el_residual(c)[0] < BARRIER_SWITCH:
            barrier *= BARRIER_DECAY
            if barrier < 1e-16:
                barrier = 0.0
        B, dB = (prob.functional(c, barrier)[2:]) if barrier > 0.0 else (0.0, np.zeros_like(c))

    if prob.progress:
        print_minimize_exit(converged, it, grad_norm)
    if not converged:
        raise NumericalError(
            "Minimizer did not converge in %i iterations: |grad| %.3e, I %.15f"
            % (prob.max_iter, grad_norm, J)
        )

    residual, lam = prob.el_residual(c)
    u, _, eig_min, _ = prob.state(c)
    if np.min(eig_min) < 10.0 * prob.eps_c:
        print_warning(
            "Smallest eigenvalue %.3e of W is below 10 eps_c = %.3e" % (np.min(eig_min), 10.0 * prob.eps_c)
        )
    return CriticalPoint(
        coeffs=c,
        u=prob.support_function(c),
        value=J,
        lambda_inf=lam,
        el_residual=residual,
        non_constancy=float(np.max(np.abs(u - prob.grid.mean(u)))),
        iterations=it,
        grad_norm=grad_norm,
        eig_min=float(np.min(eig_min)),
        bound=bound,
        history=np.array(history),
    )


def gradient_fd_error(prob, c, h=1e-6):
    """Largest relative gap between dJ and central differences of J."""
    _, dJ, _, _ = prob.functional(c)
    scale = max(np.max(np.abs(dJ)), 1e-300)
    worst = 0.0
    for k in range(c.size):
        e = np.zeros_like(c)
        e[k] = h
        fd = (prob.functional(c + e)[0] - prob.functional(c - e)[0]) / (2.0 * h)
        worst = max(worst, abs(fd - dJ[k]) / scale)
    return worst


def audit_identity(cp, p, rng, count=5):
    """Identity integrals of a critical point, f = lambda_inf, for random projective fields."""
    f = constant_weight(cp.lambda_inf)
    grid = cp.u.grid
    return [identity_integral(f, cp.u, p, random_field(grid.n, rng), grid) for _ in range(count)]
