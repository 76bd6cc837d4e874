"""
Weights f for which det(grad^2 h + h I) = f h^{p-1} has no solution.

Both constructions make K_f = grad_xi f + beta f one-signed for a scaling
field (xi = -D x in the south chart, mirrored to the north), so the integral
identity of `lpmink.pohozaev` cannot vanish.

- Critical exponent p = -n-1: f = (1+|x|^2)^{-D/2} + C = |X_{n+1}|^D + C.
- p < -n-1, gamma = (p+n+1)/(n+1) < 0: f(r) solves
      -r f' + gamma (r^2 - n)/(1 + r^2) f + phi(r) = 0,
  i.e. f = G^gamma [int phi/t G^{-gamma} dt + beta0] with
  G(r) = (1+r^2)^{(n+1)/2}/r^n, so that K_f = -phi(r).
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

import lpmink.type_ as type_

from lpmink.constant import (
    CERTIFY_FRACTION,
    K_NEGATIVE,
    K_POSITIVE_MAX,
    N_RADIAL_TABLE,
    POLE_CAP_RADIUS,
    R_MAX,
    R_MIN,
)
from lpmink.pohozaev import ProjectiveField, K_values, field_values
from lpmink.print_ import NumericalError
from lpmink.support_function import Weight


def _points(X):
    return np.atleast_2d(np.asarray(X, dtype=np.float64))


def chart_radius(X):
    """r = |X'|/|X_{n+1}|, the same in both hemispheres."""
    X = _points(X)
    return np.linalg.norm(X[:, :-1], axis=1) / np.abs(X[:, -1])


def chart_radius_gradient(X):
    """Ambient gradient of the 0-homogeneous r(X); zero at the poles."""
    X = _points(X)
    rho = np.linalg.norm(X[:, :-1], axis=1)
    last = X[:, -1]
    grad = np.zeros_like(X)
    off = rho > 0.0
    grad[off, :-1] = X[off, :-1] / (rho[off] * np.abs(last[off]))[:, None]
    grad[off, -1] = -rho[off] * np.sign(last[off]) / last[off] ** 2
    return grad


def meridian(n, N=512):
    """N points (cos theta e_1, sin theta) with theta = 2 pi (k + 1/2)/N."""
    theta = 2.0 * math.pi * (np.arange(N) + 0.5) / N
    X = np.zeros((N, n + 1))
    X[:, 0] = np.cos(theta)
    X[:, n] = np.sin(theta)
    return X


# =============================================================================
# Critical exponent
# =============================================================================


@dataclass(frozen=True)
class CriticalWeight:
    n: int
    D: float = 4.0
    C: float = 1.0

    def __post_init__(self):
        if self.D <= 0.0 or self.C <= 0.0:
            raise ValueError("Critical weight needs D > 0 and C > 0, got D = %g, C = %g" % (self.D, self.C))

    @property
    def p(self):
        return -self.n - 1.0

    def value(self, X):
        X = _points(X)
        return np.abs(X[:, -1]) ** self.D + self.C

    def gradient(self, X):
        X = _points(X)
        last = np.abs(X[:, -1])
        grad = -self.D * (last**self.D)[:, None] * X
        grad[:, -1] += self.D * last ** (self.D - 1.0) * np.sign(X[:, -1])
        return grad

    def weight(self):
        return Weight(value=self.value, gradient=self.gradient, name="critical")

    def field(self):
        return ProjectiveField.scaling(self.n, self.D)

    def expected_K(self, X):
        """K_f for the oriented field xi = +D x: -D^2 r^2 (1+r^2)^{-D/2-1}."""
        r = chart_radius(X)
        return -self.D**2 * r**2 * (1.0 + r**2) ** (-0.5 * self.D - 1.0)


def critical_f(D=4.0, C=1.0, n=1):
    return CriticalWeight(n, D, C)


def critical_identity_error(weight, N=512):
    """
    max over a meridian of |grad_xi f - |xi|^2 (1+|x|^2)^{-D/2-1}| for the
    field xi = -D x.
    """
    X = meridian(weight.n, N)
    pf = ProjectiveField.scaling(weight.n, weight.D)
    derivative = np.sum(weight.gradient(X) * field_values(pf, X), axis=1)
    r = chart_radius(X)
    closed = weight.D**2 * r**2 * (1.0 + r**2) ** (-0.5 * weight.D - 1.0)
    return float(np.max(np.abs(derivative - closed)))


# =============================================================================
# Exponents below -n-1
# =============================================================================


@dataclass(frozen=True)
class RadialWeight:
    """Parameters of the radial weight; `resolve_radial_f` builds the profile."""

    n: int
    p: float
    phi_inf: float = 1.0
    phi_k: float = None
    beta0: float = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("Dimension must be positive")
        if self.gamma >= 0.0:
            raise ValueError(
                "Radial weight needs p < -n-1 (gamma < 0), got p = %g for n = %i" % (self.p, self.n)
            )
        if self.phi_inf <= 0.0:
            raise ValueError("phi_inf must be positive, got %g" % self.phi_inf)
        if self.k <= self.n * abs(self.gamma):
            raise ValueError(
                "phi decays too slowly at 0: k = %g must exceed n|gamma| = %g"
                % (self.k, self.n * abs(self.gamma))
            )

    @property
    def gamma(self):
        return (self.p + self.n + 1.0) / (self.n + 1.0)

    @property
    def k(self):
        if self.phi_k is None:
            return math.ceil(self.n * abs(self.gamma)) + 2.0
        return float(self.phi_k)

    def log_phi(self, s):
        """log phi at r = e^s"""
        return math.log(self.phi_inf) - np.logaddexp(0.0, -self.k * s)

    def phi(self, r):
        """phi_inf r^k/(1 + r^k)"""
        r = np.asarray(r, dtype=np.float64)
        with np.errstate(divide="ignore"):
            return np.exp(self.log_phi(np.log(r)))

    def log_G(self, s):
        """log G at r = e^s"""
        return 0.5 * (self.n + 1.0) * np.logaddexp(0.0, 2.0 * s) - self.n * s

    def integrand(self, s):
        # phi -> 0 and G^{|gamma|} -> inf as s -> -inf; combine before exp
        return math.exp(self.log_phi(s) - self.gamma * self.log_G(s))

    def lower_bound(self):
        """B = int_{-inf}^0 phi G^{|gamma|} ds; beta0 must exceed it."""
        value, _ = quad(self.integrand, -np.inf, 0.0, epsabs=0.0, epsrel=1e-13, limit=200)
        return value


@dataclass(eq=False)
class RadialProfile:
    params: RadialWeight
    beta0: float
    bound: float
    s_table: np.ndarray
    I_table: np.ndarray
    f_table: np.ndarray

    @property
    def n(self):
        return self.params.n

    @property
    def p(self):
        return self.params.p

    @property
    def gamma(self):
        return self.params.gamma

    def _inner(self, s):
        j = int(np.argmin(np.abs(self.s_table - s)))
        if s == self.s_table[j]:
            return self.I_table[j]
        extra, _ = quad(self.params.integrand, self.s_table[j], s, epsabs=0.0, epsrel=1e-13, limit=200)
        return self.I_table[j] + extra

    def evaluate(self, r):
        """f(r) by quadrature from the nearest table node."""
        r = np.asarray(r, dtype=np.float64)
        flat = r.ravel()
        out = np.empty(flat.shape)
        for i, ri in enumerate(flat):
            if ri <= 0.0:
                out[i] = 0.0
                continue
            s = math.log(ri)
            out[i] = math.exp(self.gamma * self.params.log_G(s)) * (self._inner(s) + self.beta0)
        return out.reshape(r.shape)

    def __call__(self, r):
        return self.evaluate(r)

    def derivative(self, r, f=None):
        """f' from the defining equation."""
        r = np.asarray(r, dtype=np.float64)
        f = self.evaluate(r) if f is None else f
        n = self.n
        return self.gamma * (r**2 - n) / (r * (1.0 + r**2)) * f + self.params.phi(r) / r

    # -------------------------------------------------------------------------
    # Sphere weight
    # -------------------------------------------------------------------------

    def value(self, X):
        return self.evaluate(chart_radius(X))

    def gradient(self, X):
        X = _points(X)
        r = chart_radius(X)
        out = np.zeros_like(X)
        off = r > 0.0
        out[off] = self.derivative(r[off])[:, None] * chart_radius_gradient(X[off])
        return out

    def weight(self):
        return Weight(value=self.value, gradient=self.gradient, name="radial")

    def field(self):
        return ProjectiveField.scaling(self.n, 1.0)

    def expected_K(self, X):
        return -self.params.phi(chart_radius(X))

    # -------------------------------------------------------------------------
    # Checks
    # -------------------------------------------------------------------------

    def limit(self, r1=1e5, r2=1e6):
        """f(infinity), eliminating the leading r^{-|gamma|} term."""
        f1, f2 = self.evaluate(np.array([r1, r2]))
        a1, a2 = r1 ** (-abs(self.gamma)), r2 ** (-abs(self.gamma))
        return (f1 * a2 - f2 * a1) / (a2 - a1)

    def expected_limit(self):
        return self.params.phi_inf / abs(self.gamma)

    def pole_exponent(self, r_low=1e-6, r_high=1e-3, N=32):
        r = np.logspace(math.log10(r_low), math.log10(r_high), N)
        slope, _ = np.polyfit(np.log(r), np.log(self.evaluate(r)), 1)
        return slope

    def ode_chebyshev(self, r_low=1e-3, r_high=1e3, degree=400):
        return np.polynomial.Chebyshev.interpolate(
            lambda s: self.evaluate(np.exp(s)), degree, domain=[math.log(r_low), math.log(r_high)]
        )

    def ode_residual(self, r_low=1e-3, r_high=1e3, degree=400, N=1000, series=None):
        """
        max |-df/ds + gamma (r^2-n)/(1+r^2) f + phi| on [r_low, r_high], with
        df/ds from a Chebyshev interpolant of f(e^s).
        """
        series = self.ode_chebyshev(r_low, r_high, degree) if series is None else series
        s = np.linspace(math.log(r_low), math.log(r_high), N)
        return float(np.max(np.abs(self._residual(s, series))))

    def _residual(self, s, series):
        r = np.exp(s)
        f = series(s)
        return -series.deriv()(s) + self.gamma * (r**2 - self.n) / (1.0 + r**2) * f + self.params.phi(r)

    def to_rows(self, r_low=1e-3, r_high=1e3):
        rows = np.zeros(self.s_table.size, dtype=type_.make_type_radial_row())
        r = np.exp(self.s_table)
        rows["r"] = r
        rows["phi"] = self.params.phi(r)
        rows["f"] = self.f_table
        inside = (r >= r_low) & (r <= r_high)
        rows["residual"] = np.nan
        rows["residual"][inside] = self._residual(self.s_table[inside], self.ode_chebyshev(r_low, r_high))
        return rows

    def to_dict(self):
        return {
            "n": self.n,
            "p": self.p,
            "gamma": self.gamma,
            "phi_inf": self.params.phi_inf,
            "phi_k": self.params.k,
            "beta0": self.beta0,
            "beta0_lower_bound": self.bound,
            "beta0_margin": self.beta0 - self.bound,
        }


def resolve_radial_f(w):
    """
    Tabulate f on a symmetric log grid over [R_MIN, R_MAX] by accumulating
    segment quadratures outward from r = 1.
    """
    bound = w.lower_bound()
    beta0 = 2.0 * bound if w.beta0 is None else float(w.beta0)
    if not beta0 > bound:
        raise ValueError(
            "beta0 = %.16g does not exceed the lower bound %.16g; f would vanish in (0, 1)"
            % (beta0, bound)
        )
    s = np.linspace(math.log(R_MIN), math.log(R_MAX), N_RADIAL_TABLE)
    mid = N_RADIAL_TABLE // 2
    s[mid] = 0.0
    I = np.zeros(N_RADIAL_TABLE)
    for j in range(mid + 1, N_RADIAL_TABLE):
        I[j] = I[j - 1] + quad(w.integrand, s[j - 1], s[j], epsabs=0.0, epsrel=1e-13, limit=200)[0]
    for j in range(mid - 1, -1, -1):
        I[j] = I[j + 1] - quad(w.integrand, s[j], s[j + 1], epsabs=0.0, epsrel=1e-13, limit=200)[0]
    f = np.exp(w.gamma * w.log_G(s)) * (I + beta0)
    if not (np.all(np.isfinite(f)) and np.all(f > 0.0)):
        raise NumericalError("Radial weight table is not positive and finite")
    return RadialProfile(
        params=w,
        beta0=beta0,
        bound=bound,
        s_table=s,
        I_table=I,
        f_table=f,
    )


# =============================================================================
# Certificate
# =============================================================================


@dataclass
class Certificate:
    certified: bool
    orientation: int
    max_K: float
    fraction_negative: float
    counted: int
    max_deviation: float
    reason: str

    def to_dict(self):
        return {
            "certified": self.certified,
            "orientation": self.orientation,
            "max_K": self.max_K,
            "fraction_negative": self.fraction_negative,
            "counted": self.counted,
            "max_deviation": self.max_deviation,
            "reason": self.reason,
        }


def certify_insolvability(f, p, grid, pf=None, return_rows=False):
    """
    Evaluate K_f at every node for the scaling field and check that it is
    one-signed: max K_f <= 1e-9 everywhere and K_f < -1e-6 on at least 99%
    of the nodes outside the polar cap. A weight that is nonpositive only for
    the reversed field is certified with orientation -1.
    """
    built = isinstance(f, (CriticalWeight, RadialProfile))
    if built:
        if abs(f.p - p) > 1e-12 or f.n != grid.n:
            raise ValueError("Weight was built for p = %g, n = %i" % (f.p, f.n))
        weight = f.weight()
        pf = f.field() if pf is None else pf
    else:
        weight = f
        pf = ProjectiveField.scaling(grid.n, 1.0) if pf is None else pf

    X = grid.nodes
    K = K_values(weight, pf, p, X)
    counted = chart_radius(X) >= POLE_CAP_RADIUS

    orientation = 1
    if np.all(K[counted] <= K_POSITIVE_MAX):
        pass
    elif np.all(K[counted] >= -K_POSITIVE_MAX):
        orientation = -1
        K = -K
    elif built:
        raise NumericalError(
            "K_f changes sign for a constructed weight: range [%.6e, %.6e]" % (K.min(), K.max())
        )

    max_K = float(np.max(K))
    fraction = float(np.mean(K[counted] < K_NEGATIVE)) if np.any(counted) else 0.0
    deviation = float(np.max(np.abs(K - f.expected_K(X)))) if built else float("nan")

    if max_K > K_POSITIVE_MAX:
        certified, reason = False, "K_f takes both signs"
    elif fraction < CERTIFY_FRACTION:
        certified, reason = False, "K_f is not strictly negative on enough nodes"
    else:
        certified, reason = True, "K_f is nonpositive and strictly negative almost everywhere"

    certificate = Certificate(
        certified=certified,
        orientation=orientation,
        max_K=max_K,
        fraction_negative=fraction,
        counted=int(np.sum(counted)),
        max_deviation=deviation,
        reason=reason,
    )
    if not return_rows:
        return certificate

    rows = np.zeros(grid.size, dtype=type_.make_type_certificate_row(grid.n))
    for i in range(grid.n + 1):
        rows["X%i" % (i + 1)] = X[:, i]
    rows["f"] = weight(X)
    rows["K"] = K
    rows["K_expected"] = f.expected_K(X) if built else np.nan
    rows["counted"] = counted
    return certificate, rows
