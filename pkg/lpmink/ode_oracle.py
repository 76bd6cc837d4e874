"""
Planar shooting for h'' + h = h^{p-1}, the n = 1 form of
det(grad^2 h + h I) = h^{p-1}.

Orbits through (h0, 0) are periodic with conserved energy
E = h'^2/2 + h^2/2 - h^p/p. A 2 pi/3-periodic orbit is a (3)-symmetric
solution; its existence switches on when the small-amplitude period
2 pi/sqrt(2-p) drops below 2 pi/3, i.e. at p = -7.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq, minimize_scalar

import lpmink.type_ as type_

from lpmink.constant import (
    FOURIER_LIFT_L,
    H0_MAX,
    H0_OFFSET,
    N_LIFT_SAMPLES,
    N_SCAN,
    ODE_TOL,
    PI,
)
from lpmink.print_ import NumericalError, print_header_scan, print_progress_scan, print_warning
from lpmink.sphere_geometry import make_grid
from lpmink.support_function import FourierBasis, SupportFunction

TARGET_PERIOD = 2.0 * PI / 3.0


def rhs(t, y, p):
    return [y[1], y[0] ** (p - 1.0) - y[0]]


def energy(p, h, dh):
    return 0.5 * dh**2 + 0.5 * h**2 - h**p / p


def small_amplitude_period(p):
    return 2.0 * PI / math.sqrt(2.0 - p)


# =============================================================================
# Shooting
# =============================================================================


@dataclass
class ShootState:
    p: float
    h0: float
    tol: float
    period: float
    energy: float
    energy_drift: float
    solution: object = None


def shoot(p, h0, tol=ODE_TOL, dense_output=False, t_max=100.0):
    """
    Integrate from (h0, 0) to the next turning point h' = 0; by reversibility
    that time is half the period.
    """
    if p >= 0.0:
        raise ValueError("The oracle needs p < 0, got %g" % p)
    if h0 <= 0.0 or h0 == 1.0:
        raise ValueError("Initial height must be positive and different from 1, got %g" % h0)

    def turning(t, y, p):
        return y[1]

    turning.terminal = True
    turning.direction = 1.0 if h0 > 1.0 else -1.0

    sol = solve_ivp(
        rhs,
        (0.0, t_max),
        [h0, 0.0],
        method="DOP853",
        rtol=tol,
        atol=tol,
        events=turning,
        args=(p,),
        dense_output=dense_output,
    )
    if sol.status != 1 or sol.t_events[0].size == 0:
        raise NumericalError(
            "No turning point for p = %g, h0 = %.16g before t = %g: %s" % (p, h0, t_max, sol.message)
        )
    if np.any(sol.y[0] <= 0.0):
        raise NumericalError("Orbit reached h = 0 for p = %g, h0 = %.16g" % (p, h0))
    E = energy(p, sol.y[0], sol.y[1])
    return ShootState(
        p=p,
        h0=h0,
        tol=tol,
        period=2.0 * float(sol.t_events[0][0]),
        energy=float(E[0]),
        energy_drift=float(np.max(np.abs(E - E[0]))),
        solution=sol if dense_output else None,
    )


def period_map(p, h0):
    return shoot(p, h0).period


def period_scan(p, h0s, progress=False):
    """Rows (p, h0, period, energy drift)."""
    rows = np.zeros(len(h0s), dtype=type_.make_type_scan_row())
    if progress:
        print_header_scan(p)
    for i, h0 in enumerate(h0s):
        state = shoot(p, h0)
        rows[i] = (p, h0, state.period, state.energy_drift)
        if progress:
            print_progress_scan(h0, state.period)
    return rows


def scan_heights(h_max=H0_MAX, N=N_SCAN):
    """Heights 1 + d with d geometric in [H0_OFFSET, h_max - 1]."""
    return 1.0 + np.geomspace(H0_OFFSET, h_max - 1.0, N)


def is_monotone(periods):
    d = np.diff(periods)
    return bool(np.all(d >= 0.0) or np.all(d <= 0.0))


# =============================================================================
# Symmetric solution
# =============================================================================


@dataclass(eq=False)
class SymmetricSolution:
    p: float
    h0: float
    period: float
    theta: np.ndarray
    h: np.ndarray
    dh: np.ndarray
    energy_drift: float

    @property
    def amplitude(self):
        return self.h0 - float(np.min(self.h))

    def fourier_coeffs(self, L=FOURIER_LIFT_L):
        """Coefficients on FourierBasis(L) from the equispaced samples."""
        N = self.h.size
        if 2 * L >= N:
            raise ValueError("Lift degree %i needs more than %i samples" % (L, N))
        F = np.fft.rfft(self.h) / N
        c = np.empty(2 * L + 1)
        c[0] = F[0].real
        c[1::2] = 2.0 * F[1 : L + 1].real
        c[2::2] = -2.0 * F[1 : L + 1].imag
        return c

    def support_function(self, grid=None, L=FOURIER_LIFT_L):
        return SupportFunction(FourierBasis(L), self.fourier_coeffs(L), grid)

    def el_residual(self):
        """max |h'' + h - h^{p-1}| of the Fourier lift on an N-node grid."""
        u = self.support_function(make_grid(1, self.h.size))
        return float(np.max(np.abs(u.det - u.values ** (self.p - 1.0))))

    def to_dict(self):
        return {
            "p": self.p,
            "h0": self.h0,
            "period": self.period,
            "amplitude": self.amplitude,
            "energy_drift": self.energy_drift,
            "theta": self.theta.tolist(),
            "h": self.h.tolist(),
        }


def sample(p, h0, N=N_LIFT_SAMPLES):
    """Solution through (h0, 0) at theta_j = 2 pi j/N, extended by periodicity."""
    state = shoot(p, h0, dense_output=True)
    half = state.period / 2.0
    theta = 2.0 * PI * np.arange(N) / N
    # Reflect the half orbit: h(-t) = h(t), h(T - t) = h(t)
    t = np.mod(theta, state.period)
    t = np.where(t > half, state.period - t, t)
    sign = np.where(np.mod(theta, state.period) > half, -1.0, 1.0)
    y = state.solution.sol(t)
    return SymmetricSolution(
        p=p,
        h0=h0,
        period=state.period,
        theta=theta,
        h=y[0],
        dh=sign * y[1],
        energy_drift=state.energy_drift,
    )


def find_symmetric_solution(p, h_max=H0_MAX, N_scan=N_SCAN, progress=False):
    """
    The 2 pi/3-periodic solution with maximum at theta = 0, or None when the
    period map stays above 2 pi/3 on the scanned heights.
    """
    if p >= -2.0:
        raise ValueError("Symmetric solutions are sought for p < -2, got %g" % p)
    h0s = scan_heights(h_max, N_scan)
    rows = period_scan(p, h0s, progress)
    periods = rows["period"]
    if not is_monotone(periods):
        print_warning("Period map is not monotone for p = %g" % p)
    gap = periods - TARGET_PERIOD
    crossing = np.flatnonzero(np.sign(gap[:-1]) * np.sign(gap[1:]) <= 0.0)
    if crossing.size == 0:
        if small_amplitude_period(p) <= TARGET_PERIOD and np.all(gap < 0.0):
            raise NumericalError(
                "Period map stays in [%.12f, %.12f], below 2 pi/3, for p = %g"
                % (periods.min(), periods.max(), p)
            )
        return None
    j = crossing[0]
    try:
        h0 = brentq(
            lambda h: period_map(p, h) - TARGET_PERIOD, h0s[j], h0s[j + 1], xtol=1e-14, rtol=1e-14
        )
    except ValueError as error:
        raise NumericalError(
            "Root bracketing failed on [%.16g, %.16g] with periods [%.12f, %.12f]: %s"
            % (h0s[j], h0s[j + 1], periods[j], periods[j + 1], str(error))
        )
    return sample(p, h0)


# =============================================================================
# Bifurcation
# =============================================================================


def onset(p, h_max=H0_MAX):
    """T(1 + offset) < 2 pi/3 <= T(h_max): a 2 pi/3-periodic orbit exists."""
    return period_map(p, 1.0 + H0_OFFSET) < TARGET_PERIOD <= period_map(p, h_max)


def bifurcation(p_low=-9.0, p_high=-6.0, tol=1e-4, h_max=H0_MAX):
    """Bisect the onset predicate on [p_low, p_high]; returns (threshold, rows)."""
    if not (onset(p_low, h_max) and not onset(p_high, h_max)):
        raise NumericalError(
            "Onset bracket [%g, %g] does not straddle the bifurcation" % (p_low, p_high)
        )
    history = []
    low, high = p_low, p_high
    while high - low > tol:
        mid = 0.5 * (low + high)
        flag = onset(mid, h_max)
        history.append((mid, period_map(mid, 1.0 + H0_OFFSET), period_map(mid, h_max), flag))
        if flag:
            low = mid
        else:
            high = mid
    rows = np.array(history, dtype=type_.make_type_bifurcation_row())
    return 0.5 * (low + high), rows


# =============================================================================
# Cross validation
# =============================================================================


@dataclass
class CrossValidation:
    passed: bool
    distance: float
    shift: float
    reason: str

    def to_dict(self):
        return {"passed": self.passed, "distance": self.distance, "shift": self.shift, "reason": self.reason}


def _normalized(values, p):
    """Scale equispaced samples to int v^p = 2 pi."""
    return values * np.mean(values**p) ** (-1.0 / p)


def cross_validate(u, p, solution=None, threshold=1e-4, constant_tol=1e-6):
    """Sup distance after the best rotation between u and the oracle solution."""
    if u.n != 1:
        raise ValueError("Cross validation is defined for n = 1")
    if solution is None:
        solution = find_symmetric_solution(p)
    elif abs(solution.p - p) > 0.0:
        raise ValueError("Oracle solution has p = %g, expected %g" % (solution.p, p))

    theta = 2.0 * PI * np.arange(N_LIFT_SAMPLES) / N_LIFT_SAMPLES

    def values(shift):
        X = np.column_stack([np.cos(theta + shift), np.sin(theta + shift)])
        return _normalized(u.evaluate(X), p)

    base = values(0.0)
    constant = np.max(np.abs(base - np.mean(base))) < constant_tol

    if solution is None:
        if constant:
            return CrossValidation(True, 0.0, 0.0, "both constant/none")
        raise NumericalError("Non-constant u but no oracle solution for p = %g" % p)
    target = _normalized(solution.h, p)
    if constant:
        distance = float(np.max(np.abs(base - target)))
        return CrossValidation(False, distance, 0.0, "u is constant but the oracle solution is not")

    def distance(shift):
        return float(np.max(np.abs(values(shift) - target)))

    shifts = np.linspace(0.0, 2.0 * PI, 721, endpoint=False)
    coarse = [distance(s) for s in shifts]
    best = shifts[int(np.argmin(coarse))]
    step = shifts[1] - shifts[0]
    result = minimize_scalar(
        distance, bounds=(best - step, best + step), method="bounded", options={"xatol": 1e-12}
    )
    d = float(min(result.fun, min(coarse)))
    shift = float(result.x if result.fun <= min(coarse) else best)
    return CrossValidation(d < threshold, d, shift, "rotation-aligned sup distance")
