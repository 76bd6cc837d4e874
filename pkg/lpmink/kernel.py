import math
import numpy as np

from numba import njit

from lpmink.constant import ASYMPTOTIC_RADIUS


# =============================================================================
# Gnomonic charts
# =============================================================================
# A point X with X_{n+1} != 0 has chart coordinate x = X' / |X_{n+1}| and
# hemisphere sign sigma = sign(X_{n+1}), so that X = (x, sigma) / s with
# conformal factor s = sqrt(1 + |x|^2).


@njit
def chart_norm(x):
    r = 0.0
    for i in range(x.shape[0]):
        r += x[i] * x[i]
    return math.sqrt(r)


@njit
def conformal_factor(r):
    if r > ASYMPTOTIC_RADIUS:
        return r * math.sqrt(1.0 + 1.0 / (r * r))
    return math.sqrt(1.0 + r * r)


@njit
def project(X):
    n = X.shape[0] - 1
    last = X[n]
    sigma = 1.0 if last > 0.0 else -1.0
    x = np.empty(n)
    for i in range(n):
        x[i] = X[i] / abs(last)
    return x, 1.0 / abs(last), sigma


@njit
def lift(x, sigma):
    n = x.shape[0]
    s = conformal_factor(chart_norm(x))
    X = np.empty(n + 1)
    for i in range(n):
        X[i] = x[i] / s
    X[n] = sigma / s
    return X


@njit
def pullback(x, xi, sigma):
    """Differential of the lift applied to the chart vector xi at x."""
    n = x.shape[0]
    r = chart_norm(x)
    s = conformal_factor(r)
    out = np.empty(n + 1)

    if r > ASYMPTOTIC_RADIUS:
        # (1/s) [xi_perp + (xhat.xi) xhat / s^2], last -sigma (xhat.xi) r / s^3
        dot = 0.0
        for i in range(n):
            dot += x[i] / r * xi[i]
        for i in range(n):
            xhat = x[i] / r
            out[i] = (xi[i] - dot * xhat + dot * xhat / (s * s)) / s
        out[n] = -sigma * dot * (r / s) / (s * s)
        return out

    dot = 0.0
    for i in range(n):
        dot += x[i] * xi[i]
    s3 = s * s * s
    for i in range(n):
        out[i] = xi[i] / s - dot * x[i] / s3
    out[n] = -sigma * dot / s3
    return out


# =============================================================================
# Projective field in the chart
# =============================================================================


@njit
def chart_field(A, B, C, D, x):
    """xi^k = (C.x) x_k + (A_kj - D delta_kj) x_j - B_k"""
    n = x.shape[0]
    cx = 0.0
    for i in range(n):
        cx += C[i] * x[i]
    xi = np.empty(n)
    for k in range(n):
        val = cx * x[k] - D * x[k] - B[k]
        for j in range(n):
            val += A[k, j] * x[j]
        xi[k] = val
    return xi


@njit
def chart_beta(A, B, C, D, x, p):
    """Weight beta at the point with south-chart coordinate x."""
    n = x.shape[0]
    r2 = 0.0
    cx = 0.0
    bx = 0.0
    xAx = 0.0
    for i in range(n):
        r2 += x[i] * x[i]
        cx += C[i] * x[i]
        bx += B[i] * x[i]
        for j in range(n):
            xAx += x[i] * A[i, j] * x[j]
    gamma = (p + n + 1.0) / (n + 1.0)
    if r2 > ASYMPTOTIC_RADIUS * ASYMPTOTIC_RADIUS:
        # Divide through by |x|^2 first
        return gamma * (
            D * (1.0 - n / r2) + (n + 1.0) * cx / r2 - (n + 1.0) * (xAx - bx) / r2
        ) / (1.0 + 1.0 / r2)
    return gamma * (-D * (n - r2) + (n + 1.0) * cx - (n + 1.0) * (xAx - bx)) / (1.0 + r2)


@njit
def field_at(A, B, C, D, X):
    """Sphere field from the south chart, mirrored antipodally to the north."""
    if X[X.shape[0] - 1] < 0.0:
        x, s, sigma = project(X)
        return pullback(x, chart_field(A, B, C, D, x), sigma)
    x, s, sigma = project(-X)
    return -pullback(x, chart_field(A, B, C, D, x), sigma)


@njit
def beta_at(A, B, C, D, X, p):
    if X[X.shape[0] - 1] < 0.0:
        x, s, sigma = project(X)
    else:
        x, s, sigma = project(-X)
    return chart_beta(A, B, C, D, x, p)
