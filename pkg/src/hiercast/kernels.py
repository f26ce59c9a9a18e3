"""Conjugate-parameter solvers: the hot kernels of the filtering cycle.

Every Bernoulli/Poisson model update solves a small nonlinear system mapping
linear-predictor moments (f, q) to conjugate-prior parameters (alpha, beta),
then maps the updated parameters back.  These run once per model per week
per household, so they are jit-compiled (see `_backend`).

Parameter conventions:
  * Bernoulli: alpha, beta are Beta-distribution parameters for the success
    probability; the linear predictor is the logit, so
        f = digamma(alpha) - digamma(beta)
        q = trigamma(alpha) + trigamma(beta).
  * Poisson: alpha, beta are Gamma shape/rate for the event intensity; the
    linear predictor is the log intensity, so
        f = digamma(alpha) - log(beta)
        q = trigamma(alpha).
"""

import math

from ._backend import jit_kernel
from .special import digamma, digamma_inverse, tetragamma, trigamma, trigamma_inverse

PARAM_FLOOR = 1e-6
_TOL = 1e-10
_MAX_ITER = 50


@jit_kernel
def bernoulli_moments(alpha: float, beta: float):
    """Forward map from Beta parameters to logit mean/variance."""
    f = digamma(alpha) - digamma(beta)
    q = trigamma(alpha) + trigamma(beta)
    return f, q


@jit_kernel
def poisson_moments(alpha: float, beta: float):
    """Forward map from Gamma shape/rate to log-mean/variance."""
    f = digamma(alpha) - math.log(beta)
    q = trigamma(alpha)
    return f, q


@jit_kernel
def _bernoulli_residual(u: float, v: float, f: float, q: float):
    a = math.exp(u)
    b = math.exp(v)
    r1 = digamma(a) - digamma(b) - f
    r2 = trigamma(a) + trigamma(b) - q
    return r1, r2


@jit_kernel
def solve_bernoulli(f: float, q: float):
    """Invert the Bernoulli moment map.

    Damped Newton in log-parameters (positivity for free), starting from the
    large-parameter closed form alpha ~ (1 + e^f)/q.  Returns
    (alpha, beta, converged); callers raise on non-convergence.
    """
    if q <= 0.0:
        return math.nan, math.nan, 0

    a0 = (1.0 + math.exp(min(f, 35.0))) / q
    b0 = (1.0 + math.exp(min(-f, 35.0))) / q
    u = math.log(max(a0, PARAM_FLOOR))
    v = math.log(max(b0, PARAM_FLOOR))

    r1, r2 = _bernoulli_residual(u, v, f, q)
    norm = abs(r1) + abs(r2)
    for _ in range(_MAX_ITER):
        if norm < _TOL:
            return math.exp(u), math.exp(v), 1
        a = math.exp(u)
        b = math.exp(v)
        # Jacobian of the residual w.r.t. (u, v) = (log a, log b).
        j11 = trigamma(a) * a
        j12 = -trigamma(b) * b
        j21 = tetragamma(a) * a
        j22 = tetragamma(b) * b
        det = j11 * j22 - j12 * j21
        if det == 0.0 or not math.isfinite(det):
            return math.exp(u), math.exp(v), 0
        du = (r1 * j22 - r2 * j12) / det
        dv = (j11 * r2 - j21 * r1) / det
        # Backtrack until the residual norm actually shrinks.
        step = 1.0
        improved = False
        for _ in range(40):
            u_try = u - step * du
            v_try = v - step * dv
            t1, t2 = _bernoulli_residual(u_try, v_try, f, q)
            norm_try = abs(t1) + abs(t2)
            if math.isfinite(norm_try) and norm_try < norm:
                u, v = u_try, v_try
                r1, r2 = t1, t2
                norm = norm_try
                improved = True
                break
            step *= 0.5
        if not improved:
            break
    if norm < _TOL:
        return math.exp(u), math.exp(v), 1
    return math.exp(u), math.exp(v), 0


@jit_kernel
def solve_poisson(f: float, q: float):
    """Invert the Poisson moment map: shape from trigamma, rate in closed form."""
    if q <= 0.0:
        return math.nan, math.nan, 0
    alpha = trigamma_inverse(q)
    if not math.isfinite(alpha):
        return math.nan, math.nan, 0
    alpha = max(alpha, PARAM_FLOOR)
    beta = math.exp(digamma(alpha) - f)
    if not math.isfinite(beta) or beta <= 0.0:
        return alpha, max(beta, PARAM_FLOOR), 0
    return alpha, beta, 1


@jit_kernel
def solve_bernoulli_grid(fs, qs, out_alpha, out_beta):
    """Batch solve over flattened grids; returns count of failures."""
    failures = 0
    for i in range(fs.shape[0]):
        a, b, ok = solve_bernoulli(fs[i], qs[i])
        out_alpha[i] = a
        out_beta[i] = b
        if ok == 0:
            failures += 1
    return failures
