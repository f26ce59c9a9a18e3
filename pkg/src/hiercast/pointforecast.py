"""Loss-optimal point forecasts: MAD, MAPE and zero-adjusted APE.

MAD is minimised by the forecast median.  MAPE (evaluated only at nonzero
outcomes) is minimised by the (-1)-median: the median of the reweighted law
g(y) proportional to p(y)/y on y > 0.  ZAPE charges f/(1+f) at zero
outcomes and |y-f|/y otherwise; for counts its optimum is found by exact
risk enumeration over 0..(-1)-median, and for continuous spend laws by
solving the stationarity condition

    pi0/(1+f)^2 + (2/c) G(f) - 1/c = 0

with G the cdf of g, via gradient descent with a backtracking line search
(bisection on the same condition is the test oracle).  Spend laws must be
truncated (see LogTDistribution) or the reweighted integrals diverge.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import special as sp
from scipy import stats

from .distributions import (
    DollarSpendForecast,
    ForecastDistribution,
    LogTDistribution,
    PointMass,
)

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(128)


class Loss(enum.Enum):
    MAD = "mad"
    MAPE = "mape"
    ZAPE = "zape"


@dataclass
class LossSpec:
    kind: Loss
    zape_c: float = 1.0

    def __post_init__(self):
        if self.kind is Loss.ZAPE and self.zape_c < 1.0:
            raise ValueError("ZAPE constant c must be >= 1")


def realized_loss(y: float, f: float, spec: LossSpec) -> float:
    """Loss of point forecast f at outcome y; MAPE at y=0 is undefined (nan)."""
    if spec.kind is Loss.MAD:
        return abs(y - f)
    if spec.kind is Loss.MAPE:
        return abs(y - f) / y if y > 0 else math.nan
    if y == 0:
        return f / (1.0 + f)
    return abs(y - f) / y


def _is_discrete(dist) -> bool:
    return hasattr(dist, "pmf") and hasattr(dist, "support_upper")


def mad_optimal(dist: ForecastDistribution) -> float:
    return float(dist.quantile(0.5))


# ---------------------------------------------------------------------------
# count case


def _count_table(dist, tail=1e-12):
    upper = dist.support_upper(tail)
    ys = np.arange(0, upper + 1)
    return ys, np.asarray(dist.pmf(ys), dtype=float)


def mape_optimal(dist: ForecastDistribution) -> float:
    """The (-1)-median; requires positive-support mass."""
    if isinstance(dist, PointMass):
        if dist.value <= 0:
            raise ValueError("distribution has no positive-support mass")
        return dist.value
    if _is_discrete(dist):
        ys, pmf = _count_table(dist)
        weights = np.where(ys >= 1, pmf / np.maximum(ys, 1), 0.0)
        total = weights.sum()
        if total <= 0:
            raise ValueError("distribution has no positive-support mass")
        idx = int(np.searchsorted(np.cumsum(weights), 0.5 * total))
        return float(ys[idx])
    pi0, logt = _spend_parts(dist)
    if pi0 >= 1.0:
        raise ValueError("distribution has no positive-support mass")
    h_total = _inv_moment(logt, logt.hi)
    target = 0.5 * h_total

    def root(f):
        return _inv_moment(logt, f) - target

    from scipy.optimize import brentq

    return float(brentq(root, logt.lo, logt.hi, xtol=1e-12, rtol=1e-12))


def _count_zape_risk(ys, pmf, f):
    p0 = pmf[0] if ys[0] == 0 else 0.0
    pos = ys >= 1
    loss = np.abs(ys[pos] - f) / ys[pos]
    return p0 * f / (1.0 + f) + float(pmf[pos] @ loss)


def zape_optimal(dist: ForecastDistribution, c: float = 1.0) -> float:
    """ZAPE-optimal point forecast.

    Counts: exact expected-loss enumeration over 0..(-1)-median (smallest
    minimiser on ties).  Continuous spend mixtures: gradient descent on the
    risk derivative, the zero-threshold rule, and a final risk comparison
    against f = 0.  Returns 0 when there is no positive mass.
    """
    if c < 1.0:
        raise ValueError("ZAPE constant c must be >= 1")
    if isinstance(dist, PointMass):
        return dist.value if dist.value > 0 else 0.0
    if _is_discrete(dist):
        ys, pmf = _count_table(dist)
        if pmf[ys >= 1].sum() <= 0:
            return 0.0
        upper = int(mape_optimal(dist))
        candidates = np.arange(0, upper + 1)
        risks = np.array([_count_zape_risk(ys, pmf, float(f)) for f in candidates])
        return float(candidates[int(np.argmin(risks))])
    return _zape_optimal_spend(dist, c)


# ---------------------------------------------------------------------------
# continuous (truncated log-T) case


def _spend_parts(dist) -> tuple[float, LogTDistribution]:
    if isinstance(dist, LogTDistribution):
        return 0.0, dist
    if isinstance(dist, DollarSpendForecast):
        return dist.zero_atom(), dist.logt
    raise TypeError(f"no continuous point-forecast rule for {type(dist).__name__}")


def _inv_moment(logt: LogTDistribution, f: float) -> float:
    """H(f) = integral of p(y)/y over [lo, min(f, hi)]."""
    f = min(max(f, logt.lo), logt.hi)
    a, b = math.log(logt.lo), math.log(f)
    if b <= a:
        return 0.0
    x = 0.5 * (b - a) * _GL_NODES + 0.5 * (a + b)
    w = 0.5 * (b - a) * _GL_WEIGHTS
    dens = stats.t.pdf((x - logt.loc) / logt._s, logt.dof) / (logt._s * logt._z)
    return float(np.sum(w * np.exp(-x) * dens))


def _spend_zape_risk(pi0: float, logt: LogTDistribution, f: float) -> float:
    if f <= 0.0:
        return 1.0 - pi0
    p1 = 1.0 - pi0
    h_tot = _inv_moment(logt, logt.hi)
    fc = min(max(f, logt.lo), logt.hi)
    h_f = _inv_moment(logt, fc)
    q_f = float(logt.cdf(fc))
    cond = f * (2.0 * h_f - h_tot) - 2.0 * q_f + 1.0
    if f < logt.lo:
        cond = 1.0 - f * h_tot
    return pi0 * f / (1.0 + f) + p1 * cond


def _spend_zape_grad(pi0: float, logt: LogTDistribution, f: float) -> float:
    p1 = 1.0 - pi0
    h_tot = _inv_moment(logt, logt.hi)
    return pi0 / (1.0 + f) ** 2 + p1 * (2.0 * _inv_moment(logt, f) - h_tot)


def _zape_stationary_bisect(pi0, logt, f_hi) -> float:
    """Rightmost negative-to-positive crossing of the risk derivative.

    The derivative starts at pi0 - (1-pi0) H(hi) near zero, can dip negative,
    and is non-negative at the (-1)-median, so the interior minimum is the
    last sign change at or below it.
    """
    from scipy.optimize import brentq

    grid = np.geomspace(logt.lo, max(f_hi, logt.lo * (1 + 1e-9)), 96)
    grads = np.array([_spend_zape_grad(pi0, logt, float(f)) for f in grid])
    neg = np.flatnonzero(grads < 0.0)
    if neg.size == 0:
        return 0.0
    j = neg[-1]
    if j == len(grid) - 1:
        return float(grid[-1])
    return float(brentq(lambda f: _spend_zape_grad(pi0, logt, f),
                        grid[j], grid[j + 1], xtol=1e-10))


def _zape_optimal_spend(dist, c: float) -> float:
    pi0, logt = _spend_parts(dist)
    if pi0 >= 1.0:
        return 0.0
    f = mape_optimal(dist)  # upper bound for the optimum; descend from here
    f_hi = f
    risk = _spend_zape_risk(pi0, logt, f)
    for _ in range(10_000):
        grad = _spend_zape_grad(pi0, logt, f)
        if abs(grad) < 1e-8:
            break
        step = 1.0
        moved = False
        for _ in range(60):
            f_try = max(f - step * grad, 0.0)
            risk_try = _spend_zape_risk(pi0, logt, f_try)
            if risk_try < risk:
                f, risk = f_try, risk_try
                moved = True
                break
            step *= 0.5
        if not moved or f == 0.0:
            break
    if pi0 * c / (1.0 + f) ** 2 >= 1.0:
        return 0.0
    # Descent can clamp at 0 past a minimum close to the truncation bound, and
    # a heavy zero atom can make the boundary beat the stationary point; take
    # the best of descent, the bisection root of the same condition, and 0.
    candidates = [0.0, f, _zape_stationary_bisect(pi0, logt, f_hi)]
    risks = [_spend_zape_risk(pi0, logt, fc) for fc in candidates]
    return float(candidates[int(np.argmin(risks))])


# ---------------------------------------------------------------------------
# batched twins used by the experiment runner (array parameters per week)

SPEND_GRID_SIZE = 384


def _t_logpdf(z, dof):
    """Student-t log density without the scipy wrapper overhead."""
    half = 0.5 * (dof + 1.0)
    return (sp.gammaln(half) - sp.gammaln(0.5 * dof)
            - 0.5 * np.log(np.pi * dof) - half * np.log1p(z * z / dof))


def _spend_grids(dof, loc, scale, lo, hi):
    """Shared log-grid inverse-moment table H(x) = integral of p(y)/y, one
    row per week, plus the truncation constants."""
    x = np.linspace(math.log(lo), math.log(hi), SPEND_GRID_SIZE)
    s = np.sqrt(scale)[:, None]
    z = (x[None, :] - loc[:, None]) / s
    ca = sp.stdtr(dof, (math.log(lo) - loc) / np.sqrt(scale))
    cb = sp.stdtr(dof, (math.log(hi) - loc) / np.sqrt(scale))
    zmass = np.maximum(cb - ca, 1e-300)
    dens_x = np.exp(_t_logpdf(z, dof[:, None])) / (s * zmass[:, None])
    dx = x[1] - x[0]
    inv_steps = 0.5 * dx * (dens_x * np.exp(-x)[None, :])
    h = np.concatenate(
        [np.zeros((len(dof), 1)), np.cumsum(inv_steps[:, 1:] + inv_steps[:, :-1], axis=1)],
        axis=1,
    )
    return x, h, ca, zmass


def spend_mad_batch(nonzero_prob, dof, loc, scale) -> np.ndarray:
    """Vectorized median of (atom at 0 + Student-t on log spend) in dollars."""
    nonzero_prob = np.asarray(nonzero_prob, float)
    u = (0.5 - (1.0 - nonzero_prob)) / np.maximum(nonzero_prob, 1e-12)
    with np.errstate(invalid="ignore"):
        med = np.exp(loc + np.sqrt(scale) * sp.stdtrit(np.asarray(dof, float),
                                                       np.clip(u, 1e-12, 1 - 1e-12)))
    return np.where(nonzero_prob <= 0.5, 0.0, med)


def _mape_from_grid(x, h):
    target = 0.5 * h[:, -1]
    idx = np.clip((h >= target[:, None]).argmax(axis=1), 1, SPEND_GRID_SIZE - 1)
    rows = np.arange(h.shape[0])
    h1, h0 = h[rows, idx], h[rows, idx - 1]
    frac = np.where(h1 > h0, (target - h0) / np.maximum(h1 - h0, 1e-300), 0.0)
    return np.exp(x[idx - 1] + frac * (x[idx] - x[idx - 1]))


def _zape_from_grid(x, h, ca, zmass, nonzero_prob, dof, loc, scale, lo, hi):
    p1 = np.asarray(nonzero_prob, float)
    pi0 = 1.0 - p1
    y = np.exp(x)[None, :]
    h_tot = h[:, -1][:, None]
    grad = pi0[:, None] / (1.0 + y) ** 2 + p1[:, None] * (2.0 * h - h_tot)
    neg = grad < 0.0
    # rightmost sign change: the derivative can start positive, dip negative,
    # and is positive by the upper bound, so the interior minimum is the last
    # negative node (interpolated against its right neighbour)
    any_neg = neg.any(axis=1)
    idx = SPEND_GRID_SIZE - 1 - np.argmax(neg[:, ::-1], axis=1)
    idx = np.clip(idx, 0, SPEND_GRID_SIZE - 2)
    rows = np.arange(len(p1))
    g0, g1 = grad[rows, idx], grad[rows, idx + 1]
    frac = np.where(g1 != g0, -g0 / np.where(g1 - g0 == 0, 1.0, g1 - g0), 0.0)
    frac = np.clip(frac, 0.0, 1.0)
    f_star = np.exp(x[idx] + frac * (x[idx + 1] - x[idx]))
    f_star = np.where(any_neg, f_star, 0.0)
    # boundary comparison against f = 0 (risk there is P(y > 0))
    fc = np.clip(f_star, lo, hi)
    xi = np.clip(np.searchsorted(x, np.log(np.maximum(fc, lo))),
                 1, SPEND_GRID_SIZE - 1)
    w = (np.log(fc) - x[xi - 1]) / (x[xi] - x[xi - 1])
    h_f = h[rows, xi - 1] * (1 - w) + h[rows, xi] * w
    q_f = (sp.stdtr(dof, (np.log(fc) - loc) / np.sqrt(scale)) - ca) / zmass
    cond = f_star * (2.0 * h_f - h_tot[:, 0]) - 2.0 * np.clip(q_f, 0, 1) + 1.0
    risk = pi0 * f_star / (1.0 + f_star) + p1 * cond
    return np.where(risk >= p1, 0.0, f_star)


def spend_mape_batch(dof, loc, scale, lo=0.01, hi=1e4) -> np.ndarray:
    """Vectorized (-1)-median of truncated log-T rows (grid + interpolation)."""
    dof = np.asarray(dof, float)
    loc = np.asarray(loc, float)
    scale = np.asarray(scale, float)
    x, h, _, _ = _spend_grids(dof, loc, scale, lo, hi)
    return _mape_from_grid(x, h)


def spend_zape_batch(nonzero_prob, dof, loc, scale, lo=0.01, hi=1e4) -> np.ndarray:
    """Vectorized ZAPE optimum for atom-plus-truncated-log-T rows.

    Locates the sign change of the risk derivative on the shared log grid
    (linear interpolation between nodes), then keeps the better of that
    stationary point and the boundary f = 0.
    """
    dof = np.asarray(dof, float)
    loc = np.asarray(loc, float)
    scale = np.asarray(scale, float)
    x, h, ca, zmass = _spend_grids(dof, loc, scale, lo, hi)
    return _zape_from_grid(x, h, ca, zmass, nonzero_prob, dof, loc, scale, lo, hi)


def spend_points_batch(nonzero_prob, dof, loc, scale, lo=0.01, hi=1e4):
    """(mad, mape, zape) arrays sharing one grid build; used by the runner."""
    dof = np.asarray(dof, float)
    loc = np.asarray(loc, float)
    scale = np.asarray(scale, float)
    mad = spend_mad_batch(nonzero_prob, dof, loc, scale)
    x, h, ca, zmass = _spend_grids(dof, loc, scale, lo, hi)
    mape = _mape_from_grid(x, h)
    zape = _zape_from_grid(x, h, ca, zmass, nonzero_prob, dof, loc, scale,
                           lo, hi)
    return mad, mape, zape


def count_points_batch(gate_alpha, gate_beta, size_alpha, size_beta,
                       max_support=400):
    """MAD/MAPE/ZAPE optima for zero-inflated 1-shifted NB rows.

    Returns (mad, mape, zape) arrays; rows are independent weekly forecasts.
    """
    ga = np.asarray(gate_alpha, float)
    gb = np.asarray(gate_beta, float)
    sa = np.asarray(size_alpha, float)
    sb = np.asarray(size_beta, float)
    p1 = ga / (ga + gb)
    p = sb / (1.0 + sb)
    upper = int(np.clip(stats.nbinom.ppf(1.0 - 1e-10, sa, p).max() + 2, 8,
                        max_support))
    counts = np.arange(0, upper + 1)
    pmf = np.zeros((len(ga), upper + 1))
    pmf[:, 0] = 1.0 - p1
    pmf[:, 1:] = p1[:, None] * stats.nbinom.pmf(counts[None, :-1], sa[:, None],
                                                p[:, None])
    cdf = np.cumsum(pmf, axis=1)
    mad = counts[(cdf >= 0.5 - 1e-12).argmax(axis=1)].astype(float)

    weights = pmf[:, 1:] / counts[None, 1:]
    wcum = np.cumsum(weights, axis=1)
    wtot = wcum[:, -1]
    has_pos = wtot > 0
    half = 0.5 * wtot
    mape = np.ones(len(ga))
    mape[has_pos] = counts[1:][(wcum[has_pos] >= half[has_pos, None]
                                - 1e-15).argmax(axis=1)]
    mape = np.where(has_pos, mape, 0.0)

    fmax = int(mape.max()) if has_pos.any() else 0
    fs = np.arange(0, fmax + 1, dtype=float)
    # risk(f) = p0 f/(1+f) + sum_y pmf(y) |y-f|/y over y >= 1
    loss = np.abs(counts[None, 1:, None] - fs[None, None, :]) / counts[None, 1:, None]
    risks = np.einsum("rk,rkf->rf", pmf[:, 1:], np.broadcast_to(
        loss, (len(ga), upper, fmax + 1)))
    risks = risks + pmf[:, 0][:, None] * (fs / (1.0 + fs))[None, :]
    risks = np.where(fs[None, :] <= mape[:, None], risks, np.inf)
    zape = fs[np.argmin(risks, axis=1)]
    zape = np.where(has_pos, zape, 0.0)
    return mad, mape, zape
