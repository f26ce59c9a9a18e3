"""Predictive distributions produced by the filtering models.

All classes share a small interface: ``mean``, ``cdf``, ``quantile``,
``sample``, plus ``pmf`` (discrete) or ``pdf`` (continuous).  Quantiles use
the convention q(u) = inf{x : cdf(x) >= u}, so count quantiles are exact
and atoms (the zero spikes of the mixtures) absorb whole quantile ranges.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special as sp
from scipy import stats

_TAIL = 1e-12


class ForecastDistribution:
    """Interface stub; concrete classes implement the methods they support."""

    def mean(self) -> float:
        raise NotImplementedError

    def cdf(self, x):
        raise NotImplementedError

    def quantile(self, u):
        raise NotImplementedError

    def sample(self, rng, size=None):
        raise NotImplementedError

    def zero_atom(self) -> float:
        """P(X = 0); zero for purely continuous laws."""
        return 0.0


class PointMass(ForecastDistribution):
    def __init__(self, value: float):
        self.value = float(value)

    def mean(self):
        return self.value

    def pmf(self, y):
        y = np.asarray(y, dtype=float)
        return np.where(y == self.value, 1.0, 0.0)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= self.value, 1.0, 0.0)

    def quantile(self, u):
        return np.full_like(np.asarray(u, dtype=float), self.value)

    def sample(self, rng, size=None):
        return np.full(size if size is not None else (), self.value)

    def zero_atom(self):
        return 1.0 if self.value == 0.0 else 0.0

    def support_upper(self, tail=_TAIL):
        return int(self.value)


class BetaBernoulliForecast(ForecastDistribution):
    """Binary outcome with Beta-distributed success probability."""

    def __init__(self, alpha: float, beta: float):
        self.alpha = float(alpha)
        self.beta = float(beta)

    @property
    def p_one(self) -> float:
        return self.alpha / (self.alpha + self.beta)

    def mean(self):
        return self.p_one

    def pmf(self, y):
        y = np.asarray(y, dtype=float)
        return np.where(y == 1, self.p_one, np.where(y == 0, 1.0 - self.p_one, 0.0))

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 1, 1.0, np.where(x >= 0, 1.0 - self.p_one, 0.0))

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        return np.where(u <= 1.0 - self.p_one, 0.0, 1.0)

    def sample(self, rng, size=None):
        pi = rng.beta(self.alpha, self.beta, size=size)
        return (rng.random(size=size) < pi).astype(np.int64)

    def zero_atom(self):
        return 1.0 - self.p_one

    def support_upper(self, tail=_TAIL):
        return 1


class NegativeBinomialForecast(ForecastDistribution):
    """Count forecast from a Gamma(alpha, rate beta) intensity."""

    def __init__(self, alpha: float, beta: float):
        self.alpha = float(alpha)
        self.beta = float(beta)

    @property
    def _p(self) -> float:
        return self.beta / (1.0 + self.beta)

    def mean(self):
        return self.alpha / self.beta

    def pmf(self, y):
        return stats.nbinom.pmf(np.asarray(y), self.alpha, self._p)

    def cdf(self, x):
        return stats.nbinom.cdf(np.floor(np.asarray(x, dtype=float)), self.alpha, self._p)

    def quantile(self, u):
        return stats.nbinom.ppf(np.asarray(u, dtype=float), self.alpha, self._p)

    def sample(self, rng, size=None):
        mu = rng.gamma(self.alpha, 1.0 / self.beta, size=size)
        return rng.poisson(mu)

    def zero_atom(self):
        return float(stats.nbinom.pmf(0, self.alpha, self._p))

    def support_upper(self, tail=_TAIL):
        return int(stats.nbinom.ppf(1.0 - tail, self.alpha, self._p)) + 1


class CountMixtureForecast(ForecastDistribution):
    """Zero-inflated count forecast: Beta-gated, 1-shifted negative binomial.

    P(0) = gate_beta / (gate_alpha + gate_beta); conditionally on a purchase
    the count is 1 + NegBin from the Poisson component's Gamma parameters.
    """

    def __init__(self, gate_alpha, gate_beta, size_alpha, size_beta):
        self.gate_alpha = float(gate_alpha)
        self.gate_beta = float(gate_beta)
        self.positive = NegativeBinomialForecast(size_alpha, size_beta)

    @property
    def nonzero_prob(self) -> float:
        return self.gate_alpha / (self.gate_alpha + self.gate_beta)

    def mean(self):
        return self.nonzero_prob * (1.0 + self.positive.mean())

    def pmf(self, y):
        y = np.asarray(y, dtype=float)
        p1 = self.nonzero_prob
        pos = np.where(y >= 1, p1 * self.positive.pmf(np.maximum(y - 1, 0)), 0.0)
        return np.where(y == 0, 1.0 - p1, pos)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        p1 = self.nonzero_prob
        out = np.where(x >= 1, (1.0 - p1) + p1 * self.positive.cdf(x - 1), 0.0)
        return np.where((x >= 0) & (x < 1), 1.0 - p1, out)

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        p1 = self.nonzero_prob
        inner = np.clip((u - (1.0 - p1)) / max(p1, _TAIL), 0.0, 1.0)
        return np.where(u <= 1.0 - p1, 0.0, 1.0 + self.positive.quantile(inner))

    def sample(self, rng, size=None):
        pi = rng.beta(self.gate_alpha, self.gate_beta, size=size)
        z = rng.random(size=size) < pi
        return np.where(z, 1 + self.positive.sample(rng, size=size), 0)

    def zero_atom(self):
        return 1.0 - self.nonzero_prob

    def support_upper(self, tail=_TAIL):
        return 1 + self.positive.support_upper(tail)


class StudentTForecast(ForecastDistribution):
    """Student-t with location and squared-scale parameters."""

    def __init__(self, dof: float, loc: float, scale: float):
        if scale <= 0:
            raise ValueError("scale must be positive")
        self.dof = float(dof)
        self.loc = float(loc)
        self.scale = float(scale)  # squared scale (forecast variance parameter)

    @property
    def _s(self) -> float:
        return math.sqrt(self.scale)

    def mean(self):
        return self.loc

    def pdf(self, x):
        z = (np.asarray(x, dtype=float) - self.loc) / self._s
        return stats.t.pdf(z, self.dof) / self._s

    def cdf(self, x):
        z = (np.asarray(x, dtype=float) - self.loc) / self._s
        return sp.stdtr(self.dof, z)

    def quantile(self, u):
        return self.loc + self._s * sp.stdtrit(self.dof, np.asarray(u, dtype=float))

    def sample(self, rng, size=None):
        return self.loc + self._s * rng.standard_t(self.dof, size=size)

    def central_interval(self, level: float):
        half = 0.5 * (1.0 - level)
        return self.quantile(half), self.quantile(1.0 - half)


class SpendMixtureForecast(ForecastDistribution):
    """Log-scale spend forecast: exact atom at 0 plus a Student-t.

    The zero encodes "no spend"; conditional on spending, the log amount is
    Student-t.  Gate parameters come from the binary component's Beta law.
    """

    def __init__(self, gate_alpha, gate_beta, dof, loc, scale):
        self.gate_alpha = float(gate_alpha)
        self.gate_beta = float(gate_beta)
        self.t = StudentTForecast(dof, loc, scale)

    @property
    def nonzero_prob(self) -> float:
        return self.gate_alpha / (self.gate_alpha + self.gate_beta)

    def mean(self):
        return self.nonzero_prob * self.t.mean()

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return self.nonzero_prob * self.t.cdf(x) + (1.0 - self.nonzero_prob) * (x >= 0)

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        p1 = self.nonzero_prob
        below = p1 * self.t.cdf(0.0)
        upper = below + (1.0 - p1)
        low = self.t.quantile(np.clip(u / max(p1, _TAIL), _TAIL, 1 - _TAIL))
        high = self.t.quantile(np.clip((u - (1.0 - p1)) / max(p1, _TAIL), _TAIL, 1 - _TAIL))
        return np.where(u <= below, low, np.where(u <= upper, 0.0, high))

    def sample(self, rng, size=None):
        pi = rng.beta(self.gate_alpha, self.gate_beta, size=size)
        z = rng.random(size=size) < pi
        return np.where(z, self.t.sample(rng, size=size), 0.0)

    def zero_atom(self):
        return 1.0 - self.nonzero_prob

    def dollars(self, lo: float = 0.01, hi: float = 1e4) -> "DollarSpendForecast":
        """Dollar-scale view: atom at 0 plus truncated log-T."""
        return DollarSpendForecast(
            self.nonzero_prob, LogTDistribution(self.t.dof, self.t.loc, self.t.scale, lo, hi)
        )


class LogTDistribution(ForecastDistribution):
    """Truncated log-T: exp of a Student-t, restricted to [lo, hi].

    The untruncated law has no finite moments (inverse-power decay in log y
    with a pole at zero), so loss optimisation always works on the truncated
    version.
    """

    def __init__(self, dof, loc, scale, lo=0.01, hi=1e4):
        if not 0.0 < lo < hi < math.inf:
            raise ValueError("truncation bounds must satisfy 0 < lo < hi < inf")
        self.dof = float(dof)
        self.loc = float(loc)
        self.scale = float(scale)
        self.lo = float(lo)
        self.hi = float(hi)
        self._s = math.sqrt(self.scale)
        self._ca = sp.stdtr(self.dof, (math.log(lo) - self.loc) / self._s)
        self._cb = sp.stdtr(self.dof, (math.log(hi) - self.loc) / self._s)
        self._z = self._cb - self._ca
        if self._z <= 0:
            raise ValueError("truncation interval carries no mass")

    def pdf(self, y):
        y = np.asarray(y, dtype=float)
        inside = (y >= self.lo) & (y <= self.hi)
        ysafe = np.where(inside, y, 1.0)
        z = (np.log(ysafe) - self.loc) / self._s
        val = stats.t.pdf(z, self.dof) / (ysafe * self._s * self._z)
        return np.where(inside, val, 0.0)

    def cdf(self, y):
        y = np.asarray(y, dtype=float)
        ysafe = np.clip(y, self.lo, self.hi)
        z = (np.log(ysafe) - self.loc) / self._s
        val = (sp.stdtr(self.dof, z) - self._ca) / self._z
        return np.where(y < self.lo, 0.0, np.where(y > self.hi, 1.0, val))

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        p = self._ca + u * self._z
        return np.exp(self.loc + self._s * sp.stdtrit(self.dof, p))

    def sample(self, rng, size=None):
        return self.quantile(rng.random(size=size))

    def mean(self):
        nodes, weights = np.polynomial.legendre.leggauss(256)
        a, b = math.log(self.lo), math.log(self.hi)
        x = 0.5 * (b - a) * nodes + 0.5 * (a + b)
        w = 0.5 * (b - a) * weights
        dens = stats.t.pdf((x - self.loc) / self._s, self.dof) / (self._s * self._z)
        return float(np.sum(w * np.exp(x) * dens))


class DollarSpendForecast(ForecastDistribution):
    """Atom at 0 plus truncated log-T on the dollar scale."""

    def __init__(self, nonzero_prob: float, logt: LogTDistribution):
        self.nonzero_prob = float(nonzero_prob)
        self.logt = logt

    def mean(self):
        return self.nonzero_prob * self.logt.mean()

    def cdf(self, y):
        y = np.asarray(y, dtype=float)
        return (1.0 - self.nonzero_prob) * (y >= 0) + self.nonzero_prob * self.logt.cdf(y)

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        p0 = 1.0 - self.nonzero_prob
        inner = np.clip((u - p0) / max(self.nonzero_prob, _TAIL), 0.0, 1.0)
        return np.where(u <= p0, 0.0, self.logt.quantile(inner))

    def sample(self, rng, size=None):
        z = rng.random(size=size) < self.nonzero_prob
        return np.where(z, self.logt.sample(rng, size=size), 0.0)

    def zero_atom(self):
        return 1.0 - self.nonzero_prob


class ZeroGatedForecast(ForecastDistribution):
    """(1 - gate) point mass at 0, gate times an inner forecast."""

    def __init__(self, gate: float, inner: ForecastDistribution):
        if not 0.0 <= gate <= 1.0:
            raise ValueError("gate probability must lie in [0, 1]")
        self.gate = float(gate)
        self.inner = inner

    def mean(self):
        return self.gate * self.inner.mean()

    def pmf(self, y):
        y = np.asarray(y, dtype=float)
        inner = self.gate * self.inner.pmf(y)
        return np.where(y == 0, (1.0 - self.gate) + inner, inner)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return self.gate * self.inner.cdf(x) + (1.0 - self.gate) * (x >= 0)

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        g = self.gate
        if g <= _TAIL:
            return np.zeros_like(u)
        below = g * (self.inner.cdf(0.0) - self.inner.zero_atom())
        upper = below + (1.0 - g) + g * self.inner.zero_atom()
        low = self.inner.quantile(np.clip(u / g, _TAIL, 1 - _TAIL))
        high = self.inner.quantile(np.clip((u - (1.0 - g)) / g, _TAIL, 1 - _TAIL))
        return np.where(u <= below, low, np.where(u <= upper, 0.0, high))

    def sample(self, rng, size=None):
        z = rng.random(size=size) < self.gate
        return np.where(z, self.inner.sample(rng, size=size), 0.0)

    def zero_atom(self):
        return (1.0 - self.gate) + self.gate * self.inner.zero_atom()

    def support_upper(self, tail=_TAIL):
        return self.inner.support_upper(tail)


class EnsembleForecast(ForecastDistribution):
    """Equally weighted mixture over member forecasts (sampled covariate paths)."""

    def __init__(self, members):
        if not members:
            raise ValueError("ensemble needs at least one member")
        self.members = list(members)

    def mean(self):
        return float(np.mean([m.mean() for m in self.members]))

    def pmf(self, y):
        return np.mean([m.pmf(y) for m in self.members], axis=0)

    def cdf(self, x):
        return np.mean([m.cdf(x) for m in self.members], axis=0)

    def zero_atom(self):
        return float(np.mean([m.zero_atom() for m in self.members]))

    def support_upper(self, tail=_TAIL):
        return max(m.support_upper(tail) for m in self.members)

    def quantile(self, u):
        u_arr = np.atleast_1d(np.asarray(u, dtype=float))
        upper = self.support_upper(1e-10)
        grid = np.arange(0, upper + 1)
        cdf = self.cdf(grid)
        idx = np.searchsorted(cdf, u_arr - 1e-12, side="left")
        out = grid[np.minimum(idx, len(grid) - 1)].astype(float)
        return out if np.ndim(u) else float(out[0])

    def sample(self, rng, size=None):
        n = int(np.prod(size)) if size is not None else 1
        picks = rng.integers(0, len(self.members), size=n)
        draws = np.empty(n, dtype=float)
        for j, m in enumerate(self.members):
            mask = picks == j
            k = int(mask.sum())
            if k:
                draws[mask] = np.asarray(m.sample(rng, size=k), dtype=float)
        if size is None:
            return float(draws[0])
        return draws.reshape(size)
