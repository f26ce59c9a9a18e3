"""Point-forecast optimality against exhaustive-search oracles."""

import numpy as np
import pytest

from hiercast.distributions import (
    CountMixtureForecast,
    DollarSpendForecast,
    LogTDistribution,
    PointMass,
)
from hiercast.pointforecast import (
    Loss,
    LossSpec,
    count_points_batch,
    mad_optimal,
    mape_optimal,
    realized_loss,
    spend_mad_batch,
    spend_mape_batch,
    spend_zape_batch,
    zape_optimal,
)


class FixedPmf:
    """Tiny discrete distribution for hand-computed cases."""

    def __init__(self, probs: dict):
        self.probs = dict(probs)

    def pmf(self, y):
        y = np.atleast_1d(np.asarray(y))
        out = np.array([self.probs.get(float(v), 0.0) for v in y], dtype=float)
        return out if out.size > 1 else float(out[0])

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.array([sum(p for v, p in self.probs.items() if v <= xx)
                         for xx in np.atleast_1d(x)]).reshape(np.shape(x))

    def quantile(self, u):
        items = sorted(self.probs.items())
        acc = 0.0
        for v, p in items:
            acc += p
            if acc >= u - 1e-12:
                return v
        return items[-1][0]

    def support_upper(self, tail=1e-12):
        return int(max(self.probs))


def exhaustive_count_optimum(dist, spec: LossSpec, fmax=100):
    """Brute-force risk minimiser over integer forecasts (the oracle)."""
    ys = np.arange(0, dist.support_upper(1e-14) + 1)
    pmf = np.asarray(dist.pmf(ys), dtype=float)
    best_f, best_risk = 0, np.inf
    for f in range(fmax + 1):
        losses = np.array([realized_loss(float(y), float(f), spec) for y in ys])
        mask = ~np.isnan(losses)
        risk = float(pmf[mask] @ losses[mask])
        if risk < best_risk - 1e-15:
            best_risk, best_f = risk, f
    return best_f, best_risk


class TestMadOptimal:
    def test_point_mass(self):
        assert mad_optimal(PointMass(3.0)) == 3.0

    def test_atom_median(self):
        dist = CountMixtureForecast(2.0, 3.0, 1.0, 1.0)  # P(0) = 0.6
        assert mad_optimal(dist) == 0.0

    def test_logt_median_is_exp_location(self):
        logt = LogTDistribution(8.0, 1.0, 0.4, lo=np.exp(1.0 - 6), hi=np.exp(1.0 + 6))
        assert mad_optimal(logt) == pytest.approx(np.exp(1.0), rel=1e-9)


class TestMapeOptimal:
    def test_two_point_case(self):
        dist = FixedPmf({1.0: 0.5, 2.0: 0.5})
        assert mape_optimal(dist) == 1.0

    def test_point_mass(self):
        assert mape_optimal(PointMass(5.0)) == 5.0

    def test_count_mixture_matches_grid_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(40):
            dist = CountMixtureForecast(
                rng.uniform(0.3, 6), rng.uniform(0.3, 6),
                rng.uniform(0.3, 8), rng.uniform(0.2, 3),
            )
            f = mape_optimal(dist)
            oracle_f, oracle_risk = exhaustive_count_optimum(
                dist, LossSpec(Loss.MAPE), fmax=dist.support_upper(1e-14)
            )
            ys = np.arange(0, dist.support_upper(1e-14) + 1)
            pmf = np.asarray(dist.pmf(ys), float)
            mask = ys > 0
            risk = float(pmf[mask] @ (np.abs(ys[mask] - f) / ys[mask]))
            assert risk <= oracle_risk + 1e-9

    def test_no_positive_mass_raises(self):
        with pytest.raises(ValueError):
            mape_optimal(PointMass(0.0))


class TestZapeOptimalCounts:
    def test_hand_case(self):
        dist = FixedPmf({0.0: 0.3, 1.0: 0.4, 2.0: 0.3})
        assert zape_optimal(dist) == 1.0
        oracle_f, _ = exhaustive_count_optimum(dist, LossSpec(Loss.ZAPE))
        assert zape_optimal(dist) == oracle_f

    def test_zero_dominated(self):
        dist = FixedPmf({0.0: 0.9, 1.0: 0.1})
        assert zape_optimal(dist, c=1.0) == 0.0

    def test_matches_oracle_random_sweep(self):
        rng = np.random.default_rng(1)
        spec = LossSpec(Loss.ZAPE)
        for _ in range(100):
            dist = CountMixtureForecast(
                rng.uniform(0.2, 8), rng.uniform(0.2, 8),
                rng.uniform(0.2, 10), rng.uniform(0.15, 4),
            )
            f = zape_optimal(dist)
            _, oracle_risk = exhaustive_count_optimum(
                dist, spec, fmax=dist.support_upper(1e-14)
            )
            ys = np.arange(0, dist.support_upper(1e-14) + 1)
            pmf = np.asarray(dist.pmf(ys), float)
            risk = float(pmf @ np.array(
                [realized_loss(float(y), f, spec) for y in ys]))
            assert risk <= oracle_risk + 1e-3

    def test_ordering_on_positive_counts(self):
        # On strictly positive counts the chain zape <= mape <= mad holds.
        rng = np.random.default_rng(2)
        for _ in range(200):
            gate = (1e9, 1.0)  # force P(0) ~ 0: strictly positive support
            dist = CountMixtureForecast(*gate, rng.uniform(0.2, 12),
                                        rng.uniform(0.1, 4))
            f_zape = zape_optimal(dist)
            f_mape = mape_optimal(dist)
            f_mad = mad_optimal(dist)
            assert f_zape <= f_mape <= f_mad


class TestZapeOptimalSpend:
    def test_no_atom_reduces_to_mape(self):
        logt = LogTDistribution(6.0, 1.0, 0.5, lo=0.01, hi=1e4)
        assert zape_optimal(logt) == pytest.approx(mape_optimal(logt), rel=1e-6)

    def test_heavy_atom_forces_zero(self):
        logt = LogTDistribution(30.0, 0.0, 0.001, lo=0.5, hi=2.0)  # mass near 1
        dist = DollarSpendForecast(0.1, logt)
        assert zape_optimal(dist, c=1.0) == 0.0

    def test_matches_fine_grid_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            logt = LogTDistribution(rng.uniform(2, 30), rng.uniform(0, 3),
                                    rng.uniform(0.05, 1.5), lo=0.01, hi=1e4)
            pi0 = rng.uniform(0.0, 0.8)
            dist = DollarSpendForecast(1.0 - pi0, logt)
            f = zape_optimal(dist)
            # oracle: fine grid over quantiles of the positive part + zero
            grid = np.concatenate([[0.0], logt.quantile(np.linspace(1e-4, 1 - 1e-4,
                                                                    4001))])
            risks = _spend_risk_curve(dist, grid)
            assert _spend_risk_curve(dist, np.array([f]))[0] <= risks.min() + 1e-3


def _spend_risk_curve(dist, fs):
    """Monte-Carlo-free risk via quadrature on the positive part."""
    pi0 = dist.zero_atom()
    logt = dist.logt
    ys = np.exp(np.linspace(np.log(logt.lo), np.log(logt.hi), 40001))
    dens = logt.pdf(ys)
    out = np.empty(len(fs))
    for i, f in enumerate(fs):
        loss = np.abs(ys - f) / ys
        out[i] = pi0 * f / (1 + f) + (1 - pi0) * np.trapezoid(loss * dens, ys)
    return out


class TestRealizedLoss:
    def test_zape_zero_outcome(self):
        assert realized_loss(0.0, 1.0, LossSpec(Loss.ZAPE)) == 0.5

    def test_mad_exact(self):
        assert realized_loss(4.0, 4.0, LossSpec(Loss.MAD)) == 0.0

    def test_mape(self):
        assert realized_loss(4.0, 3.0, LossSpec(Loss.MAPE)) == pytest.approx(0.25)
        assert np.isnan(realized_loss(0.0, 3.0, LossSpec(Loss.MAPE)))

    def test_zape_c_validation(self):
        with pytest.raises(ValueError):
            LossSpec(Loss.ZAPE, zape_c=0.5)


class TestBatchTwins:
    def test_count_batch_matches_scalar(self):
        rng = np.random.default_rng(4)
        ga = rng.uniform(0.3, 6, 50)
        gb = rng.uniform(0.3, 6, 50)
        sa = rng.uniform(0.3, 8, 50)
        sb = rng.uniform(0.2, 3, 50)
        mad, mape, zape = count_points_batch(ga, gb, sa, sb)
        for i in range(50):
            dist = CountMixtureForecast(ga[i], gb[i], sa[i], sb[i])
            assert mad[i] == mad_optimal(dist)
            assert mape[i] == mape_optimal(dist)
            assert zape[i] == zape_optimal(dist)

    def test_spend_mad_batch_matches_quantile(self):
        rng = np.random.default_rng(5)
        n = 40
        p1 = rng.uniform(0.2, 0.99, n)
        dof = rng.uniform(2, 40, n)
        loc = rng.uniform(0, 3, n)
        scale = rng.uniform(0.05, 1.0, n)
        out = spend_mad_batch(p1, dof, loc, scale)
        for i in range(n):
            if p1[i] <= 0.5:
                assert out[i] == 0.0
            else:
                u = (0.5 - (1 - p1[i])) / p1[i]
                from scipy import special as sp

                expected = np.exp(loc[i] + np.sqrt(scale[i]) * sp.stdtrit(dof[i], u))
                assert out[i] == pytest.approx(expected, rel=1e-9)

    def test_spend_mape_batch_matches_scalar(self):
        rng = np.random.default_rng(6)
        n = 25
        dof = rng.uniform(2, 30, n)
        loc = rng.uniform(0, 3, n)
        scale = rng.uniform(0.05, 1.0, n)
        batch = spend_mape_batch(dof, loc, scale, lo=0.01, hi=1e4)
        for i in range(n):
            logt = LogTDistribution(dof[i], loc[i], scale[i], lo=0.01, hi=1e4)
            assert batch[i] == pytest.approx(mape_optimal(logt), rel=2e-3)

    def test_spend_zape_batch_matches_scalar(self):
        rng = np.random.default_rng(7)
        n = 25
        p1 = rng.uniform(0.2, 1.0, n)
        dof = rng.uniform(2, 30, n)
        loc = rng.uniform(0, 3, n)
        scale = rng.uniform(0.05, 1.0, n)
        batch = spend_zape_batch(p1, dof, loc, scale, lo=0.01, hi=1e4)
        for i in range(n):
            logt = LogTDistribution(dof[i], loc[i], scale[i], lo=0.01, hi=1e4)
            dist = DollarSpendForecast(p1[i], logt)
            scalar = zape_optimal(dist)
            # agree in achieved risk within the grid resolution
            gap = abs(_spend_risk_curve(dist, np.array([batch[i]]))[0]
                      - _spend_risk_curve(dist, np.array([scalar]))[0])
            assert gap < 2e-3
