"""Mixture-model update semantics and forecast laws."""

import numpy as np
import pytest

from hiercast.dglm import Family, StateModel
from hiercast.mixtures import Dcmm, Dlmm, dcmm_forecast, dcmm_update, dlmm_update


F1 = np.array([1.0])


class TestDcmmUpdate:
    def test_zero_count_skips_poisson_likelihood(self):
        model = Dcmm.random_walk(1, 1, delta=0.9)
        pois_mean = model.poisson.state.mean.copy()
        pois_var = model.poisson.state.cov[0, 0]
        dcmm_update(model, F1, F1, 0)
        np.testing.assert_allclose(model.poisson.state.mean, pois_mean)
        assert model.poisson.state.cov[0, 0] == pytest.approx(pois_var / 0.9)

    def test_positive_count_shifts_by_one(self):
        model = Dcmm.random_walk(1, 1, delta=1.0)
        twin = Dcmm.random_walk(1, 1, delta=1.0)
        dcmm_update(model, F1, F1, 3)
        twin.bernoulli.update(F1, 1)
        twin.poisson.update(F1, 2)
        np.testing.assert_allclose(model.poisson.state.mean, twin.poisson.state.mean)
        np.testing.assert_allclose(model.bernoulli.state.mean,
                                   twin.bernoulli.state.mean)

    def test_successive_zero_weeks_only_evolve(self):
        model = Dcmm.random_walk(1, 1, delta=0.95)
        start = model.poisson.state.mean.copy()
        for _ in range(5):
            dcmm_update(model, F1, F1, 0)
        np.testing.assert_allclose(model.poisson.state.mean, start)

    def test_rejects_negative_count(self):
        with pytest.raises(ValueError):
            dcmm_update(Dcmm.random_walk(1, 1), F1, F1, -1)

    def test_component_update_order_irrelevant(self):
        # The two sub-models share nothing, so updating them in either order
        # gives identical states.
        a = Dcmm.random_walk(1, 1)
        b = Dcmm.random_walk(1, 1)
        for y in [0, 2, 0, 5, 1]:
            dcmm_update(a, F1, F1, y)
            z = 1 if y > 0 else 0
            if z:
                b.poisson.update(F1, y - 1)
            else:
                b.poisson.evolve_step()
            b.bernoulli.update(F1, z)
        np.testing.assert_allclose(a.bernoulli.state.mean, b.bernoulli.state.mean)
        np.testing.assert_allclose(a.poisson.state.cov, b.poisson.state.cov)


class TestDcmmForecast:
    def test_marginal_zero_probability(self):
        model = Dcmm.random_walk(1, 1)
        fc = dcmm_forecast(model, F1, F1)
        assert fc.pmf(0) == pytest.approx(fc.gate_beta / (fc.gate_alpha + fc.gate_beta))

    def test_pmf_normalizes(self):
        model = Dcmm.random_walk(1, 1)
        for y in [2, 0, 4, 1, 1, 0, 3]:
            dcmm_update(model, F1, F1, y)
        fc = dcmm_forecast(model, F1, F1)
        ys = np.arange(0, fc.support_upper(1e-12) + 1)
        assert fc.pmf(ys).sum() == pytest.approx(1.0, abs=1e-9)

    def test_sampling_total_variation(self):
        rng = np.random.default_rng(9)
        model = Dcmm.random_walk(1, 1)
        for y in [1, 0, 2, 3, 0, 1]:
            dcmm_update(model, F1, F1, y)
        fc = dcmm_forecast(model, F1, F1)
        draws = fc.sample(rng, size=1_000_000)
        empirical = np.bincount(draws) / draws.size
        analytic = fc.pmf(np.arange(empirical.size))
        assert 0.5 * np.abs(empirical - analytic).sum() < 0.01


class TestDlmm:
    def test_zero_spend_updates_gate_only(self):
        model = Dlmm.random_walk(1, 1, delta=0.9)
        dlm_mean = model.dlm.state.mean.copy()
        dlmm_update(model, F1, F1, 0.0)
        np.testing.assert_allclose(model.dlm.state.mean, dlm_mean)
        assert model.bernoulli.t == 1

    def test_nonzero_updates_both(self):
        model = Dlmm.random_walk(1, 1)
        dlmm_update(model, F1, F1, 2.7)
        assert model.dlm.state.mean[0] != 0.0
        assert model.bernoulli.state.mean[0] != 0.0

    def test_all_nonzero_matches_plain_dlm(self):
        # Side-by-side oracle: with no zeros the amount filter must follow
        # the identical plain normal model trajectory.
        rng = np.random.default_rng(10)
        xs = rng.normal(1.5, 0.4, 40)
        model = Dlmm.random_walk(1, 1, delta=0.95)
        plain = StateModel.random_walk(Family.NORMAL, 1, delta=0.95)
        for x in xs:
            dlmm_update(model, F1, F1, float(x))
            plain.update(F1, float(x))
        np.testing.assert_allclose(model.dlm.state.mean, plain.state.mean)
        np.testing.assert_allclose(model.dlm.state.cov, plain.state.cov)
        assert model.dlm.volatility.scale == pytest.approx(plain.volatility.scale)

    def test_forecast_atom_median_and_round_trip(self):
        model = Dlmm.random_walk(1, 1)
        for x in [0.0, 0.0, 1.2, 0.0, 0.0, 0.9, 0.0]:
            dlmm_update(model, F1, F1, float(x))
        fc = model.forecast(F1, F1)
        if fc.zero_atom() >= 0.5:
            assert fc.quantile(0.5) == 0.0
        rng = np.random.default_rng(11)
        us = rng.random(1000)
        xs = fc.quantile(us)
        nonzero = xs != 0.0
        np.testing.assert_allclose(fc.cdf(xs)[nonzero], us[nonzero], atol=1e-8)

    def test_degenerate_gate_equals_plain_dlm_forecast(self):
        model = Dlmm.random_walk(1, 1)
        plain = StateModel.random_walk(Family.NORMAL, 1)
        rng = np.random.default_rng(12)
        xs = rng.normal(2.0, 0.3, 30)
        for x in xs:
            dlmm_update(model, F1, F1, float(x))
            plain.update(F1, float(x))
        # Force the gate to certainty: the mixture forecast collapses to the
        # plain DLM's Student-t.
        fc = model.forecast(F1, F1)
        plain_fc = plain.forecast(F1)
        fc.gate_alpha, fc.gate_beta = 1e12, 1.0
        grid = np.linspace(0.5, 3.5, 41)
        np.testing.assert_allclose(fc.cdf(grid), plain_fc.cdf(grid), atol=1e-10)
