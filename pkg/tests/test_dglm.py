"""Filtering-cycle operations: spec'd examples plus independent oracles."""

import math

import numpy as np
import pytest
from scipy import special as sp

from hiercast.dglm import (
    ConjugateParams,
    EvolutionSpec,
    Family,
    NumericalError,
    StateModel,
    StateMoments,
    VolatilitySpec,
    dlm_update,
    evolve,
    linear_bayes_update,
    posterior_predictor_moments,
    predictor_moments,
    solve_conjugate,
    update_conjugate,
)


def min_eig(C):
    return float(np.linalg.eigvalsh(C).min())


class TestEvolve:
    def test_identity_evolution(self):
        out = evolve(StateMoments([2.0], [[3.0]]), EvolutionSpec(np.eye(1)))
        assert out.mean[0] == 2.0
        assert out.cov[0, 0] == 3.0

    def test_discount_inflates_variance(self):
        spec = EvolutionSpec(np.eye(1), discounts=(0.5,))
        out = evolve(StateMoments([0.0], [[1.0]]), spec)
        assert out.cov[0, 0] == pytest.approx(2.0)

    def test_rotation_matches_direct_product(self):
        G = np.array([[0.0, -1.0], [1.0, 0.0]])
        m = np.array([1.0, 2.0])
        C = np.eye(2)
        out = evolve(StateMoments(m, C), EvolutionSpec(G))
        np.testing.assert_allclose(out.mean, G @ m)
        np.testing.assert_allclose(out.cov, G @ C @ G.T, atol=1e-15)

    def test_blockwise_discount_leaves_offdiagonal(self):
        C = np.array([[2.0, 0.5], [0.5, 1.0]])
        spec = EvolutionSpec(np.eye(2), discounts=(0.5, 0.8), blocks=((0, 1), (1, 2)))
        out = evolve(StateMoments(np.zeros(2), C), spec)
        assert out.cov[0, 0] == pytest.approx(4.0)
        assert out.cov[1, 1] == pytest.approx(1.25)
        assert out.cov[0, 1] == pytest.approx(0.5)

    def test_explicit_noise_covariance(self):
        spec = EvolutionSpec(np.eye(1), noise_cov=[[0.3]])
        out = evolve(StateMoments([0.0], [[1.0]]), spec)
        assert out.cov[0, 0] == pytest.approx(1.3)

    def test_discount_monotonicity(self):
        C = np.array([[2.0, 0.3], [0.3, 1.5]])
        diags = []
        for delta in (1.0, 0.9, 0.8):
            spec = EvolutionSpec(np.eye(2), discounts=(delta,))
            diags.append(np.diag(evolve(StateMoments(np.zeros(2), C), spec).cov))
        assert np.all(diags[1] > diags[0])
        assert np.all(diags[2] > diags[1])

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            evolve(StateMoments([0.0, 0.0], np.eye(2)), EvolutionSpec(np.eye(3)))

    def test_psd_preserved_random_sweep(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            d = rng.integers(1, 5)
            A = rng.normal(size=(d, d))
            C = A @ A.T + 1e-6 * np.eye(d)
            G = rng.normal(size=(d, d))
            delta = rng.uniform(0.3, 1.0)
            out = evolve(StateMoments(rng.normal(size=d), C),
                         EvolutionSpec(G, discounts=(delta,)))
            assert min_eig(out.cov) >= -1e-10 * np.trace(out.cov)


class TestPredictorMoments:
    def test_coordinate_projection(self):
        pm = predictor_moments(StateMoments([3.0, 7.0], np.eye(2)), [1.0, 0.0])
        assert (pm.mean, pm.var) == (3.0, 1.0)

    def test_quadratic_form(self):
        pm = predictor_moments(
            StateMoments([1.0, 1.0], [[1.0, 1.0], [1.0, 1.0]]), [1.0, 1.0]
        )
        assert (pm.mean, pm.var) == (2.0, 4.0)

    def test_zero_vector(self):
        pm = predictor_moments(StateMoments([5.0, -2.0], np.eye(2)), [0.0, 0.0])
        assert (pm.mean, pm.var) == (0.0, 0.0)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            predictor_moments(StateMoments([0.0], [[1.0]]), [1.0, 2.0])


class TestConjugate:
    def test_bernoulli_unit_solution(self):
        params = solve_conjugate(0.0, 2 * math.pi**2 / 6, Family.BERNOULLI)
        assert params.alpha == pytest.approx(1.0, abs=1e-8)
        assert params.beta == pytest.approx(1.0, abs=1e-8)

    def test_poisson_unit_solution(self):
        params = solve_conjugate(sp.digamma(1.0), sp.polygamma(1, 1.0), Family.POISSON)
        assert params.alpha == pytest.approx(1.0, abs=1e-9)
        assert params.beta == pytest.approx(1.0, abs=1e-9)

    def test_rejects_nonpositive_variance(self):
        with pytest.raises(ValueError):
            solve_conjugate(0.0, 0.0, Family.BERNOULLI)

    def test_update_rules(self):
        b = ConjugateParams(1.0, 1.0, Family.BERNOULLI)
        assert (update_conjugate(b, 1).alpha, update_conjugate(b, 1).beta) == (2.0, 1.0)
        assert (update_conjugate(b, 0).alpha, update_conjugate(b, 0).beta) == (1.0, 2.0)
        p = ConjugateParams(2.0, 3.0, Family.POISSON)
        out = update_conjugate(p, 5)
        assert (out.alpha, out.beta) == (7.0, 4.0)

    def test_update_rejects_invalid_observation(self):
        with pytest.raises(ValueError):
            update_conjugate(ConjugateParams(1.0, 1.0, Family.BERNOULLI), 2)
        with pytest.raises(ValueError):
            update_conjugate(ConjugateParams(1.0, 1.0, Family.POISSON), -1)

    def test_posterior_moments(self):
        pm = posterior_predictor_moments(ConjugateParams(1.0, 1.0, Family.BERNOULLI))
        assert pm.mean == pytest.approx(0.0, abs=1e-12)
        assert pm.var == pytest.approx(float(2 * sp.polygamma(1, 1.0)), rel=1e-10)
        pm = posterior_predictor_moments(ConjugateParams(7.0, 7.0, Family.BERNOULLI))
        assert pm.mean == pytest.approx(0.0, abs=1e-12)
        pm = posterior_predictor_moments(ConjugateParams(2.0, 1.0, Family.POISSON))
        assert pm.mean == pytest.approx(float(sp.digamma(2.0)), rel=1e-10)
        assert pm.var == pytest.approx(float(sp.polygamma(1, 2.0)), rel=1e-10)


class TestLinearBayes:
    def test_no_information_is_identity(self):
        prior = StateMoments([1.0, -1.0], [[2.0, 0.2], [0.2, 1.0]])
        pm = predictor_moments(prior, [1.0, 0.0])
        out = linear_bayes_update(prior, [1.0, 0.0], pm, pm)
        np.testing.assert_allclose(out.mean, prior.mean)
        np.testing.assert_allclose(out.cov, prior.cov)

    def test_scalar_formula(self):
        prior = StateMoments([0.0], [[1.0]])
        from hiercast.dglm import PredictorMoments

        out = linear_bayes_update(
            prior, [1.0], PredictorMoments(0.0, 1.0), PredictorMoments(1.0, 0.5)
        )
        assert out.mean[0] == pytest.approx(1.0)
        assert out.cov[0, 0] == pytest.approx(0.5)

    def test_exact_observation_limit(self):
        prior = StateMoments([0.0, 0.0], [[1.0, 0.3], [0.3, 2.0]])
        F = np.array([1.0, 1.0])
        pm = predictor_moments(prior, F)
        from hiercast.dglm import PredictorMoments

        out = linear_bayes_update(prior, F, pm, PredictorMoments(pm.mean, 0.0))
        RF = prior.cov @ F
        expected = prior.cov - np.outer(RF, RF) / pm.var
        np.testing.assert_allclose(out.cov, expected, atol=1e-14)

    def test_zero_variance_errors(self):
        from hiercast.dglm import PredictorMoments

        with pytest.raises(NumericalError):
            linear_bayes_update(
                StateMoments([0.0], [[1.0]]), [1.0],
                PredictorMoments(0.0, 0.0), PredictorMoments(0.0, 0.0),
            )

    def test_posterior_shrinks_covariance(self):
        rng = np.random.default_rng(11)
        from hiercast.dglm import PredictorMoments

        for _ in range(200):
            d = rng.integers(1, 4)
            A = rng.normal(size=(d, d))
            prior = StateMoments(rng.normal(size=d), A @ A.T + 1e-3 * np.eye(d))
            F = rng.normal(size=d)
            pm = predictor_moments(prior, F)
            if pm.var <= 1e-12:
                continue
            p = rng.uniform(0.0, pm.var)
            out = linear_bayes_update(prior, F, pm, PredictorMoments(pm.mean + 0.1, p))
            assert min_eig(out.cov) >= -1e-10 * np.trace(out.cov)
            assert min_eig(prior.cov - out.cov) >= -1e-10 * np.trace(prior.cov)


class TestDlmUpdate:
    def test_known_variance_scalar_case(self):
        prior = StateMoments([0.0], [[1.0]])
        vol = VolatilitySpec(dof=1, scale=1.0, fixed=True)
        state, _ = dlm_update(prior, vol, [1.0], 1.0)
        assert state.mean[0] == pytest.approx(0.5)
        assert state.cov[0, 0] == pytest.approx(0.5)

    def test_on_target_observation_keeps_mean(self):
        prior = StateMoments([2.0, 0.5], np.diag([1.0, 0.5]))
        vol = VolatilitySpec()
        state, _ = dlm_update(prior, vol, [1.0, 2.0], 3.0)
        np.testing.assert_allclose(state.mean, prior.mean)

    def test_dof_counts_with_unit_discount(self):
        vol = VolatilitySpec(dof=1.0, scale=1.0, discount=1.0)
        state = StateMoments([0.0], [[1.0]])
        rng = np.random.default_rng(0)
        for t in range(1, 11):
            state, vol = dlm_update(state, vol, [1.0], float(rng.normal()))
            assert vol.dof == pytest.approx(1.0 + t)

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            dlm_update(StateMoments([0.0], [[1.0]]), VolatilitySpec(), [1.0],
                       float("nan"))

    def test_kalman_equivalence_100_steps(self):
        # Independent oracle: textbook predict/update Kalman recursion.
        rng = np.random.default_rng(42)
        G = np.array([[1.0, 1.0], [0.0, 0.9]])
        W = np.diag([0.05, 0.01])
        V = 0.5
        F = np.array([1.0, 0.0])
        ys = rng.normal(size=100).cumsum()

        model = StateModel(
            Family.NORMAL,
            StateMoments(np.zeros(2), np.eye(2)),
            EvolutionSpec(G, noise_cov=W),
            VolatilitySpec(dof=1.0, scale=V, fixed=True),
        )
        m, C = np.zeros(2), np.eye(2)
        for y in ys:
            model.update(F, float(y))
            # oracle
            a = G @ m
            R = G @ C @ G.T + W
            q = F @ R @ F + V
            K = R @ F / q
            m = a + K * (y - F @ a)
            C = R - np.outer(K, K) * q
            np.testing.assert_allclose(model.state.mean, m, atol=1e-10)
            np.testing.assert_allclose(model.state.cov, C, atol=1e-10)


class TestStateModelCycle:
    def test_bernoulli_matches_exact_beta_updating(self):
        # Static model observed through a near-degenerate state: forecast
        # probabilities must track exact Beta-Bernoulli conjugate updating.
        model = StateModel(
            Family.BERNOULLI,
            StateMoments([0.0], [[1.0]]),
            EvolutionSpec(np.eye(1), discounts=(1.0,)),
        )
        rng = np.random.default_rng(5)
        ys = (rng.random(60) < 0.7).astype(int)
        a, b = None, None
        for y in ys:
            fc = model.forecast([1.0])
            if a is not None:
                assert fc.p_one == pytest.approx(a / (a + b), abs=1e-6)
            # exact conjugate bookkeeping seeded from the model's first solve
            if a is None:
                a, b = fc.alpha, fc.beta
            model.update([1.0], int(y))
            a, b = a + y, b + 1 - y

    def test_poisson_forecast_is_negative_binomial(self):
        model = StateModel.random_walk(Family.POISSON, 1, delta=1.0)
        fc = model.forecast([1.0])
        # NB(alpha, beta/(1+beta)): with alpha=beta the zero prob is
        # (beta/(1+beta))^alpha.
        p = fc.beta / (1 + fc.beta)
        assert fc.pmf(0) == pytest.approx(p**fc.alpha, rel=1e-10)

    def test_multi_step_variance_monotone(self):
        model = StateModel.random_walk(Family.NORMAL, 1, delta=0.9)
        model.update([1.0], 0.3)
        scales = [model.forecast([1.0], k).scale for k in (1, 2, 4, 8)]
        assert all(s2 > s1 for s1, s2 in zip(scales, scales[1:]))

    def test_forecast_needs_covariates_per_step(self):
        model = StateModel.random_walk(Family.NORMAL, 1)
        with pytest.raises(ValueError):
            model.forecast(np.ones((2, 1)), k=4)

    def test_missing_week_evolves_only(self):
        model = StateModel.random_walk(Family.POISSON, 1, delta=0.9)
        model.update([1.0], 4)
        before = model.state.mean.copy()
        var_before = model.state.cov[0, 0]
        model.evolve_step()
        np.testing.assert_allclose(model.state.mean, before)
        assert model.state.cov[0, 0] == pytest.approx(var_before / 0.9)
