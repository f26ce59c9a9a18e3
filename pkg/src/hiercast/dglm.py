"""Dynamic generalized linear models with discount-factor evolution.

One model tracks the first two moments (m, C) of a latent state driving a
univariate series through an exponential-family observation:

  * Bernoulli with logit link (binary events such as store return),
  * Poisson with log link (counts, used 1-shifted inside count mixtures),
  * normal (log-spend), with optional learned observation variance.

The weekly cycle is evolve -> predict -> conjugate update -> linear-Bayes
state update.  Bernoulli/Poisson use variational-Bayes moment matching onto
a Beta/Gamma conjugate prior (see `kernels`); the normal case is the exact
conjugate recursion with an optional discounted variance-learning step.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import distributions as dist
from .kernels import (
    bernoulli_moments,
    poisson_moments,
    solve_bernoulli,
    solve_poisson,
)


class NumericalError(RuntimeError):
    """A solver or filter step failed to produce finite output."""


class Family(enum.Enum):
    BERNOULLI = "bernoulli"
    POISSON = "poisson"
    NORMAL = "normal"


@dataclass
class StateMoments:
    """Mean vector and covariance of the latent state."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float).reshape(-1)
        self.cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        d = self.mean.shape[0]
        if self.cov.shape != (d, d):
            raise ValueError(
                f"covariance shape {self.cov.shape} does not match state dim {d}"
            )

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def copy(self) -> "StateMoments":
        return StateMoments(self.mean.copy(), self.cov.copy())

    @classmethod
    def _raw(cls, mean: np.ndarray, cov: np.ndarray) -> "StateMoments":
        # hot-path constructor: arrays already validated by the caller
        obj = object.__new__(cls)
        obj.mean = mean
        obj.cov = cov
        return obj


@dataclass
class EvolutionSpec:
    """State transition plus evolution noise via per-block discounting.

    Each diagonal block of G C G' is inflated by 1/delta for its block's
    discount factor; off-diagonal blocks are left alone.  Passing an explicit
    ``noise_cov`` (W) switches to additive noise and ignores the discounts.
    """

    state_matrix: np.ndarray
    discounts: tuple = (1.0,)
    blocks: tuple = None
    noise_cov: np.ndarray | None = None

    def __post_init__(self):
        self.state_matrix = np.atleast_2d(np.asarray(self.state_matrix, dtype=float))
        d = self.state_matrix.shape[0]
        if self.state_matrix.shape != (d, d):
            raise ValueError("state matrix must be square")
        if self.blocks is None:
            self.blocks = ((0, d),)
        self.blocks = tuple((int(lo), int(hi)) for lo, hi in self.blocks)
        self.discounts = tuple(float(x) for x in self.discounts)
        if len(self.discounts) != len(self.blocks):
            raise ValueError("one discount per block required")
        covered = sorted(self.blocks)
        pos = 0
        for lo, hi in covered:
            if lo != pos or hi <= lo:
                raise ValueError(f"blocks must partition 0..{d}")
            pos = hi
        if pos != d:
            raise ValueError(f"blocks must partition 0..{d}")
        for delta in self.discounts:
            if not 0.0 < delta <= 1.0:
                raise ValueError("discount factors must lie in (0, 1]")
        if self.noise_cov is not None:
            self.noise_cov = np.atleast_2d(np.asarray(self.noise_cov, dtype=float))
            if self.noise_cov.shape != (d, d):
                raise ValueError("noise covariance dimension mismatch")
        # hot-path precomputation: identity transitions skip the G products and
        # block discounting collapses to one elementwise multiply
        self._identity = bool(np.array_equal(self.state_matrix, np.eye(d)))
        scale = np.ones((d, d))
        for (lo, hi), delta in zip(self.blocks, self.discounts):
            scale[lo:hi, lo:hi] = 1.0 / delta
        self._discount_scale = scale

    @property
    def dim(self) -> int:
        return self.state_matrix.shape[0]

    @classmethod
    def random_walk(cls, dim: int, delta: float = 0.98, per_coord: bool = False):
        """Identity transition; one shared discount or one per coordinate."""
        if per_coord:
            blocks = tuple((i, i + 1) for i in range(dim))
            discounts = (delta,) * dim
        else:
            blocks = ((0, dim),)
            discounts = (delta,)
        return cls(np.eye(dim), discounts, blocks)


@dataclass
class PredictorMoments:
    mean: float
    var: float


@dataclass
class ConjugateParams:
    alpha: float
    beta: float
    family: Family

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError("conjugate parameters must be positive")


@dataclass
class VolatilitySpec:
    """Observation-variance state for normal models.

    (dof, scale) are the variance-estimate degrees of freedom and point
    estimate; ``discount`` down-weights old squared errors.  ``fixed=True``
    pins the variance at ``scale`` (exact Kalman behaviour).
    """

    dof: float = 1.0
    scale: float = 1.0
    discount: float = 0.99
    fixed: bool = False

    def __post_init__(self):
        if self.dof <= 0 or self.scale <= 0:
            raise ValueError("volatility dof and scale must be positive")
        if not 0.0 < self.discount <= 1.0:
            raise ValueError("volatility discount must lie in (0, 1]")


def _symmetrize(C: np.ndarray) -> np.ndarray:
    return 0.5 * (C + C.T)


def evolve(posterior: StateMoments, spec: EvolutionSpec) -> StateMoments:
    """One-step state evolution: a = G m, R = G C G' + implied noise."""
    if spec.dim != posterior.dim:
        raise ValueError("evolution spec dimension mismatch")
    if spec._identity:
        a = posterior.mean.copy()
        P = posterior.cov
    else:
        G = spec.state_matrix
        a = G @ posterior.mean
        P = _symmetrize(G @ posterior.cov @ G.T)
    if spec.noise_cov is not None:
        R = P + spec.noise_cov
    else:
        R = P * spec._discount_scale
    return StateMoments._raw(a, R)


def predictor_moments(prior: StateMoments, F: np.ndarray) -> PredictorMoments:
    """Linear-predictor mean/variance: f = F'a, q = F'RF."""
    F = np.asarray(F, dtype=float).reshape(-1)
    if F.shape[0] != prior.dim:
        raise ValueError("regression vector dimension mismatch")
    f = float(F @ prior.mean)
    q = float(F @ prior.cov @ F)
    return PredictorMoments(f, max(q, 0.0))


def solve_conjugate(f: float, q: float, family: Family) -> ConjugateParams:
    """Match conjugate-prior parameters to predictor moments (f, q)."""
    if q <= 0.0:
        raise ValueError("predictor variance must be positive")
    if family is Family.BERNOULLI:
        alpha, beta, ok = solve_bernoulli(float(f), float(q))
    elif family is Family.POISSON:
        alpha, beta, ok = solve_poisson(float(f), float(q))
    else:
        raise ValueError("conjugate solve applies to Bernoulli/Poisson only")
    if not ok or not (math.isfinite(alpha) and math.isfinite(beta)):
        raise NumericalError(
            f"conjugate solve failed for family={family.value}, f={f}, q={q}"
        )
    return ConjugateParams(alpha, beta, family)


def update_conjugate(params: ConjugateParams, y: float) -> ConjugateParams:
    """Posterior conjugate parameters after observing y."""
    if params.family is Family.BERNOULLI:
        if y not in (0, 1):
            raise ValueError("Bernoulli observation must be 0 or 1")
        return replace(params, alpha=params.alpha + y, beta=params.beta + 1 - y)
    if params.family is Family.POISSON:
        if y < 0 or y != int(y):
            raise ValueError("Poisson observation must be a non-negative count")
        return replace(params, alpha=params.alpha + y, beta=params.beta + 1)
    raise ValueError("conjugate update applies to Bernoulli/Poisson only")


def posterior_predictor_moments(params: ConjugateParams) -> PredictorMoments:
    """Map conjugate parameters back to linear-predictor moments (g, p)."""
    if params.family is Family.BERNOULLI:
        g, p = bernoulli_moments(params.alpha, params.beta)
    elif params.family is Family.POISSON:
        g, p = poisson_moments(params.alpha, params.beta)
    else:
        raise ValueError("posterior moments apply to Bernoulli/Poisson only")
    return PredictorMoments(float(g), float(p))


def linear_bayes_update(
    prior: StateMoments,
    F: np.ndarray,
    pm: PredictorMoments,
    post_pm: PredictorMoments,
) -> StateMoments:
    """Propagate the predictor-moment shift (f,q) -> (g,p) into the state."""
    if pm.var <= 0.0:
        raise NumericalError("predictor variance is zero in linear Bayes update")
    F = np.asarray(F, dtype=float).reshape(-1)
    RF = prior.cov @ F
    m = prior.mean + RF * ((post_pm.mean - pm.mean) / pm.var)
    C = prior.cov - np.outer(RF, RF) * ((1.0 - post_pm.var / pm.var) / pm.var)
    return StateMoments._raw(m, _symmetrize(C))


def dlm_update(
    prior: StateMoments,
    vol: VolatilitySpec,
    F: np.ndarray,
    y: float,
) -> tuple[StateMoments, VolatilitySpec]:
    """Conjugate normal update with discounted variance learning.

    ``prior.cov`` is on the observation-variance scale (it already includes
    the current variance estimate), so the forecast variance is F'RF + s.
    """
    if not math.isfinite(y):
        raise ValueError("observation must be finite")
    F = np.asarray(F, dtype=float).reshape(-1)
    f = float(F @ prior.mean)
    RF = prior.cov @ F
    q = float(F @ RF) + vol.scale
    if q <= 0.0:
        raise NumericalError("non-positive forecast variance in normal update")
    e = y - f
    A = RF / q
    m = prior.mean + A * e
    if vol.fixed:
        C = prior.cov - np.outer(A, A) * q
        return StateMoments._raw(m, _symmetrize(C)), vol
    dof = vol.discount * vol.dof + 1.0
    ratio = (vol.discount * vol.dof + e * e / q) / dof
    scale = vol.scale * ratio
    C = (prior.cov - np.outer(A, A) * q) * ratio
    new_vol = replace(vol, dof=dof, scale=scale)
    return StateMoments._raw(m, _symmetrize(C)), new_vol


DEFAULT_PRIOR_SCALE = 1.0


@dataclass
class StateModel:
    """A single filtered series: state moments plus evolution/observation law.

    Mutating single-writer value; `update` advances one week (evolve +
    likelihood), `evolve_step` advances without data (series conditioned out
    this week).
    """

    family: Family
    state: StateMoments
    evolution: EvolutionSpec
    volatility: VolatilitySpec | None = None
    t: int = field(default=0)

    @classmethod
    def random_walk(
        cls,
        family: Family,
        dim: int,
        delta: float = 0.98,
        vol_discount: float = 0.99,
        prior_mean: np.ndarray | None = None,
        prior_scale: float = DEFAULT_PRIOR_SCALE,
        obs_scale: float = 1.0,
        fixed_obs_var: float | None = None,
    ) -> "StateModel":
        """Local-level + regression model: G = I, per-coordinate discounts."""
        mean = np.zeros(dim) if prior_mean is None else np.asarray(prior_mean, float)
        state = StateMoments(mean, np.eye(dim) * prior_scale)
        spec = EvolutionSpec.random_walk(dim, delta, per_coord=True)
        vol = None
        if family is Family.NORMAL:
            if fixed_obs_var is not None:
                vol = VolatilitySpec(dof=1.0, scale=fixed_obs_var, fixed=True)
            else:
                vol = VolatilitySpec(scale=obs_scale, discount=vol_discount)
        return cls(family, state, spec, vol)

    @property
    def dim(self) -> int:
        return self.state.dim

    def copy(self) -> "StateModel":
        vol = replace(self.volatility) if self.volatility is not None else None
        return StateModel(self.family, self.state.copy(), self.evolution, vol, self.t)

    def evolve_step(self) -> None:
        self.state = evolve(self.state, self.evolution)
        self.t += 1

    def predict_and_evolve(self, F: np.ndarray):
        """One-step forecast for a week whose observation is conditioned out:
        the forecast is computed from the evolved prior, which then becomes
        the new state (no likelihood term)."""
        prior = evolve(self.state, self.evolution)
        pm = predictor_moments(prior, F)
        if self.family is Family.NORMAL:
            forecast = dist.StudentTForecast(
                self.volatility.dof, pm.mean, pm.var + self.volatility.scale)
        else:
            params = solve_conjugate(pm.mean, pm.var, self.family)
            if self.family is Family.BERNOULLI:
                forecast = dist.BetaBernoulliForecast(params.alpha, params.beta)
            else:
                forecast = dist.NegativeBinomialForecast(params.alpha, params.beta)
        self.state = prior
        self.t += 1
        return forecast

    def prior_predictor(self, F: np.ndarray) -> PredictorMoments:
        """(f, q) for the next observation, before seeing it."""
        prior = evolve(self.state, self.evolution)
        pm = predictor_moments(prior, F)
        if self.family is Family.NORMAL:
            pm = PredictorMoments(pm.mean, pm.var + self.volatility.scale)
        return pm

    def update(self, F: np.ndarray, y: float):
        """Advance one week on observation y; returns the one-step forecast
        parameters that were implied before the update (prior pm and, for
        count/binary families, the conjugate parameters)."""
        prior = evolve(self.state, self.evolution)
        if self.family is Family.NORMAL:
            pm = predictor_moments(prior, F)
            forecast = dist.StudentTForecast(
                self.volatility.dof, pm.mean, pm.var + self.volatility.scale
            )
            self.state, self.volatility = dlm_update(prior, self.volatility, F, y)
            self.t += 1
            return forecast
        pm = predictor_moments(prior, F)
        params = solve_conjugate(pm.mean, pm.var, self.family)
        if self.family is Family.BERNOULLI:
            forecast = dist.BetaBernoulliForecast(params.alpha, params.beta)
        else:
            forecast = dist.NegativeBinomialForecast(params.alpha, params.beta)
        post = update_conjugate(params, y)
        post_pm = posterior_predictor_moments(post)
        self.state = linear_bayes_update(prior, F, pm, post_pm)
        self.t += 1
        return forecast

    def forecast(self, F_path, k: int = 1):
        """k-step-ahead forecast; F_path supplies one regression vector per
        horizon step (a single vector is broadcast)."""
        if k < 1:
            raise ValueError("forecast horizon must be >= 1")
        F_path = np.atleast_2d(np.asarray(F_path, dtype=float))
        if F_path.shape[0] == 1:
            F_path = np.repeat(F_path, k, axis=0)
        if F_path.shape[0] < k:
            raise ValueError(f"need covariates for {k} horizon steps")
        state = self.state
        for _ in range(k):
            state = evolve(state, self.evolution)
        pm = predictor_moments(state, F_path[k - 1])
        if self.family is Family.NORMAL:
            return dist.StudentTForecast(
                self.volatility.dof, pm.mean, pm.var + self.volatility.scale
            )
        params = solve_conjugate(pm.mean, pm.var, self.family)
        if self.family is Family.BERNOULLI:
            return dist.BetaBernoulliForecast(params.alpha, params.beta)
        return dist.NegativeBinomialForecast(params.alpha, params.beta)

    def coordinate_posterior(self, index: int) -> tuple[float, float]:
        """Filtered (mean, variance) of one state coordinate."""
        return float(self.state.mean[index]), float(self.state.cov[index, index])
