"""Zero-inflated mixture models built from two independent filtered series.

A count mixture (Dcmm) pairs a Bernoulli occurrence model with a 1-shifted
Poisson size model; a spend mixture (Dlmm) pairs the occurrence model with
a normal model for the log amount.  The occurrence component sees every
week; the size/amount component sees only weeks where the event happened
and otherwise just evolves.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dglm import Family, StateModel
from .distributions import CountMixtureForecast, SpendMixtureForecast


@dataclass
class Dcmm:
    """Dynamic count mixture: occurrence Bernoulli + 1-shifted Poisson size."""

    bernoulli: StateModel
    poisson: StateModel

    @classmethod
    def random_walk(cls, dim0: int, dim_plus: int, delta: float = 0.98,
                    prior_scale: float = 1.0) -> "Dcmm":
        return cls(
            StateModel.random_walk(Family.BERNOULLI, dim0, delta,
                                   prior_scale=prior_scale),
            StateModel.random_walk(Family.POISSON, dim_plus, delta,
                                   prior_scale=prior_scale),
        )

    def update(self, F0, Fp, y: float) -> CountMixtureForecast:
        """Advance one week on count y; returns the pre-update 1-step forecast."""
        if y < 0 or y != int(y):
            raise ValueError("count observation must be a non-negative integer")
        z = 1 if y > 0 else 0
        bern_fc = self.bernoulli.update(F0, z)
        if z:
            pois_fc = self.poisson.update(Fp, int(y) - 1)
        else:
            pois_fc = self.poisson.predict_and_evolve(Fp)
        return CountMixtureForecast(bern_fc.alpha, bern_fc.beta,
                                    pois_fc.alpha, pois_fc.beta)

    def evolve_step(self) -> None:
        self.bernoulli.evolve_step()
        self.poisson.evolve_step()

    def forecast(self, F0, Fp, k: int = 1) -> CountMixtureForecast:
        bern = self.bernoulli.forecast(F0, k)
        pois = self.poisson.forecast(Fp, k)
        return CountMixtureForecast(bern.alpha, bern.beta, pois.alpha, pois.beta)

    def copy(self) -> "Dcmm":
        return Dcmm(self.bernoulli.copy(), self.poisson.copy())


@dataclass
class Dlmm:
    """Dynamic linear mixture: occurrence Bernoulli + normal log-amount.

    The outcome convention is exact: x == 0 means "no spend"; any other
    value is the observed log amount (never log(0)).
    """

    bernoulli: StateModel
    dlm: StateModel

    @classmethod
    def random_walk(cls, dim0: int, dim_x: int, delta: float = 0.98,
                    vol_discount: float = 0.99, prior_scale: float = 1.0,
                    obs_scale: float = 1.0) -> "Dlmm":
        return cls(
            StateModel.random_walk(Family.BERNOULLI, dim0, delta,
                                   prior_scale=prior_scale),
            StateModel.random_walk(Family.NORMAL, dim_x, delta,
                                   vol_discount=vol_discount,
                                   prior_scale=prior_scale,
                                   obs_scale=obs_scale),
        )

    def update(self, F0, Fd, x: float) -> SpendMixtureForecast:
        """Advance one week on log-scale outcome x (0 encodes no spend)."""
        z = 1 if x != 0.0 else 0
        bern_fc = self.bernoulli.update(F0, z)
        if z:
            t_fc = self.dlm.update(Fd, x)
        else:
            t_fc = self.dlm.predict_and_evolve(Fd)
        return SpendMixtureForecast(bern_fc.alpha, bern_fc.beta,
                                    t_fc.dof, t_fc.loc, t_fc.scale)

    def evolve_step(self) -> None:
        self.bernoulli.evolve_step()
        self.dlm.evolve_step()

    def forecast(self, F0, Fd, k: int = 1) -> SpendMixtureForecast:
        bern = self.bernoulli.forecast(F0, k)
        t_fc = self.dlm.forecast(Fd, k)
        return SpendMixtureForecast(bern.alpha, bern.beta,
                                    t_fc.dof, t_fc.loc, t_fc.scale)

    def copy(self) -> "Dlmm":
        return Dlmm(self.bernoulli.copy(), self.dlm.copy())


def dcmm_update(model: Dcmm, F0, Fp, y) -> Dcmm:
    model.update(F0, Fp, y)
    return model


def dcmm_forecast(model: Dcmm, F0, Fp, k: int = 1) -> CountMixtureForecast:
    return model.forecast(F0, Fp, k)


def dlmm_update(model: Dlmm, F0, Fd, x) -> Dlmm:
    model.update(F0, Fd, x)
    return model


def dlmm_forecast(model: Dlmm, F0, Fd, k: int = 1) -> SpendMixtureForecast:
    return model.forecast(F0, Fd, k)
