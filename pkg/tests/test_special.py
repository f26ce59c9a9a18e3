"""Special-function kernels against scipy and the conjugate-solver contracts."""

import math

import numpy as np
import pytest
from scipy import special as sp

from hiercast.kernels import (
    bernoulli_moments,
    poisson_moments,
    solve_bernoulli,
    solve_poisson,
)
from hiercast.special import (
    digamma,
    digamma_inverse,
    tetragamma,
    trigamma,
    trigamma_inverse,
)


def test_polygamma_against_scipy():
    xs = np.concatenate([
        np.geomspace(1e-5, 1.0, 200),
        np.linspace(1.0, 60.0, 200),
        [1e3, 1e6, 3e8],
    ])
    for order, fn in [(0, digamma), (1, trigamma), (2, tetragamma)]:
        ref = sp.polygamma(order, xs)
        got = np.array([fn(float(x)) for x in xs])
        rel = np.abs(got - ref) / np.maximum(np.abs(ref), 1e-300)
        assert rel.max() < 1e-10, f"order {order}: max rel err {rel.max()}"


def test_polygamma_invalid_argument():
    assert math.isnan(digamma(0.0))
    assert math.isnan(trigamma(-1.0))


def test_inverse_functions_round_trip():
    for x in np.geomspace(1e-3, 1e4, 60):
        assert digamma_inverse(digamma(float(x))) == pytest.approx(x, rel=1e-9)
        assert trigamma_inverse(trigamma(float(x))) == pytest.approx(x, rel=1e-9)


def test_bernoulli_solver_symmetric_case():
    # f=0 forces alpha == beta; q = 2 * trigamma(1) = pi^2/3 solves at (1, 1).
    alpha, beta, ok = solve_bernoulli(0.0, 2.0 * math.pi**2 / 6.0)
    assert ok
    assert alpha == pytest.approx(1.0, abs=1e-8)
    assert beta == pytest.approx(1.0, abs=1e-8)


def test_bernoulli_solver_symmetry_property():
    for q in [1e-3, 0.1, 1.0, 10.0, 45.0]:
        alpha, beta, ok = solve_bernoulli(0.0, q)
        assert ok
        assert alpha == pytest.approx(beta, rel=1e-9)


def test_poisson_solver_unit_case():
    # f = digamma(1), q = trigamma(1) correspond to Gamma(1, 1).
    alpha, beta, ok = solve_poisson(float(sp.digamma(1.0)), float(sp.polygamma(1, 1.0)))
    assert ok
    assert alpha == pytest.approx(1.0, abs=1e-10)
    assert beta == pytest.approx(1.0, abs=1e-10)


def test_round_trip_random_sweep():
    rng = np.random.default_rng(7)
    f = rng.uniform(-10, 10, 500)
    q = np.exp(rng.uniform(np.log(1e-4), np.log(50.0), 500))
    for fi, qi in zip(f, q):
        a, b, ok = solve_bernoulli(float(fi), float(qi))
        assert ok
        f2, q2 = bernoulli_moments(a, b)
        assert abs(f2 - fi) < 1e-8 and abs(q2 - qi) < 1e-8
        a, b, ok = solve_poisson(float(fi), float(qi))
        assert ok
        f2, q2 = poisson_moments(a, b)
        assert abs(f2 - fi) < 1e-8 and abs(q2 - qi) < 1e-8


def test_solver_rejects_nonpositive_variance():
    _, _, ok = solve_bernoulli(0.0, 0.0)
    assert not ok
    _, _, ok = solve_poisson(0.0, -1.0)
    assert not ok
