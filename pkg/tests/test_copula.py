import math

import mpmath as mp
import numpy as np
import pytest

from weaktail.copula import (
    Archimedean,
    ArchimedeanGenerator,
    Comonotone,
    Gaussian,
    GaussianMixtureSym,
    GumbelEV,
    Independence,
    bivariate_corr,
    copula_cdf,
    generator_phi,
    generator_phi_inv,
    log_copula_cdf,
    log_survival_copula_cdf,
    spec_from_dict,
    spec_to_dict,
    survival_copula_cdf,
)
from weaktail.errors import DimensionTooLarge, DomainError, ValidationError
from weaktail.samplers import copula_sampler


def gen(family, theta=1.0):
    return ArchimedeanGenerator(family, theta)


def test_closed_form_examples():
    assert copula_cdf(Independence(), [0.3, 0.5]) == pytest.approx(0.15, abs=1e-15)
    assert copula_cdf(Comonotone(), [0.3, 0.5]) == 0.3
    assert copula_cdf(Gaussian(bivariate_corr(0.0)), [0.2, 0.7]) == pytest.approx(0.14, abs=1e-10)


def test_gumbel_value_against_mpmath():
    mp.mp.dps = 40
    expected = float(mp.exp(-mp.sqrt(2 * mp.log(2) ** 2)))
    assert copula_cdf(Archimedean(gen("gumbel", 2.0)), [0.5, 0.5]) == pytest.approx(expected, rel=1e-14)
    assert copula_cdf(GumbelEV(2.0), [0.5, 0.5]) == pytest.approx(expected, rel=1e-14)
    assert expected == pytest.approx(0.375214, abs=1e-6)


def test_generators():
    g1 = gen("gumbel", 1.0)
    u = np.array([0.1, 0.5, 0.9])
    np.testing.assert_allclose(generator_phi(g1, u), -np.log(u), rtol=1e-15)
    np.testing.assert_allclose(generator_phi_inv(g1, [0.0, 1.0, 3.0]), np.exp(-np.array([0.0, 1.0, 3.0])), rtol=1e-15)
    c1 = gen("clayton", 1.0)
    assert float(generator_phi_inv(c1, 2 * generator_phi(c1, 0.5))) == pytest.approx(1 / 3, abs=1e-15)
    assert copula_cdf(Archimedean(c1), [0.5, 0.5]) == pytest.approx(1 / 3, abs=1e-15)
    assert float(generator_phi_inv(gen("custom-slow"), 0.0)) == 1.0


def _bisect_phi(g, u):
    """phi(u) by bisection on the decreasing inverse over s in [0, 1e30] (in the variable ln(1 + s))."""
    lo, hi = 0.0, math.log1p(1e30)
    lu = math.log(u)
    while hi - lo > 1e-15 * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if float(g.log_phi_inv(math.expm1(mid))) > lu:
            lo = mid
        else:
            hi = mid
    return math.expm1(0.5 * (lo + hi))


@pytest.mark.parametrize("family,theta", [("gumbel", 1.0), ("gumbel", 3.0), ("clayton", 0.5), ("clayton", 4.0),
                                          ("custom-slow", 1.0)])
def test_round_trip(family, theta):
    g = gen(family, theta)
    u = np.logspace(-12, 0, 61)
    np.testing.assert_allclose(g.phi_inv(g.phi(u)), u, rtol=1e-10, atol=0)


def test_custom_slow_closed_form_matches_bisection():
    g = gen("custom-slow")
    for u in (1e-12, 1e-6, 0.01, 0.3, 0.9, 0.999):
        assert float(g.phi(u)) == pytest.approx(_bisect_phi(g, u), rel=1e-9, abs=1e-12)


def test_generator_domain():
    g = gen("clayton", 1.0)
    with pytest.raises(DomainError):
        g.phi(0.0)
    with pytest.raises(DomainError):
        g.phi(1.5)
    with pytest.raises(DomainError):
        g.phi_inv(-1.0)
    with pytest.raises(ValidationError):
        gen("gumbel", 0.5)
    with pytest.raises(ValidationError):
        gen("clayton", 0.0)
    with pytest.raises(ValidationError):
        gen("frank", 1.0)
    with pytest.raises(DimensionTooLarge):
        Archimedean(gen("custom-slow"), 3)


SPECS = [
    Independence(3),
    Comonotone(2),
    Gaussian(bivariate_corr(0.6)),
    Gaussian(np.array([[1, 0.3, -0.2], [0.3, 1, 0.5], [-0.2, 0.5, 1]])),
    Archimedean(gen("gumbel", 1.7), 3),
    Archimedean(gen("clayton", 2.0), 2),
    Archimedean(gen("custom-slow")),
    GumbelEV(2.5, 2),
    GaussianMixtureSym(bivariate_corr(-0.3), 0.8),
]


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.family)
def test_copula_axioms(spec):
    rng = np.random.default_rng(11)
    n = spec.dim
    for _ in range(5):
        u = rng.uniform(0.01, 0.99, n)
        c = copula_cdf(spec, u)
        # groundedness and uniform margins
        v = u.copy()
        v[0] = 0.0
        assert copula_cdf(spec, v) == 0.0
        k = rng.integers(n)
        w = np.ones(n)
        w[k] = u[k]
        assert copula_cdf(spec, w) == pytest.approx(u[k], abs=1e-8)
        # Frechet-Hoeffding bounds
        assert max(u.sum() - n + 1, 0.0) - 1e-8 <= c <= u.min() + 1e-8
        # monotone in each coordinate
        j = rng.integers(n)
        up = u.copy()
        up[j] = min(1.0, u[j] + 0.05)
        assert copula_cdf(spec, up) >= c - 1e-8


@pytest.mark.parametrize("spec", [s for s in SPECS if s.family != "custom-slow"], ids=lambda s: s.family)
def test_cdf_matches_sampler(spec):
    rng = np.random.default_rng(12)
    x = copula_sampler(spec)(rng, 400_000)
    for u in ([0.3] * spec.dim, list(np.linspace(0.2, 0.8, spec.dim))):
        p = np.mean(np.all(x <= np.array(u), axis=1))
        c = copula_cdf(spec, u)
        assert abs(p - c) < 5 * math.sqrt(c * (1 - c) / len(x)) + 1e-4


def test_survival_copula():
    assert survival_copula_cdf(Independence(), [0.3, 0.5]) == pytest.approx(0.15)
    assert survival_copula_cdf(Comonotone(), [0.3, 0.5]) == pytest.approx(0.3)
    g = Gaussian(bivariate_corr(0.4))
    for u0 in (0.01, 0.2, 0.6):
        assert survival_copula_cdf(g, [u0, u0]) == pytest.approx(copula_cdf(g, [u0, u0]), rel=1e-10)
    # Gumbel by inclusion-exclusion: Cbar(u, v) = u + v - 1 + C(1-u, 1-v)
    gs = Archimedean(gen("gumbel", 2.0))
    u, v = 0.2, 0.35
    assert survival_copula_cdf(gs, [u, v]) == pytest.approx(u + v - 1 + copula_cdf(gs, [1 - u, 1 - v]), rel=1e-10)
    # upper tail dependence of Gumbel: Cbar(u,u)/u -> 2 - 2^(1/theta)
    assert math.exp(log_survival_copula_cdf(gs, [1e-6, 1e-6])) / 1e-6 == pytest.approx(2 - math.sqrt(2), abs=1e-4)
    with pytest.raises(DimensionTooLarge):
        survival_copula_cdf(Archimedean(gen("clayton", 1.0), 13), [0.5] * 13)


def test_extreme_value_max_stability():
    rng = np.random.default_rng(13)
    for theta, n in ((1.5, 2), (3.0, 3)):
        c = GumbelEV(theta, n)
        for _ in range(5):
            u = rng.uniform(0.05, 0.95, n)
            base = copula_cdf(c, u)
            for m in (2, 3, 5):
                assert copula_cdf(c, u ** (1 / m)) ** m == pytest.approx(base, abs=1e-10)


def test_archimedean_associativity():
    rng = np.random.default_rng(14)
    for g in (gen("gumbel", 2.2), gen("clayton", 0.7)):
        c2, c3 = Archimedean(g, 2), Archimedean(g, 3)
        for _ in range(5):
            u = rng.uniform(0.05, 0.95, 3)
            nested = copula_cdf(c2, [copula_cdf(c2, u[:2]), u[2]])
            assert copula_cdf(c3, u) == pytest.approx(nested, abs=1e-10)


def test_log_cdf_deep_tail():
    # log scale stays finite where u underflows
    assert log_copula_cdf(Independence(), [-800.0, -900.0]) == pytest.approx(-1700.0)
    assert log_copula_cdf(Archimedean(gen("clayton", 1.0)), [-800.0, -800.0]) == pytest.approx(
        -800 - math.log(2), abs=1e-9)
    lg = log_copula_cdf(Archimedean(gen("gumbel", 2.0)), [-500.0, -500.0])
    assert lg == pytest.approx(-500 * math.sqrt(2), rel=1e-14)
    mix = GaussianMixtureSym(bivariate_corr(0.0), 0.5)
    assert np.isfinite(log_copula_cdf(mix, [-50.0, -50.0]))


def test_mixture_margins_are_uniform():
    m = GaussianMixtureSym(bivariate_corr(0.5), 0.5)
    assert copula_cdf(m, [0.3, 1.0]) == pytest.approx(0.3, abs=1e-8)
    assert copula_cdf(m, [1.0, 0.001]) == pytest.approx(0.001, rel=1e-7)


def test_spec_serialization_round_trip():
    for spec in SPECS:
        d = spec_to_dict(spec)
        again = spec_from_dict(d)
        assert spec_to_dict(again) == d
    assert spec_from_dict({"family": "gaussian", "params": {"rho": 0.5}}).R[0, 1] == 0.5
    with pytest.raises(ValidationError):
        spec_from_dict({"family": "student"})
    with pytest.raises(ValidationError):
        spec_from_dict({"params": {}})
    with pytest.raises(ValidationError):
        spec_from_dict({"family": "gaussian", "params": {}})


def test_unit_cube_validation():
    with pytest.raises(ValidationError):
        copula_cdf(Independence(), [0.5, 1.2])
    with pytest.raises(ValidationError):
        copula_cdf(Independence(3), [0.5, 0.5])
