import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from weaktail.asymptotics import FunctionalRegion, mc_tail_curve
from weaktail.chi import chi_closed_form, chi_gaussian_mixture
from weaktail.copula import (
    Archimedean,
    ArchimedeanGenerator,
    Comonotone,
    Gaussian,
    GumbelEV,
    Independence,
    copula_cdf,
)
from weaktail.samplers import copula_sampler
from weaktail.simplex import MixtureParams

lams = st.lists(st.floats(0.05, 20), min_size=2, max_size=3)
scales = st.floats(1e-3, 1e3)


def corr_from(seed, n):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n + 1))
    s = a @ a.T
    d = np.sqrt(np.diag(s))
    return s / np.outer(d, d)


@st.composite
def specs(draw, n):
    kind = draw(st.sampled_from(["independence", "comonotone", "gaussian", "gumbel", "clayton", "gumbel-ev"]))
    if kind == "independence":
        return Independence(n)
    if kind == "comonotone":
        return Comonotone(n)
    if kind == "gaussian":
        return Gaussian(corr_from(draw(st.integers(0, 10 ** 6)), n))
    if kind == "gumbel-ev":
        return GumbelEV(draw(st.floats(1.0, 6.0)), n)
    theta = draw(st.floats(1.0, 6.0)) if kind == "gumbel" else draw(st.floats(0.1, 5.0))
    return Archimedean(ArchimedeanGenerator(kind, theta), n)


@settings(max_examples=150, deadline=None)
@given(data=st.data(), lam=lams)
def test_chi_in_unit_interval(data, lam):
    spec = data.draw(specs(len(lam)))
    v = chi_closed_form(spec, lam).value
    assert 0.0 <= v <= 1.0


@settings(max_examples=150, deadline=None)
@given(data=st.data(), lam=lams, r=scales)
def test_closed_form_homogeneity(data, lam, r):
    spec = data.draw(specs(len(lam)))
    base = chi_closed_form(spec, lam).value
    assert chi_closed_form(spec, [r * l for l in lam]).value == pytest.approx(base, rel=1e-12, abs=1e-14)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10 ** 6), theta=st.floats(0.2, 3.0), lam=st.lists(st.floats(0.2, 5), min_size=2, max_size=2),
       r=st.floats(0.1, 10))
def test_mixture_in_unit_interval_and_homogeneous(seed, theta, lam, r):
    R = corr_from(seed, 2)
    base = chi_gaussian_mixture(MixtureParams(R, [0, 0], theta, lam)).value
    scaled = chi_gaussian_mixture(MixtureParams(R, [0, 0], theta, [r * l for l in lam])).value
    assert 0.0 <= base <= 1.0 + 1e-12
    assert scaled == pytest.approx(base, abs=1e-7)


@settings(max_examples=100, deadline=None)
@given(data=st.data(), n=st.integers(2, 3))
def test_copula_axioms_random_points(data, n):
    spec = data.draw(specs(n))
    u = np.array(data.draw(st.lists(st.floats(0.001, 0.999), min_size=n, max_size=n)))
    c = copula_cdf(spec, u)
    assert max(u.sum() - n + 1, 0.0) - 1e-9 <= c <= u.min() + 1e-9
    j = data.draw(st.integers(0, n - 1))
    w = np.ones(n)
    w[j] = u[j]
    assert copula_cdf(spec, w) == pytest.approx(u[j], abs=1e-8)
    v = u.copy()
    v[j] = 0.0
    assert copula_cdf(spec, v) == 0.0
    bump = data.draw(st.floats(0.0, 0.5))
    up = u.copy()
    up[j] = min(1.0, u[j] + bump)
    assert copula_cdf(spec, up) >= c - 1e-9


@settings(max_examples=30, deadline=None)
@given(data=st.data())
def test_two_increasing(data):
    """C-volume of a random box is non-negative in two dimensions."""
    spec = data.draw(specs(2))
    a = sorted(data.draw(st.lists(st.floats(0.01, 0.99), min_size=2, max_size=2)))
    b = sorted(data.draw(st.lists(st.floats(0.01, 0.99), min_size=2, max_size=2)))
    assume(a[1] - a[0] > 1e-3 and b[1] - b[0] > 1e-3)
    vol = (copula_cdf(spec, [a[1], b[1]]) - copula_cdf(spec, [a[0], b[1]])
           - copula_cdf(spec, [a[1], b[0]]) + copula_cdf(spec, [a[0], b[0]]))
    assert vol >= -1e-9


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2 ** 32), workers=st.integers(1, 4))
def test_mc_determinism_byte_exact(seed, workers):
    sampler = copula_sampler(Gaussian(corr_from(1, 2)))
    t = np.logspace(-2, -0.3, 5)
    a = mc_tail_curve(sampler, FunctionalRegion("max"), t, 40_000, seed, workers, chunk=10_000)
    b = mc_tail_curve(sampler, FunctionalRegion("max"), t, 40_000, seed, workers, chunk=10_000)
    assert a.to_csv() == b.to_csv()
