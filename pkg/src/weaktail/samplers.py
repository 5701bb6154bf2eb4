"""Joint samplers: copula samplers on the unit cube, composed with margins.

A sampler is any callable ``(rng, size) -> array of shape (size, n)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import ndtr

from .copula import (
    Archimedean,
    Comonotone,
    CopulaSpec,
    Gaussian,
    GaussianMixtureSym,
    GumbelEV,
    Independence,
    laplace_log_cdf,
)
from .errors import ValidationError

Sampler = Callable[[np.random.Generator, int], np.ndarray]


@dataclass(frozen=True)
class MarginSpec:
    """A continuous margin, given by its quantile and log tails.

    lambda_slope is the ratio ln F_k / ln F_0 against a reference margin in
    the tail being studied; slow_varying flags ln F(x) slowly varying at 0.
    """

    name: str
    ppf: Callable
    log_cdf: Callable
    log_survival: Callable
    lambda_slope: float = 1.0
    slow_varying: bool = False


def uniform_margin() -> MarginSpec:
    return MarginSpec(
        "uniform",
        ppf=lambda u: u,
        log_cdf=lambda x: np.log(np.clip(x, 0.0, 1.0)),
        log_survival=lambda x: np.log1p(-np.clip(x, 0.0, 1.0)),
        slow_varying=True,
    )


def exponential_margin(rate: float = 1.0) -> MarginSpec:
    if not rate > 0:
        raise ValidationError("rate must be positive")
    return MarginSpec(
        f"exponential({rate:g})",
        ppf=lambda u: -np.log1p(-u) / rate,
        log_cdf=lambda x: np.log(-np.expm1(-rate * np.maximum(x, 0.0))),
        log_survival=lambda x: -rate * np.maximum(x, 0.0),
        lambda_slope=rate,
        slow_varying=True,
    )


def _positive_stable(rng: np.random.Generator, alpha: float, size: int) -> np.ndarray:
    """Kanter's representation of the positive stable law with Laplace transform exp(-s^alpha)."""
    if alpha == 1.0:
        return np.ones(size)
    th = rng.uniform(0.0, math.pi, size)
    e = rng.standard_exponential(size)
    return (np.sin(alpha * th) / np.sin(th) ** (1.0 / alpha)
            * (np.sin((1.0 - alpha) * th) / e) ** ((1.0 - alpha) / alpha))


def copula_sampler(spec: CopulaSpec) -> Sampler:
    """Sampler of uniforms with copula ``spec``."""
    n = spec.dim
    if isinstance(spec, Independence):
        return lambda rng, m: rng.random((m, n))
    if isinstance(spec, Comonotone):
        return lambda rng, m: np.repeat(rng.random((m, 1)), n, axis=1)
    if isinstance(spec, Gaussian):
        L = np.linalg.cholesky(spec.R)
        return lambda rng, m: ndtr(rng.standard_normal((m, n)) @ L.T)
    if isinstance(spec, GaussianMixtureSym):
        L = np.linalg.cholesky(spec.R)
        theta = spec.theta

        def mixture(rng, m):
            z = rng.exponential(1.0 / theta, (m, 1))
            x = np.sqrt(z) * (rng.standard_normal((m, n)) @ L.T)
            return np.exp(laplace_log_cdf(x, theta))
        return mixture
    if isinstance(spec, (Archimedean, GumbelEV)):
        if isinstance(spec, GumbelEV):
            family, theta = "gumbel", spec.theta
        else:
            family, theta = spec.family, spec.generator.theta
        if family == "clayton":
            # phi^-1(s) = (1 + theta s)^(-1/theta) is the Laplace transform of Gamma(1/theta, scale theta)
            def clayton(rng, m):
                v = rng.gamma(1.0 / theta, theta, (m, 1))
                e = rng.standard_exponential((m, n))
                return np.exp(-np.log1p(theta * e / v) / theta)
            return clayton
        if family == "gumbel":
            alpha = 1.0 / theta

            def gumbel(rng, m):
                v = _positive_stable(rng, alpha, m)[:, None]
                e = rng.standard_exponential((m, n))
                return np.exp(-((e / v) ** alpha))
            return gumbel
        raise ValidationError(f"no sampler for the {family!r} generator")
    raise ValidationError(f"no sampler for {spec!r}")


def with_margins(sampler: Sampler, margins: list[MarginSpec]) -> Sampler:
    def joint(rng, m):
        u = sampler(rng, m)
        return np.column_stack([mg.ppf(u[:, i]) for i, mg in enumerate(margins)])
    return joint
