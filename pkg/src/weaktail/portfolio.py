"""Portfolio of European calls in a multivariate Black-Scholes market.

Log-prices at the horizon are X ~ N(mu T, B T); leg i is a call with
log-strike k_i and maturity T_i > T, priced at T with zero rates.  The left
tail of P_1 + ... + P_n follows a power law with exponent
1 / min_{w in simplex} w' Sigma w,
Sigma_ij = B_ij T / (sigma_i sigma_j sqrt((T_i - T)(T_j - T))).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, optimize
from scipy.special import beta, erfcx, gammaln, log_ndtr

from .asymptotics import DEFAULT_CHUNK, FunctionalRegion, TailCurve, mc_tail_curve
from .errors import DomainError, NotIdenticalLegs, ValidationError
from .simplex import as_sym_matrix, min_quadratic_on_simplex

_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
_SQRT_HALF_PI = math.sqrt(0.5 * math.pi)


# --------------------------------------------------------------------------- pricing


def _mills(y):
    """Phi(-y) / phi(y)."""
    return _SQRT_HALF_PI * erfcx(y / math.sqrt(2.0))


def log_bs_call_price(x, k, sigma, tau):
    """ln of the zero-rate Black-Scholes call price for log-spot x and log-strike k.

    Out of the money (d+ < 0) the price is written as
    e^k phi(d-) (M(-d+) - M(-d-)) with M the Mills ratio, which keeps full
    relative accuracy far into the tail where the textbook form cancels.
    """
    if not (np.all(np.asarray(sigma) > 0) and np.all(np.asarray(tau) > 0)):
        raise DomainError("sigma and tau must be positive")
    x = np.asarray(x, dtype=float)
    s = np.asarray(sigma, dtype=float) * np.sqrt(tau)
    dp = (x - k) / s + s / 2
    dm = dp - s
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        otm = k - 0.5 * dm * dm - _HALF_LOG_2PI + np.log(_mills(-dp) - _mills(-dm))
        itm = x + np.log(-np.expm1(k - x + log_ndtr(dm) - log_ndtr(dp))) + log_ndtr(dp)
    out = np.where(dp < 0, otm, itm)
    return out if out.ndim else float(out)


def bs_call_price(x, k, sigma, tau):
    """e^x N(d+) - e^k N(d-), d+- = (x - k)/(sigma sqrt tau) +- sigma sqrt(tau)/2."""
    return np.exp(log_bs_call_price(x, k, sigma, tau))


# --------------------------------------------------------------------------- spec


@dataclass(frozen=True)
class Leg:
    k: float
    maturity: float


@dataclass(frozen=True, eq=False)
class PortfolioSpec:
    B: np.ndarray
    mu: np.ndarray
    T: float
    legs: tuple

    def __post_init__(self):
        B = as_sym_matrix(self.B)
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        legs = tuple(l if isinstance(l, Leg) else Leg(float(l["k"]), float(l["maturity"])) for l in self.legs)
        if mu.size == 1 and B.shape[0] > 1:
            mu = np.full(B.shape[0], mu[0])
        if mu.shape != (B.shape[0],) or len(legs) != B.shape[0]:
            raise ValidationError("B, mu and legs have inconsistent sizes")
        if not self.T > 0:
            raise ValidationError("horizon T must be positive")
        if any(not l.maturity > self.T for l in legs):
            raise ValidationError("every maturity must exceed the horizon T")
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "legs", legs)

    @property
    def n(self) -> int:
        return len(self.legs)

    @property
    def sigma(self) -> np.ndarray:
        return np.sqrt(np.diag(self.B))

    @property
    def R(self) -> np.ndarray:
        s = self.sigma
        return self.B / np.outer(s, s)

    @property
    def k(self) -> np.ndarray:
        return np.array([l.k for l in self.legs])

    @property
    def tau(self) -> np.ndarray:
        """Remaining time to maturity at the horizon, T_i - T."""
        return np.array([l.maturity for l in self.legs]) - self.T

    @classmethod
    def from_dict(cls, d: dict) -> "PortfolioSpec":
        try:
            return cls(d["B"], d["mu"], d["T"], tuple(d["legs"]))
        except KeyError as e:
            raise ValidationError(f"portfolio config is missing {e}") from None

    @classmethod
    def from_json(cls, text: str) -> "PortfolioSpec":
        return cls.from_dict(json.loads(text))

    def to_dict(self) -> dict:
        return {"B": self.B.tolist(), "mu": self.mu.tolist(), "T": self.T,
                "legs": [{"k": l.k, "maturity": l.maturity} for l in self.legs]}


def figure1_spec() -> PortfolioSpec:
    """Three identical calls: B = 0.2 diagonal / 0.1 off, mu = -0.1, T = 0.25, k = 0, T_i = 0.5."""
    B = np.full((3, 3), 0.1) + 0.1 * np.eye(3)
    return PortfolioSpec(B, [-0.1] * 3, 0.25, tuple(Leg(0.0, 0.5) for _ in range(3)))


# --------------------------------------------------------------------------- legs as functions of standardized returns


def log_leg_price(spec: PortfolioSpec, i: int, x):
    """ln f_i(x): log price of leg i when the standardized log-return equals x."""
    sig, T = spec.sigma[i], spec.T
    return log_bs_call_price(spec.mu[i] * T + np.asarray(x, dtype=float) * sig * math.sqrt(T),
                             spec.k[i], sig, spec.tau[i])


def leg_price(spec: PortfolioSpec, i: int, x):
    return np.exp(log_leg_price(spec, i, x))


def leg_inverse(spec: PortfolioSpec, i: int, z: float) -> float:
    """f_i^{-1}(z), the standardized return at which leg i is worth z."""
    if not z > 0:
        raise DomainError("price level must be positive")
    target = math.log(z)
    g = lambda x: log_leg_price(spec, i, x) - target
    lo, hi = -1.0, 1.0
    while g(lo) > 0:
        lo *= 2.0
    while g(hi) < 0:
        hi *= 2.0
        if hi > 1e6:
            raise DomainError("price level above the attainable range")
    return optimize.brentq(g, lo, hi, xtol=1e-14, rtol=1e-15)


def leg_log_cdf(spec: PortfolioSpec, i: int, z: float) -> float:
    """ln P[P_i <= z] = ln N(f_i^{-1}(z)), exact."""
    return float(log_ndtr(leg_inverse(spec, i, z)))


def _d_minus(spec: PortfolioSpec, i: int, x):
    sig, T, tau = spec.sigma[i], spec.T, spec.tau[i]
    s = sig * math.sqrt(tau)
    return x * math.sqrt(T / tau) + (spec.mu[i] * T - spec.k[i]) / s - s / 2


def price_tail_equivalent(spec: PortfolioSpec, i: int, x):
    """Tail equivalent of f_i(x) as x -> -inf and its logarithmic form.

    Returns (sigma_i tau^1.5 / (x^2 T sqrt(2 pi)) exp(k_i - d_-(x)^2 / 2),
    -x^2 T / (2 tau)), tau = T_i - T.
    """
    x = np.asarray(x, dtype=float)
    sig, T, tau = spec.sigma[i], spec.T, spec.tau[i]
    dm = _d_minus(spec, i, x)
    eq = sig * tau ** 1.5 / (x * x * T * math.sqrt(2 * math.pi)) * np.exp(spec.k[i] - 0.5 * dm * dm)
    return eq, -x * x * T / (2 * tau)


# --------------------------------------------------------------------------- log-scale prediction


def portfolio_sigma_matrix(spec: PortfolioSpec) -> np.ndarray:
    s, tau = spec.sigma, spec.tau
    return spec.B * spec.T / (np.outer(s, s) * np.sqrt(np.outer(tau, tau)))


def predicted_portfolio_slope(spec: PortfolioSpec, tol: float = 1e-12) -> float:
    """Limit of ln P[P_1 + ... + P_n <= z] / ln z as z -> 0."""
    return 1.0 / min_quadratic_on_simplex(portfolio_sigma_matrix(spec), tol=tol).value


def portfolio_sampler(spec: PortfolioSpec) -> Callable:
    L = np.linalg.cholesky(spec.B * spec.T)
    mean = spec.mu * spec.T
    k, sig, tau = spec.k, spec.sigma, spec.tau

    def draw(rng, m):
        x = mean + rng.standard_normal((m, spec.n)) @ L.T
        return bs_call_price(x, k, sig, tau)
    return draw


def portfolio_tail_curve(spec: PortfolioSpec, thresholds, samples: int, seed: int, workers: int = 1,
                         chunk: int = DEFAULT_CHUNK) -> TailCurve:
    """Monte Carlo estimate of P[P_1 + ... + P_n <= z] on a shared sample stream."""
    return mc_tail_curve(portfolio_sampler(spec), FunctionalRegion("sum"), thresholds, samples, seed,
                         workers, chunk, metadata={"factorization": "cholesky"})


# --------------------------------------------------------------------------- two identical legs: sharp asymptotic


@dataclass(frozen=True)
class HrvQuantities:
    """Constants of the sharp asymptotic for two identical legs.

    variant "original" uses nu0(A) = g B(1+g, 2+g), c = (mu T + k)/(sigma sqrt tau)
    + sigma sqrt(tau)/2, (2 sqrt pi)^(T/tau) in C and U(t) = t^(1/eta) L0(t);
    "corrected" uses nu0(A) = Gamma(1+g)^2 / Gamma(1+2g), c = (k - mu T)/(sigma
    sqrt tau) + sigma sqrt(tau)/2, (2 sqrt pi)^(-T/tau) in C, the sign of the
    exponential factor of L_tilde flipped, and U(t) = t^(1/eta) / L0(t).
    """

    eta: float
    gamma: float
    exponent: float
    nu0_A: float
    C: tuple
    c: tuple
    L0: Callable
    L_tilde_asymptote: Callable
    variant: str


def hrv_quantities(spec: PortfolioSpec, variant: str = "original") -> HrvQuantities:
    if variant not in ("original", "corrected"):
        raise ValidationError(f"unknown variant {variant!r}")
    if spec.n != 2:
        raise NotIdenticalLegs("the sharp asymptotic needs exactly two legs")
    s = spec.sigma
    if not (np.isclose(s[0], s[1], rtol=1e-12) and spec.legs[0] == spec.legs[1]
            and np.isclose(spec.mu[0], spec.mu[1], rtol=1e-12, atol=0)):
        raise NotIdenticalLegs("legs must share volatility, drift, strike and maturity")
    sig, mu, k, T = s[0], spec.mu[0], spec.k[0], spec.T
    tau = spec.tau[0]
    rho = float(spec.R[0, 1])
    eta = 0.5 * (1 + rho)
    gam = tau / (2 * eta * T)
    a = tau / T
    L0 = lambda t: (1 + rho) ** 1.5 * (1 - rho) ** -0.5 * (4 * math.pi * np.log(t)) ** (-rho / (1 + rho))
    if variant == "original":
        nu0 = gam * beta(1 + gam, 2 + gam)
        c = (mu * T + k) / (sig * math.sqrt(tau)) + sig * math.sqrt(tau) / 2
        root_pi_power, sign = a ** -1, 1.0
    else:
        nu0 = math.exp(2 * gammaln(1 + gam) - gammaln(1 + 2 * gam))
        c = (k - mu * T) / (sig * math.sqrt(tau)) + sig * math.sqrt(tau) / 2
        root_pi_power, sign = -a ** -1, -1.0
    C = (2 * T * math.sqrt(2 * math.pi) / (sig * tau ** 1.5) * math.exp(c * c / 2 - k)
         * (2 * math.sqrt(math.pi)) ** root_pi_power)
    Lt = lambda t: C ** -a * (a * np.log(t)) ** (0.5 - a) * np.exp(sign * c * a * np.sqrt(2 * np.log(t)))
    return HrvQuantities(eta, gam, 2 * gam, float(nu0), (C, C), (c, c), L0, Lt, variant)


def hrv_sharp_asymptote(q: HrvQuantities, z):
    """Sharp equivalent of P[P_1 + P_2 <= z] as z -> 0."""
    z = np.asarray(z, dtype=float)
    if np.any(z >= 1) or np.any(z <= 0):
        raise DomainError("the sharp asymptote needs 0 < z < 1")
    a = q.exponent * q.eta  # (T_1 - T) / T
    l0 = q.L0(z ** -a)
    lt = q.L_tilde_asymptote(1 / z) ** (1 / q.eta)
    if q.variant == "original":
        out = z ** q.exponent * q.nu0_A / (lt * l0)
    else:
        out = z ** q.exponent * q.nu0_A * l0 / lt
    return out if out.ndim else float(out)


def nu0_region_integral(gamma: float, epsrel: float = 1e-10) -> float:
    """nu0(A) for A = {x, y > 0 : 1/x + 1/y <= 1} by 2-D quadrature of the density.

    nu0((x1, inf) x (x2, inf)) = (x1 x2)^-gamma has density gamma^2 (x y)^(-gamma-1);
    in s = 1/x, r = 1/y the region becomes the triangle s + r <= 1 with density
    gamma^2 (s r)^(gamma-1).
    """
    if not gamma > 0:
        raise DomainError("gamma must be positive")
    val, _ = integrate.dblquad(lambda r, s: gamma * gamma * (s * r) ** (gamma - 1), 0.0, 1.0,
                               0.0, lambda s: 1.0 - s, epsabs=0.0, epsrel=epsrel)
    return float(val)
