"""Copula families and their (log-)CDFs, accurate deep in the lower tail."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from scipy.integrate import quad
from scipy.special import log_ndtr, logsumexp, ndtri_exp

from .errors import AccuracyUnreachable, DimensionTooLarge, DomainError, ValidationError
from .gausstail import log_gaussian_tail_cdf
from .simplex import as_sym_matrix

LN2 = math.log(2.0)
SURVIVAL_MAX_DIM = 12
_CUT = 60.0


# --------------------------------------------------------------------------- generators


@dataclass(frozen=True)
class ArchimedeanGenerator:
    """Archimedean generator phi with completely monotone inverse.

    family is one of ``"gumbel"`` (theta >= 1), ``"clayton"`` (theta > 0) or
    ``"custom-slow"``, the generator with inverse
    ``exp(-(ln(1 + s) + 1/2)^2 + 1/4)`` (theta is ignored, valid for n = 2).
    """

    family: str
    theta: float = 1.0

    def __post_init__(self):
        if self.family == "gumbel" and not self.theta >= 1:
            raise ValidationError("Gumbel generator needs theta >= 1")
        if self.family == "clayton" and not self.theta > 0:
            raise ValidationError("Clayton generator needs theta > 0")
        if self.family not in ("gumbel", "clayton", "custom-slow"):
            raise ValidationError(f"unknown Archimedean family {self.family!r}")

    @property
    def alpha(self) -> float:
        """Regular-variation index of ln phi^-1 at infinity (0 means slowly varying)."""
        return 1.0 / self.theta if self.family == "gumbel" else 0.0

    def phi(self, u):
        u = np.asarray(u, dtype=float)
        if np.any(u <= 0) or np.any(u > 1):
            raise DomainError("generator argument must lie in (0, 1]")
        return self.phi_log(np.log(u))

    def phi_log(self, log_u):
        """phi(exp(log_u)); stays accurate when u underflows or sits next to 1."""
        l = np.asarray(log_u, dtype=float)
        th = self.theta
        if self.family == "gumbel":
            return (-l) ** th
        if self.family == "clayton":
            return np.expm1(-th * l) / th
        # sqrt(1/4 - l) - 1/2 written without cancellation near l = 0
        return np.expm1(-l / (np.sqrt(0.25 - l) + 0.5))

    def phi_inv(self, s):
        return np.exp(self.log_phi_inv(s))

    def log_phi_inv(self, s):
        s = np.asarray(s, dtype=float)
        if np.any(s < 0):
            raise DomainError("inverse generator argument must be >= 0")
        th = self.theta
        if self.family == "gumbel":
            return -(s ** (1.0 / th))
        if self.family == "clayton":
            return -np.log1p(th * s) / th
        a = np.log1p(s)
        return -a * a - a

    def log_cdf(self, log_u: np.ndarray) -> float:
        """ln C(u) = ln phi^-1(sum phi(u_i)) from log coordinates."""
        l = np.asarray(log_u, dtype=float)
        th = self.theta
        if self.family == "clayton":
            # ln sum expm1(a_i) evaluated without overflow
            a = -th * l
            with np.errstate(divide="ignore"):
                terms = a + np.log(-np.expm1(-a))
            log_s = float(logsumexp(terms))
            return -float(np.logaddexp(0.0, log_s)) / th
        return float(self.log_phi_inv(np.sum(self.phi_log(l))))


# --------------------------------------------------------------------------- copula specs


@dataclass(frozen=True)
class Independence:
    dim: int = 2
    family = "independence"
    radially_symmetric = True


@dataclass(frozen=True)
class Comonotone:
    dim: int = 2
    family = "comonotone"
    radially_symmetric = True


@dataclass(frozen=True)
class Gaussian:
    R: np.ndarray = field(compare=False)
    family = "gaussian"
    radially_symmetric = True

    def __post_init__(self):
        object.__setattr__(self, "R", as_sym_matrix(self.R, correlation=True))

    @property
    def dim(self) -> int:
        return self.R.shape[0]


@dataclass(frozen=True)
class Archimedean:
    generator: ArchimedeanGenerator
    dim: int = 2
    radially_symmetric = False

    def __post_init__(self):
        if self.generator.family == "custom-slow" and self.dim != 2:
            raise DimensionTooLarge("the custom-slow generator is only a valid copula for n = 2")

    @property
    def family(self) -> str:
        return self.generator.family


@dataclass(frozen=True)
class GumbelEV:
    theta: float
    dim: int = 2
    family = "gumbel-ev"
    radially_symmetric = False

    def __post_init__(self):
        if not self.theta >= 1:
            raise ValidationError("Gumbel extreme value copula needs theta >= 1")


@dataclass(frozen=True)
class GaussianMixtureSym:
    """Copula of sqrt(Z) * Y with Y ~ N(0, R) and Z ~ Exponential(theta).

    The exponential density is the fixed representative of mixing densities
    ``exp(-theta s + o(s))``; the margins are then Laplace with scale
    ``1 / sqrt(2 theta)``.
    """

    R: np.ndarray = field(compare=False)
    theta: float = 1.0
    family = "mixture"
    radially_symmetric = True

    def __post_init__(self):
        object.__setattr__(self, "R", as_sym_matrix(self.R, correlation=True))
        if not self.theta > 0:
            raise ValidationError("mixture theta must be positive")

    @property
    def dim(self) -> int:
        return self.R.shape[0]


CopulaSpec = Independence | Comonotone | Gaussian | Archimedean | GumbelEV | GaussianMixtureSym


def bivariate_corr(rho: float) -> np.ndarray:
    return np.array([[1.0, rho], [rho, 1.0]])


def spec_from_dict(d: dict) -> CopulaSpec:
    """Build a spec from ``{"family": ..., "params": {...}}``."""
    try:
        family = d["family"]
    except (KeyError, TypeError):
        raise ValidationError("copula spec needs a 'family' key") from None
    p = dict(d.get("params", {}))

    def corr():
        if "R" in p:
            return np.asarray(p["R"], dtype=float)
        if "rho" in p:
            return bivariate_corr(float(p["rho"]))
        raise ValidationError(f"{family} copula needs 'R' or 'rho'")

    dim = int(p.get("dim", 2))
    if family == "independence":
        return Independence(dim)
    if family == "comonotone":
        return Comonotone(dim)
    if family == "gaussian":
        return Gaussian(corr())
    if family in ("gumbel", "clayton", "custom-slow"):
        return Archimedean(ArchimedeanGenerator(family, float(p.get("theta", 1.0))), dim)
    if family == "gumbel-ev":
        return GumbelEV(float(p["theta"]), dim)
    if family == "mixture":
        return GaussianMixtureSym(corr(), float(p.get("theta", 1.0)))
    raise ValidationError(f"unknown copula family {family!r}")


def spec_to_dict(spec: CopulaSpec) -> dict:
    if isinstance(spec, (Independence, Comonotone)):
        params = {"dim": spec.dim}
    elif isinstance(spec, Gaussian):
        params = {"R": spec.R.tolist()}
    elif isinstance(spec, Archimedean):
        params = {"theta": spec.generator.theta, "dim": spec.dim}
    elif isinstance(spec, GumbelEV):
        params = {"theta": spec.theta, "dim": spec.dim}
    elif isinstance(spec, GaussianMixtureSym):
        params = {"R": spec.R.tolist(), "theta": spec.theta}
    else:
        raise ValidationError(f"not a copula spec: {spec!r}")
    return {"family": spec.family, "params": params}


# --------------------------------------------------------------------------- mixture helpers


def laplace_log_cdf(x, theta: float):
    b = 1.0 / math.sqrt(2.0 * theta)
    x = np.asarray(x, dtype=float)
    return np.where(x < 0, np.minimum(x, 0) / b - LN2, np.log1p(-0.5 * np.exp(-np.abs(x) / b)))


def laplace_ppf_log(log_u, theta: float):
    """Quantile of the Laplace margin of the exponential variance mixture, from ln u."""
    b = 1.0 / math.sqrt(2.0 * theta)
    l = np.asarray(log_u, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        lower = b * (l + LN2)
        upper = -b * (LN2 + np.log(-np.expm1(l)))
    return np.where(l <= -LN2, lower, upper)


def _log_mixture_orthant(R: np.ndarray, x: np.ndarray, theta: float, rel_accuracy: float) -> float:
    """ln P[sqrt(Z) Y <= x], Z ~ Exp(theta), by quadrature over v = ln Z."""
    if np.all(x == np.inf):
        return 0.0
    ln_theta = math.log(theta)
    inner_acc = max(rel_accuracy / 10, 1e-11)

    def f(v):
        s_half = math.exp(-0.5 * v)
        return ln_theta - theta * math.exp(v) + v + log_gaussian_tail_cdf(R, x * s_half, inner_acc)

    def bound(v):
        # P[Y <= z] <= min_i P[Y_i <= z_i]
        return ln_theta - theta * math.exp(v) + v + float(np.min(log_ndtr(x * math.exp(-0.5 * v))))

    grid = np.linspace(-40.0, math.log(2000.0 / theta), 90)
    ub = np.array([bound(v) for v in grid])
    vals = ub.copy()
    best = -math.inf
    for j in np.argsort(ub)[::-1]:
        if ub[j] < best - _CUT:
            break
        vals[j] = f(grid[j])
        best = max(best, vals[j])
    i = int(np.argmax(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    res = optimize.minimize_scalar(lambda v: -f(v), bounds=(lo, hi), method="bounded", options={"xatol": 1e-9})
    mode = float(res.x)
    fm = max(f(mode), best)
    if not np.isfinite(fm):
        return -math.inf
    if vals[i] > f(mode):
        mode = float(grid[i])
    left, right = grid[0], grid[-1]
    for j in range(i, -1, -1):
        if vals[j] - fm < -_CUT:
            left = grid[j]
            break
    for j in range(i, len(grid)):
        if vals[j] - fm < -_CUT:
            right = grid[j]
            break
    g = lambda v: math.exp(f(v) - fm)
    a, ea = quad(g, left, mode, epsabs=0, epsrel=inner_acc, limit=200)
    b, eb = quad(g, mode, right, epsabs=0, epsrel=inner_acc, limit=200)
    total = a + b
    if total <= 0 or (ea + eb) / total > rel_accuracy:
        raise AccuracyUnreachable("mixture quadrature could not certify the requested accuracy")
    return fm + math.log(total)


# --------------------------------------------------------------------------- evaluation


def _check_unit(u) -> np.ndarray:
    u = np.asarray(u, dtype=float).reshape(-1)
    if np.any(~np.isfinite(u)) or np.any(u < 0) or np.any(u > 1):
        raise DomainError("copula arguments must lie in [0, 1]")
    return u


def _check_dim(spec, n: int):
    dim = getattr(spec, "dim", n)
    if dim != n:
        raise ValidationError(f"spec has dimension {dim}, point has {n} coordinates")


def log_copula_cdf(spec: CopulaSpec, log_u, rel_accuracy: float = 1e-8) -> float:
    """ln C(u) from ln u (entries <= 0; -inf encodes u_i = 0)."""
    l = np.asarray(log_u, dtype=float).reshape(-1)
    if np.any(np.isnan(l)) or np.any(l > 0):
        raise DomainError("log-coordinates must be <= 0")
    _check_dim(spec, len(l))
    if np.any(l == -np.inf):
        return -math.inf
    if isinstance(spec, Independence):
        return float(l.sum())
    if isinstance(spec, Comonotone):
        return float(l.min())
    # u_i = 1 drops the coordinate (uniform margins)
    active = l < 0
    if not active.any():
        return 0.0
    if active.sum() == 1:
        return float(l[active][0])
    if isinstance(spec, Archimedean):
        return spec.generator.log_cdf(l[active])
    if isinstance(spec, GumbelEV):
        return -float(np.sum((-l[active]) ** spec.theta) ** (1.0 / spec.theta))
    R = spec.R[np.ix_(active, active)]
    if isinstance(spec, Gaussian):
        return log_gaussian_tail_cdf(R, ndtri_exp(l[active]), rel_accuracy)
    if isinstance(spec, GaussianMixtureSym):
        x = laplace_ppf_log(l[active], spec.theta)
        return _log_mixture_orthant(R, x, spec.theta, rel_accuracy)
    raise ValidationError(f"not a copula spec: {spec!r}")


def copula_cdf(spec: CopulaSpec, u, accuracy: float = 1e-8) -> float:
    """C(u_1, ..., u_n).  Closed-form families are exact to rounding; Gaussian and
    mixture families are integrated numerically to relative (hence absolute)
    error below ``accuracy``."""
    u = _check_unit(u)
    with np.errstate(divide="ignore"):
        return math.exp(log_copula_cdf(spec, np.log(u), accuracy))


def log_survival_copula_cdf(spec: CopulaSpec, u, rel_accuracy: float = 1e-8) -> float:
    """ln of the survival copula, ln P[U_1 > 1 - u_1, ..., U_n > 1 - u_n].

    Radially symmetric families reuse the copula itself.  Others go through
    inclusion-exclusion written as a signed sum of ``expm1(ln C(.))`` terms;
    the constant parts of the 2^n terms cancel exactly, which keeps the
    small-u regime free of catastrophic cancellation.
    """
    u = _check_unit(u)
    n = len(u)
    _check_dim(spec, n)
    if spec.radially_symmetric:
        with np.errstate(divide="ignore"):
            return log_copula_cdf(spec, np.log(u), rel_accuracy)
    if n > SURVIVAL_MAX_DIM:
        raise DimensionTooLarge(f"inclusion-exclusion limited to n <= {SURVIVAL_MAX_DIM}")
    with np.errstate(divide="ignore"):
        log_comp = np.log1p(-u)
    total = 0.0
    for size in range(1, n + 1):
        for subset in itertools.combinations(range(n), size):
            l = np.zeros(n)
            l[list(subset)] = log_comp[list(subset)]
            total += (-1) ** size * math.expm1(log_copula_cdf(spec, l, rel_accuracy))
    if total <= 0:
        return -math.inf
    return math.log(total)


def survival_copula_cdf(spec: CopulaSpec, u, accuracy: float = 1e-8) -> float:
    return math.exp(log_survival_copula_cdf(spec, u, accuracy))


def generator_phi(gen: ArchimedeanGenerator, u):
    return gen.phi(u)


def generator_phi_inv(gen: ArchimedeanGenerator, s):
    return gen.phi_inv(s)
