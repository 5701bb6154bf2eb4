"""Weak tail dependence function chi: closed forms and the limit estimator.

chi(lambda) = lim_{u -> 0} min_i ln u^{lambda_i} / ln C(u^{lambda_1}, ..., u^{lambda_n})

Coordinates with lambda_i = 0 are dropped before evaluation: u^0 = 1 pins
that copula argument to 1, which removes it by the uniform-margin property.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .copula import (
    Archimedean,
    Comonotone,
    CopulaSpec,
    Gaussian,
    GaussianMixtureSym,
    GumbelEV,
    Independence,
    log_copula_cdf,
    log_survival_copula_cdf,
)
from .errors import NoConvergence, SequenceNotConverging, ValidationError, ZeroLambda
from .simplex import MixtureParams, min_quadratic_on_simplex, mixture_polytope_min

MIXTURE_AGREEMENT = 1e-6


@dataclass
class ChiResult:
    value: float
    method: str
    diagnostics: dict = field(default_factory=dict)


def as_lambda(lam) -> np.ndarray:
    """Validate an exponent vector: finite, nonnegative, not all zero."""
    lam = np.atleast_1d(np.asarray(lam, dtype=float)).reshape(-1)
    if lam.size == 0 or not np.all(np.isfinite(lam)) or np.any(lam < 0):
        raise ValidationError("lambda entries must be finite and >= 0")
    if not np.any(lam > 0):
        raise ValidationError("at least one lambda entry must be positive")
    return lam


def _clip(v: float) -> float:
    return min(1.0, max(0.0, v))


# --------------------------------------------------------------------------- closed forms


def chi_independence(lam) -> ChiResult:
    lam = as_lambda(lam)
    return ChiResult(float(lam.max() / lam.sum()), "closed_form")


def chi_comonotone(lam) -> ChiResult:
    as_lambda(lam)
    return ChiResult(1.0, "closed_form")


def chi_gaussian(R, lam, drop_zero: bool = True, tol: float = 1e-12) -> ChiResult:
    """max_i lambda_i * min_{w in simplex} w' S w with S_ij = R_ij / sqrt(lambda_i lambda_j)."""
    lam = as_lambda(lam)
    R = np.asarray(R, dtype=float)
    if R.shape != (lam.size, lam.size):
        raise ValidationError("R and lambda have inconsistent dimensions")
    keep = lam > 0
    if not keep.all():
        if not drop_zero:
            raise ZeroLambda("closed form needs all lambda_i > 0")
        R, lam = R[np.ix_(keep, keep)], lam[keep]
    sigma = R / np.sqrt(np.outer(lam, lam))
    sol = min_quadratic_on_simplex(sigma, tol=tol)
    return ChiResult(_clip(lam.max() * sol.value), "closed_form", {"argmin": sol.argmin.tolist()})


def chi_gaussian_mixture(params: MixtureParams) -> ChiResult:
    """Polytope form; for centered mixtures also the simplex form, cross-checked."""
    lam = params.lam
    value = lam.max() * mixture_polytope_min(params)
    diag = {"polytope": value}
    if np.all(params.mu_tilde == 0):
        sigma = params.R / np.outer(lam, lam)
        simplex_value = lam.max() * math.sqrt(min_quadratic_on_simplex(sigma, tol=1e-12).value)
        diag["simplex"] = simplex_value
        if abs(simplex_value - value) > MIXTURE_AGREEMENT:
            raise NoConvergence(f"polytope and simplex forms disagree: {value} vs {simplex_value}")
    return ChiResult(_clip(value), "closed_form", diag)


def chi_archimedean(alpha: float, lam) -> ChiResult:
    """alpha > 0: max lambda / (sum lambda^(1/alpha))^alpha; alpha = 0 (slow variation): 1."""
    lam = as_lambda(lam)
    if alpha < 0:
        raise ValidationError("alpha must be >= 0")
    if alpha == 0:
        return ChiResult(1.0, "closed_form")
    # normalize before powering; 1/alpha can be large
    r = lam / lam.max()
    return ChiResult(_clip(1.0 / float(np.sum(r ** (1.0 / alpha))) ** alpha), "closed_form")


def chi_extreme_value(spec: CopulaSpec, lam) -> ChiResult:
    """-max lambda / ln C(e^-lambda_1, ..., e^-lambda_n) for max-stable copulas."""
    if not isinstance(spec, (GumbelEV, Independence, Comonotone)):
        raise ValidationError("chi_extreme_value needs an extreme value copula")
    lam = as_lambda(lam)
    keep = lam > 0
    lc = log_copula_cdf(_marginal(spec, keep), -lam[keep])
    return ChiResult(_clip(-lam.max() / lc), "closed_form")


def chi_closed_form(spec: CopulaSpec, lam) -> ChiResult:
    """Dispatch to the closed form of the family (lower tail)."""
    if isinstance(spec, Independence):
        return chi_independence(lam)
    if isinstance(spec, Comonotone):
        return chi_comonotone(lam)
    if isinstance(spec, Gaussian):
        return chi_gaussian(spec.R, lam)
    if isinstance(spec, GaussianMixtureSym):
        lam = as_lambda(lam)
        keep = lam > 0
        R = spec.R[np.ix_(keep, keep)]
        return chi_gaussian_mixture(MixtureParams(R, np.zeros(keep.sum()), spec.theta, lam[keep]))
    if isinstance(spec, Archimedean):
        return chi_archimedean(spec.generator.alpha, lam)
    if isinstance(spec, GumbelEV):
        return chi_extreme_value(spec, lam)
    raise ValidationError(f"no closed form for {spec!r}")


def chi_upper_closed_form(spec: CopulaSpec, lam) -> ChiResult:
    """Upper-tail chi where it is known in closed form.

    Radially symmetric families share the lower-tail formula.  The Gumbel
    copula (Archimedean or extreme value) with theta > 1 has upper strong tail
    dependence 2 - 2^(1/theta) > 0, so its upper chi is 1.
    """
    if spec.radially_symmetric:
        return chi_closed_form(spec, lam)
    theta = spec.theta if isinstance(spec, GumbelEV) else (
        spec.generator.theta if isinstance(spec, Archimedean) and spec.family == "gumbel" else None)
    if theta is not None:
        return chi_independence(lam) if theta == 1 else chi_comonotone(lam)
    raise ValidationError(f"no closed-form upper chi for family {spec.family!r}")


# --------------------------------------------------------------------------- empirical limit


def _marginal(spec: CopulaSpec, keep: np.ndarray) -> CopulaSpec:
    if keep.all():
        return spec
    k = int(keep.sum())
    if isinstance(spec, Independence):
        return Independence(k)
    if isinstance(spec, Comonotone):
        return Comonotone(k)
    if isinstance(spec, Gaussian):
        return Gaussian(spec.R[np.ix_(keep, keep)])
    if isinstance(spec, GaussianMixtureSym):
        return GaussianMixtureSym(spec.R[np.ix_(keep, keep)], spec.theta)
    if isinstance(spec, Archimedean):
        if k == 1:
            return Independence(1)
        return Archimedean(spec.generator, k)
    if isinstance(spec, GumbelEV):
        return GumbelEV(spec.theta, k)
    raise ValidationError(f"not a copula spec: {spec!r}")


def default_u_sequence(spec: CopulaSpec) -> np.ndarray:
    if isinstance(spec, (Gaussian, GaussianMixtureSym)):
        return np.exp(-10.0 * np.arange(1, 16))
    return 10.0 ** -np.arange(2, 11, dtype=float)


def _as_log_u_sequence(u_sequence) -> np.ndarray:
    u = np.asarray(u_sequence, dtype=float).reshape(-1)
    if u.size < 4:
        raise ValidationError("u_sequence needs at least 4 values")
    if np.any(u <= 0) or np.any(u >= 1) or np.any(np.diff(u) >= 0):
        raise ValidationError("u_sequence must be strictly decreasing inside (0, 1)")
    return np.log(u)


def extrapolate_to_zero(s: np.ndarray, r: np.ndarray) -> float:
    """Value at s = 0 of the interpolating polynomial through the points (s_j, r_j)."""
    total = 0.0
    for j in range(len(s)):
        others = np.delete(s, j)
        total += r[j] * float(np.prod(others / (others - s[j])))
    return total


def _limit_of_ratios(log_u: np.ndarray, ratios: np.ndarray, accuracy: float) -> ChiResult:
    # r(u) approaches chi at rate (ln 1/u)^(-1/2) for slowly varying generators and
    # ~ ln ln(1/u) / ln(1/u) for the Gaussian; a quadratic in s = (ln 1/u)^(-1/2)
    # covers both
    s = (-log_u) ** -0.5
    ext = extrapolate_to_zero(s[-3:], ratios[-3:])
    prev = extrapolate_to_zero(s[-4:-1], ratios[-4:-1])
    h = 1.0 / (-log_u[-2:])
    two_point = ratios[-1] - h[1] * (ratios[-1] - ratios[-2]) / (h[1] - h[0])
    diag = {
        "u": np.exp(log_u).tolist(),
        "log_u": log_u.tolist(),
        "ratios": ratios.tolist(),
        "raw_last": float(ratios[-1]),
        "extrapolant": float(ext),
        "previous_extrapolant": float(prev),
        "two_point_extrapolant": float(two_point),
        "converged": bool(abs(ext - ratios[-1]) < accuracy),
    }
    if abs(ext - prev) > 10 * accuracy:
        raise SequenceNotConverging(
            f"successive extrapolants {prev:.6g} and {ext:.6g} differ by more than {10 * accuracy:g}")
    return ChiResult(_clip(float(ext)), "empirical", diag)


def _chi_empirical(spec, lam, u_sequence, accuracy, log_cdf) -> ChiResult:
    lam = as_lambda(lam)
    if lam.size != spec.dim:
        raise ValidationError(f"lambda has {lam.size} entries, copula has dimension {spec.dim}")
    if u_sequence is None:
        u_sequence = default_u_sequence(spec)
    log_u = _as_log_u_sequence(u_sequence)
    keep = lam > 0
    sub, lam_k = _marginal(spec, keep), lam[keep]
    rel_acc = min(1e-9, accuracy * 1e-3)
    ratios = np.array([lam_k.max() * lu / log_cdf(sub, lam_k * lu, rel_acc) for lu in log_u])
    return _limit_of_ratios(log_u, ratios, accuracy)


def chi_empirical(spec: CopulaSpec, lam, u_sequence=None, accuracy: float = 1e-3) -> ChiResult:
    """Estimate chi from the defining limit, using log-scale copula evaluation."""
    return _chi_empirical(spec, lam, u_sequence, accuracy, log_copula_cdf)


def chi_upper_empirical(spec: CopulaSpec, lam, u_sequence=None, accuracy: float = 1e-3) -> ChiResult:
    """Same as :func:`chi_empirical` with the survival copula (upper tail)."""

    def log_surv(sub, log_u, rel_acc):
        return log_survival_copula_cdf(sub, np.exp(log_u), rel_acc)

    return _chi_empirical(spec, lam, u_sequence, accuracy, log_surv)


def lambda_L(spec: CopulaSpec, u_sequence=None, accuracy: float = 1e-3) -> float:
    """Strong lower tail dependence coefficient lim C(u, ..., u) / u.

    The last ratio along ``u_sequence`` is returned.  For Archimedean copulas
    the generator form phi^-1(n t) / phi^-1(t), t = phi(u), is evaluated too
    and must agree to 1e-3.
    """
    if u_sequence is None:
        u_sequence = default_u_sequence(spec)
    log_u = _as_log_u_sequence(u_sequence)
    n = spec.dim
    ratios = np.array([math.exp(log_copula_cdf(spec, np.full(n, lu)) - lu) for lu in log_u])
    if abs(ratios[-1] - ratios[-2]) > 10 * accuracy:
        raise SequenceNotConverging(f"C(u,...,u)/u still moving: {ratios[-2]:.6g} -> {ratios[-1]:.6g}")
    if isinstance(spec, Archimedean):
        gen = spec.generator
        t = float(gen.phi_log(log_u[-1]))
        gen_ratio = math.exp(float(gen.log_phi_inv(n * t) - gen.log_phi_inv(t)))
        if abs(gen_ratio - ratios[-1]) > 1e-3:
            raise NoConvergence(f"generator ratio {gen_ratio} disagrees with C(u,u)/u {ratios[-1]}")
    return float(ratios[-1])
