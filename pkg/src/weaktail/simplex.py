"""Optimization over the probability simplex and the mixture budget polytope.

The closed-form tail dependence functions of the Gaussian and Gaussian
mixture copulas are values of small convex programs.  They are solved here
with an accelerated projected-gradient iteration (exact Euclidean
projections, adaptive restart, KKT-residual stopping), and a lattice search
is provided as an independent oracle.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import DimensionTooLarge, NoConvergence, NonPositiveDefinite, ValidationError

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 100_000
PD_THRESHOLD = 1e-10
SYM_TOL = 1e-12


def as_sym_matrix(a, correlation: bool = False) -> np.ndarray:
    """Validate and return a symmetric positive-definite matrix as a float array."""
    m = np.atleast_2d(np.asarray(a, dtype=float))
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValidationError("matrix has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(m))))
    if np.max(np.abs(m - m.T)) > SYM_TOL * scale:
        raise ValidationError("matrix is not symmetric")
    m = 0.5 * (m + m.T)
    if correlation and np.max(np.abs(np.diag(m) - 1.0)) > SYM_TOL:
        raise ValidationError("correlation matrix must have unit diagonal")
    eig_min = float(np.linalg.eigvalsh(m)[0])
    if eig_min <= PD_THRESHOLD:
        raise NonPositiveDefinite(f"smallest eigenvalue {eig_min:.3g} <= {PD_THRESHOLD:g}")
    return m


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {w >= 0, sum(w) = 1} (sort-based, exact)."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / ind > 0)[0][-1]
    tau = css[rho] / (rho + 1.0)
    return np.maximum(v - tau, 0.0)


def project_weighted_simplex(v: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {x >= 0, a.x = 1} for a strictly positive vector a.

    The solution is ``max(v - tau * a, 0)``; ``tau`` is located exactly among
    the breakpoints ``v_i / a_i`` of the piecewise-linear budget function.
    """
    v = np.asarray(v, dtype=float)
    a = np.asarray(a, dtype=float)
    bp = v / a
    order = np.argsort(bp)[::-1]
    # with the k largest breakpoints active: a.x = sum(a v) - tau * sum(a^2) over the active set
    av = np.cumsum((a * v)[order])
    aa = np.cumsum((a * a)[order])
    taus = (av - 1.0) / aa
    bps = bp[order]
    nxt = np.append(bps[1:], -np.inf)
    ok = (taus <= bps) & (taus >= nxt)
    k = int(np.nonzero(ok)[0][0]) if ok.any() else len(v) - 1
    return np.maximum(v - taus[k] * a, 0.0)


@dataclass
class SimplexSolution:
    value: float
    argmin: np.ndarray
    kkt_residual: float
    iterations: int


def _accelerated_pg(
    fun: Callable[[np.ndarray], float],
    grad: Callable[[np.ndarray], np.ndarray],
    project: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    tol: float,
    max_iter: int,
    lipschitz: float | None = None,
    polish: Callable[[np.ndarray], np.ndarray | None] | None = None,
):
    """FISTA with function-value restart.

    Stops when the fixed-point residual ``|x - P(x - grad f(x))|_inf`` of the
    projected-gradient map drops below ``tol``; that residual vanishes exactly
    at KKT points.  ``lipschitz=None`` turns on backtracking.
    """

    def residual(x):
        return float(np.max(np.abs(x - project(x - grad(x)))))

    L = lipschitz if lipschitz is not None else 1.0
    x = project(x0)
    fx = fun(x)
    y, t = x.copy(), 1.0
    for it in range(1, max_iter + 1):
        gy = grad(y)
        fy = fun(y)
        while True:
            xn = project(y - gy / L)
            d = xn - y
            fxn = fun(xn)
            if lipschitz is not None or fxn <= fy + gy @ d + 0.5 * L * (d @ d) + 1e-14 * abs(fy):
                break
            L *= 2.0
        if fxn > fx + 1e-15 * abs(fx) and t > 1.0:
            # momentum overshoot: restart from the last accepted point
            y, t = x.copy(), 1.0
            continue
        tn = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        y = xn + ((t - 1.0) / tn) * (xn - x)
        x, fx, t = xn, fxn, tn
        if polish is not None and it % 50 == 0:
            xp = polish(x)
            if xp is not None and residual(xp) < tol:
                return xp, residual(xp), it
        r = residual(x)
        if r < tol:
            if polish is not None:
                xp = polish(x)
                if xp is not None and fun(xp) <= fx and residual(xp) <= r:
                    x, r = xp, residual(xp)
            return x, r, it
        if lipschitz is None:
            L *= 0.9
    raise NoConvergence(f"KKT residual still above {tol:g} after {max_iter} iterations")


def _qp_polish(sigma: np.ndarray, w: np.ndarray) -> np.ndarray | None:
    # exact equality-constrained solve on the current support
    support = w > 1e-9 * w.max()
    sub = sigma[np.ix_(support, support)]
    try:
        y = np.linalg.solve(sub, np.ones(support.sum()))
    except np.linalg.LinAlgError:
        return None
    if y.sum() <= 0 or np.any(y <= 0):
        return None
    out = np.zeros_like(w)
    out[support] = y / y.sum()
    return out


def min_quadratic_on_simplex(sigma, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> SimplexSolution:
    """Minimize ``w' sigma w`` over the probability simplex.

    Returns a :class:`SimplexSolution`; only ``value`` is unique when the
    minimizing face is degenerate.
    """
    if tol <= 0:
        raise ValidationError("tol must be positive")
    s = as_sym_matrix(sigma)
    n = s.shape[0]
    if n == 1:
        return SimplexSolution(float(s[0, 0]), np.ones(1), 0.0, 0)
    lip = 2.0 * float(np.linalg.eigvalsh(s)[-1])
    w, r, it = _accelerated_pg(
        lambda w: float(w @ s @ w),
        lambda w: 2.0 * (s @ w),
        project_simplex,
        np.full(n, 1.0 / n),
        tol,
        max_iter,
        lipschitz=lip,
        polish=lambda w: _qp_polish(s, w),
    )
    return SimplexSolution(float(w @ s @ w), w, r, it)


@lru_cache(maxsize=None)
def _compositions(n: int, total: int) -> np.ndarray:
    """All nonnegative integer vectors of length n summing to total (cached for n <= 3)."""
    if n == 1:
        return np.array([[total]], dtype=np.int32)
    blocks = []
    for k in range(total + 1):
        sub = _compositions(n - 1, total - k)
        blocks.append(np.column_stack([np.full(len(sub), k, dtype=np.int32), sub]))
    return np.vstack(blocks)


def _lattice_min(objective, prefix: list[int], n: int, remaining: int, res: int) -> float:
    left = n - len(prefix)
    if left <= 3:
        sub = _compositions(left, remaining)
        pts = np.hstack([np.broadcast_to(np.array(prefix, dtype=np.int32), (len(sub), len(prefix))), sub])
        return float(objective(pts / res).min())
    return min(_lattice_min(objective, prefix + [k], n, remaining - k, res) for k in range(remaining + 1))


def brute_force_simplex_min(sigma, grid_resolution: int) -> float:
    """Minimum of ``w' sigma w`` over simplex points with coordinates in (1/res) * Z."""
    if grid_resolution < 2:
        raise ValidationError("grid_resolution must be >= 2")
    s = np.atleast_2d(np.asarray(sigma, dtype=float))
    n = s.shape[0]
    if n > 5:
        raise DimensionTooLarge(f"lattice search limited to n <= 5, got {n}")
    return simplex_lattice_min(lambda w: np.einsum("ij,jk,ik->i", w, s, w), n, grid_resolution)


def simplex_lattice_min(objective, n: int, grid_resolution: int) -> float:
    """Minimum of a vectorized ``objective(W)`` (rows of W on the simplex) over the lattice."""
    return _lattice_min(objective, [], n, grid_resolution, grid_resolution)


def c_star_theta(B, mu, theta: float, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> float:
    """Log-scale decay rate of ``P[sum_i exp(sqrt(Z) Y_i + mu_i Z) <= e^-k]``.

    ``max_w 2 theta / (sqrt(2 theta w'Bw + (mu.w)^2) - mu.w)`` over the simplex,
    computed as ``2 theta`` divided by the minimum of the (convex) denominator.
    """
    if theta <= 0:
        raise ValidationError("theta must be positive")
    b = as_sym_matrix(B)
    m = np.asarray(mu, dtype=float).reshape(-1)
    if m.size != b.shape[0]:
        raise ValidationError("mu and B have inconsistent dimensions")

    def fun(w):
        mw = m @ w
        return float(np.sqrt(2 * theta * (w @ b @ w) + mw * mw) - mw)

    def grad(w):
        mw = m @ w
        root = np.sqrt(2 * theta * (w @ b @ w) + mw * mw)
        return (2 * theta * (b @ w) + mw * m) / root - m

    n = b.shape[0]
    if n == 1:
        return 2 * theta / fun(np.ones(1))
    w, _, _ = _accelerated_pg(fun, grad, project_simplex, np.full(n, 1.0 / n), tol, max_iter)
    return 2 * theta / fun(w)


@dataclass(frozen=True)
class MixtureParams:
    """Gaussian mean-variance mixture parameters entering the mixture tail formula.

    ``mu_tilde`` holds the normalized means mu_i / sigma_i and ``theta`` the
    exponential decay rate of the mixing density.
    """

    R: np.ndarray
    mu_tilde: np.ndarray
    theta: float
    lam: np.ndarray

    def __post_init__(self):
        R = as_sym_matrix(self.R, correlation=True)
        mu = np.asarray(self.mu_tilde, dtype=float).reshape(-1)
        lam = np.asarray(self.lam, dtype=float).reshape(-1)
        if mu.size == 1 and R.shape[0] > 1:
            mu = np.full(R.shape[0], mu[0])
        if not (mu.size == lam.size == R.shape[0]):
            raise ValidationError("R, mu_tilde and lambda have inconsistent dimensions")
        if not self.theta > 0:
            raise ValidationError("theta must be positive")
        if np.any(lam <= 0) or not np.all(np.isfinite(lam)):
            raise ValidationError("lambda entries must be positive")
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "mu_tilde", mu)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "theta", float(self.theta))

    @property
    def budget_weights(self) -> np.ndarray:
        """Coefficients a_i of the budget constraint sum_i a_i v_i = 1."""
        m = self.mu_tilde
        return self.lam * (np.sqrt(2 * self.theta + m * m) - m)


def mixture_polytope_min(params: MixtureParams, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> float:
    """Minimum of ``sqrt(2 theta v'Rv + (mu.v)^2) - mu.v`` over the budget face.

    The feasible set is {v >= 0, sum_i a_i v_i = 1} with
    ``a_i = lambda_i (sqrt(2 theta + mu_i^2) - mu_i)``.  The objective is
    positively homogeneous of degree one, so this equals the minimum over
    {v >= 0, a.v >= 1}; the "<= 1" reading would give the trivial value 0 at v = 0.
    """
    R, m, theta = params.R, params.mu_tilde, params.theta
    a = params.budget_weights

    def fun(v):
        mv = m @ v
        return float(np.sqrt(2 * theta * (v @ R @ v) + mv * mv) - mv)

    def grad(v):
        mv = m @ v
        root = np.sqrt(2 * theta * (v @ R @ v) + mv * mv)
        return (2 * theta * (R @ v) + mv * m) / root - m

    n = R.shape[0]
    v0 = np.full(n, 1.0 / n) / a
    if n == 1:
        return fun(v0)
    v, _, _ = _accelerated_pg(fun, grad, lambda x: project_weighted_simplex(x, a), v0, tol, max_iter)
    return fun(v)
