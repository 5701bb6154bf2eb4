"""Log-scale tail predictions and a reproducible Monte Carlo harness.

For a vector with copula C and margins F_k with ln F_k ~ lambda_k ln F_0,

    ln P[max X <= t] / min_k ln F_k(t)  ->  1 / chi(lambda)
    ln P[min X >= t] / min_k ln Fbar_k(t)  ->  1 / chibar(lambda)

and the same lower-tail rate holds for P[X in tA] whenever
[0,k]^n is inside A and A inside [0,K]^n (slowly varying ln F_k).
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import stats

from .chi import ChiResult, chi_closed_form, chi_empirical, chi_upper_closed_form, chi_upper_empirical
from .copula import CopulaSpec
from .errors import InsufficientData, ValidationError
from .samplers import MarginSpec, Sampler, copula_sampler, with_margins

CSV_HEADER = ("threshold", "p_hat", "stderr", "hits", "samples")
DEFAULT_CHUNK = 1 << 18
MIN_SAMPLES = 10_000


@dataclass(frozen=True)
class FunctionalRegion:
    """Tail event of a functional of X.

    kind "min": min X >= t (upper tail); "max": max X <= t; "sum": sum X <= t;
    "region": X in tA, with ``member(y)`` testing y in A row-wise and
    [0,k]^n in A in [0,K]^n.
    """

    kind: str
    k: float | None = None
    K: float | None = None
    member: Callable | None = None

    def __post_init__(self):
        if self.kind not in ("min", "max", "sum", "region"):
            raise ValidationError(f"unknown functional {self.kind!r}")
        if self.kind == "region":
            if self.member is None or self.k is None or self.K is None:
                raise ValidationError("region functional needs member, k and K")
            if not 0 < self.k < self.K < math.inf:
                raise ValidationError("region bounds need 0 < k < K < inf")

    @property
    def upper(self) -> bool:
        return self.kind == "min"

    def statistic(self, x: np.ndarray) -> np.ndarray | None:
        if self.kind == "min":
            return x.min(axis=1)
        if self.kind == "max":
            return x.max(axis=1)
        if self.kind == "sum":
            return x.sum(axis=1)
        return None


def simplex_region(n: int) -> FunctionalRegion:
    """A = {x >= 0, sum x <= 1}; P[X in tA] = P[X_1 + ... + X_n <= t] for nonnegative X."""
    return FunctionalRegion(
        "region", k=1.0 / n, K=1.0,
        member=lambda y: np.all(y >= 0, axis=-1) & (np.sum(y, axis=-1) <= 1.0))


def region_indicator(functional: FunctionalRegion, x, t: float):
    """True iff x lies in the tail event at scale t (x may be a batch of rows)."""
    x = np.asarray(x, dtype=float)
    if functional.kind == "min":
        return np.min(x, axis=-1) >= t
    if functional.kind == "max":
        return np.max(x, axis=-1) <= t
    if functional.kind == "sum":
        return np.sum(x, axis=-1) <= t
    return functional.member(x / t)


@dataclass
class TailCurve:
    thresholds: np.ndarray
    hits: np.ndarray
    samples: int
    seed: int | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def p_hat(self) -> np.ndarray:
        return self.hits / self.samples

    @property
    def stderr(self) -> np.ndarray:
        p = self.p_hat
        return np.sqrt(p * (1.0 - p) / self.samples)

    @property
    def zero_hit(self) -> np.ndarray:
        return self.hits == 0

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for t, p, s, h in zip(self.thresholds, self.p_hat, self.stderr, self.hits):
            w.writerow(["%.17g" % t, "%.17g" % p, "%.17g" % s, int(h), self.samples])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())

    @classmethod
    def from_csv(cls, text: str) -> "TailCurve":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or tuple(rows[0]) != CSV_HEADER:
            raise ValidationError("not a tail curve CSV")
        body = rows[1:]
        samples = {int(r[4]) for r in body}
        if len(samples) != 1:
            raise ValidationError("inconsistent sample counts")
        return cls(np.array([float(r[0]) for r in body]), np.array([int(r[3]) for r in body]), samples.pop())


@dataclass
class SlopeFit:
    slope: float
    intercept: float
    r_squared: float
    rows_used: np.ndarray


def fit_log_slope(curve: TailCurve, min_hits: int = 20, log_marginal=None) -> SlopeFit:
    """OLS of ln p_hat against ln t, or against ``log_marginal`` (callable of t or array) when given."""
    t = np.asarray(curve.thresholds, dtype=float)
    if log_marginal is None:
        if np.any(t <= 0):
            raise ValidationError("ln t needs positive thresholds; pass log_marginal")
        x = np.log(t)
    elif callable(log_marginal):
        x = np.asarray(log_marginal(t), dtype=float)
    else:
        x = np.asarray(log_marginal, dtype=float)
    rows = np.flatnonzero((curve.hits >= min_hits) & (curve.hits < curve.samples) & np.isfinite(x))
    if rows.size < 3:
        raise InsufficientData(f"{rows.size} rows with at least {min_hits} hits; need 3")
    res = stats.linregress(x[rows], np.log(curve.p_hat[rows]))
    return SlopeFit(float(res.slope), float(res.intercept), float(res.rvalue ** 2), rows)


def predicted_inverse_chi(chi: ChiResult | float) -> float:
    """1/chi, the limit of ln P[event] / min_k ln P[marginal event]; +inf when chi = 0."""
    v = chi.value if isinstance(chi, ChiResult) else float(chi)
    return math.inf if v == 0 else 1.0 / v


def _chunk_counts(sampler, functional, thresholds, seq, size):
    x = sampler(np.random.Generator(np.random.Philox(seq)), size)
    s = functional.statistic(x)
    if s is None:
        return np.array([np.count_nonzero(functional.member(x / t)) for t in thresholds], dtype=np.int64)
    s = np.sort(s)
    if functional.upper:
        return (size - np.searchsorted(s, thresholds, side="left")).astype(np.int64)
    return np.searchsorted(s, thresholds, side="right").astype(np.int64)


def mc_tail_curve(sampler: Sampler, functional: FunctionalRegion, thresholds, samples: int, seed: int,
                  workers: int = 1, chunk: int = DEFAULT_CHUNK, metadata: dict | None = None) -> TailCurve:
    """Hit counts of the tail event at every threshold, all on one sample stream.

    Samples are drawn in fixed-size chunks, each from its own Philox stream
    spawned from ``seed``; integer counts are summed, so the result depends on
    (seed, samples, chunk) only and not on the number of workers.
    """
    thresholds = np.asarray(thresholds, dtype=float)
    if samples < MIN_SAMPLES:
        raise ValidationError(f"samples must be >= {MIN_SAMPLES}")
    if thresholds.size == 0 or np.any(np.diff(thresholds) <= 0):
        raise ValidationError("thresholds must be strictly increasing")
    sizes = [chunk] * (samples // chunk) + ([samples % chunk] if samples % chunk else [])
    seqs = np.random.SeedSequence(seed).spawn(len(sizes))
    job = lambda a: _chunk_counts(sampler, functional, thresholds, *a)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, zip(seqs, sizes)))
    else:
        parts = [job(a) for a in zip(seqs, sizes)]
    hits = np.sum(parts, axis=0)
    meta = {"chunk": chunk, "workers": workers, "functional": functional.kind}
    meta.update(metadata or {})
    return TailCurve(thresholds, hits, samples, seed, meta)


def marginal_log_tail(margins: list[MarginSpec], upper: bool) -> Callable:
    """t -> min_k ln P[X_k in tail at t]."""
    def f(t):
        t = np.asarray(t, dtype=float)
        vals = [m.log_survival(t) if upper else m.log_cdf(t) for m in margins]
        return np.min(vals, axis=0)
    return f


@dataclass
class TheoremReport:
    chi: ChiResult
    predicted: float
    fit: SlopeFit
    curve: TailCurve

    @property
    def agreement(self) -> float:
        return self.fit.slope / self.predicted


def theorem_check(spec: CopulaSpec, margins: list[MarginSpec], functional: FunctionalRegion, thresholds,
                  samples: int, seed: int, workers: int = 1, min_hits: int = 20) -> TheoremReport:
    """Compare the fitted log-slope of a simulated tail curve with the predicted 1/chi."""
    if len(margins) != spec.dim:
        raise ValidationError("one margin per copula coordinate is required")
    if functional.kind in ("sum", "region") and not all(m.slow_varying for m in margins):
        raise ValidationError("sum and region functionals need slowly varying ln F_k")
    lam = [m.lambda_slope for m in margins]
    upper = functional.upper
    try:
        chi = chi_upper_closed_form(spec, lam) if upper else chi_closed_form(spec, lam)
    except ValidationError:
        chi = chi_upper_empirical(spec, lam) if upper else chi_empirical(spec, lam)
    curve = mc_tail_curve(with_margins(copula_sampler(spec), margins), functional, thresholds,
                          samples, seed, workers)
    fit = fit_log_slope(curve, min_hits, marginal_log_tail(margins, upper))
    return TheoremReport(chi, predicted_inverse_chi(chi), fit, curve)
