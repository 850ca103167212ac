"""Quiet and regular-spiking regime tests.

Quiet: spike counts on K segments of length T0 must be few and in good fit
with an i.i.d. Poisson sample whose parameter is estimated from the data.
Fit is measured by integrated distances between empirical and Poisson
distribution functions and Laplace transforms; critical values are upper
quantiles of the same statistics under the Poisson hypothesis, obtained
by Monte Carlo.

Regular: many spikes, the median interspike interval accounts for the
observation window, and inter-quantile spreads are small relative to the
median.
"""

from __future__ import annotations

import enum
import json
import math
import os
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate, stats

from .errors import DomainError
from .neuron import SpikeTrain
from .rng import SeedLike, generator, run_seed
from .statistics import EmpiricalDF, SegmentCounts, empirical_quantile, quantile_ratio, segment_counts

LAMBDA_C = 0.0005
ALPHA_C = 0.0005
I_END = 5.5
C_DF_DEFAULT = 0.075
C_LT_DEFAULT = 0.15
RARE_MAX_SPIKES = 2
RARE_MAX_RATE = 0.0001
COUNT_LEVEL = 0.05
LT_TOL = 1e-8
CALIBRATION_BLOCK = 1000


def _check_lambda(lam):
    if not (math.isfinite(lam) and lam >= 0):
        raise DomainError(f"Poisson parameter must be finite and >= 0, got {lam}")


def poisson_cdf(lam: float, v: float) -> float:
    """P(xi <= v) for xi ~ Poisson(lam), ``v`` real and non-negative."""
    _check_lambda(lam)
    if v < 0:
        raise DomainError("v must be non-negative")
    if lam == 0:
        return 1.0
    return float(stats.poisson.cdf(math.floor(v), lam))


def poisson_laplace(lam: float, v):
    """E exp(-v xi) = exp(-lam (1 - exp(-v)))."""
    _check_lambda(lam)
    v_arr = np.asarray(v, dtype=float)
    if np.any(v_arr < 0):
        raise DomainError("v must be non-negative")
    out = np.exp(lam * np.expm1(-v_arr))
    return float(out) if out.ndim == 0 else out


def poisson_upper_quantile(alpha: float, lam: float) -> int:
    """Smallest n >= 0 with P(xi > n) <= alpha."""
    if not 0 < alpha <= 1:
        raise DomainError(f"alpha must lie in (0, 1], got {alpha}")
    _check_lambda(lam)
    if lam == 0:
        return 0
    n = 0
    while stats.poisson.sf(n, lam) > alpha:
        n += 1
    return n


def _counts_of(counts) -> np.ndarray:
    xi = counts.xi if isinstance(counts, SegmentCounts) else np.asarray(counts)
    xi = np.asarray(xi)
    if xi.size == 0:
        raise DomainError("need at least one segment count")
    if np.any(xi < 0):
        raise DomainError("counts must be non-negative")
    return xi


def delta_df(counts, mean: float, i_end: float = I_END) -> float:
    """Integral over [0, i_end] of |empirical DF - Poisson(mean) DF|.

    Both functions are constant on [j, j+1), so the integral is a finite sum.
    """
    xi = _counts_of(counts)
    _check_lambda(mean)
    j = np.arange(math.floor(i_end) + 1)
    lengths = np.minimum(j + 1.0, i_end) - j
    emp = np.searchsorted(np.sort(xi), j, side="right") / xi.size
    ref = np.ones(j.size) if mean == 0 else stats.poisson.cdf(j, mean)
    return float(np.sum(np.abs(emp - ref) * lengths))


def _delta_lt_hist(values: np.ndarray, weights: np.ndarray, mean: float, i_end: float) -> float:
    def integrand(v):
        return abs(float(np.dot(weights, np.exp(-v * values))) - math.exp(mean * math.expm1(-v)))

    val, _ = integrate.quad(integrand, 0.0, i_end, epsabs=LT_TOL, epsrel=0.0, limit=200)
    return float(val)


def delta_lt(counts, mean: float, i_end: float = I_END) -> float:
    """Integral over [0, i_end] of |empirical LT - Poisson(mean) LT|."""
    xi = _counts_of(counts)
    _check_lambda(mean)
    values, n = np.unique(xi, return_counts=True)
    return _delta_lt_hist(values.astype(float), n / xi.size, mean, i_end)


@dataclass(frozen=True)
class Calibration:
    lambda_c: float
    t0: float
    k: int
    i_end: float
    alpha_c: float
    replications: int
    seed: int
    c_df: float
    c_lt: float


def _upper_empirical_quantile(x: np.ndarray, alpha: float) -> float:
    # min{q : #(x > q) / R <= alpha}
    allowed = int(math.floor(alpha * x.size + 1e-9))
    return float(np.sort(x)[::-1][min(allowed, x.size - 1)])


def _poisson_by_inversion(rng, lam, size):
    if lam == 0:
        return np.zeros(size, dtype=np.int64)
    hi = poisson_upper_quantile(1e-300, lam) if lam < 700 else int(lam + 40 * math.sqrt(lam))
    cdf = stats.poisson.cdf(np.arange(hi + 1), lam)
    cdf[-1] = 1.0
    return np.searchsorted(cdf, rng.random(size), side="right").astype(np.int64)


def calibrate_quantiles(
    lambda_c: float = LAMBDA_C,
    t0: float = 250.0,
    k: int = 100,
    i_end: float = I_END,
    alpha_c: float = ALPHA_C,
    replications: int = 40_000,
    seed: int = 0,
    cache_path: Optional[str] = None,
) -> Calibration:
    """Monte Carlo upper ``alpha_c`` quantiles of the two fit statistics under Poisson counts.

    Each replication draws ``k`` i.i.d. Poisson(``lambda_c * t0``) counts and
    evaluates both statistics against the Poisson law with the sample mean
    as parameter. Replications come in blocks of 1000 with one independent
    stream per block. Statistics only depend on the count histogram, so
    each distinct histogram is evaluated once.

    If ``cache_path`` names an existing JSON file with matching inputs the
    stored values are returned; otherwise the result is written there.
    """
    key = dict(lambda_c=float(lambda_c), t0=float(t0), k=int(k), i_end=float(i_end),
               alpha_c=float(alpha_c), replications=int(replications), seed=int(seed))
    if cache_path and os.path.exists(cache_path):
        with open(cache_path) as fh:
            cached = json.load(fh)
        if all(cached.get(name) == value for name, value in key.items()):
            return Calibration(**key, c_df=float(cached["c_df"]), c_lt=float(cached["c_lt"]))
    if replications < 1 or k < 1:
        raise DomainError("need replications >= 1 and k >= 1")
    lam = lambda_c * t0
    _check_lambda(lam)
    s_df = np.empty(replications)
    s_lt = np.empty(replications)
    memo = {}
    for b, start in enumerate(range(0, replications, CALIBRATION_BLOCK)):
        n = min(CALIBRATION_BLOCK, replications - start)
        draws = _poisson_by_inversion(generator(run_seed(seed, b)), lam, n * k).reshape(n, k)
        for r, xi in enumerate(draws):
            hist = np.bincount(xi)
            key_h = hist.tobytes()
            if key_h not in memo:
                mean = float(xi.mean())
                values = np.nonzero(hist)[0]
                memo[key_h] = (delta_df(xi, mean, i_end),
                               _delta_lt_hist(values.astype(float), hist[values] / k, mean, i_end))
            s_df[start + r], s_lt[start + r] = memo[key_h]
    result = Calibration(**key, c_df=_upper_empirical_quantile(s_df, alpha_c),
                         c_lt=_upper_empirical_quantile(s_lt, alpha_c))
    if cache_path:
        with open(cache_path, "w") as fh:
            json.dump(asdict(result), fh, indent=2)
    return result


@dataclass(frozen=True)
class QuietConfig:
    t0: float = 250.0
    k: int = 100
    lambda_c: float = LAMBDA_C
    alpha_c: float = ALPHA_C
    i_end: float = I_END
    c_df: float = C_DF_DEFAULT
    c_lt: float = C_LT_DEFAULT

    def __post_init__(self):
        if not (self.t0 > 0 and self.k >= 1 and self.i_end > 0):
            raise DomainError("need t0 > 0, k >= 1, i_end > 0")
        if not (self.c_df > 0 and self.c_lt > 0):
            raise DomainError("critical values must be positive")

    @property
    def t1(self) -> float:
        return self.k * self.t0

    @classmethod
    def from_calibration(cls, cal: Calibration, **kw) -> "QuietConfig":
        return cls(t0=cal.t0, k=cal.k, lambda_c=cal.lambda_c, alpha_c=cal.alpha_c,
                   i_end=cal.i_end, c_df=cal.c_df, c_lt=cal.c_lt, **kw)


class QuietBranch(str, enum.Enum):
    EXTREMELY_RARE = "extremely_rare"
    POISSON_FIT = "poisson_fit"
    FAIL = "fail"


@dataclass(frozen=True)
class QuietVerdict:
    branch: QuietBranch
    n_t1: int
    lambda_tilde: float
    quantile_bound: int
    delta_df: float
    delta_lt: float
    extremely_rare: bool
    count_ok: bool
    df_ok: bool
    lt_ok: bool
    counts: tuple = field(repr=False, default=())

    @property
    def quiet(self) -> bool:
        return self.branch is not QuietBranch.FAIL


def classify_quiet(train: SpikeTrain, cfg: QuietConfig = QuietConfig()) -> QuietVerdict:
    """Apply the quiet-behaviour test to a train observed on [0, K T0]."""
    t1 = cfg.t1
    seg = segment_counts(train, cfg.t0, cfg.k)
    n = seg.total
    lam_t = n / t1
    bound = poisson_upper_quantile(COUNT_LEVEL, cfg.lambda_c * t1)
    plug = lam_t * cfg.t0
    d_df = delta_df(seg, plug, cfg.i_end)
    d_lt = delta_lt(seg, plug, cfg.i_end)
    rare = n <= RARE_MAX_SPIKES and lam_t <= RARE_MAX_RATE
    count_ok, df_ok, lt_ok = n <= bound, d_df <= cfg.c_df, d_lt <= cfg.c_lt
    if rare:
        branch = QuietBranch.EXTREMELY_RARE
    elif count_ok and df_ok and lt_ok:
        branch = QuietBranch.POISSON_FIT
    else:
        branch = QuietBranch.FAIL
    return QuietVerdict(branch, n, lam_t, bound, d_df, d_lt, rare, count_ok, df_ok, lt_ok,
                        tuple(int(c) for c in seg.xi))


@dataclass(frozen=True)
class RegularVerdict:
    n_t1: int
    median: float
    coverage: float
    r05: float
    r10: float
    r25: float
    coverage_ok: bool
    count_ok: bool
    r05_ok: bool
    r10_ok: bool
    r25_ok: bool
    u2: float
    u1: float

    @property
    def regular(self) -> bool:
        return self.coverage_ok and self.count_ok and self.r05_ok and self.r10_ok and self.r25_ok


def output_benchmarks(delta: float, c1: float) -> tuple:
    """(u2, u1): limits of the output just after and just before a spike for gap ``delta``."""
    if not (delta > 0 and c1 > 0):
        raise DomainError("delta and c1 must be positive")
    q = c1 * delta
    u2 = -1.0 / math.expm1(-q)
    return u2, u2 - 1.0


def classify_regular(train: SpikeTrain, t1: float, c1: float = 0.02) -> RegularVerdict:
    """Regular-spiking test on the window (0, t1].

    Too few spikes give a failing verdict with NaN statistics, never an error.
    """
    if train.horizon < t1 * (1 - 1e-12):
        raise DomainError(f"horizon {train.horizon} shorter than T1 = {t1}")
    times = train.times[: train.count(t1)]
    n = times.size
    isis = np.diff(times)
    nan = float("nan")
    if isis.size == 0:
        return RegularVerdict(n, nan, nan, nan, nan, nan, False, False, False, False, False, nan, nan)
    med = empirical_quantile(EmpiricalDF(isis), 0.5)
    cover = n * med / t1
    if isis.size >= 2 and med > 0:
        r05, r10, r25 = (quantile_ratio(isis, a) for a in (0.05, 0.1, 0.25))
    else:
        r05 = r10 = r25 = nan
    u2, u1 = output_benchmarks(med, c1) if med > 0 else (nan, nan)
    return RegularVerdict(
        n, med, cover, r05, r10, r25,
        coverage_ok=abs(cover - 1) <= 0.05,
        count_ok=n > 20,
        r05_ok=r05 <= 0.3, r10_ok=r10 <= 0.2, r25_ok=r25 <= 0.1,
        u2=u2, u1=u1,
    )
