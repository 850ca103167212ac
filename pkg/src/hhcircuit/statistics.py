"""Empirical statistics of spike trains.

Distribution functions, inf-quantiles, segment counts, empirical Laplace
transforms, statistics of tuples of successive interspike intervals and the
truncated output sums that approximate the output process at spike times.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DomainError
from .neuron import SpikeTrain, output_path


class DegenerateDataError(DomainError):
    """Statistic undefined for the given sample, e.g. a zero median."""


@dataclass(frozen=True)
class EmpiricalDF:
    """Right-continuous empirical distribution function of a finite sample."""

    values: np.ndarray

    def __post_init__(self):
        v = np.sort(np.asarray(self.values, dtype=float).ravel())
        if np.any(np.isnan(v)):
            raise DomainError("sample contains NaN")
        object.__setattr__(self, "values", v)

    @classmethod
    def of(cls, sample) -> "EmpiricalDF":
        return cls(np.asarray(sample, dtype=float))

    @property
    def n(self) -> int:
        return self.values.size

    def __call__(self, v):
        if self.n == 0:
            raise DomainError("empty sample")
        return np.searchsorted(self.values, v, side="right") / self.n

    def quantile(self, alpha: float) -> float:
        return empirical_quantile(self, alpha)


@dataclass(frozen=True)
class SegmentCounts:
    """Spike counts xi_k of the segments ((k-1) T0, k T0], k = 1..K."""

    xi: np.ndarray
    t0: float
    k: int

    @property
    def total(self) -> int:
        return int(self.xi.sum())

    @property
    def mean(self) -> float:
        return float(self.xi.mean())


def interspike_intervals(train: SpikeTrain) -> np.ndarray:
    return np.diff(train.times)


def empirical_quantile(df: EmpiricalDF, alpha: float) -> float:
    """``inf{v : F(v) >= alpha}``, no interpolation."""
    if not 0 < alpha < 1:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    if df.n == 0:
        raise DomainError("empty sample")
    levels = np.arange(1, df.n + 1) / df.n
    return float(df.values[np.searchsorted(levels, alpha, side="left")])


def quantile_ratio(isis, alpha: float) -> float:
    """Spread between the upper and lower alpha-quantiles relative to the median."""
    isis = np.asarray(isis, dtype=float)
    if isis.size < 2:
        raise DomainError("need at least two interspike intervals")
    df = EmpiricalDF(isis)
    med = empirical_quantile(df, 0.5)
    if med <= 0:
        raise DegenerateDataError("median interspike interval is zero")
    return (empirical_quantile(df, 1 - alpha) - empirical_quantile(df, alpha)) / med


def segment_counts(train: SpikeTrain, t0: float, k: int) -> SegmentCounts:
    if not t0 > 0 or k < 1:
        raise DomainError("need t0 > 0 and k >= 1")
    if k * t0 > train.horizon * (1 + 1e-12):
        raise DomainError(f"horizon {train.horizon} shorter than K*T0 = {k * t0}")
    edges = np.arange(k + 1) * float(t0)
    cum = np.searchsorted(train.times, edges, side="right")
    return SegmentCounts(np.diff(cum).astype(np.int64), float(t0), int(k))


def empirical_laplace(sample) -> Callable:
    """Return ``v -> mean(exp(-v * x_i))`` for the given sample."""
    x = np.asarray(sample, dtype=float).ravel()
    if x.size == 0:
        raise DomainError("empty sample")

    def psi(v):
        v_arr = np.asarray(v, dtype=float)
        if np.any(v_arr < 0):
            raise DomainError("Laplace argument must be non-negative")
        out = np.exp(-np.multiply.outer(v_arr, x)).mean(axis=-1)
        return float(out) if out.ndim == 0 else out

    return psi


def spike_rate(train: SpikeTrain, t: float) -> float:
    if not t > 0:
        raise DomainError("t must be positive")
    return train.count(t) / t


@dataclass(frozen=True)
class TupleEDF:
    """Empirical law of L-tuples of successive interspike intervals."""

    tuples: np.ndarray  # shape (m, L)

    @property
    def dim(self) -> int:
        return self.tuples.shape[1]

    @property
    def m(self) -> int:
        return self.tuples.shape[0]

    def _box(self, v) -> np.ndarray:
        v = np.broadcast_to(np.asarray(v, dtype=float), (self.dim,))
        return np.all(self.tuples <= v, axis=1)

    def G_hat(self, v) -> float:
        """Fraction of tuples componentwise below ``v``."""
        return float(self._box(v).mean())

    def pattern_frequency(self, v, h: Callable) -> float:
        """Average of ``1{tuple <= v} * h(tuple)`` with a bounded functional ``|h| <= 1``."""
        inside = self._box(v)
        w = np.array([h(row) for row in self.tuples], dtype=float)
        if np.any(~np.isfinite(w)) or np.any(np.abs(w) > 1):
            raise DomainError("pattern functional must satisfy |h| <= 1")
        return float(np.mean(inside * w))


def tuple_edf(isis, L: int) -> TupleEDF:
    isis = np.asarray(isis, dtype=float)
    if L < 1:
        raise DomainError("L must be >= 1")
    m = isis.size - L + 1
    if m < 1:
        raise DomainError(f"need at least {L} interspike intervals, got {isis.size}")
    return TupleEDF(np.lib.stride_tricks.sliding_window_view(isis, L).copy())


def geometric_tail(c1: float, delta0: float, L: int) -> float:
    """sum_{l > L} exp(-c1 delta0 l)."""
    q = c1 * delta0
    return math.exp(-q * (L + 1)) / -math.expm1(-q)


@dataclass(frozen=True)
class OutputPairs:
    """Truncated output sums next to the exact output values at spike times.

    Row ``n`` of ``approx`` is ``(V_n, V_{n+1}^-)``; row ``n`` of ``exact``
    is the output just after spike ``n+L`` and just before spike ``n+L+1``
    (0-based spike indices).
    """

    approx: np.ndarray
    exact: np.ndarray
    gap: float
    bound: float

    def edf(self, v) -> float:
        """Bivariate empirical DF of the approximating pairs, by direct counting."""
        v = np.asarray(v, dtype=float)
        return float(np.mean(np.all(self.approx <= v, axis=1)))

    def tuples(self, J: int, exact: bool = False) -> np.ndarray:
        """(J+1)-tuples of consecutive pairs, shape (m - J, J + 1, 2)."""
        src = self.exact if exact else self.approx
        if J < 0 or J >= src.shape[0]:
            raise DomainError("J out of range")
        idx = np.arange(src.shape[0] - J)[:, None] + np.arange(J + 1)[None, :]
        return src[idx]


def output_pair_approximations(train: SpikeTrain, c1: float, L: int,
                               delta0: Optional[float] = None) -> OutputPairs:
    """Approximate output values at spike times by sums over the last L+1 spikes.

    The reported ``bound`` is the geometric tail ``sum_{l>L} exp(-c1 delta0 l)``
    with ``delta0`` taken from the train unless given.
    """
    t = train.times
    if L < 0:
        raise DomainError("L must be >= 0")
    if t.size < L + 2:
        raise DomainError(f"need at least L+2 = {L + 2} spikes, got {t.size}")
    d0 = train.delta0 if delta0 is None else delta0
    if not d0 > 0:
        raise DomainError("a positive refractory floor is needed for the tail bound")
    m = t.size - L - 1
    win = np.lib.stride_tricks.sliding_window_view(t, L + 1)[:m]  # tau_n .. tau_{n+L}
    after = np.exp(-c1 * (win[:, -1:] - win)).sum(axis=1)
    before = after * np.exp(-c1 * (t[L + 1:L + 1 + m] - win[:, -1]))
    approx = np.column_stack([after, before])
    path = output_path(train, c1)
    exact = np.column_stack([path.after_spike[L:L + m], path.before_spike[L + 1:L + 1 + m]])
    gap = float(np.max(np.abs(exact - approx)))
    return OutputPairs(approx, exact, gap, geometric_tail(c1, d0, L))
