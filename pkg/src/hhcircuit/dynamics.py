"""Deterministic Hodgkin-Huxley neuron with constant signal.

State variables are the membrane potential ``v`` and the gating variables
``n, m, h`` (Izhikevich constants)::

    dV = a dt - F(V, n, m, h) dt
    dj = [alpha_j(V) (1 - j) - beta_j(V) j] dt,   j in {n, m, h}

    F(v, n, m, h) = 36 n^4 (v + 12) + 120 m^3 h (v - 120) + 0.3 (v - 10.6)

The equilibrium for signal ``a`` is found by inverting
``F_inf(v) = F(v, n_inf(v), m_inf(v), h_inf(v))``, which is strictly
increasing on the simulation box ``[-12, 120]``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import _kernels as K
from .errors import DomainError, IntegrationBlowup
from .rng import SeedLike, generator, scan_seed

V_BOX = (-12.0, 120.0)
DEFAULT_DT = 0.001
DEFAULT_DELTA0 = 1.0

_RATES = {
    "n": (K.alpha_n, K.beta_n),
    "m": (K.alpha_m, K.beta_m),
    "h": (K.alpha_h, K.beta_h),
}


@dataclass(frozen=True)
class GateRates:
    alpha: float
    beta: float


@dataclass(frozen=True)
class BioState:
    """Biological part (V, n, m, h) of the neuron state."""

    v: float
    n: float
    m: float
    h: float

    def as_array(self) -> np.ndarray:
        return np.array([self.v, self.n, self.m, self.h], dtype=float)

    @classmethod
    def from_array(cls, arr) -> "BioState":
        return cls(float(arr[0]), float(arr[1]), float(arr[2]), float(arr[3]))


@dataclass(frozen=True)
class EquilibriumPoint:
    a: float
    v: float
    n: float
    m: float
    h: float

    @property
    def state(self) -> BioState:
        return BioState(self.v, self.n, self.m, self.h)


class Attractor(str, enum.Enum):
    EQUILIBRIUM = "equilibrium"
    ORBIT = "orbit"


@dataclass(frozen=True)
class AttractorVerdict:
    """Outcome of :func:`classify_attractor`.

    ``converged`` records whether the final state lies within the distance
    threshold of the equilibrium; it is informative only for the
    equilibrium kind.
    """

    kind: Attractor
    spike_count_tail: int
    distance_to_equilibrium: float
    converged: bool


@dataclass
class DeterministicRun:
    final: BioState
    spike_times: np.ndarray
    trajectory: Optional[np.ndarray] = None  # rows (t, v, n, m, h)


def _check_finite(v, name="v"):
    if not math.isfinite(v):
        raise DomainError(f"{name} must be finite, got {v!r}")


def gate_rates(gate: str, v: float) -> GateRates:
    """Opening and closing rates of gate ``'n'``, ``'m'`` or ``'h'`` at potential ``v``.

    The removable singularities of ``alpha_n`` at ``v = 10`` and ``alpha_m``
    at ``v = 25`` are evaluated through a Taylor expansion of ``x/(e^x - 1)``.
    """
    try:
        a, b = _RATES[gate]
    except KeyError:
        raise DomainError(f"unknown gate {gate!r}; expected 'n', 'm' or 'h'") from None
    v = float(v)
    _check_finite(v)
    return GateRates(a(v), b(v))


def ionic_current(s: BioState) -> float:
    for name in ("v", "n", "m", "h"):
        _check_finite(getattr(s, name), name)
    return K.ionic_current(float(s.v), float(s.n), float(s.m), float(s.h))


def gating_steady_state(v: float) -> tuple:
    """(n_inf, m_inf, h_inf) at fixed potential ``v``."""
    out = []
    for gate in "nmh":
        r = gate_rates(gate, v)
        out.append(r.alpha / (r.alpha + r.beta))
    return tuple(out)


def f_infinity(v: float) -> float:
    n, m, h = gating_steady_state(v)
    return K.ionic_current(float(v), n, m, h)


def equilibrium_point(a: float, tol: float = 1e-10) -> EquilibriumPoint:
    """Equilibrium of the deterministic system under signal ``a``.

    Solves ``F_inf(v) = a`` by bisection on ``[-12, 120]``.

    Raises
    ------
    DomainError
        If ``a`` is not finite or ``F_inf`` does not straddle ``a`` on the box.
    """
    a = float(a)
    _check_finite(a, "a")
    lo, hi = V_BOX
    f_lo, f_hi = f_infinity(lo) - a, f_infinity(hi) - a
    if f_lo > 0 or f_hi < 0:
        raise DomainError(
            f"signal a={a} outside F_inf range [{f_lo + a:.6g}, {f_hi + a:.6g}] on {V_BOX}"
        )
    v = 0.5 * (lo + hi)
    for _ in range(200):
        v = 0.5 * (lo + hi)
        r = f_infinity(v) - a
        if abs(r) <= tol:
            break
        if r < 0:
            lo = v
        else:
            hi = v
        if hi - lo <= 4 * np.finfo(float).eps * max(1.0, abs(v)):
            break
    n, m, h = gating_steady_state(v)
    return EquilibriumPoint(a=a, v=v, n=n, m=m, h=h)


def vector_field(s: BioState, a: float) -> np.ndarray:
    """Right-hand side (dV, dn, dm, dh) of the deterministic system."""
    v, n, m, h = float(s.v), float(s.n), float(s.m), float(s.h)
    return np.array([
        a - K.ionic_current(v, n, m, h),
        K.alpha_n(v) * (1 - n) - K.beta_n(v) * n,
        K.alpha_m(v) * (1 - m) - K.beta_m(v) * m,
        K.alpha_h(v) * (1 - h) - K.beta_h(v) * h,
    ])


def random_bio_state(rng: np.random.Generator) -> BioState:
    """Uniform draw on (-12, 120) x (0, 1)^3."""
    u = rng.random(4)
    lo, hi = V_BOX
    return BioState(lo + (hi - lo) * u[0], u[1], u[2], u[3])


def _n_steps(t_end, dt):
    n = int(round(t_end / dt))
    if n < 1:
        raise DomainError(f"t_end={t_end} shorter than one step dt={dt}")
    return n


def integrate_deterministic(
    s0: BioState,
    a: float,
    dt: float = DEFAULT_DT,
    t_end: float = 1000.0,
    delta0: float = DEFAULT_DELTA0,
    record_every: Optional[int] = None,
) -> DeterministicRun:
    """Explicit Euler integration with gating clamped to [0, 1].

    Spike times are detected with the same m/h crossing state machine the
    stochastic neuron uses.
    """
    if not (0 < dt <= 0.01):
        raise DomainError(f"dt must lie in (0, 0.01], got {dt}")
    if not t_end > 0:
        raise DomainError("t_end must be positive")
    nsteps = _n_steps(t_end, dt)
    state = s0.as_array()
    det = np.array([K.ARMED, -np.inf])
    spikes = np.empty(int(nsteps * dt / delta0) + 2)
    rec_every = int(record_every or 0)
    rec = np.empty((nsteps // rec_every if rec_every else 0, 5))
    k, r, status = K.run_deterministic(state, det, float(a), float(dt), nsteps, 0,
                                       float(delta0), spikes, rec_every, rec)
    if status != K.OK:
        raise IntegrationBlowup(status, (status + 1) * dt)
    traj = None
    if rec_every:
        traj = np.vstack([np.concatenate([[0.0], s0.as_array()]), rec[:r]])
    return DeterministicRun(BioState.from_array(state), spikes[:k].copy(), traj)


def classify_attractor(
    a: float,
    seed: SeedLike,
    burn_in: float = 1000.0,
    tail: float = 1000.0,
    dt: float = DEFAULT_DT,
    spike_threshold: int = 3,
    distance_threshold: float = 1e-3,
    delta0: float = DEFAULT_DELTA0,
) -> AttractorVerdict:
    """Decide whether a random start is attracted by the orbit or the equilibrium.

    The start is uniform on (-12, 120) x (0, 1)^3. After ``burn_in`` the
    spikes in a window of length ``tail`` are counted; at least
    ``spike_threshold`` of them means orbit.
    """
    if not (0 < a <= 20):
        raise DomainError(f"a must lie in (0, 20], got {a}")
    s0 = random_bio_state(generator(seed))
    run = integrate_deterministic(s0, a, dt=dt, t_end=burn_in + tail, delta0=delta0)
    n_tail = int(np.count_nonzero(run.spike_times > burn_in))
    eq = equilibrium_point(a).state
    dist = float(np.max(np.abs(run.final.as_array() - eq.as_array())))
    kind = Attractor.ORBIT if n_tail >= spike_threshold else Attractor.EQUILIBRIUM
    return AttractorVerdict(kind, n_tail, dist, dist <= distance_threshold)


def bistability_scan(a_grid: Sequence[float], n_trials: int, seed: SeedLike, **opts) -> np.ndarray:
    """Fraction of random starts attracted by the orbit, for each signal in ``a_grid``.

    Trial ``j`` at grid position ``i`` uses its own stream derived from
    ``(seed, i, j)``. Extra keyword arguments go to :func:`classify_attractor`.
    """
    if n_trials < 10:
        raise DomainError("n_trials must be at least 10")
    out = np.empty(len(a_grid))
    for i, a in enumerate(a_grid):
        hits = sum(
            classify_attractor(a, scan_seed(seed, i, j), **opts).kind is Attractor.ORBIT
            for j in range(n_trials)
        )
        out[i] = hits / n_trials
    return out
