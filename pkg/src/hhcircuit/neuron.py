"""Stochastic Hodgkin-Huxley neuron driven by Ornstein-Uhlenbeck input.

The input increment ``dY = theta dt + dX`` replaces ``a dt`` of the
deterministic model, where ``dX = -tau X dt + sigma dW``. Together with
(V, n, m, h) the OU coordinate X forms a 5-dimensional Markov state.

Spikes are the stopping times

    tau_j   = inf{t > s_{j-1}        : m_t > h_t}
    s_j     = inf{t > tau_j + delta0 : m_t < h_t}

evaluated on the Euler grid, so consecutive spikes are more than
``delta0`` apart. The output process jumps by one at every spike and decays
at rate ``c1`` in between.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from . import _kernels as K
from .dynamics import DEFAULT_DELTA0, DEFAULT_DT, BioState, random_bio_state
from .errors import DomainError, IntegrationBlowup
from .rng import SeedLike, generator

CHUNK_STEPS = 1 << 20


@dataclass(frozen=True)
class NoiseParams:
    """Signal ``theta`` and OU parameters ``tau`` (back-driving force), ``sigma`` (volatility)."""

    theta: float
    tau: float
    sigma: float

    def __post_init__(self):
        for name in ("theta", "tau", "sigma"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")
        if self.theta <= 0:
            raise DomainError("theta must be positive")
        if self.tau <= 0:
            raise DomainError("tau must be positive")
        # sigma = 0 is allowed: it switches the noise off
        if self.sigma < 0:
            raise DomainError("sigma must be non-negative")

    @property
    def stationary_sd(self) -> float:
        """Standard deviation of the invariant law N(0, sigma^2 / (2 tau))."""
        return self.sigma / math.sqrt(2.0 * self.tau)


@dataclass(frozen=True)
class FullState:
    bio: BioState
    x: float

    def as_array(self) -> np.ndarray:
        return np.array([self.bio.v, self.bio.n, self.bio.m, self.bio.h, self.x], dtype=float)

    @classmethod
    def from_array(cls, arr) -> "FullState":
        return cls(BioState.from_array(arr[:4]), float(arr[4]))


@dataclass(frozen=True)
class SpikeTrain:
    """Spike times in ``(0, horizon]``.

    ``delta0`` is the refractory floor the detector enforced; consecutive
    times must be more than ``delta0`` apart.
    """

    times: np.ndarray
    horizon: float
    delta0: float = 0.0

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        object.__setattr__(self, "times", t)
        if t.ndim != 1:
            raise DomainError("spike times must be one-dimensional")
        if not self.horizon > 0:
            raise DomainError("horizon must be positive")
        if t.size:
            if t[0] <= 0 or t[-1] > self.horizon:
                raise DomainError("spike times must lie in (0, horizon]")
            if np.any(np.diff(t) <= self.delta0):
                raise DomainError("spike times must be increasing with gaps > delta0")

    def __len__(self):
        return self.times.size

    def count(self, t: float) -> int:
        """N_t, the number of spikes in (0, t]."""
        return int(np.searchsorted(self.times, t, side="right"))

    def restrict(self, horizon: float) -> "SpikeTrain":
        """The same train observed only up to ``horizon``."""
        if horizon > self.horizon:
            raise DomainError("cannot extend a train beyond its horizon")
        return SpikeTrain(self.times[: self.count(horizon)], horizon, self.delta0)


@dataclass(frozen=True)
class OutputPath:
    """Output process sampled on a grid and at the spike times.

    ``after_spike[l]`` is U at the l-th spike, ``before_spike[l]`` its left limit.
    """

    c1: float
    u0: float
    spike_times: np.ndarray
    after_spike: np.ndarray
    before_spike: np.ndarray
    grid: np.ndarray = field(default_factory=lambda: np.empty(0))
    values: np.ndarray = field(default_factory=lambda: np.empty(0))

    def at(self, t) -> np.ndarray:
        """U(t), exact, for scalar or array ``t`` >= 0."""
        t = np.asarray(t, dtype=float)
        j = np.searchsorted(self.spike_times, t, side="right") - 1
        base_t = np.where(j >= 0, self.spike_times[np.maximum(j, 0)] if self.spike_times.size else 0.0, 0.0)
        base_u = np.where(j >= 0, self.after_spike[np.maximum(j, 0)] if self.after_spike.size else 0.0, self.u0)
        return base_u * np.exp(-self.c1 * (t - base_t))


class Phase(str, enum.Enum):
    SEEKING_UP = "below_seeking_up"
    SEEKING_DOWN = "above_seeking_down"


@dataclass(frozen=True)
class DetectorState:
    phase: Phase = Phase.SEEKING_UP
    last_spike: float = -math.inf
    delta0: float = DEFAULT_DELTA0


@dataclass
class NeuronRun:
    train: SpikeTrain
    final: FullState
    detector: DetectorState
    trajectory: Optional[np.ndarray] = None  # rows (t, v, n, m, h, x)


def ou_step(x: float, p: NoiseParams, dt: float, gaussian: float) -> float:
    """Euler-Maruyama step x' = x - tau x dt + sigma sqrt(dt) z."""
    if not dt > 0:
        raise DomainError("dt must be positive")
    return K.ou_step(float(x), p.tau, p.sigma, float(dt), math.sqrt(dt), float(gaussian))


def neuron_step(s: FullState, drift: float, p: NoiseParams, dt: float, gaussian: float) -> FullState:
    """One Euler step of the 5-dimensional system under effective signal ``drift``.

    ``drift`` is the constant signal for a single neuron or the current input
    A_t of a circuit neuron.
    """
    x = float(s.x)
    xn = ou_step(x, p, dt, gaussian)
    vn, nn, mn, hn = K.bio_step(float(s.bio.v), float(s.bio.n), float(s.bio.m), float(s.bio.h),
                                float(drift), xn - x, float(dt))
    if not (math.isfinite(vn) and math.isfinite(xn)):
        raise IntegrationBlowup(0, dt)
    return FullState(BioState(vn, nn, mn, hn), xn)


def detect_spikes(m_prev, h_prev, m_cur, h_cur, t, detector: DetectorState):
    """Feed one grid point to the spike detector.

    Returns the updated detector state and the spike time, or ``None`` if
    no spike fired at ``t``.
    """
    armed = K.ARMED if detector.phase is Phase.SEEKING_UP else K.DISARMED
    armed, last, fired = K.detector_update(armed, float(detector.last_spike), float(m_prev),
                                           float(h_prev), float(m_cur), float(h_cur), float(t),
                                           float(detector.delta0))
    phase = Phase.SEEKING_UP if armed == K.ARMED else Phase.SEEKING_DOWN
    return DetectorState(phase, last, detector.delta0), (float(t) if fired else None)


def stationary_init(p: NoiseParams, rng: np.random.Generator) -> FullState:
    """Bio variables uniform on (-12, 120) x (0, 1)^3, X from its invariant law."""
    bio = random_bio_state(rng)
    return FullState(bio, p.stationary_sd * rng.standard_normal())


class _NoiseStream:
    """Standard normal draws handed out in chunks from one generator."""

    def __init__(self, rng, chunk):
        self.rng = rng
        self.chunk = chunk

    def blocks(self, nsteps):
        done = 0
        while done < nsteps:
            n = min(self.chunk, nsteps - done)
            yield done, self.rng.standard_normal(n)
            done += n


def _integrate(state, det, p, dt, nsteps, noise, delta0, rec_every, exact_ou):
    spikes_all = []
    recs = []
    tau, sigma = p.tau, p.sigma
    if exact_ou:
        # exact transition: keep the Euler kernel, feed it an equivalent gaussian
        decay = math.exp(-tau * dt)
        sd = sigma * math.sqrt(-math.expm1(-2 * tau * dt) / (2 * tau)) if sigma else 0.0
    for start, z in noise.blocks(nsteps):
        if exact_ou:
            z = _exact_ou_gaussians(state[4], z, tau, sigma, dt, decay, sd)
        buf = np.empty(int(z.size * dt / delta0) + 2)
        nrec = (start + z.size) // rec_every - start // rec_every if rec_every else 0
        rec = np.empty((nrec, 6))
        k, r, status = K.run_neuron(state, det, p.theta, tau, sigma, dt, z, start, delta0,
                                    buf, rec_every, rec)
        if status != K.OK:
            raise IntegrationBlowup(status, (status + 1) * dt)
        spikes_all.append(buf[:k].copy())
        if r:
            recs.append(rec[:r])
    spikes = np.concatenate(spikes_all) if spikes_all else np.empty(0)
    return spikes, recs


def _exact_ou_gaussians(x0, z, tau, sigma, dt, decay, sd):
    # Rewrite exact OU draws as the gaussians the Euler update would need to hit them.
    if sigma == 0:
        return np.zeros_like(z)
    x = np.empty(z.size + 1)
    x[0] = x0
    for i in range(z.size):
        x[i + 1] = decay * x[i] + sd * z[i]
    return (x[1:] - x[:-1] + tau * x[:-1] * dt) / (sigma * math.sqrt(dt))


def simulate_neuron(
    p: NoiseParams,
    t_end: float,
    dt: float = DEFAULT_DT,
    seed: SeedLike = 0,
    init: Union[str, FullState] = "stationary",
    burn_in: float = 0.0,
    delta0: float = DEFAULT_DELTA0,
    record_every: Optional[int] = 10,
    exact_ou: bool = False,
    chunk_steps: int = CHUNK_STEPS,
) -> NeuronRun:
    """Simulate one stochastic neuron with constant signal ``p.theta``.

    Parameters
    ----------
    p : NoiseParams
    t_end : float
        Length of the observed trajectory, after burn-in.
    dt : float
        Euler step.
    seed : int or SeedSequence
        Seeds the Philox stream that supplies the initial condition (for
        ``init="stationary"``) and then all gaussian increments.
    init : "stationary" or FullState
        ``"stationary"`` draws (V, n, m, h) uniformly on (-12, 120) x (0, 1)^3
        and X from N(0, sigma^2 / (2 tau)).
    burn_in : float
        Length of an initial piece of trajectory that is simulated and
        discarded; the observed run continues from its terminal state.
    record_every : int or None
        Store every k-th grid point of the observed run. Spike detection
        always runs at full resolution.
    exact_ou : bool
        Advance X with its exact Gaussian transition instead of Euler-Maruyama.

    Returns
    -------
    NeuronRun
        Spike train on ``(0, t_end]`` (times measured from the end of
        burn-in), final state and detector, optional trajectory.
    """
    if not t_end > 0:
        raise DomainError("t_end must be positive")
    if not dt > 0:
        raise DomainError("dt must be positive")
    if burn_in < 0:
        raise DomainError("burn_in must be non-negative")
    rng = generator(seed)
    if isinstance(init, FullState):
        s0 = init
    elif init == "stationary":
        s0 = stationary_init(p, rng)
    else:
        raise DomainError(f"unknown init {init!r}")
    state = s0.as_array()
    det = np.array([K.ARMED, -np.inf])
    noise = _NoiseStream(rng, chunk_steps)
    n_burn = int(round(burn_in / dt))
    if n_burn:
        _integrate(state, det, p, dt, n_burn, noise, delta0, 0, exact_ou)
        det[1] -= n_burn * dt
    nsteps = int(round(t_end / dt))
    if nsteps < 1:
        raise DomainError("t_end shorter than one step")
    start_state = state.copy()
    rec_every = int(record_every or 0)
    spikes, recs = _integrate(state, det, p, dt, nsteps, noise, delta0, rec_every, exact_ou)
    traj = None
    if rec_every:
        traj = np.vstack([np.concatenate([[0.0], start_state])] + recs)
    phase = Phase.SEEKING_UP if det[0] == K.ARMED else Phase.SEEKING_DOWN
    horizon = nsteps * dt
    return NeuronRun(
        train=SpikeTrain(spikes, horizon, delta0),
        final=FullState.from_array(state),
        detector=DetectorState(phase, float(det[1]), delta0),
        trajectory=traj,
    )


def output_path(train: SpikeTrain, c1: float, u0: float = 0.0, grid=None) -> OutputPath:
    """Output process U with exact exponential decay between spikes.

    ``dU = -c1 U dt + dN``: at each spike U jumps by exactly 1, in between
    it decays by ``exp(-c1 * elapsed)``. ``grid`` optionally lists times at
    which U is also sampled.
    """
    if not c1 > 0:
        raise DomainError("c1 must be positive")
    if u0 < 0:
        raise DomainError("u0 must be non-negative")
    t = train.times
    after = np.empty(t.size)
    before = np.empty(t.size)
    u, t_prev = float(u0), 0.0
    for i, ti in enumerate(t):
        before[i] = u * math.exp(-c1 * (ti - t_prev))
        after[i] = before[i] + 1.0
        u, t_prev = after[i], ti
    path = OutputPath(c1, float(u0), t.copy(), after, before)
    if grid is not None:
        g = np.asarray(grid, dtype=float)
        path = OutputPath(c1, float(u0), t.copy(), after, before, g, path.at(g))
    return path
