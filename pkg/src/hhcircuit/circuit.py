"""Ring circuits of stochastic Hodgkin-Huxley neurons.

N = M L neurons sit on a ring, split into M blocks of L consecutive
neurons. The first neuron of every block is inhibitory, the rest are
excitatory. Neuron i receives as input a transform of its predecessor's
output:

    A_i = theta1 + (theta2 - theta1) Psi*(U_{i-1})   (excitatory)
    A_i = theta2 - (theta2 - theta1) Psi*(U_{i-1})   (inhibitory)

where Psi* is a normal distribution function centred in the benchmark
interval (1, u1*). Neurons are labelled 1..N in public methods; arrays are
indexed 0..N-1.

Also provided: a deterministic reference ring ``dx_i = -c x_i -/+ tanh(x_{i-1})``
and diagnostics for rotating block activity.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence

import numpy as np

from . import _kernels as K
from .dynamics import DEFAULT_DELTA0, DEFAULT_DT
from .errors import ConfigError, DomainError, IntegrationBlowup
from .neuron import NoiseParams, OutputPath, SpikeTrain, output_path, stationary_init
from .regimes import output_benchmarks
from .rng import SeedLike, generator, neuron_seed, outputs_seed

PSI_TAIL = 0.025
CHUNK_STEPS = 1 << 16


def decay_for_median(delta_star: float) -> float:
    """Decay rate c* with exp(-c* delta_star) = 3/4, which puts u1* at 3."""
    if not delta_star > 0:
        raise DomainError("delta_star must be positive")
    return -math.log(0.75) / delta_star


@dataclass(frozen=True)
class TransmissionParams:
    """Input levels and the benchmark interval (1, u1*) that centres Psi*."""

    theta1: float
    theta2: float
    u1_star: float
    u2_star: float

    @classmethod
    def from_median(cls, delta_star: float, c1: float, theta1: float = 4.0,
                    theta2: float = 10.0) -> "TransmissionParams":
        u2, u1 = output_benchmarks(delta_star, c1)
        return cls(theta1, theta2, u1, u2)

    @property
    def psi_mean(self) -> float:
        return (1.0 + self.u1_star) / 2.0

    @property
    def psi_sd(self) -> float:
        return (self.u1_star - 1.0) / 6.0

    def problems(self) -> List[str]:
        out = []
        if not (math.isfinite(self.theta1) and math.isfinite(self.theta2) and 0 < self.theta1 < self.theta2):
            out.append(f"need 0 < theta1 < theta2, got {self.theta1}, {self.theta2}")
        if not (math.isfinite(self.u1_star) and self.u1_star > 1):
            out.append(f"u1_star must exceed 1, got {self.u1_star}")
        elif not (psi_star(1.0, self) < PSI_TAIL and psi_star(self.u1_star, self) > 1 - PSI_TAIL):
            out.append("Psi* must put less than 0.025 mass outside (1, u1_star)")
        return out


def psi_star(x: float, params: TransmissionParams) -> float:
    """Normal distribution function with mean (1+u1*)/2 and sd (u1*-1)/6."""
    return K.psi_star(float(x), params.psi_mean, params.psi_sd)


class Kind(str, enum.Enum):
    EXC = "exc"
    INH = "inh"


def transmission(kind: Kind, u: float, params: TransmissionParams) -> float:
    p = psi_star(u, params)
    span = params.theta2 - params.theta1
    if Kind(kind) is Kind.INH:
        return params.theta2 - span * p
    return params.theta1 + span * p


class InitScenario(str, enum.Enum):
    ZERO_OUTPUTS = "zero"
    UNIFORM_OUTPUTS = "uniform"


@dataclass(frozen=True)
class CircuitSpec:
    """Ring of M blocks of L neurons.

    ``noise`` supplies tau and sigma shared by all neurons; its theta is
    unused unless ``constant_drift`` is set, which replaces every input
    A_i by that constant (a decoupling hook for testing).
    """

    m: int
    l: int
    noise: NoiseParams
    c1: float
    transmission: TransmissionParams
    dt: float = DEFAULT_DT
    seed: int = 0
    init_scenario: InitScenario = InitScenario.ZERO_OUTPUTS
    delta0: float = DEFAULT_DELTA0
    constant_drift: Optional[float] = None

    @classmethod
    def rotating_example(cls, **overrides) -> "CircuitSpec":
        """Three blocks of four, sigma 1.5, tau 1.4, c1 0.02, inputs between 4 and 10."""
        base = cls(m=3, l=4, noise=NoiseParams(10.0, 1.4, 1.5), c1=0.02,
                   transmission=TransmissionParams.from_median(14.3, 0.02, 4.0, 10.0))
        return replace(base, **overrides)


@dataclass(frozen=True)
class Circuit:
    spec: CircuitSpec
    pred: np.ndarray  # 0-based predecessor of each neuron
    inh: np.ndarray  # boolean mask of inhibitory neurons

    @property
    def n(self) -> int:
        return self.pred.size

    @property
    def inhibitory(self) -> List[int]:
        """Labels (1-based) of inhibitory neurons."""
        return [int(i) + 1 for i in np.flatnonzero(self.inh)]

    def predecessor(self, label: int) -> int:
        return int(self.pred[label - 1]) + 1

    def kind(self, label: int) -> Kind:
        return Kind.INH if self.inh[label - 1] else Kind.EXC

    def block(self, label: int) -> int:
        """0-based block of neuron ``label``."""
        return (label - 1) // self.spec.l


def build_circuit(spec: CircuitSpec) -> Circuit:
    """Validate ``spec`` and compute index sets; all violations are reported together."""
    problems = []
    if not (isinstance(spec.m, int) and spec.m >= 3 and spec.m % 2 == 1):
        problems.append(f"M must be an odd integer >= 3, got {spec.m}")
    if not (isinstance(spec.l, int) and spec.l >= 4):
        problems.append(f"L must be an integer >= 4, got {spec.l}")
    if not (spec.c1 > 0):
        problems.append("c1 must be positive")
    if not (0 < spec.dt <= 0.01):
        problems.append("dt must lie in (0, 0.01]")
    if not spec.delta0 > 0:
        problems.append("delta0 must be positive")
    problems.extend(spec.transmission.problems())
    try:
        InitScenario(spec.init_scenario)
    except ValueError:
        problems.append(f"unknown init scenario {spec.init_scenario!r}")
    if problems:
        raise ConfigError(problems)
    n = spec.m * spec.l
    idx = np.arange(n)
    return Circuit(spec, (idx - 1) % n, idx % spec.l == 0)


@dataclass
class CircuitState:
    """Mutable state of a running circuit.

    ``bio`` rows are (v, n, m, h, x); ``det`` rows are (armed, last spike).
    """

    bio: np.ndarray
    u: np.ndarray
    det: np.ndarray
    step: int
    dt: float
    rngs: list = field(repr=False)

    @property
    def t(self) -> float:
        return self.step * self.dt

    def inputs(self, circuit: Circuit) -> np.ndarray:
        """A_i computed from the current outputs of the predecessors."""
        spec = circuit.spec
        if spec.constant_drift is not None:
            return np.full(circuit.n, float(spec.constant_drift))
        tp = spec.transmission
        return np.array([
            transmission(Kind.INH if circuit.inh[i] else Kind.EXC, self.u[circuit.pred[i]], tp)
            for i in range(circuit.n)
        ])


def init_circuit(circuit: Circuit, seed: Optional[SeedLike] = None) -> CircuitState:
    """Random start: each neuron from its own stream, outputs per scenario.

    Neuron i (0-based) draws its initial state and later its noise from
    ``neuron_seed(seed, i)``, exactly as :func:`simulate_neuron` would.
    """
    spec = circuit.spec
    seed = spec.seed if seed is None else seed
    rngs = [generator(neuron_seed(seed, i)) for i in range(circuit.n)]
    bio = np.array([stationary_init(spec.noise, r).as_array() for r in rngs])
    if InitScenario(spec.init_scenario) is InitScenario.UNIFORM_OUTPUTS:
        u = generator(outputs_seed(seed)).uniform(1.0, spec.transmission.u1_star, circuit.n)
    else:
        u = np.zeros(circuit.n)
    det = np.column_stack([np.full(circuit.n, K.ARMED), np.full(circuit.n, -np.inf)])
    return CircuitState(bio, u, det, 0, spec.dt, rngs)


@dataclass
class CircuitRun:
    trains: List[SpikeTrain]
    outputs: List[OutputPath]
    inputs: np.ndarray  # rows (t, A_1, ..., A_N)
    final: CircuitState
    u0: np.ndarray


def _advance(circuit: Circuit, state: CircuitState, nsteps: int, rec_every: int, chunk: int):
    spec = circuit.spec
    tp = spec.transmission
    drift = math.nan if spec.constant_drift is None else float(spec.constant_drift)
    decay = math.exp(-spec.c1 * spec.dt)
    times, who, recs = [], [], []
    done = 0
    while done < nsteps:
        n = min(chunk, nsteps - done)
        z = np.vstack([r.standard_normal(n) for r in state.rngs])
        cap = circuit.n * (int(n * spec.dt / spec.delta0) + 2)
        sp_t = np.empty(cap)
        sp_i = np.empty(cap, dtype=np.int64)
        step0 = state.step
        nrec = (step0 + n) // rec_every - step0 // rec_every if rec_every else 0
        rec = np.empty((nrec, circuit.n + 1))
        k, r, status, bad = K.run_circuit(
            state.bio, state.u, state.det, circuit.pred, circuit.inh, tp.theta1, tp.theta2,
            tp.psi_mean, tp.psi_sd, drift, spec.noise.tau, spec.noise.sigma, decay, spec.dt, z,
            step0, spec.delta0, sp_t, sp_i, rec_every, rec)
        if status != K.OK:
            raise IntegrationBlowup(status, (status + 1) * spec.dt, neuron=int(bad) + 1)
        state.step += n
        done += n
        times.append(sp_t[:k].copy())
        who.append(sp_i[:k].copy())
        recs.append(rec[:r])
    return times, who, recs


def step_circuit(circuit: Circuit, state: CircuitState) -> CircuitState:
    """One synchronous Euler step of all neurons, in place; returns ``state``.

    Inputs use the outputs at the start of the step. Afterwards every output
    decays by exp(-c1 dt) and neurons that spiked add 1.
    """
    _advance(circuit, state, 1, 0, 1)
    return state


def run_circuit(circuit: Circuit, t_end: float, state: Optional[CircuitState] = None,
                record_every: Optional[int] = 100, chunk_steps: int = CHUNK_STEPS) -> CircuitRun:
    """Simulate the circuit up to ``t_end``.

    Returns per-neuron spike trains, exact output paths started from the
    initial outputs and inputs A sampled every ``record_every`` steps.
    """
    if not t_end > 0:
        raise DomainError("t_end must be positive")
    spec = circuit.spec
    state = init_circuit(circuit) if state is None else state
    t_start = state.t
    u0 = state.u.copy()
    nsteps = int(round(t_end / spec.dt))
    rec_every = int(record_every or 0)
    times, who, recs = _advance(circuit, state, nsteps, rec_every, chunk_steps)
    t_all = np.concatenate(times) - t_start
    i_all = np.concatenate(who)
    inputs = np.vstack(recs) if recs else np.empty((0, circuit.n + 1))
    if inputs.size:
        inputs[:, 0] -= t_start
        a = inputs[:, 1:]
        if np.any(a < spec.transmission.theta1) or np.any(a > spec.transmission.theta2):
            if spec.constant_drift is None:
                raise AssertionError("input left [theta1, theta2]")
    horizon = nsteps * spec.dt
    trains = [SpikeTrain(t_all[i_all == i], horizon, spec.delta0) for i in range(circuit.n)]
    outputs = [output_path(tr, spec.c1, float(u0[i])) for i, tr in enumerate(trains)]
    return CircuitRun(trains, outputs, inputs, state, u0)


@dataclass(frozen=True)
class BlockActivity:
    """Spike counts per block (rows) and time window (columns)."""

    counts: np.ndarray
    window: float
    threshold: int

    @property
    def active(self) -> np.ndarray:
        return self.counts >= self.threshold

    @classmethod
    def from_pattern(cls, active, window: float = 1.0) -> "BlockActivity":
        """Build from a boolean (blocks x windows) pattern."""
        a = np.asarray(active, dtype=bool)
        return cls(a.astype(np.int64), window, 1)


def activity_threshold(l: int, window: float, delta_star: float) -> int:
    """Half a block of regular spikers over one window: ceil(L window / (2 delta*))."""
    return int(math.ceil(l * window / (2.0 * delta_star)))


def block_activity(trains: Sequence[SpikeTrain], circuit: Circuit, window: float = 50.0,
                   delta_star: float = 14.3) -> BlockActivity:
    if not window > 0:
        raise DomainError("window must be positive")
    spec = circuit.spec
    horizon = max(tr.horizon for tr in trains)
    nw = max(1, int(math.floor(horizon / window + 1e-9)))
    counts = np.zeros((spec.m, nw), dtype=np.int64)
    for i, tr in enumerate(trains):
        w = np.minimum(np.ceil(tr.times / window).astype(np.int64) - 1, nw - 1)
        np.add.at(counts[i // spec.l], np.maximum(w, 0), 1)
    return BlockActivity(counts, float(window), activity_threshold(spec.l, window, delta_star))


@dataclass(frozen=True)
class RotationVerdict:
    """``direction`` is +1 or -1 (block index step between quiet onsets), 0 if none."""

    rotating: bool
    always_mixed: bool
    direction: int
    onsets: tuple  # (window index, block) of each block turning quiet
    period: float  # time for one full turn; nan if undetermined
    period_transitions: int
    active_sequence: tuple  # distinct consecutive active-block sets


def detect_rotation(activity: BlockActivity, burn_in: float = 600.0,
                    min_transitions: int = 2) -> RotationVerdict:
    """Decide whether the quiet block travels around the ring.

    After ``burn_in``, every window must contain an active and a quiet block,
    and the blocks that successively fall quiet must step through the ring
    in a fixed direction. A block falling quiet twice in a row (flicker) counts
    once.
    """
    act = activity.active
    m, nw = act.shape
    first = int(math.ceil(burn_in / activity.window - 1e-9))
    tail = act[:, first:]
    nan = float("nan")
    if tail.shape[1] == 0:
        return RotationVerdict(False, False, 0, (), nan, m, ())
    mixed = bool(np.all(tail.any(axis=0)) and np.all((~tail).any(axis=0)))
    onsets = []
    for w in range(first + 1, nw):
        for b in np.flatnonzero(act[:, w - 1] & ~act[:, w]):
            if not onsets or onsets[-1][1] != b:
                onsets.append((w, int(b)))
    steps = {(b2 - b1) % m for (_, b1), (_, b2) in zip(onsets, onsets[1:])}
    direction = 0
    if steps == {1}:
        direction = 1
    elif steps == {m - 1}:
        direction = -1
    seq = []
    for w in range(first, nw):
        s = tuple(int(b) for b in np.flatnonzero(act[:, w]))
        if not seq or seq[-1] != s:
            seq.append(s)
    period = nan
    if len(onsets) >= 2 and direction:
        per_step = (onsets[-1][0] - onsets[0][0]) * activity.window / (len(onsets) - 1)
        period = per_step * m
    rotating = mixed and direction != 0 and len(onsets) - 1 >= min_transitions
    return RotationVerdict(rotating, mixed, direction, tuple(onsets), period, m, tuple(seq))


def reference_signs(circuit: Circuit) -> np.ndarray:
    return np.where(circuit.inh, -1.0, 1.0)


def reference_model_step(x: np.ndarray, c: float, circuit: Circuit, dt: float) -> np.ndarray:
    """Euler step of dx_i/dt = -c x_i + s_i tanh(x_{i-1}), s_i = -1 on inhibitory neurons."""
    x = np.asarray(x, dtype=float)
    return x + dt * (-c * x + reference_signs(circuit) * np.tanh(x[circuit.pred]))


@dataclass
class ReferenceRun:
    trajectory: np.ndarray  # rows (t, x_1, ..., x_N)
    final: np.ndarray


def run_reference(circuit: Circuit, t_end: float, seed: SeedLike = 0, c: float = 0.05,
                  dt: float = 0.01, record_every: int = 10, x0=None) -> ReferenceRun:
    """Deterministic reference ring from a uniform start on (-1, 1)^N."""
    if not 0 < c < 1:
        raise DomainError("c must lie in (0, 1)")
    if not (dt > 0 and t_end > 0):
        raise DomainError("dt and t_end must be positive")
    x = generator(seed).uniform(-1.0, 1.0, circuit.n) if x0 is None else np.array(x0, dtype=float)
    nsteps = int(round(t_end / dt))
    rec = np.empty((nsteps // record_every if record_every else 0, circuit.n + 1))
    start = np.concatenate([[0.0], x])
    r = K.run_reference(x, reference_signs(circuit), circuit.pred, c, dt, nsteps, record_every, rec)
    return ReferenceRun(np.vstack([start, rec[:r]]), x)


def autocorrelation_peak(series, dt: float = 1.0) -> tuple:
    """Highest lagged Pearson correlation after the first sign change.

    Returns ``(lag, correlation)``; lags are searched up to half the series
    length. ``(nan, nan)`` if the correlation never turns negative.
    """
    y = np.asarray(series, dtype=float)
    n = y.size
    max_lag = n // 2
    corr = np.empty(max_lag)
    for k in range(max_lag):
        a, b = y[: n - k], y[k:]
        sa, sb = a.std(), b.std()
        corr[k] = np.mean((a - a.mean()) * (b - b.mean())) / (sa * sb) if sa > 0 and sb > 0 else 0.0
    neg = np.flatnonzero(corr < 0)
    if neg.size == 0:
        return float("nan"), float("nan")
    k = neg[0] + int(np.argmax(corr[neg[0]:]))
    return k * dt, float(corr[k])
