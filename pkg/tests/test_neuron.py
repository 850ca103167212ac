import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hhcircuit.dynamics import BioState, integrate_deterministic, random_bio_state
from hhcircuit.errors import DomainError
from hhcircuit.neuron import (DetectorState, FullState, NoiseParams, Phase, SpikeTrain,
                              detect_spikes, neuron_step, ou_step, output_path, simulate_neuron)
from hhcircuit.rng import generator

REGULAR = NoiseParams(10.0, 0.7, 0.83666)


def test_ou_step_fixed_point():
    assert ou_step(0.0, REGULAR, 0.001, 0.0) == 0.0


def test_ou_step_pure_decay():
    assert ou_step(1.0, NoiseParams(1.0, 0.5, 0.0), 0.001, 0.7) == pytest.approx(0.9995, abs=1e-15)


def test_ou_step_formula():
    p = NoiseParams(1.0, 1.3, 2.0)
    assert ou_step(0.4, p, 0.01, -1.2) == pytest.approx(0.4 - 1.3 * 0.4 * 0.01 + 2.0 * 0.1 * -1.2)


@pytest.mark.parametrize("exact", [False, True])
def test_ou_long_run_variance(exact):
    p = NoiseParams(1.0, 2.0, 1.5)
    run = simulate_neuron(p, 10_000.0, seed=4, record_every=10, exact_ou=exact)
    x = run.trajectory[:, 5]
    assert x.var() == pytest.approx(p.sigma**2 / (2 * p.tau), rel=0.02)


@pytest.mark.parametrize("kw", [dict(tau=0.0), dict(tau=-1.0), dict(sigma=-0.1), dict(theta=0.0),
                                dict(theta=math.nan)])
def test_noise_params_validation(kw):
    base = dict(theta=1.0, tau=1.0, sigma=1.0)
    base.update(kw)
    with pytest.raises(DomainError):
        NoiseParams(**base)


def test_neuron_step_without_noise_matches_deterministic_step():
    s = BioState(3.0, 0.3, 0.1, 0.6)
    det = integrate_deterministic(s, 7.0, dt=0.001, t_end=0.001)
    stoch = neuron_step(FullState(s, 0.0), 7.0, NoiseParams(7.0, 1.0, 0.0), 0.001, 1.234)
    assert stoch.bio == det.final
    assert stoch.x == 0.0


def test_neuron_step_at_rest_without_drift_or_noise():
    # V where F vanishes with the gating frozen at n = m = 0
    s = FullState(BioState(10.6, 0.0, 0.0, 0.0), 0.0)
    out = neuron_step(s, 0.0, NoiseParams(1.0, 1.0, 0.0), 0.001, 0.0)
    assert out.bio.v == pytest.approx(10.6, abs=1e-15)


def test_neuron_step_uses_ou_increment():
    s = FullState(BioState(0.0, 0.3, 0.05, 0.6), 0.2)
    p = NoiseParams(5.0, 0.7, 1.0)
    z = 0.9
    out = neuron_step(s, 5.0, p, 0.001, z)
    xn = ou_step(0.2, p, 0.001, z)
    from hhcircuit.dynamics import ionic_current
    assert out.x == xn
    assert out.bio.v == pytest.approx(5.0 * 0.001 + (xn - 0.2) - ionic_current(s.bio) * 0.001, abs=1e-14)


@pytest.mark.parametrize("seed", range(5))
def test_spikes_early_in_regular_regime(seed):
    run = simulate_neuron(REGULAR, 50.0, seed=seed, record_every=None)
    assert len(run.train) >= 1


def _feed(diff, times, delta0=1.0):
    """Drive the detector with m - h = diff[k] (h fixed at 0.5)."""
    det = DetectorState(delta0=delta0)
    spikes = []
    for k in range(1, len(times)):
        det, s = detect_spikes(0.5 + diff[k - 1], 0.5, 0.5 + diff[k], 0.5, times[k], det)
        if s is not None:
            spikes.append(s)
    return spikes, det


def test_detector_never_fires_below():
    t = np.arange(0, 20, 0.5)
    assert _feed(-0.1 * np.ones(t.size), t)[0] == []


def test_detector_square_pulse():
    t = np.arange(0.0, 20.0, 1.0)
    diff = np.where(((t >= 5) & (t < 9)) | (t >= 12), 0.2, -0.2)
    spikes, det = _feed(diff, t)
    assert spikes == [5.0, 12.0]
    assert det.phase is Phase.SEEKING_DOWN


def test_detector_ignores_early_downcrossing_and_rearms_after_floor():
    # up at 5, down at 5.5 (inside the floor), up again at 5.8 ignored,
    # then below at 6.5 -> armed, up at 7 -> spike
    t = np.array([0, 4.9, 5.0, 5.5, 5.8, 6.0, 6.5, 6.9, 7.0, 8.0])
    diff = np.array([-1, -1, 1, -1, 1, 1, -1, -1, 1, 1]) * 0.1
    spikes, _ = _feed(diff, t)
    assert spikes == [5.0, 7.0]


def test_detector_waits_for_first_down_after_floor():
    t = np.array([0.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0])
    diff = np.array([-1, 1, 1, 1, -1, -1, 1]) * 0.1
    spikes, _ = _feed(diff, t)
    assert spikes == [5.0, 10.0]


def test_regular_regime():
    run = simulate_neuron(REGULAR, 400.0, seed=1)
    isis = np.diff(run.train.times)
    assert 24 <= len(run.train) <= 30
    assert 13.8 <= np.median(isis) <= 15.3
    assert isis.min() > 12.5 and isis.max() < 16.5


def test_seed_determinism():
    a = simulate_neuron(REGULAR, 100.0, seed=9)
    b = simulate_neuron(REGULAR, 100.0, seed=9)
    c = simulate_neuron(REGULAR, 100.0, seed=10)
    assert np.array_equal(a.train.times, b.train.times)
    assert np.array_equal(a.trajectory, b.trajectory)
    assert not np.array_equal(a.trajectory, c.trajectory)


@pytest.mark.parametrize("chunk", [1, 777, 50_000])
def test_chunk_size_does_not_change_results(chunk):
    ref = simulate_neuron(REGULAR, 60.0, seed=2, burn_in=5.0)
    other = simulate_neuron(REGULAR, 60.0, seed=2, burn_in=5.0, chunk_steps=chunk)
    assert np.array_equal(ref.train.times, other.train.times)
    assert np.array_equal(ref.trajectory, other.trajectory)
    assert ref.final == other.final


def test_burn_in_continues_the_same_path():
    full = simulate_neuron(REGULAR, 300.0, seed=3)
    tail = simulate_neuron(REGULAR, 200.0, seed=3, burn_in=100.0)
    assert tail.final == full.final
    later = full.train.times[full.train.times > 100.0] - 100.0
    np.testing.assert_allclose(tail.train.times, later, atol=1e-9)
    np.testing.assert_array_equal(tail.trajectory[-1, 1:], full.trajectory[-1, 1:])


def test_noise_off_reproduces_deterministic_integrator_bitwise():
    s0 = random_bio_state(generator(8))
    det = integrate_deterministic(s0, 10.0, t_end=200.0, record_every=10)
    sto = simulate_neuron(NoiseParams(10.0, 0.7, 0.0), 200.0, seed=123, init=FullState(s0, 0.0))
    assert np.array_equal(det.spike_times, sto.train.times)
    assert np.array_equal(det.trajectory, sto.trajectory[:, :5])
    assert np.all(sto.trajectory[:, 5] == 0.0)
    assert det.final == sto.final.bio


def test_stationary_init_law():
    p = NoiseParams(4.0, 2.0, 2.5)
    rows = np.array([simulate_neuron(p, 0.001, seed=s, record_every=1).trajectory[0, 1:]
                     for s in range(2000)])
    assert rows[:, 0].min() > -12 and rows[:, 0].max() < 120
    assert np.all((rows[:, 1:4] > 0) & (rows[:, 1:4] < 1))
    assert rows[:, 4].std() == pytest.approx(p.stationary_sd, rel=0.06)


def test_gating_stays_in_unit_interval():
    run = simulate_neuron(NoiseParams(10.0, 1.0, 5.0), 200.0, seed=0, record_every=1)
    g = run.trajectory[:, 2:5]
    assert np.all((g >= 0) & (g <= 1))


def test_refractory_floor_and_count_bound():
    run = simulate_neuron(NoiseParams(10.0, 0.5, 5.0), 500.0, seed=6, delta0=1.0, record_every=None)
    t = run.train.times
    assert np.all(np.diff(t) > 1.0)
    for x in (50.0, 250.0, 500.0):
        assert run.train.count(x) <= x / 1.0


def test_spike_train_validation():
    with pytest.raises(DomainError):
        SpikeTrain(np.array([1.0, 1.5]), 10.0, delta0=1.0)
    with pytest.raises(DomainError):
        SpikeTrain(np.array([0.0, 3.0]), 10.0)
    with pytest.raises(DomainError):
        SpikeTrain(np.array([3.0, 11.0]), 10.0)
    tr = SpikeTrain(np.array([1.0, 3.0, 7.0]), 10.0)
    assert tr.count(3.0) == 2 and tr.count(0.5) == 0


def test_output_empty_train():
    path = output_path(SpikeTrain(np.empty(0), 10.0), 0.02, 0.0, grid=np.linspace(0, 10, 11))
    assert np.all(path.values == 0.0)


def test_output_single_spike():
    path = output_path(SpikeTrain(np.array([1.0]), 10.0), 0.02)
    assert path.at(2.0) == pytest.approx(math.exp(-0.02), abs=1e-15)
    assert path.at(1.0) == 1.0
    assert path.before_spike[0] == 0.0


def test_output_initial_value_decays():
    path = output_path(SpikeTrain(np.empty(0), 10.0), 0.1, 2.0)
    assert path.at(5.0) == pytest.approx(2.0 * math.exp(-0.5))


def test_output_periodic_benchmarks():
    gap = 14.4
    t = gap * np.arange(1, 400)
    path = output_path(SpikeTrain(t, t[-1]), 0.02)
    assert path.after_spike[-1] == pytest.approx(3.996, abs=5e-4)
    assert path.before_spike[-1] == pytest.approx(2.996, abs=5e-4)


def test_output_rejects_bad_parameters():
    tr = SpikeTrain(np.array([1.0]), 2.0)
    with pytest.raises(DomainError):
        output_path(tr, 0.0)
    with pytest.raises(DomainError):
        output_path(tr, 0.02, -1.0)


@st.composite
def trains(draw):
    gaps = draw(st.lists(st.floats(1.0001, 40.0), min_size=0, max_size=60))
    t = np.cumsum(gaps)
    return SpikeTrain(t, float(t[-1]) + 1.0 if t.size else 1.0, delta0=1.0)


@given(trains(), st.floats(0.001, 1.0), st.floats(0.0, 5.0))
@settings(max_examples=60, deadline=None)
def test_output_properties(train, c1, u0):
    path = output_path(train, c1, u0, grid=np.linspace(0, train.horizon, 50))
    assert np.all(np.abs(path.after_spike - path.before_spike - 1.0) <= 1e-12)
    assert np.all(path.values >= 0)
    bound = max(u0, 0.0) + 1.0 / -math.expm1(-c1 * train.delta0)
    assert np.all(path.after_spike <= bound + 1e-9)
    # sum representation at spike times when starting from zero
    if u0 == 0.0 and len(train):
        t = train.times
        k = len(t) - 1
        assert path.after_spike[k] == pytest.approx(np.sum(np.exp(-c1 * (t[k] - t))), rel=1e-10)
