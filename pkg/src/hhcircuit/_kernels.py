"""Compiled inner loops.

All Euler loops funnel through :func:`bio_step` and :func:`detector_update`
so that the deterministic, single-neuron and circuit integrators perform the
same floating-point operations in the same order.
"""

import math

import numba as nb
import numpy as np

_SQRT2 = math.sqrt(2.0)

# detector phases, stored as floats in a (2,) or (N, 2) array: [armed, last_spike]
ARMED = 1.0
DISARMED = 0.0

OK = -1


@nb.njit(cache=True)
def x_over_expm1(x):
    """x / (exp(x) - 1), with the removable singularity at 0 filled in."""
    if abs(x) < 1e-4:
        x2 = x * x
        return 1.0 - 0.5 * x + x2 / 12.0 - x2 * x2 / 720.0
    return x / math.expm1(x)


@nb.njit(cache=True)
def alpha_n(v):
    return 0.1 * x_over_expm1(1.0 - 0.1 * v)


@nb.njit(cache=True)
def beta_n(v):
    return 0.125 * math.exp(-v / 80.0)


@nb.njit(cache=True)
def alpha_m(v):
    return x_over_expm1(2.5 - 0.1 * v)


@nb.njit(cache=True)
def beta_m(v):
    return 4.0 * math.exp(-v / 18.0)


@nb.njit(cache=True)
def alpha_h(v):
    return 0.07 * math.exp(-v / 20.0)


@nb.njit(cache=True)
def beta_h(v):
    return 1.0 / (math.exp(3.0 - 0.1 * v) + 1.0)


@nb.njit(cache=True)
def ionic_current(v, n, m, h):
    return 36.0 * n ** 4 * (v + 12.0) + 120.0 * m ** 3 * h * (v - 120.0) + 0.3 * (v - 10.6)


@nb.njit(cache=True)
def _clamp01(u):
    if u < 0.0:
        return 0.0
    if u > 1.0:
        return 1.0
    return u


@nb.njit(cache=True)
def bio_step(v, n, m, h, drift, dx, dt):
    """One explicit Euler step of (V, n, m, h); ``dx`` is the OU increment."""
    F = ionic_current(v, n, m, h)
    vn = v + drift * dt + dx - F * dt
    nn = _clamp01(n + (alpha_n(v) * (1.0 - n) - beta_n(v) * n) * dt)
    mn = _clamp01(m + (alpha_m(v) * (1.0 - m) - beta_m(v) * m) * dt)
    hn = _clamp01(h + (alpha_h(v) * (1.0 - h) - beta_h(v) * h) * dt)
    return vn, nn, mn, hn


@nb.njit(cache=True)
def ou_step(x, tau, sigma, dt, sqdt, z):
    return x - tau * x * dt + sigma * sqdt * z


@nb.njit(cache=True)
def detector_update(armed, last, m_prev, h_prev, m_cur, h_cur, t, delta0):
    """Advance the m/h crossing state machine by one grid point.

    Returns ``(armed, last, fired)``.
    """
    if armed == ARMED:
        if m_prev <= h_prev and m_cur > h_cur:
            return DISARMED, t, True
        return armed, last, False
    if t > last + delta0 and m_cur < h_cur:
        return ARMED, last, False
    return armed, last, False


@nb.njit(cache=True)
def psi_star(u, mean, sd):
    return 0.5 * math.erfc(-(u - mean) / (sd * _SQRT2))


@nb.njit(cache=True)
def run_deterministic(state, det, a, dt, nsteps, step0, delta0, spikes, rec_every, rec):
    """Integrate the noise-free system for ``nsteps`` steps, in place.

    ``state`` is (v, n, m, h); ``rec`` rows are (t, v, n, m, h).
    Returns (n_spikes, n_records, status) with status = OK or the failing step.
    """
    v, n, m, h = state[0], state[1], state[2], state[3]
    armed, last = det[0], det[1]
    k = 0
    r = 0
    status = OK
    for s in range(nsteps):
        vn, nn, mn, hn = bio_step(v, n, m, h, a, 0.0, dt)
        t = (step0 + s + 1) * dt
        if not math.isfinite(vn):
            status = step0 + s
            break
        armed, last, fired = detector_update(armed, last, m, h, mn, hn, t, delta0)
        if fired:
            spikes[k] = t
            k += 1
        v, n, m, h = vn, nn, mn, hn
        if rec_every > 0 and (step0 + s + 1) % rec_every == 0 and r < rec.shape[0]:
            rec[r, 0] = t
            rec[r, 1] = v
            rec[r, 2] = n
            rec[r, 3] = m
            rec[r, 4] = h
            r += 1
    state[0], state[1], state[2], state[3] = v, n, m, h
    det[0], det[1] = armed, last
    return k, r, status


@nb.njit(cache=True)
def run_neuron(state, det, drift, tau, sigma, dt, z, step0, delta0, spikes, rec_every, rec):
    """Integrate one stochastic neuron over ``len(z)`` steps, in place.

    ``state`` is (v, n, m, h, x); ``rec`` rows are (t, v, n, m, h, x).
    """
    v, n, m, h, x = state[0], state[1], state[2], state[3], state[4]
    armed, last = det[0], det[1]
    sqdt = math.sqrt(dt)
    k = 0
    r = 0
    status = OK
    for s in range(z.shape[0]):
        xn = ou_step(x, tau, sigma, dt, sqdt, z[s])
        vn, nn, mn, hn = bio_step(v, n, m, h, drift, xn - x, dt)
        t = (step0 + s + 1) * dt
        if not (math.isfinite(vn) and math.isfinite(xn)):
            status = step0 + s
            break
        armed, last, fired = detector_update(armed, last, m, h, mn, hn, t, delta0)
        if fired:
            spikes[k] = t
            k += 1
        v, n, m, h, x = vn, nn, mn, hn, xn
        if rec_every > 0 and (step0 + s + 1) % rec_every == 0 and r < rec.shape[0]:
            rec[r, 0] = t
            rec[r, 1] = v
            rec[r, 2] = n
            rec[r, 3] = m
            rec[r, 4] = h
            rec[r, 5] = x
            r += 1
    state[0], state[1], state[2], state[3], state[4] = v, n, m, h, x
    det[0], det[1] = armed, last
    return k, r, status


@nb.njit(cache=True)
def run_circuit(st, U, det, pred, inh, theta1, theta2, psi_mean, psi_sd, drift_override,
                tau, sigma, decay, dt, z, step0, delta0, sp_t, sp_i, rec_every, rec_a):
    """Synchronous Euler steps of a whole ring, in place.

    Inputs A are computed from the outputs at the start of each step. After
    all neurons moved, every output decays by ``decay`` and spiking neurons
    add 1. ``drift_override`` (if finite) replaces every A by a constant.
    Returns (n_spikes, n_records, status, failing_neuron).
    """
    N = st.shape[0]
    sqdt = math.sqrt(dt)
    A = np.empty(N)
    fired_now = np.zeros(N, dtype=np.bool_)
    use_override = math.isfinite(drift_override)
    k = 0
    r = 0
    for s in range(z.shape[1]):
        for i in range(N):
            if use_override:
                A[i] = drift_override
            else:
                p = psi_star(U[pred[i]], psi_mean, psi_sd)
                if inh[i]:
                    A[i] = theta2 - (theta2 - theta1) * p
                else:
                    A[i] = theta1 + (theta2 - theta1) * p
        t = (step0 + s + 1) * dt
        for i in range(N):
            v, n, m, h, x = st[i, 0], st[i, 1], st[i, 2], st[i, 3], st[i, 4]
            xn = ou_step(x, tau, sigma, dt, sqdt, z[i, s])
            vn, nn, mn, hn = bio_step(v, n, m, h, A[i], xn - x, dt)
            if not (math.isfinite(vn) and math.isfinite(xn)):
                return k, r, step0 + s, i
            armed, last, fired = detector_update(det[i, 0], det[i, 1], m, h, mn, hn, t, delta0)
            det[i, 0] = armed
            det[i, 1] = last
            fired_now[i] = fired
            if fired:
                sp_t[k] = t
                sp_i[k] = i
                k += 1
            st[i, 0], st[i, 1], st[i, 2], st[i, 3], st[i, 4] = vn, nn, mn, hn, xn
        for i in range(N):
            U[i] *= decay
            if fired_now[i]:
                U[i] += 1.0
        if rec_every > 0 and (step0 + s + 1) % rec_every == 0 and r < rec_a.shape[0]:
            rec_a[r, 0] = t
            for i in range(N):
                rec_a[r, i + 1] = A[i]
            r += 1
    return k, r, OK, -1


@nb.njit(cache=True)
def run_reference(x, sign, pred, c, dt, nsteps, rec_every, rec):
    """Euler steps of dx_i/dt = -c x_i + sign_i * tanh(x_{pred(i)})."""
    N = x.shape[0]
    dx = np.empty(N)
    r = 0
    for s in range(nsteps):
        for i in range(N):
            dx[i] = -c * x[i] + sign[i] * math.tanh(x[pred[i]])
        for i in range(N):
            x[i] += dt * dx[i]
        if rec_every > 0 and (s + 1) % rec_every == 0 and r < rec.shape[0]:
            rec[r, 0] = (s + 1) * dt
            for i in range(N):
                rec[r, i + 1] = x[i]
            r += 1
    return r
