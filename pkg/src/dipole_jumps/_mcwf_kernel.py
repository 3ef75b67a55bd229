"""Compiled inner loop of the quantum-jump unraveling.

Between jumps the unnormalized state is ``psi(t) = V x(t)`` with
``x_k(t) = c_k exp(-i lam_k t)`` and ``H_cond = V diag(lam) V^-1``.  The
survival probability ``|psi(t)|^2 = x^dag G x`` (``G = V^dag V``) is solved
for the waiting time by a Newton iteration on its logarithm, safeguarded by
bisection.  Jumps act directly on the coefficients through
``M_k = V^-1 R_k V``; the channel weights are ``rate_k x^dag Q_k x`` with
``Q_k = V^dag R_k^dag R_k V``.
"""

import numpy as np
from numba import njit

STATUS_BUFFER = 0
STATUS_TIME = 1
STATUS_CLASS = 2
STATUS_STUCK = 3


@njit(cache=True, nogil=True)
def _quad(x, M):
    d = x.shape[0]
    s = 0.0
    for k in range(d):
        acc = 0j
        for l in range(d):
            acc += M[k, l] * x[l]
        s += (x[k].conjugate() * acc).real
    return s


@njit(cache=True, nogil=True)
def _evolve(c, lam, t, x):
    for k in range(c.shape[0]):
        x[k] = c[k] * np.exp(-1j * lam[k] * t)


@njit(cache=True, nogil=True)
def _surv_rate(c, lam, G, Gd, t, x):
    """Survival probability and its decay rate at time t (x is scratch)."""
    _evolve(c, lam, t, x)
    d = x.shape[0]
    s = 0.0
    r = 0.0
    for k in range(d):
        a = 0j
        b = 0j
        for l in range(d):
            a += G[k, l] * x[l]
            b += Gd[k, l] * x[l]
        xc = x[k].conjugate()
        s += (xc * a).real
        r += (xc * b).real
    return s, r


@njit(cache=True, nogil=True)
def survival(c, lam, G, t):
    x = np.empty_like(c)
    _evolve(c, lam, t, x)
    return _quad(x, G)


@njit(cache=True, nogil=True)
def waiting_time(c, lam, G, Gd, u, horizon, x):
    """Smallest t with survival(t) = u, or -1.0 if none before ``horizon``."""
    rate0 = _quad(c, Gd)
    hi = 1.0 / rate0 if rate0 > 0 else 0.5 / max(-lam.imag.min(), 1e-300)
    hi = min(hi, horizon)
    lo = 0.0
    s, r = _surv_rate(c, lam, G, Gd, hi, x)
    while s > u:
        if hi >= horizon or hi > 1e300:
            return -1.0
        lo = hi
        hi = min(2.0 * hi, horizon)
        s, r = _surv_rate(c, lam, G, Gd, hi, x)
    logu = np.log(u)
    t = hi
    for _ in range(200):
        if s <= 0.0:
            hi = t
            t = 0.5 * (lo + hi)
            s, r = _surv_rate(c, lam, G, Gd, t, x)
            continue
        f = np.log(s) - logu
        if f > 0:
            lo = t
        else:
            hi = t
        if abs(f) < 1e-10 or hi - lo <= 1e-15 * hi:
            break
        tn = t + f * s / r if r > 0 else 0.5 * (lo + hi)
        if not (lo < tn < hi):
            tn = 0.5 * (lo + hi)
        t = tn
        s, r = _surv_rate(c, lam, G, Gd, t, x)
    return t


@njit(cache=True, nogil=True)
def run_jumps(V, Vinv, lam, G, Gd, M, Q, rates, class_shift, record, psi0, t0, t_end,
              cls0, stop_on_class_change, uniforms, times_out, chan_out):
    """Advance the trajectory jump by jump.

    Consumes two uniforms per jump.  Returns ``(n_recorded, t, psi, cls,
    n_used, status, n_jumps)`` with ``psi`` normalized.
    """
    d = psi0.shape[0]
    K = rates.shape[0]
    c = Vinv @ psi0
    x = np.empty(d, dtype=np.complex128)
    t = t0
    cls = cls0
    n_rec = 0
    n_used = 0
    n_jumps = 0
    n_u = uniforms.shape[0]
    w = np.empty(K)
    status = STATUS_BUFFER
    while True:
        if n_used + 2 > n_u or n_rec >= times_out.shape[0]:
            status = STATUS_BUFFER
            break
        tau = waiting_time(c, lam, G, Gd, uniforms[n_used], t_end - t, x)
        if tau < 0:
            _evolve(c, lam, t_end - t, x)
            nrm = np.sqrt(_quad(x, G))
            t = t_end
            if nrm == 0.0:
                status = STATUS_STUCK
                break
            for i in range(d):
                c[i] = x[i] / nrm
            status = STATUS_TIME
            break
        _evolve(c, lam, tau, x)
        total = 0.0
        for k in range(K):
            w[k] = rates[k] * _quad(x, Q[k]) if rates[k] > 0 else 0.0
            total += w[k]
        if total <= 0.0:
            t += tau
            for i in range(d):
                c[i] = x[i]
            status = STATUS_STUCK
            break
        target = uniforms[n_used + 1] * total
        k = 0
        acc_w = w[0]
        while acc_w < target and k < K - 1:
            k += 1
            acc_w += w[k]
        n_used += 2
        n_jumps += 1
        t += tau
        nrm = np.sqrt(w[k] / rates[k])
        for i in range(d):
            a = 0j
            for j in range(d):
                a += M[k, i, j] * x[j]
            c[i] = a / nrm
        if record[k]:
            times_out[n_rec] = t
            chan_out[n_rec] = k
            n_rec += 1
        cls += class_shift[k]
        if stop_on_class_change and class_shift[k] != 0:
            status = STATUS_CLASS
            break
    psi = V @ c
    psi = psi / np.sqrt((np.abs(psi) ** 2).sum())
    return n_rec, t, psi, cls, n_used, status, n_jumps
