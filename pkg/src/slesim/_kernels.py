"""Compiled inner loops: phase construction, Crank-Nicolson step, trajectory driver.

Everything here works on raw arrays so that one realization runs without
returning to the interpreter. The public wrappers live in ``phase`` and
``propagator``.
"""

import math

import numpy as np
from numba import njit

NO_FRICTION = 0
POLAR = 1
ARCTAN = 2

OK = 0
NORM_VIOLATION = 1
BREAKDOWN = 2
NONFINITE = 3


@njit(cache=True)
def polar_phase(psi, ref, guard, out):
    """Recursive unwrap: increments are Arg(psi[j] / psi[prev]) between significant points."""
    n = psi.shape[0]
    amax2 = 0.0
    for j in range(n):
        a2 = psi[j].real ** 2 + psi[j].imag ** 2
        if a2 > amax2:
            amax2 = a2
    thr2 = guard * guard * amax2
    running = 0.0
    last = -1
    for j in range(n):
        if amax2 == 0.0 or psi[j].real ** 2 + psi[j].imag ** 2 < thr2:
            out[j] = running
            continue
        if last >= 0:
            z = psi[j] * np.conj(psi[last])
            d = math.atan2(z.imag, z.real)
            if d == -math.pi:
                d = math.pi
            running += d
        out[j] = running
        last = j
    # anchor: S(ref) = Arg(psi(ref)); if ref sits on a node use the next significant point
    k = ref
    while k < n and psi[k].real ** 2 + psi[k].imag ** 2 < thr2:
        k += 1
    if k == n:
        k = ref
        while k >= 0 and psi[k].real ** 2 + psi[k].imag ** 2 < thr2:
            k -= 1
    if k < 0:
        return
    a0 = math.atan2(psi[k].imag, psi[k].real)
    if a0 == -math.pi:
        a0 = math.pi
    shift = a0 - out[k]
    for j in range(n):
        out[j] += shift


@njit(cache=True)
def arctan_phase(psi, out):
    for j in range(psi.shape[0]):
        re = psi[j].real
        im = psi[j].imag
        if re == 0.0:
            if im > 0.0:
                out[j] = 0.5 * math.pi
            elif im < 0.0:
                out[j] = -0.5 * math.pi
            else:
                out[j] = 0.0
        else:
            out[j] = math.atan(im / re)


@njit(cache=True)
def weighted_mean(values, psi, weights):
    num = 0.0
    den = 0.0
    for j in range(psi.shape[0]):
        rho = weights[j] * (psi[j].real ** 2 + psi[j].imag ** 2)
        num += rho * values[j]
        den += rho
    return num / den


@njit(cache=True)
def friction_into(psi, prescription, A, ref, guard, weights, s_work, out):
    """out <- A (S - <S>); ``s_work`` receives S."""
    n = psi.shape[0]
    if prescription == NO_FRICTION or A == 0.0:
        for j in range(n):
            out[j] = 0.0
        return
    if prescription == POLAR:
        polar_phase(psi, ref, guard, s_work)
    else:
        arctan_phase(psi, s_work)
    mean = weighted_mean(s_work, psi, weights)
    for j in range(n):
        out[j] = A * (s_work[j] - mean)


@njit(cache=True)
def cn_step(psi, v, dx, dt, cp, dp, out):
    """One Crank-Nicolson step for H = -1/2 d2/dx2 + v, walls pinned at both ends.

    ``cp``/``dp`` are complex work arrays of length len(psi). Returns the
    smallest pivot magnitude met during forward elimination.
    """
    n = psi.shape[0]
    kin = 1.0 / (dx * dx)
    off = -0.5 * kin
    half = 0.5j * dt
    a = half * off  # sub- and super-diagonal of (1 + i H dt/2)
    min_pivot = np.inf
    # forward elimination over interior points 1..n-2
    for i in range(1, n - 1):
        h_psi = (kin + v[i]) * psi[i] + off * (psi[i + 1] + psi[i - 1])
        rhs = psi[i] - half * h_psi
        b = 1.0 + half * (kin + v[i])
        if i == 1:
            m = b
            inv = 1.0 / m
            dp[i] = rhs * inv
        else:
            m = b - a * cp[i - 1]
            inv = 1.0 / m
            dp[i] = (rhs - a * dp[i - 1]) * inv
        cp[i] = a * inv
        am = m.real ** 2 + m.imag ** 2
        if am < min_pivot:
            min_pivot = am
    out[0] = 0.0
    out[n - 1] = 0.0
    out[n - 2] = dp[n - 2]
    for i in range(n - 3, 0, -1):
        out[i] = dp[i] - cp[i] * out[i + 1]
    return math.sqrt(min_pivot)


@njit(cache=True)
def norm2(psi, weights):
    s = 0.0
    for j in range(psi.shape[0]):
        s += weights[j] * (psi[j].real ** 2 + psi[j].imag ** 2)
    return s


@njit(cache=True)
def energy_h0(psi, v_ext, dx, weights):
    kin = 1.0 / (dx * dx)
    off = -0.5 * kin
    n = psi.shape[0]
    acc = 0.0
    for i in range(n):
        h = (kin + v_ext[i]) * psi[i]
        if i > 0:
            h += off * psi[i - 1]
        if i < n - 1:
            h += off * psi[i + 1]
        z = np.conj(psi[i]) * h
        acc += weights[i] * z.real
    return acc


@njit(cache=True)
def project(psi, basis, dx, out):
    n_lev, n = basis.shape
    for k in range(n_lev):
        re = 0.0
        im = 0.0
        for i in range(n):
            re += basis[k, i] * psi[i].real
            im += basis[k, i] * psi[i].imag
        out[k] = (re * re + im * im) * dx * dx


@njit(cache=True)
def run_trajectory(psi0, v_ext, x, weights, dx, dt, A, prescription, ref, guard,
                   forces, stride, basis, norm_tol,
                   weights_out, energy_out, norm_out):
    """Propagate one realization for len(forces) steps, recording every ``stride`` steps.

    Returns (status, last_good_step, max_step_drift, final_psi).
    """
    n = psi0.shape[0]
    n_steps = forces.shape[0]
    psi = psi0.copy()
    nxt = np.empty_like(psi)
    cp = np.empty(n, dtype=np.complex128)
    dp = np.empty(n, dtype=np.complex128)
    s_work = np.empty(n)
    fric = np.empty(n)
    v = np.empty(n)
    lev = np.empty(basis.shape[0])

    nrm = norm2(psi, weights)
    norm_start = nrm
    max_drift = 0.0
    rec = 0
    project(psi, basis, dx, lev)
    weights_out[rec, :] = lev
    energy_out[rec] = energy_h0(psi, v_ext, dx, weights)
    norm_out[rec] = nrm
    rec += 1
    for k in range(n_steps):
        friction_into(psi, prescription, A, ref, guard, weights, s_work, fric)
        f = forces[k]
        for j in range(n):
            v[j] = v_ext[j] + fric[j] - x[j] * f
        piv = cn_step(psi, v, dx, dt, cp, dp, nxt)
        if piv < 1e-300:
            return BREAKDOWN, k, max_drift, psi
        new = norm2(nxt, weights)
        if not math.isfinite(new):
            return NONFINITE, k, max_drift, psi
        drift = abs(new - nrm)
        if drift > max_drift:
            max_drift = drift
        if abs(new - norm_start) > norm_tol:
            return NORM_VIOLATION, k, max_drift, psi
        nrm = new
        psi, nxt = nxt, psi
        if (k + 1) % stride == 0:
            project(psi, basis, dx, lev)
            weights_out[rec, :] = lev
            energy_out[rec] = energy_h0(psi, v_ext, dx, weights)
            norm_out[rec] = nrm
            rec += 1
    return OK, n_steps, max_drift, psi
