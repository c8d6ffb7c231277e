"""Hot numeric kernels: vector field, variational equations and a
Dormand-Prince 5(4) integrator with dense output and event location.

Everything here is restricted to the numba ``nopython`` subset so the same
source runs compiled or interpreted (see :mod:`foodchain._jit`).

Parameters travel as a flat float64 vector::

    p = [kind1, p1_1, p2_1, kind2, p1_2, p2_2, d1, d2]

with ``kind`` 0 for Holling type II and 1 for Ivlev.

Augmented systems are selected by ``mode``:

* ``0`` -- the 3-D food chain,
* ``1`` -- state plus one tangent vector (6 components),
* ``2`` -- state plus the 3x3 fundamental matrix, row major (12 components).

Status codes returned by the drivers: ``OK``, ``STEP_UNDERFLOW``,
``MAX_STEPS`` and ``NO_CROSSING``.
"""

from __future__ import annotations

import math

import numpy as np

from ._jit import njit

OK = 0
STEP_UNDERFLOW = 1
MAX_STEPS = 2
NO_CROSSING = 3

H_MIN = 1e-12

# Dormand-Prince 5(4) tableau
C2, C3, C4, C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
A21 = 1.0 / 5.0
A31, A32 = 3.0 / 40.0, 9.0 / 40.0
A41, A42, A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
A51, A52, A53, A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
A61, A62, A63, A64, A65 = (
    9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0,
)
A71, A73, A74, A75, A76 = (
    35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0,
)
E1, E3, E4, E5, E6, E7 = (
    71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0,
    22.0 / 525.0, -1.0 / 40.0,
)
# continuous extension (Hairer, Norsett & Wanner, dopri5 contd5)
D1 = -12715105075.0 / 11282082432.0
D3 = 87487479700.0 / 32700410799.0
D4 = -10690763975.0 / 1880347072.0
D5 = 701980252875.0 / 199316789632.0
D6 = -1453857185.0 / 822651844.0
D7 = 69997945.0 / 29380423.0


def dim(mode: int) -> int:
    return (3, 6, 12)[mode]


# ---------------------------------------------------------------------------
# functional responses


@njit
def resp(kind, a, b, u):
    if kind < 0.5:
        return a * u / (1.0 + b * u)
    return -a * math.expm1(-b * u)


@njit
def resp_d1(kind, a, b, u):
    if kind < 0.5:
        q = 1.0 + b * u
        return a / (q * q)
    return a * b * math.exp(-b * u)


@njit
def resp_d2(kind, a, b, u):
    if kind < 0.5:
        q = 1.0 + b * u
        return -2.0 * a * b / (q * q * q)
    return -a * b * b * math.exp(-b * u)


# ---------------------------------------------------------------------------
# vector field


@njit
def jacobian_into(p, x, y, z, J):
    f1 = resp(p[0], p[1], p[2], x)
    f2 = resp(p[3], p[4], p[5], y)
    g1 = resp_d1(p[0], p[1], p[2], x)
    g2 = resp_d1(p[3], p[4], p[5], y)
    J[0, 0] = 1.0 - 2.0 * x - y * g1
    J[0, 1] = -f1
    J[0, 2] = 0.0
    J[1, 0] = y * g1
    J[1, 1] = f1 - p[6] - z * g2
    J[1, 2] = -f2
    J[2, 0] = 0.0
    J[2, 1] = z * g2
    J[2, 2] = f2 - p[7]


@njit
def field(mode, p, s, out):
    x = s[0]
    y = s[1]
    z = s[2]
    f1 = resp(p[0], p[1], p[2], x)
    f2 = resp(p[3], p[4], p[5], y)
    out[0] = x - x * x - f1 * y
    out[1] = f1 * y - p[6] * y - f2 * z
    out[2] = f2 * z - p[7] * z
    if mode == 0:
        return
    g1 = resp_d1(p[0], p[1], p[2], x)
    g2 = resp_d1(p[3], p[4], p[5], y)
    j00 = 1.0 - 2.0 * x - y * g1
    j01 = -f1
    j10 = y * g1
    j11 = f1 - p[6] - z * g2
    j12 = -f2
    j21 = z * g2
    j22 = f2 - p[7]
    if mode == 1:
        v0 = s[3]
        v1 = s[4]
        v2 = s[5]
        out[3] = j00 * v0 + j01 * v1
        out[4] = j10 * v0 + j11 * v1 + j12 * v2
        out[5] = j21 * v1 + j22 * v2
        return
    for c in range(3):
        m0 = s[3 + c]
        m1 = s[6 + c]
        m2 = s[9 + c]
        out[3 + c] = j00 * m0 + j01 * m1
        out[6 + c] = j10 * m0 + j11 * m1 + j12 * m2
        out[9 + c] = j21 * m1 + j22 * m2


# ---------------------------------------------------------------------------
# one Dormand-Prince step


@njit
def _attempt(mode, p, y, h, k, ytmp, ynew, rtol, atol):
    """Stages 2..7 given k[0] = f(y); fills ``ynew`` and k[6] = f(ynew).

    Returns the scaled RMS error estimate.
    """
    n = y.shape[0]
    for i in range(n):
        ytmp[i] = y[i] + h * A21 * k[0, i]
    field(mode, p, ytmp, k[1])
    for i in range(n):
        ytmp[i] = y[i] + h * (A31 * k[0, i] + A32 * k[1, i])
    field(mode, p, ytmp, k[2])
    for i in range(n):
        ytmp[i] = y[i] + h * (A41 * k[0, i] + A42 * k[1, i] + A43 * k[2, i])
    field(mode, p, ytmp, k[3])
    for i in range(n):
        ytmp[i] = y[i] + h * (A51 * k[0, i] + A52 * k[1, i] + A53 * k[2, i]
                              + A54 * k[3, i])
    field(mode, p, ytmp, k[4])
    for i in range(n):
        ytmp[i] = y[i] + h * (A61 * k[0, i] + A62 * k[1, i] + A63 * k[2, i]
                              + A64 * k[3, i] + A65 * k[4, i])
    field(mode, p, ytmp, k[5])
    for i in range(n):
        ynew[i] = y[i] + h * (A71 * k[0, i] + A73 * k[2, i] + A74 * k[3, i]
                              + A75 * k[4, i] + A76 * k[5, i])
    field(mode, p, ynew, k[6])
    acc = 0.0
    for i in range(n):
        e = h * (E1 * k[0, i] + E3 * k[2, i] + E4 * k[3, i] + E5 * k[4, i]
                 + E6 * k[5, i] + E7 * k[6, i])
        sc = atol + rtol * max(abs(y[i]), abs(ynew[i]))
        acc += (e / sc) ** 2
    return math.sqrt(acc / n)


@njit
def _next_h(err, h, facold, hmax):
    # PI controller, beta = 0.04
    fac11 = err ** 0.17
    if err <= 1.0:
        fac = fac11 / facold ** 0.04
        fac = max(0.1, min(5.0, fac / 0.9))
        return min(h / fac, hmax)
    return h / min(5.0, fac11 / 0.9)


@njit
def _initial_h(mode, p, y, f0, rtol, atol, hmax):
    n = y.shape[0]
    d0 = 0.0
    d1 = 0.0
    for i in range(n):
        sc = atol + rtol * abs(y[i])
        d0 += (y[i] / sc) ** 2
        d1 += (f0[i] / sc) ** 2
    d0 = math.sqrt(d0 / n)
    d1 = math.sqrt(d1 / n)
    if d0 < 1e-5 or d1 < 1e-5:
        h = 1e-6
    else:
        h = 0.01 * d0 / d1
    return min(max(h, 1e-8), hmax)


@njit
def _clamp(mode, p, y, f):
    """Zero negative population components; refresh ``f`` if touched."""
    touched = False
    for i in range(3):
        if y[i] < 0.0:
            y[i] = 0.0
            touched = True
    if touched:
        field(mode, p, y, f)


@njit
def _dense_coeffs(y, ynew, k, h, rc, m):
    for i in range(m):
        ydiff = ynew[i] - y[i]
        bspl = h * k[0, i] - ydiff
        rc[0, i] = y[i]
        rc[1, i] = ydiff
        rc[2, i] = bspl
        rc[3, i] = ydiff - h * k[6, i] - bspl
        rc[4, i] = h * (D1 * k[0, i] + D3 * k[2, i] + D4 * k[3, i] + D5 * k[4, i]
                        + D6 * k[5, i] + D7 * k[6, i])


@njit
def dense_eval(rc, theta, i):
    t1 = 1.0 - theta
    return rc[0, i] + theta * (rc[1, i] + t1 * (rc[2, i] + theta * (rc[3, i]
                                                                    + t1 * rc[4, i])))


@njit
def dense_slope(rc, theta, i):
    """d/dtheta of the interpolant (multiply by 1/h for d/dt)."""
    return (rc[1, i] + (1.0 - 2.0 * theta) * rc[2, i]
            + (2.0 * theta - 3.0 * theta * theta) * rc[3, i]
            + 2.0 * theta * (1.0 - theta) * (1.0 - 2.0 * theta) * rc[4, i])


@njit
def _section_value(rc, theta, nvec, c):
    return (nvec[0] * dense_eval(rc, theta, 0) + nvec[1] * dense_eval(rc, theta, 1)
            + nvec[2] * dense_eval(rc, theta, 2) - c)


@njit
def _illinois_section(rc, nvec, c, fa, fb, h):
    a = 0.0
    b = 1.0
    side = 0
    for _ in range(200):
        m = (a * fb - b * fa) / (fb - fa)
        fm = _section_value(rc, m, nvec, c)
        if fm == 0.0:
            return m
        if (fm > 0.0) == (fb > 0.0):
            b = m
            fb = fm
            if side == 1:
                fa *= 0.5
            side = 1
        else:
            a = m
            fa = fm
            if side == -1:
                fb *= 0.5
            side = -1
        if (b - a) * h < 1e-13:
            break
    return 0.5 * (a + b)


@njit
def _illinois_slope(rc, i, fa, fb, h):
    a = 0.0
    b = 1.0
    side = 0
    for _ in range(200):
        m = (a * fb - b * fa) / (fb - fa)
        fm = dense_slope(rc, m, i)
        if fm == 0.0:
            return m
        if (fm > 0.0) == (fb > 0.0):
            b = m
            fb = fm
            if side == 1:
                fa *= 0.5
            side = 1
        else:
            a = m
            fa = fm
            if side == -1:
                fb *= 0.5
            side = -1
        if (b - a) * h < 1e-13:
            break
    return 0.5 * (a + b)


# ---------------------------------------------------------------------------
# drivers


@njit
def integrate_final(mode, p, y0, t0, t1, rtol, atol, hmax, max_steps):
    """Integrate to exactly ``t1``; returns (y, status, n_accepted)."""
    n = y0.shape[0]
    y = y0.copy()
    ynew = np.empty(n)
    ytmp = np.empty(n)
    k = np.empty((7, n))
    field(mode, p, y, k[0])
    _clamp(mode, p, y, k[0])
    if t1 <= t0:
        return y, OK, 0
    h = _initial_h(mode, p, y, k[0], rtol, atol, hmax)
    facold = 1e-4
    t = t0
    nacc = 0
    steps = 0
    while t < t1:
        last = False
        hs = h
        if t + hs >= t1:
            hs = t1 - t
            last = True
        err = _attempt(mode, p, y, hs, k, ytmp, ynew, rtol, atol)
        steps += 1
        if steps > max_steps:
            return y, MAX_STEPS, nacc
        if err <= 1.0:
            if last:
                t = t1
            else:
                t += hs
            for i in range(n):
                y[i] = ynew[i]
                k[0, i] = k[6, i]
            _clamp(mode, p, y, k[0])
            nacc += 1
            hn = _next_h(err, hs, facold, hmax)
            facold = max(err, 1e-4)
            if not last or hn < h:
                h = hn
        else:
            h = _next_h(err, hs, facold, hmax)
            if h < H_MIN:
                return y, STEP_UNDERFLOW, nacc
    return y, OK, nacc


@njit
def integrate_steps(p, y0, t0, t1, rtol, atol, hmax, max_steps):
    """Integrate the 3-D system recording every accepted step.

    Returns (ts, ys, rc, status) with ``rc[j]`` the dense-output
    coefficients of step ``j`` (from ``ts[j]`` to ``ts[j+1]``).
    """
    n = 3
    cap = 1024
    ts = np.empty(cap)
    ys = np.empty((cap, n))
    rc = np.empty((cap, 5, n))
    y = y0.copy()
    ynew = np.empty(n)
    ytmp = np.empty(n)
    k = np.empty((7, n))
    field(0, p, y, k[0])
    _clamp(0, p, y, k[0])
    ts[0] = t0
    for i in range(n):
        ys[0, i] = y[i]
    if t1 <= t0:
        return ts[:1].copy(), ys[:1].copy(), rc[:0].copy(), OK
    h = _initial_h(0, p, y, k[0], rtol, atol, hmax)
    facold = 1e-4
    t = t0
    m = 0
    steps = 0
    status = OK
    while t < t1:
        last = False
        hs = h
        if t + hs >= t1:
            hs = t1 - t
            last = True
        err = _attempt(0, p, y, hs, k, ytmp, ynew, rtol, atol)
        steps += 1
        if steps > max_steps:
            status = MAX_STEPS
            break
        if err <= 1.0:
            if m + 1 >= cap:
                cap *= 2
                ts2 = np.empty(cap)
                ys2 = np.empty((cap, n))
                rc2 = np.empty((cap, 5, n))
                ts2[: m + 1] = ts[: m + 1]
                ys2[: m + 1] = ys[: m + 1]
                rc2[:m] = rc[:m]
                ts = ts2
                ys = ys2
                rc = rc2
            _dense_coeffs(y, ynew, k, hs, rc[m], n)
            if last:
                t = t1
            else:
                t += hs
            for i in range(n):
                y[i] = ynew[i]
                k[0, i] = k[6, i]
            _clamp(0, p, y, k[0])
            m += 1
            ts[m] = t
            for i in range(n):
                ys[m, i] = y[i]
            hn = _next_h(err, hs, facold, hmax)
            facold = max(err, 1e-4)
            if not last or hn < h:
                h = hn
        else:
            h = _next_h(err, hs, facold, hmax)
            if h < H_MIN:
                status = STEP_UNDERFLOW
                break
    return ts[: m + 1].copy(), ys[: m + 1].copy(), rc[:m].copy(), status


@njit
def integrate_sample(mode, p, y0, t0, touts, rtol, atol, hmax, max_steps):
    """States at the sorted output times ``touts`` (all >= t0)."""
    n = y0.shape[0]
    nout = touts.shape[0]
    out = np.empty((nout, n))
    y = y0.copy()
    ynew = np.empty(n)
    ytmp = np.empty(n)
    k = np.empty((7, n))
    rc = np.empty((5, n))
    field(mode, p, y, k[0])
    _clamp(mode, p, y, k[0])
    j = 0
    while j < nout and touts[j] <= t0:
        for i in range(n):
            out[j, i] = y[i]
        j += 1
    if j == nout:
        return out, OK
    t1 = touts[nout - 1]
    h = _initial_h(mode, p, y, k[0], rtol, atol, hmax)
    facold = 1e-4
    t = t0
    steps = 0
    while t < t1:
        last = False
        hs = h
        if t + hs >= t1:
            hs = t1 - t
            last = True
        err = _attempt(mode, p, y, hs, k, ytmp, ynew, rtol, atol)
        steps += 1
        if steps > max_steps:
            return out[:j].copy(), MAX_STEPS
        if err <= 1.0:
            tn = t1 if last else t + hs
            _dense_coeffs(y, ynew, k, hs, rc, n)
            while j < nout and touts[j] <= tn:
                if touts[j] == tn:
                    for i in range(n):
                        out[j, i] = ynew[i]
                else:
                    th = (touts[j] - t) / hs
                    for i in range(n):
                        out[j, i] = dense_eval(rc, th, i)
                for i in range(3):
                    if out[j, i] < 0.0:
                        out[j, i] = 0.0
                j += 1
            t = tn
            for i in range(n):
                y[i] = ynew[i]
                k[0, i] = k[6, i]
            _clamp(mode, p, y, k[0])
            hn = _next_h(err, hs, facold, hmax)
            facold = max(err, 1e-4)
            if not last or hn < h:
                h = hn
        else:
            h = _next_h(err, hs, facold, hmax)
            if h < H_MIN:
                return out[:j].copy(), STEP_UNDERFLOW
    return out, OK


@njit
def window_scan(p, y0, t0, t_window, rtol, atol, hmax, max_steps,
                lyap, tau, t_warm, cap):
    """Post-transient analysis of one window.

    Records every local maximum of x, y and z (located on the dense
    interpolant), componentwise min/max over step points and, when ``lyap``
    is set, the largest Lyapunov exponent by renormalising one tangent
    vector every ``tau`` time units (accumulation starts after ``t_warm``).

    Returns ``(y_end, maxima, counts, lo, hi, log_sum, n_renorm, status)``.
    """
    mode = 1 if lyap else 0
    n = 6 if lyap else 3
    y = np.zeros(n)
    for i in range(3):
        y[i] = y0[i]
    if lyap:
        s = 1.0 / math.sqrt(3.0)
        y[3] = s
        y[4] = s
        y[5] = s
    ynew = np.empty(n)
    ytmp = np.empty(n)
    k = np.empty((7, n))
    rc = np.empty((5, 3))
    maxima = np.empty((3, cap))
    counts = np.zeros(3, dtype=np.int64)
    lo = np.empty(3)
    hi = np.empty(3)
    field(mode, p, y, k[0])
    _clamp(mode, p, y, k[0])
    for i in range(3):
        lo[i] = y[i]
        hi[i] = y[i]
    t_end = t0 + t_window
    t_next = t0 + tau if lyap else t_end
    if t_next > t_end:
        t_next = t_end
    h = _initial_h(mode, p, y, k[0], rtol, atol, hmax)
    facold = 1e-4
    t = t0
    steps = 0
    log_sum = 0.0
    n_renorm = 0
    status = OK
    while t < t_end:
        hit = False
        hs = h
        if t + hs >= t_next:
            hs = t_next - t
            hit = True
        err = _attempt(mode, p, y, hs, k, ytmp, ynew, rtol, atol)
        steps += 1
        if steps > max_steps:
            status = MAX_STEPS
            break
        if err > 1.0:
            h = _next_h(err, hs, facold, hmax)
            if h < H_MIN:
                status = STEP_UNDERFLOW
                break
            continue
        _dense_coeffs(y, ynew, k, hs, rc, 3)
        for i in range(3):
            if k[0, i] > 0.0 and k[6, i] <= 0.0:
                th = _illinois_slope(rc, i, k[0, i] * hs, k[6, i] * hs, hs)
                if counts[i] < cap:
                    maxima[i, counts[i]] = dense_eval(rc, th, i)
                    counts[i] += 1
        t = t_next if hit else t + hs
        for i in range(n):
            y[i] = ynew[i]
            k[0, i] = k[6, i]
        _clamp(mode, p, y, k[0])
        for i in range(3):
            if y[i] < lo[i]:
                lo[i] = y[i]
            if y[i] > hi[i]:
                hi[i] = y[i]
        hn = _next_h(err, hs, facold, hmax)
        facold = max(err, 1e-4)
        if not hit or hn < h:
            h = hn
        if hit and lyap:
            nrm = math.sqrt(y[3] * y[3] + y[4] * y[4] + y[5] * y[5])
            if t > t0 + t_warm + 0.5 * tau:
                log_sum += math.log(nrm)
                n_renorm += 1
            for i in range(3, 6):
                y[i] /= nrm
            field(mode, p, y, k[0])
        if hit:
            t_next = t_next + tau if lyap else t_end
            if t_next > t_end:
                t_next = t_end
    yend = np.empty(3)
    for i in range(3):
        yend[i] = y[i]
    return yend, maxima, counts, lo, hi, log_sum, n_renorm, status


@njit
def next_crossing(mode, p, y0, t0, nvec, c, direction, t_max, t_min,
                  rtol, atol, hmax, max_steps):
    """First crossing of the plane ``nvec . s = c`` after ``t0 + t_min``.

    ``direction`` > 0 keeps only crossings where ``nvec . s`` increases,
    < 0 only decreasing ones, 0 both.  Returns (state, time, status); the
    state carries all ``mode`` components interpolated at the crossing.
    """
    n = y0.shape[0]
    y = y0.copy()
    ynew = np.empty(n)
    ytmp = np.empty(n)
    k = np.empty((7, n))
    rc = np.empty((5, n))
    out = y0.copy()
    field(mode, p, y, k[0])
    _clamp(mode, p, y, k[0])
    h = _initial_h(mode, p, y, k[0], rtol, atol, hmax)
    facold = 1e-4
    t = t0
    t_end = t0 + t_max
    steps = 0
    s_old = nvec[0] * y[0] + nvec[1] * y[1] + nvec[2] * y[2] - c
    while t < t_end:
        hs = min(h, t_end - t)
        err = _attempt(mode, p, y, hs, k, ytmp, ynew, rtol, atol)
        steps += 1
        if steps > max_steps:
            return out, t, MAX_STEPS
        if err > 1.0:
            h = _next_h(err, hs, facold, hmax)
            if h < H_MIN:
                return out, t, STEP_UNDERFLOW
            continue
        s_new = nvec[0] * ynew[0] + nvec[1] * ynew[1] + nvec[2] * ynew[2] - c
        up = s_old < 0.0 and s_new >= 0.0
        down = s_old > 0.0 and s_new <= 0.0
        if (direction > 0 and up) or (direction < 0 and down) or (direction == 0 and (up or down)):
            _dense_coeffs(y, ynew, k, hs, rc, n)
            th = _illinois_section(rc, nvec, c, s_old, s_new, hs)
            tc = t + th * hs
            if tc - t0 >= t_min:
                for i in range(n):
                    out[i] = dense_eval(rc, th, i)
                for i in range(3):
                    if out[i] < 0.0:
                        out[i] = 0.0
                return out, tc, OK
        t += hs
        for i in range(n):
            y[i] = ynew[i]
            k[0, i] = k[6, i]
        _clamp(mode, p, y, k[0])
        s_old = nvec[0] * y[0] + nvec[1] * y[1] + nvec[2] * y[2] - c
        h = _next_h(err, hs, facold, hmax)
        facold = max(err, 1e-4)
    return out, t, NO_CROSSING
