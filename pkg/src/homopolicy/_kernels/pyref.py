"""Pure-Python integrator kernels.

Reference twin of the compiled extension in ``_native.pyx``: same
Dormand-Prince 5(4) pair (FSAL), same error norm and step controller, so
both backends are interchangeable behind :mod:`homopolicy._kernels`.
Plain floats and small lists are used on purpose — for 2-4 state plants
they beat numpy arrays by an order of magnitude.
"""
import math

BACKEND_NAME = "python"

PENDULUM = 0
DRIVERLOAD = 1

# status codes shared with the native kernel
OK = 0
STEP_UNDERFLOW = 1
MAX_STEPS = 2
NONFINITE = 3

_MAX_STEPS_DEFAULT = 500_000

# Dormand-Prince 5(4) tableau
_A21 = 1.0 / 5.0
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = (19372.0 / 6561.0, -25360.0 / 2187.0,
                          64448.0 / 6561.0, -212.0 / 729.0)
_A61, _A62, _A63, _A64, _A65 = (9017.0 / 3168.0, -355.0 / 33.0,
                                46732.0 / 5247.0, 49.0 / 176.0,
                                -5103.0 / 18656.0)
_B1, _B3, _B4, _B5, _B6 = (35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0,
                           -2187.0 / 6784.0, 11.0 / 84.0)
# b - bhat, for the embedded 4th-order error estimate
_E1, _E3, _E4, _E5, _E6, _E7 = (71.0 / 57600.0, -71.0 / 16695.0,
                                71.0 / 1920.0, -17253.0 / 339200.0,
                                22.0 / 525.0, -1.0 / 40.0)


def _pendulum_rhs(y, u, p):
    m, l, g = p
    return [y[1], (g / l) * math.sin(y[0]) + u / (m * l * l)]


def _driverload_rhs(y, u, p):
    M, m, l, g = p
    mu = m / (M + m)
    th, w = y[0], y[1]
    c, s = math.cos(th), math.sin(th)
    th_dd = (g / l) * (mu * c * (u / (g * m) - (l / g) * w * w * s) - s) / (1.0 - mu * c * c)
    x_dd = g * (u / (m * g) - s * ((l / g) * w * w + c)) / (1.0 / mu - c * c)
    return [w, th_dd, y[3], x_dd]


def _make_rhs(kind, params, u):
    p = tuple(params)
    if kind == PENDULUM:
        return lambda y: _pendulum_rhs(y, u, p)
    if kind == DRIVERLOAD:
        return lambda y: _driverload_rhs(y, u, p)
    raise ValueError(f"unknown plant kind {kind}")


def _initial_step(rhs, y, f0, span, rtol, atol):
    # Hairer-style automatic first step; deterministic, 1 extra rhs eval.
    n = len(y)
    sc = [atol + rtol * abs(y[i]) for i in range(n)]
    d0 = math.sqrt(sum((y[i] / sc[i]) ** 2 for i in range(n)) / n)
    d1 = math.sqrt(sum((f0[i] / sc[i]) ** 2 for i in range(n)) / n)
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, span)
    y1 = [y[i] + h0 * f0[i] for i in range(n)]
    f1 = rhs(y1)
    d2 = math.sqrt(sum(((f1[i] - f0[i]) / sc[i]) ** 2 for i in range(n)) / n) / h0
    dm = max(d1, d2)
    h1 = max(1e-6, h0 * 1e-3) if dm <= 1e-15 else (0.01 / dm) ** 0.2
    return min(100.0 * h0, h1, span)


def _dopri5(rhs, y, t0, t_end, rtol, atol, h_start, record, max_steps):
    """Core adaptive loop. Returns (y, t, h_opt, status, nfev, rec).

    ``rec`` is a list of (t, y-list, f-list) accepted points (incl. t0)
    when ``record`` else None. ``h_opt`` is the unclipped suggested next
    step, suitable for carrying across ZOH windows.
    """
    n = len(y)
    y = list(y)
    t = t0
    f = rhs(y)
    nfev = 1
    rec = None
    if record:
        rec = [(t, list(y), list(f))]
    if not all(math.isfinite(v) for v in f):
        return y, t, 0.0, NONFINITE, nfev, rec
    if h_start is not None and h_start > 0.0:
        h_opt = h_start
    else:
        h_opt = _initial_step(rhs, y, f, t_end - t0, rtol, atol)
        nfev += 1
    rejected = False
    steps = 0
    while t < t_end:
        steps += 1
        if steps > max_steps:
            return y, t, h_opt, MAX_STEPS, nfev, rec
        h = h_opt
        clipped = False
        if t + h >= t_end:
            h = t_end - t
            clipped = True
        if h < 1e-14 * max(abs(t), 1.0):
            return y, t, h_opt, STEP_UNDERFLOW, nfev, rec

        k1 = f
        yt = [y[i] + h * _A21 * k1[i] for i in range(n)]
        k2 = rhs(yt)
        yt = [y[i] + h * (_A31 * k1[i] + _A32 * k2[i]) for i in range(n)]
        k3 = rhs(yt)
        yt = [y[i] + h * (_A41 * k1[i] + _A42 * k2[i] + _A43 * k3[i]) for i in range(n)]
        k4 = rhs(yt)
        yt = [y[i] + h * (_A51 * k1[i] + _A52 * k2[i] + _A53 * k3[i] + _A54 * k4[i])
              for i in range(n)]
        k5 = rhs(yt)
        yt = [y[i] + h * (_A61 * k1[i] + _A62 * k2[i] + _A63 * k3[i] + _A64 * k4[i]
                          + _A65 * k5[i]) for i in range(n)]
        k6 = rhs(yt)
        ynew = [y[i] + h * (_B1 * k1[i] + _B3 * k3[i] + _B4 * k4[i] + _B5 * k5[i]
                            + _B6 * k6[i]) for i in range(n)]
        k7 = rhs(ynew)  # FSAL
        nfev += 6

        err2 = 0.0
        finite = True
        for i in range(n):
            if not math.isfinite(ynew[i]):
                finite = False
                break
            e = h * (_E1 * k1[i] + _E3 * k3[i] + _E4 * k4[i] + _E5 * k5[i]
                     + _E6 * k6[i] + _E7 * k7[i])
            sc = atol + rtol * max(abs(y[i]), abs(ynew[i]))
            err2 += (e / sc) ** 2
        if not finite or not math.isfinite(err2):
            return y, t, h_opt, NONFINITE, nfev, rec
        err = math.sqrt(err2 / n)

        if err <= 1.0:
            t = t_end if clipped else t + h
            y = ynew
            f = k7
            if record:
                rec.append((t, list(y), list(f)))
            fac = 10.0 if err == 0.0 else min(10.0, max(0.2, 0.9 * err ** -0.2))
            if rejected:
                fac = min(fac, 1.0)
            h_opt = h * fac
            rejected = False
        else:
            h_opt = h * max(0.2, 0.9 * err ** -0.2)
            rejected = True
    return y, t, h_opt, OK, nfev, rec


def integrate_window(kind, params, y0, u, t0, t1, rtol, atol, h0=None,
                     record=False, max_steps=_MAX_STEPS_DEFAULT):
    """Integrate one zero-order-hold window with constant control ``u``.

    Returns (y_end, h_next, rec, status, nfev); ``rec`` as in _dopri5.
    """
    rhs = _make_rhs(kind, params, u)
    y, _, h_opt, status, nfev, rec = _dopri5(
        rhs, y0, t0, t1, rtol, atol, h0, record, max_steps)
    return y, h_opt, rec, status, nfev


def integrate_window_callable(f, params, y0, u, t0, t1, rtol, atol, h0=None,
                              record=False, max_steps=_MAX_STEPS_DEFAULT):
    """Same as integrate_window for a user-supplied derivative f(s, u, params)."""
    def rhs(y):
        return [float(v) for v in f(y, u, params)]
    y, _, h_opt, status, nfev, rec = _dopri5(
        rhs, y0, t0, t1, rtol, atol, h0, record, max_steps)
    return y, h_opt, rec, status, nfev


def rollout_feedback(kind, params, gains, ref, scales, c0, x0, t_final,
                     rtol, atol, max_steps=_MAX_STEPS_DEFAULT):
    """Closed-loop rollout under continuous scaled linear state feedback.

    The control  u = c0 * (-sum_i K_i (c_i x_i - ref_i))  is evaluated at
    every stage (no ZOH); used for homogenizer response generation.
    Returns (rec, status, nfev).
    """
    p = tuple(params)
    K = tuple(gains)
    r = tuple(ref)
    c = tuple(scales)
    n = len(x0)
    base = _pendulum_rhs if kind == PENDULUM else _driverload_rhs

    def rhs(y):
        u = 0.0
        for i in range(n):
            u -= K[i] * (c[i] * y[i] - r[i])
        return base(y, c0 * u, p)

    _, _, _, status, nfev, rec = _dopri5(
        rhs, x0, 0.0, t_final, rtol, atol, None, True, max_steps)
    return rec, status, nfev
