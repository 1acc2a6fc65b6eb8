# Compiled integrator kernels: Dormand-Prince 5(4) with FSAL, plant right-hand
# sides, ZOH window integration and continuous-feedback rollouts. Mirrors
# pyref.py exactly (same tableau, error norm and step controller); keep the
# two in sync.
import numpy as np

cimport numpy as cnp
from libc.math cimport cos, fabs, isfinite, sin, sqrt

cnp.import_array()

BACKEND_NAME = "native"

PENDULUM = 0
DRIVERLOAD = 1

OK = 0
STEP_UNDERFLOW = 1
MAX_STEPS = 2
NONFINITE = 3

DEF NMAX = 4

cdef double A21 = 1.0 / 5.0
cdef double A31 = 3.0 / 40.0, A32 = 9.0 / 40.0
cdef double A41 = 44.0 / 45.0, A42 = -56.0 / 15.0, A43 = 32.0 / 9.0
cdef double A51 = 19372.0 / 6561.0, A52 = -25360.0 / 2187.0
cdef double A53 = 64448.0 / 6561.0, A54 = -212.0 / 729.0
cdef double A61 = 9017.0 / 3168.0, A62 = -355.0 / 33.0, A63 = 46732.0 / 5247.0
cdef double A64 = 49.0 / 176.0, A65 = -5103.0 / 18656.0
cdef double B1 = 35.0 / 384.0, B3 = 500.0 / 1113.0, B4 = 125.0 / 192.0
cdef double B5 = -2187.0 / 6784.0, B6 = 11.0 / 84.0
cdef double E1 = 71.0 / 57600.0, E3 = -71.0 / 16695.0, E4 = 71.0 / 1920.0
cdef double E5 = -17253.0 / 339200.0, E6 = 22.0 / 525.0, E7 = -1.0 / 40.0


cdef struct Control:
    int mode            # 0: constant u, 1: scaled linear state feedback
    double u
    double c0
    double K[NMAX]
    double ref[NMAX]
    double c[NMAX]


cdef inline double _control(Control* ctl, int n, double* y) noexcept:
    cdef double u = 0.0
    cdef int i
    if ctl.mode == 0:
        return ctl.u
    for i in range(n):
        u -= ctl.K[i] * (ctl.c[i] * y[i] - ctl.ref[i])
    return ctl.c0 * u


cdef inline void _rhs(int kind, double* p, int n, Control* ctl, double* y,
                      double* out) noexcept:
    cdef double u = _control(ctl, n, y)
    cdef double m, l, g, M, mu, th, w, c, s, th_dd, x_dd
    if kind == PENDULUM:
        m = p[0]; l = p[1]; g = p[2]
        out[0] = y[1]
        out[1] = (g / l) * sin(y[0]) + u / (m * l * l)
    else:
        M = p[0]; m = p[1]; l = p[2]; g = p[3]
        mu = m / (M + m)
        th = y[0]; w = y[1]
        c = cos(th); s = sin(th)
        th_dd = (g / l) * (mu * c * (u / (g * m) - (l / g) * w * w * s) - s) / (1.0 - mu * c * c)
        x_dd = g * (u / (m * g) - s * ((l / g) * w * w + c)) / (1.0 / mu - c * c)
        out[0] = w
        out[1] = th_dd
        out[2] = y[3]
        out[3] = x_dd


cdef double _initial_step(int kind, double* p, int n, Control* ctl, double* y,
                          double* f0, double span, double rtol, double atol) noexcept:
    cdef double sc[NMAX]
    cdef double y1[NMAX]
    cdef double f1[NMAX]
    cdef double d0 = 0.0, d1 = 0.0, d2 = 0.0, h0, h1, dm
    cdef int i
    for i in range(n):
        sc[i] = atol + rtol * fabs(y[i])
        d0 += (y[i] / sc[i]) ** 2
        d1 += (f0[i] / sc[i]) ** 2
    d0 = sqrt(d0 / n)
    d1 = sqrt(d1 / n)
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    if h0 > span:
        h0 = span
    for i in range(n):
        y1[i] = y[i] + h0 * f0[i]
    _rhs(kind, p, n, ctl, y1, f1)
    for i in range(n):
        d2 += ((f1[i] - f0[i]) / sc[i]) ** 2
    d2 = sqrt(d2 / n) / h0
    dm = d1 if d1 > d2 else d2
    if dm <= 1e-15:
        h1 = 1e-6 if 1e-6 > h0 * 1e-3 else h0 * 1e-3
    else:
        h1 = (0.01 / dm) ** 0.2
    h0 = 100.0 * h0
    if h1 < h0:
        h0 = h1
    if span < h0:
        h0 = span
    return h0


cdef class _Recorder:
    cdef cnp.ndarray ts, ys, ds
    cdef double[:] tv
    cdef double[:, :] yv, dv
    cdef Py_ssize_t count, cap
    cdef int n

    def __cinit__(self, int n, Py_ssize_t cap):
        self.n = n
        self.cap = cap
        self.count = 0
        self.ts = np.empty(cap, dtype=np.float64)
        self.ys = np.empty((cap, n), dtype=np.float64)
        self.ds = np.empty((cap, n), dtype=np.float64)
        self.tv = self.ts
        self.yv = self.ys
        self.dv = self.ds

    cdef void push(self, double t, double* y, double* f):
        cdef int i
        if self.count == self.cap:
            self.cap *= 2
            self.ts = np.resize(self.ts, self.cap)
            self.ys = np.resize(self.ys, (self.cap, self.n))
            self.ds = np.resize(self.ds, (self.cap, self.n))
            self.tv = self.ts
            self.yv = self.ys
            self.dv = self.ds
        self.tv[self.count] = t
        for i in range(self.n):
            self.yv[self.count, i] = y[i]
            self.dv[self.count, i] = f[i]
        self.count += 1

    cdef tuple arrays(self):
        return (self.ts[:self.count].copy(),
                self.ys[:self.count].copy(),
                self.ds[:self.count].copy())


cdef tuple _dopri5(int kind, double* p, int n, Control* ctl, double* y,
                   double t0, double t_end, double rtol, double atol,
                   double h_start, _Recorder rec, long max_steps):
    # Evolves y in place; returns (t, h_opt, status, nfev).
    cdef double k1[NMAX]
    cdef double k2[NMAX]
    cdef double k3[NMAX]
    cdef double k4[NMAX]
    cdef double k5[NMAX]
    cdef double k6[NMAX]
    cdef double k7[NMAX]
    cdef double yt[NMAX]
    cdef double ynew[NMAX]
    cdef double t = t0, h_opt, h, err2, err, e, sc, fac, tmax
    cdef long nfev = 1, steps = 0
    cdef bint rejected = False, clipped, finite
    cdef int i

    _rhs(kind, p, n, ctl, y, k1)
    if rec is not None:
        rec.push(t, y, k1)
    finite = True
    for i in range(n):
        if not isfinite(k1[i]):
            finite = False
    if not finite:
        return (t, 0.0, NONFINITE, nfev)
    if h_start > 0.0:
        h_opt = h_start
    else:
        h_opt = _initial_step(kind, p, n, ctl, y, k1, t_end - t0, rtol, atol)
        nfev += 1

    while t < t_end:
        steps += 1
        if steps > max_steps:
            return (t, h_opt, MAX_STEPS, nfev)
        h = h_opt
        clipped = False
        if t + h >= t_end:
            h = t_end - t
            clipped = True
        tmax = fabs(t)
        if tmax < 1.0:
            tmax = 1.0
        if h < 1e-14 * tmax:
            return (t, h_opt, STEP_UNDERFLOW, nfev)

        for i in range(n):
            yt[i] = y[i] + h * A21 * k1[i]
        _rhs(kind, p, n, ctl, yt, k2)
        for i in range(n):
            yt[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i])
        _rhs(kind, p, n, ctl, yt, k3)
        for i in range(n):
            yt[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
        _rhs(kind, p, n, ctl, yt, k4)
        for i in range(n):
            yt[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
        _rhs(kind, p, n, ctl, yt, k5)
        for i in range(n):
            yt[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i]
                                + A65 * k5[i])
        _rhs(kind, p, n, ctl, yt, k6)
        for i in range(n):
            ynew[i] = y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i]
                                  + B6 * k6[i])
        _rhs(kind, p, n, ctl, ynew, k7)
        nfev += 6

        err2 = 0.0
        finite = True
        for i in range(n):
            if not isfinite(ynew[i]):
                finite = False
                break
            e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i]
                     + E6 * k6[i] + E7 * k7[i])
            sc = atol + rtol * (fabs(y[i]) if fabs(y[i]) > fabs(ynew[i]) else fabs(ynew[i]))
            err2 += (e / sc) ** 2
        if not finite or not isfinite(err2):
            return (t, h_opt, NONFINITE, nfev)
        err = sqrt(err2 / n)

        if err <= 1.0:
            t = t_end if clipped else t + h
            for i in range(n):
                y[i] = ynew[i]
                k1[i] = k7[i]
            if rec is not None:
                rec.push(t, y, k1)
            if err == 0.0:
                fac = 10.0
            else:
                fac = 0.9 * err ** -0.2
                if fac > 10.0:
                    fac = 10.0
                elif fac < 0.2:
                    fac = 0.2
            if rejected and fac > 1.0:
                fac = 1.0
            h_opt = h * fac
            rejected = False
        else:
            fac = 0.9 * err ** -0.2
            if fac < 0.2:
                fac = 0.2
            h_opt = h * fac
            rejected = True
    return (t, h_opt, OK, nfev)


cdef int _load(double* dst, object src, int nmax) except -1:
    cdef int n = len(src), i
    if n > nmax:
        raise ValueError("state dimension exceeds kernel limit")
    for i in range(n):
        dst[i] = src[i]
    return n


def integrate_window(int kind, object params, object y0, double u,
                     double t0, double t1, double rtol, double atol,
                     h0=None, bint record=False, long max_steps=500000):
    """ZOH window with constant control; mirrors pyref.integrate_window."""
    cdef double p[NMAX]
    cdef double y[NMAX]
    cdef int n
    cdef double hs
    cdef _Recorder rec = None
    _load(p, params, NMAX)
    n = _load(y, y0, NMAX)
    cdef Control ctl
    ctl.mode = 0
    ctl.u = u
    hs = 0.0 if h0 is None else float(h0)
    if record:
        rec = _Recorder(n, 256)
    t, h_opt, status, nfev = _dopri5(kind, p, n, &ctl, y, t0, t1, rtol, atol,
                                     hs, rec, max_steps)
    y_end = [y[i] for i in range(n)]
    return y_end, h_opt, (None if rec is None else rec.arrays()), status, nfev


def rollout_feedback(int kind, object params, object gains, object ref,
                     object scales, double c0, object x0, double t_final,
                     double rtol, double atol, long max_steps=500000):
    """Continuous scaled-feedback rollout; mirrors pyref.rollout_feedback."""
    cdef double p[NMAX]
    cdef double y[NMAX]
    cdef int n
    cdef Control ctl
    _load(p, params, NMAX)
    n = _load(y, x0, NMAX)
    ctl.mode = 1
    ctl.c0 = c0
    _load(ctl.K, gains, NMAX)
    _load(ctl.ref, ref, NMAX)
    _load(ctl.c, scales, NMAX)
    cdef _Recorder rec = _Recorder(n, 1024)
    t, h_opt, status, nfev = _dopri5(kind, p, n, &ctl, y, 0.0, t_final,
                                     rtol, atol, 0.0, rec, max_steps)
    return rec.arrays(), status, nfev
