"""Integrator kernel backend selection.

Imports the compiled extension when available, otherwise the pure-Python
twin. ``HOMOPOLICY_BACKEND=python|native`` forces the choice (``native``
raises if the extension is missing). Both expose the same call signatures;
this module adapts the pure backend's record format to numpy arrays so
callers never see the difference.
"""
import os

import numpy as np

from . import pyref

_choice = os.environ.get("HOMOPOLICY_BACKEND", "auto").lower()

if _choice == "python":
    _impl = pyref
elif _choice == "native":
    from . import _native as _impl
else:
    try:
        from . import _native as _impl
    except ImportError:
        _impl = pyref

BACKEND = _impl.BACKEND_NAME

PENDULUM = pyref.PENDULUM
DRIVERLOAD = pyref.DRIVERLOAD
OK = pyref.OK
STEP_UNDERFLOW = pyref.STEP_UNDERFLOW
MAX_STEPS = pyref.MAX_STEPS
NONFINITE = pyref.NONFINITE

STATUS_LABELS = {
    STEP_UNDERFLOW: "step size underflow",
    MAX_STEPS: "step budget exceeded",
    NONFINITE: "non-finite state",
}


def _rec_to_arrays(rec):
    if rec is None:
        return None
    ts = np.array([r[0] for r in rec], dtype=np.float64)
    ys = np.array([r[1] for r in rec], dtype=np.float64)
    ds = np.array([r[2] for r in rec], dtype=np.float64)
    return ts, ys, ds


def integrate_window(kind, params, y0, u, t0, t1, rtol, atol, h0=None,
                     record=False):
    """One ZOH window; returns (y_end, h_next, (ts, ys, ds)|None, status, nfev)."""
    y, h_next, rec, status, nfev = _impl.integrate_window(
        kind, params, y0, float(u), t0, t1, rtol, atol, h0, record)
    if _impl is pyref:
        rec = _rec_to_arrays(rec)
    return y, h_next, rec, status, nfev


def integrate_window_callable(f, params, y0, u, t0, t1, rtol, atol, h0=None,
                              record=False):
    """ZOH window for a user-supplied derivative; always the Python stepper."""
    y, h_next, rec, status, nfev = pyref.integrate_window_callable(
        f, params, y0, float(u), t0, t1, rtol, atol, h0, record)
    return y, h_next, _rec_to_arrays(rec), status, nfev


def rollout_feedback(kind, params, gains, ref, scales, c0, x0, t_final,
                     rtol, atol):
    """Continuous scaled-feedback rollout; returns ((ts, ys, ds), status, nfev)."""
    rec, status, nfev = _impl.rollout_feedback(
        kind, params, gains, ref, scales, c0, x0, t_final, rtol, atol)
    if _impl is pyref:
        rec = _rec_to_arrays(rec)
    return rec, status, nfev
