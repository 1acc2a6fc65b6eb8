"""Plant models, trajectories, and the sampled-data ODE integrator.

Two plants are built in: a torque-driven pendulum (angle measured from the
upright position, so x1 = 0 is the balance target) and a planar driver
carrying a cable-slung load. Control is applied with a zero-order hold:
the controller is sampled every ``control_period`` seconds and the plant
is integrated between samples with an adaptive Dormand-Prince pair.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from . import _kernels

TWO_PI = 2.0 * math.pi


class InvalidInputError(ValueError):
    """Raised for non-finite or structurally inconsistent inputs."""


class IntegrationError(RuntimeError):
    """Integration failed; carries the partial trajectory accumulated so far."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


def _require_positive(**kwargs):
    for name, value in kwargs.items():
        if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
            raise InvalidInputError(f"{name} must be positive and finite, got {value!r}")


@dataclass(frozen=True)
class PendulumParams:
    """Point-mass pendulum: mass m [kg], length l [m], gravity g [m/s^2]."""

    m: float
    l: float
    g: float = 9.81

    def __post_init__(self):
        _require_positive(m=self.m, l=self.l, g=self.g)

    @property
    def kind(self):
        return _kernels.PENDULUM

    def as_tuple(self):
        return (self.m, self.l, self.g)

    @property
    def n_states(self):
        return 2


@dataclass(frozen=True)
class DriverLoadParams:
    """Driver of mass M [kg] carrying a load m [kg] on a cable of length l [m]."""

    M: float
    m: float
    l: float
    g: float = 9.81

    def __post_init__(self):
        _require_positive(M=self.M, m=self.m, l=self.l, g=self.g)

    @property
    def mu(self):
        """Mass ratio m/(M+m); the parameter that survives normalization."""
        return self.m / (self.M + self.m)

    @property
    def kind(self):
        return _kernels.DRIVERLOAD

    def as_tuple(self):
        return (self.M, self.m, self.l, self.g)

    @property
    def n_states(self):
        return 4


PlantParams = PendulumParams | DriverLoadParams


def wrap_angle(a):
    """Wrap an angle (scalar or array) to [-pi, pi)."""
    return (a + math.pi) % TWO_PI - math.pi


def _check_state(s, n, u=None):
    s = np.asarray(s, dtype=float)
    if s.shape != (n,):
        raise InvalidInputError(f"expected state of shape ({n},), got {s.shape}")
    if not np.all(np.isfinite(s)):
        raise InvalidInputError("non-finite state")
    if u is not None and not math.isfinite(u):
        raise InvalidInputError("non-finite control")
    return s


def pendulum_derivative(s, u, p: PendulumParams):
    """d/dt (theta, theta_dot) under torque u; theta from the upright."""
    s = _check_state(s, 2, u)
    return np.array([s[1],
                     (p.g / p.l) * math.sin(s[0]) + u / (p.m * p.l * p.l)])


def driverload_derivative(s, F, p: DriverLoadParams):
    """d/dt (theta, theta_dot, x, x_dot) under driver force F.

    Closed form of the coupled driver/load equations solved for the two
    accelerations; validated in the tests against a direct 2x2 linear solve
    of the mass matrix.
    """
    s = _check_state(s, 4, F)
    mu = p.mu
    th, w = s[0], s[1]
    c, sn = math.cos(th), math.sin(th)
    th_dd = (p.g / p.l) * (mu * c * (F / (p.g * p.m) - (p.l / p.g) * w * w * sn) - sn) \
        / (1.0 - mu * c * c)
    x_dd = p.g * (F / (p.m * p.g) - sn * ((p.l / p.g) * w * w + c)) \
        / (1.0 / mu - c * c)
    return np.array([w, th_dd, s[3], x_dd])


def driverload_accelerations_bruteforce(s, F, p: DriverLoadParams):
    """(theta_dd, x_dd) via a numeric 2x2 solve of the coupled equations.

    Independent of the closed form above; kept as the oracle route.
    """
    s = _check_state(s, 4, F)
    th, w = s[0], s[1]
    A = np.array([[p.M + p.m, -p.m * p.l * math.cos(th)],
                  [-math.cos(th), p.l]])
    b = np.array([F - p.m * p.l * math.sin(th) * w * w,
                  -p.g * math.sin(th)])
    x_dd, th_dd = np.linalg.solve(A, b)
    return th_dd, x_dd


def pendulum_energy(states, p: PendulumParams):
    """Mechanical energy 0.5*m*l^2*w^2 + m*g*l*cos(theta) per sample.

    Conserved by the unforced pendulum; theta is measured from the upright,
    so the potential term carries a plus sign.
    """
    states = np.atleast_2d(np.asarray(states, dtype=float))
    return 0.5 * p.m * p.l ** 2 * states[:, 1] ** 2 \
        + p.m * p.g * p.l * np.cos(states[:, 0])


@dataclass(frozen=True)
class SimConfig:
    """Horizon, ZOH sampling period, integrator tolerances, initial state."""

    t_final: float
    x0: tuple
    control_period: float = 0.05
    rtol: float = 1e-8
    atol: float = 1e-10

    def __post_init__(self):
        _require_positive(t_final=self.t_final, control_period=self.control_period,
                          rtol=self.rtol, atol=self.atol)
        n = round(self.t_final / self.control_period)
        if n < 1 or abs(n * self.control_period - self.t_final) > 1e-9 * self.t_final:
            raise InvalidInputError(
                f"control_period {self.control_period} does not divide "
                f"t_final {self.t_final}")

    @property
    def n_windows(self):
        return round(self.t_final / self.control_period)


@dataclass(frozen=True)
class Trajectory:
    """Sampled solution: times, states, held controls, state derivatives.

    Samples include every control instant plus the integrator's interior
    accept points. ``controls[i]`` is the control held on [times[i],
    times[i+1]); the final sample repeats the last held value. ``derivs``
    enables cubic Hermite interpolation that respects the control jumps.
    """

    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray
    derivs: np.ndarray | None = None

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or len(t) < 1:
            raise InvalidInputError("times must be a non-empty 1-d array")
        if np.any(np.diff(t) <= 0):
            raise InvalidInputError("times must be strictly increasing")
        if self.states.shape[0] != len(t) or self.controls.shape[0] != len(t):
            raise InvalidInputError("states/controls length mismatch with times")
        if self.derivs is not None and self.derivs.shape != self.states.shape:
            raise InvalidInputError("derivs shape mismatch with states")

    @property
    def n_states(self):
        return self.states.shape[1]

    @property
    def duration(self):
        return float(self.times[-1] - self.times[0])

    def channel(self, index):
        """(times, values) pair for one state channel."""
        return self.times, self.states[:, index]

    def interpolator(self, index):
        """Cubic Hermite interpolant of one state channel.

        Uses the recorded derivatives so accuracy is O(h^4) inside each
        ZOH window and no smoothing leaks across control jumps.
        """
        if self.derivs is None:
            raise InvalidInputError("trajectory has no recorded derivatives")
        return CubicHermiteSpline(self.times, self.states[:, index],
                                  self.derivs[:, index])

    def at_times(self, t_query, index):
        return self.interpolator(index)(np.asarray(t_query, dtype=float))

    def control_instant_indices(self, period):
        """Indices of samples lying on the k*period grid (within rounding)."""
        k = np.rint(self.times / period)
        on_grid = np.abs(self.times - k * period) <= 1e-9 * max(1.0, self.times[-1])
        idx = np.flatnonzero(on_grid)
        # keep one sample per grid point (window boundaries are recorded once)
        _, first = np.unique(k[idx], return_index=True)
        return idx[first]

    def to_csv(self, path):
        write_trajectory_csv(self, path)


def write_trajectory_csv(traj: Trajectory, path):
    """CSV export with header t,x1,...,xn,u at 17 significant digits."""
    n = traj.n_states
    header = "t," + ",".join(f"x{i + 1}" for i in range(n)) + ",u"
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for i in range(len(traj.times)):
            row = [traj.times[i], *traj.states[i], traj.controls[i]]
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def read_trajectory_csv(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return Trajectory(times=data[:, 0], states=data[:, 1:-1],
                      controls=data[:, -1])


def concat_trajectories(parts: Sequence[Trajectory]):
    """Join contiguous segments (each starting where the previous ended)."""
    if not parts:
        raise InvalidInputError("nothing to concatenate")
    times = [parts[0].times]
    states = [parts[0].states]
    controls = [parts[0].controls]
    derivs = [parts[0].derivs]
    for prev, seg in zip(parts, parts[1:]):
        if abs(seg.times[0] - prev.times[-1]) > 1e-9:
            raise InvalidInputError("segments are not contiguous")
        times.append(seg.times[1:])
        states.append(seg.states[1:])
        controls.append(seg.controls[1:])
        derivs.append(None if seg.derivs is None else seg.derivs[1:])
    d = None if any(x is None for x in derivs) else np.concatenate(derivs)
    return Trajectory(np.concatenate(times), np.concatenate(states),
                      np.concatenate(controls), d)


def integrate(plant, controller: Callable, config: SimConfig,
              derivative: Callable | None = None) -> Trajectory:
    """Simulate ``plant`` under a sampled controller with zero-order hold.

    ``controller(t, state) -> u`` is called once per control instant with
    the current (unwrapped) state and its output is held for one period.
    Between instants the state advances by the adaptive Dormand-Prince
    stepper in the selected kernel backend. Passing ``derivative`` routes
    a custom ``f(state, u, plant)`` through the pure-Python stepper
    instead of the built-in plant right-hand sides.

    Raises IntegrationError (with ``.partial``) on step-size underflow or
    a non-finite state.
    """
    if derivative is None and not isinstance(plant, (PendulumParams, DriverLoadParams)):
        raise InvalidInputError("built-in integration needs PendulumParams or "
                                "DriverLoadParams; pass derivative= otherwise")
    n = len(config.x0)
    y = [float(v) for v in config.x0]
    if not all(math.isfinite(v) for v in y):
        raise InvalidInputError("non-finite initial state")

    period = config.control_period
    times = [0.0]
    states = [list(y)]
    derivs_rec = [None]  # patched after the first window
    controls = [0.0]
    h_carry = None

    def fail(status, k):
        m = len(times)
        traj = Trajectory(np.array(times[:m]), np.array(states[:m], dtype=float),
                          np.array(controls[:m], dtype=float))
        label = _kernels.STATUS_LABELS.get(status, f"status {status}")
        raise IntegrationError(
            f"integration failed ({label}) in window {k} of {config.n_windows}",
            partial=traj)

    for k in range(config.n_windows):
        t0 = k * period
        t1 = config.t_final if k == config.n_windows - 1 else (k + 1) * period
        u = float(controller(t0, np.array(y)))
        if not math.isfinite(u):
            raise InvalidInputError(f"controller returned non-finite control at t={t0}")
        controls[-1] = u
        if derivative is None:
            y, h_carry, rec, status, _ = _kernels.integrate_window(
                plant.kind, plant.as_tuple(), y, u, t0, t1,
                config.rtol, config.atol, h_carry, record=True)
        else:
            y, h_carry, rec, status, _ = _kernels.integrate_window_callable(
                derivative, plant, y, u, t0, t1,
                config.rtol, config.atol, h_carry, record=True)
        ts, ys, ds = rec
        if derivs_rec[0] is None:
            derivs_rec[0] = ds[0]
        for i in range(1, len(ts)):
            times.append(float(ts[i]))
            states.append(ys[i])
            derivs_rec.append(ds[i])
            controls.append(u)
        if status != _kernels.OK:
            fail(status, k)
        if h_carry is not None and h_carry > period:
            h_carry = period

    return Trajectory(np.array(times), np.array(states, dtype=float),
                      np.array(controls, dtype=float),
                      np.array(derivs_rec, dtype=float))
