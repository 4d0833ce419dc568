"""Fixed-step RK4 integration of plant flows and sensitivity equations.

All experiments run at a fixed step (0.01 s by default) so that timing
comparisons between controllers stay deterministic; there is deliberately
no adaptive stepping here.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import IntegrationFailure


@dataclass(frozen=True)
class Flow:
    """A time-dependent vector field ``dx/dt = rhs(t, x)`` of dimension dim."""

    dim: int
    rhs: Callable[[float, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Trajectory:
    """Equally spaced samples of a flow; sample i sits at ``t0 + i * dt``."""

    t0: float
    dt: float
    samples: np.ndarray  # (steps + 1, dim)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.samples.shape[0])

    @property
    def final(self) -> np.ndarray:
        return self.samples[-1]


def steps_for(horizon: float, dt: float) -> int:
    """Number of fixed steps covering the horizon, rounded to nearest.

    The effective horizon is ``steps * dt``; all paper horizons divide the
    0.01 s step exactly, so rounding only guards float noise.
    """
    if horizon <= 0 or dt <= 0:
        raise ValueError("horizon and dt must be positive")
    return max(1, int(np.floor(horizon / dt + 0.5)))


def rk4_step(flow: Flow, t: float, x: np.ndarray, dt: float) -> np.ndarray:
    """One classical fourth-order Runge-Kutta step."""
    rhs = flow.rhs
    half = 0.5 * dt
    k1 = rhs(t, x)
    k2 = rhs(t + half, x + half * k1)
    k3 = rhs(t + half, x + half * k2)
    k4 = rhs(t + dt, x + dt * k3)
    x_next = x + (dt / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
    if not np.isfinite(x_next).all():
        raise IntegrationFailure(
            f"non-finite state after RK4 step at t={t:.6g}", t=t, state=np.asarray(x))
    return x_next


def simulate(flow: Flow, x0, t0: float, horizon: float, dt: float) -> Trajectory:
    """Integrate the flow over ``horizon`` seconds from x0 with fixed RK4 steps."""
    x = np.asarray(x0, dtype=float)
    if x.shape != (flow.dim,):
        raise ValueError(f"x0 has shape {x.shape}, expected ({flow.dim},)")
    steps = steps_for(horizon, dt)
    out = np.empty((steps + 1, flow.dim))
    out[0] = x
    t = t0
    for i in range(steps):
        try:
            x = rk4_step(flow, t, x, dt)
        except IntegrationFailure as exc:
            exc.step = i
            raise
        out[i + 1] = x
        t = t0 + (i + 1) * dt
    return Trajectory(t0=t0, dt=dt, samples=out)


def propagate_final(flow: Flow, x0: np.ndarray, t0: float, steps: int, dt: float) -> np.ndarray:
    """Final state after ``steps`` RK4 steps, without storing the trajectory."""
    x = x0
    t = t0
    for i in range(steps):
        x = rk4_step(flow, t, x, dt)
        t = t0 + (i + 1) * dt
    return x


def co_propagate(flow: Flow, jac_x, jac_u, x0, u, horizon: float, dt: float):
    """Jointly integrate the flow and its input-sensitivity equation.

    The sensitivity ``xi(s) = d x(s) / d u`` obeys
    ``d xi/ds = (df/dx) xi + df/du`` with ``xi(0) = 0``; both systems share
    the RK4 stages so one pass yields the look-ahead state and derivative.
    Returns ``(x_final, xi_final)`` with xi of shape (n, m).
    """
    rhs = flow.rhs
    x = np.asarray(x0, dtype=float)
    u = np.asarray(u, dtype=float)
    n = x.shape[0]
    m = u.shape[0]
    xi = np.zeros((n, m))
    steps = steps_for(horizon, dt)
    half = 0.5 * dt
    sixth = dt / 6.0
    t = 0.0
    for i in range(steps):
        f1 = rhs(t, x)
        g1 = jac_x(x, u) @ xi + jac_u(x, u)

        x2 = x + half * f1
        xi2 = xi + half * g1
        f2 = rhs(t + half, x2)
        g2 = jac_x(x2, u) @ xi2 + jac_u(x2, u)

        x3 = x + half * f2
        xi3 = xi + half * g2
        f3 = rhs(t + half, x3)
        g3 = jac_x(x3, u) @ xi3 + jac_u(x3, u)

        x4 = x + dt * f3
        xi4 = xi + dt * g3
        f4 = rhs(t + dt, x4)
        g4 = jac_x(x4, u) @ xi4 + jac_u(x4, u)

        x = x + sixth * (f1 + 2.0 * (f2 + f3) + f4)
        xi = xi + sixth * (g1 + 2.0 * (g2 + g3) + g4)
        t = (i + 1) * dt
        if not np.isfinite(x).all():
            raise IntegrationFailure(
                f"non-finite state in sensitivity propagation at t={t:.6g}",
                t=t, state=x, step=i)
    if not np.isfinite(xi).all():
        raise IntegrationFailure(
            "non-finite sensitivity at end of propagation", t=t, state=x)
    return x, xi


def sensitivity_propagate(flow: Flow, jac_x, jac_u, x0, u, horizon: float, dt: float) -> np.ndarray:
    """Input sensitivity ``d x(horizon) / d u`` for the input held at u."""
    _, xi = co_propagate(flow, jac_x, jac_u, x0, u, horizon, dt)
    return xi
