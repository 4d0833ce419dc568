"""Benchmark plants, reference signals, and lifting dictionaries.

Three nonlinear plants are bundled: a Van der Pol oscillator (forced
through the second state), an overhead crane whose payload swing angle is
the controlled output, and a differential-drive car tracking a planar
position reference.  Each carries hand-derived Jacobians so the
sensitivity-based derivative method needs no automatic differentiation.

All constructor callables are module-level functions bound with
``functools.partial`` so that models can cross process boundaries.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class SystemModel:
    """A nonlinear plant ``dx/dt = f(x, u)`` with output ``y = x[output_rows]``.

    The tracked output count k must equal the input count m: the controller
    inverts a k-by-m output sensitivity.

    ``sensitivity_step``, when present, performs one RK4 step of the coupled
    state/input-sensitivity system with hand-unrolled arithmetic; it must
    agree with the generic co-propagation and exists purely because the
    long-horizon benchmarks hammer this path.
    """

    name: str
    n: int
    m: int
    k: int
    dynamics: Callable[[np.ndarray, np.ndarray], np.ndarray]
    jac_x: Callable[[np.ndarray, np.ndarray], np.ndarray]
    jac_u: Callable[[np.ndarray, np.ndarray], np.ndarray]
    output_rows: tuple
    params: dict = field(default_factory=dict)
    sensitivity_step: Callable = None

    def __post_init__(self):
        if self.k != self.m:
            raise ValueError(f"{self.name}: need k == m, got k={self.k}, m={self.m}")
        if len(self.output_rows) != self.k:
            raise ValueError(f"{self.name}: output_rows must select k={self.k} rows")

    def output(self, x: np.ndarray) -> np.ndarray:
        """Output map h(x): selection of the tracked state coordinates."""
        return np.asarray(x, dtype=float)[list(self.output_rows)]

    @property
    def output_matrix(self) -> np.ndarray:
        """Constant dh/dx: a k-by-n row-selection matrix."""
        H = np.zeros((self.k, self.n))
        for i, r in enumerate(self.output_rows):
            H[i, r] = 1.0
        return H


@dataclass(frozen=True)
class ReferenceSignal:
    """Time-indexed reference r(t); defined (and finite) beyond t_max so the
    controller may query the look-ahead value r(t + T)."""

    fn: Callable[[float], np.ndarray]
    t_max: float

    def __call__(self, t: float) -> np.ndarray:
        return self.fn(t)


@dataclass(frozen=True)
class BasisDictionary:
    """Ordered observables over (x, u); the first n entries are the state
    coordinates themselves, so projecting a lifted vector recovers x.

    Dictionaries whose observables depend on the input (like the car's
    wheel-speed/heading products) must provide ``lift_jac_u``, the N-by-m
    Jacobian of the lift with respect to u: the look-ahead derivative then
    carries the input's effect on the initial lifted state, without which
    the fitted input matrix alone wildly understates the control authority.
    """

    name: str
    n: int
    m: int
    N: int
    lift: Callable[[np.ndarray, np.ndarray], np.ndarray]
    names: tuple
    lift_jac_u: Callable = None
    lift_jac_x: Callable = None

    def __post_init__(self):
        if self.N < self.n:
            raise ValueError(f"basis {self.name}: need N >= n, got N={self.N}, n={self.n}")
        if len(self.names) != self.N:
            raise ValueError(f"basis {self.name}: {len(self.names)} names for N={self.N}")

    def input_jacobian(self, x, u) -> np.ndarray:
        """d lift / d u at (x, u); zero for input-independent dictionaries."""
        if self.lift_jac_u is None:
            return np.zeros((self.N, self.m))
        return self.lift_jac_u(x, u)

    def state_jacobian(self, x, u) -> np.ndarray:
        """d lift / d x at (x, u); required to differentiate fitted vector
        fields built on this dictionary."""
        if self.lift_jac_x is None:
            raise ValueError(f"basis {self.name} does not provide a state Jacobian")
        return self.lift_jac_x(x, u)


# --- Van der Pol oscillator --------------------------------------------------

def _vdp_dynamics(x, u):
    x1 = x[0]
    x2 = x[1]
    return np.array([x2, -x1 + (1.0 - x1 * x1) * x2 + u[0]])


def _vdp_jac_x(x, u):
    x1 = x[0]
    x2 = x[1]
    return np.array([[0.0, 1.0],
                     [-1.0 - 2.0 * x1 * x2, 1.0 - x1 * x1]])


def _vdp_jac_u(x, u):
    return np.array([[0.0], [1.0]])


def vdp() -> SystemModel:
    """Forced Van der Pol oscillator; the tracked output is the position x1."""
    return SystemModel(
        name="vdp", n=2, m=1, k=1,
        dynamics=_vdp_dynamics, jac_x=_vdp_jac_x, jac_u=_vdp_jac_u,
        output_rows=(0,), params={})


# --- Overhead crane ----------------------------------------------------------
#
# Trolley of mass M driven by a force F, payload of mass m_p on a rigid rod
# of length l.  State is [x, xdot, theta, thetadot]; the payload swing angle
# theta is the tracked (underactuated) output.  The coupled accelerations
# come from solving the 2x2 mass-matrix system
#     [[M + m_p,        m_p l cos(th)], [xdd  ]   [F + m_p l thd^2 sin(th)]
#      [m_p l cos(th),  m_p l^2     ]]  [thdd ] = [-m_p g l sin(th)       ]
# whose determinant m_p l^2 (M + m_p sin^2 th) is positive for any angle.

def _crane_rhs_terms(theta, thetadot, F, M, m_p, l, g):
    s = math.sin(theta)
    c = math.cos(theta)
    det = m_p * l * l * (M + m_p * s * s)
    r1 = F + m_p * l * thetadot * thetadot * s
    r2 = -m_p * g * l * s
    return s, c, det, r1, r2


def _crane_dynamics(x, u, M, m_p, l, g):
    theta = x[2]
    thetadot = x[3]
    s, c, det, r1, r2 = _crane_rhs_terms(theta, thetadot, u[0], M, m_p, l, g)
    xdd = (m_p * l * l * r1 - m_p * l * c * r2) / det
    thdd = ((M + m_p) * r2 - m_p * l * c * r1) / det
    return np.array([x[1], xdd, thetadot, thdd])


def _crane_jac_x(x, u, M, m_p, l, g):
    theta = x[2]
    thetadot = x[3]
    F = u[0]
    s, c, det, r1, r2 = _crane_rhs_terms(theta, thetadot, F, M, m_p, l, g)
    xdd = (m_p * l * l * r1 - m_p * l * c * r2) / det
    thdd = ((M + m_p) * r2 - m_p * l * c * r1) / det

    ddet = 2.0 * m_p * m_p * l * l * s * c
    # numerator derivatives w.r.t. theta and thetadot
    dNx_dth = m_p * l * l * (m_p * l * thetadot * thetadot * c) \
        + m_p * m_p * g * l * l * (c * c - s * s)
    dNx_dtd = 2.0 * m_p * m_p * l ** 3 * thetadot * s
    dNt_dth = -(M + m_p) * m_p * g * l * c + m_p * l * s * r1 \
        - m_p * l * c * (m_p * l * thetadot * thetadot * c)
    dNt_dtd = -2.0 * m_p * m_p * l * l * thetadot * s * c

    return np.array([
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, (dNx_dth - xdd * ddet) / det, dNx_dtd / det],
        [0.0, 0.0, 0.0, 1.0],
        [0.0, 0.0, (dNt_dth - thdd * ddet) / det, dNt_dtd / det],
    ])


def _crane_jac_u(x, u, M, m_p, l, g):
    theta = x[2]
    s = math.sin(theta)
    c = math.cos(theta)
    det = m_p * l * l * (M + m_p * s * s)
    return np.array([[0.0], [m_p * l * l / det], [0.0], [-m_p * l * c / det]])


def crane(M: float = 6.5, m_p: float = 0.5, l: float = 0.75, g: float = 9.81) -> SystemModel:
    """Overhead crane; the tracked output is the payload swing angle theta."""
    if M <= 0 or m_p <= 0 or l <= 0:
        raise ValueError("crane masses and rod length must be positive")
    p = dict(M=M, m_p=m_p, l=l, g=g)
    return SystemModel(
        name="crane", n=4, m=1, k=1,
        dynamics=partial(_crane_dynamics, **p),
        jac_x=partial(_crane_jac_x, **p),
        jac_u=partial(_crane_jac_u, **p),
        output_rows=(2,), params=p)


def crane_energy(x: np.ndarray, M: float = 6.5, m_p: float = 0.5,
                 l: float = 0.75, g: float = 9.81) -> float:
    """Total mechanical energy of the unforced crane; conserved when F = 0."""
    xd = x[1]
    theta = x[2]
    td = x[3]
    kinetic = 0.5 * (M + m_p) * xd * xd + 0.5 * m_p * l * l * td * td \
        + m_p * l * math.cos(theta) * td * xd
    potential = m_p * g * l * (1.0 - math.cos(theta))
    return kinetic + potential


def _crane_balanced_draw(rng, M, m_p, g, x_span, v_span, th_span, thdot_span, f_noise):
    th0 = rng.uniform(-th_span, th_span)
    x0 = np.array([rng.uniform(-x_span, x_span), rng.uniform(-v_span, v_span),
                   th0, rng.uniform(-thdot_span, thdot_span)])
    force = -(M + m_p) * g * math.tan(th0) + rng.uniform(-f_noise, f_noise)
    return x0, np.array([force])


def crane_balanced_sampler(M: float = 6.5, m_p: float = 0.5, g: float = 9.81,
                           x_span: float = 700.0, v_span: float = 140.0,
                           th_span: float = 1.05, thdot_span: float = 0.03,
                           f_noise: float = 1.0):
    """Trial sampler drawing (x0, F) pairs near sustained-tilt equilibria.

    Holding a swing angle requires the trolley force -(M+m) g tan(theta); a
    sustained tilt also drags the trolley position and velocity far from the
    origin, so those coordinates are drawn wide.  Sampling along this
    manifold (plus noise) puts the identification data exactly where the
    swing-tracking loop operates, which uncorrelated box sampling cannot:
    the dictionary has no cos(theta)*F term, so a globally fitted input
    channel is biased wherever large forces meet large angles.
    """
    return partial(_crane_balanced_draw, M=M, m_p=m_p, g=g, x_span=x_span,
                   v_span=v_span, th_span=th_span, thdot_span=thdot_span,
                   f_noise=f_noise)


# --- Differential-drive car --------------------------------------------------

def _car_dynamics(x, u, rho, D):
    theta = x[2]
    c = math.cos(theta)
    s = math.sin(theta)
    v = 0.5 * rho * (u[0] + u[1])
    return np.array([v * c, v * s, (rho / D) * (u[1] - u[0])])


def _car_jac_x(x, u, rho, D):
    theta = x[2]
    c = math.cos(theta)
    s = math.sin(theta)
    v = 0.5 * rho * (u[0] + u[1])
    return np.array([[0.0, 0.0, -v * s],
                     [0.0, 0.0, v * c],
                     [0.0, 0.0, 0.0]])


def _car_jac_u(x, u, rho, D):
    theta = x[2]
    hc = 0.5 * rho * math.cos(theta)
    hs = 0.5 * rho * math.sin(theta)
    return np.array([[hc, hc], [hs, hs], [-rho / D, rho / D]])


def _car_sensitivity_step(x, xi, u, dt, rho, D):
    """One RK4 step of the coupled car state/sensitivity system, unrolled.

    The heading rate depends only on the (frozen) inputs, so the RK4 stage
    angles collapse to three values and every stage derivative reduces to a
    handful of scalar terms.  Stage two and three coincide exactly, which
    the 1-4-1 weights below exploit; the result matches the generic
    co-propagation to rounding error.
    """
    px, py, th = float(x[0]), float(x[1]), float(x[2])
    uL, uR = float(u[0]), float(u[1])
    v = 0.5 * rho * (uL + uR)
    w = (rho / D) * (uR - uL)
    a = 0.5 * rho
    bL = -rho / D
    bR = rho / D
    half_w = 0.5 * dt * w
    s1, c1 = math.sin(th), math.cos(th)
    s2, c2 = math.sin(th + half_w), math.cos(th + half_w)
    s4, c4 = math.sin(th + dt * w), math.cos(th + dt * w)
    sixth = dt / 6.0

    px_next = px + sixth * v * (c1 + 4.0 * c2 + c4)
    py_next = py + sixth * v * (s1 + 4.0 * s2 + s4)
    th_next = th + dt * w

    x00, x01 = float(xi[0, 0]), float(xi[0, 1])
    x10, x11 = float(xi[1, 0]), float(xi[1, 1])
    x20, x21 = float(xi[2, 0]), float(xi[2, 1])
    # d xi0j = -v sin(th) xi2j + a cos(th); d xi1j = v cos(th) xi2j + a sin(th);
    # d xi2j = b_j (constant), so the stage values of xi2j are exact.
    x20_2 = x20 + 0.5 * dt * bL
    x21_2 = x21 + 0.5 * dt * bR
    x20_4 = x20 + dt * bL
    x21_4 = x21 + dt * bR
    x00_next = x00 + sixth * ((-v * s1 * x20 + a * c1)
                              + 4.0 * (-v * s2 * x20_2 + a * c2)
                              + (-v * s4 * x20_4 + a * c4))
    x01_next = x01 + sixth * ((-v * s1 * x21 + a * c1)
                              + 4.0 * (-v * s2 * x21_2 + a * c2)
                              + (-v * s4 * x21_4 + a * c4))
    x10_next = x10 + sixth * ((v * c1 * x20 + a * s1)
                              + 4.0 * (v * c2 * x20_2 + a * s2)
                              + (v * c4 * x20_4 + a * s4))
    x11_next = x11 + sixth * ((v * c1 * x21 + a * s1)
                              + 4.0 * (v * c2 * x21_2 + a * s2)
                              + (v * c4 * x21_4 + a * s4))
    x_next = np.array([px_next, py_next, th_next])
    xi_next = np.array([[x00_next, x01_next],
                        [x10_next, x11_next],
                        [x20_4, x21_4]])
    return x_next, xi_next


def _car_surrogate_sensitivity_step(x, xi, u, dt, coeff):
    """One RK4 step of a car-dictionary surrogate with its sensitivity.

    A fitted vector field on the car dictionary has the form
    ``f = A03 [x y th] + P(u) sin(th) + Q(u) cos(th) + R(u)`` with the input
    mixes P, Q, R constant while u is held, and a state Jacobian that is
    A03 plus a rank-one update in the heading column.  Unrolling those
    constants keeps the long-horizon look-ahead affordable; the result
    matches the generic co-propagation to rounding error.
    """
    (a00, a01, a02, a10, a11, a12, a20, a21, a22,
     c3x, c3y, c3t, c4x, c4y, c4t, c5x, c5y, c5t, c6x, c6y, c6t,
     b0l, b0r, b1l, b1r, b2l, b2r) = coeff
    uL = float(u[0])
    uR = float(u[1])
    px = c3x * uL + c5x * uR
    py = c3y * uL + c5y * uR
    pt = c3t * uL + c5t * uR
    qx = c4x * uL + c6x * uR
    qy = c4y * uL + c6y * uR
    qt = c4t * uL + c6t * uR
    rx = b0l * uL + b0r * uR
    ry = b1l * uL + b1r * uR
    rt = b2l * uL + b2r * uR

    g0 = float(x[0]); g1 = float(x[1]); g2 = float(x[2])
    g3 = float(xi[0, 0]); g4 = float(xi[0, 1]); g5 = float(xi[1, 0])
    g6 = float(xi[1, 1]); g7 = float(xi[2, 0]); g8 = float(xi[2, 1])
    half = 0.5 * dt

    # stage 1 at the step start
    s = math.sin(g2); c = math.cos(g2)
    mx = a02 + px * c - qx * s; my = a12 + py * c - qy * s; mt = a22 + pt * c - qt * s
    k10 = a00 * g0 + a01 * g1 + a02 * g2 + px * s + qx * c + rx
    k11 = a10 * g0 + a11 * g1 + a12 * g2 + py * s + qy * c + ry
    k12 = a20 * g0 + a21 * g1 + a22 * g2 + pt * s + qt * c + rt
    k13 = a00 * g3 + a01 * g5 + mx * g7 + c3x * s + c4x * c + b0l
    k14 = a00 * g4 + a01 * g6 + mx * g8 + c5x * s + c6x * c + b0r
    k15 = a10 * g3 + a11 * g5 + my * g7 + c3y * s + c4y * c + b1l
    k16 = a10 * g4 + a11 * g6 + my * g8 + c5y * s + c6y * c + b1r
    k17 = a20 * g3 + a21 * g5 + mt * g7 + c3t * s + c4t * c + b2l
    k18 = a20 * g4 + a21 * g6 + mt * g8 + c5t * s + c6t * c + b2r

    # stage 2 at the half-step Euler point
    w0 = g0 + half * k10; w1 = g1 + half * k11; w2 = g2 + half * k12
    w3 = g3 + half * k13; w4 = g4 + half * k14; w5 = g5 + half * k15
    w6 = g6 + half * k16; w7 = g7 + half * k17; w8 = g8 + half * k18
    s = math.sin(w2); c = math.cos(w2)
    mx = a02 + px * c - qx * s; my = a12 + py * c - qy * s; mt = a22 + pt * c - qt * s
    k20 = a00 * w0 + a01 * w1 + a02 * w2 + px * s + qx * c + rx
    k21 = a10 * w0 + a11 * w1 + a12 * w2 + py * s + qy * c + ry
    k22 = a20 * w0 + a21 * w1 + a22 * w2 + pt * s + qt * c + rt
    k23 = a00 * w3 + a01 * w5 + mx * w7 + c3x * s + c4x * c + b0l
    k24 = a00 * w4 + a01 * w6 + mx * w8 + c5x * s + c6x * c + b0r
    k25 = a10 * w3 + a11 * w5 + my * w7 + c3y * s + c4y * c + b1l
    k26 = a10 * w4 + a11 * w6 + my * w8 + c5y * s + c6y * c + b1r
    k27 = a20 * w3 + a21 * w5 + mt * w7 + c3t * s + c4t * c + b2l
    k28 = a20 * w4 + a21 * w6 + mt * w8 + c5t * s + c6t * c + b2r

    # stage 3 re-evaluates the half-step point with slope k2
    w0 = g0 + half * k20; w1 = g1 + half * k21; w2 = g2 + half * k22
    w3 = g3 + half * k23; w4 = g4 + half * k24; w5 = g5 + half * k25
    w6 = g6 + half * k26; w7 = g7 + half * k27; w8 = g8 + half * k28
    s = math.sin(w2); c = math.cos(w2)
    mx = a02 + px * c - qx * s; my = a12 + py * c - qy * s; mt = a22 + pt * c - qt * s
    k30 = a00 * w0 + a01 * w1 + a02 * w2 + px * s + qx * c + rx
    k31 = a10 * w0 + a11 * w1 + a12 * w2 + py * s + qy * c + ry
    k32 = a20 * w0 + a21 * w1 + a22 * w2 + pt * s + qt * c + rt
    k33 = a00 * w3 + a01 * w5 + mx * w7 + c3x * s + c4x * c + b0l
    k34 = a00 * w4 + a01 * w6 + mx * w8 + c5x * s + c6x * c + b0r
    k35 = a10 * w3 + a11 * w5 + my * w7 + c3y * s + c4y * c + b1l
    k36 = a10 * w4 + a11 * w6 + my * w8 + c5y * s + c6y * c + b1r
    k37 = a20 * w3 + a21 * w5 + mt * w7 + c3t * s + c4t * c + b2l
    k38 = a20 * w4 + a21 * w6 + mt * w8 + c5t * s + c6t * c + b2r

    # stage 4 at the full-step point
    w0 = g0 + dt * k30; w1 = g1 + dt * k31; w2 = g2 + dt * k32
    w3 = g3 + dt * k33; w4 = g4 + dt * k34; w5 = g5 + dt * k35
    w6 = g6 + dt * k36; w7 = g7 + dt * k37; w8 = g8 + dt * k38
    s = math.sin(w2); c = math.cos(w2)
    mx = a02 + px * c - qx * s; my = a12 + py * c - qy * s; mt = a22 + pt * c - qt * s
    k40 = a00 * w0 + a01 * w1 + a02 * w2 + px * s + qx * c + rx
    k41 = a10 * w0 + a11 * w1 + a12 * w2 + py * s + qy * c + ry
    k42 = a20 * w0 + a21 * w1 + a22 * w2 + pt * s + qt * c + rt
    k43 = a00 * w3 + a01 * w5 + mx * w7 + c3x * s + c4x * c + b0l
    k44 = a00 * w4 + a01 * w6 + mx * w8 + c5x * s + c6x * c + b0r
    k45 = a10 * w3 + a11 * w5 + my * w7 + c3y * s + c4y * c + b1l
    k46 = a10 * w4 + a11 * w6 + my * w8 + c5y * s + c6y * c + b1r
    k47 = a20 * w3 + a21 * w5 + mt * w7 + c3t * s + c4t * c + b2l
    k48 = a20 * w4 + a21 * w6 + mt * w8 + c5t * s + c6t * c + b2r

    sixth = dt / 6.0
    x_next = np.array([
        g0 + sixth * (k10 + 2.0 * (k20 + k30) + k40),
        g1 + sixth * (k11 + 2.0 * (k21 + k31) + k41),
        g2 + sixth * (k12 + 2.0 * (k22 + k32) + k42)])
    xi_next = np.array([
        [g3 + sixth * (k13 + 2.0 * (k23 + k33) + k43),
         g4 + sixth * (k14 + 2.0 * (k24 + k34) + k44)],
        [g5 + sixth * (k15 + 2.0 * (k25 + k35) + k45),
         g6 + sixth * (k16 + 2.0 * (k26 + k36) + k46)],
        [g7 + sixth * (k17 + 2.0 * (k27 + k37) + k47),
         g8 + sixth * (k18 + 2.0 * (k28 + k38) + k48)]])
    return x_next, xi_next


def car_surrogate_step_coefficients(A_n: np.ndarray, B_n: np.ndarray) -> tuple:
    """Flatten fitted car-dictionary vector-field matrices for the unrolled
    sensitivity step; column order follows the dictionary definition."""
    a = A_n[:, :3]
    return (a[0, 0], a[0, 1], a[0, 2], a[1, 0], a[1, 1], a[1, 2],
            a[2, 0], a[2, 1], a[2, 2],
            A_n[0, 3], A_n[1, 3], A_n[2, 3], A_n[0, 4], A_n[1, 4], A_n[2, 4],
            A_n[0, 5], A_n[1, 5], A_n[2, 5], A_n[0, 6], A_n[1, 6], A_n[2, 6],
            B_n[0, 0], B_n[0, 1], B_n[1, 0], B_n[1, 1], B_n[2, 0], B_n[2, 1])


def car(rho: float = 0.1, D: float = 0.4) -> SystemModel:
    """Differential-drive car; wheel speed inputs, planar position output."""
    if rho <= 0 or D <= 0:
        raise ValueError("wheel radius and track width must be positive")
    p = dict(rho=rho, D=D)
    return SystemModel(
        name="car", n=3, m=2, k=2,
        dynamics=partial(_car_dynamics, **p),
        jac_x=partial(_car_jac_x, **p),
        jac_u=partial(_car_jac_u, **p),
        output_rows=(0, 1), params=p,
        sensitivity_step=partial(_car_sensitivity_step, **p))


# --- Reference signals -------------------------------------------------------

def _vdp_reference(t):
    return np.array([(math.pi / 8.0) * math.sin(t) + math.pi / 6.0])


def _crane_reference(t):
    return np.array([math.sin(0.1 * t)])


def _car_reference(t):
    # Piecewise planar path; the t >= 5 branch owns the boundary point.
    if t < 5.0:
        return np.array([
            -0.0001 * t ** 3 + 0.25 * t,
            0.0475 * t ** 3 - 0.3601 * t * t + 0.3 * t + 3.0,
        ])
    return np.array([5.0 * math.sin(0.05 * t), 3.0 * math.sin(0.1 * t)])


def references() -> dict:
    """The three benchmark reference signals, keyed by system name."""
    return {
        "vdp": ReferenceSignal(fn=_vdp_reference, t_max=20.0),
        "crane": ReferenceSignal(fn=_crane_reference, t_max=20.0),
        "car": ReferenceSignal(fn=_car_reference, t_max=130.6637),
    }


# --- Lifting dictionaries ----------------------------------------------------

def _vdp_lift(x, u):
    x1 = x[0]
    x2 = x[1]
    return np.array([x1, x2, x1 * x1, x1 * x1 * x2])


def _crane_lift(x, u):
    theta = x[2]
    return np.array([x[0], x[1], theta, x[3], math.sin(theta), math.cos(theta)])


def _car_lift(x, u):
    theta = x[2]
    s = math.sin(theta)
    c = math.cos(theta)
    return np.array([x[0], x[1], theta, u[0] * s, u[0] * c, u[1] * s, u[1] * c])


def _car_lift_jac_u(x, u):
    theta = x[2]
    s = math.sin(theta)
    c = math.cos(theta)
    return np.array([[0.0, 0.0], [0.0, 0.0], [0.0, 0.0],
                     [s, 0.0], [c, 0.0], [0.0, s], [0.0, c]])


def _car_lift_jac_x(x, u):
    theta = x[2]
    s = math.sin(theta)
    c = math.cos(theta)
    return np.array([[1.0, 0.0, 0.0],
                     [0.0, 1.0, 0.0],
                     [0.0, 0.0, 1.0],
                     [0.0, 0.0, u[0] * c],
                     [0.0, 0.0, -u[0] * s],
                     [0.0, 0.0, u[1] * c],
                     [0.0, 0.0, -u[1] * s]])


def _identity_lift(x, u):
    return np.asarray(x, dtype=float)


def _identity_lift_jac_x(x, u):
    return np.eye(len(x))


def bases() -> dict:
    """The per-system observable dictionaries, keyed by system name."""
    return {
        "vdp": BasisDictionary(
            name="vdp", n=2, m=1, N=4, lift=_vdp_lift,
            names=("x1", "x2", "x1^2", "x1^2*x2")),
        "crane": BasisDictionary(
            name="crane", n=4, m=1, N=6, lift=_crane_lift,
            names=("x", "xdot", "theta", "thetadot", "sin(theta)", "cos(theta)")),
        "car": BasisDictionary(
            name="car", n=3, m=2, N=7, lift=_car_lift, lift_jac_u=_car_lift_jac_u,
            lift_jac_x=_car_lift_jac_x,
            names=("x", "y", "theta", "wL*sin(theta)", "wL*cos(theta)",
                   "wR*sin(theta)", "wR*cos(theta)")),
    }


def identity_basis(n: int, m: int) -> BasisDictionary:
    """Degenerate dictionary whose lift is the state itself (N = n); used to
    exercise the EDMD fit on plants that are exactly linear in the state."""
    return BasisDictionary(
        name=f"identity-{n}x{m}", n=n, m=m, N=n, lift=_identity_lift,
        lift_jac_x=_identity_lift_jac_x,
        names=tuple(f"x{i + 1}" for i in range(n)))


_SYSTEM_FACTORIES = {"vdp": vdp, "crane": crane, "car": car}


def get_system(name: str, **params) -> SystemModel:
    try:
        factory = _SYSTEM_FACTORIES[name]
    except KeyError:
        raise ValueError(f"unknown system {name!r}; choose from {sorted(_SYSTEM_FACTORIES)}")
    return factory(**params)


def get_reference(name: str) -> ReferenceSignal:
    refs = references()
    if name not in refs:
        raise ValueError(f"unknown reference {name!r}; choose from {sorted(refs)}")
    return refs[name]


def get_basis(name: str) -> BasisDictionary:
    all_bases = bases()
    if name in all_bases:
        return all_bases[name]
    if name.startswith("identity-"):
        try:
            n, m = (int(v) for v in name[len("identity-"):].split("x"))
        except ValueError:
            raise ValueError(f"malformed identity basis name {name!r}")
        return identity_basis(n, m)
    raise ValueError(f"unknown basis {name!r}; choose from {sorted(all_bases)}")
