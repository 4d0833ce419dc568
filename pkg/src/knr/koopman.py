"""Data collection and EDMD identification of lifted linear models.

A nonlinear plant is excited with random piecewise-constant inputs, snapshot
pairs of the lifted state are recorded one sampling interval apart, and the
one-step transfer matrix is fitted in least squares through the Gram-matrix
pseudo-inverse.  Partitioning the transpose of the fitted transfer matrix
isolates the lifted state matrix A and input matrix B; the output matrix C
is always the projection [I 0] back onto the original state coordinates.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from functools import partial
from typing import Optional

import numpy as np
import scipy.linalg

from . import linalg
from . import systems as systems_module
from .errors import ConversionError, IntegrationFailure, UnderdeterminedFit
from .ode import Flow, rk4_step, steps_for
from .systems import BasisDictionary, SystemModel, get_basis

FILE_HEADER = "KNR-MODEL v1"


@dataclass(frozen=True)
class SnapshotDataset:
    """Snapshot pairs sampled dt apart under a zero-order-held input.

    Pair k maps the record (x[k], u[k]) to its one-step successor
    (x_next[k], u[k]); the input is constant across each pair.
    """

    x: np.ndarray       # (K, n) current states
    u: np.ndarray       # (K, m) inputs held over the step
    x_next: np.ndarray  # (K, n) successor states
    dt: float

    def __post_init__(self):
        for name in ("x", "u", "x_next"):
            arr = getattr(self, name)
            if arr.ndim != 2:
                raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
            if not np.isfinite(arr).all():
                raise ValueError(f"{name} contains non-finite entries")
        if self.x.shape != self.x_next.shape:
            raise ValueError("x and x_next must have matching shapes")
        if self.u.shape[0] != self.x.shape[0]:
            raise ValueError("u must have one row per pair")
        if self.dt <= 0:
            raise ValueError("dt must be positive")

    @property
    def K(self) -> int:
        return self.x.shape[0]


@dataclass(frozen=True)
class FitDiagnostics:
    """Byproducts of the least-squares fit.

    ``residual`` is the fitted value of the per-pair averaged squared
    prediction error in the extended lifted space (zero when the data are
    exactly linear in the dictionary).
    """

    residual: float
    rank_gamma_c: int
    rank_deficient: bool
    gamma_c: Optional[np.ndarray] = None
    gamma_n: Optional[np.ndarray] = None
    scales: Optional[np.ndarray] = None
    roundtrip_error: Optional[float] = None


@dataclass(frozen=True)
class LiftedLinearModel:
    """Lifted linear model z+ = A z + B u (discrete) or dz/dt = A z + B u.

    C projects the lifted state back onto the original coordinates and is
    always the exact block [I 0].
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    dt: float
    basis: BasisDictionary
    diagnostics: FitDiagnostics
    form: str = "discrete"  # discrete | continuous | generator
    _horizon_cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def N(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    def discrete_horizon_ops(self, steps: int):
        """Cached (A^steps, sum_{i<steps} A^i B) for the multi-step predictor."""
        ops = self._horizon_cache.get(steps)
        if ops is None:
            A_pow = np.eye(self.N)
            acc_B = np.zeros_like(self.B)
            for _ in range(steps):
                acc_B = acc_B + A_pow @ self.B
                A_pow = A_pow @ self.A
            ops = (A_pow, acc_B)
            self._horizon_cache[steps] = ops
        return ops

    def continuous_horizon_ops(self, T: float):
        """Cached (exp(A T), Phi(T) B) for the closed-form predictor."""
        key = ("cont", T)
        ops = self._horizon_cache.get(key)
        if ops is None:
            ops = (linalg.expm(self.A * T), linalg.input_integral(self.A, T) @ self.B)
            self._horizon_cache[key] = ops
        return ops


def projection_matrix(n: int, N: int) -> np.ndarray:
    C = np.zeros((n, N))
    C[:, :n] = np.eye(n)
    return C


def extended_lift(basis: BasisDictionary, x, u) -> np.ndarray:
    """The fit regressor [lift(x, u); u] of length N + m."""
    return np.concatenate([basis.lift(x, u), np.asarray(u, dtype=float)])


def collect_snapshots(system: SystemModel, basis: BasisDictionary, trials: int,
                      horizon: float, dt: float, seed: int,
                      x_box, u_box, dwell_steps: int = 10,
                      trial_sampler=None) -> SnapshotDataset:
    """Excite the plant and record one-step snapshot pairs.

    Each trial draws the initial state and the input uniformly from the
    given boxes; the input is held for ``dwell_steps`` steps and then
    redrawn, which excites the input channel far better than one constant
    value per trial.  A ``trial_sampler(rng) -> (x0, u)`` callable replaces
    the box draws when the system needs correlated excitation (see the
    crane sampler); the sampled input is then held for the whole trial.
    Trial RNG streams are derived as seed + trial index, so identical seeds
    reproduce identical datasets bit-exactly.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    if dwell_steps < 1:
        raise ValueError("dwell_steps must be positive")
    x_box = np.asarray(x_box, dtype=float)
    u_box = np.asarray(u_box, dtype=float)
    if x_box.shape != (system.n, 2) or u_box.shape != (system.m, 2):
        raise ValueError("x_box must be (n, 2) and u_box (m, 2) interval arrays")

    steps = steps_for(horizon, dt)
    K = trials * steps
    xs = np.empty((K, system.n))
    us = np.empty((K, system.m))
    xns = np.empty((K, system.n))
    dynamics = system.dynamics

    row = 0
    for trial in range(trials):
        rng = np.random.default_rng(seed + trial)
        if trial_sampler is None:
            x = rng.uniform(x_box[:, 0], x_box[:, 1])
            u = rng.uniform(u_box[:, 0], u_box[:, 1])
        else:
            x, u = trial_sampler(rng)
        for k in range(steps):
            if trial_sampler is None and k > 0 and k % dwell_steps == 0:
                u = rng.uniform(u_box[:, 0], u_box[:, 1])
            flow = Flow(system.n, lambda t, state, hold=u: dynamics(state, hold))
            try:
                x_next = rk4_step(flow, k * dt, x, dt)
            except IntegrationFailure as exc:
                raise IntegrationFailure(
                    f"collection diverged in trial {trial} at step {k}: {exc}",
                    t=exc.t, state=exc.state, step=k) from exc
            xs[row] = x
            us[row] = u
            xns[row] = x_next
            row += 1
            x = x_next
    return SnapshotDataset(x=xs, u=us, x_next=xns, dt=dt)


def edmd_fit(data: SnapshotDataset, basis: BasisDictionary, tol: float = 0.0,
             normalize: bool = True, mode: str = "discrete") -> LiftedLinearModel:
    """Least-squares fit of the one-step transfer matrix on lifted snapshots.

    Builds the Gram matrices of the extended lift psi = [lift(x, u); u],
    solves for the transfer via the pseudo-inverse, and partitions its
    transpose into the top-left N-by-N block A and top-right N-by-m block B.

    ``mode="discrete"`` (default) targets the lifted successor state, so A
    and B are the one-step matrices at data.dt.  ``mode="generator"``
    instead targets the lift of the finite-difference state derivative
    (x_next - x) / dt, a direct continuous-generator estimate retained for
    comparison; its model form is marked accordingly.
    """
    if mode not in ("discrete", "generator"):
        raise ValueError(f"unknown fit mode {mode!r}")
    N = basis.N
    m = basis.m
    K = data.K
    if data.x.shape[1] != basis.n or data.u.shape[1] != m:
        raise ValueError("dataset dimensions do not match the basis")
    if K < N + m:
        raise UnderdeterminedFit(
            f"{K} pairs cannot determine {N + m} transfer columns")

    psi_a = np.empty((K, N + m))
    psi_b = np.empty((K, N + m))
    for k in range(K):
        psi_a[k] = extended_lift(basis, data.x[k], data.u[k])
        if mode == "discrete":
            psi_b[k] = extended_lift(basis, data.x_next[k], data.u[k])
        else:
            deriv = (data.x_next[k] - data.x[k]) / data.dt
            psi_b[k] = extended_lift(basis, deriv, data.u[k])

    if normalize:
        scales = psi_a.std(axis=0)
        scales[scales < 1e-300] = 1.0
    else:
        scales = np.ones(N + m)
    pa = psi_a / scales
    pb = psi_b / scales

    gamma_c_scaled = pa.T @ pa / K
    gamma_n_scaled = pa.T @ pb / K
    u_bar = linalg.pinv(gamma_c_scaled, tol) @ gamma_n_scaled
    # undo the feature scaling: transfer[i, j] *= scales[i] / scales[j]
    transfer = u_bar.T * scales[:, None] / scales[None, :]

    rank = int(np.linalg.matrix_rank(gamma_c_scaled))
    residual = float(np.mean(np.sum((psi_a @ transfer.T - psi_b) ** 2, axis=1)))
    diagnostics = FitDiagnostics(
        residual=residual,
        rank_gamma_c=rank,
        rank_deficient=rank < N + m,
        gamma_c=psi_a.T @ psi_a / K,
        gamma_n=psi_a.T @ psi_b / K,
        scales=scales if normalize else None,
    )
    return LiftedLinearModel(
        A=transfer[:N, :N], B=transfer[:N, N:], C=projection_matrix(basis.n, N),
        dt=data.dt, basis=basis, diagnostics=diagnostics,
        form="discrete" if mode == "discrete" else "generator")


def _surrogate_dynamics(x, u, A_n, B_n, basis):
    return A_n @ basis.lift(x, u) + B_n @ u


def _surrogate_jac_x(x, u, A_n, B_n, basis):
    return A_n @ basis.state_jacobian(x, u)


def _surrogate_jac_u(x, u, A_n, B_n, basis):
    return A_n @ basis.input_jacobian(x, u) + B_n


def generator_system(model: LiftedLinearModel, output_rows) -> SystemModel:
    """Wrap a generator-mode fit as a simulatable data-driven plant.

    The first n rows of the fitted transfer approximate the state derivative
    as a linear combination of the dictionary entries (and the raw input),
    i.e. an identified vector field ``f_hat(x, u)``.  Returning it as a
    SystemModel lets the identified dynamics drive the same look-ahead
    prediction and sensitivity machinery as the true plant; dictionaries
    whose span contains the true derivative (the car's does) make this
    surrogate near-exact while remaining entirely data-driven.
    """
    if model.form != "generator":
        raise ValueError(f"generator_system expects a generator fit, got {model.form!r}")
    basis = model.basis
    n = basis.n
    A_n = model.A[:n, :]
    B_n = model.B[:n, :]
    bound = dict(A_n=A_n, B_n=B_n, basis=basis)
    step = None
    if basis.name == "car":
        # unrolled coupled RK4 step for this dictionary's structure
        step = partial(systems_module._car_surrogate_sensitivity_step,
                       coeff=systems_module.car_surrogate_step_coefficients(A_n, B_n))
    return SystemModel(
        name=f"{basis.name}-surrogate", n=n, m=basis.m, k=len(output_rows),
        dynamics=partial(_surrogate_dynamics, **bound),
        jac_x=partial(_surrogate_jac_x, **bound),
        jac_u=partial(_surrogate_jac_u, **bound),
        output_rows=tuple(output_rows),
        sensitivity_step=step)


def to_continuous(model: LiftedLinearModel) -> LiftedLinearModel:
    """Continuous-time counterpart via the real principal matrix logarithm.

    ``A_c = log(A) / dt`` exists (real) only when no eigenvalue of the
    discrete A sits on the closed negative real axis; the input matrix is
    recovered from the zero-order-hold relation B = Phi(dt) B_c.
    """
    if model.form != "discrete":
        raise ValueError(f"to_continuous expects a discrete model, got {model.form!r}")
    eigs = np.linalg.eigvals(model.A)
    on_axis = (eigs.real <= 0.0) & (np.abs(eigs.imag) <= 1e-12 * np.maximum(1.0, np.abs(eigs)))
    if on_axis.any():
        bad = eigs[on_axis]
        raise ConversionError(
            f"eigenvalue {bad[0]:.6g} lies on the closed negative real axis; "
            "no real logarithm exists, use the discrete predictor")

    log_A, _ = scipy.linalg.logm(model.A, disp=False)
    if np.abs(log_A.imag).max() > 1e-9 * max(1.0, np.abs(log_A.real).max()):
        raise ConversionError(
            "matrix logarithm required a complex branch; use the discrete predictor")
    A_c = log_A.real / model.dt
    B_c = linalg.solve(linalg.input_integral(A_c, model.dt), model.B).x
    roundtrip = float(np.linalg.norm(linalg.expm(A_c * model.dt) - model.A)
                      / max(1.0, np.linalg.norm(model.A)))
    diagnostics = dataclasses.replace(model.diagnostics, roundtrip_error=roundtrip)
    return LiftedLinearModel(
        A=A_c, B=B_c, C=model.C, dt=model.dt, basis=model.basis,
        diagnostics=diagnostics, form="continuous")


def save_model(model: LiftedLinearModel, path) -> None:
    """Write a model to the v1 text format (17 significant digits).

    Discrete models use the format exactly; generator fits append a form
    token to the dimension line so they round-trip too.
    """
    if model.form == "continuous":
        raise ValueError("persist the discrete fit and convert after loading")
    dims = f"{model.N} {model.m} {model.basis.n} {model.dt:.17g}"
    if model.form != "discrete":
        dims += f" {model.form}"
    lines = [FILE_HEADER, dims, model.basis.name]
    for row in model.A:
        lines.append(" ".join(f"{v:.17g}" for v in row))
    for row in model.B:
        lines.append(" ".join(f"{v:.17g}" for v in row))
    lines.append(f"residual {model.diagnostics.residual:.17g}")
    lines.append(f"rank {model.diagnostics.rank_gamma_c}")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path) -> LiftedLinearModel:
    """Read a model written by ``save_model``; gram matrices are not stored."""
    with open(path) as fh:
        lines = [line.rstrip("\n") for line in fh]
    if not lines or lines[0] != FILE_HEADER:
        raise ValueError(f"{path}: not a {FILE_HEADER} file")
    dims = lines[1].split()
    N, m, n = (int(v) for v in dims[:3])
    dt = float(dims[3])
    form = dims[4] if len(dims) > 4 else "discrete"
    basis = get_basis(lines[2])
    if basis.N != N or basis.m != m or basis.n != n:
        raise ValueError(f"{path}: dimensions disagree with basis {basis.name!r}")
    rows = lines[3:3 + N]
    A = np.array([[float(v) for v in row.split()] for row in rows])
    rows = lines[3 + N:3 + 2 * N]
    B = np.array([[float(v) for v in row.split()] for row in rows])
    if A.shape != (N, N) or B.shape != (N, m):
        raise ValueError(f"{path}: matrix blocks have the wrong shape")
    residual = float(lines[3 + 2 * N].split()[1])
    rank = int(lines[4 + 2 * N].split()[1])
    diagnostics = FitDiagnostics(
        residual=residual, rank_gamma_c=rank, rank_deficient=rank < N + m)
    return LiftedLinearModel(
        A=A, B=B, C=projection_matrix(n, N), dt=dt, basis=basis,
        diagnostics=diagnostics, form=form)
