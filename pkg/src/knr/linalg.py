"""Small dense real-matrix kernel.

Everything operates on plain float64 ``numpy`` arrays.  The routines here
back the EDMD fit (SVD pseudo-inverse) and the linear look-ahead predictor
(matrix exponential and its input-discretization integral), plus the square
solve used to apply the inverse output sensitivity inside the controller.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import NumericalFailure

# Condition number above which `solve` abandons LU for the pseudo-inverse.
COND_LIMIT = 1e8

# Degree-13 Pade coefficients for the matrix exponential.
_PADE13 = (
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0, 129060195264000.0, 10559470521600.0, 670442572800.0,
    33522128640.0, 1323241920.0, 40840800.0, 960960.0, 16380.0, 182.0, 1.0,
)
# 1-norm bound under which a single degree-13 evaluation is accurate.
_THETA13 = 5.371920351148152


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-D float64 array, rejecting empty or non-finite input."""
    arr = np.asarray(a, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2 or arr.size == 0:
        raise ValueError(f"{name} must be a nonempty 2-D array, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains NaN or Inf entries")
    return arr


def pinv(M, tol: float = 0.0) -> np.ndarray:
    """Moore-Penrose pseudo-inverse via SVD.

    Singular values at or below the cutoff are zeroed.  ``tol = 0`` selects
    the rank-revealing default ``max(rows, cols) * eps * sigma_max``.
    """
    M = as_matrix(M, "M")
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    try:
        u, s, vt = np.linalg.svd(M, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        # LAPACK does not expose its iteration count; report what we know.
        raise NumericalFailure(f"SVD did not converge on a {M.shape} matrix: {exc}") from exc
    if tol == 0.0:
        tol = max(M.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    inv_s = np.zeros_like(s)
    keep = s > tol
    inv_s[keep] = 1.0 / s[keep]
    return (vt.T * inv_s) @ u.T


def expm(M) -> np.ndarray:
    """Matrix exponential by scaling-and-squaring with degree-13 Pade.

    The squaring count comes from the 1-norm of the input; inputs whose
    exponential overflows double precision raise ``NumericalFailure``.
    """
    M = as_matrix(M, "M")
    n, nc = M.shape
    if n != nc:
        raise ValueError(f"expm requires a square matrix, got {M.shape}")

    norm = np.linalg.norm(M, 1)
    squarings = 0
    if norm > _THETA13:
        squarings = int(np.ceil(np.log2(norm / _THETA13)))
        M = M / (2.0 ** squarings)

    b = _PADE13
    ident = np.eye(n)
    M2 = M @ M
    M4 = M2 @ M2
    M6 = M4 @ M2
    U = M @ (M6 @ (b[13] * M6 + b[11] * M4 + b[9] * M2)
             + b[7] * M6 + b[5] * M4 + b[3] * M2 + b[1] * ident)
    V = (M6 @ (b[12] * M6 + b[10] * M4 + b[8] * M2)
         + b[6] * M6 + b[4] * M4 + b[2] * M2 + b[0] * ident)
    try:
        E = np.linalg.solve(V - U, V + U)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"Pade denominator is singular: {exc}") from exc
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(squarings):
            E = E @ E
    if not np.isfinite(E).all():
        raise NumericalFailure("matrix exponential overflowed double precision")
    return E


def input_integral(A, T: float) -> np.ndarray:
    """Phi(T) = integral of exp(A s) over s in [0, T].

    Computed as the upper-right block of the exponential of the augmented
    matrix [[A, I], [0, 0]] scaled by T, so it stays defined for singular A.
    Equals inv(A) (exp(A T) - I) whenever A is invertible.
    """
    A = as_matrix(A, "A")
    n, nc = A.shape
    if n != nc:
        raise ValueError(f"input_integral requires a square matrix, got {A.shape}")
    if T <= 0:
        raise ValueError("T must be positive")
    aug = np.zeros((2 * n, 2 * n))
    aug[:n, :n] = A
    aug[:n, n:] = np.eye(n)
    return expm(aug * T)[:n, n:]


class SolveResult(NamedTuple):
    """Solution of a square system plus a flag marking the pinv fallback."""

    x: np.ndarray
    used_pinv: bool


def solve(A, b) -> SolveResult:
    """Solve A X = b for square A, falling back to pinv(A) b when A is
    ill-conditioned (2-norm condition number beyond ``COND_LIMIT``).

    The fallback truncates singular values below ``sigma_max / COND_LIMIT``,
    yielding the minimum-norm least-squares solution over the trusted
    subspace, and is flagged in the result so callers can react.
    """
    A = as_matrix(A, "A")
    n, nc = A.shape
    if n != nc:
        raise ValueError(f"solve requires a square A, got {A.shape}")
    b_arr = np.asarray(b, dtype=float)
    squeeze = b_arr.ndim == 1
    B = as_matrix(b_arr, "b")
    if B.shape[0] != n:
        raise ValueError(f"dimension mismatch: A is {A.shape}, b has {B.shape[0]} rows")

    sigma = np.linalg.svd(A, compute_uv=False)
    well_conditioned = sigma[-1] > 0 and sigma[0] / sigma[-1] <= COND_LIMIT
    if well_conditioned:
        X = np.linalg.solve(A, B)
        return SolveResult(X[:, 0] if squeeze else X, False)
    X = pinv(A, tol=sigma[0] / COND_LIMIT) @ B
    return SolveResult(X[:, 0] if squeeze else X, True)
