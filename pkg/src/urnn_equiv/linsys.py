"""Fixed points, linearization around them, and linear-system tests
(transfer function, controllability, observability).

Under constant input x*, a non-expansive system has a hidden fixed point
h* = phi(W h* + F x* + b) whenever ||W|| * Lip(phi) < 1. Linearizing there
gives the (D W, D F, C) system whose eigenvalues are visible in the
input-output map; that is what the smooth-activation witness compares.
"""

from dataclasses import dataclass

import numpy as np

from .activations import LIPSCHITZ, activate, activation_derivative
from .errors import InvalidInputError, NonConvergenceError, NumericalError
from .linalg import matrix_rank, spectral_norm
from .rnn import RnnParams, _as_vector

FIXED_POINT_TOL = 1e-12
FIXED_POINT_MAX_ITER = 100_000


@dataclass(frozen=True)
class LinearSystem:
    """Linearization (a, b_in, c_out) with its operating-point offsets."""

    a: np.ndarray  # (n, n), equals D @ W
    b_in: np.ndarray  # (n, m), equals D @ F
    c_out: np.ndarray  # (p, n)
    x_star: np.ndarray  # (m,)
    h_star: np.ndarray  # (n,)
    y_star: np.ndarray  # (p,)

    @property
    def n(self) -> int:
        return self.a.shape[0]


def fixed_point(params: RnnParams, x_star) -> np.ndarray:
    """Solve h = phi(W h + F x* + b) by fixed-point iteration from 0.

    Requires the map to be a contraction: ||W|| * Lip(phi) < 1. The
    returned h* satisfies ||h* - phi(W h* + F x* + b)||_2 <= 1e-12.
    """
    x_star = _as_vector(x_star, "x_star")
    if x_star.shape[0] != params.m:
        raise InvalidInputError(f"x_star has dimension {x_star.shape[0]}, expected {params.m}")
    gain = spectral_norm(params.w) * LIPSCHITZ[params.activation]
    if not gain < 1.0:
        raise InvalidInputError(
            f"state map is not a contraction: ||W|| * Lip(phi) = {gain:.6g} >= 1"
        )
    drive = params.f @ x_star + params.b
    h = np.zeros(params.n)
    for _ in range(FIXED_POINT_MAX_ITER):
        h_next = activate(params.activation, params.w @ h + drive)
        if np.linalg.norm(h_next - h) <= FIXED_POINT_TOL:
            return h_next
        h = h_next
    raise NonConvergenceError(
        f"fixed-point iteration did not converge in {FIXED_POINT_MAX_ITER} steps"
    )


def linearize(params: RnnParams, x_star) -> LinearSystem:
    """First-order model (D W, D F, C) around the fixed point at x*.

    D = diag(phi'(W h* + F x* + b)). Relu systems are rejected when any
    pre-activation sits within 1e-9 of the kink.
    """
    x_star = _as_vector(x_star, "x_star")
    h_star = fixed_point(params, x_star)
    z_star = params.w @ h_star + params.f @ x_star + params.b
    if params.activation == "relu" and np.any(np.abs(z_star) < 1e-9):
        raise InvalidInputError(
            "relu pre-activation at the operating point is within 1e-9 of 0; "
            "the linearization is not defined"
        )
    d = activation_derivative(params.activation, z_star)
    return LinearSystem(
        a=d[:, None] * params.w,
        b_in=d[:, None] * params.f,
        c_out=params.c.copy(),
        x_star=x_star,
        h_star=h_star,
        y_star=params.c @ h_star,
    )


def transfer_function(sys: LinearSystem, s: complex) -> np.ndarray:
    """H(s) = C (sI - A)^-1 B, a p x m complex matrix."""
    n = sys.n
    resolvent = s * np.eye(n) - sys.a
    sv = np.linalg.svd(resolvent, compute_uv=False)
    if sv[-1] <= 1e-12 * max(sv[0], 1.0):
        raise NumericalError(f"s = {s} is (numerically) an eigenvalue of the transition matrix")
    return sys.c_out @ np.linalg.solve(resolvent, sys.b_in.astype(complex))


def ctrb_obsv(sys: LinearSystem, tol: float = 1e-9):
    """(controllable, observable) via rank of the standard block matrices."""
    n = sys.n
    blocks_c = []
    blocks_o = []
    power_b = sys.b_in.copy()
    power_c = sys.c_out.copy()
    for _ in range(n):
        blocks_c.append(power_b)
        blocks_o.append(power_c)
        power_b = sys.a @ power_b
        power_c = power_c @ sys.a
    ctrb = np.hstack(blocks_c)
    obsv = np.vstack(blocks_o)
    return matrix_rank(ctrb, tol) == n, matrix_rank(obsv, tol) == n
