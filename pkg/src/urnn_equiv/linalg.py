"""Dense real-matrix kernel: the factorizations and projections the
constructions need, with fixed sign conventions so every result is a
deterministic function of its input.

Matrices are plain float64 numpy arrays (row-major). All operations
validate finiteness on entry and are pure.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, NumericalError

# Entries smaller than this are treated as zero when locating the first
# nonzero entry of a column (columns here are always unit-norm or close).
_SIGN_EPS = 1e-12


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    """Validate and return `m` as a finite 2-d float64 array."""
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2:
        raise InvalidInputError(f"{name} must be 2-d, got shape {a.shape}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise InvalidInputError(f"{name} must have positive dimensions, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return a


@dataclass(frozen=True)
class SvdFactors:
    """Thin SVD: ``u @ diag(s) @ v.T`` reconstructs the input.

    Columns of `u` and `v` are orthonormal; `s` is descending and >= 0.
    """

    u: np.ndarray
    s: np.ndarray
    v: np.ndarray


def _fix_column_signs(u: np.ndarray, v: np.ndarray) -> None:
    """Flip column pairs of (u, v) so each u-column's first nonzero entry is
    positive. Operates in place; keeps u s v.T invariant."""
    for j in range(u.shape[1]):
        col = u[:, j]
        nz = np.nonzero(np.abs(col) > _SIGN_EPS)[0]
        if nz.size and col[nz[0]] < 0:
            u[:, j] = -col
            v[:, j] = -v[:, j]


def svd(m) -> SvdFactors:
    """Thin SVD with a fixed sign convention (first nonzero entry of each
    u-column positive), so results are reproducible bit-for-bit."""
    a = as_matrix(m)
    try:
        u, s, vh = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD did not converge: {exc}") from exc
    u = np.ascontiguousarray(u)
    v = np.ascontiguousarray(vh.T)
    _fix_column_signs(u, v)
    return SvdFactors(u=u, s=s, v=v)


def spectral_norm(m) -> float:
    """Largest singular value (the maximum l2 gain)."""
    a = as_matrix(m)
    try:
        s = np.linalg.svd(a, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD did not converge: {exc}") from exc
    return float(s[0])


def symmetric_psd_sqrt(s) -> np.ndarray:
    """Symmetric PSD square root B of a symmetric PSD matrix: B @ B == s.

    Eigenvalues in [-1e-12, 0) are clamped to zero; anything more negative,
    or asymmetry beyond 1e-10, is rejected.
    """
    a = as_matrix(s, "symmetric matrix")
    if a.shape[0] != a.shape[1]:
        raise InvalidInputError(f"expected square matrix, got {a.shape}")
    if np.max(np.abs(a - a.T)) > 1e-10:
        raise InvalidInputError("matrix is not symmetric within 1e-10")
    sym = 0.5 * (a + a.T)
    w, vecs = np.linalg.eigh(sym)
    if w[0] < -1e-12:
        raise InvalidInputError(
            f"matrix is indefinite: smallest eigenvalue {w[0]:.3e} < -1e-12"
        )
    root = vecs @ np.diag(np.sqrt(np.clip(w, 0.0, None))) @ vecs.T
    # Store an exactly symmetric result.
    return 0.5 * (root + root.T)


def orthonormal_complete(q) -> np.ndarray:
    """Complete orthonormal columns q (r x c, c <= r) to a full basis.

    Returns the r x (r-c) block orthogonal to q, built by Gram-Schmidt
    against canonical basis vectors in index order with the first-nonzero-
    positive sign rule. Deterministic.
    """
    a = as_matrix(q, "orthonormal block")
    r, c = a.shape
    if c > r:
        raise InvalidInputError(f"more columns than rows: {a.shape}")
    gram = a.T @ a
    if np.max(np.abs(gram - np.eye(c))) > 1e-8:
        raise InvalidInputError("input columns are not orthonormal within 1e-8")

    basis = [a[:, j] for j in range(c)]
    completed = []
    for i in range(r):
        if len(completed) == r - c:
            break
        v = np.zeros(r)
        v[i] = 1.0
        # Two Gram-Schmidt passes: the second removes the residual coupling
        # left by cancellation in the first.
        for _ in range(2):
            for b in basis:
                v = v - (b @ v) * b
        norm = np.linalg.norm(v)
        if norm < 1e-7:
            continue  # e_i (numerically) already lies in the current span
        v = v / norm
        nz = np.nonzero(np.abs(v) > _SIGN_EPS)[0]
        if nz.size and v[nz[0]] < 0:
            v = -v
        basis.append(v)
        completed.append(v)
    if len(completed) != r - c:
        raise NumericalError("failed to complete the orthonormal basis")
    return np.column_stack(completed) if completed else np.zeros((r, 0))


def polar_orthogonal_projection(m) -> np.ndarray:
    """Nearest orthogonal matrix in Frobenius norm: u @ v.T from the SVD.

    Requires full rank; the projection is not unique otherwise.
    """
    a = as_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise InvalidInputError(f"expected square matrix, got {a.shape}")
    factors = svd(a)
    if factors.s[-1] <= 1e-12 * factors.s[0] or factors.s[0] == 0.0:
        raise NumericalError(
            "matrix is rank-deficient; the orthogonal projection is not unique"
        )
    return factors.u @ factors.v.T


def singular_value_clip(m, cap: float) -> np.ndarray:
    """Clip all singular values of a square matrix to at most `cap`.

    Inputs already inside the cap are returned unchanged (exact copy), so
    repeated projection is a no-op.
    """
    a = as_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise InvalidInputError(f"expected square matrix, got {a.shape}")
    if not cap > 0:
        raise InvalidInputError(f"cap must be positive, got {cap}")
    factors = svd(a)
    if factors.s[0] <= cap:
        return a.copy()
    clipped = np.minimum(factors.s, cap)
    return factors.u @ (clipped[:, None] * factors.v.T)


def matrix_rank(m, tol: float) -> int:
    """Number of singular values above tol * sigma_1."""
    a = as_matrix(m)
    if not tol > 0:
        raise InvalidInputError(f"tol must be positive, got {tol}")
    s = np.linalg.svd(a, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > tol * s[0]))
