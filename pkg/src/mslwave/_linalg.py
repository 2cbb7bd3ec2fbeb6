"""Small dense linear-algebra helpers shared across modules.

Includes a pivoted-elimination determinant/solve that also works for
extended-precision complex dtypes (``np.complex256`` where the platform
provides it), which LAPACK does not cover.
"""

from __future__ import annotations

import numpy as np

from .errors import SingularMatrixError

# Extended-precision complex dtype for the determinant-drift diagnostic.
# x86-64 Linux exposes complex256 (80-bit extended); elsewhere fall back
# to complex128 and accept a coarser diagnostic floor.
EXTENDED_COMPLEX = getattr(np, "complex256", np.complex128)
HAS_EXTENDED = EXTENDED_COMPLEX is not np.complex128


def unit_roundoff() -> float:
    """Empirically detect the unit roundoff.

    Halve a probe until adding it to 1.0 no longer changes the value;
    the last effective probe is the classical machine epsilon.
    """
    u = 1.0
    while 1.0 + u / 2.0 != 1.0:
        u /= 2.0
    return u


UNIT_ROUNDOFF = unit_roundoff()


def right_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Return ``b @ inv(a)`` without forming the inverse."""
    return np.linalg.solve(a.T, b.T).T


def cond_estimate(a: np.ndarray) -> float:
    """2-norm condition number (exact SVD; matrices here are tiny)."""
    s = np.linalg.svd(a, compute_uv=False)
    if s[-1] == 0.0:
        return np.inf
    return float(s[0] / s[-1])


def scaled_cond(a: np.ndarray) -> float:
    """Condition number after row and column equilibration.

    Rows and columns of mixed physical units (fields against linear
    forms) can make a perfectly usable basis look singular; dividing
    each row and then each column by its largest magnitude leaves the
    genuine degeneracy measure (collinearity) behind.
    """
    a = np.asarray(a)
    row_max = np.max(np.abs(a), axis=1, keepdims=True)
    if np.any(row_max == 0.0):
        return float("inf")
    b = a / row_max
    col_max = np.max(np.abs(b), axis=0, keepdims=True)
    if np.any(col_max == 0.0):
        return float("inf")
    return cond_estimate(b / col_max)


def smallest_singular_value(a: np.ndarray) -> float:
    return float(np.linalg.svd(a, compute_uv=False)[-1])


def det_pivoted(a: np.ndarray) -> complex:
    """Determinant by Gaussian elimination with partial pivoting.

    Works for any complex dtype, including extended precision.
    """
    a = np.array(a, copy=True)
    n = a.shape[0]
    det = a.dtype.type(1.0)
    for j in range(n):
        p = j + int(np.argmax(np.abs(a[j:, j])))
        if a[p, j] == 0:
            return complex(0.0)
        if p != j:
            a[[j, p]] = a[[p, j]]
            det = -det
        det = det * a[j, j]
        factors = a[j + 1:, j] / a[j, j]
        a[j + 1:, j:] -= np.outer(factors, a[j, j:])
    return complex(det)


def inv_pivoted(a: np.ndarray) -> np.ndarray:
    """Inverse by Gauss-Jordan elimination with partial pivoting.

    Dtype-generic companion of :func:`det_pivoted`.
    """
    a = np.asarray(a)
    n = a.shape[0]
    aug = np.hstack([a.astype(a.dtype, copy=True), np.eye(n, dtype=a.dtype)])
    for j in range(n):
        p = j + int(np.argmax(np.abs(aug[j:, j])))
        if aug[p, j] == 0:
            raise SingularMatrixError("matrix is singular to working precision")
        if p != j:
            aug[[j, p]] = aug[[p, j]]
        aug[j] = aug[j] / aug[j, j]
        for i in range(n):
            if i != j:
                aug[i] = aug[i] - aug[i, j] * aug[j]
    return aug[:, n:]


def solve_checked(a: np.ndarray, b: np.ndarray, what: str) -> np.ndarray:
    """``np.linalg.solve`` with the LinAlgError mapped to a typed error."""
    try:
        return np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(f"{what} is singular") from exc


def right_solve_checked(a: np.ndarray, b: np.ndarray, what: str) -> np.ndarray:
    try:
        return right_solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(f"{what} is singular") from exc
