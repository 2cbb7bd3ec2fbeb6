"""Quadratic eigenvalue problem of a homogeneous medium.

The linearly independent solutions of the homogeneous system are
F(z) = f0 exp(i k z) with the 2N wavenumbers k given by the zeros of

    det Theta(k),   Theta(k) = -k^2 b + i k (p + y) + w,

and mode shapes Theta(k) f0 = 0. The basis is split into N "plus" modes
(Im k > 0, or right-going when k is real) and N "minus" modes; all the
stable matrix constructions downstream rely on that split.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._linalg import solve_checked
from .errors import EigensolveError, PartitionError
from .media import MslCoefficients

RESIDUAL_RTOL = 1e-9
DEGENERACY_RTOL = 1e-8
# |Im k| below this (relative to the eigenvalue scale) counts as real.
REAL_K_RTOL = 1e-9


def secular_matrix(m: MslCoefficients, k: complex) -> np.ndarray:
    """Theta(k) = -k^2 b + i k (p + y) + w."""
    return -k ** 2 * m.b + 1j * k * (m.p + m.y) + m.w


@dataclass(frozen=True)
class Mode:
    """One eigenpair: wavenumber, unit-norm shape, linear-form amplitude."""

    k: complex
    f0: np.ndarray
    a0: np.ndarray

    def __post_init__(self):
        f0 = np.asarray(self.f0, dtype=complex)
        a0 = np.asarray(self.a0, dtype=complex)
        f0.setflags(write=False)
        a0.setflags(write=False)
        object.__setattr__(self, "f0", f0)
        object.__setattr__(self, "a0", a0)


@dataclass(frozen=True)
class ModeBasis:
    """The 2N modes of a medium, partitioned into plus and minus sets."""

    plus: tuple[Mode, ...]
    minus: tuple[Mode, ...]
    medium: MslCoefficients
    degenerate: bool = False

    @property
    def n(self) -> int:
        return self.medium.n

    @property
    def modes(self) -> tuple[Mode, ...]:
        return self.plus + self.minus

    @property
    def ks(self) -> np.ndarray:
        return np.array([md.k for md in self.modes])

    @property
    def f0_plus(self) -> np.ndarray:
        """N x N matrix whose columns are the plus-mode shapes."""
        return np.column_stack([md.f0 for md in self.plus])

    @property
    def a0_plus(self) -> np.ndarray:
        return np.column_stack([md.a0 for md in self.plus])

    @property
    def f0_minus(self) -> np.ndarray:
        return np.column_stack([md.f0 for md in self.minus])

    @property
    def a0_minus(self) -> np.ndarray:
        return np.column_stack([md.a0 for md in self.minus])

    def max_abs_im_k(self) -> float:
        return float(np.max(np.abs(self.ks.imag)))


def linear_form_amplitudes(m: MslCoefficients, ks: np.ndarray,
                           f0s: np.ndarray) -> np.ndarray:
    """a0_j = (i k_j b + p) f0_j for mode shapes stacked as columns."""
    ks = np.asarray(ks)
    f0s = np.asarray(f0s)
    return 1j * ks[None, :] * (m.b @ f0s) + m.p @ f0s


def _theta_scale(m: MslCoefficients, k: complex) -> float:
    """Backward-error denominator |k|^2 ||b|| + |k| ||p+y|| + ||w||.

    ||Theta(k)|| itself vanishes at eigenvalues, so the residual must be
    measured against the size of the terms that formed it.
    """
    ak = abs(k)
    return (ak * ak * np.linalg.norm(m.b, 2)
            + ak * np.linalg.norm(m.p + m.y, 2)
            + np.linalg.norm(m.w, 2))


def _mode_residual(m: MslCoefficients, k: complex, f0: np.ndarray) -> float:
    theta = secular_matrix(m, k)
    return float(np.linalg.norm(theta @ f0) / max(1.0, _theta_scale(m, k)))


def _refine_shape(m: MslCoefficients, k: complex, f0: np.ndarray) -> np.ndarray:
    """Replace f0 with the right singular vector of the smallest sigma.

    One residual-based refinement: for the computed k this minimizes
    ||Theta(k) f0|| over unit vectors, cleaning up linearization noise.
    """
    _, _, vh = np.linalg.svd(secular_matrix(m, k))
    cand = vh[-1].conj()
    # keep the phase close to the original shape for determinism
    overlap = complex(np.vdot(cand, f0))
    if abs(overlap) > 0:
        cand = cand * (overlap / abs(overlap))
    return cand


def partition_modes(m: MslCoefficients, ks: np.ndarray, f0s: np.ndarray,
                    real_k_rtol: float = REAL_K_RTOL) -> ModeBasis:
    """Split 2N eigenpairs into plus (Im k > 0) and minus (Im k < 0) sets.

    Real eigenvalues (propagating modes) are assigned by the sign of
    Re k: right-going joins the plus set. Eigenvalues too close to zero
    to classify are distributed to balance the sets, with the basis
    flagged degenerate. Failure to reach an N/N split raises.
    """
    ks = np.asarray(ks, dtype=complex)
    f0s = np.asarray(f0s, dtype=complex)
    n = m.n
    if ks.shape[0] != 2 * n or f0s.shape != (n, 2 * n):
        raise PartitionError(
            f"expected 2N = {2 * n} eigenpairs, got {ks.shape[0]}")

    scale = max(1.0, float(np.max(np.abs(ks))))
    tol = real_k_rtol * scale

    plus_idx: list[int] = []
    minus_idx: list[int] = []
    undecided: list[int] = []
    for j, k in enumerate(ks):
        if k.imag > tol:
            plus_idx.append(j)
        elif k.imag < -tol:
            minus_idx.append(j)
        elif k.real > tol:
            plus_idx.append(j)
        elif k.real < -tol:
            minus_idx.append(j)
        else:
            undecided.append(j)

    degenerate = bool(undecided)
    for j in undecided:
        (plus_idx if len(plus_idx) < n else minus_idx).append(j)

    if len(plus_idx) != n or len(minus_idx) != n:
        offending = np.array2string(ks, precision=6)
        raise PartitionError(
            f"cannot split eigenvalues into {n}/{n} plus/minus sets: {offending}")

    # pairwise closeness check for the degeneracy flag
    if not degenerate:
        for i in range(2 * n):
            for j in range(i + 1, 2 * n):
                pair_scale = max(1.0, abs(ks[i]), abs(ks[j]))
                if abs(ks[i] - ks[j]) < DEGENERACY_RTOL * pair_scale:
                    degenerate = True
                    break
            if degenerate:
                break

    def _sorted(idx: list[int]) -> list[int]:
        return sorted(idx, key=lambda j: (-ks[j].imag, ks[j].real))

    def _build(idx: list[int]) -> tuple[Mode, ...]:
        out = []
        for j in _sorted(idx):
            f0 = f0s[:, j]
            norm = np.linalg.norm(f0)
            if norm == 0:
                raise EigensolveError("zero mode shape from eigensolve")
            f0 = f0 / norm
            a0 = linear_form_amplitudes(m, np.array([ks[j]]), f0[:, None])[:, 0]
            out.append(Mode(k=complex(ks[j]), f0=f0, a0=a0))
        return tuple(out)

    return ModeBasis(plus=_build(plus_idx), minus=_build(minus_idx),
                     medium=m, degenerate=degenerate)


def solve_qep(m: MslCoefficients,
              residual_rtol: float = RESIDUAL_RTOL) -> ModeBasis:
    """Solve the quadratic eigenproblem by companion linearization.

    Pairs (F, i k F) so the problem becomes a standard eigenproblem for
    mu = i k:

        mu [f; h] = [[0, I], [-b^{-1} w, -b^{-1}(p + y)]] [f; h].

    Shapes get one SVD-based residual refinement; residuals above
    ``residual_rtol`` (relative to ||Theta(k)||) raise.
    """
    n = m.n
    binv_w = solve_checked(m.b, m.w, "B")
    binv_py = solve_checked(m.b, m.p + m.y, "B")
    companion = np.block([
        [np.zeros((n, n), dtype=complex), np.eye(n, dtype=complex)],
        [-binv_w, -binv_py],
    ])
    try:
        mu, vectors = np.linalg.eig(companion)
    except np.linalg.LinAlgError as exc:
        raise EigensolveError(f"companion eigensolve failed: {exc}") from exc

    ks = -1j * mu
    f0s = vectors[:n, :].copy()
    # companion eigenvectors can have a vanishing F part only for
    # infinite eigenvalues, which a regular b excludes; still normalize
    # and refine the shapes against Theta(k).
    for j in range(2 * n):
        norm = np.linalg.norm(f0s[:, j])
        if norm < 1e-300:
            raise EigensolveError(
                f"eigenvector {j} has no field component (k = {ks[j]:.6g})")
        f0s[:, j] /= norm
        if _mode_residual(m, ks[j], f0s[:, j]) > 0.5 * residual_rtol:
            f0s[:, j] = _refine_shape(m, ks[j], f0s[:, j])

    basis = partition_modes(m, ks, f0s)
    worst = max(_mode_residual(m, md.k, md.f0) for md in basis.modes)
    if worst > residual_rtol:
        raise EigensolveError(
            f"QEP residual {worst:.3e} exceeds tolerance {residual_rtol:.1e}")
    return basis
