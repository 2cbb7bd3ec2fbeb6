"""Per-layer propagator matrices and conversions between variants.

For one homogeneous layer of thickness d the associated transfer matrix
T(d) maps (F, A) across the layer; H, E, K and S rearrange the same
linear relation so that no growing exponential is ever formed:

    T: (F(z0), A(z0)) -> (F(z),  A(z))      unstable for large |Im k| d
    H: (A(z0), F(z))  -> (F(z0), A(z))      stable for every thickness
    E: (F(z0), F(z))  -> (A(z0), A(z))      stable for large d only
    K: mode coefficients L -> R              basis-dependent
    S: incoming -> outgoing coefficients     stable for every thickness

The stable single-layer constructions reference each plus mode at the
left edge and each minus mode at the right edge, which keeps every
exponential entering the defining matrices at magnitude <= 1. That
referencing choice is the load-bearing trick; the matrices themselves
are independent of per-mode rescalings.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from ._linalg import (EXTENDED_COMPLEX, cond_estimate, det_pivoted,
                      inv_pivoted, right_solve_checked, scaled_cond,
                      solve_checked)
from .errors import (DegenerateModeError, IllConditionedError,
                     MatrixOverflowError, SingularMatrixError, VariantError)
from .media import MslCoefficients
from .qep import ModeBasis, solve_qep

# exp(x) overflows double just above 709.78
_EXP_OVERFLOW = float(np.log(np.finfo(float).max))
CONDITION_LIMIT = 1e12


class Variant(str, enum.Enum):
    Q = "Q"
    T = "T"
    H = "H"
    E = "E"
    K = "K"
    S = "S"
    C = "C"  # compliance, E^{-1}
    X = "X"  # Appendix-style permutation family; X is H^{-1}
    Y = "Y"
    Z = "Z"
    R = "R"

    def __str__(self) -> str:  # cleaner error messages
        return self.value


@dataclass(frozen=True)
class BlockMatrix:
    """A 2N x 2N complex matrix tagged with its variant.

    Blocks are addressed as (1, 1) ... (2, 2), each N x N. Entries must
    be finite; anything else raises instead of propagating Inf/NaN.
    ``det_drift`` (T only, hermitian media) and ``conditioning`` are
    diagnostics attached by the constructors.
    """

    variant: Variant
    data: np.ndarray
    det_drift: float | None = None
    conditioning: float | None = None

    def __post_init__(self):
        data = np.asarray(self.data, dtype=complex)
        if data.ndim != 2 or data.shape[0] != data.shape[1] or data.shape[0] % 2:
            raise VariantError(f"block matrix must be 2N x 2N, got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise MatrixOverflowError(
                f"{self.variant} matrix contains non-finite entries")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "variant", Variant(self.variant))

    @property
    def n(self) -> int:
        return self.data.shape[0] // 2

    def block(self, i: int, j: int) -> np.ndarray:
        if i not in (1, 2) or j not in (1, 2):
            raise IndexError("block indices are (1|2, 1|2)")
        n = self.n
        return self.data[(i - 1) * n:i * n, (j - 1) * n:j * n]

    @property
    def b11(self) -> np.ndarray:
        return self.block(1, 1)

    @property
    def b12(self) -> np.ndarray:
        return self.block(1, 2)

    @property
    def b21(self) -> np.ndarray:
        return self.block(2, 1)

    @property
    def b22(self) -> np.ndarray:
        return self.block(2, 2)

    def to_jsonable(self) -> dict:
        """Row-major [re, im] pairs plus the variant tag."""
        return {
            "variant": self.variant.value,
            "n": self.n,
            "data": [[[float(e.real), float(e.imag)] for e in row]
                     for row in self.data],
        }


def from_blocks(variant: Variant, b11, b12, b21, b22,
                det_drift: float | None = None,
                conditioning: float | None = None) -> BlockMatrix:
    data = np.block([[np.asarray(b11, dtype=complex), np.asarray(b12, dtype=complex)],
                     [np.asarray(b21, dtype=complex), np.asarray(b22, dtype=complex)]])
    return BlockMatrix(variant=variant, data=data, det_drift=det_drift,
                       conditioning=conditioning)


def antidiagonal_identity(n: int) -> BlockMatrix:
    """H(0) = S-identity = [[0, I], [I, 0]] in block form (H-tagged)."""
    z = np.zeros((n, n))
    i = np.eye(n)
    return from_blocks(Variant.H, z, i, i, z)


def _basis_for(m: MslCoefficients, basis: ModeBasis | None) -> ModeBasis:
    return basis if basis is not None else solve_qep(m)


def _check_overflow(basis: ModeBasis, d: float, layer_index: int | None = None):
    omega_d = basis.max_abs_im_k() * d
    if omega_d > _EXP_OVERFLOW:
        raise MatrixOverflowError(
            f"exp(|Im k| d) with |Im k| d = {omega_d:.3g} exceeds the "
            "representable range", omega_d=omega_d, layer_index=layer_index)


def q_matrix(basis: ModeBasis, z: float = 0.0,
             references=None) -> BlockMatrix:
    """Solution-basis matrix Q(z): column j is (F_j(z); A_j(z)).

    ``references`` gives each mode's reference point r_j, so
    F_j(z) = f0_j exp(i k_j (z - r_j)). The default (None) is the
    reduced base, r_j = z for every mode, in which the columns are just
    (f0_j; a0_j).
    """
    n = basis.n
    ks = basis.ks
    if references is None:
        refs = np.full(2 * n, z, dtype=float)
    else:
        refs = np.broadcast_to(np.asarray(references, dtype=float), (2 * n,))
    phases = np.exp(1j * ks * (z - refs))
    if not np.all(np.isfinite(phases)):
        raise MatrixOverflowError(
            "mode exponential overflowed in Q(z)",
            omega_d=float(np.max(np.abs(ks.imag) * np.abs(z - refs))))
    cols = np.vstack([np.column_stack([md.f0 for md in basis.modes]),
                      np.column_stack([md.a0 for md in basis.modes])])
    data = cols * phases[None, :]
    cond = scaled_cond(data)
    if cond > CONDITION_LIMIT:
        raise IllConditionedError(
            f"Q(z) basis condition {cond:.3e} exceeds {CONDITION_LIMIT:.0e}",
            estimate=cond)
    return BlockMatrix(variant=Variant.Q, data=data, conditioning=cond)


def _det_drift_extended(basis: ModeBasis, d: float) -> float:
    """Unimodularity drift of T(d), measured in extended precision.

    Re-assembles T from the modal data in the widest complex dtype the
    platform has and evaluates the determinant by pivoted elimination.
    The drift is reported symmetrically, max(|det - 1|, |1/det - 1|):
    at large |Im k| d the decaying channel drops below one ulp of the
    growing one and the computed determinant collapses toward zero,
    which is as much a unimodularity failure as a huge value. A float64
    determinant would bury the moderate-Omega-d signal under its own
    storage noise (~ u * cond(T)), hence the extended dtype.
    """
    xt = EXTENDED_COMPLEX
    ks = basis.ks.astype(np.complex128)
    q0 = np.vstack([np.column_stack([md.f0 for md in basis.modes]),
                    np.column_stack([md.a0 for md in basis.modes])]).astype(xt)
    real_part = np.exp(np.asarray(-ks.imag * d, dtype=np.longdouble))
    phase = np.exp(1j * np.asarray(ks.real * d, dtype=np.longdouble)
                   .astype(xt))
    diag = real_part.astype(xt) * phase
    try:
        t_ext = (q0 * diag[None, :]) @ inv_pivoted(q0)
        det = det_pivoted(t_ext)
    except SingularMatrixError:
        return float("inf")
    if det == 0:
        return float("inf")
    drift = max(abs(det - 1.0), abs(1.0 / det - 1.0))
    return float(drift)


def t_single(m: MslCoefficients, d: float,
             basis: ModeBasis | None = None) -> BlockMatrix:
    """Associated transfer matrix of one homogeneous layer.

    T(d) = Q0 diag(exp(i k_j d)) Q0^{-1} over the mode basis. For
    formally hermitian media the unimodularity drift diagnostic is
    attached (see ``_det_drift_extended``); it is reported, never
    asserted, since its breakdown is exactly the phenomenon the stable
    variants exist to avoid.
    """
    if d < 0:
        raise ValueError("thickness must be >= 0")
    basis = _basis_for(m, basis)
    _check_overflow(basis, d)
    n = basis.n
    ks = basis.ks
    q0 = np.vstack([np.column_stack([md.f0 for md in basis.modes]),
                    np.column_stack([md.a0 for md in basis.modes])])
    diag = np.exp(1j * ks * d)
    try:
        data = right_solve_checked(q0, q0 * diag[None, :], "mode matrix Q0")
    except SingularMatrixError as exc:
        raise DegenerateModeError(
            f"mode matrix is singular (defective basis): {exc}") from exc
    drift = None
    if m.is_formally_hermitian():
        drift = _det_drift_extended(basis, d)
    return BlockMatrix(variant=Variant.T, data=data, det_drift=drift,
                       conditioning=cond_estimate(q0))


@dataclass(frozen=True)
class GammaBlocks:
    """Schur-type combinations of the partitioned mode matrices."""

    g11: np.ndarray
    g12: np.ndarray
    g21: np.ndarray
    g22: np.ndarray


def gamma_blocks(basis: ModeBasis) -> GammaBlocks:
    """gamma_11 = F+ - F- A-^{-1} A+ and its three siblings."""
    f_p, f_m = basis.f0_plus, basis.f0_minus
    a_p, a_m = basis.a0_plus, basis.a0_minus
    try:
        g11 = f_p - f_m @ solve_checked(a_m, a_p, "A0 minus block")
        g12 = f_m - f_p @ solve_checked(a_p, a_m, "A0 plus block")
        g21 = a_p - a_m @ solve_checked(f_m, f_p, "F0 minus block")
        g22 = a_m - a_p @ solve_checked(f_p, f_m, "F0 plus block")
    except SingularMatrixError as exc:
        raise DegenerateModeError(f"gamma blocks undefined: {exc}") from exc
    return GammaBlocks(g11=g11, g12=g12, g21=g21, g22=g22)


def t_partitions(basis: ModeBasis, d: float) -> tuple[
        tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray], GammaBlocks]:
    """The four N x N partitions of T(d) through the gamma blocks.

    T11 = F+ Pi+(d) g11^{-1} + F- Pi-(d) g12^{-1}, and so on with A in
    the second row and (g21, g22) in the second column.
    """
    _check_overflow(basis, d)
    g = gamma_blocks(basis)
    pi_p = np.exp(1j * np.array([md.k for md in basis.plus]) * d)
    pi_m = np.exp(1j * np.array([md.k for md in basis.minus]) * d)
    try:
        gi11 = np.linalg.inv(g.g11)
        gi12 = np.linalg.inv(g.g12)
        gi21 = np.linalg.inv(g.g21)
        gi22 = np.linalg.inv(g.g22)
    except np.linalg.LinAlgError as exc:
        raise DegenerateModeError(f"singular gamma block: {exc}") from exc
    fp_pi = basis.f0_plus * pi_p[None, :]
    fm_pi = basis.f0_minus * pi_m[None, :]
    ap_pi = basis.a0_plus * pi_p[None, :]
    am_pi = basis.a0_minus * pi_m[None, :]
    t11 = fp_pi @ gi11 + fm_pi @ gi12
    t12 = fp_pi @ gi21 + fm_pi @ gi22
    t21 = ap_pi @ gi11 + am_pi @ gi12
    t22 = ap_pi @ gi21 + am_pi @ gi22
    return (t11, t12, t21, t22), g


def h_from_t(t: BlockMatrix) -> BlockMatrix:
    """H = [[-T11^{-1} T12, T11^{-1}], [T22 - T21 T11^{-1} T12, T21 T11^{-1}]]."""
    if t.variant is not Variant.T:
        raise VariantError(f"h_from_t needs a T matrix, got {t.variant}")
    t11, t12, t21, t22 = t.b11, t.b12, t.b21, t.b22
    t11_inv_t12 = solve_checked(t11, t12, "T11")
    h11 = -t11_inv_t12
    h12 = solve_checked(t11, np.eye(t.n, dtype=complex), "T11")
    h21 = t22 - t21 @ t11_inv_t12
    h22 = right_solve_checked(t11, t21, "T11")
    return from_blocks(Variant.H, h11, h12, h21, h22,
                       conditioning=cond_estimate(t11))


def e_from_t(t: BlockMatrix) -> BlockMatrix:
    """E = [[-T12^{-1} T11, T12^{-1}], [T21 - T22 T12^{-1} T11, T22 T12^{-1}]].

    T12 vanishes at d = 0, where E is not numerically computable.
    """
    if t.variant is not Variant.T:
        raise VariantError(f"e_from_t needs a T matrix, got {t.variant}")
    t11, t12, t21, t22 = t.b11, t.b12, t.b21, t.b22
    t12_inv_t11 = solve_checked(t12, t11, "T12")
    e11 = -t12_inv_t11
    e12 = solve_checked(t12, np.eye(t.n, dtype=complex), "T12")
    e21 = t21 - t22 @ t12_inv_t11
    e22 = right_solve_checked(t12, t22, "T12")
    return from_blocks(Variant.E, e11, e12, e21, e22,
                       conditioning=cond_estimate(t12))


def _referenced_u_rows(basis: ModeBasis, d: float):
    """Mode quantities with plus modes referenced at the left edge and
    minus modes at the right edge, so every exponential has magnitude <= 1.

    Returns (f_at_z0, f_at_z, a_at_z0, a_at_z), each N x 2N with the
    plus columns first.
    """
    k_p = np.array([md.k for md in basis.plus])
    k_m = np.array([md.k for md in basis.minus])
    ep = np.exp(1j * k_p * d)     # |.| <= 1 for Im k >= 0
    em = np.exp(-1j * k_m * d)    # |.| <= 1 for Im k <= 0
    f_p, f_m = basis.f0_plus, basis.f0_minus
    a_p, a_m = basis.a0_plus, basis.a0_minus
    f_z0 = np.hstack([f_p, f_m * em[None, :]])
    f_z = np.hstack([f_p * ep[None, :], f_m])
    a_z0 = np.hstack([a_p, a_m * em[None, :]])
    a_z = np.hstack([a_p * ep[None, :], a_m])
    return f_z0, f_z, a_z0, a_z


def h_single_stable(m: MslCoefficients, d: float,
                    basis: ModeBasis | None = None) -> BlockMatrix:
    """Single-layer hybrid matrix built without growing exponentials.

    H = U^{FA} [U^{AF}]^{-1} with U^{FA} stacking (F_j(z0); A_j(z)) and
    U^{AF} stacking (A_j(z0); F_j(z)) over the referenced mode columns.
    Column rescalings cancel in the product, so the result is base
    independent, and all entries stay finite for arbitrarily large d.
    """
    if d < 0:
        raise ValueError("thickness must be >= 0")
    basis = _basis_for(m, basis)
    f_z0, f_z, a_z0, a_z = _referenced_u_rows(basis, d)
    u_fa = np.vstack([f_z0, a_z])
    u_af = np.vstack([a_z0, f_z])
    cond = scaled_cond(u_af)
    if cond > CONDITION_LIMIT:
        raise IllConditionedError(
            f"U^AF condition {cond:.3e} exceeds {CONDITION_LIMIT:.0e} "
            "(hybrid matrix pole)", estimate=cond)
    data = right_solve_checked(u_af, u_fa, "U^AF")
    return BlockMatrix(variant=Variant.H, data=data, conditioning=cond)


def e_single_stable(m: MslCoefficients, d: float,
                    basis: ModeBasis | None = None) -> BlockMatrix:
    """Single-layer stiffness matrix from referenced mode columns.

    E = U^{AA} [U^{FF}]^{-1}; stable for large d (the blocks tend to the
    one-sided limits A+ F+^{-1} and A- F-^{-1}), but the U^{FF} columns
    collide as d -> 0, where construction is refused with a conditioning
    error: this small-thickness breakdown is intrinsic to E.
    """
    if d < 0:
        raise ValueError("thickness must be >= 0")
    basis = _basis_for(m, basis)
    f_z0, f_z, a_z0, a_z = _referenced_u_rows(basis, d)
    u_aa = np.vstack([a_z0, a_z])
    u_ff = np.vstack([f_z0, f_z])
    cond = scaled_cond(u_ff)
    if cond > CONDITION_LIMIT:
        raise IllConditionedError(
            f"U^FF condition {cond:.3e} exceeds {CONDITION_LIMIT:.0e} "
            "(stiffness matrix is not computable at small thickness)",
            estimate=cond)
    data = right_solve_checked(u_ff, u_aa, "U^FF")
    return BlockMatrix(variant=Variant.E, data=data, conditioning=cond)


def k_matrix(q_right: BlockMatrix, t: BlockMatrix,
             q_left: BlockMatrix) -> BlockMatrix:
    """Coefficients transfer matrix K = Q_R^{-1} T Q_L."""
    if q_right.variant is not Variant.Q or q_left.variant is not Variant.Q:
        raise VariantError("k_matrix needs Q-variant half-space bases")
    data = solve_checked(q_right.data, t.data @ q_left.data, "Q(R)")
    return BlockMatrix(variant=Variant.K, data=data,
                       conditioning=cond_estimate(q_right.data))


def s_from_k(k: BlockMatrix) -> BlockMatrix:
    """S = [[-K22^{-1} K21, K22^{-1}], [K11 - K12 K22^{-1} K21, K12 K22^{-1}]]."""
    if k.variant is not Variant.K:
        raise VariantError(f"s_from_k needs a K matrix, got {k.variant}")
    k11, k12, k21, k22 = k.b11, k.b12, k.b21, k.b22
    k22_inv_k21 = solve_checked(k22, k21, "K22")
    s11 = -k22_inv_k21
    s12 = solve_checked(k22, np.eye(k.n, dtype=complex), "K22")
    s21 = k11 - k12 @ k22_inv_k21
    s22 = right_solve_checked(k22, k12, "K22")
    return from_blocks(Variant.S, s11, s12, s21, s22,
                       conditioning=cond_estimate(k22))


# The permutation family: matrices whose definitions differ only by
# swapping the two stacked vectors on one side of the relation. With X
# as reference, Y swaps the left-hand vectors (row blocks), Z swaps the
# right-hand vectors (column blocks) and R swaps both, which yields the
# block identity chains X11 = Y21 = R22 = Z12 etc.
_FAMILY_POSITION = {
    Variant.X: (0, 0),
    Variant.Y: (1, 0),
    Variant.Z: (0, 1),
    Variant.R: (1, 1),
}


def reblock_family(m: BlockMatrix, target: Variant | str) -> BlockMatrix:
    """Map a matrix between the X/Y/Z/R permutation-family positions."""
    target = Variant(target)
    if m.variant not in _FAMILY_POSITION or target not in _FAMILY_POSITION:
        raise VariantError(
            f"reblock_family maps among X/Y/Z/R, got {m.variant} -> {target}")
    row_bit, col_bit = _FAMILY_POSITION[m.variant]
    trow_bit, tcol_bit = _FAMILY_POSITION[target]
    n = m.n
    data = np.array(m.data, copy=True)
    if row_bit != trow_bit:
        data = np.vstack([data[n:], data[:n]])
    if col_bit != tcol_bit:
        data = np.hstack([data[:, n:], data[:, :n]])
    return BlockMatrix(variant=target, data=data)


_INVERSE_VARIANT = {
    Variant.T: Variant.T,  # T^{-1} is T(-d) for the same medium
    Variant.H: Variant.X,  # H^{-1}: (F(z0), A(z)) -> (A(z0), F(z))
    Variant.X: Variant.H,
    Variant.E: Variant.C,  # compliance matrix
    Variant.C: Variant.E,
}


def invert_variant(m: BlockMatrix) -> BlockMatrix:
    """Inverse of T, H or E (and back from X or C).

    Inverting H or E amounts to swapping the roles of F and A in the
    construction, so the results are exactly as stable as the originals.
    """
    if m.variant not in _INVERSE_VARIANT:
        raise VariantError(
            f"inverse of variant {m.variant} is not part of the catalog")
    try:
        data = np.linalg.inv(m.data)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(f"{m.variant} matrix is singular") from exc
    return BlockMatrix(variant=_INVERSE_VARIANT[m.variant], data=data,
                       conditioning=cond_estimate(m.data))
