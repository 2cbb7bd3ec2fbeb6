"""Composition rules: combining per-layer matrices into structure matrices.

T composes by plain matrix product. H, E and S compose by the block
recursions below, whose only inverses act on inner factors that stay
regular for arbitrarily thick stacks (H, S) or arbitrarily thick but not
arbitrarily thin ones (E). Each fold records a per-step conditioning
trace so the regularity claim is checkable rather than assumed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._linalg import smallest_singular_value
from .errors import (IllConditionedError, MatrixOverflowError,
                     ResonanceError, StructuralError, VariantError)
from .media import LayeredStructure, MslCoefficients
from .propagators import (BlockMatrix, Variant, antidiagonal_identity,
                          e_single_stable, from_blocks, h_single_stable,
                          k_matrix, q_matrix, s_from_k, t_single)
from .qep import ModeBasis, solve_qep


@dataclass(frozen=True)
class CompositionStep:
    """Conditioning record for one fold step."""

    index: int
    factor_norm: float
    factor_sigma_min: float

    @property
    def conditioning(self) -> float:
        if self.factor_sigma_min == 0.0:
            return np.inf
        return self.factor_norm / self.factor_sigma_min


@dataclass(frozen=True)
class CompositionTrace:
    steps: tuple[CompositionStep, ...] = ()

    def __len__(self) -> int:
        return len(self.steps)

    def max_factor_norm(self) -> float:
        return max((s.factor_norm for s in self.steps), default=0.0)

    def max_conditioning(self) -> float:
        return max((s.conditioning for s in self.steps), default=1.0)


def _step(index: int, factor: np.ndarray) -> CompositionStep:
    return CompositionStep(index=index,
                           factor_norm=float(np.linalg.norm(factor, 2)),
                           factor_sigma_min=smallest_singular_value(factor))


def compose_t(t2: BlockMatrix, t1: BlockMatrix) -> BlockMatrix:
    """T across two adjacent regions: plain product t2 . t1 (t1 leftmost)."""
    if t2.variant is not Variant.T or t1.variant is not Variant.T:
        raise VariantError("compose_t needs two T matrices")
    if t2.n != t1.n:
        raise StructuralError("system sizes differ")
    # overflowing products become the typed error via the constructor
    with np.errstate(over="ignore", invalid="ignore"):
        data = t2.data @ t1.data
    return BlockMatrix(variant=Variant.T, data=data)


def _inner_solve(factor: np.ndarray, rhs: np.ndarray, rule: str) -> np.ndarray:
    try:
        return np.linalg.solve(factor, rhs)
    except np.linalg.LinAlgError as exc:
        raise ResonanceError(
            f"singular inner factor in the {rule} composition rule "
            f"(sigma_min = {smallest_singular_value(factor):.3e})",
            sigma_min=smallest_singular_value(factor)) from exc


def compose_h(h_m: BlockMatrix, h_rest: BlockMatrix) -> BlockMatrix:
    """Hybrid matrix of layer m joined with the stack to its right.

    Inner factor G = I - H^m_22 H^rest_11 stays regular for thicknesses
    from zero to infinity; a singular G marks a physical resonance and
    raises so root finders can bracket it.
    """
    m, trace = _compose_h_traced(h_m, h_rest, 0)
    return m


def _compose_h_traced(h_m: BlockMatrix, h_rest: BlockMatrix,
                      index: int) -> tuple[BlockMatrix, CompositionStep]:
    if h_m.variant is not Variant.H or h_rest.variant is not Variant.H:
        raise VariantError("compose_h needs two H matrices")
    n = h_m.n
    eye = np.eye(n, dtype=complex)
    g = eye - h_m.b22 @ h_rest.b11
    step = _step(index, g)
    ginv_h21 = _inner_solve(g, h_m.b21, "H")
    ginv_h22 = _inner_solve(g, h_m.b22, "H")
    h11 = h_m.b11 + h_m.b12 @ h_rest.b11 @ ginv_h21
    h12 = h_m.b12 @ (eye + h_rest.b11 @ ginv_h22) @ h_rest.b12
    h21 = h_rest.b21 @ ginv_h21
    h22 = h_rest.b22 + h_rest.b21 @ ginv_h22 @ h_rest.b12
    return from_blocks(Variant.H, h11, h12, h21, h22), step


def compose_e(e_m: BlockMatrix, e_rest: BlockMatrix) -> BlockMatrix:
    """Stiffness matrix of layer m joined with the stack to its right.

    Inner factor D = E^rest_11 - E^m_22 is regular for thick stacks but
    its norm grows like 1/d for thin layers; the trace records that
    growth (the roundoff-accumulation regime).
    """
    m, step = _compose_e_traced(e_m, e_rest, 0)
    return m


def _compose_e_traced(e_m: BlockMatrix, e_rest: BlockMatrix,
                      index: int) -> tuple[BlockMatrix, CompositionStep]:
    if e_m.variant is not Variant.E or e_rest.variant is not Variant.E:
        raise VariantError("compose_e needs two E matrices")
    d_factor = e_rest.b11 - e_m.b22
    step = _step(index, d_factor)
    dinv_e21 = _inner_solve(d_factor, e_m.b21, "E")
    dinv_e12rest = _inner_solve(d_factor, e_rest.b12, "E")
    e11 = e_m.b11 + e_m.b12 @ dinv_e21
    e12 = -e_m.b12 @ dinv_e12rest
    e21 = e_rest.b21 @ dinv_e21
    e22 = e_rest.b22 - e_rest.b21 @ dinv_e12rest
    return from_blocks(Variant.E, e11, e12, e21, e22), step


def star_product(y: BlockMatrix, x: BlockMatrix) -> BlockMatrix:
    """Redheffer star product Z = Y (*) X, with X nearer the left end.

    Identity element: [[0, I], [I, 0]].
    """
    m, step = _star_traced(y, x, 0)
    return m


def _star_traced(y: BlockMatrix, x: BlockMatrix,
                 index: int) -> tuple[BlockMatrix, CompositionStep]:
    if y.variant is not Variant.S or x.variant is not Variant.S:
        raise VariantError("star_product needs two S matrices")
    n = x.n
    eye = np.eye(n, dtype=complex)
    g = eye - x.b22 @ y.b11
    step = _step(index, g)
    ginv_x21 = _inner_solve(g, x.b21, "S")
    ginv_x22 = _inner_solve(g, x.b22, "S")
    z11 = x.b11 + x.b12 @ y.b11 @ ginv_x21
    z12 = x.b12 @ y.b12 + x.b12 @ y.b11 @ ginv_x22 @ y.b12
    z21 = y.b21 @ ginv_x21
    z22 = y.b22 + y.b21 @ ginv_x22 @ y.b12
    return from_blocks(Variant.S, z11, z12, z21, z22), step


def s_identity(n: int) -> BlockMatrix:
    m = antidiagonal_identity(n)
    return BlockMatrix(variant=Variant.S, data=m.data)


def interface_scattering(basis_left: ModeBasis,
                         basis_right: ModeBasis) -> BlockMatrix:
    """S matrix of a bare interface from the two reduced mode bases."""
    k = k_matrix(q_matrix(basis_right), t_identity(basis_left.n),
                 q_matrix(basis_left))
    return s_from_k(k)


def t_identity(n: int) -> BlockMatrix:
    return BlockMatrix(variant=Variant.T, data=np.eye(2 * n, dtype=complex))


def propagation_scattering(basis: ModeBasis, d: float) -> BlockMatrix:
    """S matrix of propagation across one layer in its own mode basis.

    Shifting the reference point by d multiplies plus coefficients by
    exp(i k d) and minus ones by exp(-i k d); in scattering arrangement
    both diagonals carry only decaying exponentials.
    """
    k_p = np.array([md.k for md in basis.plus])
    k_m = np.array([md.k for md in basis.minus])
    z = np.zeros((basis.n, basis.n), dtype=complex)
    return from_blocks(Variant.S,
                       z, np.diag(np.exp(-1j * k_m * d)),
                       np.diag(np.exp(1j * k_p * d)), z)


def structure_propagator(s: LayeredStructure, variant: Variant | str,
                         bases: dict[MslCoefficients, ModeBasis] | None = None
                         ) -> tuple[BlockMatrix, CompositionTrace]:
    """Fold the per-layer matrices of region M under one variant's rule.

    The fold runs from the rightmost layer toward the left, matching the
    recursion the composition rules are written in. Layers of zero
    thickness are skipped (they are exact neutral elements). For the S
    variant the half-space media provide the end-domain reduced bases
    and the fold alternates interface and propagation factors.
    """
    variant = Variant(variant)
    if variant not in (Variant.T, Variant.H, Variant.E, Variant.S):
        raise VariantError(f"structure folds support T/H/E/S, got {variant}")
    cache: dict[MslCoefficients, ModeBasis] = dict(bases or {})

    def basis_of(m: MslCoefficients) -> ModeBasis:
        if m not in cache:
            cache[m] = solve_qep(m)
        return cache[m]

    layers = [ly for ly in s.layers if ly.thickness > 0.0]
    n = s.n
    steps: list[CompositionStep] = []

    if variant is Variant.S:
        media = [s.left] + [ly.medium for ly in layers] + [s.right]
        acc = interface_scattering(basis_of(media[-2]), basis_of(s.right))
        for idx in range(len(layers) - 1, -1, -1):
            ly = layers[idx]
            acc, step = _star_traced(acc, propagation_scattering(
                basis_of(ly.medium), ly.thickness), len(steps))
            steps.append(step)
            acc, step = _star_traced(acc, interface_scattering(
                basis_of(media[idx]), basis_of(ly.medium)), len(steps))
            steps.append(step)
        return acc, CompositionTrace(steps=tuple(steps))

    if not layers:
        if variant is Variant.T:
            return t_identity(n), CompositionTrace()
        if variant is Variant.H:
            return antidiagonal_identity(n), CompositionTrace()
        raise IllConditionedError(
            "E matrix of a zero-thickness region is not computable")

    if variant is Variant.T:
        acc = None
        for idx in range(len(layers) - 1, -1, -1):
            ly = layers[idx]
            try:
                t_m = t_single(ly.medium, ly.thickness, basis_of(ly.medium))
                if acc is None:
                    acc = t_m
                else:
                    acc = compose_t(acc, t_m)
                    steps.append(_step(len(steps), acc.data))
            except MatrixOverflowError as exc:
                raise MatrixOverflowError(
                    f"T overflow at layer {idx}: {exc}",
                    omega_d=exc.omega_d, layer_index=idx) from None
        if len(layers) > 1 and all(
                ly.medium.is_formally_hermitian() for ly in layers):
            det = complex(np.linalg.det(acc.data))
            drift = (float("inf") if det == 0
                     else float(max(abs(det - 1.0), abs(1.0 / det - 1.0))))
            acc = BlockMatrix(variant=Variant.T, data=acc.data,
                              det_drift=drift)
        return acc, CompositionTrace(steps=tuple(steps))

    single = h_single_stable if variant is Variant.H else e_single_stable
    compose_traced = (_compose_h_traced if variant is Variant.H
                      else _compose_e_traced)
    acc = single(layers[-1].medium, layers[-1].thickness,
                 basis_of(layers[-1].medium))
    for idx in range(len(layers) - 2, -1, -1):
        ly = layers[idx]
        m_single = single(ly.medium, ly.thickness, basis_of(ly.medium))
        acc, step = compose_traced(m_single, acc, len(steps))
        steps.append(step)
    return acc, CompositionTrace(steps=tuple(steps))
