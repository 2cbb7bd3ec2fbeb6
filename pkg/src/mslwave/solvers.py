"""Boundary-value solvers built on the stable matrix variants.

Covers the escape problem (bound/guided states of an L-M-R sandwich,
zeros of det Ms), Bloch dispersion of periodic stacks in all four
variants, the scalar Kronig-Penney specializations, a transcendental
finite-well oracle, and the secular-scan machinery shared by all of
them.
"""

from __future__ import annotations

import cmath
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.optimize

from ._linalg import solve_checked
from .compose import compose_e, compose_h, compose_t, structure_propagator
from .errors import ModelingError, MslError, VariantError
from .media import (Layer, LayeredStructure, MslCoefficients,
                    make_quantum_medium)
from .propagators import (BlockMatrix, Variant, e_single_stable,
                          h_single_stable, k_matrix, s_from_k, t_single)
from .qep import ModeBasis, solve_qep
from .structure_io import StructureDefinition

# |f(root)| above this fraction of the scan's typical magnitude marks a
# pole crossing (sign flip through infinity), not a zero.
ROOT_RESIDUAL_RFRAC = 1e-3


class ModelingWarning(UserWarning):
    """The requested scan leaves the regime the model assumes."""


@dataclass(frozen=True)
class OutgoingBasis:
    """The N half-space modes carrying energy away from the inner region.

    ``li`` stacks the reduced columns (f0_j; a0_j) as a 2N x N matrix.
    """

    modes: tuple
    li: np.ndarray

    @classmethod
    def for_left(cls, basis: ModeBasis) -> "OutgoingBasis":
        return cls(modes=basis.minus,
                   li=np.vstack([basis.f0_minus, basis.a0_minus]))

    @classmethod
    def for_right(cls, basis: ModeBasis) -> "OutgoingBasis":
        return cls(modes=basis.plus,
                   li=np.vstack([basis.f0_plus, basis.a0_plus]))

    def decays(self, tol: float = 1e-12) -> bool:
        ks = np.array([md.k for md in self.modes])
        scale = max(1.0, float(np.max(np.abs(ks))))
        return bool(np.all(np.abs(ks.imag) > tol * scale))


@dataclass(frozen=True)
class RootRecord:
    value: float
    residual: float
    bracket: tuple[float, float]


@dataclass(frozen=True)
class SecularScan:
    """A sampled secular function with brackets and refined roots."""

    param_name: str
    grid: np.ndarray
    values: np.ndarray
    masked: np.ndarray
    brackets: tuple[tuple[float, float], ...]
    roots: tuple[RootRecord, ...]
    mode: str

    def root_values(self) -> list[float]:
        return [r.value for r in self.roots]

    def to_csv(self, variant: str = "", include_meta: bool = True) -> str:
        import csv
        import io
        buf = io.StringIO()
        if include_meta:
            buf.write(f"# scan,{self.param_name},{self.mode}\r\n")
        writer = csv.writer(buf)
        writer.writerow((self.param_name, "root", "residual", "variant"))
        for r in self.roots:
            writer.writerow((repr(r.value), repr(r.value),
                             repr(r.residual), variant))
        return buf.getvalue()

    def to_json_dict(self) -> dict:
        return {
            "param_name": self.param_name,
            "mode": self.mode,
            "grid": [float(g) for g in self.grid],
            "values": [None if m else [float(v.real), float(v.imag)]
                       for v, m in zip(self.values, self.masked)],
            "brackets": [list(b) for b in self.brackets],
            "roots": [{"value": r.value, "residual": r.residual,
                       "bracket": list(r.bracket)} for r in self.roots],
        }


def _parallel_map(func, xs, threads: int):
    if threads <= 1:
        return [func(x) for x in xs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, xs))


def _bisect(func, lo: float, hi: float, tol: float):
    """Plain bisection on the real part; returns None if an evaluation
    inside the bracket fails (masked region)."""
    try:
        flo = func(lo).real
    except MslError:
        return None
    for _ in range(4096):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        try:
            fmid = func(mid).real
        except MslError:
            return None
        if fmid == 0.0:
            return mid
        if (flo < 0.0) == (fmid < 0.0):
            lo, flo = mid, fmid
        else:
            hi = mid
    return 0.5 * (lo + hi)


_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_min(absfunc, a: float, b: float, c: float, tol: float):
    """Golden-section minimization of |f| on a bracketing triplet."""
    x1 = c - _GOLDEN * (c - a)
    x2 = a + _GOLDEN * (c - a)
    f1, f2 = absfunc(x1), absfunc(x2)
    for _ in range(4096):
        if (c - a) <= tol:
            break
        if f1 < f2:
            c, x2, f2 = x2, x1, f1
            x1 = c - _GOLDEN * (c - a)
            f1 = absfunc(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (c - a)
            f2 = absfunc(x2)
    return x1 if f1 < f2 else x2


def scan_and_refine(func, grid, tol: float = 1e-10, mode: str = "auto",
                    param_name: str = "x", threads: int = 1,
                    root_residual_rfrac: float = ROOT_RESIDUAL_RFRAC
                    ) -> SecularScan:
    """Sample a secular function, bracket its zeros, and refine them.

    Points where ``func`` raises a library error are masked; brackets
    never span masked points. When the sampled values are real up to
    noise the zeros are bracketed by sign changes and refined by
    bisection; otherwise local minima of |f| are refined by golden
    section. Refined candidates whose residual stays a sizable fraction
    of the scan's typical magnitude are pole crossings or shallow dips,
    not roots, and are dropped.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or len(grid) < 2 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing with >= 2 points")

    def eval_point(x: float):
        try:
            return complex(func(x)), False
        except MslError:
            return complex(np.nan), True

    results = _parallel_map(eval_point, grid, threads)
    values = np.array([v for v, _ in results], dtype=complex)
    masked = np.array([m for _, m in results], dtype=bool)

    finite = values[~masked]
    if mode == "auto":
        if len(finite) == 0:
            mode = "sign"
        else:
            scale = float(np.max(np.abs(finite)))
            imag_frac = (float(np.max(np.abs(finite.imag))) / scale
                         if scale > 0 else 0.0)
            mode = "sign" if imag_frac <= 1e-9 else "minimum"
    if mode not in ("sign", "minimum"):
        raise ValueError(f"unknown scan mode {mode!r}")

    value_scale = float(np.median(np.abs(finite))) if len(finite) else 0.0
    residual_limit = max(root_residual_rfrac * value_scale, 1e-280)

    brackets: list[tuple[float, float]] = []
    roots: list[RootRecord] = []

    def try_accept(x, bracket):
        if x is None:
            return
        try:
            res = abs(complex(func(x)))
        except MslError:
            return
        if res <= residual_limit:
            roots.append(RootRecord(value=float(x), residual=res,
                                    bracket=bracket))

    if mode == "sign":
        re = values.real
        for i in range(len(grid) - 1):
            if masked[i] or masked[i + 1]:
                continue
            if re[i] == 0.0:
                brackets.append((float(grid[i]), float(grid[i])))
                try_accept(float(grid[i]), brackets[-1])
                continue
            if re[i] * re[i + 1] < 0.0:
                bracket = (float(grid[i]), float(grid[i + 1]))
                brackets.append(bracket)
                try_accept(_bisect(lambda x: complex(func(x)),
                                   *bracket, tol), bracket)
    else:
        mag = np.abs(values)

        def absfunc(x: float) -> float:
            try:
                return abs(complex(func(x)))
            except MslError:
                return float("inf")

        for i in range(1, len(grid) - 1):
            if masked[i - 1] or masked[i] or masked[i + 1]:
                continue
            if mag[i] <= mag[i - 1] and mag[i] <= mag[i + 1]:
                bracket = (float(grid[i - 1]), float(grid[i + 1]))
                brackets.append(bracket)
                x = _golden_min(absfunc, grid[i - 1], grid[i], grid[i + 1], tol)
                try_accept(x, bracket)

    roots.sort(key=lambda r: r.value)
    return SecularScan(param_name=param_name, grid=grid, values=values,
                       masked=masked, brackets=tuple(brackets),
                       roots=tuple(roots), mode=mode)


def escape_secular(s: LayeredStructure, variant: Variant | str = Variant.H,
                   bases: dict | None = None,
                   bound_state: bool = False) -> np.ndarray:
    """Secular matrix Ms of the escape problem, det Ms = 0 at eigenstates.

    Only outgoing waves are kept in the half-spaces: the minus modes of
    L and the plus modes of R, stacked into LI matrices. The inner
    region enters through its H (or E) matrix:

        Ms = [[-I  H11] LI_l,  [H12  0] LI_r],
             [[ 0  H21] LI_l,  [H22 -I] LI_r]]

    and analogously with (E11 - I / E12 / E21 / E22 - I) for E. With the
    ``bound_state`` flag every outgoing mode must genuinely decay.
    """
    variant = Variant(variant)
    if variant not in (Variant.H, Variant.E):
        raise VariantError(f"escape problem supports H or E, got {variant}")
    cache = dict(bases or {})

    def basis_of(m: MslCoefficients) -> ModeBasis:
        if m not in cache:
            cache[m] = solve_qep(m)
        return cache[m]

    out_l = OutgoingBasis.for_left(basis_of(s.left))
    out_r = OutgoingBasis.for_right(basis_of(s.right))
    if bound_state and not (out_l.decays() and out_r.decays()):
        raise ModelingError(
            "bound-state problem requires decaying outgoing modes in both "
            "half-spaces (propagating mode found)")

    n = s.n
    li_l_f, li_l_a = out_l.li[:n], out_l.li[n:]
    li_r_f, li_r_a = out_r.li[:n], out_r.li[n:]

    inner, _ = structure_propagator(s, variant, cache)
    if variant is Variant.H:
        ms11 = -li_l_f + inner.b11 @ li_l_a
        ms12 = inner.b12 @ li_r_f
        ms21 = inner.b21 @ li_l_a
        ms22 = inner.b22 @ li_r_f - li_r_a
    else:
        ms11 = inner.b11 @ li_l_f - li_l_a
        ms12 = inner.b12 @ li_r_f
        ms21 = inner.b21 @ li_l_f
        ms22 = inner.b22 @ li_r_f - li_r_a
    return np.block([[ms11, ms12], [ms21, ms22]])


def escape_energy_scan(defn: StructureDefinition, e_grid,
                       variant: Variant | str = Variant.H,
                       tol: float = 1e-10, threads: int = 1,
                       bound_state: bool = True) -> SecularScan:
    """Scan det Ms over energy for a quantum structure definition."""

    def f(energy: float) -> complex:
        s = defn.bind(energy=energy)
        return complex(np.linalg.det(
            escape_secular(s, variant, bound_state=bound_state)))

    return scan_and_refine(f, e_grid, tol=tol, param_name="energy",
                           threads=threads)


def periodic_dispersion(period: LayeredStructure, variant: Variant | str,
                        q: float, bases: dict | None = None) -> complex:
    """Secular residual of the Bloch condition F(z+d) = F(z) e^{iqd}.

    Evaluates the determinant form of the chosen variant. The S form
    expands the boundary values in the reduced bases of the media that
    flank the period boundaries under periodic continuation (the last
    layer's medium on the left, the first layer's on the right).
    """
    variant = Variant(variant)
    d = period.total_thickness
    phase = cmath.exp(1j * q * d)
    n = period.n
    eye = np.eye(n, dtype=complex)
    cache = dict(bases or {})

    if variant is Variant.T:
        t, _ = structure_propagator(period, Variant.T, cache)
        return complex(np.linalg.det(t.data - np.eye(2 * n) * phase))

    if variant is Variant.H:
        # Bloch conditions in the H relation give
        #   A(z) = [I - H21 e^{-iqd}]^{-1} H22 F(z) = H11^{-1} [I - H12 e^{iqd}] F(z);
        # multiplying through by [I - H21 e^{-iqd}] avoids its poles. For
        # N = 1 this reduces exactly to 2 cos(qd) H12 = 1 - H11 H22 + H12^2.
        h, _ = structure_propagator(period, Variant.H, cache)
        rhs = solve_checked(h.b11, eye - h.b12 * phase, "H11")
        return complex(np.linalg.det(h.b22 - (eye - h.b21 / phase) @ rhs))

    if variant is Variant.E:
        e, _ = structure_propagator(period, Variant.E, cache)
        return complex(np.linalg.det(
            (e.b11 + e.b12 * phase) - (e.b21 / phase + e.b22)))

    if variant is not Variant.S:
        raise VariantError(f"periodic dispersion supports T/H/E/S, got {variant}")

    layers = [ly for ly in period.layers if ly.thickness > 0]
    if not layers:
        raise ModelingError("periodic S form needs a non-empty period")
    left_medium = layers[-1].medium
    right_medium = layers[0].medium
    pseudo = LayeredStructure(left=left_medium, layers=tuple(layers),
                              right=right_medium)
    s_mat, _ = structure_propagator(pseudo, Variant.S, cache)

    def basis_of(m: MslCoefficients) -> ModeBasis:
        if m not in cache:
            cache[m] = solve_qep(m)
        return cache[m]

    bl = basis_of(left_medium)
    br = basis_of(right_medium)
    ql = np.vstack([np.hstack([bl.f0_plus, bl.f0_minus]),
                    np.hstack([bl.a0_plus, bl.a0_minus])])
    qr = np.vstack([np.hstack([br.f0_plus, br.f0_minus]),
                    np.hstack([br.a0_plus, br.a0_minus])])
    return _s_form_residual(s_mat, ql, qr, phase, n)


def _s_form_residual(s_mat: BlockMatrix, ql: np.ndarray, qr: np.ndarray,
                     phase: complex, n: int) -> complex:
    """det of the S-form Bloch secular matrix for given end-domain bases."""
    s11, s12, s21, s22 = s_mat.b11, s_mat.b12, s_mat.b21, s_mat.b22
    ql11, ql12 = ql[:n, :n], ql[:n, n:]
    ql21, ql22 = ql[n:, :n], ql[n:, n:]
    qr11, qr12 = qr[:n, :n], qr[:n, n:]
    qr21, qr22 = qr[n:, :n], qr[n:, n:]
    m1 = solve_checked(qr11 @ s21 - ql11 * phase - ql12 @ s11 * phase,
                       ql12 @ s12 * phase - qr11 @ s22 - qr12,
                       "S-form row-1 factor")
    m2 = solve_checked(qr21 @ s21 - ql21 * phase - ql22 @ s11 * phase,
                       ql22 @ s12 * phase - qr21 @ s22 - qr22,
                       "S-form row-2 factor")
    return complex(np.linalg.det(m1 - m2))


@dataclass(frozen=True)
class QuantumLayer:
    """Mass, potential and thickness of one effective-mass layer."""

    mass: float
    potential: float
    thickness: float


def _wavenumber(layer: QuantumLayer, energy: float,
                hbar2_over_2: float) -> complex:
    return cmath.sqrt((energy - layer.potential) * layer.mass / hbar2_over_2)


def kronig_penney_residuals(well: QuantumLayer, barrier: QuantumLayer,
                            energy: float, q: float,
                            variant: Variant | str = Variant.T,
                            hbar2_over_2: float = 1.0) -> complex:
    """Scalar dispersion residual of the two-layer superlattice cell.

    The period is [well, barrier] with d = a + b. Residuals (LHS - RHS):

        T:  cos(qd) - (T11 + T22)/2
        H:  2 cos(qd) H12 - (1 - H11 H22 + H12^2)
        E:  2 cos(qd) E12 - (E22 - E11)
        S:  2 cos(qd) t   - (r (t s - S11 S22) + 1)

    with r = k_B m_A / (k_A m_B). The S relation is evaluated in the
    sine/cosine bases of the media flanking the period boundaries
    (barrier on the left, well on the right); ``t`` is the left-to-right
    transmission block and ``s`` the right-to-left one. Complex k_B
    below the barrier is handled by analytic continuation of cos/sin.
    """
    variant = Variant(variant)
    h2 = hbar2_over_2
    d = well.thickness + barrier.thickness
    cos_qd = math.cos(q * d)
    medium_a = make_quantum_medium(well.mass, well.potential, energy, h2)
    medium_b = make_quantum_medium(barrier.mass, barrier.potential, energy, h2)

    if variant is Variant.T:
        t = compose_t(t_single(medium_b, barrier.thickness),
                      t_single(medium_a, well.thickness))
        return complex(cos_qd - 0.5 * (t.b11[0, 0] + t.b22[0, 0]))

    if variant is Variant.H:
        h = compose_h(h_single_stable(medium_a, well.thickness),
                      h_single_stable(medium_b, barrier.thickness))
        h11, h12, h22 = h.b11[0, 0], h.b12[0, 0], h.b22[0, 0]
        return complex(2 * cos_qd * h12 - (1 - h11 * h22 + h12 ** 2))

    if variant is Variant.E:
        e = compose_e(e_single_stable(medium_a, well.thickness),
                      e_single_stable(medium_b, barrier.thickness))
        e11, e12, e22 = e.b11[0, 0], e.b12[0, 0], e.b22[0, 0]
        return complex(2 * cos_qd * e12 - (e22 - e11))

    if variant is not Variant.S:
        raise VariantError(f"Kronig-Penney supports T/H/E/S, got {variant}")

    k_a = _wavenumber(well, energy, h2)
    k_b = _wavenumber(barrier, energy, h2)
    beta_a = (h2 / well.mass) * k_a
    beta_b = (h2 / barrier.mass) * k_b
    q_left = BlockMatrix(Variant.Q, np.array([[1.0, 0.0], [0.0, beta_b]],
                                             dtype=complex))
    q_right = BlockMatrix(Variant.Q, np.array([[1.0, 0.0], [0.0, beta_a]],
                                              dtype=complex))
    t = compose_t(t_single(medium_b, barrier.thickness),
                  t_single(medium_a, well.thickness))
    s = s_from_k(k_matrix(q_right, t, q_left))
    s11, s12 = s.b11[0, 0], s.b12[0, 0]
    s21, s22 = s.b21[0, 0], s.b22[0, 0]
    ratio = (k_b * well.mass) / (k_a * barrier.mass)
    return complex(2 * cos_qd * s21 - (ratio * (s21 * s12 - s11 * s22) + 1.0))


def kronig_penney_period(well: QuantumLayer, barrier: QuantumLayer,
                         energy: float,
                         hbar2_over_2: float = 1.0) -> LayeredStructure:
    """The [well, barrier] period as a structure at one energy."""
    medium_a = make_quantum_medium(well.mass, well.potential, energy,
                                   hbar2_over_2)
    medium_b = make_quantum_medium(barrier.mass, barrier.potential, energy,
                                   hbar2_over_2)
    return LayeredStructure(left=medium_b,
                            layers=(Layer(medium_a, well.thickness),
                                    Layer(medium_b, barrier.thickness)),
                            right=medium_a)


def finite_well_oracle(v0: float, width: float, mass: float = 1.0,
                       hbar2_over_2: float = 1.0,
                       xtol: float = 1e-12) -> tuple[float, ...]:
    """Bound-state energies of the symmetric rectangular well.

    Independent transcendental oracle: with z = k width/2 and
    z0 = sqrt(V0 m / (hbar^2/2)) width / 2, even states solve
    z tan z = sqrt(z0^2 - z^2) and odd states -z cot z = sqrt(z0^2 - z^2),
    one root per continuous branch.
    """
    if v0 <= 0:
        raise ValueError("well depth must be positive")
    z0 = math.sqrt(v0 * mass / hbar2_over_2) * width / 2.0

    def sqrt_term(z: float) -> float:
        return math.sqrt(max(z0 * z0 - z * z, 0.0))

    energies: list[float] = []
    eps = 1e-13 * max(1.0, z0)

    def branch_roots(offset: float, func) -> None:
        n = 0
        while True:
            lo = n * math.pi + offset
            hi = lo + math.pi / 2.0
            if lo >= z0:
                break
            lo_in, hi_in = lo + eps, min(hi - eps, z0 - eps)
            if hi_in <= lo_in:
                break
            flo, fhi = func(lo_in), func(hi_in)
            if flo == 0.0:
                z = lo_in
            elif flo * fhi < 0.0:
                z = scipy.optimize.brentq(func, lo_in, hi_in, xtol=xtol)
            else:
                n += 1
                continue
            k = 2.0 * z / width
            energies.append(k * k * hbar2_over_2 / mass)
            n += 1

    branch_roots(0.0, lambda z: z * math.tan(z) - sqrt_term(z))
    branch_roots(math.pi / 2.0, lambda z: -z / math.tan(z) - sqrt_term(z))
    return tuple(sorted(energies))


@dataclass(frozen=True)
class Band:
    """One connected dispersion branch (q, E, residual) with flags."""

    branch: int
    points: tuple[tuple[float, float, float], ...]
    discontinuities: tuple[int, ...] = ()


def band_structure(period: StructureDefinition, q_grid, e_range,
                   variant: Variant | str = Variant.H,
                   e_count: int = 600, tol: float = 1e-10,
                   threads: int = 1) -> list[Band]:
    """Roots of the periodic dispersion over a (q, E) window, connected
    into branches by nearest-neighbor continuity in E.

    A jump of more than five E-grid cells between adjacent q points is
    recorded as a discontinuity on the branch rather than silently
    connected.
    """
    variant = Variant(variant)
    q_grid = np.asarray(q_grid, dtype=float)
    e_lo, e_hi = float(e_range[0]), float(e_range[1])
    e_grid = np.linspace(e_lo, e_hi, e_count)
    cell = (e_hi - e_lo) / max(e_count - 1, 1)

    def roots_at(q: float):
        def f(energy: float) -> complex:
            return periodic_dispersion(period.bind(energy=energy), variant, q)

        scan = scan_and_refine(f, e_grid, tol=tol, param_name="energy")
        return [(r.value, r.residual) for r in scan.roots]

    per_q = _parallel_map(roots_at, q_grid, threads)

    bands: list[dict] = []
    open_bands: list[dict] = []
    for iq, (q, found) in enumerate(zip(q_grid, per_q)):
        unmatched = list(found)
        next_open: list[dict] = []
        for band in open_bands:
            prev_e = band["points"][-1][1]
            if unmatched:
                best = min(range(len(unmatched)),
                           key=lambda i: abs(unmatched[i][0] - prev_e))
                e_val, res = unmatched.pop(best)
                if abs(e_val - prev_e) > 5.0 * cell:
                    band["disc"].append(iq)
                band["points"].append((float(q), float(e_val), float(res)))
                next_open.append(band)
        for e_val, res in unmatched:
            band = {"id": len(bands), "points": [(float(q), float(e_val),
                                                  float(res))], "disc": []}
            bands.append(band)
            next_open.append(band)
        open_bands = next_open

    return [Band(branch=band["id"], points=tuple(band["points"]),
                 discontinuities=tuple(band["disc"]))
            for band in sorted(bands, key=lambda b: b["id"])]


def sh_wave_speeds(defn: StructureDefinition, omega: float, v_grid,
                   tol: float = 1e-6, threads: int = 1) -> SecularScan:
    """Guided SH-wave speeds of a piezoelectric stack at one frequency.

    For each trial speed v the media are bound at kappa_x = omega / v
    and the escape secular determinant (H form) is scanned. Confined
    modes need the trial speed below the outer half-spaces' bulk SH
    speed so the outgoing waves are evanescent; scanning above that
    speed only earns a warning, since the determinant still exists.
    """
    if defn.kinds - {"sh_piezo"}:
        raise ModelingError("sh_wave_speeds needs an all-piezo structure")
    v_grid = np.asarray(v_grid, dtype=float)

    def bulk_speed(name: str) -> float:
        f = defn.materials[name].fields
        return math.sqrt((f["c44"] + f["e15"] ** 2 / f["eps11"]) / f["rho"])

    v_outer = min(bulk_speed(defn.left), bulk_speed(defn.right))
    if float(np.max(v_grid)) >= v_outer:
        warnings.warn(
            f"scan extends to v >= outer bulk SH speed {v_outer:.6g}; "
            "outgoing waves are not evanescent there", ModelingWarning,
            stacklevel=2)

    def f(v: float) -> complex:
        s = defn.bind(omega=omega, kappa_x=omega / v)
        return complex(np.linalg.det(escape_secular(s, Variant.H)))

    return scan_and_refine(f, v_grid, tol=tol, param_name="v_s",
                           threads=threads)
