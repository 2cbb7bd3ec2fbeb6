"""Command-line front end.

Commands: ``validate``, ``bands``, ``escape``, ``stability``. Output is
CSV by default (JSON mirrors the same records); all data rows are
deterministic, and the single metadata comment line carries only the
tool version so repeated runs are byte-identical.

Exit codes: 0 success, 1 usage, 2 input invalid, 3 validation failure,
4 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

import numpy as np

from . import __version__
from .errors import MslError, StructureFileError, StructuralError
from .media import validate_coefficients
from .propagators import Variant
from .solvers import band_structure, escape_energy_scan, sh_wave_speeds
from .structure_io import parse_structure
from .verify import variant_comparison_report

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_VALIDATION = 3
EXIT_NUMERIC = 4


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _parse_grid(text: str) -> np.ndarray:
    parts = text.split(":")
    if len(parts) != 3:
        raise _UsageError(f"--grid must be start:stop:count, got {text!r}")
    try:
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise _UsageError(f"bad --grid value {text!r}: {exc}") from None
    if count < 0:
        raise _UsageError("--grid count must be >= 0")
    return np.linspace(start, stop, count)


def _parse_range(text: str) -> tuple[float, float]:
    parts = text.split(":")
    if len(parts) != 2:
        raise _UsageError(f"--range must be lo:hi, got {text!r}")
    try:
        lo, hi = float(parts[0]), float(parts[1])
    except ValueError as exc:
        raise _UsageError(f"bad --range value {text!r}: {exc}") from None
    if not hi > lo:
        raise _UsageError("--range needs hi > lo")
    return lo, hi


def _read_structure(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise StructureFileError(f"cannot read {path}: {exc}") from exc
    return parse_structure(text)


def _emit(columns, rows, args, meta_extra: str = "") -> None:
    if args.format == "json":
        doc = {"columns": list(columns), "rows": [list(r) for r in rows]}
        if not args.no_meta:
            doc["meta"] = {"tool": "mslwave", "version": __version__}
        text = json.dumps(doc, indent=2) + "\n"
    else:
        buf = io.StringIO()
        if not args.no_meta:
            buf.write(f"# mslwave,{__version__}{meta_extra}\r\n")
        writer = csv.writer(buf)
        writer.writerow(columns)
        for row in rows:
            writer.writerow(["" if v is None
                             else repr(v) if isinstance(v, float) else v
                             for v in row])
        text = buf.getvalue()
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_validate(args) -> int:
    try:
        defn = _read_structure(args.structure)
        bound = defn.bind()
    except (StructureFileError, StructuralError) as exc:
        print(f"invalid structure: {exc}", file=sys.stderr)
        return EXIT_INPUT
    failures = []
    media = [("left", bound.left), ("right", bound.right)] + [
        (f"layer {i} ({ly.medium.label or 'unnamed'})", ly.medium)
        for i, ly in enumerate(bound.layers)]
    for where, medium in media:
        report = validate_coefficients(medium, hermitian_expected=True)
        for msg in report.messages():
            failures.append(f"{where}: {msg}")
    hard = [f for f in failures if "singular" in f]
    lossy = [f for f in failures if "singular" not in f]
    for line in failures:
        print(line, file=sys.stderr)
    if hard:
        return EXIT_VALIDATION
    if lossy and not args.allow_lossy:
        print("non-hermitian media present (pass --allow-lossy to accept)",
              file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


def _cmd_bands(args) -> int:
    defn = _read_structure(args.structure)
    if "quantum" not in defn.kinds:
        raise StructureFileError(
            "bands scans energy; the structure needs quantum materials")
    q_grid = _parse_grid(args.grid)
    e_range = _parse_range(args.range)
    variant = Variant(args.variant.upper())
    bands = band_structure(defn, q_grid, e_range, variant,
                           tol=args.tol, threads=args.threads)
    rows = []
    for band in bands:
        for (q, e_val, res) in band.points:
            rows.append((q, e_val, res, band.branch, "ok"))
    masked_qs = _masked_band_points(defn, q_grid, e_range, variant, args)
    for q in masked_qs:
        rows.append((q, None, None, None, "overflow"))
    rows.sort(key=lambda r: (r[0], r[1] if r[1] is not None else np.inf))
    _emit(("q", "energy", "residual", "branch", "status"), rows, args)
    return EXIT_OK


def _masked_band_points(defn, q_grid, e_range, variant, args) -> list[float]:
    """q values whose energy scans hit masked (overflowed) points."""
    from .solvers import periodic_dispersion, scan_and_refine

    out = []
    e_grid = np.linspace(e_range[0], e_range[1], 64)
    for q in q_grid:
        def f(energy: float) -> complex:
            return periodic_dispersion(defn.bind(energy=energy), variant,
                                       float(q))
        scan = scan_and_refine(f, e_grid, tol=1e-6)
        if bool(np.any(scan.masked)):
            out.append(float(q))
    return out


def _cmd_escape(args) -> int:
    defn = _read_structure(args.structure)
    grid = _parse_grid(args.grid)
    variant = Variant(args.variant.upper())
    if "sh_piezo" in defn.kinds:
        if args.omega is None:
            raise _UsageError("piezo escape scans need --omega <rad/s>")
        scan = sh_wave_speeds(defn, omega=args.omega, v_grid=grid,
                              tol=args.tol, threads=args.threads)
        param = "v_s"
    else:
        scan = escape_energy_scan(defn, grid, variant, tol=args.tol,
                                  threads=args.threads)
        param = "energy"
    rows = [(r.value, r.value, r.residual, args.variant) for r in scan.roots]
    _emit((param, "root", "residual", "variant"), rows, args)
    return EXIT_OK


def _cmd_stability(args) -> int:
    defn = _read_structure(args.structure)
    bound = defn.bind(energy=args.energy, omega=args.omega or 1.0)
    grid = _parse_grid(args.grid)
    if len(grid) and np.all(grid > 0) and grid[0] != grid[-1] \
            and max(grid[0], grid[-1]) / min(grid[0], grid[-1]) > 100.0:
        grid = np.geomspace(grid[0], grid[-1], len(grid))
    report = variant_comparison_report(bound, grid)
    meta = f",unit_roundoff={report.unit_roundoff!r}"
    _emit(report.columns, report.rows, args, meta_extra=meta)
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="mslwave", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, grid=False, rng=False, variant=False):
        p.add_argument("--structure", required=True, help="structure file path")
        if grid:
            p.add_argument("--grid", required=True, help="start:stop:count")
        if rng:
            p.add_argument("--range", required=True, help="lo:hi")
        if variant:
            p.add_argument("--variant", choices=("t", "h", "e", "s"),
                           default="h")
        p.add_argument("--tol", type=float, default=1e-10)
        p.add_argument("--out", default=None, help="output path (default stdout)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--allow-lossy", action="store_true")
        p.add_argument("--no-meta", action="store_true")
        p.add_argument("--omega", type=float, default=None,
                       help="angular frequency (piezo problems)")
        p.add_argument("--energy", type=float, default=0.0,
                       help="binding energy for quantum media (stability)")

    common(sub.add_parser("validate", help="validate a structure file"))
    common(sub.add_parser("bands", help="Bloch band structure"),
           grid=True, rng=True, variant=True)
    common(sub.add_parser("escape", help="escape/bound-state roots"),
           grid=True, variant=True)
    common(sub.add_parser("stability", help="variant stability sweep"),
           grid=True)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    handlers = {"validate": _cmd_validate, "bands": _cmd_bands,
                "escape": _cmd_escape, "stability": _cmd_stability}
    try:
        return handlers[args.command](args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (StructureFileError, StructuralError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except MslError as exc:
        print(f"numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
