"""Structure-file ingestion and serialization.

Files are UTF-8 JSON with four top-level keys::

    {
      "materials": {
        "A": {"kind": "msl", "b": [[[1.0, 0.0]]], "p": ..., "y": ..., "w": ...},
        "Q": {"kind": "quantum", "mass": 1.0, "potential": 0.0},
        "Z": {"kind": "sh_piezo", "rho": 7500.0, "c44": 2.56e10,
               "e15": 12.7, "eps11": 6.46e-9}
      },
      "left": "A",
      "right": "A",
      "layers": [{"material": "Q", "thickness": 1.0}, ...]
    }

Complex matrix entries are nested arrays of ``[re, im]`` pairs; bare
numbers are read as real. Units are documented per problem class, not
enforced. ``quantum`` materials need an energy to become concrete media
and ``sh_piezo`` materials need (omega, kappa_x); both are supplied at
bind time so solvers can sweep them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import StructureFileError
from .media import (Layer, LayeredStructure, MslCoefficients, ShPiezoParams,
                    make_quantum_medium, make_sh_piezo_medium)

_KINDS = ("msl", "quantum", "sh_piezo")


def _complex_entry(value, where: str) -> complex:
    if isinstance(value, (int, float)):
        return complex(value)
    if (isinstance(value, list) and len(value) == 2
            and all(isinstance(v, (int, float)) for v in value)):
        return complex(value[0], value[1])
    raise StructureFileError(
        "matrix entries must be numbers or [re, im] pairs", where)


def _complex_matrix(value, where: str) -> np.ndarray:
    if not isinstance(value, list) or not value:
        raise StructureFileError("expected a nested array matrix", where)
    rows = []
    for i, row in enumerate(value):
        if not isinstance(row, list):
            raise StructureFileError("expected a matrix row", f"{where}[{i}]")
        rows.append([_complex_entry(e, f"{where}[{i}][{j}]")
                     for j, e in enumerate(row)])
    n = len(rows)
    if any(len(r) != n for r in rows):
        raise StructureFileError("matrix must be square", where)
    return np.array(rows, dtype=complex)


def _require_number(entry: dict, key: str, where: str) -> float:
    if key not in entry:
        raise StructureFileError(f"missing field '{key}'", where)
    v = entry[key]
    if not isinstance(v, (int, float)):
        raise StructureFileError(f"field '{key}' must be a number", f"{where}.{key}")
    return float(v)


@dataclass(frozen=True)
class MaterialDef:
    """A parsed material entry, not yet bound to scan parameters."""

    name: str
    kind: str
    n: int
    fields: dict

    def bind(self, energy: float, omega: float, kappa_x: float) -> MslCoefficients:
        if self.kind == "msl":
            return MslCoefficients(label=self.name, **self.fields)
        if self.kind == "quantum":
            return make_quantum_medium(
                mass=self.fields["mass"], potential=self.fields["potential"],
                energy=energy, hbar2_over_2=self.fields["hbar2_over_2"],
                label=self.name)
        params = ShPiezoParams(rho=self.fields["rho"], c44=self.fields["c44"],
                               e15=self.fields["e15"], eps11=self.fields["eps11"],
                               omega=omega, kappa_x=kappa_x)
        return make_sh_piezo_medium(params, label=self.name)


@dataclass(frozen=True)
class StructureDefinition:
    """Validated structure file: materials table plus the layer stack."""

    materials: dict[str, MaterialDef]
    left: str
    right: str
    layers: tuple[tuple[str, float], ...]

    @property
    def kinds(self) -> set[str]:
        return {m.kind for m in self.materials.values()}

    def bind(self, energy: float = 0.0, omega: float = 1.0,
             kappa_x: float = 1.0) -> LayeredStructure:
        """Build concrete media and return the bound structure."""
        media = {name: mat.bind(energy, omega, kappa_x)
                 for name, mat in self.materials.items()}
        return LayeredStructure(
            left=media[self.left],
            layers=tuple(Layer(media[name], d) for name, d in self.layers),
            right=media[self.right])


def _parse_material(name: str, entry, where: str) -> MaterialDef:
    if not isinstance(entry, dict):
        raise StructureFileError("material entry must be an object", where)
    kind = entry.get("kind")
    if kind not in _KINDS:
        raise StructureFileError(
            f"material kind must be one of {_KINDS}, got {kind!r}", f"{where}.kind")
    if kind == "msl":
        mats = {}
        for key in ("b", "p", "y", "w"):
            if key not in entry:
                raise StructureFileError(f"missing matrix '{key}'", where)
            mats[key] = _complex_matrix(entry[key], f"{where}.{key}")
        n = mats["b"].shape[0]
        if any(m.shape != (n, n) for m in mats.values()):
            raise StructureFileError("b, p, y, w must share one size", where)
        return MaterialDef(name, "msl", n, mats)
    if kind == "quantum":
        fields = {
            "mass": _require_number(entry, "mass", where),
            "potential": _require_number(entry, "potential", where),
            "hbar2_over_2": float(entry.get("hbar2_over_2", 1.0)),
        }
        if fields["mass"] <= 0:
            raise StructureFileError("mass must be positive", f"{where}.mass")
        return MaterialDef(name, "quantum", 1, fields)
    fields = {key: _require_number(entry, key, where)
              for key in ("rho", "c44", "e15", "eps11")}
    for key in ("rho", "c44", "eps11"):
        if fields[key] <= 0:
            raise StructureFileError(f"{key} must be positive", f"{where}.{key}")
    return MaterialDef(name, "sh_piezo", 2, fields)


def parse_structure(text: str) -> StructureDefinition:
    """Parse and validate structure-file text (see module docstring)."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise StructureFileError(
            f"invalid JSON: {exc.msg}", f"line {exc.lineno}, column {exc.colno}"
        ) from exc
    if not isinstance(doc, dict):
        raise StructureFileError("top level must be an object", "$")

    mats_entry = doc.get("materials")
    if not isinstance(mats_entry, dict) or not mats_entry:
        raise StructureFileError("missing or empty 'materials' table", "materials")
    materials = {name: _parse_material(name, entry, f"materials.{name}")
                 for name, entry in mats_entry.items()}

    def _material_ref(key: str) -> str:
        name = doc.get(key)
        if not isinstance(name, str):
            raise StructureFileError(f"'{key}' must name a material", key)
        if name not in materials:
            raise StructureFileError(f"unknown material {name!r}", key)
        return name

    left = _material_ref("left")
    right = _material_ref("right")

    layers_entry = doc.get("layers")
    if not isinstance(layers_entry, list):
        raise StructureFileError("'layers' must be a list", "layers")
    layers: list[tuple[str, float]] = []
    for i, item in enumerate(layers_entry):
        where = f"layers[{i}]"
        if not isinstance(item, dict):
            raise StructureFileError("layer must be an object", where)
        name = item.get("material")
        if not isinstance(name, str) or name not in materials:
            raise StructureFileError(f"unknown material {name!r}", f"{where}.material")
        d = _require_number(item, "thickness", where)
        if d < 0:
            raise StructureFileError("negative thickness", f"{where}.thickness")
        layers.append((name, d))

    sizes = {m.n for m in materials.values()
             if m.name in {left, right} | {nm for nm, _ in layers}}
    if len(sizes) > 1:
        raise StructureFileError(
            f"mixed system sizes N in one structure: {sorted(sizes)}", "materials")

    return StructureDefinition(materials=materials, left=left, right=right,
                               layers=tuple(layers))


def load_structure(source, energy: float = 0.0, omega: float = 1.0,
                   kappa_x: float = 1.0) -> LayeredStructure:
    """Load and bind a structure from text or a file path."""
    text = source
    if hasattr(source, "read_text"):
        text = source.read_text(encoding="utf-8")
    elif isinstance(source, str) and "\n" not in source and not source.lstrip().startswith("{"):
        with open(source, encoding="utf-8") as fh:
            text = fh.read()
    return parse_structure(text).bind(energy=energy, omega=omega, kappa_x=kappa_x)


def _matrix_to_json(m: np.ndarray) -> list:
    return [[[float(e.real), float(e.imag)] for e in row] for row in m]


def serialize_structure(s: LayeredStructure) -> str:
    """Serialize a bound structure to structure-file text.

    All media are emitted as explicit ``msl`` entries, so the result
    round-trips to an equal structure regardless of how the media were
    originally built.
    """
    media: list[MslCoefficients] = []
    names: dict[int, str] = {}

    def register(m: MslCoefficients) -> str:
        for i, seen in enumerate(media):
            if seen == m:
                return names[i]
        media.append(m)
        names[len(media) - 1] = name = m.label or f"M{len(media) - 1}"
        if any(names[i] == name for i in range(len(media) - 1)):
            names[len(media) - 1] = name = f"M{len(media) - 1}"
        return name

    left = register(s.left)
    right = register(s.right)
    layers = [{"material": register(ly.medium), "thickness": ly.thickness}
              for ly in s.layers]
    doc = {
        "materials": {
            names[i]: {"kind": "msl",
                       "b": _matrix_to_json(m.b), "p": _matrix_to_json(m.p),
                       "y": _matrix_to_json(m.y), "w": _matrix_to_json(m.w)}
            for i, m in enumerate(media)
        },
        "left": left,
        "right": right,
        "layers": layers,
    }
    return json.dumps(doc, indent=2)
