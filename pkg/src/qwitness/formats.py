"""Text formats: matrix files, experiment config files, layout documents.

Matrix file grammar::

    N
    a+bi a+bi ... (N tokens)
    ...           (N rows)

Each token is a real part followed by a signed imaginary part and ``i``,
e.g. ``0.5-0.25i`` or ``1+0i``.
"""

from __future__ import annotations

import json
import re
from pathlib import Path

import numpy as np

from .qudit import OrthonormalBasis, Projector, UnitaryChannel
from .reck import BeamDisplacer, HalfWavePlate45, OpticalLayout, QuartzCrystal, WavePlateSet
from .witness import BlindMeasurement, Channel, WitnessConfig, optimal_config


class FormatError(ValueError):
    """Malformed input file."""


_NUM = r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_TOKEN = re.compile(rf"^([+-]?{_NUM})([+-]{_NUM})i$")


def format_complex(z: complex) -> str:
    re_, im = float(z.real), float(z.imag)
    im_s = repr(im)
    if not im_s.startswith("-"):
        im_s = "+" + im_s
    return f"{re_!r}{im_s}i"


def parse_complex(token: str) -> complex:
    m = _TOKEN.match(token)
    if not m:
        raise FormatError(f"bad complex token {token!r}; expected a+bi or a-bi")
    return complex(float(m.group(1)), float(m.group(2)))


def parse_matrix(text: str) -> np.ndarray:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise FormatError("empty matrix file")
    try:
        n = int(lines[0])
    except ValueError:
        raise FormatError(f"first line must be the dimension, got {lines[0]!r}") from None
    if n < 1:
        raise FormatError(f"dimension must be positive, got {n}")
    rows = lines[1:]
    if len(rows) != n:
        raise FormatError(f"expected {n} matrix rows, found {len(rows)}")
    out = np.empty((n, n), dtype=complex)
    for r, line in enumerate(rows):
        tokens = line.split()
        if len(tokens) != n:
            raise FormatError(f"row {r + 1} has {len(tokens)} entries, expected {n}")
        out[r] = [parse_complex(t) for t in tokens]
    return out


def format_matrix(m: np.ndarray) -> str:
    m = np.asarray(m, dtype=complex)
    lines = [str(m.shape[0])]
    lines += [" ".join(format_complex(z) for z in row) for row in m]
    return "\n".join(lines) + "\n"


def read_matrix(path) -> np.ndarray:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise FormatError(f"cannot read matrix file {path}: {exc}") from None
    return parse_matrix(text)


def write_matrix(path, m: np.ndarray) -> None:
    Path(path).write_text(format_matrix(m))


def _resolve_unitary(spec, dim: int, base: Path) -> UnitaryChannel:
    if spec == "identity":
        return UnitaryChannel.identity(dim)
    m = read_matrix(base / spec)
    if m.shape[0] != dim:
        raise FormatError(f"matrix {spec} has dimension {m.shape[0]}, config says {dim}")
    return UnitaryChannel(m)


def build_config(dim: int, u0=None, u1=None, projector_index=None, coefficients=None,
                 blind_groups=None, base: Path = Path("."), name: str = "custom") -> WitnessConfig:
    """Assemble a config from loose parts.

    ``u0`` absent means a blind measurement (optionally coarse-grained by
    ``blind_groups``); ``u1`` absent or ``"optimal"`` uses the unitary that
    maps the maximally coherent state onto the last basis state.
    """
    if dim < 2:
        raise FormatError(f"dimension must be >= 2, got {dim}")
    basis = OrthonormalBasis.computational(dim)
    if u1 is None or u1 == "optimal":
        evolution = optimal_config(dim)[0].evolution
    else:
        evolution = _resolve_unitary(u1, dim, base)
    if u0 is None:
        groups = tuple(tuple(g) for g in blind_groups) if blind_groups else None
        intervention = BlindMeasurement(basis, groups)
    else:
        intervention = Channel(_resolve_unitary(u0, dim, base))
    idx = dim - 1 if projector_index is None else int(projector_index)
    if not 0 <= idx < dim:
        raise FormatError(f"projector index {idx} out of range for dimension {dim}")
    if coefficients is None:
        alpha = np.full(dim, 1 / np.sqrt(dim), dtype=complex)
    else:
        alpha = np.array([complex(*c) if isinstance(c, (list, tuple)) else complex(c) for c in coefficients])
    return WitnessConfig(basis, alpha, intervention, evolution, Projector.onto_basis_state(dim, idx), name=name)


def load_config_file(path) -> WitnessConfig:
    """JSON experiment description.

    Keys: ``dim`` (required), ``u0`` (matrix path or ``"identity"``; omit for
    a blind measurement), ``blind_groups``, ``u1`` (matrix path,
    ``"identity"`` or ``"optimal"``), ``projector_index``, ``coefficients``
    (list of ``[re, im]``). Matrix paths are relative to the config file.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot load config {path}: {exc}") from None
    if not isinstance(doc, dict) or "dim" not in doc:
        raise FormatError("config must be a JSON object with a 'dim' field")
    allowed = {"dim", "u0", "u1", "projector_index", "coefficients", "blind_groups", "name"}
    unknown = set(doc) - allowed
    if unknown:
        raise FormatError(f"unknown config keys: {sorted(unknown)}")
    return build_config(
        int(doc["dim"]), doc.get("u0"), doc.get("u1"), doc.get("projector_index"),
        doc.get("coefficients"), doc.get("blind_groups"), base=path.parent,
        name=doc.get("name", path.stem),
    )


def config_to_dict(config: WitnessConfig) -> dict:
    """Lossless JSON-ready description of a config (used for golden files)."""
    def mat(m):
        return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m)]

    iv = config.intervention
    if isinstance(iv, BlindMeasurement):
        intervention = {"type": "blind", "basis": mat(iv.basis.vectors), "groups": [list(g) for g in iv.groups]}
    else:
        intervention = {"type": "channel", "u0": mat(iv.u0.matrix)}
    return {
        "name": config.name,
        "dim": config.dim,
        "preferred_basis": mat(config.preferred_basis.vectors),
        "superposition_coeffs": [[float(z.real), float(z.imag)] for z in config.superposition_coeffs],
        "intervention": intervention,
        "evolution": mat(config.evolution.matrix),
        "outcome_projector": mat(config.outcome_projector.matrix),
    }


def layout_records(layout: OpticalLayout) -> list[dict]:
    records = []
    for e in layout.elements:
        if isinstance(e, WavePlateSet):
            rec = {"kind": e.kind, "modes": [e.mode],
                   "block": [[[float(z.real), float(z.imag)] for z in row] for row in e.block]}
            if e.rotation is not None:
                rec["rotation"] = list(e.rotation)
        elif isinstance(e, HalfWavePlate45):
            rec = {"kind": e.kind, "modes": [e.mode]}
        elif isinstance(e, QuartzCrystal):
            rec = {"kind": e.kind, "modes": [e.mode], "thickness_mm": e.thickness_mm}
        elif isinstance(e, BeamDisplacer):
            rec = {"kind": e.kind, "modes": []}
        else:  # pragma: no cover
            raise TypeError(f"unknown element {e!r}")
        records.append(rec)
    return records


def format_layout(layout: OpticalLayout) -> str:
    """One element per line: ``kind<TAB>modes<TAB>parameters``."""
    lines = [
        f"# dim={layout.dim} encoding={layout.encoding} bd_count={layout.bd_count} "
        f"output_reversed={str(layout.output_reversed).lower()}",
        "# input  " + " ".join(f"{k + 1}:{m}{p}" for k, (m, p) in enumerate(layout.input_slots)),
        "# output " + " ".join(f"{k + 1}:{m}{p}" for k, (m, p) in enumerate(layout.output_slots)),
    ]
    for rec in layout_records(layout):
        modes = ",".join(str(m) for m in rec["modes"]) or "-"
        if rec["kind"] == "WavePlateSet":
            b = np.array([[complex(*z) for z in row] for row in rec["block"]])
            params = "block=" + ";".join(" ".join(format_complex(z) for z in row) for row in b)
            if "rotation" in rec:
                params += " rotation=E[{},{}]".format(*rec["rotation"])
        elif rec["kind"] == "QuartzCrystal":
            params = f"thickness_mm={rec['thickness_mm']!r}"
        else:
            params = "-"
        lines.append(f"{rec['kind']}\t{modes}\t{params}")
    return "\n".join(lines) + "\n"
