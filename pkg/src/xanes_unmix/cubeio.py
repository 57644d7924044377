"""Bit-exact file formats: the cube container, dictionary CSV, PGM renders.

Cube container layout (all integers little-endian):

    bytes 0..7    magic "XCUBE001" (ASCII)
    bytes 8..11   header length (uint32)
    header        UTF-8 JSON: {"rows", "cols", "bands",
                  "energies_ev": [..] or null,
                  "layout": "band-sequential", "dtype": "f32le"}
    payload       bands*rows*cols float32 values, band-major then row-major

One container serves cubes (bands = T, energies present), phase maps
(bands = L) and scaling fields (bands = 1); the reader picks the semantics.
Unknown header keys are ignored for forward compatibility.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .datatypes import Dictionary, EnergyGrid, ImageGeometry, PhaseMap, ScalingField, SpectralCube
from .errors import BadMagicError, HeaderMismatchError, TruncatedFileError

MAGIC = b"XCUBE001"
KINDS = ("cube", "phase", "scaling")


def _band_matrix(obj) -> tuple[np.ndarray, ImageGeometry, list[float] | None]:
    if isinstance(obj, SpectralCube):
        return obj.values, obj.geometry, [float(e) for e in obj.grid.energies]
    if isinstance(obj, PhaseMap):
        return obj.abundances, obj.geometry, None
    if isinstance(obj, ScalingField):
        return obj.values[np.newaxis, :], obj.geometry, None
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_cube(path, obj: SpectralCube | PhaseMap | ScalingField) -> None:
    """Serialize a cube, phase map or scaling field to the container format."""
    values, geom, energies = _band_matrix(obj)
    header = {
        "rows": geom.rows,
        "cols": geom.cols,
        "bands": int(values.shape[0]),
        "energies_ev": energies,
        "layout": "band-sequential",
        "dtype": "f32le",
    }
    header_bytes = json.dumps(header, separators=(",", ":")).encode("utf-8")
    payload = np.ascontiguousarray(values, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header_bytes)))
        fh.write(header_bytes)
        fh.write(payload)


def read_cube(path, kind: str = "cube") -> SpectralCube | PhaseMap | ScalingField:
    """Read a container file; `kind` picks the band semantics.

    kind="cube" requires per-band energies; kind="phase" interprets bands as
    states; kind="scaling" requires exactly one band. Values are widened to
    float64.
    """
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}")
    data = Path(path).read_bytes()
    if len(data) < len(MAGIC):
        raise BadMagicError(f"{path}: file shorter than the magic header")
    if data[: len(MAGIC)] != MAGIC:
        raise BadMagicError(f"{path}: not a cube container (bad magic)")
    if len(data) < len(MAGIC) + 4:
        raise TruncatedFileError(f"{path}: missing header length field")
    (header_len,) = struct.unpack_from("<I", data, len(MAGIC))
    header_start = len(MAGIC) + 4
    if len(data) < header_start + header_len:
        raise TruncatedFileError(
            f"{path}: header declares {header_len} bytes, file has {len(data) - header_start}"
        )
    try:
        header = json.loads(data[header_start : header_start + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise HeaderMismatchError(f"{path}: header is not valid JSON ({exc})") from exc
    try:
        rows, cols, bands = int(header["rows"]), int(header["cols"]), int(header["bands"])
    except (KeyError, TypeError, ValueError) as exc:
        raise HeaderMismatchError(f"{path}: header missing rows/cols/bands") from exc
    if header.get("dtype") != "f32le" or header.get("layout") != "band-sequential":
        raise HeaderMismatchError(f"{path}: unsupported dtype/layout in header")
    if rows < 1 or cols < 1 or bands < 1:
        raise HeaderMismatchError(f"{path}: non-positive dimensions in header")

    expected = 4 * bands * rows * cols
    actual = len(data) - header_start - header_len
    if actual < expected:
        raise TruncatedFileError(
            f"{path}: expected {expected} payload bytes, found {actual}"
        )
    if actual > expected:
        raise HeaderMismatchError(
            f"{path}: payload has {actual} bytes, header implies {expected}"
        )
    values = (
        np.frombuffer(data, dtype="<f4", count=bands * rows * cols, offset=header_start + header_len)
        .astype(np.float64)
        .reshape(bands, rows * cols)
    )
    geom = ImageGeometry(rows, cols)

    energies = header.get("energies_ev")
    if energies is not None and len(energies) != bands:
        raise HeaderMismatchError(
            f"{path}: {len(energies)} energies for {bands} bands"
        )
    if kind == "cube":
        if energies is None:
            raise HeaderMismatchError(f"{path}: cube semantics need energies_ev")
        return SpectralCube(geom, EnergyGrid(np.asarray(energies)), values)
    if kind == "phase":
        return PhaseMap(geom, values)
    if bands != 1:
        raise HeaderMismatchError(f"{path}: scaling field needs 1 band, found {bands}")
    return ScalingField(geom, values[0])


def write_dictionary_csv(path, dictionary: Dictionary) -> None:
    """Header row 'energy_ev,<state_1>,...' then one decimal-text row per energy."""
    for label in dictionary.labels:
        if "," in label or "\n" in label:
            raise ValueError(f"label {label!r} may not contain ',' or newlines")
    lines = ["energy_ev," + ",".join(dictionary.labels)]
    for t, e in enumerate(dictionary.grid.energies):
        row = [repr(float(e))] + [repr(float(v)) for v in dictionary.spectra[t]]
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_dictionary_csv(path) -> Dictionary:
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty dictionary file")
    header = lines[0].split(",")
    if header[0] != "energy_ev" or len(header) < 2:
        raise ValueError(f"{path}: expected header 'energy_ev,<state>,...'")
    labels = tuple(header[1:])
    energies, rows = [], []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != len(header):
            raise ValueError(f"{path}: ragged row with {len(parts)} fields")
        energies.append(float(parts[0]))
        rows.append([float(v) for v in parts[1:]])
    return Dictionary(EnergyGrid(np.asarray(energies)), np.asarray(rows), labels)


def render_pgm(phase: PhaseMap, state: int, path) -> None:
    """Binary PGM of one state image; values round half-up onto 0..255."""
    if not (0 <= state < phase.n_states):
        raise IndexError(f"state index {state} out of range [0, {phase.n_states})")
    img = np.clip(phase.state_image(state), 0.0, 1.0)
    pixels = np.floor(img * 255.0 + 0.5).astype(np.uint8)
    header = f"P5\n{phase.geometry.cols} {phase.geometry.rows}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(pixels.tobytes())
