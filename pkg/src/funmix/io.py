"""Bit-exact matrix serialization and dataset bundle layout.

Matrix file format (extension ``.fumx``):

* bytes 0-3   magic ``FUMX``
* bytes 4-7   format version, unsigned 32-bit little-endian, currently 1
* bytes 8-15  rows, unsigned 64-bit little-endian
* bytes 16-23 cols, unsigned 64-bit little-endian
* bytes 24-   rows x cols IEEE-754 binary64 little-endian values,
  column-major order

The payload is exactly ``24 + 8 * rows * cols`` bytes; anything else is
rejected with a precise error.  A plain-text CSV import exists for
hand-made fixtures: a header row ``rows,cols`` followed by the values in
row-major order.

Dataset bundles are directories holding a ``manifest.txt`` (UTF-8
``key = value`` lines recording dims, SNR, purity, seed, kind, and the
relative matrix file names) next to the matrices it references.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Optional

import numpy as np

from .core import as_matrix
from .simulate import DatasetBundle

__all__ = [
    "MatrixFormatError",
    "BadMagicError",
    "UnsupportedVersionError",
    "TruncatedFileError",
    "DimensionOverflowError",
    "ManifestError",
    "write_matrix",
    "read_matrix",
    "read_csv_matrix",
    "write_bundle",
    "read_bundle",
]

MAGIC = b"FUMX"
VERSION = 1
_HEADER = struct.Struct("<4sIQQ")  # magic, version, rows, cols = 24 bytes
MANIFEST_NAME = "manifest.txt"

# Largest accepted element count; anything bigger cannot be a real payload
# and is treated as a corrupt header.
_MAX_ELEMENTS = 2**53


class MatrixFormatError(ValueError):
    """Base class for malformed matrix files."""


class BadMagicError(MatrixFormatError):
    pass


class UnsupportedVersionError(MatrixFormatError):
    pass


class TruncatedFileError(MatrixFormatError):
    pass


class DimensionOverflowError(MatrixFormatError):
    pass


class ManifestError(ValueError):
    """A bundle manifest is missing, malformed, or inconsistent with its files."""


def write_matrix(path, M) -> None:
    """Serialize a matrix; ``read_matrix(write_matrix(M)) == M`` bit for bit."""
    arr = as_matrix(M, "matrix")
    rows, cols = arr.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, rows, cols))
        fh.write(arr.astype("<f8", copy=False).tobytes(order="F"))


def read_matrix(path) -> np.ndarray:
    """Load a matrix, validating magic, version, dimensions, and length."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise TruncatedFileError(
            f"{path}: {len(data)} bytes is shorter than the {_HEADER.size}-byte header"
        )
    magic, version, rows, cols = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise BadMagicError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise UnsupportedVersionError(f"{path}: unsupported version {version}, expected {VERSION}")
    if rows == 0 or cols == 0:
        raise MatrixFormatError(f"{path}: empty dimension in header ({rows} x {cols})")
    if rows * cols > _MAX_ELEMENTS:
        raise DimensionOverflowError(
            f"{path}: header declares {rows} x {cols} elements, beyond any real payload"
        )
    expected = _HEADER.size + 8 * rows * cols
    if len(data) < expected:
        raise TruncatedFileError(
            f"{path}: expected {expected} bytes for {rows} x {cols}, found {len(data)}"
        )
    if len(data) > expected:
        raise MatrixFormatError(
            f"{path}: {len(data) - expected} trailing bytes after {rows} x {cols} payload"
        )
    flat = np.frombuffer(data, dtype="<f8", offset=_HEADER.size)
    arr = flat.reshape((rows, cols), order="F")
    if not np.isfinite(arr).all():
        raise MatrixFormatError(f"{path}: payload contains non-finite values")
    return np.asfortranarray(arr.astype(np.float64))


def read_csv_matrix(path) -> np.ndarray:
    """Import a hand-written CSV fixture: header ``rows,cols``, values row-major."""
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise MatrixFormatError(f"{path}: empty CSV file")
    try:
        rows, cols = (int(tok) for tok in lines[0].split(","))
    except ValueError as exc:
        raise MatrixFormatError(f"{path}: header must be 'rows,cols', got {lines[0]!r}") from exc
    if rows < 1 or cols < 1:
        raise MatrixFormatError(f"{path}: empty dimension in header ({rows} x {cols})")
    tokens = []
    for ln in lines[1:]:
        tokens.extend(tok for tok in ln.replace(",", " ").split() if tok)
    if len(tokens) != rows * cols:
        raise MatrixFormatError(
            f"{path}: expected {rows * cols} values for {rows} x {cols}, found {len(tokens)}"
        )
    values = np.array([float(tok) for tok in tokens]).reshape((rows, cols))
    return as_matrix(values, str(path))


def _format_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ",".join(str(v) for v in value)
    return str(value)


def write_bundle(directory, bundle: DatasetBundle) -> Path:
    """Write a dataset bundle directory: matrices plus manifest.txt."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = {"Y": "Y.fumx", "D": "D.fumx"}
    write_matrix(directory / files["Y"], bundle.Y)
    write_matrix(directory / files["D"], bundle.D)
    if bundle.A_true is not None:
        files["A_true"] = "A_true.fumx"
        write_matrix(directory / files["A_true"], bundle.A_true)
    if bundle.E_true is not None:
        files["E_true"] = "E_true.fumx"
        write_matrix(directory / files["E_true"], bundle.E_true)

    meta = bundle.meta
    lines = []
    for key in ("kind", "p", "n", "m", "r", "snr_db", "rho", "seed"):
        lines.append(f"{key} = {_format_value(meta.get(key))}")
    if meta.get("atom_indices") is not None:
        lines.append(f"atom_indices = {_format_value(meta['atom_indices'])}")
    for key, name in files.items():
        lines.append(f"{key} = {name}")
    (directory / MANIFEST_NAME).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return directory


def _parse_manifest(path: Path) -> dict:
    entries = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ManifestError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        entries[key.strip()] = value.strip()
    return entries


def _parse_optional_float(value: Optional[str]) -> Optional[float]:
    if value is None or value == "none":
        return None
    return float(value)


def read_bundle(directory) -> DatasetBundle:
    """Load a bundle directory, verifying the manifest against the files."""
    directory = Path(directory)
    manifest_path = directory / MANIFEST_NAME
    if not manifest_path.is_file():
        raise ManifestError(f"no {MANIFEST_NAME} in {directory}")
    entries = _parse_manifest(manifest_path)

    def load(key: str, required: bool) -> Optional[np.ndarray]:
        name = entries.get(key)
        if name is None or name == "none":
            if required:
                raise ManifestError(f"{manifest_path}: missing required entry {key!r}")
            return None
        target = directory / name
        if not target.is_file():
            raise ManifestError(f"{manifest_path}: {key} references missing file {name!r}")
        return read_matrix(target)

    Y = load("Y", required=True)
    D = load("D", required=True)
    A_true = load("A_true", required=False)
    E_true = load("E_true", required=False)

    meta = {"kind": entries.get("kind")}
    try:
        for key in ("p", "n", "m", "r"):
            meta[key] = int(entries[key])
        seed = entries.get("seed", "none")
        meta["seed"] = None if seed == "none" else int(seed)
        meta["snr_db"] = _parse_optional_float(entries.get("snr_db"))
        meta["rho"] = _parse_optional_float(entries.get("rho"))
    except (KeyError, ValueError) as exc:
        raise ManifestError(f"{manifest_path}: bad or missing dims/meta: {exc}") from exc
    if entries.get("atom_indices") not in (None, "none"):
        meta["atom_indices"] = [int(tok) for tok in entries["atom_indices"].split(",")]

    checks = [("Y", Y, (meta["p"], meta["n"])), ("D", D, (meta["p"], meta["m"]))]
    if A_true is not None:
        checks.append(("A_true", A_true, (meta["r"], meta["n"])))
    if E_true is not None:
        checks.append(("E_true", E_true, (meta["p"], meta["r"])))
    for key, arr, shape in checks:
        if arr.shape != shape:
            raise ManifestError(
                f"{manifest_path}: {key} has shape {arr.shape} but manifest records {shape}"
            )
    return DatasetBundle(Y=Y, D=D, A_true=A_true, E_true=E_true, meta=meta)
