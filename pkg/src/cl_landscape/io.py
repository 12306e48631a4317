"""File formats: binary/CSV datasets, JSON sketches and JSON models.

Binary dataset layout (all little-endian)::

    b"CLDS" | version u32 = 1 | n u64 | d u32 | n*d float64, row-major

Sketch JSON stores the sketch values and the recipe for the frequencies
(``m, d, law, sigma, seed``); the frequency matrix itself is regenerated on
load and checked against the stored fingerprint.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import DatasetIOError
from .model import Dataset, MixtureModel
from .sketch import FrequencyMatrix, Sketch, draw_frequencies

MAGIC = b"CLDS"
VERSION = 1
_HEADER = struct.Struct("<4sIQI")


def write_dataset(X: Dataset, path) -> None:
    points = np.ascontiguousarray(X.points, dtype="<f8")
    n, d = points.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, n, d))
        fh.write(points.tobytes())


def read_dataset(path) -> Dataset:
    """Read a dataset; ``.csv`` files go through :func:`read_csv`."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return read_csv(path)
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise DatasetIOError(
            f"{path}: truncated header, expected {_HEADER.size} bytes, got {len(raw)}", position=len(raw))
    magic, version, n, d = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise DatasetIOError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}", position=0)
    if version != VERSION:
        raise DatasetIOError(f"{path}: unsupported version {version}", position=4)
    expected = _HEADER.size + 8 * n * d
    if len(raw) != expected:
        raise DatasetIOError(
            f"{path}: payload size mismatch, expected {expected} bytes, got {len(raw)}", position=len(raw))
    if n < 1 or d < 1:
        raise DatasetIOError(f"{path}: empty dataset (n={n}, d={d})", position=8)
    points = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(n, d).astype(np.float64)
    if not np.all(np.isfinite(points)):
        raise DatasetIOError(f"{path}: non-finite values in payload")
    return Dataset(points, {"source": str(path)})


def read_csv(path) -> Dataset:
    """Numeric CSV, no header, one point per line. Blank lines are skipped."""
    rows = []
    width = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            if width is None:
                width = len(cells)
            elif len(cells) != width:
                raise DatasetIOError(
                    f"{path}:{lineno}: expected {width} columns, got {len(cells)}", position=lineno)
            try:
                row = [float(c) for c in cells]
            except ValueError:
                raise DatasetIOError(f"{path}:{lineno}: non-numeric cell in {line!r}", position=lineno) from None
            if not all(np.isfinite(row)):
                raise DatasetIOError(f"{path}:{lineno}: non-finite value", position=lineno)
            rows.append(row)
    if not rows:
        raise DatasetIOError(f"{path}: no data rows")
    return Dataset(np.array(rows), {"source": str(path)})


def write_csv(X: Dataset, path) -> None:
    np.savetxt(path, X.points, delimiter=",", fmt="%.17g")


def sketch_to_dict(z: Sketch, freqs: FrequencyMatrix, box=None) -> dict:
    out = {
        "m": freqs.m,
        "d": freqs.d,
        "law": freqs.law.value,
        "sigma": freqs.sigma,
        "seed": freqs.seed,
        "n": z.n,
        "z_re": z.values.real.tolist(),
        "z_im": z.values.imag.tolist(),
        "fingerprint": f"{z.frequency_fingerprint:016x}",
    }
    if box is not None:
        out["box_lower"] = np.asarray(box[0]).tolist()
        out["box_upper"] = np.asarray(box[1]).tolist()
    return out


def write_sketch(z: Sketch, freqs: FrequencyMatrix, path, box=None) -> None:
    Path(path).write_text(json.dumps(sketch_to_dict(z, freqs, box)))


def sketch_from_dict(obj: dict):
    """Returns ``(sketch, freqs, box)``; ``box`` is None unless stored."""
    try:
        freqs = draw_frequencies(obj["m"], obj["d"], obj["law"], obj["sigma"], obj["seed"])
        values = np.asarray(obj["z_re"], dtype=np.float64) + 1j * np.asarray(obj["z_im"], dtype=np.float64)
        fingerprint = int(obj["fingerprint"], 16)
        n = int(obj["n"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DatasetIOError(f"malformed sketch JSON: {exc}") from exc
    if values.shape != (freqs.m,):
        raise DatasetIOError(f"sketch has {values.shape[0]} values but m={freqs.m}")
    if fingerprint != freqs.fingerprint:
        raise DatasetIOError(
            f"regenerated frequencies have fingerprint {freqs.fingerprint:016x}, file says {fingerprint:016x}")
    box = None
    if "box_lower" in obj and "box_upper" in obj:
        box = (np.asarray(obj["box_lower"], dtype=np.float64), np.asarray(obj["box_upper"], dtype=np.float64))
    return Sketch(values, n, fingerprint), freqs, box


def read_sketch(path):
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DatasetIOError(f"{path}: invalid JSON: {exc}", position=exc.lineno) from exc
    return sketch_from_dict(obj)


def write_model(theta: MixtureModel, path) -> None:
    Path(path).write_text(json.dumps(theta.to_dict()))


def read_model(path) -> MixtureModel:
    try:
        return MixtureModel.from_dict(json.loads(Path(path).read_text()))
    except (json.JSONDecodeError, KeyError) as exc:
        raise DatasetIOError(f"{path}: malformed model JSON: {exc}") from exc
