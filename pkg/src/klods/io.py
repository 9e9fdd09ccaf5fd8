"""Matrix files, prior/config JSON and report writing.

NPY support is the version 1.0 subset with little-endian ``<f4``/``<f8``
payloads in C order. Every parse error is a :class:`~klods.errors.FormatError`
carrying the byte offset (NPY) or line number (CSV) where it was detected.
"""

from __future__ import annotations

import ast
import json
import os
import struct
from pathlib import Path
from typing import Optional, Tuple

import jsonschema
import numpy as np

from klods.errors import FormatError, SchemaError
from klods.gaussian import PriorSpec, RepresentationSet, as_matrix

NPY_MAGIC = b"\x93NUMPY"
_PREAMBLE = 10
_ALIGN = 64
_DESCRS = {"<f4": np.dtype("<f4"), "<f8": np.dtype("<f8")}


# ---------------------------------------------------------------- NPY


def parse_npy(raw: bytes) -> np.ndarray:
    """Decode NPY v1.0 bytes into a float64 array."""
    if len(raw) < _PREAMBLE:
        raise FormatError(f"file too short for an NPY preamble ({len(raw)} bytes)", 0)
    if raw[:6] != NPY_MAGIC:
        raise FormatError("bad NPY magic string", 0)
    if (raw[6], raw[7]) != (1, 0):
        raise FormatError(f"unsupported NPY version {raw[6]}.{raw[7]} (only 1.0)", 6)
    (header_len,) = struct.unpack("<H", raw[8:10])
    end = _PREAMBLE + header_len
    if len(raw) < end:
        raise FormatError(f"header length {header_len} runs past end of file", 8)
    try:
        text = raw[_PREAMBLE:end].decode("latin1")
        header = ast.literal_eval(text)
    except (ValueError, SyntaxError) as exc:
        raise FormatError(f"unparseable NPY header: {exc}", _PREAMBLE) from exc
    if not text.endswith("\n"):
        raise FormatError("NPY header is not newline terminated", end - 1)
    if not isinstance(header, dict) or set(header) != {"descr", "fortran_order", "shape"}:
        raise FormatError("NPY header must have exactly descr, fortran_order and shape", _PREAMBLE)
    descr = header["descr"]
    if descr not in _DESCRS:
        raise FormatError(f"unsupported descr {descr!r} (expected '<f4' or '<f8')", _PREAMBLE)
    if header["fortran_order"] is not False:
        raise FormatError("fortran_order arrays are not supported", _PREAMBLE)
    shape = header["shape"]
    if not isinstance(shape, tuple) or not all(isinstance(s, int) and s >= 0 for s in shape):
        raise FormatError(f"invalid shape {shape!r}", _PREAMBLE)
    dtype = _DESCRS[descr]
    expected = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
    payload = raw[end:]
    if len(payload) != expected:
        raise FormatError(
            f"payload has {len(payload)} bytes, header shape {shape} needs {expected}", end
        )
    return np.frombuffer(payload, dtype=dtype).astype(np.float64).reshape(shape)


def format_npy(array, descr: str = "<f8") -> bytes:
    """Encode an array as NPY v1.0 with the header padded to a 64-byte boundary."""
    if descr not in _DESCRS:
        raise FormatError(f"unsupported descr {descr!r}")
    a = np.ascontiguousarray(array, dtype=_DESCRS[descr])
    shape = repr(tuple(int(s) for s in a.shape))
    header = "{'descr': '%s', 'fortran_order': False, 'shape': %s, }" % (descr, shape)
    pad = (-(_PREAMBLE + len(header) + 1)) % _ALIGN
    header = (header + " " * pad + "\n").encode("latin1")
    return NPY_MAGIC + bytes([1, 0]) + struct.pack("<H", len(header)) + header + a.tobytes()


def read_npy(path) -> np.ndarray:
    return parse_npy(Path(path).read_bytes())


def write_npy(path, array, descr: str = "<f8") -> None:
    Path(path).write_bytes(format_npy(array, descr))


# ---------------------------------------------------------------- CSV


def parse_csv(text: str, header: bool = False) -> np.ndarray:
    """Comma-separated numeric rows into an ``(N, d)`` float64 array."""
    rows = []
    width = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        if header and lineno == 1:
            continue
        if not line.strip():
            continue
        cells = line.split(",")
        try:
            row = [float(c) for c in cells]
        except ValueError:
            bad = next(c for c in cells if not _is_float(c))
            raise FormatError(f"non-numeric cell {bad.strip()!r}", lineno, unit="line") from None
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise FormatError(f"row has {len(row)} cells, expected {width}", lineno, unit="line")
        rows.append(row)
    if not rows:
        raise FormatError("CSV file has no data rows", 1, unit="line")
    return np.array(rows, dtype=np.float64)


def _is_float(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def format_csv(array) -> str:
    a = np.asarray(array, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    return "".join(",".join(repr(float(v)) for v in row) + "\n" for row in a)


# ---------------------------------------------------------------- matrices


def _is_npy(path) -> bool:
    if str(path).lower().endswith(".npy"):
        return True
    if str(path).lower().endswith(".csv"):
        return False
    with open(path, "rb") as fh:
        return fh.read(6) == NPY_MAGIC


def read_array(path, header: bool = False) -> np.ndarray:
    if _is_npy(path):
        return read_npy(path)
    return parse_csv(Path(path).read_text(), header=header)


def load_matrix(path, header: bool = False) -> RepresentationSet:
    """Load an ``(N, d)`` or ``(N, H, W, C)`` NPY file, or an ``(N, d)`` CSV file.

    Four-dimensional NPY arrays are flattened per row in C order and their
    ``(H, W, C)`` shape is kept as ``tensor_shape``.
    """
    a = read_array(path, header)
    if a.ndim == 2:
        return RepresentationSet(a)
    if a.ndim == 4:
        return RepresentationSet(a.reshape(a.shape[0], -1), tuple(a.shape[1:]))
    raise FormatError(f"expected a 2-D or 4-D array, got shape {a.shape}")


def load_vector(path, header: bool = False) -> np.ndarray:
    """Load a 1-D vector (NLL files); ``(N, 1)`` and ``(1, N)`` matrices are flattened."""
    a = read_array(path, header)
    if a.ndim == 1:
        return a
    if a.ndim == 2 and 1 in a.shape:
        return a.ravel()
    raise FormatError(f"expected a vector, got shape {a.shape}")


def save_matrix(path, data, descr: str = "<f8") -> None:
    """Write a matrix (or a RepresentationSet, as ``(N, H, W, C)`` when it has a tensor shape)."""
    if isinstance(data, RepresentationSet) and data.tensor_shape is not None:
        a = data.tensors()
    elif isinstance(data, RepresentationSet):
        a = data.data
    else:
        a = np.asarray(data, dtype=np.float64)
    if str(path).lower().endswith(".csv"):
        Path(path).write_text(format_csv(as_matrix(a.reshape(a.shape[0], -1)) if a.ndim > 2 else a))
    else:
        write_npy(path, a, descr)


# ---------------------------------------------------------------- JSON


PRIOR_SCHEMA = {
    "type": "object",
    "required": ["dim", "mean", "scale"],
    "additionalProperties": False,
    "properties": {
        "dim": {"type": "integer", "minimum": 1},
        "mean": {"type": "array", "items": {"type": "number"}},
        "scale": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
        "tensor_shape": {
            "type": "array",
            "items": {"type": "integer", "minimum": 1},
            "minItems": 3,
            "maxItems": 3,
        },
    },
}


def _validate(doc, schema):
    try:
        jsonschema.validate(doc, schema)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise SchemaError(exc.message, path) from None


def read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc.msg}", exc.lineno, unit="line") from None


def prior_from_dict(doc) -> PriorSpec:
    _validate(doc, PRIOR_SCHEMA)
    dim = doc["dim"]
    for key in ("mean", "scale"):
        if len(doc[key]) != dim:
            raise SchemaError(f"length {len(doc[key])} != dim {dim}", key)
    shape = doc.get("tensor_shape")
    if shape is not None and int(np.prod(shape)) != dim:
        raise SchemaError(f"product of {shape} != dim {dim}", "tensor_shape")
    return PriorSpec(doc["mean"], doc["scale"], tuple(shape) if shape else None)


def prior_to_dict(prior: PriorSpec) -> dict:
    doc = {"dim": prior.dim, "mean": prior.mean.tolist(), "scale": prior.scale.tolist()}
    if prior.tensor_shape is not None:
        doc["tensor_shape"] = list(prior.tensor_shape)
    return doc


def load_prior(path) -> PriorSpec:
    return prior_from_dict(read_json(path))


def save_prior(prior: PriorSpec, path) -> None:
    Path(path).write_text(json.dumps(prior_to_dict(prior), indent=2) + "\n")


# ---------------------------------------------------------------- reports


def _report_paths(path) -> Tuple[str, str]:
    base, ext = os.path.splitext(str(path))
    if ext.lower() not in (".json", ".csv"):
        base = str(path)
    return base + ".json", base + ".csv"


def write_report(report, path) -> Tuple[str, str]:
    """Write a DetectionReport as ``<base>.json`` and ``<base>.csv``; return both paths.

    The CSV has columns ``rep,auroc,aupr`` and two footer rows ``mean`` and
    ``std``.
    """
    json_path, csv_path = _report_paths(path)
    doc = report.to_dict()
    Path(json_path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    lines = ["rep,auroc,aupr"]
    for i, rep in enumerate(doc["repetitions"]):
        lines.append(f"{i},{rep['auroc']!r},{rep['aupr']!r}")
    lines.append(f"mean,{doc['auroc_mean']!r},{doc['aupr_mean']!r}")
    lines.append(f"std,{doc['auroc_std']!r},{doc['aupr_std']!r}")
    Path(csv_path).write_text("\n".join(lines) + "\n")
    return json_path, csv_path


def read_report(path):
    from klods.evaluation import DetectionReport

    json_path, _ = _report_paths(path)
    return DetectionReport.from_dict(read_json(json_path))
