"""File formats.

Dense matrix (``.hmat``)::

    b"HMAT" | u32 version | u64 rows | u64 cols | rows*cols f64, row-major

Packed code matrix (``.hcod``)::

    b"HCOD" | u32 version | u64 rows | u64 bits | rows*ceil(bits/8) u8

Model container::

    b"HMODEL\\0\\0" | u32 version | u32 header length | UTF-8 JSON header
    | W_1 .. W_K, V, mean_1 .. mean_K (HMAT records) | codes (HCOD record)

All integers and floats are little-endian.  Comma-separated text with one
row per line is accepted wherever a dense matrix is read.
"""

from __future__ import annotations

import io
import json
import os
import struct

import numpy as np

from .data import CODE_STAGE, Hyperparameters, ProjectionSet, TrainedModel, check_codes, pack_codes, unpack_codes
from .errors import DimensionError, FormatError, TruncatedFileError, VersionError

MATRIX_MAGIC = b"HMAT"
CODES_MAGIC = b"HCOD"
MODEL_MAGIC = b"HMODEL\x00\x00"
FORMAT_VERSION = 1

_RECORD_HEADER = struct.Struct("<4sIQQ")
_MODEL_HEADER = struct.Struct("<8sII")


def _read_exact(f, n, what):
    buf = f.read(n)
    if len(buf) != n:
        raise TruncatedFileError(f"truncated {what}: expected {n} bytes, got {len(buf)}")
    return buf


def _write_record(f, magic, rows, cols, payload):
    f.write(_RECORD_HEADER.pack(magic, FORMAT_VERSION, rows, cols))
    f.write(payload)


def _read_record_header(f, magic):
    raw = _read_exact(f, _RECORD_HEADER.size, "record header")
    got, version, rows, cols = _RECORD_HEADER.unpack(raw)
    if got != magic:
        raise FormatError(f"bad magic {got!r}, expected {magic!r}")
    if version != FORMAT_VERSION:
        raise VersionError(f"unsupported format version {version}")
    return rows, cols


def write_matrix(f, X):
    X = np.ascontiguousarray(X, dtype="<f8")
    if X.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got shape {X.shape}")
    _write_record(f, MATRIX_MAGIC, X.shape[0], X.shape[1], X.tobytes())


def read_matrix(f):
    rows, cols = _read_record_header(f, MATRIX_MAGIC)
    buf = _read_exact(f, 8 * rows * cols, "matrix data")
    return np.frombuffer(buf, dtype="<f8").astype(np.float64).reshape(rows, cols)


def write_codes(f, B):
    B = check_codes(B)
    _write_record(f, CODES_MAGIC, B.shape[0], B.shape[1], pack_codes(B).tobytes())


def read_codes(f):
    rows, bits = _read_record_header(f, CODES_MAGIC)
    width = (bits + 7) // 8
    buf = _read_exact(f, rows * width, "code data")
    packed = np.frombuffer(buf, dtype=np.uint8).reshape(rows, width)
    return unpack_codes(packed, bits)


def _is_text_path(path):
    return os.path.splitext(str(path))[1].lower() in (".csv", ".txt")


def save_matrix(path, X):
    """Write ``X`` in the binary format, or as CSV when ``path`` ends in .csv/.txt."""
    if _is_text_path(path):
        X = np.asarray(X, dtype=np.float64)
        # repr-precision floats round-trip exactly
        with open(path, "w") as f:
            for row in np.atleast_2d(X):
                f.write(",".join(repr(float(v)) for v in row) + "\n")
        return
    with open(path, "wb") as f:
        write_matrix(f, X)


def load_matrix(path):
    """Read a dense matrix from the binary format or comma-separated text."""
    with open(path, "rb") as f:
        head = f.read(4)
        f.seek(0)
        if head == MATRIX_MAGIC:
            return read_matrix(f)
        if head == CODES_MAGIC:
            return read_codes(f).astype(np.float64)
        text = f.read().decode("utf-8", errors="strict") if head else ""
    return _parse_csv(text, path)


def _parse_csv(text, path):
    rows = [line for line in text.splitlines() if line.strip() and not line.lstrip().startswith("#")]
    if not rows:
        raise FormatError(f"{path}: no matrix data")
    try:
        data = [[float(v) for v in line.split(",")] for line in rows]
    except ValueError as exc:
        raise FormatError(f"{path}: not a matrix file ({exc})") from None
    widths = {len(r) for r in data}
    if len(widths) != 1:
        raise DimensionError(f"{path}: ragged rows with widths {sorted(widths)}")
    return np.array(data, dtype=np.float64)


def save_codes(path, B):
    if _is_text_path(path):
        save_matrix(path, check_codes(B))
        return
    with open(path, "wb") as f:
        write_codes(f, B)


def load_codes(path):
    with open(path, "rb") as f:
        if f.read(4) == CODES_MAGIC:
            f.seek(0)
            return read_codes(f)
    return check_codes(load_matrix(path))


# --------------------------------------------------------------------------
# model container

def model_to_bytes(model: TrainedModel) -> bytes:
    hp = model.hyperparameters.to_dict()
    header = {
        "format": "semihash-model",
        "version": FORMAT_VERSION,
        "K": model.n_modalities,
        "dims": list(model.projections.dims),
        "c": model.code_length,
        "l": model.n_labels,
        "n": int(model.codes.shape[0]),
        "hyperparameters": hp,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    out = io.BytesIO()
    out.write(_MODEL_HEADER.pack(MODEL_MAGIC, FORMAT_VERSION, len(blob)))
    out.write(blob)
    for W in model.projections.W:
        write_matrix(out, W)
    write_matrix(out, model.projections.V)
    for mu in model.means:
        write_matrix(out, mu.reshape(1, -1))
    write_codes(out, model.codes)
    return out.getvalue()


def model_from_bytes(data: bytes) -> TrainedModel:
    f = io.BytesIO(data)
    magic, version, hlen = _MODEL_HEADER.unpack(_read_exact(f, _MODEL_HEADER.size, "model header"))
    if magic != MODEL_MAGIC:
        raise FormatError(f"not a model file (magic {magic!r})")
    if version != FORMAT_VERSION:
        raise VersionError(f"unsupported model format version {version}")
    try:
        header = json.loads(_read_exact(f, hlen, "model header").decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"corrupt model header: {exc}") from None
    try:
        K, dims, c, l, n = (header[k] for k in ("K", "dims", "c", "l", "n"))
        hp = Hyperparameters.from_dict(header["hyperparameters"])
    except (KeyError, TypeError) as exc:
        raise FormatError(f"incomplete model header: {exc}") from None
    if len(dims) != K:
        raise DimensionError(f"header lists {len(dims)} dims for K={K}")

    W = [read_matrix(f) for _ in range(K)]
    V = read_matrix(f)
    means = [read_matrix(f) for _ in range(K)]
    codes = read_codes(f)
    if f.read(1):
        raise FormatError("trailing bytes after model payload")

    for i, (w, d) in enumerate(zip(W, dims)):
        if w.shape != (d, c):
            raise DimensionError(f"W_{i} has shape {w.shape}, header says ({d}, {c})")
        if means[i].shape != (1, d):
            raise DimensionError(f"mean_{i} has shape {means[i].shape}, header says (1, {d})")
    if V.shape != (l, c):
        raise DimensionError(f"V has shape {V.shape}, header says ({l}, {c})")
    if codes.shape != (n, c):
        raise DimensionError(f"codes have shape {codes.shape}, header says ({n}, {c})")

    proj = ProjectionSet(W=tuple(W), V=V, stage=CODE_STAGE)
    return TrainedModel(projections=proj, means=tuple(m[0] for m in means), codes=codes, hyperparameters=hp)


def save_model(model: TrainedModel, path):
    with open(path, "wb") as f:
        f.write(model_to_bytes(model))


def load_model(path) -> TrainedModel:
    with open(path, "rb") as f:
        return model_from_bytes(f.read())


def write_trace(path, trace, header="iteration,objective"):
    """Objective trace as two-column CSV."""
    with open(path, "w") as f:
        f.write(header + "\n")
        for i, v in enumerate(trace):
            f.write(f"{i},{float(v)!r}\n")
