"""Bit-exact file formats: DSPT1 dense arrays, CSV tables, and run manifests."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

__all__ = [
    "write_array",
    "read_array",
    "write_csv",
    "write_manifest",
    "read_manifest",
    "file_sha256",
]

_MAGIC = "DSPT1"
_DTYPES = {"f64le": "<f8", "i32le": "<i4"}


def write_array(path, arr: np.ndarray) -> None:
    """Write an array as a DSPT1 file: one ASCII header line (magic, dtype,
    shape) followed by raw little-endian values in row-major order."""
    arr = np.asarray(arr)
    if np.issubdtype(arr.dtype, np.integer):
        tag, dtype = "i32le", "<i4"
    else:
        tag, dtype = "f64le", "<f8"
    header = " ".join([_MAGIC, tag] + [str(s) for s in arr.shape]) + "\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(np.ascontiguousarray(arr, dtype=dtype).tobytes())


def read_array(path) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").split()
        if not header or header[0] != _MAGIC:
            raise ValueError(f"{path}: not a {_MAGIC} file")
        tag, shape = header[1], tuple(int(s) for s in header[2:])
        if tag not in _DTYPES:
            raise ValueError(f"{path}: unknown dtype tag {tag!r}")
        payload = fh.read()
    expected = np.dtype(_DTYPES[tag]).itemsize * int(np.prod(shape))
    if len(payload) != expected:
        raise ValueError(f"{path}: payload is {len(payload)} bytes, expected {expected}")
    return np.frombuffer(payload, dtype=_DTYPES[tag]).reshape(shape).copy()


def write_csv(path, header: list[str], rows) -> None:
    """Plain CSV with repr-exact float formatting so reruns are byte-identical."""
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(repr(float(v)) if isinstance(v, (int, float, np.floating))
                              else str(v) for v in row) + "\n")


def file_sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(path, config: dict, outputs: list) -> None:
    """Record the run config and content hashes of every output file."""
    path = Path(path)
    manifest = {
        "format_version": 1,
        "config": config,
        "files": {Path(p).name: file_sha256(p) for p in sorted(map(str, outputs))},
    }
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def read_manifest(path) -> dict:
    return json.loads(Path(path).read_text())
