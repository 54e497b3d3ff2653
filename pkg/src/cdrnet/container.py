"""Versioned binary container used by the model and tensor-dataset files.

Layout (integers little-endian):

    magic line      ASCII magic + newline, e.g. "CDRNET/1\\n"
    header length   uint64
    header          UTF-8 JSON; carries an "arrays" manifest (name, shape)
    payload         float64 arrays, C order, concatenated in manifest order
    checksum        SHA-256 over every preceding byte

The magic line pins the format version; the trailing checksum makes
truncation and bit corruption detectable before any data is handed back.
Writes are byte-deterministic for identical inputs (sorted JSON keys,
fixed array order).
"""

from __future__ import annotations

import hashlib
import json
import struct

import numpy as np

_LEN_FIELD = 8
_DIGEST_SIZE = 32


class ContainerError(Exception):
    """Base class for container read failures."""


class FormatVersionError(ContainerError):
    """Magic string missing or belonging to a different format version."""


class TruncatedFileError(ContainerError):
    """File ends before the declared header/payload/checksum."""


class ChecksumError(ContainerError):
    """Stored SHA-256 does not match the file contents."""


def write_container(path, magic: str, header: dict, arrays: dict[str, np.ndarray]) -> None:
    """Write header metadata plus named float64 arrays under the given magic."""
    manifest = []
    blobs = []
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr, dtype="<f8")
        manifest.append({"name": name, "shape": list(arr.shape)})
        blobs.append(arr.tobytes())
    full_header = dict(header)
    full_header["arrays"] = manifest
    header_bytes = json.dumps(full_header, sort_keys=True).encode("utf-8")

    buf = bytearray()
    buf += magic.encode("ascii") + b"\n"
    buf += struct.pack("<Q", len(header_bytes))
    buf += header_bytes
    for blob in blobs:
        buf += blob
    buf += hashlib.sha256(bytes(buf)).digest()
    with open(path, "wb") as fh:
        fh.write(bytes(buf))


def read_container(path, magic: str) -> tuple[dict, dict[str, np.ndarray]]:
    """Read a container back; returns (header, arrays by name).

    Raises FormatVersionError for a foreign/old magic, TruncatedFileError
    when declared sizes overrun the file, ChecksumError on corruption.
    """
    with open(path, "rb") as fh:
        raw = fh.read()

    magic_line = magic.encode("ascii") + b"\n"
    if not raw.startswith(magic_line):
        raise FormatVersionError(f"{path}: not a {magic} file")
    off = len(magic_line)
    if len(raw) < off + _LEN_FIELD + _DIGEST_SIZE:
        raise TruncatedFileError(f"{path}: file too short for header and checksum")
    (header_len,) = struct.unpack_from("<Q", raw, off)
    off += _LEN_FIELD
    body_end = len(raw) - _DIGEST_SIZE
    if off + header_len > body_end:
        raise TruncatedFileError(f"{path}: truncated header")
    if hashlib.sha256(raw[:body_end]).digest() != raw[body_end:]:
        raise ChecksumError(f"{path}: checksum mismatch (corrupt or truncated file)")

    header = json.loads(raw[off : off + header_len].decode("utf-8"))
    off += header_len
    arrays: dict[str, np.ndarray] = {}
    for entry in header.pop("arrays"):
        shape = tuple(int(s) for s in entry["shape"])
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        nbytes = count * 8
        if off + nbytes > body_end:
            raise TruncatedFileError(f"{path}: truncated payload for array {entry['name']!r}")
        arr = np.frombuffer(raw, dtype="<f8", count=count, offset=off).reshape(shape)
        arrays[entry["name"]] = arr.copy()  # writable, independent of the file buffer
        off += nbytes
    if off != body_end:
        raise ContainerError(f"{path}: {body_end - off} unexpected bytes after payload")
    return header, arrays
