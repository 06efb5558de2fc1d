"""Atomic file writes and the JSON-header + binary-section container."""

from __future__ import annotations

import contextlib
import json
import os
import tempfile

import numpy as np

MAGIC = b"LSARS\n"


class ContainerError(ValueError):
    """Raised when a container file is truncated, corrupt or inconsistent."""


@contextlib.contextmanager
def atomic_write(path, mode="wb"):
    """Write to a temporary sibling file and rename it over ``path`` on success."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        kwargs = {"encoding": "utf-8", "newline": "\n"} if "b" not in mode else {}
        with os.fdopen(fd, mode, **kwargs) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


def write_container(path, header: dict, arrays: dict[str, np.ndarray]) -> None:
    """Serialize ``header`` plus named arrays.

    Layout: magic line, one line of JSON header (which embeds the array
    manifest), then the raw little-endian array bytes back to back.
    """
    manifest = []
    offset = 0
    blobs = []
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name])
        dtype = arr.dtype.newbyteorder("<") if arr.dtype.byteorder == ">" else arr.dtype
        arr = arr.astype(dtype, copy=False)
        blob = arr.tobytes()
        manifest.append(
            {"name": name, "dtype": dtype.str, "shape": list(arr.shape),
             "offset": offset, "nbytes": len(blob)}
        )
        offset += len(blob)
        blobs.append(blob)
    full = dict(header)
    full["arrays"] = manifest
    full["payload_bytes"] = offset
    head = json.dumps(full, sort_keys=True, ensure_ascii=True, separators=(",", ":"))
    with atomic_write(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(head.encode("ascii"))
        fh.write(b"\n")
        for blob in blobs:
            fh.write(blob)


def read_container(path) -> tuple[dict, dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(MAGIC):
        raise ContainerError(f"{path}: not a model container (bad magic)")
    nl = data.find(b"\n", len(MAGIC))
    if nl < 0:
        raise ContainerError(f"{path}: truncated header")
    try:
        header = json.loads(data[len(MAGIC):nl].decode("ascii"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ContainerError(f"{path}: unparseable header ({exc})") from None
    payload = memoryview(data)[nl + 1:]
    expected = header.get("payload_bytes")
    if expected is None or "arrays" not in header:
        raise ContainerError(f"{path}: header lacks array manifest")
    if len(payload) != expected:
        raise ContainerError(
            f"{path}: payload is {len(payload)} bytes, header declares {expected} (truncated?)"
        )
    arrays = {}
    for entry in header.pop("arrays"):
        start, n = entry["offset"], entry["nbytes"]
        dtype = np.dtype(entry["dtype"])
        shape = tuple(entry["shape"])
        if start + n > len(payload) or n != dtype.itemsize * int(np.prod(shape, dtype=np.int64)):
            raise ContainerError(f"{path}: array {entry['name']!r} has inconsistent size")
        arr = np.frombuffer(payload[start:start + n], dtype=dtype).reshape(shape)
        arrays[entry["name"]] = arr.astype(dtype.newbyteorder("="), copy=True)
    header.pop("payload_bytes")
    return header, arrays
