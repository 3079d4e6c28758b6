"""Binary tensor container (``.fmap``) moving feature dumps, weights and
datasets between the exporter and the analysis pipeline.

File layout, all little-endian:

    magic  b"FMAP\\x00\\x01"                       6 bytes
    manifest_length                                uint64
    manifest                                       UTF-8 JSON, manifest_length bytes
    blob region                                    raw float32 data

The manifest is ``{"format_version": 1, "entries": [...], "metadata": {...}}``
where each entry carries ``name``, ``shape``, ``byte_offset`` and
``byte_length``. Offsets are relative to the first byte after the manifest
(start of the blob region), so the manifest never depends on its own size.
Tensor data is float32, row-major.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

MAGIC = b"FMAP\x00\x01"
FORMAT_VERSION = 1
_HEADER_LEN = len(MAGIC) + 8  # magic + uint64 manifest length


class ContainerError(ValueError):
    """Raised for malformed or inconsistent container files."""


@dataclass(frozen=True)
class Tensor:
    """Named dense float32 array, 1 to 4 dimensions."""

    name: str
    shape: tuple[int, ...]
    data: np.ndarray  # float32, C-order, data.shape == shape

    def __post_init__(self):
        if not self.name:
            raise ValueError("tensor name must be non-empty")
        if not 1 <= len(self.shape) <= 4:
            raise ValueError(f"tensor {self.name!r}: shape must have 1-4 dims, got {self.shape}")
        if any(int(d) <= 0 for d in self.shape):
            raise ValueError(f"tensor {self.name!r}: shape dims must be positive, got {self.shape}")
        if tuple(self.data.shape) != tuple(self.shape):
            raise ValueError(
                f"tensor {self.name!r}: data shape {self.data.shape} != declared {self.shape}"
            )

    @property
    def nbytes(self) -> int:
        return 4 * int(np.prod(self.shape))


def tensor(name: str, values) -> Tensor:
    """Build a Tensor from any array-like, casting to contiguous float32."""
    arr = np.ascontiguousarray(values, dtype=np.float32)
    return Tensor(name=name, shape=tuple(int(d) for d in arr.shape), data=arr)


def write_container(tensors: list[Tensor], metadata: dict[str, Any], path) -> None:
    """Serialize tensors plus metadata to ``path``.

    Tensor names must be unique. Blobs are packed back to back in list order.
    """
    names = [t.name for t in tensors]
    if len(set(names)) != len(names):
        dupes = sorted({n for n in names if names.count(n) > 1})
        raise ContainerError(f"duplicate tensor name(s): {', '.join(dupes)}")

    entries = []
    offset = 0
    for t in tensors:
        entries.append(
            {
                "name": t.name,
                "shape": list(t.shape),
                "byte_offset": offset,
                "byte_length": t.nbytes,
            }
        )
        offset += t.nbytes

    manifest = {
        "format_version": FORMAT_VERSION,
        "entries": entries,
        "metadata": metadata or {},
    }
    manifest_bytes = json.dumps(manifest, separators=(",", ":"), sort_keys=False).encode("utf-8")

    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(manifest_bytes)))
        fh.write(manifest_bytes)
        for t in tensors:
            fh.write(np.ascontiguousarray(t.data, dtype="<f4").tobytes())


def read_container(path) -> tuple[list[Tensor], dict[str, Any]]:
    """Read a container, validating every manifest invariant before
    materializing any tensor.

    Returned arrays are read-only views over the file bytes; copy before
    mutating.
    """
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER_LEN:
        raise ContainerError(f"{path}: file too short for header")
    if raw[: len(MAGIC)] != MAGIC:
        raise ContainerError(f"{path}: bad magic {raw[:len(MAGIC)]!r}")
    (manifest_len,) = struct.unpack("<Q", raw[len(MAGIC) : _HEADER_LEN])
    blob_start = _HEADER_LEN + manifest_len
    if blob_start > len(raw):
        raise ContainerError(f"{path}: manifest length {manifest_len} exceeds file size")

    try:
        manifest = json.loads(raw[_HEADER_LEN:blob_start].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ContainerError(f"{path}: unreadable manifest: {exc}") from exc

    if manifest.get("format_version") != FORMAT_VERSION:
        raise ContainerError(f"{path}: unsupported format_version {manifest.get('format_version')!r}")
    entries = manifest.get("entries")
    metadata = manifest.get("metadata", {})
    if not isinstance(entries, list):
        raise ContainerError(f"{path}: manifest entries must be a list")

    blob_size = len(raw) - blob_start
    seen: set[str] = set()
    spans: list[tuple[int, int, str]] = []
    for entry in entries:
        name = entry.get("name")
        shape = entry.get("shape")
        off = entry.get("byte_offset")
        length = entry.get("byte_length")
        if not isinstance(name, str) or not name:
            raise ContainerError(f"{path}: entry with missing or empty name")
        if name in seen:
            raise ContainerError(f"{path}: duplicate entry name {name!r}")
        seen.add(name)
        if not isinstance(shape, list) or not 1 <= len(shape) <= 4 or any(
            not isinstance(d, int) or d <= 0 for d in shape
        ):
            raise ContainerError(f"{path}: entry {name!r}: invalid shape {shape!r}")
        if not isinstance(off, int) or off < 0 or not isinstance(length, int) or length < 0:
            raise ContainerError(f"{path}: entry {name!r}: invalid byte range")
        expected = 4 * int(np.prod(shape))
        if length != expected:
            raise ContainerError(
                f"{path}: entry {name!r}: byte_length {length} != 4*prod(shape) = {expected}"
            )
        if off + length > blob_size:
            raise ContainerError(
                f"{path}: entry {name!r}: range [{off}, {off + length}) exceeds blob region"
                f" of {blob_size} bytes (truncated file?)"
            )
        spans.append((off, off + length, name))

    spans.sort()
    for (_, prev_end, prev_name), (start, _, name) in zip(spans, spans[1:]):
        if start < prev_end:
            raise ContainerError(f"{path}: entries {prev_name!r} and {name!r} overlap")

    tensors = []
    for entry in entries:
        start = blob_start + entry["byte_offset"]
        arr = np.frombuffer(raw, dtype="<f4", count=entry["byte_length"] // 4, offset=start)
        arr = arr.reshape(entry["shape"])
        tensors.append(Tensor(name=entry["name"], shape=tuple(entry["shape"]), data=arr))
    return tensors, metadata
