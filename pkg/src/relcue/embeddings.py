"""Embedding keys, providers, and the float32 archive format.

Vectors come from one of three interchangeable providers: a precomputed
archive (manifest.json + vectors.bin), a remote encoder service, or a
deterministic hash-based mock. Every provider returns unit-norm float32
vectors, so cosine similarity reduces to a dot product.
"""

from __future__ import annotations

import base64
import hashlib
import json
import math
import os
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Protocol

import httpx
import numpy as np

from .errors import (
    CorruptArchive,
    DimensionMismatch,
    DuplicateKey,
    HttpError,
    KeyNotFound,
)
from .fsio import atomic_write_bytes, atomic_write_text
from .geometry import BoundingBox, SpatialKey

ENV_EMB_ENDPOINT = "EMB_ENDPOINT"
KEY_KINDS = ("text", "region", "union", "spatial")
MANIFEST_NAME = "manifest.json"
VECTORS_NAME = "vectors.bin"
ARCHIVE_DTYPE = "f32le"


@dataclass(frozen=True)
class EmbeddingKey:
    kind: str
    payload: str

    def __post_init__(self) -> None:
        if self.kind not in KEY_KINDS:
            raise ValueError(f"unknown embedding key kind {self.kind!r}")

    @property
    def key_string(self) -> str:
        return f"{self.kind}:{self.payload}"

    def __str__(self) -> str:
        return self.key_string


def _half_up(value: float) -> int:
    """Round half away from zero for non-negative pixel coordinates.

    Spelled out (rather than round()) so that other producers of the same
    keys can reproduce it with floor(v + 0.5) in any language.
    """
    return int(math.floor(value + 0.5))


def text_key(prompt: str) -> EmbeddingKey:
    digest = hashlib.sha256(prompt.encode("utf-8")).hexdigest()
    return EmbeddingKey("text", digest)


def box_ints(box: BoundingBox) -> tuple[int, int, int, int]:
    """Integer pixel rectangle as embedded in region/union keys."""
    x, y = _half_up(box.x), _half_up(box.y)
    w, h = max(1, _half_up(box.w)), max(1, _half_up(box.h))
    return x, y, w, h


def _box_payload(image_id: str, box: BoundingBox) -> str:
    x, y, w, h = box_ints(box)
    return f"{image_id}:{x}:{y}:{w}:{h}"


def region_key(image_id: str, box: BoundingBox) -> EmbeddingKey:
    return EmbeddingKey("region", _box_payload(image_id, box))


def union_key(image_id: str, sub_box: BoundingBox, obj_box: BoundingBox) -> EmbeddingKey:
    return EmbeddingKey("union", _box_payload(image_id, union_box(sub_box, obj_box)))


def union_box(a: BoundingBox, b: BoundingBox) -> BoundingBox:
    x = min(a.x, b.x)
    y = min(a.y, b.y)
    right = max(a.x + a.w, b.x + b.w)
    bottom = max(a.y + a.h, b.y + b.h)
    return BoundingBox(x, y, right - x, bottom - y)


def spatial_embedding_key(key: SpatialKey) -> EmbeddingKey:
    return EmbeddingKey("spatial", key.canonical())


def unit_normalize(vector: np.ndarray) -> np.ndarray:
    values = np.asarray(vector, dtype=np.float64)
    norm = float(np.linalg.norm(values))
    if norm == 0.0:
        raise ValueError("cannot normalize a zero vector")
    return (values / norm).astype(np.float32)


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    u = np.asarray(u)
    v = np.asarray(v)
    if u.shape != v.shape:
        raise DimensionMismatch(f"cosine over shapes {u.shape} and {v.shape}")
    value = float(np.dot(u.astype(np.float64), v.astype(np.float64)))
    return max(-1.0, min(1.0, value))


def mock_embed(key: EmbeddingKey | str, dim: int) -> np.ndarray:
    """Deterministic pseudo-embedding derived from the key string alone.

    Byte layout, fixed so independent implementations agree bit-for-bit at
    float32: SHA-256(key_string || counter) in counter mode, the counter a
    4-byte big-endian integer starting at 0; the stream is consumed as
    big-endian uint32 words; each word u maps to x = u/2^31 - 1 in float64;
    the squared norm accumulates left to right in float64; each component is
    x/norm cast to float32. A zero stream (never observed) would yield the
    first basis vector.
    """
    if dim < 2:
        raise ValueError("dim must be >= 2")
    key_string = key.key_string if isinstance(key, EmbeddingKey) else str(key)
    seed = key_string.encode("utf-8")
    stream = b""
    counter = 0
    while len(stream) < dim * 4:
        stream += hashlib.sha256(seed + counter.to_bytes(4, "big")).digest()
        counter += 1
    words = np.frombuffer(stream[: dim * 4], dtype=">u4")
    components = [float(word) / 2147483648.0 - 1.0 for word in words.tolist()]
    squared = 0.0
    for value in components:
        squared += value * value
    if squared == 0.0:
        out = np.zeros(dim, dtype=np.float32)
        out[0] = 1.0
        return out
    norm = math.sqrt(squared)
    return np.array([value / norm for value in components], dtype=np.float32)


class Archive:
    """Read-only view over a manifest + blob pair."""

    def __init__(self, dim: int, offsets: dict[str, int], vectors: np.ndarray):
        self.dim = dim
        self._offsets = offsets
        self._vectors = vectors

    def keys(self) -> list[str]:
        return sorted(self._offsets)

    def __len__(self) -> int:
        return len(self._offsets)

    def __contains__(self, key: EmbeddingKey | str) -> bool:
        return str(key) in self._offsets

    def raw(self, key: EmbeddingKey | str) -> np.ndarray:
        key_string = str(key)
        try:
            offset = self._offsets[key_string]
        except KeyError:
            raise KeyNotFound(key_string) from None
        start = offset // 4
        return np.array(self._vectors[start:start + self.dim], dtype=np.float32)

    def get(self, key: EmbeddingKey | str) -> np.ndarray:
        return unit_normalize(self.raw(key))


def write_archive(entries, out_dir: Path) -> None:
    """Persist (key, vector) pairs as manifest.json + vectors.bin.

    Keys are stored sorted; offsets are byte positions into the blob. Vectors
    are written as little-endian float32 exactly as given (normalization
    happens on read).
    """
    out_dir = Path(out_dir)
    by_key: dict[str, np.ndarray] = {}
    dim: int | None = None
    for key, vector in entries:
        key_string = str(key)
        if key_string in by_key:
            raise DuplicateKey(f"duplicate archive key {key_string!r}")
        values = np.asarray(vector, dtype=np.float32)
        if values.ndim != 1:
            raise DimensionMismatch(f"vector for {key_string!r} is not 1-D")
        if dim is None:
            dim = int(values.shape[0])
        elif int(values.shape[0]) != dim:
            raise DimensionMismatch(
                f"vector for {key_string!r} has dim {values.shape[0]}, expected {dim}")
        by_key[key_string] = values
    if dim is None:
        raise ValueError("cannot write an empty archive")
    sorted_keys = sorted(by_key)
    record = dim * 4
    manifest = {
        "dim": dim,
        "dtype": ARCHIVE_DTYPE,
        "entries": {key: index * record for index, key in enumerate(sorted_keys)},
    }
    blob = b"".join(by_key[key].astype("<f4").tobytes() for key in sorted_keys)
    out_dir.mkdir(parents=True, exist_ok=True)
    atomic_write_text(out_dir / MANIFEST_NAME,
                      json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    atomic_write_bytes(out_dir / VECTORS_NAME, blob)


def open_archive(path: Path) -> Archive:
    path = Path(path)
    manifest_path = path / MANIFEST_NAME
    blob_path = path / VECTORS_NAME
    if not manifest_path.exists() or not blob_path.exists():
        raise CorruptArchive(f"archive at {path} is missing {MANIFEST_NAME} or {VECTORS_NAME}")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CorruptArchive(f"manifest is not valid JSON: {exc}") from exc
    if manifest.get("dtype") != ARCHIVE_DTYPE:
        raise CorruptArchive(f"unsupported dtype {manifest.get('dtype')!r}")
    dim = manifest.get("dim")
    if not isinstance(dim, int) or dim < 1:
        raise CorruptArchive(f"bad dimension {dim!r}")
    offsets = manifest.get("entries")
    if not isinstance(offsets, dict):
        raise CorruptArchive("manifest entries must be a mapping")
    record = dim * 4
    expected = [index * record for index in range(len(offsets))]
    actual = [offsets[key] for key in sorted(offsets)]
    if actual != expected:
        raise CorruptArchive("offsets are not increasing whole records over sorted keys")
    blob_size = blob_path.stat().st_size
    if blob_size != len(offsets) * record:
        raise CorruptArchive(
            f"blob holds {blob_size} bytes, expected {len(offsets) * record}")
    vectors = np.memmap(blob_path, dtype="<f4", mode="r")
    return Archive(dim=dim, offsets=dict(offsets), vectors=vectors)


class EmbeddingProvider(Protocol):
    provider_id: str

    def get(self, key: EmbeddingKey | str) -> np.ndarray: ...


class ArchiveProvider:
    def __init__(self, archive: Archive, source: str = ""):
        self.archive = archive
        self.provider_id = f"archive:{source}" if source else "archive"

    @classmethod
    def open(cls, path: Path) -> "ArchiveProvider":
        archive = open_archive(path)
        digest = hashlib.sha256((Path(path) / MANIFEST_NAME).read_bytes()).hexdigest()[:12]
        return cls(archive, source=digest)

    def get(self, key: EmbeddingKey | str) -> np.ndarray:
        return self.archive.get(key)


class MockProvider:
    def __init__(self, dim: int = 64):
        self.dim = dim
        self.provider_id = f"mock:{dim}"

    def get(self, key: EmbeddingKey | str) -> np.ndarray:
        return mock_embed(key, self.dim)


# resolver(key) -> str for text payloads, bytes for image payloads
Resolver = Callable[[EmbeddingKey], "str | bytes"]
EmbedTransport = Callable[[str, dict], tuple[int, str]]


def _embed_transport(url: str, payload: dict) -> tuple[int, str]:
    response = httpx.post(url, json=payload, timeout=120.0)
    return response.status_code, response.text


class RemoteProvider:
    """Calls an embedding service: POST /embed {kind, payload} -> {vector}."""

    def __init__(
        self,
        resolver: Resolver,
        endpoint: str | None = None,
        transport: EmbedTransport | None = None,
        max_inflight: int = 8,
    ):
        self.endpoint = endpoint if endpoint is not None else os.environ.get(ENV_EMB_ENDPOINT)
        if not self.endpoint:
            raise ValueError(f"no embedding endpoint configured (set {ENV_EMB_ENDPOINT})")
        self.resolver = resolver
        self.transport = transport or _embed_transport
        self._gate = threading.Semaphore(max_inflight)
        self.provider_id = "remote"

    def get(self, key: EmbeddingKey | str) -> np.ndarray:
        if isinstance(key, str):
            kind, _, payload = key.partition(":")
            key = EmbeddingKey(kind, payload)
        source = self.resolver(key)
        if isinstance(source, bytes):
            body = {"kind": key.kind, "payload": base64.b64encode(source).decode("ascii")}
        else:
            body = {"kind": key.kind, "payload": source}
        with self._gate:
            status, text = self.transport(self.endpoint, body)
        if status != 200:
            raise HttpError(status, text[:200])
        vector = json.loads(text)["vector"]
        return unit_normalize(np.asarray(vector, dtype=np.float64))
