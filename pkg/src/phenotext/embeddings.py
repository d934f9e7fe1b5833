"""Portable binary container for per-note embedding vectors (PHEB1).

Layout, all integers little-endian:

    magic   5 bytes  b"PHEB1"
    version u8       0x01
    mode    u8       0 = averaged (one vector per note), 1 = per_chunk
    count   u32      number of records
    dim     u32      vector width
    record  repeated count times:
        id_len  u16
        id      id_len bytes of UTF-8
        [per_chunk only] chunk_count u16
        data    (chunk_count or 1) * dim float32

Gold labels never travel inside the binary; they ride in a JSONL sidecar of
``{"id": ..., "label": ...}`` lines keyed by note id.  Read errors report the
byte offset at which decoding failed, and trailing bytes after the declared
record count are an error rather than silently ignored.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass

import numpy as np

from .errors import DataError

MAGIC = b"PHEB1"
VERSION = 1
MODE_AVERAGED = 0
MODE_PER_CHUNK = 1
_MODE_NAMES = {MODE_AVERAGED: "averaged", MODE_PER_CHUNK: "per_chunk"}
_MODE_CODES = {v: k for k, v in _MODE_NAMES.items()}


@dataclass
class EmbeddingSet:
    mode: str  # "averaged" | "per_chunk"
    dim: int
    ids: list[str]
    vectors: list[np.ndarray]  # averaged: (dim,); per_chunk: (chunks, dim)

    def __post_init__(self):
        if self.mode not in _MODE_CODES:
            raise DataError(f"unknown embedding mode {self.mode!r}")
        if self.dim < 1:
            raise DataError("embedding dim must be >= 1")
        if len(self.ids) != len(self.vectors):
            raise DataError("ids and vectors differ in length")
        if len(set(self.ids)) != len(self.ids):
            raise DataError("duplicate note ids in embedding set")
        checked = []
        for note_id, vec in zip(self.ids, self.vectors):
            arr = np.asarray(vec, dtype=np.float32)
            want_ndim = 1 if self.mode == "averaged" else 2
            if arr.ndim != want_ndim or arr.shape[-1] != self.dim:
                raise DataError(
                    f"record {note_id!r}: expected {want_ndim}-d vectors of "
                    f"width {self.dim}, got shape {arr.shape}"
                )
            if self.mode == "per_chunk" and arr.shape[0] < 1:
                raise DataError(f"record {note_id!r} has zero chunks")
            if not np.all(np.isfinite(arr)):
                raise DataError(f"record {note_id!r} contains non-finite values")
            checked.append(arr)
        self.vectors = checked

    def __len__(self) -> int:
        return len(self.ids)


def write_pheb(es: EmbeddingSet, path) -> None:
    mode_code = _MODE_CODES[es.mode]
    parts = [MAGIC, struct.pack("<BB", VERSION, mode_code),
             struct.pack("<II", len(es), es.dim)]
    for note_id, vec in zip(es.ids, es.vectors):
        id_bytes = note_id.encode("utf-8")
        if len(id_bytes) > 0xFFFF:
            raise DataError(f"note id longer than 65535 bytes: {note_id[:40]!r}...")
        parts.append(struct.pack("<H", len(id_bytes)))
        parts.append(id_bytes)
        if es.mode == "per_chunk":
            if vec.shape[0] > 0xFFFF:
                raise DataError(f"record {note_id!r} has more than 65535 chunks")
            parts.append(struct.pack("<H", vec.shape[0]))
        parts.append(np.ascontiguousarray(vec, dtype="<f4").tobytes())
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(b"".join(parts))
    os.replace(tmp, path)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.buf):
            raise DataError(
                f"truncated file: wanted {n} bytes for {what} at offset "
                f"{self.pos}, have {len(self.buf) - self.pos}"
            )
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def u8(self, what: str) -> int:
        return self.take(1, what)[0]

    def u16(self, what: str) -> int:
        return struct.unpack("<H", self.take(2, what))[0]

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]


def read_pheb(path) -> EmbeddingSet:
    with open(path, "rb") as fh:
        buf = fh.read()
    r = _Reader(buf)
    magic = r.take(len(MAGIC), "magic")
    if magic != MAGIC:
        raise DataError(f"bad magic {magic!r} at offset 0; not a PHEB1 file")
    version = r.u8("version")
    if version != VERSION:
        raise DataError(f"unsupported version {version} at offset {r.pos - 1}")
    mode_code = r.u8("mode")
    if mode_code not in _MODE_NAMES:
        raise DataError(f"unknown mode byte {mode_code} at offset {r.pos - 1}")
    mode = _MODE_NAMES[mode_code]
    count = r.u32("record count")
    dim = r.u32("dim")
    if dim < 1:
        raise DataError(f"dim must be >= 1 (offset {r.pos - 4})")
    ids: list[str] = []
    vectors: list[np.ndarray] = []
    for rec in range(count):
        id_len = r.u16(f"id length of record {rec}")
        id_start = r.pos
        try:
            note_id = r.take(id_len, f"id of record {rec}").decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DataError(
                f"record {rec}: id is not valid UTF-8 at offset {id_start}: {exc}"
            ) from exc
        chunks = 1
        if mode == "per_chunk":
            chunks = r.u16(f"chunk count of record {rec}")
            if chunks < 1:
                raise DataError(
                    f"record {rec} ({note_id!r}) has zero chunks at offset {r.pos - 2}"
                )
        data = r.take(chunks * dim * 4, f"vectors of record {rec}")
        arr = np.frombuffer(data, dtype="<f4").astype(np.float32)
        vectors.append(arr.reshape(chunks, dim) if mode == "per_chunk" else arr)
        ids.append(note_id)
    if r.pos != len(buf):
        raise DataError(
            f"{len(buf) - r.pos} trailing bytes after the last record "
            f"(offset {r.pos})"
        )
    return EmbeddingSet(mode=mode, dim=dim, ids=ids, vectors=vectors)


def average_chunks(es: EmbeddingSet) -> EmbeddingSet:
    """Collapse a per-chunk set to averaged mode (mean over the chunk axis).

    Averaging runs in float64 and rounds once at the end, so chunk order
    cannot perturb the stored float32 result.
    """
    if es.mode == "averaged":
        return es
    means = [v.astype(np.float64).mean(axis=0).astype(np.float32) for v in es.vectors]
    return EmbeddingSet(mode="averaged", dim=es.dim, ids=list(es.ids), vectors=means)


# ---------------------------------------------------------------------------
# Label sidecars


def write_labels_jsonl(ids, labels, path) -> None:
    if len(ids) != len(labels):
        raise DataError("ids and labels differ in length")
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        for note_id, label in zip(ids, labels):
            fh.write(json.dumps({"id": note_id, "label": label}) + "\n")
    os.replace(tmp, path)


def read_labels_jsonl(path) -> dict[str, str]:
    out: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}: line {lineno}: invalid JSON: {exc}") from exc
            if not isinstance(rec, dict) or "id" not in rec or "label" not in rec:
                raise DataError(f"{path}: line {lineno}: need id and label keys")
            if rec["id"] in out:
                raise DataError(f"{path}: line {lineno}: duplicate id {rec['id']!r}")
            out[str(rec["id"])] = str(rec["label"])
    return out


# ---------------------------------------------------------------------------
# Synthetic embeddings (for exercising the recurrent baseline end to end)


def synth_embeddings(n: int, dim: int, n_classes: int = 2, mode: str = "averaged",
                     seed: int = 0, max_chunks: int = 4, separation: float = 4.0):
    """Well-separated Gaussian class clusters; returns (set, class indices).

    Class centers sit on distinct seeded random directions scaled by
    ``separation``; unit noise keeps clusters compact relative to the gaps,
    so even a weak learner should recover the classes.
    """
    if n < n_classes:
        raise DataError("need at least one example per class")
    rng = np.random.default_rng(seed)
    centers = rng.standard_normal((n_classes, dim))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    centers *= separation
    labels = np.arange(n) % n_classes
    rng.shuffle(labels)
    ids = [f"synth-{i:05d}" for i in range(n)]
    vectors = []
    for i in range(n):
        if mode == "averaged":
            vec = centers[labels[i]] + rng.standard_normal(dim)
            vectors.append(vec.astype(np.float32))
        else:
            chunks = int(rng.integers(1, max_chunks + 1))
            vec = centers[labels[i]] + rng.standard_normal((chunks, dim))
            vectors.append(vec.astype(np.float32))
    es = EmbeddingSet(mode=mode, dim=dim, ids=ids, vectors=vectors)
    return es, labels
