"""Embedding-bank file format.

Binary layout (all integers little-endian): magic ``INSD``, version u16=1,
dimension u32, count u64, then per record [id length u16, id bytes UTF-8,
gender byte (0 male / 1 female), dimension x float32 LE]. A plain-text
one-record-per-line alternative (``id<TAB>gender<TAB>v1,v2,...``) is
accepted on read for small fixtures; writing always emits binary.

Vectors are float32 at this boundary and float64 everywhere else. Reading
keeps in-tolerance unit vectors bit-for-bit (see ``core.ensure_unit``), so
write -> read -> write reproduces identical bytes.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Iterable, Protocol

import numpy as np

from .core import Gender, SpeakerEmbedding
from .errors import InputError, IoFailure
from .planner import EmbeddingSet

MAGIC = b"INSD"
VERSION = 1

_GENDER_TO_BYTE = {Gender.MALE: 0, Gender.FEMALE: 1}
_BYTE_TO_GENDER = {v: k for k, v in _GENDER_TO_BYTE.items()}

_HEADER = struct.Struct("<4sHIQ")
_ID_LEN = struct.Struct("<H")


class VectorRecord(Protocol):
    id: str
    gender: Gender
    vector: np.ndarray


def write_bank(path, records: Iterable[VectorRecord], dimension: int) -> None:
    """Write records (real or synthetic identities) as a binary bank."""
    records = list(records)
    payload = bytearray()
    payload += _HEADER.pack(MAGIC, VERSION, int(dimension), len(records))
    for rec in records:
        if rec.vector.shape[0] != dimension:
            raise InputError(
                f"record {rec.id!r} has dimension {rec.vector.shape[0]}, bank declares {dimension}"
            )
        id_bytes = rec.id.encode("utf-8")
        if len(id_bytes) > 0xFFFF:
            raise InputError(f"identity id too long to encode: {rec.id[:40]!r}...")
        payload += _ID_LEN.pack(len(id_bytes))
        payload += id_bytes
        payload.append(_GENDER_TO_BYTE[rec.gender])
        payload += np.asarray(rec.vector, dtype="<f4").tobytes()
    _write_bytes(path, bytes(payload))


def read_bank(path) -> EmbeddingSet:
    """Read a bank (binary or text fixture) into an EmbeddingSet."""
    data = _read_bytes(path)
    if data[:4] == MAGIC:
        return _parse_binary(data, path)
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise InputError(f"{path}: neither a binary bank nor UTF-8 text") from exc
    return _parse_text(text, path)


def _parse_binary(data: bytes, path) -> EmbeddingSet:
    if len(data) < _HEADER.size:
        raise InputError(f"{path}: truncated bank header")
    magic, version, dimension, count = _HEADER.unpack_from(data, 0)
    if version != VERSION:
        raise InputError(f"{path}: unsupported bank version {version}")
    offset = _HEADER.size
    records = []
    vector_bytes = 4 * dimension
    for index in range(count):
        if offset + _ID_LEN.size > len(data):
            raise InputError(f"{path}: truncated record {index}")
        (id_len,) = _ID_LEN.unpack_from(data, offset)
        offset += _ID_LEN.size
        end = offset + id_len + 1 + vector_bytes
        if end > len(data):
            raise InputError(f"{path}: truncated record {index}")
        identity = data[offset:offset + id_len].decode("utf-8")
        offset += id_len
        gender_byte = data[offset]
        offset += 1
        if gender_byte not in _BYTE_TO_GENDER:
            raise InputError(f"{path}: record {identity!r} has bad gender byte {gender_byte}")
        vec = np.frombuffer(data, dtype="<f4", count=dimension, offset=offset).astype(np.float64)
        offset += vector_bytes
        records.append(SpeakerEmbedding.from_raw(identity, _BYTE_TO_GENDER[gender_byte], vec))
    if offset != len(data):
        raise InputError(f"{path}: {len(data) - offset} trailing bytes after {count} records")
    return EmbeddingSet(records, dimension=dimension)


def _parse_text(text: str, path) -> EmbeddingSet:
    records = []
    dimension = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise InputError(f"{path}:{lineno}: expected id<TAB>gender<TAB>values")
        identity, gender_label, values = parts
        try:
            gender = Gender(gender_label)
        except ValueError as exc:
            raise InputError(f"{path}:{lineno}: unknown gender {gender_label!r}") from exc
        try:
            vec = np.array([float(v) for v in values.split(",")], dtype=np.float64)
        except ValueError as exc:
            raise InputError(f"{path}:{lineno}: bad vector component") from exc
        if dimension is None:
            dimension = vec.shape[0]
        records.append(SpeakerEmbedding.from_raw(identity, gender, vec))
    if dimension is None:
        raise InputError(f"{path}: no records in text bank")
    return EmbeddingSet(records, dimension=dimension)


# -- filesystem helpers shared across the package ------------------------------

def _write_bytes(path, data: bytes) -> None:
    try:
        Path(path).write_bytes(data)
    except OSError as exc:
        raise IoFailure(path, f"cannot write ({exc.strerror or exc})") from exc


def _read_bytes(path) -> bytes:
    # a missing or unreadable input is bad input, not an output failure
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read {path} ({exc.strerror or exc})") from exc


def _write_text(path, text: str) -> None:
    _write_bytes(path, text.encode("utf-8"))


def _read_text(path) -> str:
    data = _read_bytes(path)
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise InputError(f"{path}: not UTF-8 text") from exc
