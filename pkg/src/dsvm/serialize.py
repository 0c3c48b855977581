"""Versioned binary wire format for trained one-vs-one models.

This is the payload broadcast between sites, so it is platform-independent
by construction: little-endian throughout, IEEE-754 binary64 floats, and a
trailing CRC-32 so corrupted payloads are rejected instead of decoded.

Layout (version 1):
    magic "DSVM" | u32 version
    f64 C | f64 tol | u32 max_passes | u8 kernel kind | f64 gamma
    u32 n_classes | i64 class labels...
    u32 n_features | u32 n_pairs
    per pair: i64 class_a | i64 class_b | u32 n_sv |
              f64 support vectors (n_sv * n_features, row-major) |
              i8 support labels | f64 alphas | f64 bias
    u32 crc32 of everything above
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

from .multiclass import OneVsOneSVC
from .svm import BinarySVC, KERNEL_KINDS

MAGIC = b"DSVM"
FORMAT_VERSION = 1

_KIND_CODE = {kind: code for code, kind in enumerate(KERNEL_KINDS)}
_CODE_KIND = {code: kind for kind, code in _KIND_CODE.items()}


class SerializationError(ValueError):
    """Payload is truncated, corrupt, or of an unsupported version."""


def serialize_model(model: OneVsOneSVC) -> bytes:
    """Encode a fitted one-vs-one model into the broadcast wire format."""
    if not hasattr(model, "pair_models_"):
        raise ValueError("cannot serialize an unfitted model")
    parts = [MAGIC, struct.pack("<I", FORMAT_VERSION)]
    parts.append(
        struct.pack(
            "<ddIBd",
            float(model.C),
            float(model.tol),
            int(model.max_passes),
            _KIND_CODE[model.kernel],
            float(model.gamma),
        )
    )
    classes = np.asarray(model.classes_, dtype="<i8")
    parts.append(struct.pack("<I", classes.size))
    parts.append(classes.tobytes())
    parts.append(struct.pack("<II", int(model.n_features_in_), len(model.pair_models_)))
    for (ca, cb), pair in model.pair_models_.items():
        n_sv = pair.alphas_.shape[0]
        parts.append(struct.pack("<qqI", ca, cb, n_sv))
        parts.append(np.ascontiguousarray(pair.support_vectors_, dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(pair.support_labels_, dtype="<i1").tobytes())
        parts.append(np.ascontiguousarray(pair.alphas_, dtype="<f8").tobytes())
        parts.append(struct.pack("<d", float(pair.intercept_)))
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise SerializationError("truncated model payload")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def array(self, dtype: str, count: int) -> np.ndarray:
        dt = np.dtype(dtype)
        raw = self.take(dt.itemsize * count)
        return np.frombuffer(raw, dtype=dt).copy()


def deserialize_model(data: bytes) -> OneVsOneSVC:
    """Decode a broadcast payload back into a fitted one-vs-one model."""
    if len(data) < len(MAGIC) + 8:
        raise SerializationError("payload too short to be a model file")
    body, trailer = data[:-4], data[-4:]
    if struct.unpack("<I", trailer)[0] != zlib.crc32(body):
        raise SerializationError("corrupt model payload: checksum mismatch")
    reader = _Reader(body)
    if reader.take(len(MAGIC)) != MAGIC:
        raise SerializationError("bad magic bytes: not a model file")
    (version,) = reader.unpack("<I")
    if version != FORMAT_VERSION:
        raise SerializationError(
            f"unsupported model format version {version} (expected {FORMAT_VERSION})"
        )
    c, tol, max_passes, kind_code, gamma = reader.unpack("<ddIBd")
    if kind_code not in _CODE_KIND:
        raise SerializationError(f"unknown kernel code {kind_code}")
    kernel = _CODE_KIND[kind_code]

    (n_classes,) = reader.unpack("<I")
    classes = reader.array("<i8", n_classes)
    n_features, n_pairs = reader.unpack("<II")

    model = OneVsOneSVC(C=c, kernel=kernel, gamma=gamma, tol=tol, max_passes=max_passes)
    pair_models = {}
    for _ in range(n_pairs):
        ca, cb, n_sv = reader.unpack("<qqI")
        sv = reader.array("<f8", n_sv * n_features).reshape(n_sv, n_features)
        labels = reader.array("<i1", n_sv).astype(np.int64)
        alphas = reader.array("<f8", n_sv)
        (bias,) = reader.unpack("<d")
        pair = BinarySVC(C=c, kernel=kernel, gamma=gamma, tol=tol, max_passes=max_passes)
        pair.support_vectors_ = sv
        pair.support_labels_ = labels
        pair.alphas_ = alphas
        pair.intercept_ = bias
        pair.classes_ = np.array([-1, 1])
        pair.n_features_in_ = n_features
        pair_models[(int(ca), int(cb))] = pair
    if reader.pos != len(body):
        raise SerializationError("trailing bytes after model payload")

    model.classes_ = classes
    model.pair_models_ = pair_models
    model.n_features_in_ = n_features
    return model
