"""Scoring user histories against a trained model, top-K selection, and the
model binary format.

Scores are a weighted sum of the history items' rows of the weight matrix
(row gather, O(history * catalog)), never a full dense matrix-vector
product over all rows.
"""

from __future__ import annotations

import json
import struct
from collections import Counter
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .solver import Model

MODEL_MAGIC = b"TALEB1"
_DTYPE_FLAGS = {0: np.float64, 1: np.float32}


class ModelFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Query:
    """A user history of (item index, timestamp), oldest first."""

    history: tuple[tuple[int, int], ...]
    exclude_seen: bool = True


class InputVector(NamedTuple):
    """Sparse length-n row vector: weights summed per distinct item."""

    indices: np.ndarray
    values: np.ndarray
    size: int

    def toarray(self) -> np.ndarray:
        dense = np.zeros(self.size)
        dense[self.indices] = self.values
        return dense


def build_input_vector(
    items,
    weights: np.ndarray,
    num_items: int,
    counters: Counter | None = None,
) -> InputVector:
    """Sum per-position weights into one value per distinct item. Item
    indices outside the catalog are skipped (tallied in ``counters``)."""
    items = np.asarray(items, dtype=np.int64)
    weights = np.asarray(weights, dtype=np.float64)
    if items.shape != weights.shape:
        raise ValueError("history and weight lengths differ")
    ok = (items >= 0) & (items < num_items)
    if not ok.all():
        if counters is not None:
            counters["unknown_item_skipped"] += int((~ok).sum())
        items, weights = items[ok], weights[ok]
    if len(items) == 0:
        return InputVector(items, weights, num_items)
    uniq, inverse = np.unique(items, return_inverse=True)
    summed = np.zeros(len(uniq))
    np.add.at(summed, inverse, weights)
    return InputVector(uniq, summed, num_items)


def score(x: InputVector, model: Model) -> np.ndarray:
    """Prediction scores for every item: the weighted sum of the history
    items' rows of the weight matrix."""
    if x.size != model.num_items:
        raise ValueError("input vector length does not match model catalog")
    if len(x.indices) == 0:
        return np.zeros(model.num_items)
    return x.values @ model.matrix[x.indices]


def topk(
    scores: np.ndarray, k: int, mask: set[int] | np.ndarray | None = None
) -> list[tuple[int, float]]:
    """K highest-scoring unmasked items; ties broken by ascending item
    index. Returns fewer than K entries if the catalog runs out."""
    if k < 1:
        raise ValueError("k must be >= 1")
    n = len(scores)
    allowed = np.ones(n, dtype=bool)
    if mask is not None:
        mask_idx = np.fromiter(mask, dtype=np.int64) if isinstance(mask, set) else mask
        if len(mask_idx):
            allowed[np.asarray(mask_idx, dtype=np.int64)] = False
    candidates = np.flatnonzero(allowed)
    order = np.lexsort((candidates, -scores[candidates]))
    chosen = candidates[order[:k]]
    return [(int(j), float(scores[j])) for j in chosen]


# --- model binary format ----------------------------------------------------
# magic "TALEB1", u8 dtype flag (0 = f64, 1 = f32), u32 n, item vocab as
# length-prefixed UTF-8, row-major little-endian matrix, u32-length-prefixed
# JSON config snapshot.


def save_model(model: Model, path, dtype: str = "f64") -> None:
    if dtype not in ("f64", "f32"):
        raise ValueError("dtype must be f64 or f32")
    flag = 0 if dtype == "f64" else 1
    le_dtype = "<f8" if flag == 0 else "<f4"
    config_blob = json.dumps(model.config, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<BI", flag, model.num_items))
        for entry in model.item_vocab:
            data = entry.encode("utf-8")
            fh.write(struct.pack("<I", len(data)))
            fh.write(data)
        fh.write(np.ascontiguousarray(model.matrix, dtype=le_dtype).tobytes())
        fh.write(struct.pack("<I", len(config_blob)))
        fh.write(config_blob)


def load_model(path) -> Model:
    with open(path, "rb") as fh:
        magic = fh.read(len(MODEL_MAGIC))
        if magic != MODEL_MAGIC:
            raise ModelFormatError(f"{path}: bad model magic {magic!r}")
        try:
            flag, n = struct.unpack("<BI", fh.read(5))
            if flag not in _DTYPE_FLAGS:
                raise ModelFormatError(f"{path}: unknown dtype flag {flag}")
            vocab = []
            for _ in range(n):
                (length,) = struct.unpack("<I", fh.read(4))
                vocab.append(fh.read(length).decode("utf-8"))
            dtype = np.dtype(_DTYPE_FLAGS[flag]).newbyteorder("<")
            raw = fh.read(n * n * dtype.itemsize)
            if len(raw) != n * n * dtype.itemsize:
                raise ModelFormatError(f"{path}: truncated matrix payload")
            matrix = np.frombuffer(raw, dtype=dtype).reshape(n, n).astype(
                _DTYPE_FLAGS[flag]
            )
            (config_len,) = struct.unpack("<I", fh.read(4))
            config_blob = fh.read(config_len)
            if len(config_blob) != config_len:
                raise ModelFormatError(f"{path}: truncated config payload")
        except struct.error as exc:
            raise ModelFormatError(f"{path}: truncated model file") from exc
    config = json.loads(config_blob.decode("utf-8")) if config_len else {}
    return Model(matrix=matrix, item_vocab=vocab, config=config)
