"""Sub-sequence augmentation and weighted sparse matrix assembly.

Each training sequence of length L expands into L-1 (source, target) rows:
single-target mode pairs every prefix with the item right after it, while
multi-target mode pairs every prefix with all remaining items. Assembly turns
the rows into coordinate-form source/target matrices, one row per pair, with
per-entry weights supplied by caller-provided weight functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, NamedTuple, Sequence

import numpy as np
import scipy.sparse as sp

from .dataio import InteractionLog


class AssemblyError(ValueError):
    """A weight function produced a non-finite value."""


class SeqEntry(NamedTuple):
    item: int
    t: int
    position: int  # 1-based position in the full sequence


@dataclass(frozen=True)
class AugmentedPair:
    """One training row: a source prefix plus its target item(s)."""

    user: int
    source: tuple[SeqEntry, ...]
    targets: tuple[SeqEntry, ...]


@dataclass(frozen=True)
class SparseMatrix:
    """Coordinate-form matrix with canonical (row, col)-sorted entries.

    Duplicate coordinates are summed at construction in a fixed order
    (stable lexsort, then left-to-right segment sums), so identical inputs
    give bitwise-identical values.
    """

    num_rows: int
    num_cols: int
    row_idx: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray

    @classmethod
    def from_entries(cls, num_rows, num_cols, rows, cols, vals) -> "SparseMatrix":
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.float64)
        if len(rows) == 0:
            return cls(num_rows, num_cols, rows, cols, vals)
        order = np.lexsort((cols, rows))
        rows, cols, vals = rows[order], cols[order], vals[order]
        boundary = np.empty(len(rows), dtype=bool)
        boundary[0] = True
        boundary[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
        starts = np.flatnonzero(boundary)
        summed = np.add.reduceat(vals, starts)
        return cls(num_rows, num_cols, rows[starts], cols[starts], summed)

    @property
    def nnz(self) -> int:
        return len(self.values)

    def toarray(self) -> np.ndarray:
        dense = np.zeros((self.num_rows, self.num_cols))
        np.add.at(dense, (self.row_idx, self.col_idx), self.values)
        return dense

    def tocsr(self) -> sp.csr_matrix:
        return sp.csr_matrix(
            (self.values, (self.row_idx, self.col_idx)),
            shape=(self.num_rows, self.num_cols),
        )

    def scaled(self, factor: float) -> "SparseMatrix":
        return SparseMatrix(
            self.num_rows, self.num_cols, self.row_idx, self.col_idx, self.values * factor
        )


def single_target_augment(
    sequence: Sequence[tuple[int, int]], user: int = 0
) -> list[AugmentedPair]:
    """Pair every prefix with its immediately next item.

    A length-L sequence of (item, t) yields L-1 pairs; the k-th pair has the
    first k items as source and item k+1 as the sole target. Sequences
    shorter than 2 yield an empty list.
    """
    entries = [SeqEntry(item, t, pos) for pos, (item, t) in enumerate(sequence, start=1)]
    return [
        AugmentedPair(user, tuple(entries[:k]), (entries[k],))
        for k in range(1, len(entries))
    ]


def multi_target_augment(
    sequence: Sequence[tuple[int, int]], user: int = 0
) -> list[AugmentedPair]:
    """Pair every prefix with all items after it (disjoint split per row)."""
    entries = [SeqEntry(item, t, pos) for pos, (item, t) in enumerate(sequence, start=1)]
    return [
        AugmentedPair(user, tuple(entries[:k]), tuple(entries[k:]))
        for k in range(1, len(entries))
    ]


def augment_log(log: InteractionLog, mode: str) -> list[AugmentedPair]:
    """Expand every user sequence in index order; mode is single|multi."""
    if mode not in ("single", "multi"):
        raise ValueError(f"unknown augmentation mode {mode!r}")
    fn = single_target_augment if mode == "single" else multi_target_augment
    pairs: list[AugmentedPair] = []
    for u, items, times in log.sequences():
        pairs.extend(fn(list(zip(items.tolist(), times.tolist())), user=u))
    return pairs


Weigher = Callable[[AugmentedPair, SeqEntry], float]


def unit_weight(pair: AugmentedPair, entry: SeqEntry) -> float:
    return 1.0


def assemble_matrices(
    pairs: Iterable[AugmentedPair],
    num_items: int,
    source_weigher: Weigher = unit_weight,
    target_weigher: Weigher = unit_weight,
) -> tuple[SparseMatrix, SparseMatrix]:
    """Build the weighted source and target matrices, one row per pair.

    Repeated (row, col) coordinates (an item occurring twice in a prefix)
    sum their weights. Raises AssemblyError if a weigher returns a
    non-finite value.
    """
    s_rows, s_cols, s_vals = [], [], []
    t_rows, t_cols, t_vals = [], [], []
    row = -1
    for row, pair in enumerate(pairs):
        for entry in pair.source:
            w = source_weigher(pair, entry)
            if not math.isfinite(w):
                raise AssemblyError(
                    f"non-finite source weight {w!r} for user {pair.user}, "
                    f"row {row}, item {entry.item} at position {entry.position}"
                )
            s_rows.append(row)
            s_cols.append(entry.item)
            s_vals.append(w)
        for entry in pair.targets:
            w = target_weigher(pair, entry)
            if not math.isfinite(w):
                raise AssemblyError(
                    f"non-finite target weight {w!r} for user {pair.user}, "
                    f"row {row}, item {entry.item} at position {entry.position}"
                )
            t_rows.append(row)
            t_cols.append(entry.item)
            t_vals.append(w)
    num_rows = row + 1
    sources = SparseMatrix.from_entries(num_rows, num_items, s_rows, s_cols, s_vals)
    targets = SparseMatrix.from_entries(num_rows, num_items, t_rows, t_cols, t_vals)
    return sources, targets
