"""Interaction file parsing, k-core filtering, and leave-one-out splits.

Interactions are (user, item, timestamp) triples with string ids mapped to
contiguous integer indices. Each user's interactions are kept sorted by
(timestamp, original file order), exact duplicate triples are dropped, and
repeated items at different times are kept.
"""

from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass, field

import numpy as np

from .timeutil import SECONDS_PER_DAY

logger = logging.getLogger(__name__)

SPLIT_MAGIC = b"TALEDS1"


class ParseError(ValueError):
    """Malformed input line (message carries the 1-based line number)."""


@dataclass(frozen=True)
class ColumnFormat:
    """Column mapping for delimited interaction files.

    Extra columns (ratings etc.) are ignored; only the three mapped columns
    are read. ``delimiter`` may be multi-character (e.g. "::").
    """

    delimiter: str = "\t"
    user_col: int = 0
    item_col: int = 1
    time_col: int = 2
    has_header: bool = False


@dataclass
class InteractionLog:
    """Indexed interaction set.

    ``users``/``items``/``times`` are parallel arrays ordered by user index,
    then (timestamp, original file order) within each user. ``user_ptr``
    marks each user's slice CSR-style: user u owns [user_ptr[u], user_ptr[u+1]).

    Freshly indexed logs (from load_interactions / kcore_filter) have every
    index present in at least one interaction; the train part of a split
    reuses its parent's vocabulary, so held-out-only items may have zero
    train interactions there.
    """

    num_users: int
    num_items: int
    users: np.ndarray  # int32
    items: np.ndarray  # int32
    times: np.ndarray  # int64
    user_vocab: list[str]
    item_vocab: list[str]
    user_index: dict[str, int] = field(repr=False, default_factory=dict)
    item_index: dict[str, int] = field(repr=False, default_factory=dict)
    user_ptr: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if not self.user_index:
            self.user_index = {u: i for i, u in enumerate(self.user_vocab)}
        if not self.item_index:
            self.item_index = {s: i for i, s in enumerate(self.item_vocab)}
        if self.user_ptr is None:
            counts = np.bincount(self.users, minlength=self.num_users)
            self.user_ptr = np.concatenate(([0], np.cumsum(counts)))

    @property
    def num_interactions(self) -> int:
        return len(self.users)

    def user_slice(self, user: int) -> tuple[np.ndarray, np.ndarray]:
        """(items, times) of one user, chronological."""
        lo, hi = self.user_ptr[user], self.user_ptr[user + 1]
        return self.items[lo:hi], self.times[lo:hi]

    def sequences(self):
        """Yield (user, items, times) for every user with >=1 interaction."""
        for u in range(self.num_users):
            items, times = self.user_slice(u)
            if len(items):
                yield u, items, times


@dataclass
class SplitDataset:
    """Leave-one-out split: per eligible user the last interaction is test,
    the second-to-last is validation, the rest (in order) stay in train."""

    train: InteractionLog
    valid: dict[int, tuple[int, int]]  # user -> (item, t)
    test: dict[int, tuple[int, int]]


@dataclass
class StatsRecord:
    users: int
    items: int
    interactions: int
    density: float
    avg_seq_len: float
    avg_interval_days: float

    def to_dict(self) -> dict:
        return {
            "users": self.users,
            "items": self.items,
            "interactions": self.interactions,
            "density": self.density,
            "avg_seq_len": self.avg_seq_len,
            "avg_interval_days": self.avg_interval_days,
        }


def _canonical_order(users, items, times):
    """Sort by (user, time, original order); np.lexsort is stable so the
    arrival index never needs to be materialized."""
    order = np.lexsort((times, users))
    return users[order], items[order], times[order]


def _from_indexed(users, items, times, user_vocab, item_vocab) -> InteractionLog:
    users = np.asarray(users, dtype=np.int32)
    items = np.asarray(items, dtype=np.int32)
    times = np.asarray(times, dtype=np.int64)
    users, items, times = _canonical_order(users, items, times)
    return InteractionLog(
        num_users=len(user_vocab),
        num_items=len(item_vocab),
        users=users,
        items=items,
        times=times,
        user_vocab=list(user_vocab),
        item_vocab=list(item_vocab),
    )


def from_records(records, user_vocab=None, item_vocab=None) -> InteractionLog:
    """Build a log from (user_id, item_id, t) string-id records.

    Vocabularies default to first-appearance order; pass them explicitly to
    pin an id space (synthetic generators do).
    """
    if user_vocab is None or item_vocab is None:
        u_vocab, i_vocab = [], []
        u_seen, i_seen = {}, {}
        for u, i, _ in records:
            if u not in u_seen:
                u_seen[u] = len(u_vocab)
                u_vocab.append(u)
            if i not in i_seen:
                i_seen[i] = len(i_vocab)
                i_vocab.append(i)
        user_vocab = user_vocab or u_vocab
        item_vocab = item_vocab or i_vocab
    u_index = {u: k for k, u in enumerate(user_vocab)}
    i_index = {s: k for k, s in enumerate(item_vocab)}
    users = [u_index[u] for u, _, _ in records]
    items = [i_index[i] for _, i, _ in records]
    times = [t for _, _, t in records]
    users, items, times = _dedup_triples(
        np.asarray(users, np.int32), np.asarray(items, np.int32), np.asarray(times, np.int64)
    )
    return _from_indexed(users, items, times, user_vocab, item_vocab)


def _dedup_triples(users, items, times):
    """Drop exact duplicate (user, item, t) triples, keeping one."""
    if len(users) == 0:
        return users, items, times
    key = np.stack([users.astype(np.int64), items.astype(np.int64), times], axis=1)
    _, keep = np.unique(key, axis=0, return_index=True)
    keep.sort()
    return users[keep], items[keep], times[keep]


def load_interactions(
    path,
    fmt: ColumnFormat = ColumnFormat(),
    min_ts: int | None = None,
    max_ts: int | None = None,
) -> InteractionLog:
    """Parse a delimited interaction file into an indexed log.

    Applies the optional [min_ts, max_ts) timestamp window before indexing.
    Raises ParseError with the offending line number on malformed input.
    """
    raw_users, raw_items, times = [], [], []
    needed = max(fmt.user_col, fmt.item_col, fmt.time_col) + 1
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if fmt.has_header and lineno == 1:
                continue
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split(fmt.delimiter)
            if len(parts) < needed:
                raise ParseError(
                    f"{path}:{lineno}: expected >= {needed} columns "
                    f"with delimiter {fmt.delimiter!r}, got {len(parts)}"
                )
            try:
                t = int(float(parts[fmt.time_col]))
            except ValueError as exc:
                raise ParseError(
                    f"{path}:{lineno}: non-numeric timestamp {parts[fmt.time_col]!r}"
                ) from exc
            if t < 0:
                raise ParseError(f"{path}:{lineno}: negative timestamp {t}")
            if min_ts is not None and t < min_ts:
                continue
            if max_ts is not None and t >= max_ts:
                continue
            raw_users.append(parts[fmt.user_col])
            raw_items.append(parts[fmt.item_col])
            times.append(t)
    return from_records(list(zip(raw_users, raw_items, times)))


def kcore_filter(log: InteractionLog, k: int) -> InteractionLog:
    """Iteratively remove users then items with < k interactions until no
    removal occurs; reindexes vocabularies contiguously (survivor order)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    users, items, times = log.users, log.items, log.times
    while True:
        if len(users) == 0:
            return _from_indexed([], [], [], [], [])
        ucount = np.bincount(users, minlength=log.num_users)
        keep = ucount[users] >= k
        changed = not keep.all()
        users, items, times = users[keep], items[keep], times[keep]
        icount = np.bincount(items, minlength=log.num_items)
        keep = icount[items] >= k
        changed = changed or not keep.all()
        users, items, times = users[keep], items[keep], times[keep]
        if not changed:
            break
    surv_users = np.unique(users)
    surv_items = np.unique(items)
    umap = np.full(log.num_users, -1, dtype=np.int32)
    umap[surv_users] = np.arange(len(surv_users), dtype=np.int32)
    imap = np.full(log.num_items, -1, dtype=np.int32)
    imap[surv_items] = np.arange(len(surv_items), dtype=np.int32)
    return _from_indexed(
        umap[users],
        imap[items],
        times,
        [log.user_vocab[u] for u in surv_users],
        [log.item_vocab[i] for i in surv_items],
    )


def leave_one_out_split(log: InteractionLog) -> SplitDataset:
    """Hold out each user's last interaction as test and the second-to-last
    as validation. Users with fewer than 3 interactions keep everything in
    train and are excluded from valid/test (with a warning)."""
    keep = np.ones(log.num_interactions, dtype=bool)
    valid: dict[int, tuple[int, int]] = {}
    test: dict[int, tuple[int, int]] = {}
    short_users = 0
    for u in range(log.num_users):
        lo, hi = int(log.user_ptr[u]), int(log.user_ptr[u + 1])
        if hi - lo < 3:
            if hi > lo:
                short_users += 1
            continue
        test[u] = (int(log.items[hi - 1]), int(log.times[hi - 1]))
        valid[u] = (int(log.items[hi - 2]), int(log.times[hi - 2]))
        keep[hi - 2] = False
        keep[hi - 1] = False
    if short_users:
        logger.warning(
            "%d user(s) with <3 interactions kept in train only", short_users
        )
    train = InteractionLog(
        num_users=log.num_users,
        num_items=log.num_items,
        users=log.users[keep],
        items=log.items[keep],
        times=log.times[keep],
        user_vocab=list(log.user_vocab),
        item_vocab=list(log.item_vocab),
        user_index=dict(log.user_index),
        item_index=dict(log.item_index),
    )
    return SplitDataset(train=train, valid=valid, test=test)


def dataset_stats(log: InteractionLog) -> StatsRecord:
    """Users, items, interactions, density, mean sequence length, and the
    mean consecutive within-user interval in days."""
    m, n, total = log.num_users, log.num_items, log.num_interactions
    density = total / (m * n) if m and n else 0.0
    avg_len = total / m if m else 0.0
    gap_sum = 0.0
    gap_cnt = 0
    for _, _, times in log.sequences():
        if len(times) >= 2:
            d = np.diff(times)
            gap_sum += float(d.sum())
            gap_cnt += len(d)
    avg_interval = (gap_sum / gap_cnt) / SECONDS_PER_DAY if gap_cnt else 0.0
    return StatsRecord(m, n, total, density, avg_len, avg_interval)


# --- canonical binary split file -------------------------------------------
# magic "TALEDS1", little-endian u32 counts, vocab tables as length-prefixed
# UTF-8, interaction triples as (u32 user, u32 item, i64 t).


def _write_vocab(fh, vocab):
    for entry in vocab:
        data = entry.encode("utf-8")
        fh.write(struct.pack("<I", len(data)))
        fh.write(data)


def _read_vocab(fh, count):
    vocab = []
    for _ in range(count):
        (length,) = struct.unpack("<I", fh.read(4))
        vocab.append(fh.read(length).decode("utf-8"))
    return vocab


def _write_triples(fh, triples):
    fh.write(struct.pack("<I", len(triples)))
    for u, i, t in triples:
        fh.write(struct.pack("<IIq", u, i, t))


def _read_triples(fh):
    (count,) = struct.unpack("<I", fh.read(4))
    out = []
    for _ in range(count):
        out.append(struct.unpack("<IIq", fh.read(16)))
    return out


def save_split(split: SplitDataset, path) -> None:
    train = split.train
    with open(path, "wb") as fh:
        fh.write(SPLIT_MAGIC)
        fh.write(struct.pack("<II", train.num_users, train.num_items))
        _write_vocab(fh, train.user_vocab)
        _write_vocab(fh, train.item_vocab)
        _write_triples(
            fh, zip(train.users.tolist(), train.items.tolist(), train.times.tolist())
        )
        _write_triples(fh, [(u, i, t) for u, (i, t) in sorted(split.valid.items())])
        _write_triples(fh, [(u, i, t) for u, (i, t) in sorted(split.test.items())])


def load_split(path) -> SplitDataset:
    with open(path, "rb") as fh:
        magic = fh.read(len(SPLIT_MAGIC))
        if magic != SPLIT_MAGIC:
            raise ParseError(f"{path}: bad split file magic {magic!r}")
        try:
            m, n = struct.unpack("<II", fh.read(8))
            user_vocab = _read_vocab(fh, m)
            item_vocab = _read_vocab(fh, n)
            train_triples = _read_triples(fh)
            valid_triples = _read_triples(fh)
            test_triples = _read_triples(fh)
        except struct.error as exc:
            raise ParseError(f"{path}: truncated split file") from exc
    users = np.array([u for u, _, _ in train_triples], dtype=np.int32)
    items = np.array([i for _, i, _ in train_triples], dtype=np.int32)
    times = np.array([t for _, _, t in train_triples], dtype=np.int64)
    train = InteractionLog(
        num_users=m,
        num_items=n,
        users=users,
        items=items,
        times=times,
        user_vocab=user_vocab,
        item_vocab=item_vocab,
    )
    valid = {u: (i, t) for u, i, t in valid_triples}
    test = {u: (i, t) for u, i, t in test_triples}
    return SplitDataset(train=train, valid=valid, test=test)


def save_stats(stats: StatsRecord, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(stats.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
