"""Brute-force references for the test suite: naive least squares via an
explicit dense inverse, exhaustive pair counting, and a seeded synthetic
sequence generator with planted transition structure and preference drift.

Nothing here is used by production paths, and no numeric code is shared
with the solver (generic inverse vs SPD factorization, triple loops vs
sparse products).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataio import InteractionLog, from_records
from .timeutil import SECONDS_PER_DAY


def lsq_oracle(sources: np.ndarray, targets: np.ndarray, lam: float) -> np.ndarray:
    """Ridge solution through explicit normal equations and a generic dense
    inverse. Test scale only (catalog <= 64)."""
    sources = np.asarray(sources, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    n = sources.shape[1]
    if n > 64:
        raise ValueError("oracle is restricted to test-scale systems (n <= 64)")
    if targets.shape[0] != sources.shape[0]:
        raise ValueError("row count mismatch between source and target matrices")
    gram = sources.T @ sources + lam * np.eye(n)
    try:
        inv = np.linalg.inv(gram)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            "singular normal equations; use lambda > 0"
        ) from exc
    return inv @ (sources.T @ targets)


def pair_count_oracle(
    sequences: list[list[int]], mode: str, num_items: int
) -> np.ndarray:
    """Exhaustive (s, h) pair counting over all sequences, s < h.

    single: each ordered pair adds 1 at (i_s, i_h).
    multi:  each ordered pair adds its position gap (h - s).
    """
    if mode not in ("single", "multi"):
        raise ValueError(f"unknown mode {mode!r}")
    counts = np.zeros((num_items, num_items), dtype=np.int64)
    for seq in sequences:
        length = len(seq)
        for s in range(length):
            for h in range(s + 1, length):
                counts[seq[s], seq[h]] += 1 if mode == "single" else (h - s)
    return counts


@dataclass(frozen=True)
class SyntheticSpec:
    """Seeded generator spec: row-stochastic item transition matrix, uniform
    gap range in days, and a drift rate that grows with the gap (on drift
    the next item is resampled uniformly)."""

    num_users: int
    num_items: int
    transition: np.ndarray
    seq_len_range: tuple[int, int] = (5, 12)
    gap_days_range: tuple[float, float] = (0.1, 5.0)
    drift_base: float = 0.0
    drift_per_day: float = 0.0
    seed: int = 0

    def __post_init__(self):
        trans = np.asarray(self.transition, dtype=np.float64)
        if trans.shape != (self.num_items, self.num_items):
            raise ValueError("transition matrix shape must be (num_items, num_items)")
        if not np.allclose(trans.sum(axis=1), 1.0, atol=1e-9):
            raise ValueError("transition rows must sum to 1 within 1e-9")
        object.__setattr__(self, "transition", trans)

    def drift_rate(self, gap_days: float) -> float:
        return min(1.0, self.drift_base + self.drift_per_day * gap_days)


def generate_synthetic(spec: SyntheticSpec) -> InteractionLog:
    """Sample item chains per user; the seed fully determines the output.

    The full catalog i0..i{n-1} is kept in the vocabulary even if some item
    is never sampled, so indices match the spec's transition matrix.
    """
    rng = np.random.default_rng(spec.seed)
    records: list[tuple[str, str, int]] = []
    item_ids = np.arange(spec.num_items)
    for u in range(spec.num_users):
        length = int(rng.integers(spec.seq_len_range[0], spec.seq_len_range[1] + 1))
        t = int(rng.integers(0, int(30 * SECONDS_PER_DAY)))
        cur = int(rng.integers(0, spec.num_items))
        records.append((f"u{u}", f"i{cur}", t))
        for _ in range(length - 1):
            gap_days = float(rng.uniform(*spec.gap_days_range))
            t += max(1, int(gap_days * SECONDS_PER_DAY))
            if rng.random() < spec.drift_rate(gap_days):
                cur = int(rng.integers(0, spec.num_items))
            else:
                cur = int(rng.choice(item_ids, p=spec.transition[cur]))
            records.append((f"u{u}", f"i{cur}", t))
    return from_records(
        records,
        user_vocab=[f"u{u}" for u in range(spec.num_users)],
        item_vocab=[f"i{j}" for j in range(spec.num_items)],
    )
