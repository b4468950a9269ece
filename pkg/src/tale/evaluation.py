"""Leave-one-out ranking metrics (HR@K, NDCG@K) with head/tail and
time-interval-tertile slices.

Each user contributes one test interaction; the scored input is the train
history plus the validation item, and the rank of the held-out item
determines all metrics. Aggregation is an exact mean in user-index order.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .dataio import InteractionLog, SplitDataset
from .inference import build_input_vector, score
from .solver import Model
from .weighting import inference_weights

SLICES = ("All", "Head", "Tail", "Short", "Mid", "Long")


class ProtocolError(RuntimeError):
    """The evaluation protocol was violated (e.g. the truth item is masked)."""


def rank_of_truth(scores: np.ndarray, mask, truth: int) -> int:
    """1-based full-sort rank of the truth item among unmasked items.

    Rank = 1 + #(strictly higher scores) + #(equal scores at lower index),
    the same deterministic tie order as topk.
    """
    n = len(scores)
    if not 0 <= truth < n:
        raise ProtocolError(f"truth item {truth} outside catalog of {n}")
    allowed = np.ones(n, dtype=bool)
    if mask is not None:
        mask_idx = np.fromiter(mask, dtype=np.int64) if isinstance(mask, set) else np.asarray(mask, dtype=np.int64)
        if len(mask_idx):
            allowed[mask_idx] = False
    if not allowed[truth]:
        raise ProtocolError(f"truth item {truth} is masked")
    s_t = scores[truth]
    higher = int(np.count_nonzero(allowed & (scores > s_t)))
    tied_lower = int(np.count_nonzero(allowed[:truth] & (scores[:truth] == s_t)))
    return 1 + higher + tied_lower


def hr_at_k(rank: int, k: int) -> float:
    return 1.0 if rank <= k else 0.0


def ndcg_at_k(rank: int, k: int) -> float:
    """Single-relevant-item discounted gain: 1/log2(rank+1) inside the
    cutoff, else 0."""
    if rank < 1:
        raise ValueError("rank must be >= 1")
    return 1.0 / math.log2(rank + 1) if rank <= k else 0.0


def head_tail_split(train: InteractionLog) -> tuple[set[int], set[int]]:
    """Top ceil(20%) of items by training popularity are Head, the rest
    Tail; boundary ties go to the lower item index."""
    n = train.num_items
    pops = np.bincount(train.items, minlength=n)
    order = np.lexsort((np.arange(n), -pops))
    head_count = math.ceil(0.2 * n)
    head = set(int(j) for j in order[:head_count])
    tail = set(range(n)) - head
    return head, tail


def interval_groups(
    valid: dict[int, tuple[int, int]], test: dict[int, tuple[int, int]]
) -> dict[int, str]:
    """Partition users by the test-validation time interval into empirical
    tertiles (Short/Mid/Long); boundary users fall into the lower group."""
    users = sorted(set(valid) & set(test))
    if not users:
        return {}
    deltas = np.array(
        [max(test[u][1] - valid[u][1], 0) for u in users], dtype=np.float64
    )
    q1, q2 = np.quantile(deltas, [1.0 / 3.0, 2.0 / 3.0])
    groups = {}
    for u, d in zip(users, deltas):
        if d <= q1:
            groups[u] = "Short"
        elif d <= q2:
            groups[u] = "Mid"
        else:
            groups[u] = "Long"
    return groups


@dataclass
class EvalReport:
    """Per-slice HR@K / NDCG@K plus user counts and the evaluation config."""

    ks: list[int]
    metrics: dict[str, dict[str, float]]  # slice -> {"HR@5": ..., "NDCG@5": ...}
    num_users: dict[str, int]
    mask_seen: bool
    config: dict = field(default_factory=dict)
    user_ranks: list[tuple[int, int]] | None = None  # (user, rank), optional dump

    def metric(self, name: str, k: int, slice_: str = "All") -> float:
        return self.metrics[slice_][f"{name}@{k}"]

    def to_dict(self) -> dict:
        return {
            "ks": self.ks,
            "mask_seen": self.mask_seen,
            "metrics": self.metrics,
            "num_users": self.num_users,
            "config": self.config,
        }


def evaluate(
    model: Model,
    split: SplitDataset,
    ks=(1, 5, 10),
    mask_seen: bool = True,
    tau_inf: float = 8.0,
    c_inf: float = 0.0,
    config: dict | None = None,
    collect_ranks: bool = False,
) -> EvalReport:
    """Score every test user and aggregate sliced HR/NDCG.

    The input history is the user's train sequence plus the validation
    item. With mask_seen, history items are excluded from the ranking --
    except the truth item itself, which must stay rankable (sequences may
    repeat items).
    """
    train = split.train
    if model.num_items < train.num_items:
        raise ValueError("model catalog smaller than training catalog")
    ks = sorted(ks)
    head, _ = head_tail_split(train)
    groups = interval_groups(split.valid, split.test)

    sums = {s: {f"{m}@{k}": 0.0 for m in ("HR", "NDCG") for k in ks} for s in SLICES}
    counts = {s: 0 for s in SLICES}
    ranks_dump: list[tuple[int, int]] = []

    for user in sorted(split.test):
        truth, _t_truth = split.test[user]
        items, _times = train.user_slice(user)
        history = list(items)
        if user in split.valid:
            history.append(split.valid[user][0])
        if not history:
            continue
        weights = inference_weights(len(history), tau_inf=tau_inf, c_inf=c_inf)
        x = build_input_vector(history, weights, model.num_items)
        scores = score(x, model)
        mask = None
        if mask_seen:
            mask = set(int(i) for i in history)
            mask.discard(truth)
        rank = rank_of_truth(scores, mask, truth)
        if collect_ranks:
            ranks_dump.append((user, rank))

        slices = ["All", "Head" if truth in head else "Tail"]
        if user in groups:
            slices.append(groups[user])
        for s in slices:
            counts[s] += 1
            for k in ks:
                sums[s][f"HR@{k}"] += hr_at_k(rank, k)
                sums[s][f"NDCG@{k}"] += ndcg_at_k(rank, k)

    metrics = {
        s: {
            name: (sums[s][name] / counts[s] if counts[s] else 0.0)
            for name in sums[s]
        }
        for s in SLICES
    }
    return EvalReport(
        ks=list(ks),
        metrics=metrics,
        num_users=dict(counts),
        mask_seen=mask_seen,
        config=dict(config or {}),
        user_ranks=ranks_dump if collect_ranks else None,
    )


def write_report_json(report: EvalReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_report_csv(report: EvalReport, path) -> None:
    """One row per slice x metric: slice, metric, k, value, num_users."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["slice", "metric", "k", "value", "num_users"])
        for s in SLICES:
            for name in ("HR", "NDCG"):
                for k in report.ks:
                    writer.writerow(
                        [s, name, k, f"{report.metrics[s][f'{name}@{k}']:.6f}", report.num_users[s]]
                    )


def write_rank_dump(report: EvalReport, path) -> None:
    if report.user_ranks is None:
        raise ValueError("report was built without collect_ranks")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("user\trank\n")
        for user, rank in report.user_ranks:
            fh.write(f"{user}\t{rank}\n")
