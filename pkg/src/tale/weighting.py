"""Per-entry weights: time-interval decay on source items, trend-aware
popularity normalization, whole-period symmetric normalization, position
decay, and inference-time recency weights.

Timestamps are seconds; decay constants and window sizes are day-scale
(``seconds_per_unit`` on the configs overrides the conversion).
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .dataio import InteractionLog
from .timeutil import SECONDS_PER_DAY


@dataclass(frozen=True)
class TimeWeightConfig:
    """Source-item decay: max(exp(-interval_days / tau_time), c)."""

    tau_time: float
    c: float
    seconds_per_unit: float = SECONDS_PER_DAY

    def __post_init__(self):
        if self.tau_time <= 0:
            raise ValueError("tau_time must be positive")
        if not 0.0 <= self.c <= 1.0:
            raise ValueError("c must be in [0, 1]")
        if self.seconds_per_unit <= 0:
            raise ValueError("seconds_per_unit must be positive")


@dataclass(frozen=True)
class TrendNormConfig:
    """Windowed-popularity normalization: weight = popularity^(-gamma),
    counting interactions within +/- window_n days (or the past 2N days
    when past_only is set)."""

    window_n: int
    gamma: float = 0.5
    past_only: bool = False
    seconds_per_unit: float = SECONDS_PER_DAY

    def __post_init__(self):
        if self.window_n <= 0:
            raise ValueError("window_n must be a positive day count")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")


def time_interval_weight(
    t_target: int,
    t_source: int,
    cfg: TimeWeightConfig,
    counters: Counter | None = None,
) -> float:
    """Decay weight for one source item relative to its target's timestamp.

    Out-of-order timestamps (target before source) clamp the interval to 0;
    pass a Counter to tally how often that happens.
    """
    dt = t_target - t_source
    if dt < 0:
        if counters is not None:
            counters["clamped_negative_interval"] += 1
        dt = 0
    days = dt / cfg.seconds_per_unit
    return float(np.maximum(np.exp(-days / cfg.tau_time), cfg.c))


def time_interval_weights(
    t_target, t_sources: np.ndarray, cfg: TimeWeightConfig
) -> np.ndarray:
    """Vectorized variant; negative intervals are clamped to 0."""
    dt = np.maximum(np.asarray(t_target, dtype=np.float64) - t_sources, 0.0)
    return np.maximum(np.exp(-dt / (cfg.seconds_per_unit * cfg.tau_time)), cfg.c)


@dataclass
class PopularityIndex:
    """Per-item sorted interaction timestamps from the training log."""

    timestamps: list[np.ndarray]

    @classmethod
    def from_log(cls, log: InteractionLog) -> "PopularityIndex":
        per_item: list[np.ndarray] = []
        order = np.argsort(log.items, kind="stable")
        items_sorted = log.items[order]
        times_sorted = log.times[order]
        bounds = np.searchsorted(items_sorted, np.arange(log.num_items + 1))
        for j in range(log.num_items):
            ts = np.sort(times_sorted[bounds[j] : bounds[j + 1]])
            per_item.append(ts)
        return cls(per_item)

    @property
    def num_items(self) -> int:
        return len(self.timestamps)

    def total_count(self, item: int) -> int:
        return len(self.timestamps[item])


def trend_popularity(
    index: PopularityIndex, item: int, t: int, cfg: TrendNormConfig
) -> int:
    """Training interactions of ``item`` within the window around ``t``.

    Two-sided window: |t_other - t| <= N days; past-only: t - 2N days .. t.
    Items with no training interactions return 0. Binary search over the
    sorted per-item timestamps.
    """
    if not 0 <= item < index.num_items:
        raise IndexError(f"item {item} outside catalog of {index.num_items}")
    ts = index.timestamps[item]
    if len(ts) == 0:
        return 0
    w = cfg.window_n * cfg.seconds_per_unit
    if cfg.past_only:
        lo = np.searchsorted(ts, t - 2 * w, side="left")
        hi = np.searchsorted(ts, t, side="right")
    else:
        lo = np.searchsorted(ts, t - w, side="left")
        hi = np.searchsorted(ts, t + w, side="right")
    return int(hi - lo)


def trend_norm_weight(popularity: int, cfg: TrendNormConfig) -> float:
    """popularity^(-gamma); popularity 0 (item unseen in training) maps to
    the neutral weight 1."""
    if popularity < 0:
        raise ValueError("popularity must be >= 0")
    if popularity == 0:
        return 1.0
    return float(np.power(float(popularity), -cfg.gamma))


def trend_weights_for_log(
    log: InteractionLog, index: PopularityIndex, cfg: TrendNormConfig
) -> np.ndarray:
    """Trend weight of every interaction in ``log`` (aligned with its
    arrays): the windowed popularity of that interaction's item around its
    own timestamp, raised to -gamma."""
    pops = np.empty(log.num_interactions, dtype=np.float64)
    w = cfg.window_n * cfg.seconds_per_unit
    order = np.argsort(log.items, kind="stable")
    items_sorted = log.items[order]
    bounds = np.searchsorted(items_sorted, np.arange(log.num_items + 1))
    for j in range(log.num_items):
        sel = order[bounds[j] : bounds[j + 1]]
        if len(sel) == 0:
            continue
        ts = index.timestamps[j]
        t_here = log.times[sel].astype(np.float64)
        if len(ts) == 0:
            pops[sel] = 0.0
            continue
        if cfg.past_only:
            lo = np.searchsorted(ts, t_here - 2 * w, side="left")
            hi = np.searchsorted(ts, t_here, side="right")
        else:
            lo = np.searchsorted(ts, t_here - w, side="left")
            hi = np.searchsorted(ts, t_here + w, side="right")
        pops[sel] = hi - lo
    weights = np.ones_like(pops)
    seen = pops > 0
    weights[seen] = np.power(pops[seen], -cfg.gamma)
    return weights


@dataclass
class SymmetricNorm:
    """Whole-period user/item popularity normalization (baseline): entry
    weight = user_pop^(-gamma) * item_pop^(-gamma)."""

    user_factor: np.ndarray
    item_factor: np.ndarray

    def weight(self, user: int, item: int) -> float:
        return float(self.user_factor[user] * self.item_factor[item])


def symmetric_norm_weights(
    log: InteractionLog,
    gamma: float,
    user_side: bool = True,
    item_side: bool = True,
) -> SymmetricNorm:
    """Precompute whole-period popularity factors; either side can be
    disabled (factor 1). Zero-popularity indices get the neutral factor 1."""

    def factors(counts):
        f = np.ones(len(counts))
        pos = counts > 0
        f[pos] = np.power(counts[pos].astype(np.float64), -gamma)
        return f

    upop = np.bincount(log.users, minlength=log.num_users)
    ipop = np.bincount(log.items, minlength=log.num_items)
    return SymmetricNorm(
        user_factor=factors(upop) if user_side else np.ones(log.num_users),
        item_factor=factors(ipop) if item_side else np.ones(log.num_items),
    )


def position_weight(position_gap: int, tau_pos: float) -> float:
    """exp(-gap / tau_pos): closeness to the last source item / first
    target item, used by the position-aware multi-target baseline."""
    if position_gap < 0:
        raise ValueError("position_gap must be >= 0")
    if tau_pos <= 0:
        raise ValueError("tau_pos must be positive")
    return float(np.exp(-position_gap / tau_pos))


def inference_weights(
    history_length: int, tau_inf: float = 8.0, c_inf: float = 0.0
) -> np.ndarray:
    """Recency weights over a history of the given length: position s
    (1-based) gets max(exp(-(L-s)/tau_inf), c_inf); the last item always
    gets 1. c_inf = 1 disables the weighting."""
    if history_length < 1:
        raise ValueError("history_length must be >= 1")
    if tau_inf <= 0:
        raise ValueError("tau_inf must be positive")
    gaps = np.arange(history_length - 1, -1, -1, dtype=np.float64)
    return np.maximum(np.exp(-gaps / tau_inf), c_inf)
