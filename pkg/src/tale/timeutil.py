"""Timestamp conventions shared across the package.

All raw timestamps are integer seconds since the epoch; day-scale
quantities (decay constants, window sizes, reported intervals) divide by
SECONDS_PER_DAY.
"""

from __future__ import annotations

import datetime as _dt

SECONDS_PER_DAY = 86400.0


def seconds_to_days(seconds) -> float:
    return seconds / SECONDS_PER_DAY


def days_to_seconds(days) -> float:
    return days * SECONDS_PER_DAY


def parse_timestamp(text: str) -> int:
    """Parse an epoch-second integer or an ISO date like 2019-01-01 (UTC midnight)."""
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        pass
    d = _dt.datetime.strptime(text, "%Y-%m-%d").replace(tzinfo=_dt.timezone.utc)
    return int(d.timestamp())
