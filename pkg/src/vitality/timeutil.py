"""UTC instants, calendar-month indices and month arithmetic.

Months are handled as plain integers (``year * 12 + month - 1``) so they sort,
subtract and index arrays without ceremony.  ``format_month`` / ``parse_month``
convert to and from the ``YYYY-MM`` wire form.
"""
from __future__ import annotations

import calendar
import re
from datetime import datetime, timedelta, timezone

DAYS_PER_MONTH = 30.4375

_HORIZON_RE = re.compile(r"^\s*(\d+)\s*m?\s*$")


def parse_instant(value: str | datetime) -> datetime:
    """Parse an ISO-8601 date or datetime into an aware UTC datetime.

    Naive inputs are taken to be UTC.  Sub-second precision is dropped.
    """
    if isinstance(value, datetime):
        dt = value
    else:
        text = value.strip()
        if text.endswith("Z"):
            text = text[:-1] + "+00:00"
        dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc).replace(microsecond=0)


def format_instant(dt: datetime) -> str:
    return dt.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def month_index(dt: datetime) -> int:
    return dt.year * 12 + dt.month - 1


def month_start(idx: int) -> datetime:
    year, month0 = divmod(idx, 12)
    return datetime(year, month0 + 1, 1, tzinfo=timezone.utc)


def parse_month(value: str) -> int:
    """``"2018-07"`` (or any ISO date inside that month) -> month index."""
    text = value.strip()
    m = re.fullmatch(r"(\d{4})-(\d{2})", text)
    if m:
        year, month = int(m.group(1)), int(m.group(2))
        if not 1 <= month <= 12:
            raise ValueError(f"invalid month: {value!r}")
        return year * 12 + month - 1
    return month_index(parse_instant(text))


def format_month(idx: int) -> str:
    year, month0 = divmod(idx, 12)
    return f"{year:04d}-{month0 + 1:02d}"


def add_months(dt: datetime, n: int) -> datetime:
    """Shift by ``n`` calendar months, clamping the day to the target month."""
    total = month_index(dt) + n
    year, month0 = divmod(total, 12)
    day = min(dt.day, calendar.monthrange(year, month0 + 1)[1])
    return dt.replace(year=year, month=month0 + 1, day=day)


def months_between(start: datetime, end: datetime) -> float:
    """Fractional months from ``start`` to ``end`` (``end >= start``).

    Whole calendar months are counted first, the remainder is converted at
    30.4375 days per month.  Same day-of-month dates therefore give integers.
    """
    if end < start:
        raise ValueError("end precedes start")
    whole = month_index(end) - month_index(start)
    anchor = add_months(start, whole)
    if anchor > end:
        whole -= 1
        anchor = add_months(start, whole)
    rest: timedelta = end - anchor
    return whole + rest.total_seconds() / (DAYS_PER_MONTH * 86400.0)


def parse_horizon(value: str | int) -> int:
    """``"6m"`` or ``6`` -> 6 (months)."""
    if isinstance(value, int):
        months = value
    else:
        m = _HORIZON_RE.match(value)
        if not m:
            raise ValueError(f"horizon must look like '<n>m', got {value!r}")
        months = int(m.group(1))
    if months <= 0:
        raise ValueError("horizon must be positive")
    return months
