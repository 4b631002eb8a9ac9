"""Month-end calendar arithmetic."""

from __future__ import annotations

import calendar
import datetime as dt


def month_end(year: int, month: int) -> dt.date:
    return dt.date(year, month, calendar.monthrange(year, month)[1])


def is_month_end(d: dt.date) -> bool:
    return d.day == calendar.monthrange(d.year, d.month)[1]


def is_quarter_end(d: dt.date) -> bool:
    return d.month in (3, 6, 9, 12) and is_month_end(d)


def add_months(d: dt.date, months: int) -> dt.date:
    """Shift ``d`` by whole calendar months, landing on the target month's end.

    Inputs are expected to be month ends, so Mar 31 + 2 is May 31 and
    Dec 31 + 2 is the last day of February.
    """
    idx = d.year * 12 + (d.month - 1) + months
    return month_end(idx // 12, idx % 12 + 1)


def month_index(d: dt.date) -> int:
    return d.year * 12 + (d.month - 1)


def parse_date(text: str) -> dt.date:
    return dt.date.fromisoformat(text.strip())
