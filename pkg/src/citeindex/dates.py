"""Reduced-precision publication dates and citation timespans."""

from __future__ import annotations

import calendar
import re
from dataclasses import dataclass
from functools import lru_cache
from datetime import date, timedelta

YEAR, MONTH, DAY = 1, 2, 3

_DATE_RE = re.compile(r"(\d{4})(?:-(\d{2})(?:-(\d{2}))?)?")
_DURATION_RE = re.compile(r"(-?)P(\d+)Y(?:(\d+)M(?:(\d+)D)?)?")


@dataclass(frozen=True, order=True)
class PartialDate:
    """An ISO-8601 date at year, year-month or full precision."""

    year: int
    month: int | None = None
    day: int | None = None

    def __post_init__(self):
        if not 1 <= self.year <= 9999:
            raise ValueError(f"year out of range: {self.year}")
        if self.day is not None and self.month is None:
            raise ValueError("day requires month")
        if self.month is not None and not 1 <= self.month <= 12:
            raise ValueError(f"month out of range: {self.month}")
        if self.day is not None:
            date(self.year, self.month, self.day)  # raises on impossible days

    @property
    def precision(self) -> int:
        return DAY if self.day is not None else MONTH if self.month is not None else YEAR

    @classmethod
    @lru_cache(maxsize=1 << 16)
    def parse(cls, text: str) -> "PartialDate":
        m = _DATE_RE.fullmatch(text.strip())
        if not m:
            raise ValueError(f"not an ISO partial date: {text!r}")
        return cls(*(int(g) if g else None for g in m.groups()))

    @classmethod
    def from_parts(cls, parts) -> "PartialDate | None":
        """Build from a ``[year, month, day]`` list such as Crossref date-parts.

        Trailing parts that are missing or invalid are dropped rather than
        rejecting the whole date.
        """
        parts = [int(p) for p in parts if p not in (None, "")]
        if not parts:
            return None
        for n in range(min(len(parts), 3), 0, -1):
            try:
                return cls(*parts[:n])
            except ValueError:
                continue
        return None

    def truncate(self, precision: int) -> "PartialDate":
        if precision >= self.precision:
            return self
        if precision == YEAR:
            return PartialDate(self.year)
        return PartialDate(self.year, self.month)

    def to_date(self) -> date:
        return date(self.year, self.month or 1, self.day or 1)

    def __str__(self) -> str:
        text = f"{self.year:04d}"
        if self.month is not None:
            text += f"-{self.month:02d}"
        if self.day is not None:
            text += f"-{self.day:02d}"
        return text


@dataclass(frozen=True)
class Timespan:
    """Signed calendar duration at year, month or day precision.

    ``months``/``days`` are None when below the precision of the dates it
    was computed from; the XSD form then omits them ("P6Y", "P6Y3M").
    """

    years: int
    months: int | None = None
    days: int | None = None
    negative: bool = False

    def __str__(self) -> str:
        text = f"{'-' if self.negative else ''}P{self.years}Y"
        if self.months is not None:
            text += f"{self.months}M"
            if self.days is not None:
                text += f"{self.days}D"
        return text

    @classmethod
    @lru_cache(maxsize=1 << 16)
    def parse(cls, text: str) -> "Timespan":
        m = _DURATION_RE.fullmatch(text.strip())
        if not m:
            raise ValueError(f"unsupported duration: {text!r}")
        sign, y, mo, d = m.groups()
        return cls(int(y), int(mo) if mo else None, int(d) if d else None, sign == "-")


def add_months(d: date, months: int) -> date:
    """Shift ``d`` by whole months, clamping to the last day of the month."""
    index = d.year * 12 + d.month - 1 + months
    year, month = divmod(index, 12)
    month += 1
    return date(year, month, min(d.day, calendar.monthrange(year, month)[1]))


def add_timespan(d: date, span: Timespan) -> date:
    """Apply a timespan: whole months first (with clamping), then days."""
    sign = -1 if span.negative else 1
    months = span.years * 12 + (span.months or 0)
    shifted = add_months(d, sign * months)
    return shifted + timedelta(days=sign * (span.days or 0))


def _month_day_diff(target: date, start: date, sign: int) -> tuple[int, int]:
    # largest m with add_months(start, sign*m) not overshooting target
    m = abs((target.year - start.year) * 12 + target.month - start.month)
    while m > 0:
        probe = add_months(start, sign * m)
        if (probe <= target) if sign > 0 else (probe >= target):
            break
        m -= 1
    return m, abs((target - add_months(start, sign * m)).days)


@lru_cache(maxsize=1 << 16)
def compute_timespan(citing: PartialDate, cited: PartialDate) -> Timespan:
    """Calendar difference ``citing - cited`` at the two dates' common precision."""
    precision = min(citing.precision, cited.precision)
    a, b = citing.truncate(precision), cited.truncate(precision)
    negative = a < b
    if precision == YEAR:
        return Timespan(abs(a.year - b.year), negative=negative)
    if precision == MONTH:
        months = abs((a.year - b.year) * 12 + a.month - b.month)
        return Timespan(months // 12, months % 12, negative=negative)
    months, days = _month_day_diff(a.to_date(), b.to_date(), -1 if negative else 1)
    return Timespan(months // 12, months % 12, days, negative=negative)
