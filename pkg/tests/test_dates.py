import random
from datetime import date, timedelta

import pytest
from dateutil.relativedelta import relativedelta
from hypothesis import given, settings
from hypothesis import strategies as st

from citeindex.dates import (DAY, MONTH, YEAR, PartialDate, Timespan, add_months, add_timespan,
                             compute_timespan)


def pd(text):
    return PartialDate.parse(text)


@pytest.mark.parametrize("citing,cited,expected", [
    ("2021-03-10", "2015-03-09", "P6Y0M1D"),
    ("2021", "2015-03-09", "P6Y"),
    ("2021-06", "2015-03-09", "P6Y3M"),
    ("2015-03-09", "2021-03-10", "-P6Y0M1D"),
    ("2020-05-01", "2020-05-01", "P0Y0M0D"),
    ("2021-03-01", "2020-02-29", "P1Y0M1D"),
    ("2020-03-31", "2020-02-29", "P0Y1M2D"),
    ("2019-02", "2017-06-30", "P1Y8M"),
])
def test_compute_timespan_examples(citing, cited, expected):
    assert str(compute_timespan(pd(citing), pd(cited))) == expected


def test_precision_and_truncation():
    assert pd("2021").precision == YEAR
    assert pd("2021-03").precision == MONTH
    assert pd("2021-03-10").precision == DAY
    assert pd("2021-03-10").truncate(MONTH) == pd("2021-03")
    assert str(pd("0999-01")) == "0999-01"


@pytest.mark.parametrize("text", ["2021-13", "2021-02-30", "21-01-01", "2021/01/01", ""])
def test_bad_dates_rejected(text):
    with pytest.raises(ValueError):
        PartialDate.parse(text)


def test_from_parts_drops_bad_trailing_parts():
    assert PartialDate.from_parts([2021, 2, 30]) == pd("2021-02")
    assert PartialDate.from_parts([2021, None]) == pd("2021")
    assert PartialDate.from_parts([]) is None


@pytest.mark.parametrize("text", ["P6Y", "P6Y3M", "P6Y0M1D", "-P1Y8M", "P0Y0M0D"])
def test_timespan_text_round_trip(text):
    assert str(Timespan.parse(text)) == text


def test_add_months_clamps():
    assert add_months(date(2020, 1, 31), 1) == date(2020, 2, 29)
    assert add_months(date(2020, 3, 31), -1) == date(2020, 2, 29)
    assert add_months(date(2020, 12, 15), 1) == date(2021, 1, 15)


_dates = st.dates(min_value=date(1800, 1, 1), max_value=date(2100, 12, 31))


@settings(max_examples=500)
@given(_dates, _dates)
def test_components_match_relativedelta(a, b):
    span = compute_timespan(PartialDate(a.year, a.month, a.day), PartialDate(b.year, b.month, b.day))
    rd = relativedelta(a, b)
    sign = -1 if span.negative else 1
    assert (sign * span.years, sign * span.months, sign * span.days) == (rd.years, rd.months, rd.days)
    assert span.negative == (a < b)


@settings(max_examples=300)
@given(_dates, _dates)
def test_month_precision_matches_month_count(a, b):
    span = compute_timespan(PartialDate(a.year, a.month), PartialDate(b.year, b.month))
    months = (a.year - b.year) * 12 + a.month - b.month
    assert span.years * 12 + span.months == abs(months)
    assert span.days is None


def test_round_trip_under_independent_calendar_arithmetic():
    rng = random.Random(6)
    lo = date(1700, 1, 1)
    failures = 0
    for _ in range(10_000):
        a = lo + timedelta(days=rng.randint(0, 146_000))
        b = lo + timedelta(days=rng.randint(0, 146_000))
        span = compute_timespan(PartialDate(a.year, a.month, a.day), PartialDate(b.year, b.month, b.day))
        s = -1 if span.negative else 1
        failures += b + relativedelta(years=s * span.years, months=s * span.months,
                                      days=s * span.days) != a
        failures += add_timespan(b, span) != a
    assert failures == 0
