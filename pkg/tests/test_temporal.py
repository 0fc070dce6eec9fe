"""Calendar arithmetic, the expression recognizer, and normalization."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chronolm.errors import GranularityRefinementError, UnresolvableExpression
from chronolm.temporal import (
    Granularity,
    TemporalExpression,
    TimePoint,
    annotate,
    days_in_month,
    distance,
    is_leap_year,
    normalize,
    point_from_index,
    recognize,
    render,
    time_index,
    truncate,
)

from oracles import build_day_numbers, day_distance, leap, month_distance

ANCHOR = TimePoint(2007, 2, 23)


# ---------------------------------------------------------------- TimePoint

def test_granularity_ordering():
    assert Granularity.YEAR < Granularity.MONTH < Granularity.DAY


def test_timepoint_granularity_derived_from_fields():
    assert TimePoint(1999).granularity is Granularity.YEAR
    assert TimePoint(1999, 4).granularity is Granularity.MONTH
    assert TimePoint(1999, 4, 7).granularity is Granularity.DAY


def test_timepoint_rejects_day_without_month():
    with pytest.raises(ValueError):
        TimePoint(1999, None, 7)


def test_timepoint_rejects_calendar_invalid_day():
    with pytest.raises(ValueError):
        TimePoint(1999, 2, 29)
    TimePoint(2000, 2, 29)  # leap year, fine


def test_isoformat_parse_round_trip():
    for text in ("1999", "1999-04", "1999-04-07"):
        assert TimePoint.parse(text).isoformat() == text


def test_parse_rejects_garbage():
    for bad in ("99", "1999-13", "1999-00-01", "1999-02-30", "noise", ""):
        with pytest.raises(ValueError):
            TimePoint.parse(bad)


def test_truncate_frozen_values():
    assert truncate(ANCHOR, Granularity.MONTH) == TimePoint(2007, 2)
    assert truncate(ANCHOR, Granularity.YEAR) == TimePoint(2007)
    assert truncate(ANCHOR, Granularity.DAY) == ANCHOR


def test_truncate_refuses_refinement():
    with pytest.raises(GranularityRefinementError):
        truncate(TimePoint(2007), Granularity.MONTH)
    with pytest.raises(GranularityRefinementError):
        truncate(TimePoint(2007, 2), Granularity.DAY)


# ------------------------------------------------------- calendar arithmetic

def test_leap_rules_match_oracle():
    for year in (1600, 1700, 1900, 2000, 2004, 2023, 2100, 2400):
        assert is_leap_year(year) == leap(year)


def test_days_in_month_february():
    assert days_in_month(2000, 2) == 29
    assert days_in_month(1900, 2) == 28
    assert days_in_month(2004, 2) == 29
    assert days_in_month(2005, 2) == 28


def test_distance_frozen_month_value():
    assert distance(TimePoint(2007, 2), TimePoint(2006, 11), Granularity.MONTH) == 3


def test_day_distance_against_day_iteration_oracle():
    numbers = build_day_numbers(1998, 2002)
    cases = [
        ((2000, 2, 28), (2000, 3, 1)),
        ((1999, 12, 31), (2000, 1, 1)),
        ((1998, 1, 1), (2002, 12, 31)),
        ((2001, 6, 15), (2001, 6, 15)),
    ]
    for a, b in cases:
        expected = day_distance(numbers, a, b)
        got = distance(TimePoint(*a), TimePoint(*b), Granularity.DAY)
        assert got == expected


def test_index_round_trip_all_granularities():
    points = [TimePoint(1987), TimePoint(1987, 6), TimePoint(1987, 6, 15)]
    for p in points:
        g = p.granularity
        assert point_from_index(time_index(p, g), g) == p


@given(
    y1=st.integers(1900, 2100), m1=st.integers(1, 12),
    y2=st.integers(1900, 2100), m2=st.integers(1, 12),
)
def test_month_distance_matches_oracle(y1, m1, y2, m2):
    got = distance(TimePoint(y1, m1), TimePoint(y2, m2), Granularity.MONTH)
    assert got == month_distance((y1, m1), (y2, m2))


@given(st.integers(1600, 2400), st.integers(1, 12), st.integers(1, 28),
       st.integers(-500, 500))
@settings(max_examples=200)
def test_day_index_shift_consistency(y, m, d, delta):
    # moving by delta day indices then measuring distance gives |delta|
    p = TimePoint(y, m, d)
    q = point_from_index(time_index(p, Granularity.DAY) + delta, Granularity.DAY)
    assert distance(p, q, Granularity.DAY) == abs(delta)


# ------------------------------------------------------------------- render

def test_render_each_granularity():
    assert render(TimePoint(1987)) == "1987"
    assert render(TimePoint(1987, 1)) == "January 1987"
    assert render(TimePoint(1987, 1, 12)) == "January 12, 1987"


@given(st.integers(1000, 2999), st.integers(1, 12), st.integers(1, 28))
@settings(max_examples=150)
def test_render_round_trips_through_recognizer(y, m, d):
    for point in (TimePoint(y), TimePoint(y, m), TimePoint(y, m, d)):
        text = render(point)
        exprs = recognize(text)
        assert len(exprs) == 1
        expr = exprs[0]
        assert text[expr.start:expr.end] == text
        assert normalize(expr, ANCHOR) == point


# --------------------------------------------------------------- recognizer

def test_recognize_reference_document():
    text = ("The charges were filed in 1993, but last December the case "
            "reopened; a hearing is set for yesterday.")
    exprs = annotate(text, ANCHOR)
    surfaces = [e.surface for e in exprs]
    assert surfaces == ["1993", "last December", "yesterday"]
    assert exprs[0].normalized == TimePoint(1993)
    assert exprs[0].granularity is Granularity.YEAR
    assert exprs[1].normalized == TimePoint(2006, 12)
    assert exprs[1].granularity is Granularity.MONTH
    assert exprs[2].normalized == TimePoint(2007, 2, 22)
    assert exprs[2].granularity is Granularity.DAY


def test_recognize_spans_index_source_text():
    text = "Signed on March 4, 1921 and revised in 1987."
    for e in recognize(text):
        assert text[e.start:e.end] == e.surface


def test_iso_date_formats():
    for text, expected in [
        ("2021-03-04", TimePoint(2021, 3, 4)),
        ("2021/03/04", TimePoint(2021, 3, 4)),
    ]:
        exprs = recognize(text)
        assert len(exprs) == 1
        assert normalize(exprs[0], ANCHOR) == expected


def test_iso_date_mixed_separators_not_a_date():
    exprs = recognize("2021-03/04")
    # no full mixed-separator date; the year prefix still matches
    assert all(e.surface != "2021-03/04" for e in exprs)


def test_month_name_forms():
    exprs = recognize("in January 1987 and on January 12, 1987")
    surfaces = {e.surface for e in exprs}
    assert "January 1987" in surfaces
    assert "January 12, 1987" in surfaces


def test_longest_match_wins_over_bare_year():
    exprs = recognize("January 12, 1987")
    assert [e.surface for e in exprs] == ["January 12, 1987"]


def test_bare_year_window():
    assert [e.surface for e in recognize("born in 1066 maybe")] == ["1066"]
    assert recognize("item 0999") == []
    assert recognize("year 3000") == []
    assert recognize("id 19871") == []  # digit context blocks the match


def test_relative_counts():
    cases = [
        ("3 days ago", TimePoint(2007, 2, 20)),
        ("three days ago", TimePoint(2007, 2, 20)),
        ("in 2 weeks", TimePoint(2007, 3, 9)),
        ("two months ago", TimePoint(2006, 12)),
        ("in 1 year", TimePoint(2008)),
    ]
    for text, expected in cases:
        exprs = recognize(text)
        assert len(exprs) == 1, text
        assert normalize(exprs[0], ANCHOR) == expected, text


def test_last_next_units():
    cases = [
        ("last year", TimePoint(2006)),
        ("next year", TimePoint(2008)),
        ("last month", TimePoint(2007, 1)),
        ("next month", TimePoint(2007, 3)),
        ("last week", TimePoint(2007, 2, 16)),
        ("next week", TimePoint(2007, 3, 2)),
    ]
    for text, expected in cases:
        exprs = recognize(text)
        assert normalize(exprs[0], ANCHOR) == expected, text


def test_last_month_name_strictly_before_anchor():
    # anchor is 2007-02-23: last December is 2006, last January 2007
    dec = recognize("last December")[0]
    jan = recognize("last January")[0]
    assert normalize(dec, ANCHOR) == TimePoint(2006, 12)
    assert normalize(jan, ANCHOR) == TimePoint(2007, 1)


def test_next_month_name_strictly_after_anchor():
    mar = recognize("next March")[0]
    feb = recognize("next February")[0]
    assert normalize(mar, ANCHOR) == TimePoint(2007, 3)
    assert normalize(feb, ANCHOR) == TimePoint(2008, 2)


def test_bare_weekday_most_recent_before_anchor():
    # 2007-02-23 is a Friday
    assert normalize(recognize("on Friday")[0], ANCHOR) == TimePoint(2007, 2, 16)
    assert normalize(recognize("on Thursday")[0], ANCHOR) == TimePoint(2007, 2, 22)
    assert normalize(recognize("on Saturday")[0], ANCHOR) == TimePoint(2007, 2, 17)


def test_last_next_weekday():
    assert normalize(recognize("last Friday")[0], ANCHOR) == TimePoint(2007, 2, 16)
    assert normalize(recognize("next Friday")[0], ANCHOR) == TimePoint(2007, 3, 2)


def test_relative_day_words():
    assert normalize(recognize("today")[0], ANCHOR) == TimePoint(2007, 2, 23)
    assert normalize(recognize("yesterday")[0], ANCHOR) == TimePoint(2007, 2, 22)
    assert normalize(recognize("tomorrow")[0], ANCHOR) == TimePoint(2007, 2, 24)


def test_vague_and_decade_recognized_but_unresolvable():
    for text in ("the 1980s", "recently", "nowadays", "soon"):
        exprs = recognize(text)
        assert len(exprs) == 1, text
        assert not exprs[0].resolvable
        with pytest.raises(UnresolvableExpression):
            normalize(exprs[0], ANCHOR)


def test_calendar_invalid_absolute_marked_unresolvable():
    exprs = recognize("February 30, 1999")
    assert len(exprs) == 1
    assert not exprs[0].resolvable


def test_annotate_fills_normalized_and_flags():
    exprs = annotate("It rained recently, then again on 2004-08-01.", ANCHOR)
    by_surface = {e.surface: e for e in exprs}
    assert by_surface["recently"].normalized is None
    assert by_surface["2004-08-01"].normalized == TimePoint(2004, 8, 1)


def test_recognize_returns_sorted_non_overlapping():
    text = "From January 1987 to March 4, 1921, and 1993 too."
    exprs = recognize(text)
    for first, second in zip(exprs, exprs[1:]):
        assert first.end <= second.start


def test_normalize_week_counts_at_day_granularity():
    expr = recognize("2 weeks ago")[0]
    point = normalize(expr, ANCHOR)
    assert point == TimePoint(2007, 2, 9)
    assert point.granularity is Granularity.DAY


def test_expression_requires_resolvable_when_normalized():
    with pytest.raises(ValueError):
        TemporalExpression(0, 4, "1999", normalized=TimePoint(1999),
                           resolvable=False)


@given(st.text(alphabet=st.characters(blacklist_categories=("Cs",)),
               max_size=80))
@settings(max_examples=200)
def test_recognize_never_crashes_and_spans_are_sane(text):
    for e in recognize(text):
        assert 0 <= e.start < e.end <= len(text)
        assert text[e.start:e.end] == e.surface
