"""Temporal expressions: recognition, normalization, rendering, calendar arithmetic.

A time point carries one of three granularities (year, month, day) over the
proleptic Gregorian calendar, with no time zones.  The recognizer is a rule
inventory over plain English surface forms; normalization resolves relative
expressions against an anchor date.  Some recognized expressions (decades,
vague adverbs) have no normalization rule and stay unresolved.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, replace
from datetime import date, timedelta
from typing import Callable, Optional

from .errors import GranularityRefinementError, UnresolvableExpression

MONTH_NAMES = (
    "January", "February", "March", "April", "May", "June",
    "July", "August", "September", "October", "November", "December",
)
# Index matches date.weekday(): Monday is 0.
WEEKDAY_NAMES = (
    "Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday", "Sunday",
)


class Granularity(enum.IntEnum):
    """Calendar granularity with total order YEAR < MONTH < DAY."""

    YEAR = 0
    MONTH = 1
    DAY = 2

    @classmethod
    def parse(cls, name: str) -> "Granularity":
        try:
            return cls[name.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown granularity: {name!r}") from None

    def __str__(self) -> str:
        return self.name.lower()


@dataclass(frozen=True, order=False)
class TimePoint:
    """A calendar point at year, month, or day granularity.

    month is present iff granularity is at least MONTH; day is present iff
    granularity is DAY.  Day-granularity points are validated as real
    calendar dates (years 1 through 9999).
    """

    year: int
    month: Optional[int] = None
    day: Optional[int] = None

    def __post_init__(self) -> None:
        if self.day is not None and self.month is None:
            raise ValueError("day requires month")
        if self.month is not None and not 1 <= self.month <= 12:
            raise ValueError(f"month out of range: {self.month}")
        if self.day is not None:
            date(self.year, self.month, self.day)  # raises ValueError if invalid

    @property
    def granularity(self) -> Granularity:
        if self.day is not None:
            return Granularity.DAY
        if self.month is not None:
            return Granularity.MONTH
        return Granularity.YEAR

    def isoformat(self) -> str:
        if self.day is not None:
            return f"{self.year:04d}-{self.month:02d}-{self.day:02d}"
        if self.month is not None:
            return f"{self.year:04d}-{self.month:02d}"
        return f"{self.year:04d}"

    @classmethod
    def parse(cls, text: str) -> "TimePoint":
        """Parse "YYYY", "YYYY-MM", or "YYYY-MM-DD"."""
        m = re.fullmatch(r"(\d{4})(?:-(\d{1,2})(?:-(\d{1,2}))?)?", text.strip())
        if m is None:
            raise ValueError(f"not a time point: {text!r}")
        year = int(m.group(1))
        month = int(m.group(2)) if m.group(2) else None
        day = int(m.group(3)) if m.group(3) else None
        return cls(year, month, day)

    def to_date(self) -> date:
        if self.granularity is not Granularity.DAY:
            raise GranularityRefinementError(
                f"{self.isoformat()} has no day-level date"
            )
        return date(self.year, self.month, self.day)

    @classmethod
    def from_date(cls, d: date) -> "TimePoint":
        return cls(d.year, d.month, d.day)


def is_leap_year(year: int) -> bool:
    return year % 4 == 0 and not (year % 100 == 0 and year % 400 != 0)


def days_in_month(year: int, month: int) -> int:
    if month == 2:
        return 29 if is_leap_year(year) else 28
    return (31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31)[month - 1]


def truncate(t: TimePoint, g: Granularity) -> TimePoint:
    """Project t onto a coarser (or equal) granularity by dropping finer fields."""
    if g > t.granularity:
        raise GranularityRefinementError(
            f"cannot refine {t.granularity} value {t.isoformat()} to {g}"
        )
    if g is Granularity.YEAR:
        return TimePoint(t.year)
    if g is Granularity.MONTH:
        return TimePoint(t.year, t.month)
    return t


def time_index(t: TimePoint, g: Granularity) -> int:
    """Linear position of t on the axis of granularity g.

    Years count as calendar years, months as months since year 0, days as
    proleptic Gregorian ordinals.  Requires t truncatable to g.
    """
    p = truncate(t, g)
    if g is Granularity.YEAR:
        return p.year
    if g is Granularity.MONTH:
        return p.year * 12 + (p.month - 1)
    return p.to_date().toordinal()


def point_from_index(index: int, g: Granularity) -> TimePoint:
    """Inverse of time_index for granularity g."""
    if g is Granularity.YEAR:
        return TimePoint(index)
    if g is Granularity.MONTH:
        return TimePoint(index // 12, index % 12 + 1)
    return TimePoint.from_date(date.fromordinal(index))


def distance(a: TimePoint, b: TimePoint, g: Granularity) -> int:
    """Absolute number of granularity-g steps between a and b."""
    return abs(time_index(a, g) - time_index(b, g))


def render(t: TimePoint) -> str:
    """Render a time point as the canonical English surface form.

    The output round-trips through recognize and normalize for years in
    the recognizer's 1000..2999 window.
    """
    if t.granularity is Granularity.YEAR:
        return str(t.year)
    if t.granularity is Granularity.MONTH:
        return f"{MONTH_NAMES[t.month - 1]} {t.year}"
    return f"{MONTH_NAMES[t.month - 1]} {t.day}, {t.year}"


@dataclass(frozen=True)
class TemporalExpression:
    """A recognized temporal span of a text.

    start/end are code-point offsets (half-open) and surface is exactly
    text[start:end].  normalized is filled by the annotation step; resolvable
    marks expressions for which a normalization rule exists.
    """

    start: int
    end: int
    surface: str
    normalized: Optional[TimePoint] = None
    resolvable: bool = False

    def __post_init__(self) -> None:
        if not 0 <= self.start < self.end:
            raise ValueError("bad span")
        if self.normalized is not None and not self.resolvable:
            raise ValueError("normalized expression must be resolvable")

    @property
    def granularity(self) -> Optional[Granularity]:
        return None if self.normalized is None else self.normalized.granularity


_NUMBER_WORDS = {
    "one": 1, "two": 2, "three": 3, "four": 4, "five": 5, "six": 6,
    "seven": 7, "eight": 8, "nine": 9, "ten": 10, "eleven": 11, "twelve": 12,
}

_MONTH_RX = "|".join(m.lower() for m in MONTH_NAMES)
_WEEKDAY_RX = "|".join(w.lower() for w in WEEKDAY_NAMES)
_COUNT_RX = r"\d{1,3}|" + "|".join(_NUMBER_WORDS)
_YEAR_RX = r"[12]\d{3}"
_UNIT_RX = r"days?|weeks?|months?|years?"

_MONTH_NUM = {m.lower(): i + 1 for i, m in enumerate(MONTH_NAMES)}
_WEEKDAY_NUM = {w.lower(): i for i, w in enumerate(WEEKDAY_NAMES)}


def _count(text: str) -> int:
    text = text.lower()
    return _NUMBER_WORDS[text] if text in _NUMBER_WORDS else int(text)


def _require_day_anchor(anchor: TimePoint) -> date:
    if anchor.granularity is not Granularity.DAY:
        raise ValueError("anchor must have day granularity")
    return anchor.to_date()


def _safe_day(d: date, delta_days: int) -> Optional[TimePoint]:
    try:
        return TimePoint.from_date(d + timedelta(days=delta_days))
    except OverflowError:
        return None


def _last_weekday(anchor: date, target: int) -> TimePoint:
    # Most recent such weekday strictly before the anchor.
    back = (anchor.weekday() - target) % 7
    return TimePoint.from_date(anchor - timedelta(days=back or 7))


def _next_weekday(anchor: date, target: int) -> TimePoint:
    forward = (target - anchor.weekday()) % 7
    return TimePoint.from_date(anchor + timedelta(days=forward or 7))


def _resolve_iso(m: re.Match, anchor: TimePoint) -> Optional[TimePoint]:
    year, month, day = int(m.group(1)), int(m.group(3)), int(m.group(4))
    try:
        return TimePoint(year, month, day)
    except ValueError:
        return None


def _resolve_month_day_year(m: re.Match, anchor: TimePoint) -> Optional[TimePoint]:
    try:
        return TimePoint(int(m.group(3)), _MONTH_NUM[m.group(1).lower()], int(m.group(2)))
    except ValueError:
        return None


def _resolve_month_year(m: re.Match, anchor: TimePoint) -> Optional[TimePoint]:
    return TimePoint(int(m.group(2)), _MONTH_NUM[m.group(1).lower()])


def _shift(anchor: TimePoint, n: int, unit: str) -> Optional[TimePoint]:
    """Move n units from the anchor; negative n is the past."""
    base = _require_day_anchor(anchor)
    unit = unit.lower().rstrip("s")
    if unit == "day":
        return _safe_day(base, n)
    if unit == "week":
        return _safe_day(base, 7 * n)
    if unit == "month":
        return point_from_index(time_index(anchor, Granularity.MONTH) + n,
                                Granularity.MONTH)
    return TimePoint(anchor.year + n)


def _resolve_count_ago(m: re.Match, anchor: TimePoint) -> Optional[TimePoint]:
    return _shift(anchor, -_count(m.group(1)), m.group(2))


def _resolve_in_count(m: re.Match, anchor: TimePoint) -> Optional[TimePoint]:
    return _shift(anchor, _count(m.group(1)), m.group(2))


def _resolve_last_next(m: re.Match, anchor: TimePoint) -> Optional[TimePoint]:
    base = _require_day_anchor(anchor)
    backward = m.group(1).lower() == "last"
    word = m.group(2).lower()
    if word in _MONTH_NUM:
        # Most recent (or next) such month strictly outside the anchor's month.
        target = _MONTH_NUM[word]
        if backward:
            year = anchor.year - (1 if target >= anchor.month else 0)
        else:
            year = anchor.year + (1 if target <= anchor.month else 0)
        return TimePoint(year, target)
    if word in _WEEKDAY_NUM:
        target = _WEEKDAY_NUM[word]
        return _last_weekday(base, target) if backward else _next_weekday(base, target)
    return _shift(anchor, -1 if backward else 1, word)


def _resolve_weekday(m: re.Match, anchor: TimePoint) -> Optional[TimePoint]:
    return _last_weekday(_require_day_anchor(anchor), _WEEKDAY_NUM[m.group(1).lower()])


def _resolve_relative_day(m: re.Match, anchor: TimePoint) -> Optional[TimePoint]:
    base = _require_day_anchor(anchor)
    offset = {"today": 0, "yesterday": -1, "tomorrow": 1}[m.group(1).lower()]
    return _safe_day(base, offset)


def _resolve_bare_year(m: re.Match, anchor: TimePoint) -> Optional[TimePoint]:
    return TimePoint(int(m.group(1)))


@dataclass(frozen=True)
class _Rule:
    name: str
    pattern: re.Pattern
    resolver: Optional[Callable[[re.Match, TimePoint], Optional[TimePoint]]]


def _rule(name: str, rx: str, resolver) -> _Rule:
    return _Rule(name, re.compile(rx, re.IGNORECASE), resolver)


# Order encodes priority for equal-length overlaps and for normalization.
_RULES: tuple[_Rule, ...] = (
    _rule("iso_date", rf"\b({_YEAR_RX})([-/])(\d{{1,2}})\2(\d{{1,2}})\b", _resolve_iso),
    _rule("month_day_year",
          rf"\b({_MONTH_RX})\s+(\d{{1,2}})\s*,\s*({_YEAR_RX})\b",
          _resolve_month_day_year),
    _rule("month_year", rf"\b({_MONTH_RX})\s+({_YEAR_RX})\b", _resolve_month_year),
    _rule("count_ago", rf"\b({_COUNT_RX})\s+({_UNIT_RX})\s+ago\b", _resolve_count_ago),
    _rule("in_count", rf"\bin\s+({_COUNT_RX})\s+({_UNIT_RX})\b", _resolve_in_count),
    _rule("last_next",
          rf"\b(last|next)\s+({_MONTH_RX}|{_WEEKDAY_RX}|week|month|year)\b",
          _resolve_last_next),
    _rule("weekday", rf"\b({_WEEKDAY_RX})\b", _resolve_weekday),
    _rule("relative_day", r"\b(today|yesterday|tomorrow)\b", _resolve_relative_day),
    _rule("bare_year", rf"(?<!\d)({_YEAR_RX})(?!\d)", _resolve_bare_year),
    _rule("decade", r"\b(?:the\s+)?[12]\d{2}0s\b", None),
    _rule("vague", r"\b(recently|nowadays|soon)\b", None),
)

# A fixed anchor suffices to probe whether a match is a valid calendar form;
# only absolute rules can fail on a valid-looking match.
_PROBE_ANCHOR = TimePoint(2000, 1, 1)
_ABSOLUTE = {"iso_date", "month_day_year", "month_year", "bare_year"}


def recognize(text: str) -> list[TemporalExpression]:
    """Find temporal expression spans in text.

    Candidate matches from every rule are reconciled longest-first, so
    "March 5, 1999" wins over its inner bare year.  Returned expressions
    carry no normalized value; resolvable marks spans a normalization rule
    can handle.
    """
    candidates: list[tuple[int, int, int, _Rule, re.Match]] = []
    for priority, rule in enumerate(_RULES):
        for m in rule.pattern.finditer(text):
            candidates.append((m.start(), m.end(), priority, rule, m))
    candidates.sort(key=lambda c: (-(c[1] - c[0]), c[0], c[2]))

    kept: list[tuple[int, int, _Rule, re.Match]] = []
    for start, end, _, rule, m in candidates:
        if any(start < e and end > s for s, e, _, _ in kept):
            continue
        kept.append((start, end, rule, m))
    kept.sort(key=lambda c: c[0])

    out = []
    for start, end, rule, m in kept:
        resolvable = rule.resolver is not None
        if resolvable and rule.name in _ABSOLUTE:
            resolvable = rule.resolver(m, _PROBE_ANCHOR) is not None
        out.append(TemporalExpression(start, end, text[start:end],
                                      normalized=None, resolvable=resolvable))
    return out


def normalize(expr: TemporalExpression, anchor: TimePoint) -> TimePoint:
    """Resolve an expression to a time point against a day-granularity anchor.

    Raises UnresolvableExpression when no rule produces a value.
    """
    _require_day_anchor(anchor)
    for rule in _RULES:
        if rule.resolver is None:
            continue
        m = rule.pattern.fullmatch(expr.surface)
        if m is None:
            continue
        point = rule.resolver(m, anchor)
        if point is not None:
            return point
    raise UnresolvableExpression(f"no rule resolves {expr.surface!r}")


def annotate(text: str, anchor: TimePoint) -> list[TemporalExpression]:
    """Recognize and normalize in one pass.

    In the output, resolvable is true exactly when normalized is present.
    """
    out = []
    for expr in recognize(text):
        if expr.resolvable:
            try:
                out.append(replace(expr, normalized=normalize(expr, anchor)))
            except UnresolvableExpression:
                # Relative rules can step off the calendar at extreme anchors.
                out.append(replace(expr, resolvable=False))
        else:
            out.append(expr)
    return out
