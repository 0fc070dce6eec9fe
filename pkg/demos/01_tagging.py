"""Walk through temporal expression recognition and normalization.

Run: python3 demos/01_tagging.py
"""

from chronolm import Granularity, TimePoint, annotate, distance, render, truncate

anchor = TimePoint.parse("2007-02-23")

text = ("The charges were filed in 1993, but last December the case "
        "reopened; a hearing is set for yesterday. Analysts expect a "
        "ruling in 3 weeks, though recently the docket has slipped.")

print(f"anchor: {anchor.isoformat()}\n")
print(text)
print()

for expr in annotate(text, anchor):
    value = expr.normalized.isoformat() if expr.normalized else "(unresolvable)"
    g = expr.granularity if expr.granularity is not None else "-"
    print(f"  [{expr.start:3d}:{expr.end:3d}] {expr.surface!r:20s} -> "
          f"{value:12s} {g}")

print()

# normalized points support truncation, rendering, and distances
day = TimePoint(2006, 12, 5)
print("truncate to month:", truncate(day, Granularity.MONTH).isoformat())
print("rendered:", render(day))
print("months from anchor:",
      distance(truncate(day, Granularity.MONTH),
               truncate(anchor, Granularity.MONTH), Granularity.MONTH))
