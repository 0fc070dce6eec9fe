"""Evaluation protocols: accuracy, calendar error, chance-level baseline,
and the two ranking metrics.

Run: python3 demos/04_metrics_and_baseline.py
"""

from chronolm import (
    Granularity,
    Prediction,
    RankedDates,
    TimePoint,
    accuracy,
    build_labelspace,
    mae,
    mean_average_precision,
    mrr,
    random_guess,
)

g = Granularity.YEAR
predictions = [
    Prediction(TimePoint(1999), TimePoint(1999), g),
    Prediction(TimePoint(2003), TimePoint(1999), g),
    Prediction(TimePoint(1995), TimePoint(1996), g),
    Prediction(TimePoint(2001), TimePoint(2001), g),
]
print(f"accuracy: {accuracy(predictions):.1f}%")
print(f"mean absolute error: {mae(predictions, g):.2f} years\n")

# what would guessing uniformly over the label space score?
space = build_labelspace(TimePoint(1987), TimePoint(2007), g)
golds = [space.point_at(i % space.size) for i in range(210)]
base_acc, base_mae = random_guess(space, golds, trials=1000, seed=0)
k = space.size
print(f"random guessing over {k} years with uniform golds: "
      f"acc {base_acc:.2f}% (analytic {100.0 / k:.2f}), "
      f"mae {base_mae:.2f} (analytic {(k * k - 1) / (3 * k):.2f})\n")

# ranking metrics over explicit score lists
def ranked(query, scored, relevant):
    return RankedDates(query,
                       tuple((TimePoint(y), s) for y, s in scored),
                       frozenset(TimePoint(y) for y in relevant))

queries = [
    ranked("the 1991 summit", [(1991, .9), (1992, .5), (1990, .1)], [1991]),
    ranked("a 1990 accord", [(1992, .8), (1991, .6), (1990, .4)], [1990]),
]
print(f"MRR (gold at ranks 1 and 3): {mrr(queries):.3f}")

multi = [ranked("q", [(1990, .9), (1991, .8), (1992, .7), (1993, .6)],
                [1990, 1992])]
print(f"MAP (hits at ranks 1 and 3): {mean_average_precision(multi):.3f}")
