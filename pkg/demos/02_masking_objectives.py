"""Show how the three pretraining signals are built from one document.

Run: python3 demos/02_masking_objectives.py
"""

from chronolm import (
    Document,
    Granularity,
    TimePoint,
    annotate,
    build_labelspace,
    build_pretrain_example,
    build_tir,
    build_vocab,
    collect_expression_pool,
    tokenize,
)
from chronolm.objectives import IGNORE_INDEX, Objective

doc = Document("demo", TimePoint(2007, 2, 23),
               "The charges were filed in 1993, but last December the "
               "case reopened; a hearing is set for yesterday.")
neighbors = [
    Document("n1", TimePoint(2005, 6, 1), "A filing from 1988 resurfaced."),
    Document("n2", TimePoint(2006, 3, 9), "Auditors flagged 2001 records."),
]

corpus = [doc] + neighbors
vocab = build_vocab(corpus, max_size=512, include_timestamps=True)
tagged = [(d, annotate(d.text, d.timestamp)) for d in corpus]
tok = tokenize(doc, vocab, tagged[0][1])

space = build_labelspace(TimePoint(1987), TimePoint(2007), Granularity.YEAR)


def show(ids, labels=None):
    row = []
    for i, t in enumerate(ids):
        form = vocab.token_of(t)
        if labels is not None and labels[i] != IGNORE_INDEX:
            form = f"<{form}|{vocab.token_of(labels[i])}>"
        row.append(form)
    print(" ", " ".join(row))


# masked prediction with expression-aware sampling plus a timestamp label
ex = build_pretrain_example(
    doc, tok, frozenset({Objective.TAMLM, Objective.DTP}), space,
    temporal_mask_ratio=0.3, mask_budget=0.15, vocab=vocab, seed=1)
print("masked sequence (<input|target> marks supervised positions):")
show(ex.input_ids, ex.mlm_labels)
print(f"timestamp class: {ex.dtp_label} of {space.size} "
      f"({space.point_at(ex.dtp_label).isoformat()})\n")

# replacement detection: timestamp prefix plus possibly swapped expressions
pool = collect_expression_pool(tagged)
tir = build_tir(doc, tok, pool, replace_prob=0.5, vocab=vocab, seed=1)
print("replacement-detection sequence:")
show(tir.input_ids)
for slot in tir.slots:
    inner = " ".join(vocab.token_of(t) for t in
                     tir.input_ids[slot.boundary_left + 1:slot.boundary_right])
    verdict = "replaced" if slot.label else "kept"
    print(f"  boundaries ({slot.boundary_left}, {slot.boundary_right}) "
          f"around {inner!r}: {verdict}")
