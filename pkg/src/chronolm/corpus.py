"""Corpus loading, word-level vocabulary, tokenization, expression alignment.

Documents arrive as JSONL records with an id, a day-granularity timestamp,
and raw text.  The tokenizer splits on whitespace and punctuation boundaries;
punctuation marks are their own tokens.  Temporal expressions are aligned to
the minimal contiguous token range covering their character span.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional, Sequence

from . import util
from .errors import (
    AlignmentError,
    EmptyCorpus,
    InvalidTimestamp,
    MalformedRecord,
)
from .temporal import Granularity, TemporalExpression, TimePoint, render

PAD, UNK, CLS, SEP, MASK = 0, 1, 2, 3, 4
SPECIAL_TOKENS = ("[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]")

_TOKEN_RX = re.compile(r"\w+|[^\w\s]")
_TIMESTAMP_RX = re.compile(r"\d{4}-\d{2}-\d{2}")


@dataclass(frozen=True)
class Document:
    id: str
    timestamp: TimePoint  # day granularity
    text: str

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("document id must be non-empty")
        if self.timestamp.granularity is not Granularity.DAY:
            raise ValueError("document timestamp must have day granularity")


def word_spans(text: str, lowercase: bool = False) -> list[tuple[str, int, int]]:
    """Split text into (form, start, end) word and punctuation tokens.

    The form is the vocabulary lookup key; spans index the original text.
    """
    out = []
    for m in _TOKEN_RX.finditer(text):
        form = m.group(0)
        out.append((form.lower() if lowercase else form, m.start(), m.end()))
    return out


class Vocab:
    """Dense token-to-id table with five fixed special tokens up front."""

    def __init__(self, tokens: Sequence[str]):
        tokens = tuple(tokens)
        if tokens[: len(SPECIAL_TOKENS)] != SPECIAL_TOKENS:
            raise ValueError("vocabulary must start with the special tokens")
        if len(set(tokens)) != len(tokens):
            raise ValueError("vocabulary tokens must be unique")
        if any("\n" in t or t == "" for t in tokens):
            raise ValueError("tokens must be non-empty and newline-free")
        self.tokens = tokens
        self._ids = {t: i for i, t in enumerate(tokens)}

    @property
    def size(self) -> int:
        return len(self.tokens)

    def id_of(self, token: str) -> int:
        return self._ids.get(token, UNK)

    def token_of(self, token_id: int) -> str:
        return self.tokens[token_id]

    def __contains__(self, token: str) -> bool:
        return token in self._ids

    def content_hash(self) -> str:
        return hashlib.sha256("\n".join(self.tokens).encode("utf-8")).hexdigest()

    def save(self, path: str) -> None:
        util.atomic_write_text(path, "\n".join(self.tokens) + "\n")

    @classmethod
    def load(cls, path: str) -> "Vocab":
        with open(path, "r", encoding="utf-8") as fh:
            tokens = [line.rstrip("\n") for line in fh if line.rstrip("\n")]
        return cls(tokens)


def parse_document(obj: dict, lineno: int = 0) -> Document:
    where = f"line {lineno}" if lineno else "record"
    if not isinstance(obj, dict):
        raise MalformedRecord(f"{where}: not an object")
    for field in ("id", "timestamp", "text"):
        if field not in obj:
            raise MalformedRecord(f"{where}: missing field {field!r}")
    doc_id, stamp, text = obj["id"], obj["timestamp"], obj["text"]
    if not isinstance(doc_id, str) or not doc_id:
        raise MalformedRecord(f"{where}: id must be a non-empty string")
    if not isinstance(text, str):
        raise MalformedRecord(f"{where}: text must be a string")
    if not isinstance(stamp, str) or _TIMESTAMP_RX.fullmatch(stamp) is None:
        raise InvalidTimestamp(f"{where}: timestamp must look like YYYY-MM-DD")
    try:
        point = TimePoint.parse(stamp)
    except ValueError as exc:
        raise InvalidTimestamp(f"{where}: {exc}") from None
    if point.granularity is not Granularity.DAY:
        raise InvalidTimestamp(f"{where}: timestamp must name a day")
    return Document(doc_id, point, text)


def load_corpus(path: str) -> Iterator[Document]:
    """Stream documents from a JSONL file, validating each record.

    Raises MalformedRecord (with the line number) on bad JSON, missing
    fields, or duplicate ids; InvalidTimestamp on calendar-invalid stamps;
    EmptyCorpus when the file holds no records.
    """
    seen: set[str] = set()
    count = 0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(f"line {lineno}: invalid JSON ({exc.msg})") from None
            doc = parse_document(obj, lineno)
            if doc.id in seen:
                raise MalformedRecord(f"line {lineno}: duplicate id {doc.id!r}")
            seen.add(doc.id)
            count += 1
            yield doc
    if count == 0:
        raise EmptyCorpus(f"no documents in {path}")


def build_vocab(
    docs: Iterable[Document],
    max_size: int,
    min_freq: int = 1,
    lowercase: bool = False,
    include_timestamps: bool = False,
) -> Vocab:
    """Rank word-level tokens by frequency, then lexicographically.

    max_size counts the special tokens; ids are assigned densely in rank
    order after the specials.  include_timestamps also counts each
    document's rendered timestamp, so sequences that splice rendered
    dates in front of the text stay in-vocabulary.
    """
    if max_size <= len(SPECIAL_TOKENS):
        raise ValueError(f"max_size must exceed {len(SPECIAL_TOKENS)}")
    if min_freq < 1:
        raise ValueError("min_freq must be at least 1")
    counts: dict[str, int] = {}
    n_docs = 0
    for doc in docs:
        n_docs += 1
        text = doc.text
        if include_timestamps:
            text = f"{render(doc.timestamp)} {text}"
        for form, _, _ in word_spans(text, lowercase):
            counts[form] = counts.get(form, 0) + 1
    if n_docs == 0:
        raise EmptyCorpus("no documents supplied")
    ranked = sorted(
        (t for t, c in counts.items() if c >= min_freq),
        key=lambda t: (-counts[t], t),
    )
    room = max_size - len(SPECIAL_TOKENS)
    return Vocab(SPECIAL_TOKENS + tuple(ranked[:room]))


@dataclass(frozen=True)
class TemporalGroup:
    """A temporal expression mapped onto a token range [token_start, token_end)."""

    expression_index: int
    token_start: int
    token_end: int
    resolvable: bool
    normalized: Optional[TimePoint]

    def __post_init__(self) -> None:
        if not 0 <= self.token_start < self.token_end:
            raise ValueError("empty token range")

    @property
    def positions(self) -> range:
        return range(self.token_start, self.token_end)


@dataclass(frozen=True)
class TokenizedDoc:
    doc_id: str
    token_ids: tuple[int, ...]
    token_spans: tuple[tuple[int, int], ...]
    temporal_groups: tuple[TemporalGroup, ...]


def tokenize(
    doc: Document,
    vocab: Vocab,
    expressions: Sequence[TemporalExpression],
    lowercase: bool = False,
    max_len: Optional[int] = None,
) -> TokenizedDoc:
    """Tokenize a document and align its expressions to token ranges.

    When max_len is given, tokens beyond max_len - 2 are cut (leaving room
    for the sequence delimiters added downstream) and groups wholly or
    partly beyond the cut are dropped.  A token lands in at most one group;
    when two expressions collide on a token, the later one is dropped.
    """
    full = word_spans(doc.text, lowercase)
    spans = full
    if max_len is not None:
        if max_len < 3:
            raise ValueError("max_len must be at least 3")
        spans = full[: max_len - 2]
    ids = tuple(vocab.id_of(form) for form, _, _ in spans)

    groups: list[TemporalGroup] = []
    for index, expr in enumerate(expressions):
        covering = [
            k for k, (_, s, e) in enumerate(full)
            if s < expr.end and e > expr.start
        ]
        if not covering:
            raise AlignmentError(
                f"doc {doc.id}: expression at {expr.start}:{expr.end} covers no token"
            )
        start, end = covering[0], covering[-1] + 1
        if len(covering) != end - start:
            raise AlignmentError(
                f"doc {doc.id}: expression at {expr.start}:{expr.end} is not contiguous"
            )
        if full[start][1] != expr.start or full[end - 1][2] != expr.end:
            raise AlignmentError(
                f"doc {doc.id}: expression at {expr.start}:{expr.end} "
                "does not align with token boundaries"
            )
        if end > len(spans):
            continue  # dropped by truncation
        if groups and start < groups[-1].token_end:
            continue  # token already claimed by an earlier expression
        groups.append(TemporalGroup(index, start, end, expr.resolvable,
                                    expr.normalized))
    return TokenizedDoc(doc.id, ids, tuple((s, e) for _, s, e in spans),
                        tuple(groups))


def expression_to_json(expr: TemporalExpression) -> dict:
    return {
        "start": expr.start,
        "end": expr.end,
        "surface": expr.surface,
        "normalized": None if expr.normalized is None else expr.normalized.isoformat(),
        "granularity": None if expr.granularity is None else str(expr.granularity),
    }


def expression_from_json(obj: dict) -> TemporalExpression:
    normalized = obj.get("normalized")
    point = None if normalized is None else TimePoint.parse(normalized)
    return TemporalExpression(
        start=obj["start"],
        end=obj["end"],
        surface=obj["surface"],
        normalized=point,
        resolvable=point is not None,
    )


def tagged_to_json(doc: Document, expressions: Sequence[TemporalExpression]) -> dict:
    return {
        "id": doc.id,
        "timestamp": doc.timestamp.isoformat(),
        "text": doc.text,
        "expressions": [expression_to_json(e) for e in expressions],
    }


def load_tagged(path: str) -> Iterator[tuple[Document, list[TemporalExpression]]]:
    """Stream (document, expressions) pairs from a tagged JSONL file."""
    count = 0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(f"line {lineno}: invalid JSON ({exc.msg})") from None
            if "expressions" not in obj or "text" not in obj:
                raise MalformedRecord(f"line {lineno}: not a tagged record")
            doc = parse_document(obj, lineno)
            exprs = [expression_from_json(e) for e in obj["expressions"]]
            count += 1
            yield doc, exprs
    if count == 0:
        raise EmptyCorpus(f"no documents in {path}")
